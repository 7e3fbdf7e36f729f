#include "plasmo/attribution.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <sstream>

#include "plasmo/io.hpp"

namespace plasmo::attribution {

void FeatureGroups::validate(int n_features) const {
  if (names.size() != indices.size())
    throw Error("feature groups: names/indices size mismatch");
  std::vector<int> seen(n_features, 0);
  for (const auto& group : indices)
    for (int idx : group) {
      if (idx < 0 || idx >= n_features)
        throw Error("feature groups: index out of range");
      seen[idx] += 1;
    }
  for (int c : seen)
    if (c != 1)
      throw Error("feature groups: indices must partition the features");
}

FeatureGroups surrogate_groups() {
  FeatureGroups g;
  g.names = {"thickness", "wavelength", "material"};
  g.indices = {{0}, {1}, {2, 3}};
  return g;
}

namespace {

double factorial(int n) {
  double f = 1.0;
  for (int k = 2; k <= n; ++k) f *= k;
  return f;
}

// v(S): mean model output over background rows with the instance's features
// substituted on the groups in S
double coalition_value(const ModelFn& model, const VecXd& instance,
                       const MatXd& background, const FeatureGroups& groups,
                       unsigned mask) {
  MatXd x = background;
  for (size_t gi = 0; gi < groups.indices.size(); ++gi) {
    if (!(mask & (1u << gi))) continue;
    for (int idx : groups.indices[gi]) x.row(idx).setConstant(instance[idx]);
  }
  return model(x).mean();
}

}  // namespace

Explanation shapley_exact(const ModelFn& model, const VecXd& instance,
                          const MatXd& background, const FeatureGroups& groups) {
  const int n = static_cast<int>(groups.indices.size());
  if (n <= 0 || n > 16) throw Error("shapley_exact: bad group count");
  groups.validate(static_cast<int>(instance.size()));
  if (background.cols() < 1) throw Error("shapley_exact: empty background");
  if (background.rows() != instance.size())
    throw Error("shapley_exact: background width mismatch");

  // all coalition values once
  const unsigned full = (1u << n) - 1u;
  std::vector<double> value(full + 1);
  for (unsigned mask = 0; mask <= full; ++mask)
    value[mask] = coalition_value(model, instance, background, groups, mask);

  const double nfact = factorial(n);
  Explanation ex;
  ex.base_value = value[0];
  ex.prediction = value[full];
  ex.phi.assign(n, 0.0);
  for (int gi = 0; gi < n; ++gi) {
    for (unsigned mask = 0; mask <= full; ++mask) {
      if (mask & (1u << gi)) continue;
      const int s = __builtin_popcount(mask);
      const double weight = factorial(s) * factorial(n - s - 1) / nfact;
      ex.phi[gi] += weight * (value[mask | (1u << gi)] - value[mask]);
    }
  }
  return ex;
}

GlobalImportance global_importance(const ModelFn& model, const MatXd& instances,
                                   const MatXd& background,
                                   const FeatureGroups& groups) {
  if (instances.cols() < 10)
    throw Error("global_importance: need at least 10 instances");
  GlobalImportance imp;
  const int n = static_cast<int>(groups.indices.size());
  std::vector<double> acc(n, 0.0);
  for (int k = 0; k < instances.cols(); ++k) {
    Explanation ex = shapley_exact(model, instances.col(k), background, groups);
    ex.instance = k;
    for (int gi = 0; gi < n; ++gi) acc[gi] += std::abs(ex.phi[gi]);
    imp.per_instance.push_back(std::move(ex));
  }
  for (double& a : acc) a /= static_cast<double>(instances.cols());

  std::vector<int> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](int a, int b) { return acc[a] > acc[b]; });
  for (int gi : order) {
    imp.names.push_back(groups.names[gi]);
    imp.mean_abs_phi.push_back(acc[gi]);
  }
  return imp;
}

void write_explanations_csv(std::ostream& out, const FeatureGroups& groups,
                            const std::vector<Explanation>& explanations) {
  out << "instance_id,base_value";
  for (const auto& name : groups.names) out << ",phi_" << name;
  out << ",prediction\n";
  for (const auto& ex : explanations) {
    out << ex.instance << ',' << io::format_full(ex.base_value);
    for (double phi : ex.phi) out << ',' << io::format_full(phi);
    out << ',' << io::format_full(ex.prediction) << "\n";
  }
}

void write_summary_csv(std::ostream& out, const GlobalImportance& imp) {
  out << "rank,group,mean_abs_phi\n";
  for (size_t i = 0; i < imp.names.size(); ++i)
    out << (i + 1) << ',' << imp.names[i] << ','
        << io::format_full(imp.mean_abs_phi[i]) << "\n";
}

MatXd subsample_background(const MatXd& background, int cap, std::uint64_t seed) {
  if (background.cols() <= cap) return background;
  std::vector<int> order(background.cols());
  std::iota(order.begin(), order.end(), 0);
  std::mt19937_64 rng(seed);
  std::shuffle(order.begin(), order.end(), rng);
  MatXd out(background.rows(), cap);
  std::sort(order.begin(), order.begin() + cap);
  for (int k = 0; k < cap; ++k) out.col(k) = background.col(order[k]);
  return out;
}

}  // namespace plasmo::attribution
