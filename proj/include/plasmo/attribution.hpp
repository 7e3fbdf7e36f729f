#pragma once

#include <functional>
#include <iosfwd>
#include <string>
#include <vector>

#include "plasmo/types.hpp"

namespace plasmo::attribution {

// groups partition the model input indices; the material one-hot pair is one
// group so coalitions never contain invalid encodings
struct FeatureGroups {
  std::vector<std::string> names;
  std::vector<std::vector<int>> indices;

  void validate(int n_features) const;
};

// thickness | wavelength | material(one-hot pair) over the 4-wide input
FeatureGroups surrogate_groups();

struct Explanation {
  double base_value = 0.0;
  std::vector<double> phi;  // per group
  double prediction = 0.0;
  int instance = -1;
};

// deterministic single-output model over feature vectors (column batches)
using ModelFn = std::function<VecXd(const MatXd&)>;

// exact interventional Shapley values: v(S) = mean over background rows of
// model(instance features on S, background features off S); full coalition
// enumeration (2^groups evaluations)
Explanation shapley_exact(const ModelFn& model, const VecXd& instance,
                          const MatXd& background, const FeatureGroups& groups);

struct GlobalImportance {
  std::vector<std::string> names;       // ranked, descending mean |phi|
  std::vector<double> mean_abs_phi;     // aligned with names
  std::vector<Explanation> per_instance;
};

GlobalImportance global_importance(const ModelFn& model, const MatXd& instances,
                                   const MatXd& background,
                                   const FeatureGroups& groups);

// instance_id,base_value,phi_<group...>,prediction
void write_explanations_csv(std::ostream& out, const FeatureGroups& groups,
                            const std::vector<Explanation>& explanations);
// rank,group,mean_abs_phi
void write_summary_csv(std::ostream& out, const GlobalImportance& imp);

// seeded background subsampling cap (default background policy: training
// set rows capped at 256)
MatXd subsample_background(const MatXd& background, int cap, std::uint64_t seed);

}  // namespace plasmo::attribution
