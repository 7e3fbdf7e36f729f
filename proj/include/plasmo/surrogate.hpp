#pragma once

#include <cstdint>
#include <filesystem>
#include <memory>
#include <random>
#include <string>
#include <vector>

#include "plasmo/dataset.hpp"
#include "plasmo/types.hpp"

namespace plasmo::surrogate {

struct ShapeError : Error {
  using Error::Error;
};
struct FormatError : Error {
  using Error::Error;
};
struct DivergenceError : Error {
  DivergenceError(const std::string& msg, int epoch_, int batch_)
      : Error(msg), epoch(epoch_), batch(batch_) {}
  int epoch;
  int batch;
};

// calibrate: batch statistics like training, but dropout disabled and the
// running stats replaced outright (post-training batch-norm re-estimation)
enum class Mode { train, infer, calibrate };

// batches are column-major: one sample per column, features down the rows
using Batch = MatXd;

class Rng {
 public:
  explicit Rng(std::uint64_t seed) : gen_(seed) {}
  double normal() { return normal_(gen_); }
  double uniform() { return uniform_(gen_); }
  std::uint64_t raw() { return gen_(); }
  std::mt19937_64& engine() { return gen_; }

 private:
  std::mt19937_64 gen_;
  std::normal_distribution<double> normal_{0.0, 1.0};
  std::uniform_real_distribution<double> uniform_{0.0, 1.0};
};

struct Param {
  MatXd* value;
  MatXd* grad;
  std::string name;
};

class Layer {
 public:
  virtual ~Layer() = default;
  virtual Batch forward(const Batch& x, Mode mode, Rng* rng) = 0;
  virtual Batch backward(const Batch& dy) = 0;
  virtual void collect_params(std::vector<Param>& out) = 0;
  // tensors that are state but not trained (batch-norm running stats)
  virtual void collect_state(std::vector<MatXd*>&) {}
  virtual std::string kind() const = 0;
  virtual void clear_cache() {}
};

class Dense : public Layer {
 public:
  Dense(int in, int out, Rng& rng);
  Batch forward(const Batch& x, Mode mode, Rng* rng) override;
  Batch backward(const Batch& dy) override;
  void collect_params(std::vector<Param>& out) override;
  std::string kind() const override { return "dense"; }
  void clear_cache() override { has_cache_ = false; }

  MatXd w, b;      // b is (out, 1)
  MatXd dw, db;

 private:
  MatXd x_;
  bool has_cache_ = false;
};

class Relu : public Layer {
 public:
  Batch forward(const Batch& x, Mode mode, Rng* rng) override;
  Batch backward(const Batch& dy) override;
  void collect_params(std::vector<Param>&) override {}
  std::string kind() const override { return "relu"; }
  void clear_cache() override { has_cache_ = false; }

 private:
  MatXd mask_;
  bool has_cache_ = false;
};

// per-feature batch normalization; running stats with momentum 0.9, eps 1e-5
class BatchNorm : public Layer {
 public:
  explicit BatchNorm(int features);
  Batch forward(const Batch& x, Mode mode, Rng* rng) override;
  Batch backward(const Batch& dy) override;
  void collect_params(std::vector<Param>& out) override;
  void collect_state(std::vector<MatXd*>& out) override;
  std::string kind() const override { return "batch_norm"; }
  void clear_cache() override { has_cache_ = false; }

  MatXd gamma, beta, dgamma, dbeta;
  MatXd run_mean, run_var;
  double momentum = 0.9;
  double eps = 1e-5;

 private:
  MatXd xhat_;
  VecXd inv_std_;
  bool has_cache_ = false;
};

// inverted dropout: inference is deterministic identity
class Dropout : public Layer {
 public:
  explicit Dropout(double rate) : rate_(rate) {}
  Batch forward(const Batch& x, Mode mode, Rng* rng) override;
  Batch backward(const Batch& dy) override;
  void collect_params(std::vector<Param>&) override {}
  std::string kind() const override { return "dropout"; }
  void clear_cache() override { has_cache_ = false; }
  double rate() const { return rate_; }

 private:
  double rate_;
  MatXd mask_;
  bool has_cache_ = false;
};

// rows of a sample column are laid out channel-major: ((c*H + h)*W + w)
struct SpatialDims {
  int channels = 0, height = 0, width = 0;
  int size() const { return channels * height * width; }
};

class Upsample2x : public Layer {
 public:
  explicit Upsample2x(SpatialDims in) : in_(in) {}
  Batch forward(const Batch& x, Mode mode, Rng* rng) override;
  Batch backward(const Batch& dy) override;
  void collect_params(std::vector<Param>&) override {}
  std::string kind() const override { return "upsample2x"; }
  SpatialDims out_dims() const {
    return {in_.channels, 2 * in_.height, 2 * in_.width};
  }

 private:
  SpatialDims in_;
};

// 3x3 same-padding convolution via im2col + GEMM
class Conv3x3 : public Layer {
 public:
  Conv3x3(SpatialDims in, int out_channels, Rng& rng);
  Batch forward(const Batch& x, Mode mode, Rng* rng) override;
  Batch backward(const Batch& dy) override;
  void collect_params(std::vector<Param>& out) override;
  std::string kind() const override { return "conv3x3"; }
  void clear_cache() override { has_cache_ = false; }
  SpatialDims out_dims() const { return {cout_, in_.height, in_.width}; }

  MatXd w, b;  // w: (cout, cin*9), b: (cout, 1)
  MatXd dw, db;

 private:
  MatXd im2col(const Batch& x) const;
  SpatialDims in_;
  int cout_;
  MatXd col_;  // cached im2col of the batch
  bool has_cache_ = false;
};

class Network {
 public:
  Network() = default;
  Network(Network&&) = default;
  Network& operator=(Network&&) = default;

  void add(std::unique_ptr<Layer> layer) { layers_.push_back(std::move(layer)); }
  Batch forward(const Batch& x, Mode mode, Rng* rng = nullptr);
  // mean-squared-error backward: L = (1/N) sum_i ||y_i - f(x_i)||^2
  double loss_and_backward(const Batch& targets);
  std::vector<Param> params();
  std::vector<MatXd*> state_tensors();
  const std::vector<std::unique_ptr<Layer>>& layers() const { return layers_; }
  int input_width() const { return input_width_; }
  void set_input_width(int w) { input_width_ = w; }
  int output_width() const { return output_width_; }
  void set_output_width(int w) { output_width_ = w; }

 private:
  std::vector<std::unique_ptr<Layer>> layers_;
  Batch last_output_;
  bool has_forward_ = false;
  int input_width_ = 0;
  int output_width_ = 0;
};

// input [thickness_z, wavelength_z, onehot_Au, onehot_Ag]
// 3 x (Dense 128 + ReLU + BatchNorm + Dropout 0.2), linear head to 2 outputs
Network make_mlp(std::uint64_t init_seed);
// dense expansion to 16 x 8 x 6, three (Upsample, Conv3x3, ReLU, BatchNorm,
// Dropout 0.3) stages through widths (16, 13, 8), final conv to one channel;
// output is a 64 x 48 map flattened row-major (x-major)
Network make_cnn(std::uint64_t init_seed);

inline constexpr int kMapRows = 64;  // along the propagation axis
inline constexpr int kMapCols = 48;

struct TrainConfig {
  double learning_rate = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double adam_eps = 1e-8;
  // defaults run the full horizon at a fixed rate; mid-training the
  // validation loss stalls for thousands of epochs before escaping, and any
  // halving during the stall freezes the run at the dropout noise floor
  int early_stopping_patience = 12000;
  double plateau_factor = 0.5;
  int plateau_patience = 12000;
  double min_learning_rate = 1e-5;
  int max_epochs = 12000;
  int batch_size = 0;  // <= 0 trains on the whole set each step
  std::uint64_t seed = 1;

  void validate() const;
};

TrainConfig mlp_train_config();
TrainConfig cnn_train_config();

struct TrainReport {
  std::vector<double> train_loss;
  std::vector<double> val_loss;
  std::vector<double> learning_rate;
  int best_epoch = -1;
  int stopped_epoch = -1;
  std::vector<std::string> lr_events;
};

void write_report_csv(std::ostream& out, const TrainReport& report);

// mini-batch Adam with seeded shuffling; restores the best-validation weights
TrainReport train(Network& net, const Batch& x_train, const Batch& y_train,
                  const Batch& x_val, const Batch& y_val,
                  const TrainConfig& config);

struct Metrics {
  std::vector<double> mae;  // per output
  std::vector<double> mse;
  double mae_mean = 0.0;
  double mse_mean = 0.0;
};

Metrics evaluate(Network& net, const Batch& x, const Batch& y);

// ---- model container ----

struct ModelBundle {
  std::string kind;  // "mlp" | "cnn"
  Network net;
  dataset::ScalerParams thickness_scaler, wavelength_scaler;
  std::vector<std::string> one_hot_order;
  std::uint64_t seed = 0;

  // features from raw units, then inference
  VecXd predict(const std::string& material, double thickness_nm,
                double wavelength_nm);
  Batch features(const std::vector<dataset::SampleRecord>& records) const;
};

void save_model(const std::filesystem::path& path, const ModelBundle& bundle);
ModelBundle load_model(const std::filesystem::path& path);

// area-average downsampling to a fixed output shape (arbitrary ratios)
GridXd downsample_area(const GridXd& src, int rows, int cols);

// row-major (x-major) flattening matching the CNN output layout
VecXd flatten_map(const GridXd& map);
GridXd unflatten_map(const VecXd& flat, int rows = kMapRows, int cols = kMapCols);

}  // namespace plasmo::surrogate
