#pragma once

#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "stdpnet/dataio.hpp"
#include "stdpnet/features.hpp"
#include "stdpnet/kernels.hpp"

namespace stdpnet {

enum class GradientMode { ExactReLU, Surrogate1, Surrogate2 };

const char* to_string(GradientMode mode);
// Accepts "exact", "exact-relu", "surrogate1", "surrogate2" (case-sensitive).
GradientMode parse_gradient_mode(std::string_view name);

// Input -> hidden (L4) -> output (L5). W4 is hidden x input, W5 is classes x hidden.
struct MlpState {
  GradientMode mode = GradientMode::Surrogate1;
  double tau_sat = 0.125;
  double eta = 0.01;
  double dropout = 0.5;
  int batch_size = 5;
  Matrix w4;
  std::vector<double> b4;
  Matrix w5;
  std::vector<double> b5;

  int input_dim() const { return w4.cols(); }
  int hidden() const { return w4.rows(); }
  int classes() const { return w5.rows(); }
  void validate() const;  // throws ConfigInvalid / BadDims
  bool operator==(const MlpState&) const = default;
};

MlpState init_mlp(int input_dim, int hidden, int classes, GradientMode mode, std::uint64_t seed);

std::uint8_t binary_activation(double z);
// Derivative used in backprop: Surrogate1 1[0 <= z < tau], Surrogate2 1[z >= 0],
// ExactReLU 1[z > 0].
std::uint8_t surrogate_grad(double z, GradientMode mode, double tau_sat);
double saturating_relu(double z, double tau_sat);

std::vector<double> floor_softmax(std::span<const double> z);
std::vector<double> softmax(std::span<const double> z);

struct ForwardPass {
  std::vector<double> z4;
  std::vector<double> a4;            // hidden activations after dropout, unscaled
  std::vector<std::uint8_t> spikes;  // a4 != 0 (binary modes: a4 itself)
  std::vector<std::uint8_t> grad;    // activation derivative, zero where dropped
  double hidden_scale = 1.0;         // inverted-dropout factor applied to W5 a4
  std::vector<double> z5;
  std::vector<double> p;
};

// `keep` is the dropout mask (empty = inference). Kept units are scaled by
// 1/(1-dropout) inside z5.
ForwardPass forward(const MlpState& state, std::span<const std::uint8_t> x,
                    std::span<const std::uint8_t> keep = {});

// Cost of one sample: cross entropy in the binary modes, 0.5 |p - y|^2 in
// ExactReLU mode.
double sample_loss(const MlpState& state, const ForwardPass& fp, int label);

struct Gradients {
  Matrix w4;
  std::vector<double> b4;
  Matrix w5;
  std::vector<double> b5;
};

// Dense reference gradient of one sample (no kernel shortcuts).
Gradients compute_gradients(const MlpState& state, std::span<const std::uint8_t> x, int label,
                            std::span<const std::uint8_t> keep = {});

struct Sample {
  std::span<const std::uint8_t> bits;
  int label = 0;
  std::span<const std::uint8_t> keep;  // empty = no dropout
};

// One averaged SGD step over the batch. Returns the summed sample loss.
double backprop_batch(MlpState& state, std::span<const Sample> batch);

struct EvalReport {
  int classes = 0;
  std::size_t total = 0;
  double accuracy = 0.0;
  std::vector<double> per_class_accuracy;
  std::vector<std::uint64_t> class_counts;
  std::vector<std::uint64_t> confusion;  // true-major: confusion[t * classes + p]
  bool has_conditioned = false;
  double conditioned_accuracy = 0.0;
  std::vector<std::uint64_t> conditioned_confusion;

  std::uint64_t confusion_at(int t, int p) const {
    return confusion[static_cast<std::size_t>(t) * classes + p];
  }
};

// Argmax of p, ties to the lowest class. `allowed` restricts candidates when non-empty.
int argmax_class(std::span<const double> p, std::span<const std::uint8_t> allowed = {});
int predict(const MlpState& state, std::span<const std::uint8_t> x);

EvalReport evaluate(const MlpState& state, std::span<const FeatureVector> test);
EvalReport conditioned_evaluate(const MlpState& state, std::span<const FeatureVector> test,
                                const ClassGroupMap& groups);

struct ClassifierConfig {
  int hidden = 900;
  GradientMode mode = GradientMode::Surrogate1;
  double tau_sat = 0.125;
  double eta = 0.01;
  double dropout = 0.5;
  int batch_size = 5;
  int epochs = 30;
  std::uint64_t seed = 1;
  void validate() const;
};

struct EpochRecord {
  int epoch = 0;
  double train_loss = 0.0;  // mean per sample
  double val_acc = 0.0;
};

struct ClassifierRun {
  MlpState state;  // best-validation state
  MlpState init;
  EvalReport test;
  std::vector<EpochRecord> curve;
  int best_epoch = 0;  // 0 = initial weights
  double best_val = 0.0;
};

using EpochObserver = std::function<void(const EpochRecord&)>;

// With an empty validation set the last epoch is kept.
ClassifierRun train_classifier(std::span<const FeatureVector> train,
                               std::span<const FeatureVector> validation,
                               std::span<const FeatureVector> test, int classes,
                               const ClassifierConfig& config,
                               const EpochObserver& observer = {});

}  // namespace stdpnet
