#include "stdpnet/classifier.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>

#include "stdpnet/error.hpp"

namespace stdpnet {

const char* to_string(GradientMode mode) {
  switch (mode) {
    case GradientMode::ExactReLU: return "exact";
    case GradientMode::Surrogate1: return "surrogate1";
    case GradientMode::Surrogate2: return "surrogate2";
  }
  return "?";
}

GradientMode parse_gradient_mode(std::string_view name) {
  if (name == "exact" || name == "exact-relu") return GradientMode::ExactReLU;
  if (name == "surrogate1") return GradientMode::Surrogate1;
  if (name == "surrogate2") return GradientMode::Surrogate2;
  throw Error(Errc::ConfigInvalid, "unknown gradient mode '" + std::string(name) + "'");
}

void MlpState::validate() const {
  if (!(tau_sat > 0.0 && tau_sat <= 1.0)) throw Error(Errc::ConfigInvalid, "tau_sat must be in (0, 1]");
  if (!(dropout >= 0.0 && dropout < 1.0)) throw Error(Errc::ConfigInvalid, "dropout must be in [0, 1)");
  if (batch_size < 1) throw Error(Errc::ConfigInvalid, "batch_size must be positive");
  if (w5.cols() != w4.rows() || b4.size() != static_cast<std::size_t>(w4.rows()) ||
      b5.size() != static_cast<std::size_t>(w5.rows())) {
    throw Error(Errc::BadDims, "inconsistent layer shapes");
  }
}

MlpState init_mlp(int input_dim, int hidden, int classes, GradientMode mode, std::uint64_t seed) {
  if (input_dim <= 0 || hidden <= 0 || classes <= 0) {
    throw Error(Errc::BadDims, "dims must be positive, got " + std::to_string(input_dim) + "x" +
                                   std::to_string(hidden) + "x" + std::to_string(classes));
  }
  MlpState s;
  s.mode = mode;
  s.w4 = Matrix(hidden, input_dim);
  s.w5 = Matrix(classes, hidden);
  s.b4.assign(static_cast<std::size_t>(hidden), 0.0);
  s.b5.assign(static_cast<std::size_t>(classes), 0.0);
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> dist(0.0, 0.01);
  auto draw = [&] {
    double w = dist(rng);
    while (std::abs(w) > 0.02) w = dist(rng);
    return w;
  };
  // Row-major fill order so the draw sequence does not depend on storage layout.
  for (int r = 0; r < hidden; ++r)
    for (int c = 0; c < input_dim; ++c) s.w4(r, c) = draw();
  for (int r = 0; r < classes; ++r)
    for (int c = 0; c < hidden; ++c) s.w5(r, c) = draw();
  return s;
}

std::uint8_t binary_activation(double z) { return z >= 0.0 ? 1 : 0; }

std::uint8_t surrogate_grad(double z, GradientMode mode, double tau_sat) {
  switch (mode) {
    case GradientMode::Surrogate1: return (z >= 0.0 && z < tau_sat) ? 1 : 0;
    case GradientMode::Surrogate2: return z >= 0.0 ? 1 : 0;
    case GradientMode::ExactReLU: return z > 0.0 ? 1 : 0;
  }
  return 0;
}

double saturating_relu(double z, double tau_sat) { return std::clamp(z, 0.0, tau_sat); }

namespace {

std::vector<double> normalized_exp(std::span<const double> v) {
  std::vector<double> p(v.size());
  if (v.empty()) return p;
  const double m = *std::max_element(v.begin(), v.end());
  double sum = 0.0;
  for (std::size_t i = 0; i < v.size(); ++i) {
    p[i] = std::exp(v[i] - m);
    sum += p[i];
  }
  for (auto& x : p) x /= sum;
  return p;
}

std::vector<double> floored(std::span<const double> z) {
  std::vector<double> f(z.size());
  for (std::size_t i = 0; i < z.size(); ++i) f[i] = std::floor(z[i]);
  return f;
}

void require_dims(bool ok, const std::string& what) {
  if (!ok) throw Error(Errc::DimMismatch, what);
}

void check_label(int label, int classes) {
  if (label < 0 || label >= classes) {
    throw Error(Errc::LabelOutOfRange, "label " + std::to_string(label) + " outside [0, " +
                                           std::to_string(classes) + ")");
  }
}

}  // namespace

std::vector<double> floor_softmax(std::span<const double> z) { return normalized_exp(floored(z)); }

std::vector<double> softmax(std::span<const double> z) { return normalized_exp(z); }

ForwardPass forward(const MlpState& state, std::span<const std::uint8_t> x,
                    std::span<const std::uint8_t> keep) {
  const int h = state.hidden();
  require_dims(x.size() == static_cast<std::size_t>(state.input_dim()),
               "feature length " + std::to_string(x.size()) + " != input dim " +
                   std::to_string(state.input_dim()));
  require_dims(keep.empty() || keep.size() == static_cast<std::size_t>(h), "dropout mask length");

  ForwardPass fp;
  fp.z4 = kernels::binary_matvec(state.w4, x);
  for (int j = 0; j < h; ++j) fp.z4[static_cast<std::size_t>(j)] += state.b4[static_cast<std::size_t>(j)];
  if (!keep.empty()) fp.hidden_scale = 1.0 / (1.0 - state.dropout);

  fp.a4.resize(static_cast<std::size_t>(h));
  fp.spikes.resize(static_cast<std::size_t>(h));
  fp.grad.resize(static_cast<std::size_t>(h));
  const bool exact = state.mode == GradientMode::ExactReLU;
  for (std::size_t j = 0; j < fp.a4.size(); ++j) {
    const double z = fp.z4[j];
    const bool kept = keep.empty() || keep[j] != 0;
    fp.a4[j] = !kept ? 0.0 : exact ? std::max(z, 0.0) : binary_activation(z);
    fp.spikes[j] = fp.a4[j] != 0.0 ? 1 : 0;
    fp.grad[j] = kept ? surrogate_grad(z, state.mode, state.tau_sat) : 0;
  }

  if (exact) {
    fp.z5.assign(static_cast<std::size_t>(state.classes()), 0.0);
    for (int j = 0; j < h; ++j) {
      const double a = fp.a4[static_cast<std::size_t>(j)];
      if (a == 0.0) continue;
      const auto c = state.w5.col(j);
      for (std::size_t r = 0; r < c.size(); ++r) fp.z5[r] += c[r] * a;
    }
  } else {
    fp.z5 = kernels::binary_matvec(state.w5, fp.spikes);
  }
  for (std::size_t r = 0; r < fp.z5.size(); ++r) fp.z5[r] = fp.z5[r] * fp.hidden_scale + state.b5[r];
  fp.p = exact ? softmax(fp.z5) : floor_softmax(fp.z5);
  return fp;
}

double sample_loss(const MlpState& state, const ForwardPass& fp, int label) {
  check_label(label, state.classes());
  if (state.mode == GradientMode::ExactReLU) {
    double c = 0.0;
    for (std::size_t i = 0; i < fp.p.size(); ++i) {
      const double e = fp.p[i] - (static_cast<int>(i) == label ? 1.0 : 0.0);
      c += e * e;
    }
    return 0.5 * c;
  }
  // -log p_label evaluated as log-sum-exp over floored logits, safe against underflow.
  const auto f = floored(fp.z5);
  const double m = *std::max_element(f.begin(), f.end());
  double sum = 0.0;
  for (double v : f) sum += std::exp(v - m);
  return std::log(sum) - (f[static_cast<std::size_t>(label)] - m);
}

namespace {

std::vector<double> output_delta(const MlpState& state, const ForwardPass& fp, int label) {
  std::vector<double> d(fp.p.size());
  for (std::size_t i = 0; i < d.size(); ++i) {
    d[i] = fp.p[i] - (static_cast<int>(i) == label ? 1.0 : 0.0);
  }
  if (state.mode == GradientMode::ExactReLU) {
    // Quadratic cost through the softmax Jacobian: p_i (e_i - sum_j p_j e_j).
    double pe = 0.0;
    for (std::size_t j = 0; j < d.size(); ++j) pe += fp.p[j] * d[j];
    for (std::size_t i = 0; i < d.size(); ++i) d[i] = fp.p[i] * (d[i] - pe);
  }
  return d;
}

struct SampleGrad {
  ForwardPass fp;
  std::vector<double> delta5;
  std::vector<double> delta4;
  double loss = 0.0;
};

SampleGrad sample_grad(const MlpState& state, const Sample& s) {
  SampleGrad g;
  g.fp = forward(state, s.bits, s.keep);
  g.loss = sample_loss(state, g.fp, s.label);
  g.delta5 = output_delta(state, g.fp, s.label);
  g.delta4 = kernels::masked_backward_matvec(state.w5, g.delta5, g.fp.grad);
  if (g.fp.hidden_scale != 1.0) {
    for (auto& v : g.delta4) v *= g.fp.hidden_scale;
  }
  return g;
}

}  // namespace

Gradients compute_gradients(const MlpState& state, std::span<const std::uint8_t> x, int label,
                            std::span<const std::uint8_t> keep) {
  const ForwardPass fp = forward(state, x, keep);
  check_label(label, state.classes());
  const auto d5 = output_delta(state, fp, label);
  const int h = state.hidden();
  const int n = state.input_dim();
  const int k = state.classes();

  Gradients g;
  g.b5 = d5;
  g.w5 = Matrix(k, h);
  for (int i = 0; i < k; ++i)
    for (int j = 0; j < h; ++j) g.w5(i, j) = d5[static_cast<std::size_t>(i)] * fp.hidden_scale * fp.a4[static_cast<std::size_t>(j)];

  g.b4.assign(static_cast<std::size_t>(h), 0.0);
  for (int j = 0; j < h; ++j) {
    double acc = 0.0;
    for (int i = 0; i < k; ++i) acc += state.w5(i, j) * d5[static_cast<std::size_t>(i)];
    g.b4[static_cast<std::size_t>(j)] = acc * fp.hidden_scale * fp.grad[static_cast<std::size_t>(j)];
  }
  g.w4 = Matrix(h, n);
  for (int j = 0; j < h; ++j)
    for (int c = 0; c < n; ++c) g.w4(j, c) = g.b4[static_cast<std::size_t>(j)] * x[static_cast<std::size_t>(c)];
  return g;
}

double backprop_batch(MlpState& state, std::span<const Sample> batch) {
  if (batch.empty()) throw Error(Errc::EmptyBatch, "backprop on an empty batch");
  for (const auto& s : batch) {
    check_label(s.label, state.classes());
    require_dims(s.bits.size() == static_cast<std::size_t>(state.input_dim()), "feature length != input dim");
    require_dims(s.keep.empty() || s.keep.size() == static_cast<std::size_t>(state.hidden()),
                 "dropout mask length");
  }

  // All samples see the pre-batch weights; updates are applied afterwards in
  // sample order so the result does not depend on the thread count.
  std::vector<SampleGrad> grads(batch.size());
  const auto n = static_cast<std::ptrdiff_t>(batch.size());
#pragma omp parallel for schedule(static) if (n > 1)
  for (std::ptrdiff_t i = 0; i < n; ++i) {
    grads[static_cast<std::size_t>(i)] = sample_grad(state, batch[static_cast<std::size_t>(i)]);
  }

  const double step = -state.eta / static_cast<double>(batch.size());
  double loss = 0.0;
  for (std::size_t i = 0; i < grads.size(); ++i) {
    const auto& g = grads[i];
    loss += g.loss;
    if (state.eta == 0.0) continue;
    if (state.mode == GradientMode::ExactReLU) {
      for (int j = 0; j < state.hidden(); ++j) {
        const double a = g.fp.a4[static_cast<std::size_t>(j)] * g.fp.hidden_scale;
        if (a == 0.0) continue;
        auto c = state.w5.col(j);
        for (std::size_t r = 0; r < c.size(); ++r) c[r] += step * g.delta5[r] * a;
      }
    } else {
      kernels::transcription_accumulate(state.w5, step * g.fp.hidden_scale, g.delta5, g.fp.spikes);
    }
    for (std::size_t r = 0; r < state.b5.size(); ++r) state.b5[r] += step * g.delta5[r];
    kernels::transcription_accumulate(state.w4, step, g.delta4, batch[i].bits);
    for (std::size_t r = 0; r < state.b4.size(); ++r) state.b4[r] += step * g.delta4[r];
  }
  return loss;
}

int argmax_class(std::span<const double> p, std::span<const std::uint8_t> allowed) {
  int best = -1;
  double best_p = -std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < p.size(); ++i) {
    if (!allowed.empty() && allowed[i] == 0) continue;
    if (best < 0 || p[i] > best_p) {
      best = static_cast<int>(i);
      best_p = p[i];
    }
  }
  return best;
}

int predict(const MlpState& state, std::span<const std::uint8_t> x) {
  return argmax_class(forward(state, x).p);
}

namespace {

EvalReport evaluate_impl(const MlpState& state, std::span<const FeatureVector> test,
                         const ClassGroupMap* groups) {
  if (test.empty()) throw Error(Errc::EmptySet, "evaluation on an empty set");
  const int k = state.classes();
  if (groups != nullptr && groups->size() != static_cast<std::size_t>(k)) {
    throw Error(Errc::ConfigInvalid, "group map covers " + std::to_string(groups->size()) +
                                         " classes, model has " + std::to_string(k));
  }
  for (const auto& fv : test) {
    check_label(fv.label, k);
    require_dims(fv.bits.size() == static_cast<std::size_t>(state.input_dim()),
                 "feature length " + std::to_string(fv.bits.size()) + " != input dim " +
                     std::to_string(state.input_dim()));
  }

  std::vector<int> pred(test.size());
  std::vector<int> cond(groups != nullptr ? test.size() : 0);
  const auto n = static_cast<std::ptrdiff_t>(test.size());
#pragma omp parallel for schedule(dynamic, 64)
  for (std::ptrdiff_t i = 0; i < n; ++i) {
    const auto idx = static_cast<std::size_t>(i);
    const auto p = forward(state, test[idx].bits).p;
    pred[idx] = argmax_class(p);
    if (groups != nullptr) {
      std::vector<std::uint8_t> allowed(static_cast<std::size_t>(k));
      const ClassGroup g = groups->group_of[static_cast<std::size_t>(test[idx].label)];
      for (int c = 0; c < k; ++c) allowed[static_cast<std::size_t>(c)] = groups->group_of[static_cast<std::size_t>(c)] == g;
      cond[idx] = argmax_class(p, allowed);
    }
  }

  EvalReport r;
  r.classes = k;
  r.total = test.size();
  r.confusion.assign(static_cast<std::size_t>(k) * k, 0);
  r.class_counts.assign(static_cast<std::size_t>(k), 0);
  std::size_t correct = 0;
  for (std::size_t i = 0; i < test.size(); ++i) {
    const int t = test[i].label;
    ++r.confusion[static_cast<std::size_t>(t) * k + pred[i]];
    ++r.class_counts[static_cast<std::size_t>(t)];
    correct += pred[i] == t;
  }
  r.accuracy = static_cast<double>(correct) / static_cast<double>(r.total);
  r.per_class_accuracy.assign(static_cast<std::size_t>(k), 0.0);
  for (int c = 0; c < k; ++c) {
    const auto cnt = r.class_counts[static_cast<std::size_t>(c)];
    if (cnt > 0) r.per_class_accuracy[static_cast<std::size_t>(c)] = static_cast<double>(r.confusion_at(c, c)) / static_cast<double>(cnt);
  }
  if (groups != nullptr) {
    r.has_conditioned = true;
    r.conditioned_confusion.assign(static_cast<std::size_t>(k) * k, 0);
    std::size_t ccorrect = 0;
    for (std::size_t i = 0; i < test.size(); ++i) {
      const int t = test[i].label;
      ++r.conditioned_confusion[static_cast<std::size_t>(t) * k + cond[i]];
      ccorrect += cond[i] == t;
    }
    r.conditioned_accuracy = static_cast<double>(ccorrect) / static_cast<double>(r.total);
  }
  return r;
}

}  // namespace

EvalReport evaluate(const MlpState& state, std::span<const FeatureVector> test) {
  return evaluate_impl(state, test, nullptr);
}

EvalReport conditioned_evaluate(const MlpState& state, std::span<const FeatureVector> test,
                                const ClassGroupMap& groups) {
  return evaluate_impl(state, test, &groups);
}

void ClassifierConfig::validate() const {
  if (hidden < 1) throw Error(Errc::ConfigInvalid, "hidden must be positive");
  if (!(tau_sat > 0.0 && tau_sat <= 1.0)) throw Error(Errc::ConfigInvalid, "tau_sat must be in (0, 1]");
  if (!(eta >= 0.0) || !std::isfinite(eta)) throw Error(Errc::ConfigInvalid, "eta must be finite and >= 0");
  if (!(dropout >= 0.0 && dropout < 1.0)) throw Error(Errc::ConfigInvalid, "dropout must be in [0, 1)");
  if (batch_size < 1) throw Error(Errc::ConfigInvalid, "batch_size must be positive");
  if (epochs < 0) throw Error(Errc::ConfigInvalid, "epochs must be >= 0");
}

ClassifierRun train_classifier(std::span<const FeatureVector> train,
                               std::span<const FeatureVector> validation,
                               std::span<const FeatureVector> test, int classes,
                               const ClassifierConfig& config, const EpochObserver& observer) {
  config.validate();
  if (train.empty()) throw Error(Errc::ConfigInvalid, "empty training set");
  const std::size_t dim = train.front().bits.size();
  for (auto set : {train, validation, test}) {
    for (const auto& fv : set) {
      if (fv.bits.size() != dim) {
        throw Error(Errc::ConfigInvalid, "feature lengths differ: " + std::to_string(fv.bits.size()) +
                                             " vs " + std::to_string(dim));
      }
      check_label(fv.label, classes);
    }
  }

  ClassifierRun run;
  MlpState state = init_mlp(static_cast<int>(dim), config.hidden, classes, config.mode, config.seed);
  state.tau_sat = config.tau_sat;
  state.eta = config.eta;
  state.dropout = config.dropout;
  state.batch_size = config.batch_size;
  run.init = state;

  const bool has_val = !validation.empty();
  run.best_val = has_val ? evaluate(state, validation).accuracy : 0.0;
  run.state = state;

  std::mt19937_64 rng(config.seed ^ 0x5bd1e9955bd1e995ULL);
  std::bernoulli_distribution keep_unit(1.0 - config.dropout);
  std::vector<std::size_t> order(train.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  const std::size_t h = static_cast<std::size_t>(config.hidden);
  std::vector<std::vector<std::uint8_t>> masks(static_cast<std::size_t>(config.batch_size),
                                               std::vector<std::uint8_t>(h));
  std::vector<Sample> batch;

  for (int epoch = 1; epoch <= config.epochs; ++epoch) {
    for (std::size_t i = order.size() - 1; i > 0; --i) {
      std::uniform_int_distribution<std::size_t> pick(0, i);
      std::swap(order[i], order[pick(rng)]);
    }
    double loss = 0.0;
    for (std::size_t start = 0; start < order.size(); start += static_cast<std::size_t>(config.batch_size)) {
      const std::size_t end = std::min(order.size(), start + static_cast<std::size_t>(config.batch_size));
      batch.clear();
      for (std::size_t i = start; i < end; ++i) {
        const auto& fv = train[order[i]];
        Sample s{fv.bits, fv.label, {}};
        if (config.dropout > 0.0) {
          auto& m = masks[i - start];
          for (auto& b : m) b = keep_unit(rng) ? 1 : 0;
          s.keep = m;
        }
        batch.push_back(s);
      }
      loss += backprop_batch(state, batch);
    }
    EpochRecord rec;
    rec.epoch = epoch;
    rec.train_loss = loss / static_cast<double>(train.size());
    rec.val_acc = has_val ? evaluate(state, validation).accuracy : 0.0;
    run.curve.push_back(rec);
    if (!has_val || rec.val_acc > run.best_val) {
      run.best_val = rec.val_acc;
      run.best_epoch = epoch;
      run.state = state;
    }
    if (observer) observer(rec);
  }
  if (!test.empty()) run.test = evaluate(run.state, test);
  return run;
}

}  // namespace stdpnet
