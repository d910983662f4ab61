#pragma once

// Dense reference computations shared by the unit tests and the acceptance
// runner. Nothing here calls the kernels it checks.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <random>
#include <span>
#include <vector>

#include "stdpnet/classifier.hpp"
#include "stdpnet/kernels.hpp"

namespace oracle {

using stdpnet::Matrix;

inline std::vector<double> dense_matvec(const Matrix& w, std::span<const std::uint8_t> x) {
  std::vector<double> out(static_cast<std::size_t>(w.rows()), 0.0);
  for (int r = 0; r < w.rows(); ++r) {
    double acc = 0.0;
    for (int j = 0; j < w.cols(); ++j) acc += w(r, j) * static_cast<double>(x[static_cast<std::size_t>(j)]);
    out[static_cast<std::size_t>(r)] = acc;
  }
  return out;
}

// (W^T delta) .* mask, computed as a full product then masked.
inline std::vector<double> dense_backward(const Matrix& w, std::span<const double> delta,
                                          std::span<const std::uint8_t> mask) {
  std::vector<double> out(static_cast<std::size_t>(w.cols()), 0.0);
  for (int j = 0; j < w.cols(); ++j) {
    double acc = 0.0;
    for (int i = 0; i < w.rows(); ++i) acc += w(i, j) * delta[static_cast<std::size_t>(i)];
    out[static_cast<std::size_t>(j)] = mask[static_cast<std::size_t>(j)] != 0 ? acc : 0.0;
  }
  return out;
}

inline Matrix dense_outer(std::span<const double> delta, std::span<const std::uint8_t> a) {
  Matrix out(static_cast<int>(delta.size()), static_cast<int>(a.size()));
  for (std::size_t i = 0; i < delta.size(); ++i)
    for (std::size_t j = 0; j < a.size(); ++j)
      out(static_cast<int>(i), static_cast<int>(j)) = delta[i] * static_cast<double>(a[j]);
  return out;
}

inline bool same(std::span<const double> a, std::span<const double> b) {
  return a.size() == b.size() && std::equal(a.begin(), a.end(), b.begin());
}

struct KernelTally {
  int cases = 0;
  int matvec_mismatch = 0;
  int backward_mismatch = 0;
  int outer_mismatch = 0;
  int accumulate_mismatch = 0;
  bool ok() const {
    return matvec_mismatch == 0 && backward_mismatch == 0 && outer_mismatch == 0 && accumulate_mismatch == 0;
  }
};

// Random shapes up to 64x64, random densities, weights spanning several
// magnitudes so rounding differences would show.
inline KernelTally kernel_equivalence(int cases, std::uint64_t seed) {
  namespace k = stdpnet::kernels;
  std::mt19937_64 rng(seed);
  std::uniform_int_distribution<int> dim(1, 64);
  std::uniform_real_distribution<double> unit(-1.0, 1.0), density(0.0, 1.0);
  std::uniform_int_distribution<int> exponent(-20, 20);
  auto value = [&] { return std::ldexp(unit(rng), exponent(rng)); };
  auto bits = [&](int n) {
    std::bernoulli_distribution on(density(rng));
    std::vector<std::uint8_t> v(static_cast<std::size_t>(n));
    for (auto& b : v) b = on(rng) ? 1 : 0;
    return v;
  };

  KernelTally t;
  for (int c = 0; c < cases; ++c, ++t.cases) {
    const int rows = dim(rng), cols = dim(rng);
    Matrix w(rows, cols);
    for (auto& x : w.data()) x = value();
    const auto x = bits(cols);
    const auto mask = bits(cols);
    std::vector<double> delta(static_cast<std::size_t>(rows));
    for (auto& d : delta) d = value();

    const auto mv = k::binary_matvec(w, x);
    if (!same(mv, dense_matvec(w, x)) || !same(mv, k::serial::binary_matvec(w, x))) ++t.matvec_mismatch;

    const auto bw = k::masked_backward_matvec(w, delta, mask);
    if (!same(bw, dense_backward(w, delta, mask)) || !same(bw, k::serial::masked_backward_matvec(w, delta, mask)))
      ++t.backward_mismatch;

    const auto outer = k::transcription_outer(delta, x);
    if (!(outer.rows() == rows && outer.cols() == cols && same(outer.data(), dense_outer(delta, x).data())) ||
        !(outer == k::serial::transcription_outer(delta, x)))
      ++t.outer_mismatch;

    const double scale = value();
    Matrix acc = w, ref = w, ser = w;
    k::transcription_accumulate(acc, scale, delta, x);
    k::serial::transcription_accumulate(ser, scale, delta, x);
    for (int i = 0; i < rows; ++i)
      for (int j = 0; j < cols; ++j)
        ref(i, j) += scale * delta[static_cast<std::size_t>(i)] * static_cast<double>(x[static_cast<std::size_t>(j)]);
    if (!(acc == ref) || !(acc == ser)) ++t.accumulate_mismatch;
  }
  return t;
}

struct GradCheck {
  double max_rel_error = 0.0;
  int parameters = 0;
};

inline double rel_error(double analytic, double numeric) {
  const double scale = std::max({std::abs(analytic), std::abs(numeric), 1e-6});
  return std::abs(analytic - numeric) / scale;
}

// Central differences on every parameter of an ExactReLU network. Hidden
// pre-activations are kept away from the ReLU kink so the loss is smooth
// within +-step.
inline GradCheck exact_relu_gradcheck(int inputs, int hidden, int classes, std::uint64_t seed,
                                      bool with_dropout, double step = 1e-6) {
  using namespace stdpnet;
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> n01(0.0, 0.7);
  MlpState s;
  std::vector<std::uint8_t> x(static_cast<std::size_t>(inputs)), keep;
  int label = 0;
  for (;;) {
    s = init_mlp(inputs, hidden, classes, GradientMode::ExactReLU, rng());
    for (auto& w : s.w4.data()) w = n01(rng);
    for (auto& w : s.w5.data()) w = n01(rng);
    for (auto& b : s.b4) b = n01(rng);
    for (auto& b : s.b5) b = n01(rng);
    for (auto& b : x) b = rng() % 3 != 0 ? 1 : 0;
    label = static_cast<int>(rng() % static_cast<std::uint64_t>(classes));
    keep.clear();
    if (with_dropout) {
      s.dropout = 0.5;
      keep.resize(static_cast<std::size_t>(hidden));
      for (auto& k : keep) k = rng() % 4 != 0 ? 1 : 0;
    }
    const auto fp = forward(s, x, keep);
    if (std::all_of(fp.z4.begin(), fp.z4.end(), [](double z) { return std::abs(z) > 1e-3; })) break;
  }

  const auto g = compute_gradients(s, x, label, keep);
  auto loss = [&](const MlpState& m) { return sample_loss(m, forward(m, x, keep), label); };
  GradCheck out;
  auto probe = [&](double& param, double analytic) {
    const double saved = param;
    param = saved + step;
    const double up = loss(s);
    param = saved - step;
    const double down = loss(s);
    param = saved;
    out.max_rel_error = std::max(out.max_rel_error, rel_error(analytic, (up - down) / (2 * step)));
    ++out.parameters;
  };
  for (int r = 0; r < hidden; ++r)
    for (int c = 0; c < inputs; ++c) probe(s.w4(r, c), g.w4(r, c));
  for (int r = 0; r < classes; ++r)
    for (int c = 0; c < hidden; ++c) probe(s.w5(r, c), g.w5(r, c));
  for (int j = 0; j < hidden; ++j) probe(s.b4[static_cast<std::size_t>(j)], g.b4[static_cast<std::size_t>(j)]);
  for (int i = 0; i < classes; ++i) probe(s.b5[static_cast<std::size_t>(i)], g.b5[static_cast<std::size_t>(i)]);
  return out;
}

// Surrogate-1 derivative against central differences of the saturating ReLU
// at interior points (away from 0 and tau).
inline int surrogate1_mismatches(int points, std::uint64_t seed, double tau = 0.125) {
  using namespace stdpnet;
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> z(-1.0, 1.0);
  const double h = 1e-7;
  int bad = 0;
  for (int n = 0; n < points;) {
    const double v = z(rng);
    if (std::abs(v) < 1e-4 || std::abs(v - tau) < 1e-4) continue;
    ++n;
    const double numeric = (saturating_relu(v + h, tau) - saturating_relu(v - h, tau)) / (2 * h);
    if (std::abs(numeric - surrogate_grad(v, GradientMode::Surrogate1, tau)) > 1e-6) ++bad;
  }
  return bad;
}

}  // namespace oracle
