#include "stdpnet/kernels.hpp"

#include <algorithm>
#include <string>

#include "stdpnet/error.hpp"

namespace stdpnet::kernels {
namespace {

constexpr std::size_t kParallelWork = 1 << 15;

void require(bool ok, const std::string& what) {
  if (!ok) throw Error(Errc::DimMismatch, what);
}

std::vector<int> active_indices(std::span<const std::uint8_t> bits) {
  std::vector<int> idx;
  for (std::size_t j = 0; j < bits.size(); ++j) {
    if (bits[j] != 0) idx.push_back(static_cast<int>(j));
  }
  return idx;
}

}  // namespace

void binary_matvec_into(const Matrix& w, std::span<const std::uint8_t> bits, std::span<double> out) {
  require(bits.size() == static_cast<std::size_t>(w.cols()), "binary_matvec: input length " +
                                                                  std::to_string(bits.size()) +
                                                                  " != cols " + std::to_string(w.cols()));
  require(out.size() == static_cast<std::size_t>(w.rows()), "binary_matvec: output length");
  const auto active = active_indices(bits);
  const int rows = w.rows();
  constexpr int kBlock = 256;
  const int blocks = (rows + kBlock - 1) / kBlock;
  const bool par = active.size() * static_cast<std::size_t>(rows) > kParallelWork;
#pragma omp parallel for schedule(static) if (par)
  for (int b = 0; b < blocks; ++b) {
    const int r0 = b * kBlock;
    const int r1 = std::min(rows, r0 + kBlock);
    for (int r = r0; r < r1; ++r) out[static_cast<std::size_t>(r)] = 0.0;
    for (int j : active) {
      const double* c = w.col(j).data();
      for (int r = r0; r < r1; ++r) out[static_cast<std::size_t>(r)] += c[r];
    }
  }
}

std::vector<double> binary_matvec(const Matrix& w, std::span<const std::uint8_t> bits) {
  std::vector<double> out(static_cast<std::size_t>(w.rows()));
  binary_matvec_into(w, bits, out);
  return out;
}

std::vector<double> masked_backward_matvec(const Matrix& w_next, std::span<const double> delta_next,
                                           std::span<const std::uint8_t> mask) {
  require(delta_next.size() == static_cast<std::size_t>(w_next.rows()),
          "masked_backward_matvec: delta length != rows");
  require(mask.size() == static_cast<std::size_t>(w_next.cols()),
          "masked_backward_matvec: mask length != cols");
  const int n = w_next.cols();
  const int k = w_next.rows();
  std::vector<double> out(static_cast<std::size_t>(n), 0.0);
  const bool par = static_cast<std::size_t>(n) * static_cast<std::size_t>(k) > kParallelWork;
#pragma omp parallel for schedule(static) if (par)
  for (int i = 0; i < n; ++i) {
    if (mask[static_cast<std::size_t>(i)] == 0) continue;
    const double* c = w_next.col(i).data();
    double acc = 0.0;
    for (int r = 0; r < k; ++r) acc += c[r] * delta_next[static_cast<std::size_t>(r)];
    out[static_cast<std::size_t>(i)] = acc;
  }
  return out;
}

Matrix transcription_outer(std::span<const double> delta, std::span<const std::uint8_t> bits) {
  Matrix out(static_cast<int>(delta.size()), static_cast<int>(bits.size()), 0.0);
  const auto active = active_indices(bits);
  const auto n = static_cast<std::ptrdiff_t>(active.size());
  const bool par = active.size() * delta.size() > kParallelWork;
#pragma omp parallel for schedule(static) if (par)
  for (std::ptrdiff_t a = 0; a < n; ++a) {
    auto c = out.col(active[static_cast<std::size_t>(a)]);
    for (std::size_t r = 0; r < delta.size(); ++r) c[r] = delta[r];
  }
  return out;
}

void transcription_accumulate(Matrix& target, double scale, std::span<const double> delta,
                              std::span<const std::uint8_t> bits) {
  require(delta.size() == static_cast<std::size_t>(target.rows()),
          "transcription_accumulate: delta length != rows");
  require(bits.size() == static_cast<std::size_t>(target.cols()),
          "transcription_accumulate: bits length != cols");
  const auto active = active_indices(bits);
  const auto n = static_cast<std::ptrdiff_t>(active.size());
  const bool par = active.size() * delta.size() > kParallelWork;
#pragma omp parallel for schedule(static) if (par)
  for (std::ptrdiff_t a = 0; a < n; ++a) {
    auto c = target.col(active[static_cast<std::size_t>(a)]);
    for (std::size_t r = 0; r < delta.size(); ++r) c[r] += scale * delta[r];
  }
}

namespace serial {

std::vector<double> binary_matvec(const Matrix& w, std::span<const std::uint8_t> bits) {
  require(bits.size() == static_cast<std::size_t>(w.cols()), "binary_matvec: input length");
  std::vector<double> out(static_cast<std::size_t>(w.rows()), 0.0);
  for (int j = 0; j < w.cols(); ++j) {
    if (bits[static_cast<std::size_t>(j)] == 0) continue;
    for (int r = 0; r < w.rows(); ++r) out[static_cast<std::size_t>(r)] += w(r, j);
  }
  return out;
}

std::vector<double> masked_backward_matvec(const Matrix& w_next, std::span<const double> delta_next,
                                           std::span<const std::uint8_t> mask) {
  require(delta_next.size() == static_cast<std::size_t>(w_next.rows()), "delta length != rows");
  require(mask.size() == static_cast<std::size_t>(w_next.cols()), "mask length != cols");
  std::vector<double> out(mask.size(), 0.0);
  for (int i = 0; i < w_next.cols(); ++i) {
    if (mask[static_cast<std::size_t>(i)] == 0) continue;
    double acc = 0.0;
    for (int r = 0; r < w_next.rows(); ++r) acc += w_next(r, i) * delta_next[static_cast<std::size_t>(r)];
    out[static_cast<std::size_t>(i)] = acc;
  }
  return out;
}

Matrix transcription_outer(std::span<const double> delta, std::span<const std::uint8_t> bits) {
  Matrix out(static_cast<int>(delta.size()), static_cast<int>(bits.size()), 0.0);
  for (std::size_t j = 0; j < bits.size(); ++j) {
    if (bits[j] == 0) continue;
    for (std::size_t r = 0; r < delta.size(); ++r) out(static_cast<int>(r), static_cast<int>(j)) = delta[r];
  }
  return out;
}

void transcription_accumulate(Matrix& target, double scale, std::span<const double> delta,
                              std::span<const std::uint8_t> bits) {
  require(delta.size() == static_cast<std::size_t>(target.rows()), "delta length != rows");
  require(bits.size() == static_cast<std::size_t>(target.cols()), "bits length != cols");
  for (std::size_t j = 0; j < bits.size(); ++j) {
    if (bits[j] == 0) continue;
    for (std::size_t r = 0; r < delta.size(); ++r) {
      target(static_cast<int>(r), static_cast<int>(j)) += scale * delta[r];
    }
  }
}

}  // namespace serial
}  // namespace stdpnet::kernels
