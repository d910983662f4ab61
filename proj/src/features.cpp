#include "stdpnet/features.hpp"

#include <algorithm>
#include <string>

#include "stdpnet/error.hpp"

namespace stdpnet {

std::size_t FeatureVector::popcount() const {
  return static_cast<std::size_t>(std::count_if(bits.begin(), bits.end(),
                                                [](std::uint8_t b) { return b != 0; }));
}

FeatureVector flatten_pooled(const SpikeTensor& pooled, int label) {
  FeatureVector fv;
  fv.label = label;
  fv.bits = pooled.time_summed();
  for (auto& b : fv.bits) b = b != 0 ? 1 : 0;
  return fv;
}

FeatureVector extract_feature_vector(const SpikeTensor& input, const ConvLayerState& state,
                                     const PoolConfig& pool_config, int label) {
  return flatten_pooled(conv_pool_forward(state, input, pool_config).pooled, label);
}

FeatureGeometry pooled_geometry(const ConvLayerState& state, const SpikeShape& input,
                                const PoolConfig& pool_config) {
  const int k = state.config.kernel;
  if (pool_config.window < 1 || input.height - k + 1 < pool_config.window ||
      input.width - k + 1 < pool_config.window) {
    throw Error(Errc::GeometryMismatch, "conv output smaller than the pooling window");
  }
  return {state.config.maps, (input.height - k + 1) / pool_config.window,
          (input.width - k + 1) / pool_config.window};
}

namespace {

ExtractionResult extract_impl(std::span<const SpikeTensor> inputs, std::span<const int> labels,
                              const ConvLayerState& state, const PoolConfig& pool_config,
                              bool keep_pooled, bool parallel) {
  if (!labels.empty() && labels.size() != inputs.size()) {
    throw Error(Errc::LengthMismatch, std::to_string(inputs.size()) + " inputs vs " +
                                          std::to_string(labels.size()) + " labels");
  }
  ExtractionResult result;
  if (inputs.empty()) return result;
  const SpikeShape shape = inputs.front().shape();
  result.geometry = pooled_geometry(state, shape, pool_config);
  for (const auto& in : inputs) {
    if (!(in.shape() == shape)) throw Error(Errc::ShapeMismatch, "inputs differ in shape");
  }
  make_volume(state, shape);  // channel check before entering the parallel region

  const auto n = static_cast<std::ptrdiff_t>(inputs.size());
  result.features.resize(inputs.size());
  if (keep_pooled) result.pooled.resize(inputs.size());
  std::vector<std::size_t> conv_counts(inputs.size(), 0);
#pragma omp parallel for schedule(dynamic, 32) if (parallel)
  for (std::ptrdiff_t i = 0; i < n; ++i) {
    const auto idx = static_cast<std::size_t>(i);
    auto out = conv_pool_forward(state, inputs[idx], pool_config);
    conv_counts[idx] = out.conv_spikes;
    result.features[idx] = flatten_pooled(out.pooled, labels.empty() ? -1 : labels[idx]);
    if (keep_pooled) result.pooled[idx] = std::move(out.pooled);
  }
  for (std::size_t i = 0; i < inputs.size(); ++i) {
    result.conv_spikes += conv_counts[i];
    result.pooled_spikes += result.features[i].popcount();
  }
  return result;
}

}  // namespace

ExtractionResult extract_features(std::span<const SpikeTensor> inputs, std::span<const int> labels,
                                  const ConvLayerState& state, const PoolConfig& pool_config,
                                  bool keep_pooled) {
  return extract_impl(inputs, labels, state, pool_config, keep_pooled, true);
}

namespace serial {
ExtractionResult extract_features(std::span<const SpikeTensor> inputs, std::span<const int> labels,
                                  const ConvLayerState& state, const PoolConfig& pool_config,
                                  bool keep_pooled) {
  return extract_impl(inputs, labels, state, pool_config, keep_pooled, false);
}
}  // namespace serial

std::uint64_t ClassSpikeMatrix::column_sum(int c) const {
  std::uint64_t s = 0;
  for (int m = 0; m < maps; ++m) s += at(m, c);
  return s;
}

int ClassSpikeMatrix::argmax_class(int m) const {
  int best = -1;
  std::uint64_t best_count = 0;
  for (int c = 0; c < classes; ++c) {
    if (at(m, c) > best_count) {
      best = c;
      best_count = at(m, c);
    }
  }
  return best;
}

void ClassSpikeMatrix::merge(const ClassSpikeMatrix& other) {
  if (other.maps != maps || other.classes != classes) {
    throw Error(Errc::ShapeMismatch, "class spike matrices differ in shape");
  }
  for (std::size_t n = 0; n < counts.size(); ++n) counts[n] += other.counts[n];
}

namespace {
void check_label(int label, int classes) {
  if (label < 0 || label >= classes) {
    throw Error(Errc::LabelOutOfRange, "label " + std::to_string(label) + " outside [0, " +
                                           std::to_string(classes) + ")");
  }
}
}  // namespace

ClassSpikeMatrix spikes_per_map_per_class(std::span<const SpikeTensor> pooled,
                                          std::span<const int> labels, int classes) {
  if (pooled.size() != labels.size()) {
    throw Error(Errc::LengthMismatch, std::to_string(pooled.size()) + " tensors vs " +
                                          std::to_string(labels.size()) + " labels");
  }
  const int maps = pooled.empty() ? 0 : pooled.front().shape().channels;
  ClassSpikeMatrix m(maps, classes);
  for (std::size_t n = 0; n < pooled.size(); ++n) {
    check_label(labels[n], classes);
    for (int t = 0; t < pooled[n].shape().slices; ++t) {
      for (const auto& e : pooled[n].slice(t)) ++m.at(e.channel, labels[n]);
    }
  }
  return m;
}

ClassSpikeMatrix spikes_per_map_per_class(std::span<const FeatureVector> features,
                                          const FeatureGeometry& geometry, int classes) {
  ClassSpikeMatrix m(geometry.maps, classes);
  const std::size_t plane = static_cast<std::size_t>(geometry.rows) * geometry.cols;
  for (const auto& fv : features) {
    if (fv.bits.size() != geometry.length()) {
      throw Error(Errc::LengthMismatch, "feature length " + std::to_string(fv.bits.size()) +
                                            " != " + std::to_string(geometry.length()));
    }
    check_label(fv.label, classes);
    for (std::size_t n = 0; n < fv.bits.size(); ++n) {
      if (fv.bits[n] != 0) m.at(static_cast<int>(n / plane), fv.label) += fv.bits[n];
    }
  }
  return m;
}

}  // namespace stdpnet
