#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "stdpnet/conv_layer.hpp"
#include "stdpnet/spike_tensor.hpp"

namespace stdpnet {

// Time-summed pooled spikes flattened map-major, then row, then column.
struct FeatureVector {
  std::vector<std::uint8_t> bits;
  int label = -1;

  std::size_t popcount() const;
  bool operator==(const FeatureVector&) const = default;
};

struct FeatureGeometry {
  int maps = 0;
  int rows = 0;
  int cols = 0;
  std::size_t length() const { return static_cast<std::size_t>(maps) * rows * cols; }
  bool operator==(const FeatureGeometry&) const = default;
};

FeatureVector flatten_pooled(const SpikeTensor& pooled, int label = -1);

FeatureVector extract_feature_vector(const SpikeTensor& input, const ConvLayerState& state,
                                     const PoolConfig& pool_config, int label = -1);

struct ExtractionResult {
  FeatureGeometry geometry;
  std::vector<FeatureVector> features;
  std::vector<SpikeTensor> pooled;  // filled only when requested
  std::size_t conv_spikes = 0;
  std::size_t pooled_spikes = 0;
};

// Runs the fixed layer over every image, OpenMP over images. `labels` may be
// empty (labels stay -1).
ExtractionResult extract_features(std::span<const SpikeTensor> inputs, std::span<const int> labels,
                                  const ConvLayerState& state, const PoolConfig& pool_config,
                                  bool keep_pooled = false);

FeatureGeometry pooled_geometry(const ConvLayerState& state, const SpikeShape& input,
                                const PoolConfig& pool_config);

struct ClassSpikeMatrix {
  int maps = 0;
  int classes = 0;
  std::vector<std::uint64_t> counts;  // maps x classes

  ClassSpikeMatrix() = default;
  ClassSpikeMatrix(int m, int c) : maps(m), classes(c), counts(static_cast<std::size_t>(m) * c, 0) {}

  std::uint64_t& at(int m, int c) { return counts[static_cast<std::size_t>(m) * classes + c]; }
  std::uint64_t at(int m, int c) const { return counts[static_cast<std::size_t>(m) * classes + c]; }
  std::uint64_t column_sum(int c) const;
  // Class with most spikes in map m (ties: lowest class); -1 if the map is silent.
  int argmax_class(int m) const;
  void merge(const ClassSpikeMatrix& other);
};

ClassSpikeMatrix spikes_per_map_per_class(std::span<const SpikeTensor> pooled,
                                          std::span<const int> labels, int classes);

// Same tally from feature vectors (equal to the pooled tally when pooled
// neurons spike at most once).
ClassSpikeMatrix spikes_per_map_per_class(std::span<const FeatureVector> features,
                                          const FeatureGeometry& geometry, int classes);

namespace serial {
ExtractionResult extract_features(std::span<const SpikeTensor> inputs, std::span<const int> labels,
                                  const ConvLayerState& state, const PoolConfig& pool_config,
                                  bool keep_pooled = false);
}

}  // namespace stdpnet
