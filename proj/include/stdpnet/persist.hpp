#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string_view>
#include <vector>

#include "stdpnet/classifier.hpp"
#include "stdpnet/conv_layer.hpp"
#include "stdpnet/features.hpp"
#include "stdpnet/spike_tensor.hpp"

// Binary containers: 8-byte magic, u32 version, then fields in little-endian
// order. Every container records the seed of the run that produced it and a
// 64-bit FNV-1a hash of the inputs it was derived from.
namespace stdpnet::persist {

inline constexpr std::uint32_t kVersion = 1;
inline constexpr std::uint32_t kFlattenMapRowCol = 1;

inline constexpr std::uint64_t kFnvOffset = 0xcbf29ce484222325ULL;
std::uint64_t fnv1a(std::span<const std::uint8_t> bytes, std::uint64_t h = kFnvOffset);
std::uint64_t fnv1a(std::string_view text, std::uint64_t h = kFnvOffset);
std::uint64_t hash_file(const std::filesystem::path& path);

struct Provenance {
  std::uint64_t seed = 0;
  std::uint64_t source_hash = 0;
  bool operator==(const Provenance&) const = default;
};

struct SpikeCache {
  Provenance provenance;
  SpikeShape shape;
  std::vector<SpikeTensor> tensors;
  std::vector<int> labels;  // -1 when unlabeled
};

struct WeightFile {
  Provenance provenance;
  ConvLayerState state;
};

struct FeatureCache {
  Provenance provenance;
  FeatureGeometry geometry;
  std::uint32_t flatten_order = kFlattenMapRowCol;
  std::vector<FeatureVector> features;
};

struct ModelFile {
  Provenance provenance;
  MlpState state;
};

std::vector<std::uint8_t> encode(const SpikeCache& cache);
std::vector<std::uint8_t> encode(const WeightFile& file);
std::vector<std::uint8_t> encode(const FeatureCache& cache);
std::vector<std::uint8_t> encode(const ModelFile& file);

// Throw BadMagic, BadVersion, TruncatedFile or ShapeMismatch.
SpikeCache decode_spike_cache(std::span<const std::uint8_t> bytes);
WeightFile decode_weights(std::span<const std::uint8_t> bytes);
FeatureCache decode_feature_cache(std::span<const std::uint8_t> bytes);
ModelFile decode_model(std::span<const std::uint8_t> bytes);

// Headers only, without reading payloads.
Provenance peek_provenance(const std::filesystem::path& path);

void write_file(const std::filesystem::path& path, std::span<const std::uint8_t> bytes);

template <class T>
void save(const std::filesystem::path& path, const T& value) {
  write_file(path, encode(value));
}

// FileNotFound when absent.
SpikeCache load_spike_cache(const std::filesystem::path& path);
WeightFile load_weights(const std::filesystem::path& path);
FeatureCache load_feature_cache(const std::filesystem::path& path);
ModelFile load_model(const std::filesystem::path& path);

}  // namespace stdpnet::persist
