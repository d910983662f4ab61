#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <vector>

namespace stdpnet {

// Grayscale rasters stored back to back, row-major, one byte per pixel.
struct ImageSet {
  int height = 0;
  int width = 0;
  std::vector<std::uint8_t> pixels;

  std::size_t size() const {
    const std::size_t area = static_cast<std::size_t>(height) * static_cast<std::size_t>(width);
    return area == 0 ? 0 : pixels.size() / area;
  }
  std::span<const std::uint8_t> image(std::size_t i) const {
    const std::size_t area = static_cast<std::size_t>(height) * static_cast<std::size_t>(width);
    return {pixels.data() + i * area, area};
  }

  bool operator==(const ImageSet&) const = default;
};

struct LabelSet {
  std::vector<std::uint8_t> labels;
  int num_classes = 0;

  std::size_t size() const { return labels.size(); }
  bool operator==(const LabelSet&) const = default;
};

struct IdxOptions {
  // nullopt: decide from a ".gz" filename suffix.
  std::optional<bool> gzipped;
  // EMNIST rasters are stored column-major; transpose them to upright.
  bool transpose = false;
  // Overrides the class count inferred from the largest label.
  std::optional<int> num_classes;
};

ImageSet load_idx_images(const std::filesystem::path& path, const IdxOptions& options = {});
LabelSet load_idx_labels(const std::filesystem::path& path, const IdxOptions& options = {});

ImageSet parse_idx_images(std::span<const std::uint8_t> bytes, bool transpose = false);
LabelSet parse_idx_labels(std::span<const std::uint8_t> bytes, std::optional<int> num_classes = {});

std::vector<std::uint8_t> encode_idx_images(const ImageSet& images);
std::vector<std::uint8_t> encode_idx_labels(const LabelSet& labels);

// Reads the whole file, inflating it when gzipped.
std::vector<std::uint8_t> read_file_bytes(const std::filesystem::path& path,
                                          std::optional<bool> gzipped = {});

struct DataSplit {
  ImageSet images;
  LabelSet labels;
  std::vector<std::size_t> indices;  // positions in the source set
};

struct DatasetSplits {
  DataSplit train;
  DataSplit validation;
  DataSplit test;
  std::uint64_t seed = 0;
};

// Seeded Fisher-Yates shuffle, then test / validation / train slices.
DatasetSplits split_dataset(const ImageSet& images, const LabelSet& labels, double val_frac,
                            double test_frac, std::uint64_t seed);

// Copies the selected records.
DataSplit subset(const ImageSet& images, const LabelSet& labels,
                 std::span<const std::size_t> indices);

enum class ClassGroup : std::uint8_t { Digit, Upper, Lower };

struct ClassGroupMap {
  std::vector<ClassGroup> group_of;
  std::size_t size() const { return group_of.size(); }
};

// EMNIST-balanced: 0-9 digits, 10-35 'A'-'Z', 36-46 "abdefghnqrt".
ClassGroupMap emnist_group_map();
char emnist_symbol(int cls);

// Every class in one group, e.g. for MNIST.
ClassGroupMap single_group_map(int classes);

}  // namespace stdpnet
