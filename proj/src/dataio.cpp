#include "stdpnet/dataio.hpp"

#include <zlib.h>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numeric>
#include <random>
#include <string>

#include "stdpnet/error.hpp"

namespace stdpnet {
namespace {

constexpr std::uint32_t kImageMagic = 0x00000803;
constexpr std::uint32_t kLabelMagic = 0x00000801;

std::uint32_t read_be32(std::span<const std::uint8_t> bytes, std::size_t offset) {
  if (offset + 4 > bytes.size()) {
    throw Error(Errc::TruncatedFile, "header ends at byte " + std::to_string(bytes.size()));
  }
  return (std::uint32_t{bytes[offset]} << 24) | (std::uint32_t{bytes[offset + 1]} << 16) |
         (std::uint32_t{bytes[offset + 2]} << 8) | std::uint32_t{bytes[offset + 3]};
}

void write_be32(std::vector<std::uint8_t>& out, std::uint32_t v) {
  out.push_back(static_cast<std::uint8_t>(v >> 24));
  out.push_back(static_cast<std::uint8_t>(v >> 16));
  out.push_back(static_cast<std::uint8_t>(v >> 8));
  out.push_back(static_cast<std::uint8_t>(v));
}

void check_magic(std::uint32_t magic, std::uint32_t expected) {
  if (magic != expected) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "expected 0x%08x, found 0x%08x", expected, magic);
    throw Error(Errc::BadMagic, buf);
  }
}

bool has_gz_suffix(const std::filesystem::path& path) { return path.extension() == ".gz"; }

std::vector<std::uint8_t> read_plain(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(Errc::FileNotFound, path.string());
  in.seekg(0, std::ios::end);
  const auto size = static_cast<std::size_t>(in.tellg());
  in.seekg(0, std::ios::beg);
  std::vector<std::uint8_t> bytes(size);
  if (size > 0 && !in.read(reinterpret_cast<char*>(bytes.data()), static_cast<std::streamsize>(size))) {
    throw Error(Errc::IoError, "read failed: " + path.string());
  }
  return bytes;
}

std::vector<std::uint8_t> read_gzip(const std::filesystem::path& path) {
  gzFile file = gzopen(path.string().c_str(), "rb");
  if (file == nullptr) throw Error(Errc::FileNotFound, path.string());
  std::vector<std::uint8_t> bytes;
  std::uint8_t chunk[1 << 16];
  for (;;) {
    const int n = gzread(file, chunk, sizeof chunk);
    if (n < 0) {
      gzclose(file);
      throw Error(Errc::TruncatedFile, "gzip stream error in " + path.string());
    }
    if (n == 0) break;
    bytes.insert(bytes.end(), chunk, chunk + n);
  }
  gzclose(file);
  return bytes;
}

}  // namespace

std::vector<std::uint8_t> read_file_bytes(const std::filesystem::path& path,
                                          std::optional<bool> gzipped) {
  if (!std::filesystem::exists(path)) throw Error(Errc::FileNotFound, path.string());
  return gzipped.value_or(has_gz_suffix(path)) ? read_gzip(path) : read_plain(path);
}

ImageSet parse_idx_images(std::span<const std::uint8_t> bytes, bool transpose) {
  check_magic(read_be32(bytes, 0), kImageMagic);
  const std::uint32_t count = read_be32(bytes, 4);
  const std::uint32_t rows = read_be32(bytes, 8);
  const std::uint32_t cols = read_be32(bytes, 12);
  const std::uint64_t area = std::uint64_t{rows} * cols;
  const std::uint64_t payload = std::uint64_t{count} * area;
  if (bytes.size() < 16 + payload) {
    throw Error(Errc::TruncatedFile, "declared " + std::to_string(count) + " images of " +
                                         std::to_string(rows) + "x" + std::to_string(cols) +
                                         " but only " + std::to_string(bytes.size() - 16) +
                                         " payload bytes");
  }
  if (bytes.size() > 16 + payload) {
    throw Error(Errc::DimensionMismatch,
                std::to_string(bytes.size() - 16 - payload) + " trailing bytes after payload");
  }
  ImageSet set;
  set.height = static_cast<int>(rows);
  set.width = static_cast<int>(cols);
  set.pixels.assign(bytes.begin() + 16, bytes.end());
  if (transpose) {
    std::vector<std::uint8_t> upright(set.pixels.size());
    for (std::uint64_t n = 0; n < count; ++n) {
      const std::uint8_t* src = set.pixels.data() + n * area;
      std::uint8_t* dst = upright.data() + n * area;
      // stored as cols x rows; emit rows x cols
      for (std::uint32_t r = 0; r < rows; ++r) {
        for (std::uint32_t c = 0; c < cols; ++c) dst[r * cols + c] = src[c * rows + r];
      }
    }
    set.pixels = std::move(upright);
  }
  return set;
}

LabelSet parse_idx_labels(std::span<const std::uint8_t> bytes, std::optional<int> num_classes) {
  check_magic(read_be32(bytes, 0), kLabelMagic);
  const std::uint32_t count = read_be32(bytes, 4);
  if (bytes.size() < 8 + std::uint64_t{count}) {
    throw Error(Errc::TruncatedFile, "declared " + std::to_string(count) + " labels but only " +
                                         std::to_string(bytes.size() - 8) + " payload bytes");
  }
  LabelSet set;
  set.labels.assign(bytes.begin() + 8, bytes.begin() + 8 + count);
  const int inferred =
      set.labels.empty() ? 0 : *std::max_element(set.labels.begin(), set.labels.end()) + 1;
  set.num_classes = num_classes.value_or(inferred);
  if (set.num_classes < inferred) {
    throw Error(Errc::LabelOutOfRange, "label " + std::to_string(inferred - 1) +
                                           " exceeds class count " +
                                           std::to_string(set.num_classes));
  }
  return set;
}

ImageSet load_idx_images(const std::filesystem::path& path, const IdxOptions& options) {
  const auto bytes = read_file_bytes(path, options.gzipped);
  return parse_idx_images(bytes, options.transpose);
}

LabelSet load_idx_labels(const std::filesystem::path& path, const IdxOptions& options) {
  const auto bytes = read_file_bytes(path, options.gzipped);
  return parse_idx_labels(bytes, options.num_classes);
}

std::vector<std::uint8_t> encode_idx_images(const ImageSet& images) {
  std::vector<std::uint8_t> out;
  out.reserve(16 + images.pixels.size());
  write_be32(out, kImageMagic);
  write_be32(out, static_cast<std::uint32_t>(images.size()));
  write_be32(out, static_cast<std::uint32_t>(images.height));
  write_be32(out, static_cast<std::uint32_t>(images.width));
  out.insert(out.end(), images.pixels.begin(), images.pixels.end());
  return out;
}

std::vector<std::uint8_t> encode_idx_labels(const LabelSet& labels) {
  std::vector<std::uint8_t> out;
  out.reserve(8 + labels.labels.size());
  write_be32(out, kLabelMagic);
  write_be32(out, static_cast<std::uint32_t>(labels.labels.size()));
  out.insert(out.end(), labels.labels.begin(), labels.labels.end());
  return out;
}

DataSplit subset(const ImageSet& images, const LabelSet& labels,
                 std::span<const std::size_t> indices) {
  DataSplit split;
  split.images.height = images.height;
  split.images.width = images.width;
  split.labels.num_classes = labels.num_classes;
  const std::size_t area = static_cast<std::size_t>(images.height) * images.width;
  split.images.pixels.reserve(indices.size() * area);
  split.labels.labels.reserve(indices.size());
  for (std::size_t idx : indices) {
    const auto img = images.image(idx);
    split.images.pixels.insert(split.images.pixels.end(), img.begin(), img.end());
    split.labels.labels.push_back(labels.labels[idx]);
  }
  split.indices.assign(indices.begin(), indices.end());
  return split;
}

DatasetSplits split_dataset(const ImageSet& images, const LabelSet& labels, double val_frac,
                            double test_frac, std::uint64_t seed) {
  if (!(val_frac >= 0.0) || !(test_frac >= 0.0) || !(val_frac + test_frac < 1.0)) {
    throw Error(Errc::FractionOutOfRange, "val_frac + test_frac must lie in [0, 1)");
  }
  if (images.size() != labels.size()) {
    throw Error(Errc::LengthMismatch, std::to_string(images.size()) + " images vs " +
                                          std::to_string(labels.size()) + " labels");
  }
  const std::size_t n = images.size();
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::mt19937_64 rng(seed);
  for (std::size_t i = n; i > 1; --i) {
    std::uniform_int_distribution<std::size_t> pick(0, i - 1);
    std::swap(order[i - 1], order[pick(rng)]);
  }
  const auto n_test = static_cast<std::size_t>(std::llround(test_frac * static_cast<double>(n)));
  const auto n_val = static_cast<std::size_t>(std::llround(val_frac * static_cast<double>(n)));
  const std::span<const std::size_t> all(order);
  DatasetSplits splits;
  splits.seed = seed;
  splits.test = subset(images, labels, all.subspan(0, n_test));
  splits.validation = subset(images, labels, all.subspan(n_test, n_val));
  splits.train = subset(images, labels, all.subspan(n_test + n_val));
  return splits;
}

char emnist_symbol(int cls) {
  static constexpr char kLower[] = "abdefghnqrt";
  if (cls < 0 || cls >= 47) throw Error(Errc::LabelOutOfRange, std::to_string(cls));
  if (cls < 10) return static_cast<char>('0' + cls);
  if (cls < 36) return static_cast<char>('A' + (cls - 10));
  return kLower[cls - 36];
}

ClassGroupMap emnist_group_map() {
  ClassGroupMap map;
  map.group_of.resize(47);
  for (int c = 0; c < 47; ++c) {
    map.group_of[c] = c < 10 ? ClassGroup::Digit : (c < 36 ? ClassGroup::Upper : ClassGroup::Lower);
  }
  return map;
}

ClassGroupMap single_group_map(int classes) {
  return ClassGroupMap{std::vector<ClassGroup>(static_cast<std::size_t>(classes), ClassGroup::Digit)};
}

}  // namespace stdpnet
