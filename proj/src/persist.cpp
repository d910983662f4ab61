#include "stdpnet/persist.hpp"

#include <array>
#include <bit>
#include <cstring>
#include <fstream>
#include <string>

#include "stdpnet/dataio.hpp"
#include "stdpnet/error.hpp"

namespace stdpnet::persist {

using Magic = std::array<char, 8>;

namespace {

constexpr Magic kSpikeMagic{'S', 'T', 'D', 'P', 'S', 'P', 'K', 'C'};
constexpr Magic kWeightMagic{'S', 'T', 'D', 'P', 'W', 'G', 'T', 'S'};
constexpr Magic kFeatureMagic{'S', 'T', 'D', 'P', 'F', 'E', 'A', 'T'};
constexpr Magic kModelMagic{'S', 'T', 'D', 'P', 'M', 'O', 'D', 'L'};

class Writer {
 public:
  void magic(const Magic& m) { out_.insert(out_.end(), m.begin(), m.end()); }
  void u32(std::uint32_t v) { le(v, 4); }
  void i32(std::int32_t v) { le(static_cast<std::uint32_t>(v), 4); }
  void u64(std::uint64_t v) { le(v, 8); }
  void f64(double v) { le(std::bit_cast<std::uint64_t>(v), 8); }
  void bytes(std::span<const std::uint8_t> b) { out_.insert(out_.end(), b.begin(), b.end()); }
  void header(const Magic& m, const Provenance& p) {
    magic(m);
    u32(kVersion);
    u64(p.seed);
    u64(p.source_hash);
  }
  std::vector<std::uint8_t> take() { return std::move(out_); }

 private:
  void le(std::uint64_t v, int n) {
    for (int i = 0; i < n; ++i) out_.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
  }
  std::vector<std::uint8_t> out_;
};

class Reader {
 public:
  explicit Reader(std::span<const std::uint8_t> b) : b_(b) {}

  std::span<const std::uint8_t> take(std::size_t n) {
    if (n > b_.size() - pos_) {
      throw Error(Errc::TruncatedFile, "need " + std::to_string(n) + " bytes at offset " +
                                           std::to_string(pos_) + ", file has " + std::to_string(b_.size()));
    }
    auto s = b_.subspan(pos_, n);
    pos_ += n;
    return s;
  }
  std::uint32_t u32() { return static_cast<std::uint32_t>(le(4)); }
  std::int32_t i32() { return static_cast<std::int32_t>(u32()); }
  std::uint64_t u64() { return le(8); }
  double f64() { return std::bit_cast<double>(le(8)); }
  int dim() {
    const auto v = u32();
    if (v > (1u << 30)) throw Error(Errc::ShapeMismatch, "implausible dimension " + std::to_string(v));
    return static_cast<int>(v);
  }

  Provenance header(const Magic& m) {
    const auto got = take(8);
    if (std::memcmp(got.data(), m.data(), 8) != 0) {
      throw Error(Errc::BadMagic, "expected " + std::string(m.data(), 8) + " container");
    }
    const auto version = u32();
    if (version != kVersion) {
      throw Error(Errc::BadVersion, "container version " + std::to_string(version) + ", reader supports " +
                                        std::to_string(kVersion));
    }
    Provenance p;
    p.seed = u64();
    p.source_hash = u64();
    return p;
  }

  void finish() const {
    if (pos_ != b_.size()) {
      throw Error(Errc::ShapeMismatch, std::to_string(b_.size() - pos_) + " trailing bytes");
    }
  }

 private:
  std::uint64_t le(int n) {
    const auto s = take(static_cast<std::size_t>(n));
    std::uint64_t v = 0;
    for (int i = 0; i < n; ++i) v |= std::uint64_t{s[static_cast<std::size_t>(i)]} << (8 * i);
    return v;
  }
  std::span<const std::uint8_t> b_;
  std::size_t pos_ = 0;
};

std::size_t packed_size(std::size_t bits) { return (bits + 7) / 8; }

}  // namespace

std::uint64_t fnv1a(std::span<const std::uint8_t> bytes, std::uint64_t h) {
  for (auto b : bytes) {
    h ^= b;
    h *= 0x100000001b3ULL;
  }
  return h;
}

std::uint64_t fnv1a(std::string_view text, std::uint64_t h) {
  return fnv1a({reinterpret_cast<const std::uint8_t*>(text.data()), text.size()}, h);
}

std::uint64_t hash_file(const std::filesystem::path& path) { return fnv1a(read_file_bytes(path, false)); }

std::vector<std::uint8_t> encode(const SpikeCache& cache) {
  if (cache.labels.size() != cache.tensors.size()) {
    throw Error(Errc::LengthMismatch, "labels and tensors differ in count");
  }
  Writer w;
  w.header(kSpikeMagic, cache.provenance);
  const auto& s = cache.shape;
  w.u32(static_cast<std::uint32_t>(s.slices));
  w.u32(static_cast<std::uint32_t>(s.channels));
  w.u32(static_cast<std::uint32_t>(s.height));
  w.u32(static_cast<std::uint32_t>(s.width));
  w.u64(cache.tensors.size());
  std::vector<std::uint8_t> packed(packed_size(s.elements()));
  for (std::size_t n = 0; n < cache.tensors.size(); ++n) {
    const auto& t = cache.tensors[n];
    if (!(t.shape() == s)) throw Error(Errc::ShapeMismatch, "tensor " + std::to_string(n) + " differs in shape");
    std::fill(packed.begin(), packed.end(), 0);
    for (int sl = 0; sl < s.slices; ++sl) {
      for (const auto& e : t.slice(sl)) {
        const std::size_t idx =
            ((static_cast<std::size_t>(sl) * s.channels + e.channel) * s.height + e.row) * s.width + e.col;
        packed[idx / 8] |= static_cast<std::uint8_t>(1u << (idx % 8));
      }
    }
    w.i32(cache.labels[n]);
    w.bytes(packed);
  }
  return w.take();
}

SpikeCache decode_spike_cache(std::span<const std::uint8_t> bytes) {
  Reader r(bytes);
  SpikeCache c;
  c.provenance = r.header(kSpikeMagic);
  c.shape.slices = r.dim();
  c.shape.channels = r.dim();
  c.shape.height = r.dim();
  c.shape.width = r.dim();
  const auto count = r.u64();
  const std::size_t per = packed_size(c.shape.elements());
  if (per > 0 && count > bytes.size() / per) throw Error(Errc::TruncatedFile, "declared image count exceeds file size");
  const std::size_t plane = static_cast<std::size_t>(c.shape.height) * c.shape.width;
  const std::size_t volume = static_cast<std::size_t>(c.shape.channels) * plane;
  c.tensors.reserve(count);
  c.labels.reserve(count);
  for (std::uint64_t n = 0; n < count; ++n) {
    c.labels.push_back(r.i32());
    const auto packed = r.take(per);
    SpikeTensor t(c.shape);
    for (std::size_t b = 0; b < packed.size(); ++b) {
      if (packed[b] == 0) continue;
      for (int bit = 0; bit < 8; ++bit) {
        if ((packed[b] >> bit & 1u) == 0) continue;
        const std::size_t idx = b * 8 + static_cast<std::size_t>(bit);
        if (idx >= c.shape.elements()) throw Error(Errc::ShapeMismatch, "padding bits set");
        const std::size_t rem = idx % volume;
        t.add(static_cast<int>(idx / volume), static_cast<int>(rem / plane),
              static_cast<int>(rem % plane / c.shape.width), static_cast<int>(rem % c.shape.width));
      }
    }
    c.tensors.push_back(std::move(t));
  }
  r.finish();
  return c;
}

std::vector<std::uint8_t> encode(const WeightFile& file) {
  const auto& s = file.state;
  const auto& cfg = s.config;
  Writer w;
  w.header(kWeightMagic, file.provenance);
  w.u32(static_cast<std::uint32_t>(cfg.maps));
  w.u32(static_cast<std::uint32_t>(cfg.channels));
  w.u32(static_cast<std::uint32_t>(cfg.kernel));
  w.f64(cfg.threshold);
  w.u32(static_cast<std::uint32_t>(cfg.inhibition_radius));
  w.f64(cfg.a_plus);
  w.f64(cfg.a_minus);
  w.u32(static_cast<std::uint32_t>(cfg.lr_double_every));
  w.f64(cfg.lr_cap);
  w.f64(cfg.init_mean);
  w.f64(cfg.init_std);
  w.f64(s.a_plus);
  w.f64(s.a_minus);
  w.u64(s.images_seen);
  w.u64(s.weights.size());
  for (double v : s.weights) w.f64(v);
  return w.take();
}

WeightFile decode_weights(std::span<const std::uint8_t> bytes) {
  Reader r(bytes);
  WeightFile f;
  f.provenance = r.header(kWeightMagic);
  auto& cfg = f.state.config;
  cfg.maps = r.dim();
  cfg.channels = r.dim();
  cfg.kernel = r.dim();
  cfg.threshold = r.f64();
  cfg.inhibition_radius = r.dim();
  cfg.a_plus = r.f64();
  cfg.a_minus = r.f64();
  cfg.lr_double_every = r.dim();
  cfg.lr_cap = r.f64();
  cfg.init_mean = r.f64();
  cfg.init_std = r.f64();
  f.state.a_plus = r.f64();
  f.state.a_minus = r.f64();
  f.state.images_seen = r.u64();
  const auto n = r.u64();
  if (n != f.state.kernel_size() * static_cast<std::size_t>(cfg.maps)) {
    throw Error(Errc::ShapeMismatch, "weight count " + std::to_string(n) + " does not match header");
  }
  f.state.weights.resize(n);
  for (auto& v : f.state.weights) v = r.f64();
  r.finish();
  return f;
}

std::vector<std::uint8_t> encode(const FeatureCache& cache) {
  Writer w;
  w.header(kFeatureMagic, cache.provenance);
  const auto& g = cache.geometry;
  w.u32(static_cast<std::uint32_t>(g.maps));
  w.u32(static_cast<std::uint32_t>(g.rows));
  w.u32(static_cast<std::uint32_t>(g.cols));
  w.u32(cache.flatten_order);
  w.u64(g.length());
  w.u64(cache.features.size());
  std::vector<std::uint8_t> packed(packed_size(g.length()));
  for (const auto& fv : cache.features) {
    if (fv.bits.size() != g.length()) throw Error(Errc::LengthMismatch, "feature length differs from geometry");
    std::fill(packed.begin(), packed.end(), 0);
    for (std::size_t i = 0; i < fv.bits.size(); ++i) {
      if (fv.bits[i] != 0) packed[i / 8] |= static_cast<std::uint8_t>(1u << (i % 8));
    }
    w.i32(fv.label);
    w.bytes(packed);
  }
  return w.take();
}

FeatureCache decode_feature_cache(std::span<const std::uint8_t> bytes) {
  Reader r(bytes);
  FeatureCache c;
  c.provenance = r.header(kFeatureMagic);
  c.geometry.maps = r.dim();
  c.geometry.rows = r.dim();
  c.geometry.cols = r.dim();
  c.flatten_order = r.u32();
  if (c.flatten_order != kFlattenMapRowCol) {
    throw Error(Errc::BadVersion, "unknown flattening order " + std::to_string(c.flatten_order));
  }
  const auto length = r.u64();
  if (length != c.geometry.length()) throw Error(Errc::ShapeMismatch, "length does not match geometry");
  const auto count = r.u64();
  const std::size_t per = packed_size(length);
  if (per > 0 && count > bytes.size() / per) throw Error(Errc::TruncatedFile, "declared vector count exceeds file size");
  c.features.resize(count);
  for (auto& fv : c.features) {
    fv.label = r.i32();
    const auto packed = r.take(per);
    fv.bits.assign(length, 0);
    for (std::size_t i = 0; i < length; ++i) fv.bits[i] = packed[i / 8] >> (i % 8) & 1u;
  }
  r.finish();
  return c;
}

std::vector<std::uint8_t> encode(const ModelFile& file) {
  const auto& s = file.state;
  Writer w;
  w.header(kModelMagic, file.provenance);
  w.u32(static_cast<std::uint32_t>(s.mode));
  w.u32(static_cast<std::uint32_t>(s.input_dim()));
  w.u32(static_cast<std::uint32_t>(s.hidden()));
  w.u32(static_cast<std::uint32_t>(s.classes()));
  w.u32(static_cast<std::uint32_t>(s.batch_size));
  w.f64(s.tau_sat);
  w.f64(s.eta);
  w.f64(s.dropout);
  // Matrices column-major, as held in memory.
  for (double v : s.w4.data()) w.f64(v);
  for (double v : s.b4) w.f64(v);
  for (double v : s.w5.data()) w.f64(v);
  for (double v : s.b5) w.f64(v);
  return w.take();
}

ModelFile decode_model(std::span<const std::uint8_t> bytes) {
  Reader r(bytes);
  ModelFile f;
  f.provenance = r.header(kModelMagic);
  auto& s = f.state;
  const auto mode = r.u32();
  if (mode > static_cast<std::uint32_t>(GradientMode::Surrogate2)) {
    throw Error(Errc::ShapeMismatch, "unknown gradient mode " + std::to_string(mode));
  }
  s.mode = static_cast<GradientMode>(mode);
  const int in = r.dim();
  const int hidden = r.dim();
  const int classes = r.dim();
  s.batch_size = r.dim();
  s.tau_sat = r.f64();
  s.eta = r.f64();
  s.dropout = r.f64();
  const std::size_t need = (static_cast<std::size_t>(hidden) * in + hidden +
                            static_cast<std::size_t>(classes) * hidden + classes) * 8;
  if (need > bytes.size()) throw Error(Errc::TruncatedFile, "model dims exceed file size");
  s.w4 = Matrix(hidden, in);
  for (auto& v : s.w4.data()) v = r.f64();
  s.b4.resize(static_cast<std::size_t>(hidden));
  for (auto& v : s.b4) v = r.f64();
  s.w5 = Matrix(classes, hidden);
  for (auto& v : s.w5.data()) v = r.f64();
  s.b5.resize(static_cast<std::size_t>(classes));
  for (auto& v : s.b5) v = r.f64();
  r.finish();
  return f;
}

Provenance peek_provenance(const std::filesystem::path& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw Error(Errc::FileNotFound, path.string());
  std::array<std::uint8_t, 28> head{};
  f.read(reinterpret_cast<char*>(head.data()), head.size());
  if (f.gcount() != static_cast<std::streamsize>(head.size())) {
    throw Error(Errc::TruncatedFile, path.string() + " is shorter than a container header");
  }
  Reader r(std::span<const std::uint8_t>(head).subspan(12));
  Provenance p;
  p.seed = r.u64();
  p.source_hash = r.u64();
  return p;
}

void write_file(const std::filesystem::path& path, std::span<const std::uint8_t> bytes) {
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) throw Error(Errc::IoError, "cannot open " + path.string() + " for writing");
  f.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!f) throw Error(Errc::IoError, "write failed: " + path.string());
}

SpikeCache load_spike_cache(const std::filesystem::path& path) {
  return decode_spike_cache(read_file_bytes(path, false));
}
WeightFile load_weights(const std::filesystem::path& path) { return decode_weights(read_file_bytes(path, false)); }
FeatureCache load_feature_cache(const std::filesystem::path& path) {
  return decode_feature_cache(read_file_bytes(path, false));
}
ModelFile load_model(const std::filesystem::path& path) { return decode_model(read_file_bytes(path, false)); }

}  // namespace stdpnet::persist
