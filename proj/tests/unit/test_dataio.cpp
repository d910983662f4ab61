#include <zlib.h>

#include <algorithm>
#include <numeric>
#include <random>
#include <set>

#include "doctest.h"
#include "stdpnet/dataio.hpp"
#include "support.hpp"

using namespace stdpnet;
using testing::error_of;

namespace {

void put_be32(std::vector<std::uint8_t>& out, std::uint32_t v) {
  for (int shift = 24; shift >= 0; shift -= 8) out.push_back(static_cast<std::uint8_t>(v >> shift));
}

std::vector<std::uint8_t> idx_header(std::uint32_t magic, std::initializer_list<std::uint32_t> dims) {
  std::vector<std::uint8_t> out;
  put_be32(out, magic);
  for (auto d : dims) put_be32(out, d);
  return out;
}

ImageSet random_images(std::mt19937_64& rng, std::size_t n, int h, int w) {
  std::uniform_int_distribution<int> px(0, 255);
  ImageSet set{h, w, {}};
  set.pixels.resize(n * static_cast<std::size_t>(h * w));
  for (auto& p : set.pixels) p = static_cast<std::uint8_t>(px(rng));
  return set;
}

}  // namespace

TEST_SUITE("dataio") {

TEST_CASE("hand-laid four-record shard") {
  auto bytes = idx_header(0x00000803, {4, 28, 28});
  for (int n = 0; n < 4; ++n) {
    for (int p = 0; p < 28 * 28; ++p) bytes.push_back(static_cast<std::uint8_t>((n * 31 + p) % 256));
  }
  const auto set = parse_idx_images(bytes);
  CHECK(set.size() == 4);
  CHECK(set.height == 28);
  CHECK(set.width == 28);
  for (int n = 0; n < 4; ++n) {
    const auto img = set.image(static_cast<std::size_t>(n));
    for (int p = 0; p < 28 * 28; p += 97) CHECK(img[static_cast<std::size_t>(p)] == (n * 31 + p) % 256);
  }
}

TEST_CASE("image parser rejects the label magic") {
  auto bytes = idx_header(0x00000801, {1, 2, 2});
  bytes.resize(bytes.size() + 4);
  CHECK(error_of([&] { parse_idx_images(bytes); }) == Errc::BadMagic);
}

TEST_CASE("zero records give an empty set") {
  const auto bytes = idx_header(0x00000803, {0, 28, 28});
  const auto set = parse_idx_images(bytes);
  CHECK(set.size() == 0);
  CHECK(set.height == 28);
}

TEST_CASE("short and long payloads are rejected") {
  auto bytes = idx_header(0x00000803, {2, 3, 3});
  bytes.resize(bytes.size() + 17);
  CHECK(error_of([&] { parse_idx_images(bytes); }) == Errc::TruncatedFile);
  bytes.resize(bytes.size() + 2);
  CHECK(error_of([&] { parse_idx_images(bytes); }) == Errc::DimensionMismatch);
  const std::vector<std::uint8_t> stub{0, 0, 8};
  CHECK(error_of([&] { parse_idx_images(stub); }) == Errc::TruncatedFile);
}

TEST_CASE("hand-laid label file") {
  auto bytes = idx_header(0x00000801, {3});
  bytes.insert(bytes.end(), {5, 0, 9});
  const auto set = parse_idx_labels(bytes);
  CHECK(set.labels == std::vector<std::uint8_t>{5, 0, 9});
  CHECK(set.num_classes == 10);
  CHECK(parse_idx_labels(bytes, 47).num_classes == 47);
  CHECK(error_of([&] { parse_idx_labels(bytes, 5); }) == Errc::LabelOutOfRange);
}

TEST_CASE("empty label file and wrong magic") {
  const auto empty = idx_header(0x00000801, {0});
  CHECK(parse_idx_labels(empty).size() == 0);
  auto images = idx_header(0x00000803, {1});
  images.push_back(1);
  CHECK(error_of([&] { parse_idx_labels(images); }) == Errc::BadMagic);
}

TEST_CASE("transpose swaps the stored column-major raster") {
  // stored column-major: columns (1,2,3) and (4,5,6) of a 3x2 upright image
  auto bytes = idx_header(0x00000803, {1, 3, 2});
  bytes.insert(bytes.end(), {1, 2, 3, 4, 5, 6});
  const auto set = parse_idx_images(bytes, true);
  CHECK(set.pixels == std::vector<std::uint8_t>{1, 4, 2, 5, 3, 6});
}

TEST_CASE("image and label round trip is bit-exact") {
  std::mt19937_64 rng(11);
  for (int trial = 0; trial < 40; ++trial) {
    const int h = 1 + static_cast<int>(rng() % 30);
    const int w = 1 + static_cast<int>(rng() % 30);
    const auto images = random_images(rng, rng() % 20, h, w);
    CHECK(parse_idx_images(encode_idx_images(images)) == images);

    LabelSet labels;
    labels.num_classes = 47;
    for (std::size_t i = 0; i < images.size(); ++i) labels.labels.push_back(static_cast<std::uint8_t>(rng() % 47));
    CHECK(parse_idx_labels(encode_idx_labels(labels), 47) == labels);
  }
}

TEST_CASE("gzip files are inflated by suffix or override") {
  testing::TempDir dir;
  std::mt19937_64 rng(3);
  const auto images = random_images(rng, 5, 28, 28);
  const auto raw = encode_idx_images(images);

  const auto gz = dir / "shard-idx3-ubyte.gz";
  gzFile f = gzopen(gz.string().c_str(), "wb");
  REQUIRE(f != nullptr);
  gzwrite(f, raw.data(), static_cast<unsigned>(raw.size()));
  gzclose(f);
  CHECK(load_idx_images(gz) == images);

  const auto renamed = dir / "shard.bin";
  std::filesystem::copy_file(gz, renamed);
  CHECK(load_idx_images(renamed, IdxOptions{true, false, {}}) == images);

  const auto plain = dir / "plain-idx3-ubyte";
  testing::spill(plain, raw);
  CHECK(load_idx_images(plain) == images);
  CHECK(error_of([&] { load_idx_images(dir / "absent"); }) == Errc::FileNotFound);
}

TEST_CASE("split sizes follow the fractions") {
  std::mt19937_64 rng(5);
  const auto images = random_images(rng, 100, 2, 2);
  LabelSet labels{std::vector<std::uint8_t>(100, 1), 10};
  const auto s = split_dataset(images, labels, 0.1, 0.1, 7);
  CHECK(s.train.images.size() == 80);
  CHECK(s.validation.images.size() == 10);
  CHECK(s.test.images.size() == 10);
  CHECK(s.seed == 7);

  const auto all_train = split_dataset(images, labels, 0.0, 0.0, 7);
  CHECK(all_train.train.images.size() == 100);
  CHECK(all_train.validation.images.size() == 0);
  CHECK(all_train.test.images.size() == 0);
}

TEST_CASE("split is a seeded partition") {
  std::mt19937_64 rng(9);
  for (int trial = 0; trial < 20; ++trial) {
    const std::size_t n = 1 + rng() % 300;
    const auto images = random_images(rng, n, 3, 2);
    LabelSet labels;
    labels.num_classes = 10;
    for (std::size_t i = 0; i < n; ++i) labels.labels.push_back(static_cast<std::uint8_t>(rng() % 10));
    const double vf = std::uniform_real_distribution<double>(0.0, 0.45)(rng);
    const double tf = std::uniform_real_distribution<double>(0.0, 0.45)(rng);
    const std::uint64_t seed = rng();
    const auto s = split_dataset(images, labels, vf, tf, seed);

    std::vector<std::size_t> all;
    for (const auto* part : {&s.train, &s.validation, &s.test}) {
      all.insert(all.end(), part->indices.begin(), part->indices.end());
      for (std::size_t k = 0; k < part->indices.size(); ++k) {
        const auto src = part->indices[k];
        CHECK(part->labels.labels[k] == labels.labels[src]);
        CHECK(std::equal(part->images.image(k).begin(), part->images.image(k).end(),
                         images.image(src).begin()));
      }
    }
    std::sort(all.begin(), all.end());
    std::vector<std::size_t> expected(n);
    std::iota(expected.begin(), expected.end(), std::size_t{0});
    CHECK(all == expected);
    CHECK(std::abs(static_cast<double>(s.test.indices.size()) - tf * static_cast<double>(n)) <= 0.5);
    CHECK(std::abs(static_cast<double>(s.validation.indices.size()) - vf * static_cast<double>(n)) <= 0.5);

    const auto again = split_dataset(images, labels, vf, tf, seed);
    CHECK(again.train.indices == s.train.indices);
    CHECK(again.validation.indices == s.validation.indices);
    CHECK(again.test.indices == s.test.indices);
  }
}

TEST_CASE("split argument checks") {
  ImageSet images{1, 1, {1, 2, 3}};
  LabelSet labels{{0, 1}, 2};
  CHECK(error_of([&] { split_dataset(images, labels, 0.6, 0.4, 1); }) == Errc::FractionOutOfRange);
  CHECK(error_of([&] { split_dataset(images, labels, -0.1, 0.0, 1); }) == Errc::FractionOutOfRange);
  CHECK(error_of([&] { split_dataset(images, labels, 0.1, 0.1, 1); }) == Errc::LengthMismatch);
}

TEST_CASE("EMNIST class groups") {
  const auto map = emnist_group_map();
  REQUIRE(map.size() == 47);
  CHECK(map.group_of[0] == ClassGroup::Digit);
  CHECK(map.group_of[46] == ClassGroup::Lower);
  std::set<int> digits;
  for (int c = 0; c < 47; ++c) {
    if (map.group_of[static_cast<std::size_t>(c)] == ClassGroup::Digit) digits.insert(c);
    const char sym = emnist_symbol(c);
    const auto g = map.group_of[static_cast<std::size_t>(c)];
    if (g == ClassGroup::Digit) CHECK((sym >= '0' && sym <= '9'));
    if (g == ClassGroup::Upper) CHECK((sym >= 'A' && sym <= 'Z'));
    if (g == ClassGroup::Lower) CHECK((sym >= 'a' && sym <= 'z'));
  }
  CHECK(digits == std::set<int>{0, 1, 2, 3, 4, 5, 6, 7, 8, 9});
  CHECK(emnist_symbol(45) == 'r');
  CHECK(emnist_symbol(46) == 't');
  CHECK(error_of([] { emnist_symbol(47); }) == Errc::LabelOutOfRange);
}

}  // TEST_SUITE
