#pragma once

// Small deterministic IDX datasets for pipeline tests: each class draws a bar
// at its own angle, jittered per image.

#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <numbers>
#include <random>
#include <vector>

#include "stdpnet/dataio.hpp"

namespace synthetic {

inline stdpnet::ImageSet bar_images(const std::vector<std::uint8_t>& labels, int classes, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> jitter(-2.0, 2.0);
  stdpnet::ImageSet set{28, 28, std::vector<std::uint8_t>(labels.size() * 784, 0)};
  for (std::size_t n = 0; n < labels.size(); ++n) {
    const double angle = std::numbers::pi * labels[n] / classes;
    const double cy = 14 + jitter(rng), cx = 14 + jitter(rng);
    for (double t = -9; t <= 9; t += 0.25) {
      for (double w = -1.0; w <= 1.0; w += 0.5) {
        const int y = static_cast<int>(std::lround(cy + t * std::sin(angle) + w * std::cos(angle)));
        const int x = static_cast<int>(std::lround(cx + t * std::cos(angle) - w * std::sin(angle)));
        if (y >= 0 && y < 28 && x >= 0 && x < 28) set.pixels[n * 784 + static_cast<std::size_t>(y * 28 + x)] = 255;
      }
    }
  }
  return set;
}

struct Files {
  std::filesystem::path train_images, train_labels, test_images, test_labels;
};

inline void write_bytes(const std::filesystem::path& p, const std::vector<std::uint8_t>& bytes) {
  std::ofstream out(p, std::ios::binary);
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
}

inline Files write_dataset(const std::filesystem::path& dir, std::size_t n_train, std::size_t n_test,
                           int classes = 4) {
  Files f{dir / "train-images-idx3-ubyte", dir / "train-labels-idx1-ubyte", dir / "t10k-images-idx3-ubyte",
          dir / "t10k-labels-idx1-ubyte"};
  auto make = [&](std::size_t n, std::uint64_t seed, const std::filesystem::path& img, const std::filesystem::path& lab) {
    stdpnet::LabelSet labels;
    labels.num_classes = classes;
    for (std::size_t i = 0; i < n; ++i) labels.labels.push_back(static_cast<std::uint8_t>(i % static_cast<std::size_t>(classes)));
    write_bytes(img, stdpnet::encode_idx_images(bar_images(labels.labels, classes, seed)));
    write_bytes(lab, stdpnet::encode_idx_labels(labels));
  };
  make(n_train, 1, f.train_images, f.train_labels);
  make(n_test, 2, f.test_images, f.test_labels);
  return f;
}

}  // namespace synthetic
