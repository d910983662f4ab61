#include "stdpnet/encoder.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <string>

#include "stdpnet/error.hpp"

namespace stdpnet {

DogKernel dog_kernel(double sigma1, double sigma2) {
  if (!(sigma1 > 0.0) || !(sigma2 > 0.0)) {
    throw Error(Errc::NonPositiveSigma, "sigma1 and sigma2 must be positive");
  }
  DogKernel k;
  k.sigma1 = sigma1;
  k.sigma2 = sigma2;
  const double s1 = sigma1 * sigma1;
  const double s2 = sigma2 * sigma2;
  for (int i = -kDogRadius; i <= kDogRadius; ++i) {
    for (int j = -kDogRadius; j <= kDogRadius; ++j) {
      const double r2 = static_cast<double>(i * i + j * j);
      const double g1 = std::exp(-r2 / (2.0 * s1)) / (2.0 * std::numbers::pi * s1);
      const double g2 = std::exp(-r2 / (2.0 * s2)) / (2.0 * std::numbers::pi * s2);
      k.taps[(i + kDogRadius) * kDogSize + (j + kDogRadius)] = g1 - g2;
    }
  }
  return k;
}

DogKernel zero_mean_unit_peak(const DogKernel& kernel) {
  DogKernel k = kernel;
  double mean = 0.0;
  for (double t : k.taps) mean += t;
  mean /= static_cast<double>(k.taps.size());
  for (double& t : k.taps) t -= mean;
  const double peak = *std::max_element(k.taps.begin(), k.taps.end());
  if (peak > 0.0) {
    for (double& t : k.taps) t /= peak;
  }
  return k;
}

PotentialMap dog_filter(const Grid<double>& image, const DogKernel& kernel) {
  if (image.rows < kDogSize || image.cols < kDogSize) {
    throw Error(Errc::ImageTooSmall, std::to_string(image.rows) + "x" +
                                         std::to_string(image.cols) + " is smaller than 7x7");
  }
  PotentialMap out(image.rows - kDogSize + 1, image.cols - kDogSize + 1);
  for (int u = 0; u < out.rows; ++u) {
    for (int v = 0; v < out.cols; ++v) {
      double acc = 0.0;
      for (int i = -kDogRadius; i <= kDogRadius; ++i) {
        for (int j = -kDogRadius; j <= kDogRadius; ++j) {
          acc += image(u + kDogRadius + i, v + kDogRadius + j) * kernel.tap(i, j);
        }
      }
      out(u, v) = acc;
    }
  }
  return out;
}

Grid<double> pad_image(std::span<const std::uint8_t> pixels, int height, int width, int border) {
  if (pixels.size() != static_cast<std::size_t>(height) * static_cast<std::size_t>(width)) {
    throw Error(Errc::ShapeMismatch, "pixel buffer does not match " + std::to_string(height) +
                                         "x" + std::to_string(width));
  }
  Grid<double> padded(height + 2 * border + 1, width + 2 * border + 1, 0.0);
  for (int y = 0; y < height; ++y) {
    for (int x = 0; x < width; ++x) {
      padded(y + border, x + border) = pixels[static_cast<std::size_t>(y) * width + x];
    }
  }
  return padded;
}

SpikeTensor latency_encode(const PotentialMap& on_map, const PotentialMap& off_map,
                           const EncoderConfig& config) {
  if (on_map.rows != off_map.rows || on_map.cols != off_map.cols) {
    throw Error(Errc::ShapeMismatch, "ON and OFF maps differ in shape");
  }
  if (config.time_slices < 1) throw Error(Errc::ConfigInvalid, "time_slices must be >= 1");

  struct Ranked {
    double potential;
    SpikeEvent event;
  };
  std::vector<Ranked> spiking;
  const PotentialMap* maps[2] = {&on_map, &off_map};
  for (int c = 0; c < 2; ++c) {
    const auto& m = *maps[c];
    for (int u = 0; u < m.rows; ++u) {
      for (int v = 0; v < m.cols; ++v) {
        if (m(u, v) > config.gamma_dog) {
          spiking.push_back({m(u, v), {static_cast<std::uint16_t>(c), static_cast<std::uint16_t>(u),
                                       static_cast<std::uint16_t>(v)}});
        }
      }
    }
  }
  // Candidates were gathered in (c, u, v) order, so a stable sort on the
  // potential alone yields the documented tie order.
  std::stable_sort(spiking.begin(), spiking.end(),
                   [](const Ranked& a, const Ranked& b) { return a.potential > b.potential; });

  const SpikeShape shape{config.time_slices, 2, on_map.rows, on_map.cols};
  SpikeTensor tensor(shape);
  const std::size_t n = spiking.size();
  const auto slices = static_cast<std::size_t>(config.time_slices);
  for (std::size_t r = 0; r < n; ++r) {
    tensor.add(static_cast<int>(r * slices / n), spiking[r].event);
  }
  return tensor;
}

Encoder::Encoder(EncoderConfig config)
    : config_(config), on_(dog_kernel(1.0, 2.0)), off_(dog_kernel(2.0, 1.0)) {
  if (!(config_.gamma_dog > 0.0)) throw Error(Errc::ConfigInvalid, "gamma_dog must be > 0");
  if (config_.time_slices < 1) throw Error(Errc::ConfigInvalid, "time_slices must be >= 1");
  if (config_.border < 0) throw Error(Errc::ConfigInvalid, "border must be >= 0");
  if (config_.normalize_kernels) {
    on_ = zero_mean_unit_peak(on_);
    off_ = zero_mean_unit_peak(off_);
  }
}

SpikeShape Encoder::output_shape(int height, int width) const {
  const int extra = 2 * config_.border + 1 - (kDogSize - 1);
  return {config_.time_slices, 2, height + extra, width + extra};
}

SpikeTensor Encoder::encode(std::span<const std::uint8_t> pixels, int height, int width) const {
  const auto padded = pad_image(pixels, height, width, config_.border);
  return latency_encode(dog_filter(padded, on_), dog_filter(padded, off_), config_);
}

std::vector<SpikeTensor> Encoder::encode_all(const ImageSet& images) const {
  const auto n = static_cast<std::ptrdiff_t>(images.size());
  std::vector<SpikeTensor> out(static_cast<std::size_t>(n));
  if (n == 0) return out;
  out[0] = encode(images.image(0), images.height, images.width);  // surfaces geometry errors before the parallel loop
#pragma omp parallel for schedule(dynamic, 64)
  for (std::ptrdiff_t i = 1; i < n; ++i) {
    out[static_cast<std::size_t>(i)] =
        encode(images.image(static_cast<std::size_t>(i)), images.height, images.width);
  }
  return out;
}

namespace serial {
std::vector<SpikeTensor> encode_all(const Encoder& encoder, const ImageSet& images) {
  std::vector<SpikeTensor> out;
  out.reserve(images.size());
  for (std::size_t i = 0; i < images.size(); ++i) {
    out.push_back(encoder.encode(images.image(i), images.height, images.width));
  }
  return out;
}
}  // namespace serial

}  // namespace stdpnet
