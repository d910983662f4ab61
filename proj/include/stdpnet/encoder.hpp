#pragma once

#include <array>
#include <cstdint>
#include <span>
#include <vector>

#include "stdpnet/dataio.hpp"
#include "stdpnet/grid.hpp"
#include "stdpnet/spike_tensor.hpp"

namespace stdpnet {

inline constexpr int kDogRadius = 3;
inline constexpr int kDogSize = 2 * kDogRadius + 1;

struct DogKernel {
  double sigma1 = 0.0;
  double sigma2 = 0.0;
  std::array<double, kDogSize * kDogSize> taps{};

  // i, j in [-3, 3]
  double tap(int i, int j) const { return taps[(i + kDogRadius) * kDogSize + (j + kDogRadius)]; }
};

// Narrow-minus-wide Gaussian on the 7x7 support. (1, 2) is ON-centre,
// (2, 1) is OFF-centre.
DogKernel dog_kernel(double sigma1, double sigma2);

// Shifts the taps to zero mean and scales the positive peak to 1.
DogKernel zero_mean_unit_peak(const DogKernel& kernel);

using PotentialMap = Grid<double>;

// Valid-mode correlation: out(u, v) = sum_{i,j} image(u+3+i, v+3+j) * tap(i, j).
PotentialMap dog_filter(const Grid<double>& image, const DogKernel& kernel);

struct EncoderConfig {
  double gamma_dog = 50.0;
  int time_slices = 12;
  // Zero rows/cols added above/left; one more is added below/right so a
  // 28x28 raster becomes 33x33 and filters to 27x27.
  int border = 2;
  // Filter with zero_mean_unit_peak kernels; false filters with the raw taps,
  // whose response on 0-255 rasters rarely clears gamma_dog.
  bool normalize_kernels = true;
};

Grid<double> pad_image(std::span<const std::uint8_t> pixels, int height, int width, int border);

// Two channels (0 = ON, 1 = OFF). Neurons with potential > gamma_dog spike
// once; they are ranked by descending potential (ties: channel, row, col) and
// the rank r of n spiking neurons lands in slice floor(r * T / n).
SpikeTensor latency_encode(const PotentialMap& on_map, const PotentialMap& off_map,
                           const EncoderConfig& config);

class Encoder {
 public:
  explicit Encoder(EncoderConfig config = {});

  const EncoderConfig& config() const { return config_; }
  SpikeShape output_shape(int height, int width) const;

  SpikeTensor encode(std::span<const std::uint8_t> pixels, int height, int width) const;

  // OpenMP over images.
  std::vector<SpikeTensor> encode_all(const ImageSet& images) const;

 private:
  EncoderConfig config_;
  DogKernel on_;
  DogKernel off_;
};

namespace serial {
std::vector<SpikeTensor> encode_all(const Encoder& encoder, const ImageSet& images);
}

}  // namespace stdpnet
