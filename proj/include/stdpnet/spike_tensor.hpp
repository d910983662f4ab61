#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

namespace stdpnet {

struct SpikeShape {
  int slices = 0;
  int channels = 0;
  int height = 0;
  int width = 0;

  std::size_t neurons() const {
    return static_cast<std::size_t>(channels) * static_cast<std::size_t>(height) *
           static_cast<std::size_t>(width);
  }
  std::size_t elements() const { return static_cast<std::size_t>(slices) * neurons(); }
  bool operator==(const SpikeShape&) const = default;
};

struct SpikeEvent {
  std::uint16_t channel = 0;
  std::uint16_t row = 0;
  std::uint16_t col = 0;

  auto operator<=>(const SpikeEvent&) const = default;
};

// Binary T x C x H x W tensor held as one sorted event list per time slice.
// Images produce a few hundred spikes out of tens of thousands of entries, so
// every consumer iterates events rather than scanning the dense volume.
class SpikeTensor {
 public:
  SpikeTensor() = default;
  explicit SpikeTensor(SpikeShape shape);

  const SpikeShape& shape() const { return shape_; }

  std::span<const SpikeEvent> slice(int t) const { return slices_[static_cast<std::size_t>(t)]; }

  // Appends a spike; each slice is kept sorted and duplicate-free.
  void add(int t, SpikeEvent event);
  void add(int t, int channel, int row, int col);

  bool at(int t, int channel, int row, int col) const;
  std::size_t spike_count() const;

  // Index = ((t * C + c) * H + y) * W + x.
  std::vector<std::uint8_t> dense() const;
  static SpikeTensor from_dense(SpikeShape shape, std::span<const std::uint8_t> values);

  // Per-neuron spike counts over all slices, C x H x W row-major.
  std::vector<std::uint8_t> time_summed() const;
  bool at_most_one_spike_per_neuron() const;

  bool operator==(const SpikeTensor&) const = default;

 private:
  SpikeShape shape_;
  std::vector<std::vector<SpikeEvent>> slices_;
};

}  // namespace stdpnet
