#include "stdpnet/spike_tensor.hpp"

#include <algorithm>
#include <string>

#include "stdpnet/error.hpp"

namespace stdpnet {

SpikeTensor::SpikeTensor(SpikeShape shape)
    : shape_(shape), slices_(static_cast<std::size_t>(std::max(shape.slices, 0))) {}

void SpikeTensor::add(int t, SpikeEvent event) {
  if (t < 0 || t >= shape_.slices || event.channel >= shape_.channels ||
      event.row >= shape_.height || event.col >= shape_.width) {
    throw Error(Errc::ShapeMismatch, "spike outside tensor at t=" + std::to_string(t));
  }
  auto& events = slices_[static_cast<std::size_t>(t)];
  if (events.empty() || events.back() < event) {
    events.push_back(event);
    return;
  }
  const auto pos = std::lower_bound(events.begin(), events.end(), event);
  if (pos == events.end() || *pos != event) events.insert(pos, event);
}

void SpikeTensor::add(int t, int channel, int row, int col) {
  add(t, SpikeEvent{static_cast<std::uint16_t>(channel), static_cast<std::uint16_t>(row),
                    static_cast<std::uint16_t>(col)});
}

bool SpikeTensor::at(int t, int channel, int row, int col) const {
  const auto& events = slices_[static_cast<std::size_t>(t)];
  const SpikeEvent key{static_cast<std::uint16_t>(channel), static_cast<std::uint16_t>(row),
                       static_cast<std::uint16_t>(col)};
  return std::binary_search(events.begin(), events.end(), key);
}

std::size_t SpikeTensor::spike_count() const {
  std::size_t n = 0;
  for (const auto& s : slices_) n += s.size();
  return n;
}

std::vector<std::uint8_t> SpikeTensor::dense() const {
  std::vector<std::uint8_t> out(shape_.elements(), 0);
  const std::size_t plane = static_cast<std::size_t>(shape_.height) * shape_.width;
  for (int t = 0; t < shape_.slices; ++t) {
    const std::size_t base = static_cast<std::size_t>(t) * shape_.neurons();
    for (const auto& e : slices_[static_cast<std::size_t>(t)]) {
      out[base + e.channel * plane + static_cast<std::size_t>(e.row) * shape_.width + e.col] = 1;
    }
  }
  return out;
}

SpikeTensor SpikeTensor::from_dense(SpikeShape shape, std::span<const std::uint8_t> values) {
  if (values.size() != shape.elements()) {
    throw Error(Errc::ShapeMismatch, "dense buffer has " + std::to_string(values.size()) +
                                         " entries, shape needs " +
                                         std::to_string(shape.elements()));
  }
  SpikeTensor tensor(shape);
  std::size_t idx = 0;
  for (int t = 0; t < shape.slices; ++t) {
    auto& events = tensor.slices_[static_cast<std::size_t>(t)];
    for (int c = 0; c < shape.channels; ++c) {
      for (int y = 0; y < shape.height; ++y) {
        for (int x = 0; x < shape.width; ++x, ++idx) {
          if (values[idx] != 0) {
            events.push_back({static_cast<std::uint16_t>(c), static_cast<std::uint16_t>(y),
                              static_cast<std::uint16_t>(x)});
          }
        }
      }
    }
  }
  return tensor;
}

std::vector<std::uint8_t> SpikeTensor::time_summed() const {
  std::vector<std::uint8_t> out(shape_.neurons(), 0);
  const std::size_t plane = static_cast<std::size_t>(shape_.height) * shape_.width;
  for (const auto& events : slices_) {
    for (const auto& e : events) {
      ++out[e.channel * plane + static_cast<std::size_t>(e.row) * shape_.width + e.col];
    }
  }
  return out;
}

bool SpikeTensor::at_most_one_spike_per_neuron() const {
  const auto counts = time_summed();
  return std::all_of(counts.begin(), counts.end(), [](std::uint8_t c) { return c <= 1; });
}

}  // namespace stdpnet
