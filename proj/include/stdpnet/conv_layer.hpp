#pragma once

#include <algorithm>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "stdpnet/spike_tensor.hpp"

namespace stdpnet {

struct ConvLayerConfig {
  int maps = 30;
  int channels = 2;
  int kernel = 5;
  double threshold = 15.0;
  int inhibition_radius = 11;  // side of the square STDP-competition area
  double a_plus = 0.004;
  double a_minus = 0.003;
  int lr_double_every = 1500;  // images; 0 disables doubling
  double lr_cap = 0.25;
  double init_mean = 0.8;
  double init_std = 0.04;

  static ConvLayerConfig conv1();
  // 200 maps over 30 pooled channels, 3x3 competition area, a_minus = 3/4 a_plus.
  static ConvLayerConfig conv2();

  bool operator==(const ConvLayerConfig&) const = default;
};

// Kernel bank W(w, c, i, j), row-major, every entry in (0, 1).
struct ConvLayerState {
  ConvLayerConfig config;
  std::vector<double> weights;
  double a_plus = 0.0;  // current rates, after doubling
  double a_minus = 0.0;
  std::uint64_t images_seen = 0;

  std::size_t index(int w, int c, int i, int j) const {
    const auto k = static_cast<std::size_t>(config.kernel);
    return ((static_cast<std::size_t>(w) * config.channels + c) * k + i) * k + j;
  }
  double weight(int w, int c, int i, int j) const { return weights[index(w, c, i, j)]; }
  std::size_t kernel_size() const {
    return static_cast<std::size_t>(config.channels) * config.kernel * config.kernel;
  }

  bool operator==(const ConvLayerState&) const = default;
};

// Weights drawn from N(init_mean, init_std) and clamped to [0.001, 0.999].
ConvLayerState init_conv_layer(const ConvLayerConfig& config, std::uint64_t seed);

// Throws ConfigInvalid / InvariantViolation.
void validate(const ConvLayerState& state);

struct PotentialVolume {
  int maps = 0;
  int rows = 0;
  int cols = 0;
  std::vector<double> values;

  PotentialVolume() = default;
  PotentialVolume(int m, int r, int c)
      : maps(m), rows(r), cols(c), values(static_cast<std::size_t>(m) * r * c, 0.0) {}

  double& at(int w, int u, int v) { return values[(static_cast<std::size_t>(w) * rows + u) * cols + v]; }
  double at(int w, int u, int v) const {
    return values[(static_cast<std::size_t>(w) * rows + u) * cols + v];
  }
  void reset() { std::fill(values.begin(), values.end(), 0.0); }
};

// Valid-convolution output geometry for an input tensor.
PotentialVolume make_volume(const ConvLayerState& state, const SpikeShape& input);

// volume(w,u,v) += sum_{c,i,j} input(t,c,u+i,v+j) * W(w,c,i,j).
// Scatters each input event over the maps in parallel.
void accumulate_potentials(const ConvLayerState& state, const SpikeTensor& input, int t,
                           PotentialVolume& volume);

struct Candidate {
  int map = 0;
  int row = 0;
  int col = 0;
  double potential = 0.0;

  bool operator==(const Candidate&) const = default;
};

// Per-image inhibition bookkeeping, cleared at every image boundary.
struct InhibitionLedger {
  int maps = 0;
  int rows = 0;
  int cols = 0;
  std::vector<int> location_winner;         // rows x cols, -1 = free
  std::vector<std::uint8_t> map_muted;      // maps
  std::vector<std::uint8_t> region_muted;   // rows x cols

  InhibitionLedger() = default;
  InhibitionLedger(int m, int r, int c);
  void reset();

  int winner_at(int u, int v) const { return location_winner[static_cast<std::size_t>(u) * cols + v]; }
  bool region_blocked(int u, int v) const { return region_muted[static_cast<std::size_t>(u) * cols + v] != 0; }
};

// (w,u,v) with volume > gamma that no earlier spike or inhibition blocks,
// ordered by (map, row, col).
std::vector<Candidate> threshold_crossings(const PotentialVolume& volume, double gamma,
                                           const InhibitionLedger& ledger);

// Keeps the highest-potential map per location (ties: lowest map) and claims
// the location for the rest of the image. Output ordered by (row, col).
std::vector<Candidate> lateral_inhibition(std::span<const Candidate> candidates,
                                          InhibitionLedger& ledger);

// Per map, the best survivor (ties: row-major first); these are visited in
// descending potential (ties: lowest map). A visit inside an already muted
// area is dropped; otherwise it wins, mutes its own map for the image and
// mutes the radius x radius area centred on it across all maps.
std::vector<Candidate> stdp_competition(std::span<const Candidate> survivors,
                                        InhibitionLedger& ledger, int radius);

// Presynaptic mask for a winner at (row, col): entry (c,i,j) is 1 iff input
// neuron (c, row+i, col+j) has spiked at or before the current slice.
// `seen` is the C x H x W cumulative input spike map.
std::vector<std::uint8_t> presynaptic_mask(std::span<const std::uint8_t> seen,
                                           const SpikeShape& input, int kernel, int row,
                                           int col);

// dw = +a_plus w(1-w) where mask = 1, -a_minus w(1-w) elsewhere.
void stdp_update(ConvLayerState& state, const Candidate& winner,
                 std::span<const std::uint8_t> fired_mask);

double convergence_factor(std::span<const double> weights);
double temporal_difference(std::span<const double> previous, std::span<const double> current);

struct TrainSchedule {
  std::uint64_t images = 0;  // cycles through the stream if larger than it
  int sample_interval = 200;
  bool early_stop = false;
  double stop_low = 0.01;
  double stop_high = 0.02;
  bool keep_snapshots = true;
};

struct WeightSnapshot {
  std::uint64_t image_index = 0;
  std::vector<double> weights;
};

struct CurvePoint {
  std::uint64_t image_index = 0;
  double value = 0.0;
  bool operator==(const CurvePoint&) const = default;
};

struct WeightTrace {
  std::vector<WeightSnapshot> snapshots;
  std::vector<CurvePoint> convergence;
  std::vector<CurvePoint> temporal_difference;
  std::vector<std::uint64_t> updates_per_map;
  std::vector<std::uint32_t> stdp_spikes_per_image;
  std::string stop_reason;
};

struct ConvTrainResult {
  ConvLayerState state;
  WeightTrace trace;
};

// Called after every slice with that slice's STDP winners.
using WinnerObserver =
    std::function<void(std::uint64_t image, int slice, std::span<const Candidate> winners)>;

// Per slice: accumulate, threshold, lateral inhibition, STDP competition,
// STDP updates. Potentials and the ledger are reset at image boundaries.
ConvTrainResult train_conv(ConvLayerState state, std::span<const SpikeTensor> stream,
                           const TrainSchedule& schedule, const WinnerObserver& observer = {});

struct PoolConfig {
  int window = 2;  // square window, stride = window
  double threshold = 15.0;
  bool lateral_inhibition = false;
  bool accumulate = false;  // false: a pooled neuron spikes at most once per image
};

// Per-image pooling state.
struct PoolLedger {
  int maps = 0;
  int rows = 0;
  int cols = 0;
  std::vector<std::uint8_t> fired;
  std::vector<int> location_winner;

  PoolLedger() = default;
  PoolLedger(int m, int r, int c);
  void reset();
};

// Pools one slice of conv spikes. Each window's pooled potential is the
// largest potential among its conv neurons spiking in this slice; the pooled
// neuron spikes iff that exceeds `threshold` and the ledger allows it.
std::vector<Candidate> pool_slice(std::span<const Candidate> conv_spikes, const PoolConfig& config,
                                  PoolLedger& ledger);

// Whole-image pooling of conv spikes given per slice. Odd conv sizes drop the
// trailing row/column.
SpikeTensor pool(std::span<const std::vector<Candidate>> conv_spikes, int maps, int conv_rows,
                 int conv_cols, const PoolConfig& config);

// Inference pass of a fixed layer: lateral inhibition on, no STDP competition.
// Returns the conv spikes of every slice.
std::vector<std::vector<Candidate>> conv_forward(const ConvLayerState& state,
                                                 const SpikeTensor& input);

struct ConvPoolOutput {
  SpikeTensor pooled;
  std::size_t conv_spikes = 0;
};

ConvPoolOutput conv_pool_forward(const ConvLayerState& state, const SpikeTensor& input,
                                 const PoolConfig& config);

namespace serial {
// Dense reference: loops every output neuron and every tap in (c, i, j) order.
void accumulate_potentials(const ConvLayerState& state, const SpikeTensor& input, int t,
                           PotentialVolume& volume);
std::vector<Candidate> threshold_crossings(const PotentialVolume& volume, double gamma,
                                           const InhibitionLedger& ledger);
}  // namespace serial

}  // namespace stdpnet
