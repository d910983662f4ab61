#include "stdpnet/conv_layer.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <string>

#include "stdpnet/error.hpp"

namespace stdpnet {

ConvLayerConfig ConvLayerConfig::conv1() { return ConvLayerConfig{}; }

ConvLayerConfig ConvLayerConfig::conv2() {
  ConvLayerConfig c;
  c.maps = 200;
  c.channels = 30;
  c.kernel = 5;
  c.threshold = 15.0;
  c.inhibition_radius = 3;
  c.a_plus = 0.0002;
  c.a_minus = 0.0002 * 3.0 / 4.0;
  return c;
}

namespace {

void check_config(const ConvLayerConfig& c) {
  if (c.maps < 1 || c.channels < 1 || c.kernel < 1) {
    throw Error(Errc::ConfigInvalid, "maps, channels and kernel must be positive");
  }
  if (c.inhibition_radius < 1 || c.inhibition_radius % 2 == 0) {
    throw Error(Errc::ConfigInvalid, "inhibition radius must be odd and positive");
  }
  if (!(c.a_plus > 0.0) || !(c.a_minus > 0.0)) {
    throw Error(Errc::ConfigInvalid, "learning rates must be positive");
  }
  if (c.lr_double_every < 0) throw Error(Errc::ConfigInvalid, "lr_double_every must be >= 0");
}

}  // namespace

ConvLayerState init_conv_layer(const ConvLayerConfig& config, std::uint64_t seed) {
  check_config(config);
  ConvLayerState state;
  state.config = config;
  state.a_plus = config.a_plus;
  state.a_minus = config.a_minus;
  state.weights.resize(static_cast<std::size_t>(config.maps) * config.channels * config.kernel *
                       config.kernel);
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal(config.init_mean, config.init_std);
  for (auto& w : state.weights) w = std::clamp(normal(rng), 0.001, 0.999);
  return state;
}

void validate(const ConvLayerState& state) {
  check_config(state.config);
  const auto expected = static_cast<std::size_t>(state.config.maps) * state.kernel_size();
  if (state.weights.size() != expected) {
    throw Error(Errc::InvariantViolation, "weight count " + std::to_string(state.weights.size()) +
                                              " != " + std::to_string(expected));
  }
  for (double w : state.weights) {
    if (!(w > 0.0 && w < 1.0)) {
      throw Error(Errc::InvariantViolation, "weight " + std::to_string(w) + " outside (0, 1)");
    }
  }
}

PotentialVolume make_volume(const ConvLayerState& state, const SpikeShape& input) {
  const int k = state.config.kernel;
  if (input.channels != state.config.channels) {
    throw Error(Errc::ShapeMismatch, "input has " + std::to_string(input.channels) +
                                         " channels, layer expects " +
                                         std::to_string(state.config.channels));
  }
  if (input.height < k || input.width < k) {
    throw Error(Errc::ShapeMismatch, "input smaller than the kernel");
  }
  return PotentialVolume(state.config.maps, input.height - k + 1, input.width - k + 1);
}

namespace {

void check_geometry(const ConvLayerState& state, const SpikeTensor& input, int t,
                    const PotentialVolume& volume) {
  const auto& s = input.shape();
  const int k = state.config.kernel;
  if (s.channels != state.config.channels || volume.maps != state.config.maps ||
      volume.rows != s.height - k + 1 || volume.cols != s.width - k + 1) {
    throw Error(Errc::ShapeMismatch, "input, layer and potential volume disagree");
  }
  if (t < 0 || t >= s.slices) throw Error(Errc::ShapeMismatch, "slice out of range");
}

}  // namespace

void accumulate_potentials(const ConvLayerState& state, const SpikeTensor& input, int t,
                           PotentialVolume& volume) {
  check_geometry(state, input, t, volume);
  const auto events = input.slice(t);
  if (events.empty()) return;
  const int k = state.config.kernel;
  const int rows = volume.rows;
  const int cols = volume.cols;
  const int maps = state.config.maps;
#pragma omp parallel for schedule(static)
  for (int w = 0; w < maps; ++w) {
    for (const auto& e : events) {
      const int y = e.row;
      const int x = e.col;
      const int i_lo = std::max(0, y - (rows - 1));
      const int i_hi = std::min(k - 1, y);
      const int j_lo = std::max(0, x - (cols - 1));
      const int j_hi = std::min(k - 1, x);
      for (int i = i_lo; i <= i_hi; ++i) {
        const double* wrow = &state.weights[state.index(w, e.channel, i, 0)];
        double* vrow = &volume.at(w, y - i, 0);
        for (int j = j_lo; j <= j_hi; ++j) vrow[x - j] += wrow[j];
      }
    }
  }
}

InhibitionLedger::InhibitionLedger(int m, int r, int c)
    : maps(m),
      rows(r),
      cols(c),
      location_winner(static_cast<std::size_t>(r) * c, -1),
      map_muted(static_cast<std::size_t>(m), 0),
      region_muted(static_cast<std::size_t>(r) * c, 0) {}

void InhibitionLedger::reset() {
  std::fill(location_winner.begin(), location_winner.end(), -1);
  std::fill(map_muted.begin(), map_muted.end(), 0);
  std::fill(region_muted.begin(), region_muted.end(), 0);
}

namespace {

void check_ledger(const PotentialVolume& volume, const InhibitionLedger& ledger) {
  if (ledger.maps != volume.maps || ledger.rows != volume.rows || ledger.cols != volume.cols) {
    throw Error(Errc::ShapeMismatch, "ledger and potential volume disagree");
  }
}

bool blocked(const InhibitionLedger& ledger, int w, int u, int v) {
  const auto loc = static_cast<std::size_t>(u) * ledger.cols + v;
  return ledger.map_muted[static_cast<std::size_t>(w)] != 0 || ledger.region_muted[loc] != 0 ||
         ledger.location_winner[loc] >= 0;
}

}  // namespace

std::vector<Candidate> threshold_crossings(const PotentialVolume& volume, double gamma,
                                           const InhibitionLedger& ledger) {
  check_ledger(volume, ledger);
  std::vector<std::vector<Candidate>> per_map(static_cast<std::size_t>(volume.maps));
#pragma omp parallel for schedule(static)
  for (int w = 0; w < volume.maps; ++w) {
    if (ledger.map_muted[static_cast<std::size_t>(w)] != 0) continue;
    auto& out = per_map[static_cast<std::size_t>(w)];
    for (int u = 0; u < volume.rows; ++u) {
      for (int v = 0; v < volume.cols; ++v) {
        const double p = volume.at(w, u, v);
        if (p > gamma && !blocked(ledger, w, u, v)) out.push_back({w, u, v, p});
      }
    }
  }
  std::vector<Candidate> all;
  for (auto& m : per_map) all.insert(all.end(), m.begin(), m.end());
  return all;
}

std::vector<Candidate> lateral_inhibition(std::span<const Candidate> candidates,
                                          InhibitionLedger& ledger) {
  const auto area = static_cast<std::size_t>(ledger.rows) * ledger.cols;
  std::vector<int> best(area, -1);
  for (std::size_t n = 0; n < candidates.size(); ++n) {
    const auto& c = candidates[n];
    const auto loc = static_cast<std::size_t>(c.row) * ledger.cols + c.col;
    if (ledger.location_winner[loc] >= 0) continue;
    const int b = best[loc];
    if (b < 0) {
      best[loc] = static_cast<int>(n);
      continue;
    }
    const auto& cur = candidates[static_cast<std::size_t>(b)];
    if (c.potential > cur.potential || (c.potential == cur.potential && c.map < cur.map)) {
      best[loc] = static_cast<int>(n);
    }
  }
  std::vector<Candidate> survivors;
  for (std::size_t loc = 0; loc < area; ++loc) {
    if (best[loc] < 0) continue;
    const auto& c = candidates[static_cast<std::size_t>(best[loc])];
    ledger.location_winner[loc] = c.map;
    survivors.push_back(c);
  }
  return survivors;
}

std::vector<Candidate> stdp_competition(std::span<const Candidate> survivors,
                                        InhibitionLedger& ledger, int radius) {
  if (radius < 1 || radius % 2 == 0) {
    throw Error(Errc::ConfigInvalid, "inhibition radius must be odd and positive");
  }
  std::vector<int> best(static_cast<std::size_t>(ledger.maps), -1);
  auto row_major_before = [](const Candidate& a, const Candidate& b) {
    return a.row < b.row || (a.row == b.row && a.col < b.col);
  };
  for (std::size_t n = 0; n < survivors.size(); ++n) {
    const auto& c = survivors[n];
    if (ledger.map_muted[static_cast<std::size_t>(c.map)] != 0) continue;
    int& b = best[static_cast<std::size_t>(c.map)];
    if (b < 0) {
      b = static_cast<int>(n);
      continue;
    }
    const auto& cur = survivors[static_cast<std::size_t>(b)];
    if (c.potential > cur.potential || (c.potential == cur.potential && row_major_before(c, cur))) {
      b = static_cast<int>(n);
    }
  }
  std::vector<Candidate> order;
  for (int b : best) {
    if (b >= 0) order.push_back(survivors[static_cast<std::size_t>(b)]);
  }
  // `order` is in ascending map order already.
  std::stable_sort(order.begin(), order.end(),
                   [](const Candidate& a, const Candidate& b) { return a.potential > b.potential; });

  const int half = radius / 2;
  std::vector<Candidate> winners;
  for (const auto& c : order) {
    if (ledger.region_blocked(c.row, c.col)) continue;
    winners.push_back(c);
    ledger.map_muted[static_cast<std::size_t>(c.map)] = 1;
    const int u0 = std::max(0, c.row - half);
    const int u1 = std::min(ledger.rows - 1, c.row + half);
    const int v0 = std::max(0, c.col - half);
    const int v1 = std::min(ledger.cols - 1, c.col + half);
    for (int u = u0; u <= u1; ++u) {
      for (int v = v0; v <= v1; ++v) ledger.region_muted[static_cast<std::size_t>(u) * ledger.cols + v] = 1;
    }
  }
  return winners;
}

std::vector<std::uint8_t> presynaptic_mask(std::span<const std::uint8_t> seen,
                                           const SpikeShape& input, int kernel, int row,
                                           int col) {
  if (seen.size() != input.neurons()) throw Error(Errc::ShapeMismatch, "seen map size");
  if (row < 0 || col < 0 || row + kernel > input.height || col + kernel > input.width) {
    throw Error(Errc::ShapeMismatch, "receptive field outside the input");
  }
  std::vector<std::uint8_t> mask(static_cast<std::size_t>(input.channels) * kernel * kernel);
  std::size_t n = 0;
  for (int c = 0; c < input.channels; ++c) {
    for (int i = 0; i < kernel; ++i) {
      for (int j = 0; j < kernel; ++j, ++n) {
        const auto idx = (static_cast<std::size_t>(c) * input.height + row + i) * input.width + col + j;
        mask[n] = seen[idx] != 0 ? 1 : 0;
      }
    }
  }
  return mask;
}

void stdp_update(ConvLayerState& state, const Candidate& winner,
                 std::span<const std::uint8_t> fired_mask) {
  if (fired_mask.size() != state.kernel_size()) {
    throw Error(Errc::ShapeMismatch, "fired mask has " + std::to_string(fired_mask.size()) +
                                         " entries, kernel has " +
                                         std::to_string(state.kernel_size()));
  }
  if (winner.map < 0 || winner.map >= state.config.maps) {
    throw Error(Errc::ShapeMismatch, "winner map out of range");
  }
  double* w = &state.weights[state.index(winner.map, 0, 0, 0)];
  for (std::size_t n = 0; n < fired_mask.size(); ++n) {
    const double s = w[n] * (1.0 - w[n]);
    w[n] += fired_mask[n] != 0 ? state.a_plus * s : -state.a_minus * s;
  }
}

double convergence_factor(std::span<const double> weights) {
  if (weights.empty()) return 0.0;
  double acc = 0.0;
  for (double w : weights) acc += w * (1.0 - w);
  return acc / static_cast<double>(weights.size());
}

double temporal_difference(std::span<const double> previous, std::span<const double> current) {
  if (previous.size() != current.size()) {
    throw Error(Errc::ShapeMismatch, "weight tensors differ in size");
  }
  if (current.empty()) return 0.0;
  double acc = 0.0;
  for (std::size_t n = 0; n < current.size(); ++n) {
    const double d = previous[n] - current[n];
    acc += d * d;
  }
  return acc / static_cast<double>(current.size());
}

ConvTrainResult train_conv(ConvLayerState state, std::span<const SpikeTensor> stream,
                           const TrainSchedule& schedule, const WinnerObserver& observer) {
  validate(state);
  if (schedule.sample_interval < 1) throw Error(Errc::ConfigInvalid, "sample_interval must be >= 1");
  ConvTrainResult result;
  auto& trace = result.trace;
  trace.updates_per_map.assign(static_cast<std::size_t>(state.config.maps), 0);

  auto record_sample = [&](std::uint64_t image, const std::vector<double>& previous) {
    trace.convergence.push_back({image, convergence_factor(state.weights)});
    if (!previous.empty()) {
      trace.temporal_difference.push_back({image, temporal_difference(previous, state.weights)});
    }
    if (schedule.keep_snapshots) trace.snapshots.push_back({image, state.weights});
  };

  if (schedule.images == 0) {
    record_sample(0, {});
    trace.stop_reason = "no images scheduled";
    result.state = std::move(state);
    return result;
  }
  if (stream.empty()) throw Error(Errc::EmptyStream, "no spike tensors to train on");

  const SpikeShape in_shape = stream.front().shape();
  PotentialVolume volume = make_volume(state, in_shape);
  InhibitionLedger ledger(volume.maps, volume.rows, volume.cols);
  std::vector<std::uint8_t> seen(in_shape.neurons());
  const std::size_t plane = static_cast<std::size_t>(in_shape.height) * in_shape.width;
  std::vector<double> previous = state.weights;
  record_sample(0, {});
  trace.stop_reason = "image budget exhausted";

  for (std::uint64_t img = 0; img < schedule.images; ++img) {
    const SpikeTensor& input = stream[img % stream.size()];
    if (!(input.shape() == in_shape)) {
      throw Error(Errc::ShapeMismatch, "stream tensors differ in shape at image " + std::to_string(img));
    }
    volume.reset();
    ledger.reset();
    std::fill(seen.begin(), seen.end(), 0);
    std::uint32_t image_winners = 0;

    for (int t = 0; t < in_shape.slices; ++t) {
      for (const auto& e : input.slice(t)) {
        seen[e.channel * plane + static_cast<std::size_t>(e.row) * in_shape.width + e.col] = 1;
      }
      accumulate_potentials(state, input, t, volume);
      const auto candidates = threshold_crossings(volume, state.config.threshold, ledger);
      const auto survivors = lateral_inhibition(candidates, ledger);
      const auto winners = stdp_competition(survivors, ledger, state.config.inhibition_radius);
      for (const auto& w : winners) {
        const auto mask = presynaptic_mask(seen, in_shape, state.config.kernel, w.row, w.col);
        stdp_update(state, w, mask);
        ++trace.updates_per_map[static_cast<std::size_t>(w.map)];
      }
      image_winners += static_cast<std::uint32_t>(winners.size());
      if (observer) observer(img, t, winners);
    }
    trace.stdp_spikes_per_image.push_back(image_winners);

    ++state.images_seen;
    const auto every = static_cast<std::uint64_t>(state.config.lr_double_every);
    if (every > 0 && state.images_seen % every == 0) {
      state.a_plus = std::min(2.0 * state.a_plus, state.config.lr_cap);
      state.a_minus = std::min(2.0 * state.a_minus, state.config.lr_cap);
    }

    const std::uint64_t done = img + 1;
    const bool last = done == schedule.images;
    if (done % static_cast<std::uint64_t>(schedule.sample_interval) == 0 || last) {
      record_sample(done, previous);
      previous = state.weights;
      const double cl = trace.convergence.back().value;
      if (schedule.early_stop && cl > schedule.stop_low && cl < schedule.stop_high) {
        trace.stop_reason = "convergence factor " + std::to_string(cl) + " inside stop band";
        break;
      }
    }
  }
  result.state = std::move(state);
  return result;
}

PoolLedger::PoolLedger(int m, int r, int c)
    : maps(m),
      rows(r),
      cols(c),
      fired(static_cast<std::size_t>(m) * r * c, 0),
      location_winner(static_cast<std::size_t>(r) * c, -1) {}

void PoolLedger::reset() {
  std::fill(fired.begin(), fired.end(), 0);
  std::fill(location_winner.begin(), location_winner.end(), -1);
}

std::vector<Candidate> pool_slice(std::span<const Candidate> conv_spikes, const PoolConfig& config,
                                  PoolLedger& ledger) {
  const int win = config.window;
  // Window maxima, keyed by pooled neuron; conv spikes arrive at most once
  // per neuron, so a small sorted vector is enough.
  std::vector<Candidate> pooled;
  for (const auto& s : conv_spikes) {
    const int p = s.row / win;
    const int q = s.col / win;
    if (p >= ledger.rows || q >= ledger.cols) continue;  // trailing row/col
    auto it = std::find_if(pooled.begin(), pooled.end(), [&](const Candidate& c) {
      return c.map == s.map && c.row == p && c.col == q;
    });
    if (it == pooled.end()) {
      pooled.push_back({s.map, p, q, s.potential});
    } else if (s.potential > it->potential) {
      it->potential = s.potential;
    }
  }
  std::sort(pooled.begin(), pooled.end(), [](const Candidate& a, const Candidate& b) {
    return std::tie(a.map, a.row, a.col) < std::tie(b.map, b.row, b.col);
  });

  std::vector<Candidate> eligible;
  for (const auto& c : pooled) {
    const auto idx = (static_cast<std::size_t>(c.map) * ledger.rows + c.row) * ledger.cols + c.col;
    if (!(c.potential > config.threshold)) continue;
    if (!config.accumulate && ledger.fired[idx] != 0) continue;
    if (config.lateral_inhibition) {
      const int owner = ledger.location_winner[static_cast<std::size_t>(c.row) * ledger.cols + c.col];
      if (owner >= 0 && owner != c.map) continue;
    }
    eligible.push_back(c);
  }

  std::vector<Candidate> out;
  if (config.lateral_inhibition) {
    std::vector<int> best(static_cast<std::size_t>(ledger.rows) * ledger.cols, -1);
    for (std::size_t n = 0; n < eligible.size(); ++n) {
      const auto loc = static_cast<std::size_t>(eligible[n].row) * ledger.cols + eligible[n].col;
      if (best[loc] < 0 || eligible[n].potential > eligible[static_cast<std::size_t>(best[loc])].potential) {
        best[loc] = static_cast<int>(n);
      }
    }
    for (std::size_t n = 0; n < eligible.size(); ++n) {
      const auto loc = static_cast<std::size_t>(eligible[n].row) * ledger.cols + eligible[n].col;
      if (best[loc] == static_cast<int>(n)) {
        ledger.location_winner[loc] = eligible[n].map;
        out.push_back(eligible[n]);
      }
    }
  } else {
    out = std::move(eligible);
  }
  for (const auto& c : out) {
    ledger.fired[(static_cast<std::size_t>(c.map) * ledger.rows + c.row) * ledger.cols + c.col] = 1;
  }
  return out;
}

SpikeTensor pool(std::span<const std::vector<Candidate>> conv_spikes, int maps, int conv_rows,
                 int conv_cols, const PoolConfig& config) {
  if (config.window < 1 || conv_rows < config.window || conv_cols < config.window || maps < 1) {
    throw Error(Errc::GeometryMismatch, std::to_string(conv_rows) + "x" + std::to_string(conv_cols) +
                                            " conv map cannot be pooled with window " +
                                            std::to_string(config.window));
  }
  const int rows = conv_rows / config.window;
  const int cols = conv_cols / config.window;
  PoolLedger ledger(maps, rows, cols);
  SpikeTensor out(SpikeShape{static_cast<int>(conv_spikes.size()), maps, rows, cols});
  for (std::size_t t = 0; t < conv_spikes.size(); ++t) {
    for (const auto& s : conv_spikes[t]) {
      if (s.map < 0 || s.map >= maps || s.row < 0 || s.row >= conv_rows || s.col < 0 || s.col >= conv_cols) {
        throw Error(Errc::GeometryMismatch, "conv spike outside the declared map");
      }
    }
    for (const auto& c : pool_slice(conv_spikes[t], config, ledger)) {
      out.add(static_cast<int>(t), c.map, c.row, c.col);
    }
  }
  return out;
}

std::vector<std::vector<Candidate>> conv_forward(const ConvLayerState& state,
                                                 const SpikeTensor& input) {
  PotentialVolume volume = make_volume(state, input.shape());
  InhibitionLedger ledger(volume.maps, volume.rows, volume.cols);
  std::vector<std::vector<Candidate>> spikes(static_cast<std::size_t>(input.shape().slices));
  for (int t = 0; t < input.shape().slices; ++t) {
    accumulate_potentials(state, input, t, volume);
    const auto candidates = threshold_crossings(volume, state.config.threshold, ledger);
    spikes[static_cast<std::size_t>(t)] = lateral_inhibition(candidates, ledger);
  }
  return spikes;
}

ConvPoolOutput conv_pool_forward(const ConvLayerState& state, const SpikeTensor& input,
                                 const PoolConfig& config) {
  const auto spikes = conv_forward(state, input);
  ConvPoolOutput out;
  for (const auto& s : spikes) out.conv_spikes += s.size();
  const int k = state.config.kernel;
  out.pooled = pool(spikes, state.config.maps, input.shape().height - k + 1,
                    input.shape().width - k + 1, config);
  return out;
}

namespace serial {

void accumulate_potentials(const ConvLayerState& state, const SpikeTensor& input, int t,
                           PotentialVolume& volume) {
  check_geometry(state, input, t, volume);
  const auto& s = input.shape();
  const int k = state.config.kernel;
  std::vector<std::uint8_t> slice(s.neurons(), 0);
  const std::size_t plane = static_cast<std::size_t>(s.height) * s.width;
  for (const auto& e : input.slice(t)) {
    slice[e.channel * plane + static_cast<std::size_t>(e.row) * s.width + e.col] = 1;
  }
  for (int w = 0; w < volume.maps; ++w) {
    for (int u = 0; u < volume.rows; ++u) {
      for (int v = 0; v < volume.cols; ++v) {
        double& acc = volume.at(w, u, v);
        for (int c = 0; c < s.channels; ++c) {
          for (int i = 0; i < k; ++i) {
            for (int j = 0; j < k; ++j) {
              if (slice[c * plane + static_cast<std::size_t>(u + i) * s.width + v + j] != 0) {
                acc += state.weight(w, c, i, j);
              }
            }
          }
        }
      }
    }
  }
}

std::vector<Candidate> threshold_crossings(const PotentialVolume& volume, double gamma,
                                           const InhibitionLedger& ledger) {
  check_ledger(volume, ledger);
  std::vector<Candidate> out;
  for (int w = 0; w < volume.maps; ++w) {
    for (int u = 0; u < volume.rows; ++u) {
      for (int v = 0; v < volume.cols; ++v) {
        const double p = volume.at(w, u, v);
        if (p > gamma && !blocked(ledger, w, u, v)) out.push_back({w, u, v, p});
      }
    }
  }
  return out;
}

}  // namespace serial

}  // namespace stdpnet
