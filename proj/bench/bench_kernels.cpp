// OpenMP kernels against their serial references on classifier- and
// network-sized inputs. The thread count follows OMP_NUM_THREADS.

#include <benchmark/benchmark.h>

#include <random>

#include "stdpnet/conv_layer.hpp"
#include "stdpnet/encoder.hpp"
#include "stdpnet/features.hpp"
#include "stdpnet/kernels.hpp"

using namespace stdpnet;

namespace {

constexpr int kInputs = 3630;
constexpr int kHidden = 1500;

Matrix random_matrix(int rows, int cols, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> g(0.0, 0.01);
  Matrix m(rows, cols);
  for (double& v : m.data()) v = g(rng);
  return m;
}

std::vector<std::uint8_t> random_bits(std::size_t n, double p, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::bernoulli_distribution b(p);
  std::vector<std::uint8_t> bits(n);
  for (auto& x : bits) x = b(rng) ? 1 : 0;
  return bits;
}

std::vector<double> random_vector(std::size_t n, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> g(0.0, 1.0);
  std::vector<double> v(n);
  for (double& x : v) x = g(rng);
  return v;
}

// Bars and blobs so the encoder and Conv1 see realistic spike counts.
ImageSet random_images(std::size_t n, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_int_distribution<int> pos(4, 23);
  ImageSet set{28, 28, std::vector<std::uint8_t>(n * 784, 0)};
  for (std::size_t k = 0; k < n; ++k) {
    auto* img = set.pixels.data() + k * 784;
    for (int s = 0; s < 4; ++s) {
      const int r = pos(rng), c = pos(rng), len = pos(rng) / 2;
      const bool vertical = rng() & 1;
      for (int t = 0; t < len; ++t) {
        const int y = vertical ? std::min(27, r + t) : r, x = vertical ? c : std::min(27, c + t);
        img[y * 28 + x] = 255;
      }
    }
  }
  return set;
}

void BM_binary_matvec(benchmark::State& st) {
  const auto w = random_matrix(kHidden, kInputs, 1);
  const auto bits = random_bits(kInputs, 0.03, 2);
  for (auto _ : st) benchmark::DoNotOptimize(st.range(0) ? kernels::binary_matvec(w, bits) : kernels::serial::binary_matvec(w, bits));
}

void BM_masked_backward(benchmark::State& st) {
  const auto w5 = random_matrix(47, kHidden, 3);
  const auto delta = random_vector(47, 4);
  const auto mask = random_bits(kHidden, 0.5, 5);
  for (auto _ : st)
    benchmark::DoNotOptimize(st.range(0) ? kernels::masked_backward_matvec(w5, delta, mask)
                                         : kernels::serial::masked_backward_matvec(w5, delta, mask));
}

void BM_transcription(benchmark::State& st) {
  Matrix w = random_matrix(kHidden, kInputs, 6);
  const auto delta = random_vector(kHidden, 7);
  const auto bits = random_bits(kInputs, 0.03, 8);
  for (auto _ : st) {
    if (st.range(0)) kernels::transcription_accumulate(w, 1e-3, delta, bits);
    else kernels::serial::transcription_accumulate(w, 1e-3, delta, bits);
    benchmark::ClobberMemory();
  }
}

void BM_accumulate_potentials(benchmark::State& st) {
  const auto state = init_conv_layer(ConvLayerConfig::conv1(), 1);
  const auto input = Encoder().encode(random_images(1, 9).image(0), 28, 28);
  auto volume = make_volume(state, input.shape());
  for (auto _ : st) {
    for (int t = 0; t < input.shape().slices; ++t) {
      if (st.range(0)) accumulate_potentials(state, input, t, volume);
      else serial::accumulate_potentials(state, input, t, volume);
    }
    benchmark::DoNotOptimize(volume);
  }
}

void BM_encode_all(benchmark::State& st) {
  const auto images = random_images(256, 10);
  const Encoder enc;
  for (auto _ : st) benchmark::DoNotOptimize(st.range(0) ? enc.encode_all(images) : serial::encode_all(enc, images));
  st.SetItemsProcessed(st.iterations() * 256);
}

void BM_extract_features(benchmark::State& st) {
  const auto stream = Encoder().encode_all(random_images(128, 11));
  const auto state = init_conv_layer(ConvLayerConfig::conv1(), 2);
  for (auto _ : st)
    benchmark::DoNotOptimize(st.range(0) ? extract_features(stream, {}, state, PoolConfig{})
                                         : serial::extract_features(stream, {}, state, PoolConfig{}));
  st.SetItemsProcessed(st.iterations() * 128);
}

}  // namespace

// Arg 0 = serial reference, 1 = OpenMP.
BENCHMARK(BM_binary_matvec)->ArgName("omp")->Arg(0)->Arg(1)->Unit(benchmark::kMicrosecond);
BENCHMARK(BM_masked_backward)->ArgName("omp")->Arg(0)->Arg(1)->Unit(benchmark::kMicrosecond);
BENCHMARK(BM_transcription)->ArgName("omp")->Arg(0)->Arg(1)->Unit(benchmark::kMicrosecond);
BENCHMARK(BM_accumulate_potentials)->ArgName("omp")->Arg(0)->Arg(1)->Unit(benchmark::kMicrosecond);
BENCHMARK(BM_encode_all)->ArgName("omp")->Arg(0)->Arg(1)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_extract_features)->ArgName("omp")->Arg(0)->Arg(1)->Unit(benchmark::kMillisecond);

BENCHMARK_MAIN();
