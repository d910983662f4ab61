#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>

#include "stdpnet/classifier.hpp"
#include "stdpnet/conv_layer.hpp"
#include "stdpnet/encoder.hpp"
#include "stdpnet/error.hpp"

namespace stdpnet {

struct RunConfig {
  // data
  std::string train_images;
  std::string train_labels;
  std::string test_images;  // optional
  std::string test_labels;
  bool transpose = false;  // EMNIST rasters are stored transposed
  std::optional<int> num_classes;
  double val_frac = 0.1;
  std::size_t train_limit = 0;  // 0 = all
  std::size_t test_limit = 0;
  std::string groups = "auto";  // auto | emnist | single

  EncoderConfig encoder;
  ConvLayerConfig conv1 = ConvLayerConfig::conv1();
  ConvLayerConfig conv2 = ConvLayerConfig::conv2();
  std::uint64_t conv_images = 6000;
  int sample_interval = 200;
  bool early_stop = false;
  PoolConfig pool;
  bool save_pool = false;

  ClassifierConfig classifier;
  int repeats = 1;
  bool conditioned = false;
  int model_index = 0;

  std::uint64_t seed = 1;
  std::filesystem::path out_dir = "out";
  std::string run_id = "run";
};

// `<run_id>_<artifact>_<index><ext>` under out_dir.
std::filesystem::path output_path(const RunConfig& config, const std::string& artifact, int index = 0,
                                  const std::string& ext = ".bin");

void cmd_encode(const RunConfig& config, std::ostream& log);
// layer 1 trains on the encoded images, layer 2 on the Pool1 spikes written by
// cmd_extract with save_pool.
void cmd_train_conv(const RunConfig& config, int layer, std::ostream& log);
void cmd_extract(const RunConfig& config, std::ostream& log);
void cmd_train_classifier(const RunConfig& config, std::ostream& log);
void cmd_eval(const RunConfig& config, std::ostream& log);
void cmd_stats(const RunConfig& config, std::ostream& log);

// 2 usage or path problems, 3 malformed data, 4 invariant violations.
int exit_code(Errc code);

}  // namespace stdpnet
