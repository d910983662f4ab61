#include <omp.h>

#include <filesystem>
#include <iostream>

#include "CLI11.hpp"
#include "stdpnet/diagnostics.hpp"
#include "stdpnet/pipeline.hpp"

using namespace stdpnet;

namespace {

void add_options(CLI::App& app, RunConfig& c, std::string& mode, bool& raw_dog) {
  app.option_defaults()->always_capture_default();
  app.set_config("--config", "", "key=value configuration file");

  auto* data = "Data";
  app.add_option("--train-images", c.train_images, "IDX training images")->group(data);
  app.add_option("--train-labels", c.train_labels, "IDX training labels")->group(data);
  app.add_option("--test-images", c.test_images, "IDX test images")->group(data);
  app.add_option("--test-labels", c.test_labels, "IDX test labels")->group(data);
  app.add_flag("--transpose", c.transpose, "transpose rasters (EMNIST)")->group(data);
  app.add_option("--num-classes", c.num_classes, "class count override")->group(data);
  app.add_option("--val-frac", c.val_frac, "validation fraction of the training file")->group(data);
  app.add_option("--train-limit", c.train_limit, "keep the first N training images (0 = all)")->group(data);
  app.add_option("--test-limit", c.test_limit, "keep the first N test images (0 = all)")->group(data);
  app.add_option("--groups", c.groups, "class groups for conditioned eval")
      ->check(CLI::IsMember({"auto", "emnist", "single"}))
      ->group(data);

  auto* enc = "Encoder";
  app.add_option("--gamma-dog", c.encoder.gamma_dog, "DoG spiking threshold")->group(enc);
  app.add_option("--time-slices", c.encoder.time_slices, "latency time slices")->group(enc);
  app.add_flag("--raw-dog", raw_dog, "filter with unnormalized DoG taps")->group(enc);

  auto* conv = "Convolution";
  app.add_option("--conv-images", c.conv_images, "images presented during STDP training")->group(conv);
  app.add_option("--sample-interval", c.sample_interval, "images between weight snapshots")->group(conv);
  app.add_flag("--early-stop", c.early_stop, "stop once C_l enters the stopping band")->group(conv);
  app.add_option("--conv1-maps", c.conv1.maps)->group(conv);
  app.add_option("--conv1-threshold", c.conv1.threshold)->group(conv);
  app.add_option("--conv1-radius", c.conv1.inhibition_radius)->group(conv);
  app.add_option("--conv1-a-plus", c.conv1.a_plus)->group(conv);
  app.add_option("--conv1-a-minus", c.conv1.a_minus)->group(conv);
  app.add_option("--conv1-lr-double-every", c.conv1.lr_double_every)->group(conv);
  app.add_option("--conv2-maps", c.conv2.maps)->group(conv);
  app.add_option("--conv2-threshold", c.conv2.threshold)->group(conv);
  app.add_option("--conv2-radius", c.conv2.inhibition_radius)->group(conv);
  app.add_option("--conv2-a-plus", c.conv2.a_plus)->group(conv);
  app.add_option("--conv2-a-minus", c.conv2.a_minus)->group(conv);
  app.add_option("--pool-threshold", c.pool.threshold)->group(conv);
  app.add_flag("--pool-lateral-inh", c.pool.lateral_inhibition)->group(conv);
  app.add_flag("--pool-spike-accum", c.pool.accumulate)->group(conv);

  auto* cls = "Classifier";
  app.add_option("--mode", mode, "exact | surrogate1 | surrogate2")
      ->check(CLI::IsMember({"exact", "exact-relu", "surrogate1", "surrogate2"}))
      ->group(cls);
  app.add_option("--hidden", c.classifier.hidden)->group(cls);
  app.add_option("--eta", c.classifier.eta)->group(cls);
  app.add_option("--dropout", c.classifier.dropout)->group(cls);
  app.add_option("--batch-size", c.classifier.batch_size)->group(cls);
  app.add_option("--epochs", c.classifier.epochs)->group(cls);
  app.add_option("--tau-sat", c.classifier.tau_sat)->group(cls);

  app.add_option("--seed", c.seed, "seed recorded in every output");
  app.add_option("--out-dir", c.out_dir, "output directory");
  app.add_option("--run-id", c.run_id, "output file prefix");
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"STDP spiking feature extraction and binary-activation classifier"};
  app.require_subcommand(1);
  app.fallthrough();

  RunConfig config;
  std::string mode = "surrogate1";
  int threads = 0;
  bool raw_dog = false;
  add_options(app, config, mode, raw_dog);
  app.add_option("--threads", threads, "OpenMP threads (0 = all cores)");

  auto* encode = app.add_subcommand("encode", "DoG + latency encode the dataset into spike caches");
  int layer = 1;
  auto* train_conv = app.add_subcommand("train-conv", "train a convolutional layer with STDP");
  train_conv->add_option("--layer", layer, "1 or 2")->check(CLI::IsMember({1, 2}));
  auto* extract = app.add_subcommand("extract", "Conv1/Pool1 feature extraction");
  extract->add_flag("--save-pool", config.save_pool, "also cache Pool1 spikes for Conv2 training");
  auto* train_cls = app.add_subcommand("train-classifier", "train the classifier on feature caches");
  train_cls->add_option("--repeats", config.repeats, "independent runs with seeds seed..seed+N-1");
  auto* eval = app.add_subcommand("eval", "evaluate a trained model on the test features");
  eval->add_flag("--conditioned", config.conditioned, "also restrict argmax to the true class group");
  eval->add_option("--model-index", config.model_index, "which repeat's model to evaluate");
  auto* stats = app.add_subcommand("stats", "summarize the artifacts present for a run");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : 2;
  }

  if (threads > 0) omp_set_num_threads(threads);
  try {
    config.classifier.mode = parse_gradient_mode(mode);
    config.encoder.normalize_kernels = !raw_dog;
    config.classifier.seed = config.seed;
    std::filesystem::create_directories(config.out_dir);
    CLI::App* sub = app.get_subcommands().front();
    write_text_file(output_path(config, "config-" + sub->get_name(), 0, ".ini"),
                    app.config_to_str(true, false));

    if (sub == encode) cmd_encode(config, std::cerr);
    if (sub == train_conv) cmd_train_conv(config, layer, std::cerr);
    if (sub == extract) cmd_extract(config, std::cerr);
    if (sub == train_cls) cmd_train_classifier(config, std::cerr);
    if (sub == eval) cmd_eval(config, std::cerr);
    if (sub == stats) cmd_stats(config, std::cerr);
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return exit_code(e.code());
  } catch (const std::filesystem::filesystem_error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
  return 0;
}
