#include "stdpnet/pipeline.hpp"

#include <algorithm>
#include <cstdlib>
#include <numeric>
#include <ostream>
#include <sstream>

#include "stdpnet/dataio.hpp"
#include "stdpnet/diagnostics.hpp"
#include "stdpnet/features.hpp"
#include "stdpnet/persist.hpp"

namespace stdpnet {

namespace fs = std::filesystem;

std::filesystem::path output_path(const RunConfig& config, const std::string& artifact, int index,
                                  const std::string& ext) {
  return artifact_path(config.out_dir, config.run_id, artifact, index, ext);
}

int exit_code(Errc code) {
  switch (code) {
    case Errc::FileNotFound:
    case Errc::IoError:
    case Errc::MissingCache:
    case Errc::MissingSnapshot:
    case Errc::ConfigInvalid:
    case Errc::FractionOutOfRange:
    case Errc::NonPositiveSigma:
    case Errc::EmptyStream:
    case Errc::EmptyBatch:
    case Errc::EmptySet:
    case Errc::EmptyTrace:
      return 2;
    case Errc::InvariantViolation:
      return 4;
    default:
      return 3;
  }
}

namespace {

const char* kSplits[] = {"train", "val", "test"};

fs::path spikes_path(const RunConfig& c, const std::string& split) { return output_path(c, "spikes-" + split); }
fs::path pool_path(const RunConfig& c, const std::string& split) { return output_path(c, "pool1-" + split); }
fs::path features_path(const RunConfig& c, const std::string& split) {
  return output_path(c, "features-" + split);
}
fs::path weights_path(const RunConfig& c, int layer) {
  return output_path(c, "weights-conv" + std::to_string(layer));
}
fs::path model_path(const RunConfig& c, int index) { return output_path(c, "model", index); }

void require_input(const fs::path& p, Errc code, const std::string& what) {
  if (!fs::exists(p)) throw Error(code, what + " not found: " + p.string());
}

void warn_if_stale(std::uint64_t recorded, const fs::path& source, const std::string& what, std::ostream& log) {
  if (!fs::exists(source)) return;
  if (persist::hash_file(source) != recorded) {
    log << "warning: " << what << " was built from a different " << source.filename().string()
        << "; rerun the earlier stage\n";
  }
}

std::string encoder_fingerprint(const RunConfig& c) {
  std::ostringstream os;
  os << "gamma_dog=" << format_double(c.encoder.gamma_dog) << ";T=" << c.encoder.time_slices
     << ";border=" << c.encoder.border << ";val=" << format_double(c.val_frac)
     << ";train_limit=" << c.train_limit << ";test_limit=" << c.test_limit
     << ";transpose=" << c.transpose << ";normalize=" << c.encoder.normalize_kernels;
  return os.str();
}

double mean_spikes(const std::vector<SpikeTensor>& tensors) {
  if (tensors.empty()) return 0.0;
  std::size_t n = 0;
  for (const auto& t : tensors) n += t.spike_count();
  return static_cast<double>(n) / static_cast<double>(tensors.size());
}

std::vector<int> to_int_labels(const LabelSet& labels) {
  return {labels.labels.begin(), labels.labels.end()};
}

void write_spike_cache(const fs::path& path, std::vector<SpikeTensor> tensors, std::vector<int> labels,
                       SpikeShape shape, persist::Provenance prov) {
  persist::SpikeCache cache;
  cache.provenance = prov;
  cache.shape = shape;
  cache.tensors = std::move(tensors);
  cache.labels = std::move(labels);
  persist::save(path, cache);
}

persist::SpikeCache load_cache(const fs::path& path) {
  require_input(path, Errc::MissingCache, "spike cache");
  return persist::load_spike_cache(path);
}

// Online check: no STDP winner may lie inside the competition area centred on
// another winner of the same image.
class WinnerSeparation {
 public:
  explicit WinnerSeparation(int radius) : half_(radius / 2) {}

  void operator()(std::uint64_t image, int, std::span<const Candidate> winners) {
    if (image != image_) {
      image_ = image;
      seen_.clear();
    }
    for (const auto& w : winners) {
      for (const auto& o : seen_) {
        if (std::abs(w.row - o.row) <= half_ && std::abs(w.col - o.col) <= half_) {
          throw Error(Errc::InvariantViolation,
                      "image " + std::to_string(image) + ": winners (" + std::to_string(o.row) + "," +
                          std::to_string(o.col) + ") and (" + std::to_string(w.row) + "," +
                          std::to_string(w.col) + ") share a competition area");
        }
      }
      seen_.push_back(w);
    }
  }

 private:
  int half_;
  std::uint64_t image_ = ~std::uint64_t{0};
  std::vector<Candidate> seen_;
};

std::string conv_stats(const ConvTrainResult& r) {
  std::ostringstream os;
  const auto& spikes = r.trace.stdp_spikes_per_image;
  const double mean =
      spikes.empty() ? 0.0
                     : static_cast<double>(std::accumulate(spikes.begin(), spikes.end(), std::uint64_t{0})) /
                           static_cast<double>(spikes.size());
  os << "images " << r.state.images_seen << "\n"
     << "mean_stdp_spikes_per_image " << format_double(mean) << "\n"
     << "final_convergence " << format_double(convergence_factor(r.state.weights)) << "\n"
     << "a_plus " << format_double(r.state.a_plus) << "\n"
     << "a_minus " << format_double(r.state.a_minus) << "\n"
     << "stop_reason " << r.trace.stop_reason << "\n";
  return os.str();
}

ClassGroupMap group_map_for(const RunConfig& c, int classes) {
  if (c.groups == "emnist" || (c.groups == "auto" && classes == 47)) {
    if (classes != 47) throw Error(Errc::ConfigInvalid, "emnist groups need 47 classes");
    return emnist_group_map();
  }
  if (c.groups == "single" || c.groups == "auto") return single_group_map(classes);
  throw Error(Errc::ConfigInvalid, "unknown group map '" + c.groups + "'");
}

int infer_classes(const RunConfig& c, std::initializer_list<const std::vector<FeatureVector>*> sets) {
  if (c.num_classes) return *c.num_classes;
  int mx = -1;
  for (const auto* s : sets)
    for (const auto& fv : *s) mx = std::max(mx, fv.label);
  return mx + 1;
}

}  // namespace

void cmd_encode(const RunConfig& c, std::ostream& log) {
  if (c.train_images.empty() || c.train_labels.empty()) {
    throw Error(Errc::ConfigInvalid, "train_images and train_labels are required");
  }
  fs::create_directories(c.out_dir);
  IdxOptions opt;
  opt.transpose = c.transpose;
  opt.num_classes = c.num_classes;
  const auto images = load_idx_images(c.train_images, opt);
  const auto labels = load_idx_labels(c.train_labels, opt);
  if (images.size() != labels.size()) {
    throw Error(Errc::LengthMismatch, std::to_string(images.size()) + " images vs " +
                                          std::to_string(labels.size()) + " labels");
  }
  auto splits = split_dataset(images, labels, c.val_frac, 0.0, c.seed);
  if (c.train_limit > 0 && c.train_limit < splits.train.indices.size()) {
    std::vector<std::size_t> keep(c.train_limit);
    std::iota(keep.begin(), keep.end(), std::size_t{0});
    splits.train = subset(splits.train.images, splits.train.labels, keep);
  }

  const Encoder encoder(c.encoder);
  const SpikeShape shape = encoder.output_shape(images.height, images.width);
  const std::uint64_t fp = persist::fnv1a(encoder_fingerprint(c));
  const std::uint64_t train_hash = persist::hash_file(c.train_images) ^ fp;

  auto encode_split = [&](const DataSplit& split, const std::string& name, std::uint64_t hash) {
    auto tensors = encoder.encode_all(split.images);
    log << "encode: " << name << " " << tensors.size() << " images, " << format_double(mean_spikes(tensors))
        << " spikes/image\n";
    write_spike_cache(spikes_path(c, name), std::move(tensors), to_int_labels(split.labels), shape,
                      {c.seed, hash});
  };
  encode_split(splits.train, "train", train_hash);
  encode_split(splits.validation, "val", train_hash);

  if (!c.test_images.empty()) {
    auto test_images = load_idx_images(c.test_images, opt);
    auto test_labels = load_idx_labels(c.test_labels, opt);
    if (test_images.size() != test_labels.size()) {
      throw Error(Errc::LengthMismatch, "test images and labels differ in count");
    }
    std::vector<std::size_t> idx(c.test_limit > 0 ? std::min(c.test_limit, test_images.size())
                                                   : test_images.size());
    std::iota(idx.begin(), idx.end(), std::size_t{0});
    const auto test = subset(test_images, test_labels, idx);
    encode_split(test, "test", persist::hash_file(c.test_images) ^ fp);
  }
}

void cmd_train_conv(const RunConfig& c, int layer, std::ostream& log) {
  if (layer != 1 && layer != 2) throw Error(Errc::ConfigInvalid, "layer must be 1 or 2");
  fs::create_directories(c.out_dir);
  const fs::path source = layer == 1 ? spikes_path(c, "train") : pool_path(c, "train");
  const auto cache = load_cache(source);
  const ConvLayerConfig& cfg = layer == 1 ? c.conv1 : c.conv2;

  TrainSchedule schedule;
  schedule.images = c.conv_images;
  schedule.sample_interval = c.sample_interval;
  schedule.early_stop = c.early_stop;
  WinnerSeparation check(cfg.inhibition_radius);
  auto result = train_conv(init_conv_layer(cfg, c.seed), cache.tensors, schedule,
                           [&](std::uint64_t image, int slice, std::span<const Candidate> winners) {
                             check(image, slice, winners);
                           });
  validate(result.state);

  const std::string tag = "conv" + std::to_string(layer);
  persist::WeightFile wf;
  wf.provenance = {c.seed, persist::hash_file(source)};
  wf.state = result.state;
  persist::save(weights_path(c, layer), wf);

  export_curves(make_run_report(result.trace), c.out_dir, c.run_id + "-" + tag);
  const std::string stats = conv_stats(result);
  write_text_file(output_path(c, tag + "-stats", 0, ".txt"), stats);
  log << "train-conv " << layer << ":\n" << stats;

  if (layer == 1 && !result.trace.snapshots.empty()) {
    const auto frames = render_feature_frames(result.state.config, result.trace);
    for (std::size_t i = 0; i < frames.size(); ++i) {
      write_pgm(output_path(c, "conv1-frames", static_cast<int>(i), ".pgm"), frames[i]);
    }
  }
  if (layer == 2 && fs::exists(weights_path(c, 1))) {
    const auto w1 = persist::load_weights(weights_path(c, 1));
    const ConvStage stack[] = {{w1.state.config, w1.state.weights}, {result.state.config, result.state.weights}};
    const auto tiles = receptive_field_composite(stack, c.pool.window);
    TileLayout layout;
    layout.columns = 20;
    layout.rows = (static_cast<int>(tiles.size()) + layout.columns - 1) / layout.columns;
    write_pgm(output_path(c, "conv2-composite", 0, ".pgm"), tile_sheet(tiles, layout));
  }
}

void cmd_extract(const RunConfig& c, std::ostream& log) {
  fs::create_directories(c.out_dir);
  const fs::path wpath = weights_path(c, 1);
  require_input(wpath, Errc::MissingSnapshot, "Conv1 weight snapshot");
  const auto weights = persist::load_weights(wpath);
  validate(weights.state);
  warn_if_stale(weights.provenance.source_hash, spikes_path(c, "train"), "Conv1 snapshot", log);
  const std::uint64_t whash = persist::hash_file(wpath);

  std::ostringstream stats;
  for (const std::string split : kSplits) {
    const fs::path src = spikes_path(c, split);
    if (split == "test" && !fs::exists(src)) continue;
    const auto cache = load_cache(src);
    auto ex = extract_features(cache.tensors, cache.labels, weights.state, c.pool, c.save_pool);
    if (cache.tensors.empty()) ex.geometry = pooled_geometry(weights.state, cache.shape, c.pool);
    const double mean_pop = cache.tensors.empty() ? 0.0
                                                  : static_cast<double>(ex.pooled_spikes) /
                                                        static_cast<double>(cache.tensors.size());
    stats << split << "_vectors " << ex.features.size() << "\n"
          << split << "_length " << ex.geometry.length() << "\n"
          << split << "_mean_popcount " << format_double(mean_pop) << "\n";
    log << "extract: " << split << " " << ex.features.size() << " vectors of length " << ex.geometry.length()
        << ", mean popcount " << format_double(mean_pop) << "\n";

    if (split == "train" && !ex.features.empty()) {
      const int classes = c.num_classes.value_or(*std::max_element(cache.labels.begin(), cache.labels.end()) + 1);
      const auto m = spikes_per_map_per_class(ex.features, ex.geometry, classes);
      std::string csv = "map";
      for (int k = 0; k < classes; ++k) csv += "," + std::to_string(k);
      csv += "\n";
      for (int w = 0; w < m.maps; ++w) {
        csv += std::to_string(w);
        for (int k = 0; k < classes; ++k) csv += "," + std::to_string(m.at(w, k));
        csv += "\n";
      }
      write_text_file(output_path(c, "class-spikes", 0, ".csv"), csv);
    }
    if (c.save_pool) {
      const SpikeShape pshape{cache.shape.slices, ex.geometry.maps, ex.geometry.rows, ex.geometry.cols};
      write_spike_cache(pool_path(c, split), std::move(ex.pooled), cache.labels, pshape, {c.seed, whash});
    }
    persist::FeatureCache fc;
    fc.provenance = {c.seed, whash};
    fc.geometry = ex.geometry;
    fc.features = std::move(ex.features);
    persist::save(features_path(c, split), fc);
  }
  write_text_file(output_path(c, "extract-stats", 0, ".txt"), stats.str());
}

void cmd_train_classifier(const RunConfig& c, std::ostream& log) {
  if (c.repeats < 1) throw Error(Errc::ConfigInvalid, "repeats must be positive");
  fs::create_directories(c.out_dir);
  auto load = [&](const std::string& split, bool required) {
    const auto p = features_path(c, split);
    if (!required && !fs::exists(p)) return persist::FeatureCache{};
    require_input(p, Errc::MissingCache, "feature cache");
    auto fc = persist::load_feature_cache(p);
    warn_if_stale(fc.provenance.source_hash, weights_path(c, 1), "feature cache " + split, log);
    return fc;
  };
  const auto train = load("train", true);
  const auto val = load("val", false);
  const auto test = load("test", false);
  const int classes = infer_classes(c, {&train.features, &val.features, &test.features});
  const std::uint64_t source = persist::hash_file(features_path(c, "train"));

  std::vector<double> accs;
  std::ostringstream summary;
  for (int r = 0; r < c.repeats; ++r) {
    ClassifierConfig cc = c.classifier;
    cc.seed = c.seed + static_cast<std::uint64_t>(r);
    auto run = train_classifier(train.features, val.features, test.features, classes, cc,
                                [&](const EpochRecord& e) {
                                  log << "repeat " << r << " epoch " << e.epoch << " loss "
                                      << format_double(e.train_loss) << " val_acc " << format_double(e.val_acc)
                                      << "\n";
                                });
    persist::ModelFile mf;
    mf.provenance = {cc.seed, source};
    mf.state = std::move(run.state);
    persist::save(model_path(c, r), mf);
    write_text_file(output_path(c, "learning-curve", r, ".csv"), learning_curve_csv(run.curve));
    summary << "repeat " << r << " best_epoch " << run.best_epoch << " val_acc " << format_double(run.best_val);
    if (!test.features.empty()) {
      export_eval(run.test, c.out_dir, c.run_id + "-test", r);
      accs.push_back(run.test.accuracy);
      summary << " test_acc " << format_double(run.test.accuracy);
    }
    summary << "\n";
  }
  if (!accs.empty()) {
    const double mean = std::accumulate(accs.begin(), accs.end(), 0.0) / static_cast<double>(accs.size());
    summary << "mean_test_acc " << format_double(mean) << "\n"
            << "max_test_acc " << format_double(*std::max_element(accs.begin(), accs.end())) << "\n";
  }
  write_text_file(output_path(c, "classifier-summary", 0, ".txt"), summary.str());
  log << summary.str();
}

void cmd_eval(const RunConfig& c, std::ostream& log) {
  fs::create_directories(c.out_dir);
  const auto mpath = model_path(c, c.model_index);
  require_input(mpath, Errc::MissingSnapshot, "model snapshot");
  const auto model = persist::load_model(mpath);
  warn_if_stale(model.provenance.source_hash, features_path(c, "train"), "model", log);
  const auto tpath = features_path(c, "test");
  require_input(tpath, Errc::MissingCache, "test feature cache");
  const auto test = persist::load_feature_cache(tpath);
  const auto report = c.conditioned
                          ? conditioned_evaluate(model.state, test.features,
                                                 group_map_for(c, model.state.classes()))
                          : evaluate(model.state, test.features);
  export_eval(report, c.out_dir, c.run_id + "-eval", c.model_index);
  log << eval_summary(report);
}

void cmd_stats(const RunConfig& c, std::ostream& log) {
  std::ostringstream os;
  for (const std::string split : kSplits) {
    for (const auto& p : {spikes_path(c, split), pool_path(c, split)}) {
      if (!fs::exists(p)) continue;
      const auto cache = persist::load_spike_cache(p);
      os << p.filename().string() << " images " << cache.tensors.size() << " shape " << cache.shape.slices << "x"
         << cache.shape.channels << "x" << cache.shape.height << "x" << cache.shape.width << " spikes_per_image "
         << format_double(mean_spikes(cache.tensors)) << "\n";
    }
    const auto fpath = features_path(c, split);
    if (fs::exists(fpath)) {
      const auto fc = persist::load_feature_cache(fpath);
      std::size_t pop = 0;
      for (const auto& fv : fc.features) pop += fv.popcount();
      os << fpath.filename().string() << " vectors " << fc.features.size() << " length " << fc.geometry.length()
         << " mean_popcount "
         << format_double(fc.features.empty() ? 0.0
                                              : static_cast<double>(pop) / static_cast<double>(fc.features.size()))
         << "\n";
    }
  }
  for (int layer : {1, 2}) {
    const auto p = weights_path(c, layer);
    if (!fs::exists(p)) continue;
    const auto w = persist::load_weights(p);
    os << p.filename().string() << " maps " << w.state.config.maps << " images_seen " << w.state.images_seen
       << " convergence " << format_double(convergence_factor(w.state.weights)) << "\n";
  }
  for (int r = 0; fs::exists(model_path(c, r)); ++r) {
    const auto m = persist::load_model(model_path(c, r));
    os << model_path(c, r).filename().string() << " " << m.state.input_dim() << "x" << m.state.hidden() << "x"
       << m.state.classes() << " mode " << to_string(m.state.mode) << "\n";
  }
  fs::create_directories(c.out_dir);
  write_text_file(output_path(c, "stats", 0, ".txt"), os.str());
  log << os.str();
}

}  // namespace stdpnet
