// Acceptance runner: one PASS / FAIL / SKIP line per criterion.
//   stdpnet_acceptance [--long] [--only N ...] [--mnist DIR] [--emnist DIR]
// --long runs criterion 5 at full scale (all 60k training images, 30 epochs)
// instead of the reduced 10k / 10-epoch variant.

#include <omp.h>
#include <sys/wait.h>

#include <chrono>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <numeric>
#include <optional>
#include <set>
#include <sstream>
#include <string>

#include "../common/oracles.hpp"
#include "CLI11.hpp"
#include "stdpnet/classifier.hpp"
#include "stdpnet/conv_layer.hpp"
#include "stdpnet/dataio.hpp"
#include "stdpnet/encoder.hpp"
#include "stdpnet/features.hpp"
#include "stdpnet/persist.hpp"
#include "stdpnet/pipeline.hpp"

namespace fs = std::filesystem;
using namespace stdpnet;

namespace {

enum class Verdict { Pass, Fail, Skip };

struct Outcome {
  Verdict verdict = Verdict::Fail;
  std::string detail;
};

Outcome pass(std::string d) { return {Verdict::Pass, std::move(d)}; }
Outcome fail(std::string d) { return {Verdict::Fail, std::move(d)}; }
Outcome skip(std::string d) { return {Verdict::Skip, std::move(d)}; }
Outcome judge(bool ok, std::string d) { return {ok ? Verdict::Pass : Verdict::Fail, std::move(d)}; }

std::string fmt(double v, int digits = 4) {
  std::ostringstream os;
  os.precision(digits);
  os << std::fixed << v;
  return os.str();
}

struct Options {
  bool long_run = false;
  std::set<int> only;
  std::string mnist_dir;
  std::string emnist_dir;
  fs::path work_dir;
};

struct Dataset {
  fs::path train_images, train_labels, test_images, test_labels;
};

std::optional<fs::path> find_file(const std::string& dir, std::initializer_list<const char*> names) {
  if (dir.empty()) return std::nullopt;
  for (const char* n : names) {
    for (const char* suffix : {"", ".gz"}) {
      const fs::path p = fs::path(dir) / (std::string(n) + suffix);
      if (fs::exists(p)) return p;
    }
  }
  return std::nullopt;
}

std::optional<Dataset> mnist(const Options& o) {
  auto a = find_file(o.mnist_dir, {"train-images-idx3-ubyte", "train-images.idx3-ubyte"});
  auto b = find_file(o.mnist_dir, {"train-labels-idx1-ubyte", "train-labels.idx1-ubyte"});
  auto c = find_file(o.mnist_dir, {"t10k-images-idx3-ubyte", "t10k-images.idx3-ubyte"});
  auto d = find_file(o.mnist_dir, {"t10k-labels-idx1-ubyte", "t10k-labels.idx1-ubyte"});
  if (!a || !b || !c || !d) return std::nullopt;
  return Dataset{*a, *b, *c, *d};
}

std::optional<Dataset> emnist(const Options& o) {
  auto a = find_file(o.emnist_dir, {"emnist-balanced-train-images-idx3-ubyte"});
  auto b = find_file(o.emnist_dir, {"emnist-balanced-train-labels-idx1-ubyte"});
  auto c = find_file(o.emnist_dir, {"emnist-balanced-test-images-idx3-ubyte"});
  auto d = find_file(o.emnist_dir, {"emnist-balanced-test-labels-idx1-ubyte"});
  if (!a || !b || !c || !d) return std::nullopt;
  return Dataset{*a, *b, *c, *d};
}

ImageSet first_images(const fs::path& path, std::size_t n, bool transpose) {
  auto set = load_idx_images(path, IdxOptions{{}, transpose, {}});
  const std::size_t area = static_cast<std::size_t>(set.height) * set.width;
  if (set.size() > n) set.pixels.resize(n * area);
  return set;
}

// Online winner check used by criteria 3 and 4: no winner inside the r x r
// area centred on an earlier winner of the same image, and one winner per map.
struct SeparationMonitor {
  int half;
  std::uint64_t image = ~std::uint64_t{0};
  std::vector<Candidate> seen;
  std::uint64_t winners = 0;
  std::uint64_t violations = 0;

  void operator()(std::uint64_t img, int, std::span<const Candidate> ws) {
    if (img != image) {
      image = img;
      seen.clear();
    }
    for (const auto& w : ws) {
      for (const auto& o : seen) {
        if ((std::abs(w.row - o.row) <= half && std::abs(w.col - o.col) <= half) || w.map == o.map) ++violations;
      }
      seen.push_back(w);
      ++winners;
    }
  }
};

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

// ---------------------------------------------------------------- criteria

Outcome kernels_criterion() {
  const auto t0 = std::chrono::steady_clock::now();
  const auto t = oracle::kernel_equivalence(2000, 0x5eed);
  const double s = seconds_since(t0);
  return judge(t.ok() && s < 10.0,
               std::to_string(t.cases) + " random cases (dims <= 64), mismatches matvec/backward/outer/accumulate = " +
                   std::to_string(t.matvec_mismatch) + "/" + std::to_string(t.backward_mismatch) + "/" +
                   std::to_string(t.outer_mismatch) + "/" + std::to_string(t.accumulate_mismatch) + ", " + fmt(s, 2) +
                   " s (limit 10 s)");
}

Outcome gradients_criterion() {
  const auto t0 = std::chrono::steady_clock::now();
  double worst = 0.0;
  for (std::uint64_t seed = 1; seed <= 20; ++seed) {
    worst = std::max(worst, oracle::exact_relu_gradcheck(5, 4, 3, seed, false).max_rel_error);
    worst = std::max(worst, oracle::exact_relu_gradcheck(5, 4, 3, seed + 100, true).max_rel_error);
  }
  const int bad = oracle::surrogate1_mismatches(100, 7);
  const double s = seconds_since(t0);
  return judge(worst < 1e-5 && bad == 0 && s < 10.0,
               "exact-ReLU 5x4x3 max rel. error " + [&] { std::ostringstream o; o << worst; return o.str(); }() +
                   " over 40 networks (limit 1e-5); surrogate-1 mismatches at 100 interior points: " +
                   std::to_string(bad) + "; " + fmt(s, 2) + " s");
}

Outcome stdp_criterion(const Options& o) {
  const auto data = mnist(o);
  if (!data) return skip("MNIST not found in '" + o.mnist_dir + "'");
  const int threads = omp_get_max_threads();
  omp_set_num_threads(1);
  const auto t0 = std::chrono::steady_clock::now();
  const auto images = first_images(data->train_images, 1000, false);
  const auto stream = Encoder().encode_all(images);
  const auto init = init_conv_layer(ConvLayerConfig::conv1(), 1);
  SeparationMonitor monitor{init.config.inhibition_radius / 2};
  TrainSchedule sched;
  sched.images = 1000;
  sched.sample_interval = 100;
  const auto r = train_conv(init, stream, sched, std::ref(monitor));
  const double s = seconds_since(t0);
  omp_set_num_threads(threads);

  bool inside = true;
  for (double w : r.state.weights) inside = inside && w > 0.0 && w < 1.0;
  bool finite = !r.trace.convergence.empty();
  for (const auto& p : r.trace.convergence) finite = finite && std::isfinite(p.value);
  const double c0 = r.trace.convergence.front().value;
  const double c1 = r.trace.convergence.back().value;
  return judge(inside && monitor.violations == 0 && finite && c1 < c0 && s < 300.0,
               "1000 images, " + std::to_string(monitor.winners) + " winners, " + std::to_string(monitor.violations) +
                   " area violations, weights in (0,1): " + (inside ? "yes" : "no") + ", C_l " + fmt(c0) + " -> " +
                   fmt(c1) + ", " + fmt(s, 1) + " s single-threaded (limit 300 s)");
}

Outcome emnist_spikes_criterion(const Options& o) {
  const auto data = emnist(o);
  if (!data) return skip("EMNIST-balanced not provided (--emnist or STDPNET_EMNIST_DIR)");
  const auto t0 = std::chrono::steady_clock::now();
  const auto images = first_images(data->train_images, 6000, true);
  const auto stream = Encoder().encode_all(images);
  TrainSchedule sched;
  sched.images = 6000;
  sched.keep_snapshots = false;
  SeparationMonitor monitor{ConvLayerConfig::conv1().inhibition_radius / 2};
  const auto r = train_conv(init_conv_layer(ConvLayerConfig::conv1(), 1), stream, sched, std::ref(monitor));
  const double stdp = static_cast<double>(monitor.winners) / 6000.0;
  const auto ext = extract_features(stream, {}, r.state, PoolConfig{});
  const double pop = static_cast<double>(ext.pooled_spikes) / static_cast<double>(stream.size());
  const double s = seconds_since(t0);
  return judge(stdp >= 4.3 && stdp <= 7.3 && pop >= 75 && pop <= 175 && s < 1800,
               "STDP spikes/image " + fmt(stdp, 2) + " (target [4.3, 7.3]), popcount " + fmt(pop, 1) +
                   " (target [75, 175]), " + fmt(s, 0) + " s");
}

struct PipelineRun {
  fs::path model;
  fs::path test_features;
  double accuracy = 0.0;
  double conditioned = 0.0;
  double seconds = 0.0;
};

PipelineRun run_pipeline(const Dataset& d, RunConfig c) {
  c.train_images = d.train_images.string();
  c.train_labels = d.train_labels.string();
  c.test_images = d.test_images.string();
  c.test_labels = d.test_labels.string();
  std::ostringstream log;
  const auto t0 = std::chrono::steady_clock::now();
  cmd_encode(c, log);
  cmd_train_conv(c, 1, log);
  cmd_extract(c, log);
  c.classifier.seed = c.seed;
  cmd_train_classifier(c, log);
  PipelineRun run;
  run.seconds = seconds_since(t0);
  run.model = output_path(c, "model", 0);
  run.test_features = output_path(c, "features-test");
  const auto model = persist::load_model(run.model).state;
  const auto test = persist::load_feature_cache(run.test_features).features;
  const auto groups = model.classes() == 47 ? emnist_group_map() : single_group_map(model.classes());
  const auto report = conditioned_evaluate(model, test, groups);
  run.accuracy = report.accuracy;
  run.conditioned = report.conditioned_accuracy;
  return run;
}

std::optional<PipelineRun> mnist_run;

Outcome mnist_accuracy_criterion(const Options& o) {
  const auto data = mnist(o);
  if (!data) return skip("MNIST not found in '" + o.mnist_dir + "'");
  RunConfig c;
  c.out_dir = o.work_dir / "mnist";
  c.run_id = o.long_run ? "full" : "reduced";
  c.conv_images = 6000;
  c.classifier.mode = GradientMode::Surrogate1;
  c.classifier.hidden = 900;
  c.classifier.dropout = 0.5;
  c.classifier.eta = 0.01;
  c.classifier.batch_size = 5;
  c.classifier.epochs = o.long_run ? 30 : 10;
  c.train_limit = o.long_run ? 0 : 10000;
  const double target = o.long_run ? 0.975 : 0.94;
  const double limit = o.long_run ? 6 * 3600.0 : 1800.0;
  mnist_run = run_pipeline(*data, c);
  const auto& r = *mnist_run;
  return judge(r.accuracy >= target && r.seconds < limit,
               std::string(o.long_run ? "full run (60k train, 30 epochs)" : "reduced run (10k train, 10 epochs)") +
                   ": test accuracy " + fmt(100 * r.accuracy, 2) + "% (target >= " + fmt(100 * target, 1) + "%), " +
                   fmt(r.seconds / 60, 1) + " min (limit " + fmt(limit / 60, 0) + " min)");
}

Outcome emnist_accuracy_criterion(const Options& o) {
  const auto data = emnist(o);
  if (!data) return skip("EMNIST-balanced not provided (--emnist or STDPNET_EMNIST_DIR)");
  RunConfig c;
  c.out_dir = o.work_dir / "emnist";
  c.run_id = "emnist";
  c.transpose = true;
  c.num_classes = 47;
  c.classifier.mode = GradientMode::Surrogate1;
  c.classifier.hidden = 1500;
  c.classifier.eta = 0.02;
  c.classifier.epochs = 25;
  const auto r = run_pipeline(*data, c);
  const double gain = r.conditioned - r.accuracy;
  return judge(r.accuracy >= 0.835 && gain >= 0.07,
               "test " + fmt(100 * r.accuracy, 2) + "% (target >= 83.5%), conditioned " + fmt(100 * r.conditioned, 2) +
                   "% (+" + fmt(100 * gain, 2) + " pts, target >= +7), " + fmt(r.seconds / 60, 1) + " min");
}

Outcome conditioned_criterion(const Options& o) {
  MlpState model;
  std::vector<FeatureVector> test;
  std::string source;
  if (mnist_run) {
    model = persist::load_model(mnist_run->model).state;
    test = persist::load_feature_cache(mnist_run->test_features).features;
    source = "criterion-5 model on " + std::to_string(test.size()) + " MNIST test vectors";
  } else {
    // No data-backed model: train a small one on random sparse features.
    std::mt19937_64 rng(9);
    auto make = [&](std::size_t n) {
      std::vector<FeatureVector> v(n);
      std::bernoulli_distribution bit(0.1);
      for (auto& fv : v) {
        fv.label = static_cast<int>(rng() % 47);
        fv.bits.resize(300);
        for (std::size_t j = 0; j < 300; ++j) fv.bits[j] = (bit(rng) || j / 6 == static_cast<std::size_t>(fv.label)) ? 1 : 0;
      }
      return v;
    };
    const auto train = make(3000);
    test = make(1000);
    ClassifierConfig cfg;
    cfg.hidden = 128;
    cfg.epochs = 2;
    model = train_classifier(train, {}, {}, 47, cfg).state;
    source = "synthetic 47-class model (criterion 5 not run)";
  }
  (void)o;
  const int k = model.classes();
  std::vector<ClassGroupMap> partitions;
  partitions.push_back(single_group_map(k));
  if (k == 47) partitions.push_back(emnist_group_map());
  ClassGroupMap halves, thirds, random_split;
  std::mt19937_64 rng(3);
  for (int c = 0; c < k; ++c) {
    halves.group_of.push_back(c < k / 2 ? ClassGroup::Digit : ClassGroup::Upper);
    thirds.group_of.push_back(static_cast<ClassGroup>(c % 3));
    random_split.group_of.push_back(static_cast<ClassGroup>(rng() % 3));
  }
  partitions.push_back(halves);
  partitions.push_back(thirds);
  partitions.push_back(random_split);

  bool ok = true;
  std::string detail = source + "; unconditioned/conditioned:";
  for (const auto& g : partitions) {
    const auto r = conditioned_evaluate(model, test, g);
    ok = ok && r.conditioned_accuracy >= r.accuracy;
    detail += " " + fmt(100 * r.accuracy, 2) + "/" + fmt(100 * r.conditioned_accuracy, 2);
  }
  return judge(ok, detail + " over " + std::to_string(partitions.size()) + " class partitions");
}

int run_cli(const std::string& args) {
  const std::string cmd = std::string(STDPNET_CLI) + " " + args + " >/dev/null 2>&1";
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

Outcome determinism_criterion(const Options& o) {
  const auto data = mnist(o);
  if (!data) return skip("MNIST not found in '" + o.mnist_dir + "'");
  const fs::path out = o.work_dir / "determinism";
  const std::string args =
      "--train-images " + data->train_images.string() + " --train-labels " + data->train_labels.string() +
      " --test-images " + data->test_images.string() + " --test-labels " + data->test_labels.string() +
      " --train-limit 1500 --test-limit 400 --sample-interval 100 --hidden 120 --epochs 2" +
      " --seed 5 --run-id det --out-dir " + out.string();
  const std::vector<std::string> stages{"encode", "train-conv --layer 1 --conv-images 600", "extract --save-pool",
                                        "train-conv --layer 2 --conv-images 100", "train-classifier --repeats 2",
                                        "eval --conditioned", "stats"};
  auto run_all = [&]() -> std::string {
    fs::remove_all(out);
    for (const auto& s : stages) {
      const int rc = run_cli(s + " " + args);
      if (rc != 0) return "stage '" + s + "' exited with " + std::to_string(rc);
    }
    return {};
  };
  if (auto err = run_all(); !err.empty()) return fail("first run: " + err);
  const fs::path first = o.work_dir / "determinism-first";
  fs::remove_all(first);
  fs::rename(out, first);
  if (auto err = run_all(); !err.empty()) return fail("second run: " + err);

  auto listing = [](const fs::path& dir) {
    std::set<std::string> names;
    for (const auto& e : fs::directory_iterator(dir)) names.insert(e.path().filename().string());
    return names;
  };
  const auto a = listing(first), b = listing(out);
  if (a != b) return fail("runs wrote different file sets (" + std::to_string(a.size()) + " vs " + std::to_string(b.size()) + ")");
  auto bytes = [](const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    return std::string(std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>());
  };
  std::vector<std::string> differing;
  std::size_t total = 0;
  for (const auto& n : a) {
    const auto x = bytes(first / n);
    total += x.size();
    if (x != bytes(out / n)) differing.push_back(n);
  }
  std::string detail = std::to_string(a.size()) + " files (" + std::to_string(total / 1024) +
                       " KiB: spike/pool/feature caches, conv1+conv2 snapshots, models, reports) compared";
  if (!differing.empty()) detail += "; differing: " + differing.front() + (differing.size() > 1 ? " and more" : "");
  return judge(differing.empty(), detail);
}

}  // namespace

int main(int argc, char** argv) {
  Options o;
  if (const char* env = std::getenv("STDPNET_MNIST_DIR")) o.mnist_dir = env;
  else o.mnist_dir = STDPNET_MNIST_DIR;
  if (const char* env = std::getenv("STDPNET_EMNIST_DIR")) o.emnist_dir = env;
  else o.emnist_dir = STDPNET_EMNIST_DIR;
  std::vector<int> only;
  std::string work = (fs::temp_directory_path() / "stdpnet-acceptance").string();

  CLI::App app{"acceptance criteria runner"};
  app.add_flag("--long", o.long_run, "full-scale MNIST accuracy run");
  app.add_option("--only", only, "criteria to run (default: all)")->check(CLI::Range(1, 8));
  app.add_option("--mnist", o.mnist_dir, "MNIST IDX directory");
  app.add_option("--emnist", o.emnist_dir, "EMNIST-balanced IDX directory");
  app.add_option("--work-dir", work, "scratch directory for pipeline outputs");
  CLI11_PARSE(app, argc, argv);
  o.only.insert(only.begin(), only.end());
  o.work_dir = work;
  fs::create_directories(o.work_dir);

  const std::vector<std::pair<std::string, std::function<Outcome()>>> criteria{
      {"kernel equivalence", [] { return kernels_criterion(); }},
      {"gradient checks", [] { return gradients_criterion(); }},
      {"STDP invariants on MNIST", [&] { return stdp_criterion(o); }},
      {"EMNIST spike statistics", [&] { return emnist_spikes_criterion(o); }},
      {"MNIST accuracy", [&] { return mnist_accuracy_criterion(o); }},
      {"EMNIST accuracy", [&] { return emnist_accuracy_criterion(o); }},
      {"conditioned >= unconditioned", [&] { return conditioned_criterion(o); }},
      {"end-to-end determinism", [&] { return determinism_criterion(o); }},
  };

  int failures = 0;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    const int id = static_cast<int>(i) + 1;
    if (!o.only.empty() && !o.only.count(id)) continue;
    Outcome r;
    try {
      r = criteria[i].second();
    } catch (const std::exception& e) {
      r = fail(std::string("exception: ") + e.what());
    }
    const char* tag = r.verdict == Verdict::Pass ? "PASS" : r.verdict == Verdict::Skip ? "SKIP" : "FAIL";
    failures += r.verdict == Verdict::Fail;
    std::cout << "[" << tag << "] criterion " << id << " " << criteria[i].first << ": " << r.detail << std::endl;
  }
  return failures == 0 ? 0 : 1;
}
