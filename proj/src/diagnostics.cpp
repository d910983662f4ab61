#include "stdpnet/diagnostics.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <sstream>

#include "stdpnet/error.hpp"

namespace stdpnet {

std::vector<std::uint8_t> encode_pgm(const GrayImage& image) {
  const std::string header = "P5\n" + std::to_string(image.width) + " " +
                             std::to_string(image.height) + "\n255\n";
  std::vector<std::uint8_t> out(header.begin(), header.end());
  out.insert(out.end(), image.pixels.begin(), image.pixels.end());
  return out;
}

namespace {

void write_bytes(const std::filesystem::path& path, std::span<const char> bytes) {
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) throw Error(Errc::IoError, "cannot open " + path.string() + " for writing");
  f.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!f) throw Error(Errc::IoError, "write failed: " + path.string());
}

}  // namespace

void write_pgm(const std::filesystem::path& path, const GrayImage& image) {
  const auto bytes = encode_pgm(image);
  write_bytes(path, {reinterpret_cast<const char*>(bytes.data()), bytes.size()});
}

void write_text_file(const std::filesystem::path& path, const std::string& text) {
  write_bytes(path, {text.data(), text.size()});
}

Grid<std::uint8_t> normalize_to_gray(const Grid<double>& values) {
  Grid<std::uint8_t> out(values.rows, values.cols, 128);
  if (values.data.empty()) return out;
  const auto [lo, hi] = std::minmax_element(values.data.begin(), values.data.end());
  const double mn = *lo;
  const double mx = *hi;
  if (!(mx > mn)) return out;
  for (std::size_t i = 0; i < values.data.size(); ++i) {
    const double g = (values.data[i] - mn) / (mx - mn) * 255.0;
    out.data[i] = static_cast<std::uint8_t>(std::clamp(std::lround(g), 0L, 255L));
  }
  return out;
}

Grid<double> kernel_view(const ConvLayerConfig& config, std::span<const double> weights, int map) {
  const int k = config.kernel;
  const std::size_t per_map = static_cast<std::size_t>(config.channels) * k * k;
  if (map < 0 || map >= config.maps || weights.size() != per_map * config.maps) {
    throw Error(Errc::GeometryMismatch, "weights do not match the layer configuration");
  }
  if (config.channels != 1 && config.channels != 2) {
    throw Error(Errc::GeometryMismatch, "kernel view needs 1 or 2 input channels, got " +
                                            std::to_string(config.channels));
  }
  Grid<double> g(k, k);
  const double* base = weights.data() + per_map * static_cast<std::size_t>(map);
  const std::size_t plane = static_cast<std::size_t>(k) * k;
  for (int i = 0; i < k; ++i) {
    for (int j = 0; j < k; ++j) {
      const std::size_t o = static_cast<std::size_t>(i) * k + j;
      g(i, j) = config.channels == 2 ? base[o] - base[plane + o] : base[o];
    }
  }
  return g;
}

GrayImage tile_sheet(std::span<const Grid<double>> tiles, const TileLayout& layout) {
  if (layout.columns < 1 || layout.rows < 1 || layout.gap < 0) {
    throw Error(Errc::GeometryMismatch, "invalid tile layout");
  }
  const int th = tiles.empty() ? 0 : tiles.front().rows;
  const int tw = tiles.empty() ? 0 : tiles.front().cols;
  for (const auto& t : tiles) {
    if (t.rows != th || t.cols != tw) throw Error(Errc::GeometryMismatch, "tiles differ in size");
  }
  GrayImage img;
  img.width = layout.columns * tw + (layout.columns - 1) * layout.gap;
  img.height = layout.rows * th + (layout.rows - 1) * layout.gap;
  img.pixels.assign(static_cast<std::size_t>(img.width) * img.height, 128);
  const std::size_t shown = std::min(tiles.size(), static_cast<std::size_t>(layout.columns) * layout.rows);
  for (std::size_t n = 0; n < shown; ++n) {
    const auto gray = normalize_to_gray(tiles[n]);
    const int y0 = static_cast<int>(n) / layout.columns * (th + layout.gap);
    const int x0 = static_cast<int>(n) % layout.columns * (tw + layout.gap);
    for (int i = 0; i < th; ++i) {
      for (int j = 0; j < tw; ++j) {
        img.pixels[static_cast<std::size_t>(y0 + i) * img.width + x0 + j] = gray(i, j);
      }
    }
  }
  return img;
}

std::vector<GrayImage> render_feature_frames(const ConvLayerConfig& config, const WeightTrace& trace,
                                             const TileLayout& layout) {
  if (trace.snapshots.empty()) throw Error(Errc::EmptyTrace, "trace holds no snapshots");
  for (const auto& snap : trace.snapshots) {
    if (config.maps > 0) kernel_view(config, snap.weights, 0);  // shape check outside the parallel loop
  }
  std::vector<GrayImage> frames(trace.snapshots.size());
  const auto n = static_cast<std::ptrdiff_t>(frames.size());
#pragma omp parallel for schedule(static)
  for (std::ptrdiff_t s = 0; s < n; ++s) {
    const auto& snap = trace.snapshots[static_cast<std::size_t>(s)];
    std::vector<Grid<double>> tiles;
    tiles.reserve(static_cast<std::size_t>(config.maps));
    for (int m = 0; m < config.maps; ++m) tiles.push_back(kernel_view(config, snap.weights, m));
    frames[static_cast<std::size_t>(s)] = tile_sheet(tiles, layout);
  }
  return frames;
}

std::vector<Grid<double>> receptive_field_composite(std::span<const ConvStage> stack, int stride) {
  if (stack.empty()) throw Error(Errc::GeometryMismatch, "empty layer stack");
  if (stride < 1) throw Error(Errc::GeometryMismatch, "stride must be positive");
  std::vector<Grid<double>> proj;
  const auto& first = stack.front();
  for (int m = 0; m < first.config.maps; ++m) proj.push_back(kernel_view(first.config, first.weights, m));

  int step = 1;
  for (std::size_t l = 1; l < stack.size(); ++l) {
    const auto& cfg = stack[l].config;
    const int k = cfg.kernel;
    if (cfg.channels != static_cast<int>(proj.size())) {
      throw Error(Errc::GeometryMismatch, "layer " + std::to_string(l) + " expects " +
                                              std::to_string(cfg.channels) + " channels, previous has " +
                                              std::to_string(proj.size()) + " maps");
    }
    if (stack[l].weights.size() != static_cast<std::size_t>(cfg.maps) * cfg.channels * k * k) {
      throw Error(Errc::GeometryMismatch, "weights do not match layer " + std::to_string(l));
    }
    step *= stride;
    const int prev = proj.front().rows;
    const int size = (k - 1) * step + prev;
    std::vector<Grid<double>> next(static_cast<std::size_t>(cfg.maps));
    const auto maps = static_cast<std::ptrdiff_t>(cfg.maps);
#pragma omp parallel for schedule(static)
    for (std::ptrdiff_t m = 0; m < maps; ++m) {
      Grid<double> g(size, size, 0.0);
      for (int c = 0; c < cfg.channels; ++c) {
        const auto& src = proj[static_cast<std::size_t>(c)];
        for (int i = 0; i < k; ++i) {
          for (int j = 0; j < k; ++j) {
            const double w = stack[l].weights[((static_cast<std::size_t>(m) * cfg.channels + c) * k + i) * k + j];
            if (w == 0.0) continue;
            for (int y = 0; y < prev; ++y)
              for (int x = 0; x < prev; ++x) g(i * step + y, j * step + x) += w * src(y, x);
          }
        }
      }
      next[static_cast<std::size_t>(m)] = std::move(g);
    }
    proj = std::move(next);
  }
  return proj;
}

RunReport make_run_report(const WeightTrace& trace) {
  RunReport r;
  r.convergence = trace.convergence;
  r.temporal_difference = trace.temporal_difference;
  r.updates_per_map = trace.updates_per_map;
  r.spikes_per_image = trace.stdp_spikes_per_image;
  return r;
}

std::filesystem::path artifact_path(const std::filesystem::path& dir, const std::string& run_id,
                                    const std::string& artifact, int index,
                                    const std::string& extension) {
  return dir / (run_id + "_" + artifact + "_" + std::to_string(index) + extension);
}

std::string format_double(double v) {
  char buf[32];
  const auto res = std::to_chars(buf, buf + sizeof buf, v);
  return {buf, res.ptr};
}

namespace {

void check_sorted(const std::vector<CurvePoint>& curve, const char* name) {
  for (std::size_t i = 1; i < curve.size(); ++i) {
    if (curve[i].image_index <= curve[i - 1].image_index) {
      throw Error(Errc::InvariantViolation, std::string(name) + " curve is not sorted by image index");
    }
  }
}

std::string curve_csv(const std::vector<CurvePoint>& curve, const char* value_name) {
  std::string s = std::string("image_index,") + value_name + "\n";
  for (const auto& p : curve) s += std::to_string(p.image_index) + "," + format_double(p.value) + "\n";
  return s;
}

}  // namespace

std::vector<std::filesystem::path> export_curves(const RunReport& report,
                                                 const std::filesystem::path& dir,
                                                 const std::string& run_id, int index) {
  check_sorted(report.convergence, "convergence");
  check_sorted(report.temporal_difference, "temporal difference");
  std::vector<std::filesystem::path> written;
  auto emit = [&](const std::string& artifact, const std::string& text) {
    auto p = artifact_path(dir, run_id, artifact, index, ".csv");
    write_text_file(p, text);
    written.push_back(std::move(p));
  };
  emit("convergence", curve_csv(report.convergence, "convergence_factor"));
  emit("temporal_difference", curve_csv(report.temporal_difference, "temporal_difference"));

  std::string s = "map,updates\n";
  for (std::size_t m = 0; m < report.updates_per_map.size(); ++m) {
    s += std::to_string(m) + "," + std::to_string(report.updates_per_map[m]) + "\n";
  }
  emit("updates_per_map", s);

  s = "image,stdp_spikes\n";
  for (std::size_t i = 0; i < report.spikes_per_image.size(); ++i) {
    s += std::to_string(i) + "," + std::to_string(report.spikes_per_image[i]) + "\n";
  }
  emit("spikes_per_image", s);

  emit("learning_curve", learning_curve_csv(report.learning_curve));

  if (report.eval) {
    auto more = export_eval(*report.eval, dir, run_id, index);
    written.insert(written.end(), more.begin(), more.end());
  }
  return written;
}

std::string learning_curve_csv(std::span<const EpochRecord> curve) {
  std::string s = "epoch,train_loss,val_acc\n";
  for (const auto& e : curve) {
    s += std::to_string(e.epoch) + "," + format_double(e.train_loss) + "," + format_double(e.val_acc) + "\n";
  }
  return s;
}

std::string eval_summary(const EvalReport& r) {
  std::ostringstream os;
  std::uint64_t trace = 0;
  for (int c = 0; c < r.classes; ++c) trace += r.confusion_at(c, c);
  os << "samples " << r.total << "\n"
     << "classes " << r.classes << "\n"
     << "correct " << trace << "\n"
     << "accuracy " << format_double(r.accuracy) << "\n";
  if (r.has_conditioned) os << "conditioned_accuracy " << format_double(r.conditioned_accuracy) << "\n";
  return os.str();
}

std::vector<std::filesystem::path> export_eval(const EvalReport& r, const std::filesystem::path& dir,
                                               const std::string& run_id, int index) {
  std::vector<std::filesystem::path> written;
  auto emit = [&](const std::string& artifact, const std::string& ext, const std::string& text) {
    auto p = artifact_path(dir, run_id, artifact, index, ext);
    write_text_file(p, text);
    written.push_back(std::move(p));
  };
  auto matrix_csv = [&](const std::vector<std::uint64_t>& m) {
    std::string s = "true\\pred";
    for (int c = 0; c < r.classes; ++c) s += "," + std::to_string(c);
    s += "\n";
    for (int t = 0; t < r.classes; ++t) {
      s += std::to_string(t);
      for (int p = 0; p < r.classes; ++p) s += "," + std::to_string(m[static_cast<std::size_t>(t) * r.classes + p]);
      s += "\n";
    }
    return s;
  };
  emit("confusion", ".csv", matrix_csv(r.confusion));
  std::string s = "class,count,accuracy\n";
  for (int c = 0; c < r.classes; ++c) {
    s += std::to_string(c) + "," + std::to_string(r.class_counts[static_cast<std::size_t>(c)]) + "," +
         format_double(r.per_class_accuracy[static_cast<std::size_t>(c)]) + "\n";
  }
  emit("per_class", ".csv", s);
  if (r.has_conditioned) emit("conditioned_confusion", ".csv", matrix_csv(r.conditioned_confusion));
  emit("summary", ".txt", eval_summary(r));
  return written;
}

}  // namespace stdpnet
