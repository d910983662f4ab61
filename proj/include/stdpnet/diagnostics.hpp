#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "stdpnet/classifier.hpp"
#include "stdpnet/conv_layer.hpp"
#include "stdpnet/grid.hpp"

namespace stdpnet {

struct GrayImage {
  int width = 0;
  int height = 0;
  std::vector<std::uint8_t> pixels;  // row-major
  bool operator==(const GrayImage&) const = default;
};

std::vector<std::uint8_t> encode_pgm(const GrayImage& image);
void write_pgm(const std::filesystem::path& path, const GrayImage& image);

// min -> 0, max -> 255, linear in between; a constant grid maps to 128.
Grid<std::uint8_t> normalize_to_gray(const Grid<double>& values);

struct TileLayout {
  int columns = 5;
  int rows = 6;
  int gap = 1;  // separator pixels, drawn mid-gray
};

// Kernel of one map as shown: ON minus OFF for two input channels, the
// kernel itself for one channel.
Grid<double> kernel_view(const ConvLayerConfig& config, std::span<const double> weights, int map);

// Tiles per-map grids (each normalized on its own) into one sheet. Tiles past
// columns x rows are not shown; all tiles must share a size.
GrayImage tile_sheet(std::span<const Grid<double>> tiles, const TileLayout& layout);

// One sheet per snapshot. Throws EmptyTrace.
std::vector<GrayImage> render_feature_frames(const ConvLayerConfig& config, const WeightTrace& trace,
                                             const TileLayout& layout = {});

// Projects every map of the last layer into input space. The first layer
// contributes its kernel views; each further conv layer places the previous
// layer's projections at its tap offsets scaled by `stride` (the pooling
// stride in between) and sums them weighted by the tap weight.
struct ConvStage {
  ConvLayerConfig config;
  std::span<const double> weights;
};
std::vector<Grid<double>> receptive_field_composite(std::span<const ConvStage> stack, int stride = 2);

struct RunReport {
  std::vector<CurvePoint> convergence;
  std::vector<CurvePoint> temporal_difference;
  std::vector<std::uint64_t> updates_per_map;
  std::vector<std::uint32_t> spikes_per_image;
  std::vector<EpochRecord> learning_curve;
  std::optional<EvalReport> eval;
};

RunReport make_run_report(const WeightTrace& trace);

// `<run_id>_<artifact>_<index><extension>` under `dir`.
std::filesystem::path artifact_path(const std::filesystem::path& dir, const std::string& run_id,
                                    const std::string& artifact, int index,
                                    const std::string& extension);

// Formats a double so it parses back to the same value.
std::string format_double(double v);

// Writes one CSV per curve; returns the files written. Throws IoError and
// InvariantViolation (unsorted curves).
std::vector<std::filesystem::path> export_curves(const RunReport& report,
                                                 const std::filesystem::path& dir,
                                                 const std::string& run_id, int index = 0);

// Confusion CSV, per-class CSV and a summary text file.
std::vector<std::filesystem::path> export_eval(const EvalReport& report,
                                               const std::filesystem::path& dir,
                                               const std::string& run_id, int index = 0);

std::string eval_summary(const EvalReport& report);

// epoch,train_loss,val_acc
std::string learning_curve_csv(std::span<const EpochRecord> curve);

void write_text_file(const std::filesystem::path& path, const std::string& text);

}  // namespace stdpnet
