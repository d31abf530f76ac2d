#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "ridekit/dga.hpp"
#include "ridekit/image.hpp"
#include "ridekit/retinex.hpp"
#include "ridekit/synth.hpp"

namespace ridekit::pipeline {

inline constexpr double kBetaSquared = 0.3;
inline constexpr int kOtsuBins = 256;

enum class SegMode { composite_threshold, gap_threshold };
std::string_view to_string(SegMode m);
SegMode seg_mode_from_string(std::string_view s);

struct Metrics {
  double mae = 0.0;
  double f_beta = 0.0;
  double iou = 0.0;
};

/// MAE, F-beta (beta^2 = 0.3) and IoU of a prediction against ground truth.
/// An empty prediction has precision 0; two empty masks have IoU 1.
Metrics metrics(const BinaryMask& pred, const BinaryMask& gt);

struct OtsuResult {
  double threshold = 0.0;  // lower edge of the first upper-class bin
  BinaryMask upper;        // pixels in the upper class
};

/// Otsu's method on a single-channel grid with `bins` equal-width bins over
/// [min, max]. Throws FlatInputError when the grid is constant.
OtsuResult otsu(const ImageGrid& values, int bins = kOtsuBins);

/// Largest 8-connected foreground component (ties: first in raster order).
BinaryMask largest_component(const BinaryMask& mask);

/// Background regions (4-connected) that do not touch the border become
/// foreground. Ring pixels are then reassigned to the side they are closer
/// to (chamfer distance), so a thick contour band splits along its medial
/// line. Masks without enclosed holes are returned unchanged.
BinaryMask fill_enclosed(const BinaryMask& band);

/// Morphological closing with a disk of chamfer radius `radius`. Pixels
/// outside the grid count as foreground for the erosion step.
BinaryMask close_mask(const BinaryMask& mask, int radius);

/// Closes `band` with the smallest radius in [0, max_radius] whose largest
/// component encloses a hole, and fills that component. Falls back to the
/// largest component of `band`.
BinaryMask close_and_fill(const BinaryMask& band, int max_radius);

struct PipelineConfig {
  retinex::Weights weights;
  retinex::SolverConfig solver;
  dga::GapConfig gap;
  int otsu_bins = kOtsuBins;
  int max_close_radius = 8;
  double eps_log = kDefaultEpsLog;
};

struct SegResult {
  BinaryMask predicted;
  SegMode method = SegMode::composite_threshold;
  std::optional<Metrics> metrics;
  double threshold_used = 0.0;
};

/// Log-domain views and gap maps of a decomposed composite.
struct GapAnalysis {
  retinex::RetinexPair pair;
  ImageGrid log_I;
  ImageGrid log_L;
  ImageGrid log_R;
  dga::GapMaps maps;
};

GapAnalysis analyze(const ImageGrid& composite, const PipelineConfig& cfg);

/// Otsu on the channel-mean of the composite; the minority class is
/// reported as foreground.
SegResult segment_composite(const ImageGrid& composite, const PipelineConfig& cfg = {},
                            const BinaryMask* gt = nullptr);

/// Otsu on sqrt(delta_R) followed by close_and_fill. threshold_used
/// is reported on the delta_R scale.
SegResult segment_gap(const ImageGrid& delta_R, const PipelineConfig& cfg = {}, const BinaryMask* gt = nullptr);

/// Runs the requested mode end to end (gap mode decomposes first).
SegResult segment(const ImageGrid& composite, SegMode mode, const PipelineConfig& cfg = {},
                  const BinaryMask* gt = nullptr);

struct SweepRow {
  double target_rho = 0.0;
  int replicate = 0;
  std::uint64_t seed = 0;
  double achieved_rho = 0.0;
  double D_I = 0.0;
  double iou_gap_method = 0.0;
  double iou_composite_method = 0.0;
  double delta_iou = 0.0;
  bool failed = false;
  std::string error;
};

struct TargetSummary {
  double target_rho = 0.0;
  double mean_delta_iou = 0.0;
  int rows = 0;  // successful rows
};

struct SweepResult {
  std::vector<SweepRow> rows;  // target order, then replicate order
  std::vector<TargetSummary> targets;
  double pearson_r = 0.0;    // achieved_rho vs delta_iou over successful rows
  double spearman_r = 0.0;   // target_rho vs mean_delta_iou over targets
};

/// One synthetic sample per (target, replicate) with seed
/// synth::sweep_seed(base.seed, i, j); rows run on `jobs` threads. A row
/// whose generation or segmentation throws is marked failed.
SweepResult run_rho_sweep(const synth::SynthSpec& base, std::span<const double> targets, int per_target,
                          const PipelineConfig& cfg = {}, int jobs = 1);

double pearson(std::span<const double> x, std::span<const double> y);
/// Pearson correlation of average ranks.
double spearman(std::span<const double> x, std::span<const double> y);

}  // namespace ridekit::pipeline
