#pragma once

#include <array>
#include <span>
#include <utility>
#include <vector>

#include "ridekit/image.hpp"

namespace ridekit::losses {

inline constexpr double kProbClamp = 1e-7;
inline constexpr double kIouSmooth = 1.0;
inline constexpr double kPoolEps = 1e-6;
inline constexpr double kDefaultTau = 0.1;
inline constexpr int kDefaultNegatives = 8;
inline constexpr int kLevels = 4;
/// Allowed deviation from unit norm for contrast vectors.
inline constexpr double kUnitNormTol = 1e-9;

/// Mean over all values of -[t ln p + (1-t) ln(1-p)], p clamped to
/// [kProbClamp, 1 - kProbClamp]. Targets must lie in [0,1].
double bce(const ImageGrid& pred, const ImageGrid& target);

/// 1 - (sum p t + s) / (sum p + sum t - sum p t + s).
double iou_loss(const ImageGrid& pred, const ImageGrid& target, double smooth = kIouSmooth);

/// Extent of pyramid level `level` (1-based): each level halves the previous
/// one, rounding up.
std::pair<int, int> level_extent(int height, int width, int level);

/// 2x2 majority pooling; a tied block is foreground. Odd trailing rows and
/// columns pool over the pixels that exist.
BinaryMask downsample_majority(const BinaryMask& mask);

/// Level 1 is `mask` itself.
std::array<BinaryMask, kLevels> mask_pyramid(const BinaryMask& mask);

struct PredictionSet {
  std::array<ImageGrid, kLevels> masks;
  ImageGrid boundary;
  ImageGrid refl_boundary;
};

struct SegLoss {
  std::array<double, kLevels> bce{};
  std::array<double, kLevels> iou{};
  double total = 0.0;  // sum_l 2^(1-l) (bce_l + iou_l)
};

SegLoss deep_seg_loss(const std::array<ImageGrid, kLevels>& preds, const std::array<BinaryMask, kLevels>& gts);

/// Builds the ground-truth pyramid from the full-resolution mask first.
SegLoss deep_seg_loss(const std::array<ImageGrid, kLevels>& preds, const BinaryMask& gt);

/// BCE(boundary, gt) + BCE(refl_boundary, gt).
double boundary_loss(const ImageGrid& boundary, const ImageGrid& refl_boundary, const ImageGrid& gt);

struct Pooled {
  std::vector<double> vector;  // unit norm unless empty_mask
  bool empty_mask = false;     // mask sums to zero; vector is all zeros
};

/// Per-channel sum(F M) / (sum M + kPoolEps), then L2-normalized.
Pooled masked_pool(const ImageGrid& features, const ImageGrid& mask);

struct ContrastBatch {
  std::vector<double> pos_a;
  std::vector<double> pos_b;
  std::vector<std::vector<double>> negatives;
  double tau = kDefaultTau;

  /// Throws ContractError unless all vectors share one length, have unit
  /// norm, J >= 1 and tau > 0.
  void validate() const;
};

double cosine(std::span<const double> a, std::span<const double> b);

/// -log softmax of the positive similarity among positive and negatives,
/// each divided by tau; stabilized by subtracting the maximum.
double infonce_from_similarities(double sim_pos, std::span<const double> sim_neg, double tau);

double infonce(const ContrastBatch& batch);

struct LossParts {
  double seg = 0.0;
  double ret = 0.0;
  double bnd = 0.0;
  double con = 0.0;
};

double total_loss(const LossParts& parts);

}  // namespace ridekit::losses
