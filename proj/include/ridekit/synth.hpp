#pragma once

#include <array>
#include <cstdint>
#include <span>
#include <string_view>
#include <vector>

#include "ridekit/image.hpp"

namespace ridekit::synth {

enum class MaskShape { centered_disk, half_plane, blob };
std::string_view to_string(MaskShape s);
MaskShape mask_shape_from_string(std::string_view s);

/// Two-region scene described in the log domain. Illumination is a scalar
/// field; its mean difference is lifted to (d, d, d) when paired with the
/// three reflectance channels.
struct SynthSpec {
  int height = 128;
  int width = 128;
  MaskShape mask_shape = MaskShape::centered_disk;
  double delta_L = 0.25;
  std::array<double, 3> delta_R = {-0.25, -0.25, -0.25};
  /// Marginal std. dev. of the smoothed log illumination within a region.
  double sigma_L = 0.15;
  double sigma_R = 0.01;
  double base_L = -0.2;
  std::array<double, 3> base_R = {-1.1, -1.2, -1.3};
  /// Gaussian smoothing (px) applied to the whole log-illumination field.
  double smooth_sigma_L = 7.0;
  std::uint64_t seed = 1;

  void validate() const;
};

/// Copy of `base` whose reflectance difference keeps its norm but is rotated
/// so that cos(lifted delta_L, delta_R) == rho. The rotation plane is spanned
/// by the lifted illumination direction and the Gram-Schmidt residual of the
/// base reflectance difference (or (1,-1,0) when that residual vanishes).
SynthSpec with_rho(const SynthSpec& base, double rho);

/// Ground-truth statistics measured on the generated log components.
struct Achieved {
  double rho = 0.0;
  double xi = 0.0;
  double D_I = 0.0;
  double D_L = 0.0;
  double D_R = 0.0;
  std::array<double, 3> delta_L{};
  std::array<double, 3> delta_R{};
  double max_cross_corr = 0.0;  // max_r,c |corr_r(log L, log R_c)|
  std::size_t fg_pixels = 0;
  std::size_t bg_pixels = 0;
};

struct SynthSample {
  SynthSpec spec;
  ImageGrid composite;     // I = L * R, 3 channels in [0,1]
  ImageGrid illumination;  // L, 1 channel, positive
  ImageGrid reflectance;   // R, 3 channels in [0,1]
  ImageGrid log_illumination;
  ImageGrid log_reflectance;
  BinaryMask mask;
  Achieved achieved;
};

BinaryMask make_mask(int height, int width, MaskShape shape, std::uint64_t seed);

/// Draws log L and log R as per-region Gaussians (white noise truncated at
/// 4 sigma), smooths log L, exponentiates and multiplies. Throws SpecError when the
/// realized composite would leave [0,1].
SynthSample generate(const SynthSpec& spec);

/// `per_target` samples for every rho target, in target order. Replicate j of
/// target i uses seed base.seed + 1000 * i + j.
std::vector<SynthSample> sweep_rho(const SynthSpec& base, std::span<const double> rho_targets, int per_target);

/// Rho targets of the default suite.
inline constexpr std::array<double, 5> kSuiteTargets = {-0.9, -0.5, 0.0, 0.5, 0.9};

/// Default suite: SynthSpec{} swept over kSuiteTargets, 4 replicates each
/// (20 samples).
std::vector<SynthSample> default_suite();

/// The seed used for replicate `replicate` of target number `target_index`.
std::uint64_t sweep_seed(std::uint64_t base_seed, std::size_t target_index, int replicate);

}  // namespace ridekit::synth
