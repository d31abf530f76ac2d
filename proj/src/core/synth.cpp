#include "ridekit/synth.hpp"

#include <cmath>
#include <numbers>
#include <random>
#include <sstream>

#include "ridekit/disc.hpp"
#include "ridekit/errors.hpp"

namespace ridekit::synth {

namespace {

constexpr double kTruncation = 4.0;
constexpr std::uint64_t kBlobSalt = 0x9E3779B97F4A7C15ull;

double truncated_normal(std::mt19937_64& rng, double sigma) {
  if (sigma == 0.0) return 0.0;
  std::normal_distribution<double> normal(0.0, 1.0);
  double z = normal(rng);
  while (std::abs(z) > kTruncation) z = normal(rng);
  return sigma * z;
}

std::array<double, 3> lifted_direction(double delta_l) {
  const double s = (delta_l >= 0.0 ? 1.0 : -1.0) / std::sqrt(3.0);
  return {s, s, s};
}

double dot3(const std::array<double, 3>& a, const std::array<double, 3>& b) {
  return a[0] * b[0] + a[1] * b[1] + a[2] * b[2];
}

/// L2 norm of the 2-D separable kernel used by gaussian_blur.
double gaussian_l2_norm(double sigma) {
  if (sigma == 0.0) return 1.0;
  const int radius = static_cast<int>(std::ceil(3.0 * sigma));
  std::vector<double> k(static_cast<std::size_t>(2 * radius + 1));
  double sum = 0.0;
  for (int i = -radius; i <= radius; ++i) {
    k[static_cast<std::size_t>(i + radius)] = std::exp(-0.5 * i * i / (sigma * sigma));
    sum += k[static_cast<std::size_t>(i + radius)];
  }
  double sq = 0.0;
  for (double v : k) sq += (v / sum) * (v / sum);
  return sq;  // squared 1-D norm equals the 2-D norm of the outer product
}

}  // namespace

std::string_view to_string(MaskShape s) {
  switch (s) {
    case MaskShape::centered_disk:
      return "centered-disk";
    case MaskShape::half_plane:
      return "half-plane";
    case MaskShape::blob:
      return "blob";
  }
  return "centered-disk";
}

MaskShape mask_shape_from_string(std::string_view s) {
  for (MaskShape m : {MaskShape::centered_disk, MaskShape::half_plane, MaskShape::blob}) {
    if (to_string(m) == s) return m;
  }
  throw ParameterError("unknown mask shape '" + std::string(s) + "'");
}

void SynthSpec::validate() const {
  if (height < 8 || width < 8) throw SpecError("synthetic canvas must be at least 8x8");
  if (sigma_L < 0.0 || sigma_R < 0.0) throw SpecError("sigma values must be nonnegative");
  if (smooth_sigma_L < 0.0) throw SpecError("smooth_sigma_L must be nonnegative");
  for (double v : {delta_L, sigma_L, sigma_R, base_L, smooth_sigma_L}) {
    if (!std::isfinite(v)) throw SpecError("synthetic spec contains a non-finite value");
  }
  // Region means must already sit inside the admissible range; the realized
  // fields are checked again after sampling.
  for (int c = 0; c < 3; ++c) {
    for (int fg = 0; fg < 2; ++fg) {
      const double r = base_R[c] + (fg ? delta_R[c] : 0.0);
      const double l = base_L + (fg ? delta_L : 0.0);
      if (r > 0.0) throw SpecError("mean log reflectance exceeds 0 (R > 1) in channel " + std::to_string(c));
      if (l + r > 0.0) throw SpecError("mean log composite exceeds 0 (I > 1) in channel " + std::to_string(c));
    }
  }
}

SynthSpec with_rho(const SynthSpec& base, double rho) {
  if (!(rho >= -1.0 && rho <= 1.0)) throw ParameterError("rho target must lie in [-1, 1]");
  if (base.delta_L == 0.0) throw SpecError("rho is undefined when delta_L is zero");
  const double norm_r = std::sqrt(dot3(base.delta_R, base.delta_R));
  if (norm_r == 0.0) throw SpecError("rho is undefined when delta_R is zero");
  const auto u = lifted_direction(base.delta_L);
  const double along = dot3(base.delta_R, u);
  std::array<double, 3> v{};
  for (int c = 0; c < 3; ++c) v[c] = base.delta_R[c] - along * u[c];
  double nv = std::sqrt(dot3(v, v));
  if (nv < 1e-9 * norm_r) {
    v = {1.0 / std::numbers::sqrt2, -1.0 / std::numbers::sqrt2, 0.0};
    nv = 1.0;
  }
  const double ortho = std::sqrt(std::max(0.0, 1.0 - rho * rho));
  SynthSpec out = base;
  for (int c = 0; c < 3; ++c) out.delta_R[c] = norm_r * (rho * u[c] + ortho * v[c] / nv);
  return out;
}

BinaryMask make_mask(int height, int width, MaskShape shape, std::uint64_t seed) {
  BinaryMask mask(height, width, false);
  const double cy = 0.5 * (height - 1);
  const double cx = 0.5 * (width - 1);
  const double radius = 0.25 * std::min(height, width);
  std::array<double, 3> amp{};
  std::array<double, 3> phase{};
  if (shape == MaskShape::blob) {
    std::mt19937_64 rng(seed ^ kBlobSalt);
    std::uniform_real_distribution<double> a(0.0, 0.12);
    std::uniform_real_distribution<double> ph(0.0, 2.0 * std::numbers::pi);
    for (int k = 0; k < 3; ++k) {
      amp[k] = a(rng);
      phase[k] = ph(rng);
    }
  }
  for (int y = 0; y < height; ++y) {
    for (int x = 0; x < width; ++x) {
      bool fg = false;
      switch (shape) {
        case MaskShape::centered_disk:
          fg = (y - cy) * (y - cy) + (x - cx) * (x - cx) <= radius * radius;
          break;
        case MaskShape::half_plane:
          fg = x >= width / 2;
          break;
        case MaskShape::blob: {
          const double theta = std::atan2(y - cy, x - cx);
          double r = 1.0;
          for (int k = 0; k < 3; ++k) r += amp[k] * std::cos((k + 2) * theta + phase[k]);
          fg = std::hypot(y - cy, x - cx) <= radius * r;
          break;
        }
      }
      mask.set(y, x, fg);
    }
  }
  return mask;
}

SynthSample generate(const SynthSpec& spec) {
  spec.validate();
  const int h = spec.height;
  const int w = spec.width;
  const std::size_t n = static_cast<std::size_t>(h) * static_cast<std::size_t>(w);
  SynthSample s;
  s.spec = spec;
  s.mask = make_mask(h, w, spec.mask_shape, spec.seed);
  auto m = s.mask.values();

  std::mt19937_64 rng(spec.seed);
  // White noise is blurred together with the region means, then rescaled by
  // the kernel's L2 norm so sigma_L stays the marginal std of the smoothed
  // field. Region means are smoothed but not rescaled.
  // The noise is drawn on a canvas padded by the kernel radius so border
  // pixels are averaged over as many samples as interior ones.
  const double gain = 1.0 / gaussian_l2_norm(spec.smooth_sigma_L);
  const int pad = static_cast<int>(std::ceil(3.0 * spec.smooth_sigma_L));
  const int ph = h + 2 * pad;
  const int pw = w + 2 * pad;
  std::vector<double> noise_l(static_cast<std::size_t>(ph) * pw);
  for (auto& v : noise_l) v = truncated_normal(rng, spec.sigma_L);
  const ImageGrid padded_noise =
      gaussian_blur(ImageGrid(ph, pw, 1, Domain::log, std::move(noise_l)), spec.smooth_sigma_L);
  std::vector<double> cropped(n);
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) cropped[static_cast<std::size_t>(y) * w + x] = padded_noise.at(y + pad, x + pad);
  }
  const ImageGrid smooth_noise(h, w, 1, Domain::log, std::move(cropped));
  std::vector<double> means(n);
  for (std::size_t p = 0; p < n; ++p) means[p] = spec.base_L + (m[p] ? spec.delta_L : 0.0);
  const ImageGrid smooth_means = gaussian_blur(ImageGrid(h, w, 1, Domain::log, std::move(means)), spec.smooth_sigma_L);
  std::vector<double> log_l(n);
  for (std::size_t p = 0; p < n; ++p) log_l[p] = smooth_means.values()[p] + gain * smooth_noise.values()[p];
  std::vector<double> log_r(n * 3);
  for (std::size_t p = 0; p < n; ++p) {
    for (int c = 0; c < 3; ++c) {
      log_r[p * 3 + c] = spec.base_R[c] + (m[p] ? spec.delta_R[c] : 0.0) + truncated_normal(rng, spec.sigma_R);
    }
  }
  s.log_illumination = ImageGrid(h, w, 1, Domain::log, std::move(log_l));
  s.log_reflectance = ImageGrid(h, w, 3, Domain::log, std::move(log_r));

  auto ll = s.log_illumination.values();
  auto lr = s.log_reflectance.values();
  std::vector<double> l(n);
  std::vector<double> r(n * 3);
  std::vector<double> img(n * 3);
  for (std::size_t p = 0; p < n; ++p) {
    l[p] = std::exp(ll[p]);
    for (int c = 0; c < 3; ++c) {
      const std::size_t i = p * 3 + c;
      if (lr[i] > 0.0 || ll[p] + lr[i] > 0.0) {
        std::ostringstream msg;
        msg << "spec yields " << (lr[i] > 0.0 ? "reflectance" : "composite") << " above 1 at pixel (" << p / w
            << ", " << p % w << ") channel " << c << "; lower base_R/base_L or the noise levels";
        throw SpecError(msg.str());
      }
      r[i] = std::exp(lr[i]);
      img[i] = l[p] * r[i];
    }
  }
  s.illumination = ImageGrid(h, w, 1, Domain::illumination, std::move(l));
  s.reflectance = ImageGrid(h, w, 3, Domain::reflectance, std::move(r));
  s.composite = ImageGrid(h, w, 3, Domain::composite, std::move(img));

  const disc::TheoremReport rep = disc::verify_theorem(s.log_illumination, s.log_reflectance, s.mask);
  Achieved& a = s.achieved;
  a.rho = rep.geometry.rho;
  a.xi = rep.geometry.xi;
  a.D_I = rep.D_I;
  a.D_L = rep.D_L_native;
  a.D_R = rep.D_R;
  for (int c = 0; c < 3; ++c) {
    a.delta_L[c] = rep.delta_L[c];
    a.delta_R[c] = rep.delta_R[c];
  }
  a.fg_pixels = s.mask.foreground_count();
  a.bg_pixels = s.mask.background_count();

  for (bool fg : {true, false}) {
    for (int c = 0; c < 3; ++c) {
      double ml = 0.0, mr = 0.0;
      std::size_t cnt = 0;
      for (std::size_t p = 0; p < n; ++p) {
        if ((m[p] != 0) != fg) continue;
        ml += ll[p];
        mr += lr[p * 3 + c];
        ++cnt;
      }
      ml /= static_cast<double>(cnt);
      mr /= static_cast<double>(cnt);
      double sxy = 0.0, sxx = 0.0, syy = 0.0;
      for (std::size_t p = 0; p < n; ++p) {
        if ((m[p] != 0) != fg) continue;
        const double dx = ll[p] - ml;
        const double dy = lr[p * 3 + c] - mr;
        sxy += dx * dy;
        sxx += dx * dx;
        syy += dy * dy;
      }
      if (sxx > 0.0 && syy > 0.0) a.max_cross_corr = std::max(a.max_cross_corr, std::abs(sxy) / std::sqrt(sxx * syy));
    }
  }
  return s;
}

std::uint64_t sweep_seed(std::uint64_t base_seed, std::size_t target_index, int replicate) {
  return base_seed + 1000ull * target_index + static_cast<std::uint64_t>(replicate);
}

std::vector<SynthSample> default_suite() { return sweep_rho(SynthSpec{}, kSuiteTargets, 4); }

std::vector<SynthSample> sweep_rho(const SynthSpec& base, std::span<const double> rho_targets, int per_target) {
  if (per_target < 1) throw ParameterError("per_target must be >= 1");
  std::vector<SynthSample> out;
  out.reserve(rho_targets.size() * static_cast<std::size_t>(per_target));
  for (std::size_t i = 0; i < rho_targets.size(); ++i) {
    SynthSpec spec = with_rho(base, rho_targets[i]);
    for (int j = 0; j < per_target; ++j) {
      spec.seed = sweep_seed(base.seed, i, j);
      out.push_back(generate(spec));
    }
  }
  return out;
}

}  // namespace ridekit::synth
