#include "ridekit/disc.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <thread>

#include "ridekit/errors.hpp"

namespace ridekit::disc {

namespace {

constexpr double kHoldsRelTol = 1e-9;

double norm2(std::span<const double> v) {
  double acc = 0.0;
  for (double x : v) acc += x * x;
  return acc;
}

std::vector<double> difference(const std::vector<double>& a, const std::vector<double>& b) {
  std::vector<double> out(a.size());
  for (std::size_t i = 0; i < a.size(); ++i) out[i] = a[i] - b[i];
  return out;
}

void finish_report(TheoremReport& rep) {
  rep.lhs = rep.D_L + rep.D_R;
  rep.geometry = correlation_geometry(rep.delta_L, rep.delta_R);
  rep.entangled = rep.D_I <= rep.entangle_eps;
  if (rep.geometry.degenerate != Degenerate::none) {
    // xi -> 0 as one side vanishes, so the factor tends to 1.
    rep.factor = BoundFactor{1.0, false};
  } else {
    rep.factor = bound_factor(rep.geometry.rho, rep.geometry.xi);
  }
  if (rep.factor.infinite) {
    // delta_I vanishes at the pole; the inequality holds vacuously.
    rep.rhs = std::numeric_limits<double>::quiet_NaN();
    rep.slack = std::numeric_limits<double>::quiet_NaN();
    rep.holds = true;
    return;
  }
  rep.rhs = rep.D_I * rep.factor.value;
  rep.slack = rep.lhs - rep.rhs;
  rep.holds = rep.lhs >= rep.rhs - kHoldsRelTol * std::max(1.0, rep.rhs);
}

}  // namespace

std::string_view to_string(Degenerate d) {
  switch (d) {
    case Degenerate::none:
      return "none";
    case Degenerate::illumination:
      return "illumination";
    case Degenerate::reflectance:
      return "reflectance";
    case Degenerate::both:
      return "both";
  }
  return "none";
}

RegionStats region_stats(const ImageGrid& x, const BinaryMask& mask, Region region) {
  if (x.height() != mask.height() || x.width() != mask.width()) throw ShapeError("mask extent does not match grid");
  const bool want_fg = region == Region::foreground;
  const int ch = x.channels();
  RegionStats st;
  st.mean.assign(static_cast<std::size_t>(ch), 0.0);
  auto v = x.values();
  auto m = mask.values();
  for (std::size_t p = 0; p < m.size(); ++p) {
    if ((m[p] != 0) != want_fg) continue;
    ++st.pixel_count;
    for (int c = 0; c < ch; ++c) st.mean[c] += v[p * ch + c];
  }
  if (st.pixel_count == 0) {
    throw EmptyRegionError(std::string(want_fg ? "foreground" : "background") + " region is empty");
  }
  const double inv = 1.0 / static_cast<double>(st.pixel_count);
  for (auto& mu : st.mean) mu *= inv;
  double acc = 0.0;
  for (std::size_t p = 0; p < m.size(); ++p) {
    if ((m[p] != 0) != want_fg) continue;
    for (int c = 0; c < ch; ++c) {
      const double d = v[p * ch + c] - st.mean[c];
      acc += d * d;
    }
  }
  st.scatter_trace = acc * inv;
  return st;
}

double discriminability(const RegionStats& fg, const RegionStats& bg, double eps_R) {
  if (!(eps_R > 0.0)) throw ParameterError("eps_R must be positive");
  if (fg.mean.size() != bg.mean.size()) throw ShapeError("region statistics have different dimensions");
  double num = 0.0;
  for (std::size_t c = 0; c < fg.mean.size(); ++c) {
    const double d = fg.mean[c] - bg.mean[c];
    num += d * d;
  }
  return num / (fg.scatter_trace + bg.scatter_trace + eps_R);
}

double discriminability(const ImageGrid& x, const BinaryMask& mask, double eps_R) {
  return discriminability(region_stats(x, mask, Region::foreground), region_stats(x, mask, Region::background), eps_R);
}

Geometry correlation_geometry(std::span<const double> delta_l, std::span<const double> delta_r) {
  if (delta_l.size() != delta_r.size()) throw ShapeError("mean-difference vectors have different lengths");
  const double nl2 = norm2(delta_l);
  const double nr2 = norm2(delta_r);
  const double nl = std::sqrt(nl2);
  const double nr = std::sqrt(nr2);
  Geometry g;
  const bool zl = nl <= kZeroDeltaNorm;
  const bool zr = nr <= kZeroDeltaNorm;
  if (zl || zr) {
    g.degenerate = zl && zr ? Degenerate::both : (zl ? Degenerate::illumination : Degenerate::reflectance);
    return g;
  }
  double dot = 0.0;
  for (std::size_t i = 0; i < delta_l.size(); ++i) dot += delta_l[i] * delta_r[i];
  g.rho = std::clamp(dot / (nl * nr), -1.0, 1.0);
  g.xi = std::min(0.5, nl * nr / (nl2 + nr2));
  return g;
}

BoundFactor bound_factor(double rho, double xi) {
  if (rho < -1.0 || rho > 1.0) throw ParameterError("rho must lie in [-1, 1]");
  if (!(xi > 0.0) || xi > 0.5) throw ParameterError("xi must lie in (0, 0.5]");
  const double den = 1.0 + 2.0 * rho * xi;
  if (den <= kFactorPoleTol) return {std::numeric_limits<double>::infinity(), true};
  return {(1.0 + 2.0 * xi) / den, false};
}

TheoremReport verify_theorem(const ImageGrid& log_l, const ImageGrid& log_r, const BinaryMask& mask, double eps_R,
                             double entangle_eps) {
  if (!log_l.same_extent(log_r)) throw ShapeError("illumination and reflectance extents differ");
  if (log_l.channels() != 1 && log_l.channels() != log_r.channels()) {
    throw ShapeError("illumination must be single-channel or match the reflectance channels");
  }
  const int ch = log_r.channels();
  TheoremReport rep;
  rep.eps_R = eps_R;
  rep.entangle_eps = entangle_eps;
  rep.lifted_L = log_l.channels() != ch;
  const ImageGrid l = lift_channels(log_l, ch);

  std::vector<double> composite(log_r.size());
  for (std::size_t i = 0; i < composite.size(); ++i) composite[i] = l.values()[i] + log_r.values()[i];
  const ImageGrid log_i(log_r.height(), log_r.width(), ch, Domain::log, std::move(composite));

  const RegionStats lf = region_stats(l, mask, Region::foreground);
  const RegionStats lb = region_stats(l, mask, Region::background);
  const RegionStats rf = region_stats(log_r, mask, Region::foreground);
  const RegionStats rb = region_stats(log_r, mask, Region::background);
  rep.D_I = discriminability(log_i, mask, eps_R);
  rep.D_L = discriminability(lf, lb, eps_R);
  rep.D_R = discriminability(rf, rb, eps_R);
  rep.D_L_native = rep.lifted_L ? discriminability(log_l, mask, eps_R) : rep.D_L;
  rep.delta_L = difference(lf.mean, lb.mean);
  rep.delta_R = difference(rf.mean, rb.mean);

  // Conditional-independence diagnostic: largest within-region covariance
  // between L and any reflectance channel.
  auto lv = l.values();
  auto rv = log_r.values();
  auto m = mask.values();
  for (const auto& [region_fg, ls, rs] :
       {std::tuple{true, &lf, &rf}, std::tuple{false, &lb, &rb}}) {
    for (int c = 0; c < ch; ++c) {
      double acc = 0.0;
      for (std::size_t p = 0; p < m.size(); ++p) {
        if ((m[p] != 0) != region_fg) continue;
        acc += (lv[p * ch + c] - ls->mean[c]) * (rv[p * ch + c] - rs->mean[c]);
      }
      rep.max_cross_cov = std::max(rep.max_cross_cov, std::abs(acc / static_cast<double>(ls->pixel_count)));
    }
  }
  finish_report(rep);
  return rep;
}

TheoremReport verify_population(const PopulationConfig& cfg, double eps_R, double entangle_eps) {
  if (!(eps_R > 0.0)) throw ParameterError("eps_R must be positive");
  for (double t : {cfg.trace_L_fg, cfg.trace_L_bg, cfg.trace_R_fg, cfg.trace_R_bg}) {
    if (t < 0.0) throw ParameterError("covariance traces must be nonnegative");
  }
  TheoremReport rep;
  rep.eps_R = eps_R;
  rep.entangle_eps = entangle_eps;
  rep.delta_L.assign(cfg.delta_L.begin(), cfg.delta_L.end());
  rep.delta_R.assign(cfg.delta_R.begin(), cfg.delta_R.end());
  std::array<double, 3> delta_i{};
  for (std::size_t c = 0; c < 3; ++c) delta_i[c] = cfg.delta_L[c] + cfg.delta_R[c];
  const double w_l = cfg.trace_L_fg + cfg.trace_L_bg;
  const double w_r = cfg.trace_R_fg + cfg.trace_R_bg;
  rep.D_L = norm2(cfg.delta_L) / (w_l + eps_R);
  rep.D_R = norm2(cfg.delta_R) / (w_r + eps_R);
  rep.D_I = norm2(delta_i) / (w_l + w_r + eps_R);
  rep.D_L_native = rep.D_L;
  finish_report(rep);
  return rep;
}

PopulationConfig random_population_config(std::uint64_t seed, std::uint64_t index) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(index), static_cast<std::uint32_t>(index >> 32)};
  std::mt19937_64 rng(seq);
  std::normal_distribution<double> normal(0.0, 1.0);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  PopulationConfig cfg;
  for (auto& v : cfg.delta_L) v = normal(rng);
  for (auto& v : cfg.delta_R) v = normal(rng);
  // 10 * (1 - U[0,1)) lies in (0, 10].
  cfg.trace_L_fg = 10.0 * (1.0 - unit(rng));
  cfg.trace_L_bg = 10.0 * (1.0 - unit(rng));
  cfg.trace_R_fg = 10.0 * (1.0 - unit(rng));
  cfg.trace_R_bg = 10.0 * (1.0 - unit(rng));
  return cfg;
}

std::vector<TheoremReport> theorem_sweep(std::size_t count, std::uint64_t seed, double eps_R, int jobs) {
  std::vector<TheoremReport> out(count);
  const auto work = [&](std::size_t begin, std::size_t step) {
    for (std::size_t i = begin; i < count; i += step) out[i] = verify_population(random_population_config(seed, i), eps_R);
  };
  const std::size_t workers = static_cast<std::size_t>(std::max(1, jobs));
  if (workers == 1 || count < 2) {
    work(0, 1);
    return out;
  }
  std::vector<std::jthread> pool;
  for (std::size_t t = 0; t < workers; ++t) pool.emplace_back(work, t, workers);
  pool.clear();
  return out;
}

}  // namespace ridekit::disc
