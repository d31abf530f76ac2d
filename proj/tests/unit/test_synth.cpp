#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <vector>

#include "ridekit/disc.hpp"
#include "ridekit/errors.hpp"
#include "ridekit/synth.hpp"

using namespace ridekit;
using namespace ridekit::synth;

namespace {

SynthSpec small(std::uint64_t seed = 3) {
  SynthSpec s;
  s.height = 64;
  s.width = 64;
  s.seed = seed;
  return s;
}

double region_corr(const SynthSample& s, bool fg, int c) {
  double ml = 0, mr = 0;
  std::size_t n = 0;
  const auto& l = s.log_illumination;
  const auto& r = s.log_reflectance;
  for (int y = 0; y < l.height(); ++y)
    for (int x = 0; x < l.width(); ++x)
      if (s.mask.foreground(y, x) == fg) {
        ml += l.at(y, x, 0);
        mr += r.at(y, x, c);
        ++n;
      }
  ml /= n;
  mr /= n;
  double sll = 0, srr = 0, slr = 0;
  for (int y = 0; y < l.height(); ++y)
    for (int x = 0; x < l.width(); ++x)
      if (s.mask.foreground(y, x) == fg) {
        const double a = l.at(y, x, 0) - ml, b = r.at(y, x, c) - mr;
        sll += a * a;
        srr += b * b;
        slr += a * b;
      }
  return slr / std::sqrt(sll * srr);
}

}  // namespace

TEST_SUITE("synth") {
  TEST_CASE("composite factorizes exactly") {
    for (auto shape : {MaskShape::centered_disk, MaskShape::half_plane, MaskShape::blob}) {
      SynthSpec spec = small();
      spec.mask_shape = shape;
      const auto s = generate(spec);
      double worst = 0;
      for (int y = 0; y < spec.height; ++y)
        for (int x = 0; x < spec.width; ++x)
          for (int c = 0; c < 3; ++c) {
            const double v = s.composite.at(y, x, c);
            CHECK(v >= 0.0);
            CHECK(v <= 1.0);
            worst = std::max(worst, std::abs(v - s.illumination.at(y, x, 0) * s.reflectance.at(y, x, c)));
          }
      CHECK(worst <= 1e-12);
      CHECK(s.achieved.fg_pixels > 0);
      CHECK(s.achieved.bg_pixels > 0);
      CHECK(s.achieved.fg_pixels + s.achieved.bg_pixels == std::size_t(spec.height * spec.width));
    }
  }

  TEST_CASE("opposite illumination and reflectance cancel in the composite") {
    SynthSpec spec = small();
    spec.delta_L = 0.3;
    spec.delta_R = {-0.3, -0.3, -0.3};
    spec.sigma_L = 1e-4;
    spec.sigma_R = 1e-4;
    spec.smooth_sigma_L = 0.0;
    const auto s = generate(spec);
    CHECK(s.achieved.D_I <= 1e-3);
    CHECK(s.achieved.D_R >= 1e3);
    CHECK(s.achieved.rho == doctest::Approx(-1.0).epsilon(1e-6));
  }

  TEST_CASE("zero reflectance difference is pure illumination contrast") {
    SynthSpec spec = small();
    spec.delta_R = {0, 0, 0};
    const auto s = generate(spec);
    CHECK(s.achieved.D_R <= 0.05);
    CHECK(s.achieved.D_L > 10.0 * s.achieved.D_R);
  }

  TEST_CASE("requested rho is achieved at the default resolution") {
    for (std::uint64_t seed : {1, 2, 3, 4, 5}) {
      SynthSpec base;
      base.seed = seed;
      const auto s = generate(with_rho(base, -0.5));
      CHECK(s.achieved.rho >= -0.55);
      CHECK(s.achieved.rho <= -0.45);
    }
  }

  TEST_CASE("rotation keeps the reflectance norm") {
    const SynthSpec base;
    const double n0 = std::hypot(base.delta_R[0], base.delta_R[1], base.delta_R[2]);
    for (double rho : {-1.0, -0.3, 0.0, 0.7, 1.0}) {
      const SynthSpec s = with_rho(base, rho);
      CHECK(std::hypot(s.delta_R[0], s.delta_R[1], s.delta_R[2]) == doctest::Approx(n0).epsilon(1e-12));
      const double cosv = (s.delta_R[0] + s.delta_R[1] + s.delta_R[2]) / (std::sqrt(3.0) * n0);
      CHECK(cosv == doctest::Approx(rho).epsilon(1e-12));
    }
  }

  TEST_CASE("sweep preserves target ordering and is deterministic") {
    const std::vector<double> targets{-0.9, 0.0, 0.9};
    SynthSpec base = small();
    const auto a = sweep_rho(base, targets, 5);
    const auto b = sweep_rho(base, targets, 5);
    REQUIRE(a.size() == 15);
    for (std::size_t i = 0; i < a.size(); ++i) {
      CHECK(std::ranges::equal(a[i].composite.values(), b[i].composite.values()));
      CHECK(std::ranges::equal(a[i].mask.values(), b[i].mask.values()));
    }
    for (int j = 0; j < 5; ++j) {
      CHECK(a[j].achieved.rho < a[5 + j].achieved.rho);
      CHECK(a[5 + j].achieved.rho < a[10 + j].achieved.rho);
    }
    CHECK(a[6].spec.seed == sweep_seed(base.seed, 1, 1));
  }

  TEST_CASE("composite discriminability grows with rho at fixed norms") {
    for (std::uint64_t seed : {1, 2, 3}) {
      SynthSpec base;
      base.seed = seed;
      double prev = -1.0;
      for (double rho : {-0.9, -0.5, 0.0, 0.5, 0.9}) {
        const double d = generate(with_rho(base, rho)).achieved.D_I;
        CHECK(d > prev);
        prev = d;
      }
    }
  }

  TEST_CASE("achieved mean differences satisfy the norm identity") {
    const std::vector<double> targets{-0.9, -0.5, 0.0, 0.5, 0.9};
    const auto samples = sweep_rho(SynthSpec{}, targets, 2);
    for (const auto& s : samples) {
      const auto& a = s.achieved;
      double nl = 0, nr = 0, dot = 0, ni = 0;
      for (int c = 0; c < 3; ++c) {
        nl += a.delta_L[c] * a.delta_L[c];
        nr += a.delta_R[c] * a.delta_R[c];
        dot += a.delta_L[c] * a.delta_R[c];
        ni += (a.delta_L[c] + a.delta_R[c]) * (a.delta_L[c] + a.delta_R[c]);
      }
      CHECK(ni == doctest::Approx(nl + nr + 2 * a.rho * std::sqrt(nl * nr)).epsilon(1e-10));
      CHECK(dot == doctest::Approx(a.rho * std::sqrt(nl * nr)).epsilon(1e-10));
    }
  }

  TEST_CASE("achieved statistics agree with the region estimator") {
    const auto s = generate(with_rho(small(8), 0.3));
    const auto r = disc::verify_theorem(s.log_illumination, s.log_reflectance, s.mask);
    CHECK(s.achieved.D_I == doctest::Approx(r.D_I).epsilon(1e-12));
    CHECK(s.achieved.D_L == doctest::Approx(r.D_L_native).epsilon(1e-12));
    CHECK(s.achieved.D_R == doctest::Approx(r.D_R).epsilon(1e-12));
    CHECK(s.achieved.rho == doctest::Approx(r.geometry.rho).epsilon(1e-12));
  }

  TEST_CASE("illumination and reflectance stay within the sampling bound") {
    int checks = 0, outside = 0;
    for (std::uint64_t seed = 1; seed <= 100; ++seed) {
      SynthSpec spec;
      spec.seed = seed;
      const auto s = generate(spec);
      double worst = 0;
      for (bool fg : {true, false}) {
        const double n = double(fg ? s.achieved.fg_pixels : s.achieved.bg_pixels);
        for (int c = 0; c < 3; ++c) {
          const double r = std::abs(region_corr(s, fg, c));
          ++checks;
          if (r > 3.0 / std::sqrt(n)) ++outside;
          worst = std::max(worst, r);
        }
      }
      CHECK(s.achieved.max_cross_corr == doctest::Approx(worst).epsilon(1e-9));
    }
    CHECK(outside <= checks / 100);
  }

  TEST_CASE("rho deviation shrinks with resolution") {
    double dev128 = 0, dev512 = 0;
    const int reps = 6;
    for (int j = 0; j < reps; ++j) {
      SynthSpec base;
      base.seed = 100 + j;
      dev128 += std::abs(generate(with_rho(base, 0.2)).achieved.rho - 0.2);
      base.height = base.width = 512;
      dev512 += std::abs(generate(with_rho(base, 0.2)).achieved.rho - 0.2);
    }
    CHECK(dev512 <= 0.5 * dev128);
  }

  TEST_CASE("invalid specs are rejected") {
    SynthSpec s = small();
    s.sigma_L = -1;
    CHECK_THROWS_AS(generate(s), SpecError);
    s = small();
    s.base_R = {0.5, -1, -1};
    CHECK_THROWS_AS(generate(s), SpecError);
    s = small();
    s.base_L = 0.2;
    s.delta_L = 0.5;
    s.base_R = {-0.1, -0.1, -0.1};
    s.delta_R = {0, 0, 0};
    CHECK_THROWS_AS(generate(s), SpecError);
    CHECK_THROWS_AS(with_rho(SynthSpec{}, 1.5), ParameterError);
    s = small();
    s.delta_L = 0;
    CHECK_THROWS_AS(with_rho(s, 0.0), SpecError);
    CHECK_THROWS_AS(mask_shape_from_string("square"), ParameterError);
    CHECK(mask_shape_from_string("half-plane") == MaskShape::half_plane);
  }
}
