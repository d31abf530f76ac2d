#include <doctest.h>

#include <cmath>

#include "../support/fd_oracle.hpp"
#include "ridekit/errors.hpp"
#include "ridekit/retinex.hpp"
#include "ridekit/synth.hpp"

using namespace ridekit;
using namespace ridekit::retinex;

namespace {

ImageGrid constant(int h, int w, int c, Domain d, double v) { return ImageGrid(h, w, c, d, v); }

/// Illumination with a unit step between columns split-1 and split.
ImageGrid step_columns(int h, int w, int split, double lo, double hi, Domain d, int channels = 1) {
  ImageGrid g(h, w, channels, d, lo);
  for (int y = 0; y < h; ++y)
    for (int x = split; x < w; ++x)
      for (int c = 0; c < channels; ++c) g.at(y, x, c) = hi;
  return g;
}

ImageGrid step_rows(int h, int w, int split, double lo, double hi, Domain d, int channels = 1) {
  ImageGrid g(h, w, channels, d, lo);
  for (int y = split; y < h; ++y)
    for (int x = 0; x < w; ++x)
      for (int c = 0; c < channels; ++c) g.at(y, x, c) = hi;
  return g;
}

/// Per-pixel exclusivity contributions, summed over both directions.
std::vector<double> me_contributions(const ImageGrid& L, const ImageGrid& R) {
  const int h = L.height(), w = L.width();
  std::vector<double> out(static_cast<std::size_t>(h) * w, 0.0);
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      double s = 0.0;
      if (x + 1 < w) {
        double r = 0.0;
        for (int c = 0; c < R.channels(); ++c) r += std::abs(R.at(y, x + 1, c) - R.at(y, x, c));
        s += std::abs(L.at(y, x + 1) - L.at(y, x)) * r;
      }
      if (y + 1 < h) {
        double r = 0.0;
        for (int c = 0; c < R.channels(); ++c) r += std::abs(R.at(y + 1, x, c) - R.at(y, x, c));
        s += std::abs(L.at(y + 1, x) - L.at(y, x)) * r;
      }
      out[static_cast<std::size_t>(y) * w + x] = s;
    }
  }
  return out;
}

}  // namespace

TEST_SUITE("retinex") {
  TEST_CASE("init on constant gray") {
    const auto p = init_decomposition(constant(8, 8, 3, Domain::composite, 0.5));
    for (double v : p.illumination.values()) CHECK(v == doctest::Approx(0.5).epsilon(1e-12));
    for (double v : p.reflectance.values()) CHECK(v == doctest::Approx(1.0).epsilon(1e-12));
  }

  TEST_CASE("init on black uses the illumination floor") {
    const auto p = init_decomposition(constant(6, 6, 3, Domain::composite, 0.0));
    for (double v : p.illumination.values()) CHECK(v == doctest::Approx(0.01).epsilon(1e-12));
    for (double v : p.reflectance.values()) CHECK(v == 0.0);
  }

  TEST_CASE("init reconstructs the input where it does not exceed L0") {
    std::mt19937_64 rng(21);
    const ImageGrid I = ridekit::testing::random_grid(rng, 12, 10, 3, Domain::composite, 0, 1);
    const auto p = init_decomposition(I);
    int checked = 0;
    for (int y = 0; y < I.height(); ++y) {
      for (int x = 0; x < I.width(); ++x) {
        const double l = p.illumination.at(y, x);
        for (int c = 0; c < 3; ++c) {
          if (I.at(y, x, c) > l) continue;
          ++checked;
          CHECK(std::abs(l * p.reflectance.at(y, x, c) - I.at(y, x, c)) <= 1e-12);
        }
      }
    }
    CHECK(checked > 0);
  }

  TEST_CASE("loss vanishes on an exact constant factorization") {
    const auto L = constant(6, 7, 1, Domain::illumination, 0.8);
    const auto R = constant(6, 7, 3, Domain::reflectance, 0.5);
    const auto I = constant(6, 7, 3, Domain::composite, 0.4);
    const auto l = retinex_loss(I, L, R);
    CHECK(l.rec <= 1e-3);
    CHECK(l.smooth_l == 0.0);
    CHECK(l.tv_r == 0.0);
    CHECK(l.me == 0.0);
  }

  TEST_CASE("illumination step with constant reflectance") {
    const int h = 5, w = 8;
    const auto L = step_columns(h, w, 4, 1.0, 2.0, Domain::illumination);
    const auto R = constant(h, w, 3, Domain::reflectance, 0.3);
    ImageGrid I(h, w, 3, Domain::composite);
    for (int y = 0; y < h; ++y)
      for (int x = 0; x < w; ++x)
        for (int c = 0; c < 3; ++c) I.at(y, x, c) = L.at(y, x) * 0.3;
    const auto l = retinex_loss(I, L, R);
    CHECK(l.smooth_l == doctest::Approx(static_cast<double>(h) / (h * w)).epsilon(1e-14));
    CHECK(l.me == 0.0);
  }

  TEST_CASE("shared edges are penalized and offset edges are not") {
    const int h = 6, w = 9;
    const auto L = step_columns(h, w, 4, 1.0, 2.0, Domain::illumination);
    const auto R_same = step_columns(h, w, 4, 0.2, 0.8, Domain::reflectance, 3);
    const auto R_moved = step_columns(h, w, 5, 0.2, 0.8, Domain::reflectance, 3);
    CHECK(me_loss(L, R_same) > 0.0);
    CHECK(me_loss(L, R_moved) == 0.0);
  }

  TEST_CASE("exclusivity with a constant field is zero") {
    std::mt19937_64 rng(2);
    const auto R = ridekit::testing::random_grid(rng, 7, 7, 3, Domain::reflectance, 0, 1);
    CHECK(me_loss(constant(7, 7, 1, Domain::illumination, 1.3), R) == 0.0);
    const auto L = ridekit::testing::random_grid(rng, 7, 7, 1, Domain::illumination, 0.1, 2);
    CHECK(me_loss(L, constant(7, 7, 3, Domain::reflectance, 0.4)) == 0.0);
  }

  TEST_CASE("identical unit steps give one over the width") {
    const int h = 6, w = 10;
    const auto L = step_columns(h, w, 5, 1.0, 2.0, Domain::illumination);
    const auto R = step_columns(h, w, 5, 0.0, 1.0, Domain::reflectance);
    CHECK(me_loss(L, R, 1e-9) == doctest::Approx(1.0 / w).epsilon(1e-8));
  }

  TEST_CASE("orthogonal edges contribute nowhere but the crossing pixel") {
    const int h = 8, w = 8;
    const auto L = step_rows(h, w, 4, 1.0, 2.0, Domain::illumination);
    const auto R = step_columns(h, w, 4, 0.0, 1.0, Domain::reflectance);
    const auto contrib = me_contributions(L, R);
    double total = 0.0;
    for (int y = 0; y < h; ++y) {
      for (int x = 0; x < w; ++x) {
        const double v = contrib[static_cast<std::size_t>(y) * w + x];
        total += v;
        if (!(y == 3 && x == 3)) CHECK(v == 0.0);
      }
    }
    CHECK(me_loss(L, R, 1e-12) == doctest::Approx(total / (h * w)).epsilon(1e-9));
  }

  TEST_CASE("gradients vanish at a stationary constant solution") {
    const auto L = constant(6, 6, 1, Domain::illumination, 0.5);
    const auto R = constant(6, 6, 3, Domain::reflectance, 0.6);
    const auto I = constant(6, 6, 3, Domain::composite, 0.3);
    const auto g = retinex_loss_gradients(I, L, R);
    for (double v : g.illumination.values()) CHECK(std::abs(v) <= 1e-10);
    for (double v : g.reflectance.values()) CHECK(std::abs(v) <= 1e-10);
  }

  TEST_CASE("analytic gradients match central differences") {
    for (std::uint64_t s = 0; s < 20; ++s) {
      const auto r = ridekit::testing::check_gradients(ridekit::testing::random_param_instance(500 + s));
      CHECK(r.max_rel <= 1e-4);
    }
  }

  TEST_CASE("doubling the reconstruction weight doubles its gradient") {
    auto p = ridekit::testing::random_param_instance(77);
    Weights only_rec{.rec = 1.0, .smooth_l = 0.0, .tv_r = 0.0, .me = 0.0};
    Weights twice = only_rec;
    twice.rec = 2.0;
    const auto L = ridekit::testing::illumination_of(p);
    const auto R = ridekit::testing::reflectance_of(p);
    const auto g1 = retinex_loss_gradients(p.composite, L, R, only_rec);
    const auto g2 = retinex_loss_gradients(p.composite, L, R, twice);
    for (std::size_t i = 0; i < g1.illumination.size(); ++i)
      CHECK(g2.illumination.values()[i] == 2.0 * g1.illumination.values()[i]);
    for (std::size_t i = 0; i < g1.reflectance.size(); ++i)
      CHECK(g2.reflectance.values()[i] == 2.0 * g1.reflectance.values()[i]);
  }

  TEST_CASE("decomposing a constant gray image") {
    const auto I = constant(16, 16, 3, Domain::composite, 0.5);
    const auto p = decompose(I);
    CHECK(reconstruction_error(I, p.illumination, p.reflectance) <= 1e-3);
    CHECK(p.loss.smooth_l <= 1e-6);
    CHECK(p.loss.tv_r <= 1e-6);
    CHECK(p.loss.me <= 1e-6);
  }

  TEST_CASE("decomposition trace strictly decreases and ranges hold") {
    for (std::uint64_t seed : {1u, 2u, 3u}) {
      std::mt19937_64 rng(seed);
      const auto I = ridekit::testing::random_grid(rng, 16, 16, 3, Domain::composite, 0.05, 0.95);
      for (Direction d : {Direction::lbfgs, Direction::steepest}) {
        SolverConfig cfg;
        cfg.max_iters = 60;
        cfg.seed = seed;
        cfg.init_jitter = 0.05;
        cfg.direction = d;
        const auto p = decompose(I, {}, cfg);
        REQUIRE(p.trace.size() >= 2);
        for (std::size_t i = 1; i < p.trace.size(); ++i) CHECK(p.trace[i] < p.trace[i - 1]);
        for (double v : p.illumination.values()) CHECK(v > 0.0);
        for (double v : p.reflectance.values()) CHECK((v >= 0.0 && v <= 1.0));
      }
    }
  }

  TEST_CASE("decomposition of a synthetic sample reconstructs it") {
    const auto s = synth::generate(synth::with_rho(synth::SynthSpec{}, -0.9));
    const auto p = decompose(s.composite);
    CHECK(p.loss.rec <= 1e-2);
    CHECK(reconstruction_error(s.composite, p.illumination, p.reflectance) <= 1e-2);
  }

  TEST_CASE("material edges are attributed to reflectance") {
    // Edge present only in the reflectance: no illumination contrast or texture.
    synth::SynthSpec spec;
    spec.delta_L = 0.0;
    for (std::uint64_t seed = 1; seed <= 3; ++seed) {
      spec.seed = seed;
      const auto s = synth::generate(spec);
      const auto p = decompose(s.composite);
      const auto init = init_decomposition(s.composite);
      const double me0 = me_loss(init.illumination, init.reflectance);
      CHECK(p.loss.me <= 0.1 * me0);
      // Edge attribution: log-gradient magnitude carried by R on the true boundary.
      const auto logL = to_log_domain(p.illumination), logR = to_log_domain(p.reflectance);
      const auto gL = spatial_gradients(logL), gR = spatial_gradients(logR);
      double eL = 0.0, eR = 0.0;
      for (int y = 0; y + 1 < s.mask.height(); ++y) {
        for (int x = 0; x + 1 < s.mask.width(); ++x) {
          const bool edge = s.mask.foreground(y, x) != s.mask.foreground(y, x + 1) ||
                            s.mask.foreground(y, x) != s.mask.foreground(y + 1, x);
          if (!edge) continue;
          eL += 3.0 * (std::abs(gL.grad_h.at(y, x)) + std::abs(gL.grad_v.at(y, x)));
          for (int c = 0; c < 3; ++c) eR += std::abs(gR.grad_h.at(y, x, c)) + std::abs(gR.grad_v.at(y, x, c));
        }
      }
      CHECK(eR / (eR + eL) >= 0.8);
    }
  }

  TEST_CASE("invalid configurations are rejected") {
    const auto I = constant(4, 4, 3, Domain::composite, 0.5);
    SolverConfig bad;
    bad.max_iters = 0;
    CHECK_THROWS_AS(decompose(I, {}, bad), ParameterError);
    Weights neg;
    neg.rec = -1.0;
    CHECK_THROWS_AS(retinex_loss(I, constant(4, 4, 1, Domain::illumination, 1), constant(4, 4, 3, Domain::reflectance, 0.5), neg),
                    ParameterError);
    CHECK_THROWS_AS(retinex_loss(I, constant(4, 5, 1, Domain::illumination, 1), constant(4, 4, 3, Domain::reflectance, 0.5)),
                    ShapeError);
  }
}
