#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>

#include "../support/grids.hpp"
#include "ridekit/errors.hpp"
#include "ridekit/raster_io.hpp"

using namespace ridekit;
using ridekit::testing::random_grid;
namespace fs = std::filesystem;

namespace {

fs::path temp_path(const std::string& name) {
  const fs::path dir = fs::temp_directory_path() / "ridekit_unit";
  fs::create_directories(dir);
  return dir / name;
}

/// Windowed statistics by direct summation with replicate padding.
double brute_variance(const ImageGrid& img, int y, int x, int k) {
  const int r = k / 2;
  const int ch = img.channels();
  std::vector<double> mean(ch, 0.0);
  const auto at = [&](int yy, int xx, int c) {
    yy = std::clamp(yy, 0, img.height() - 1);
    xx = std::clamp(xx, 0, img.width() - 1);
    return img.at(yy, xx, c);
  };
  for (int dy = -r; dy <= r; ++dy)
    for (int dx = -r; dx <= r; ++dx)
      for (int c = 0; c < ch; ++c) mean[c] += at(y + dy, x + dx, c);
  for (double& m : mean) m /= k * k;
  double var = 0.0;
  for (int dy = -r; dy <= r; ++dy)
    for (int dx = -r; dx <= r; ++dx)
      for (int c = 0; c < ch; ++c) var += std::pow(at(y + dy, x + dx, c) - mean[c], 2);
  return var / (k * k);
}

}  // namespace

TEST_SUITE("image") {
  TEST_CASE("log transform of a constant one grid") {
    ImageGrid g(4, 5, 1, Domain::composite, 1.0);
    CHECK_THROWS_AS(to_log_domain(g, 0.0), ParameterError);
    const ImageGrid out = to_log_domain(g, 1e-6);
    CHECK(out.domain() == Domain::log);
    for (double v : out.values()) CHECK(v == doctest::Approx(std::log(1.000001)).epsilon(1e-14));
  }

  TEST_CASE("log transform maps e minus eps to one") {
    ImageGrid g(3, 3, 3, Domain::feature, std::exp(1.0) - 1e-6);
    const ImageGrid out = to_log_domain(g, 1e-6);
    for (double v : out.values()) CHECK(std::abs(v - 1.0) <= 1e-15);
  }

  TEST_CASE("log transform round trip and monotonicity") {
    std::mt19937_64 rng(11);
    const ImageGrid g = random_grid(rng, 16, 16, 3, Domain::composite, 0.0, 1.0);
    const ImageGrid out = to_log_domain(g, 1e-6);
    for (std::size_t i = 0; i < g.size(); ++i) {
      const double back = std::exp(out.values()[i]) - 1e-6;
      CHECK(std::abs(back - g.values()[i]) <= 1e-12 * std::max(g.values()[i], 1e-6));
    }
    ImageGrid bumped = g;
    for (double& v : bumped.values()) v = std::min(1.0, v + 1e-3);
    const ImageGrid ob = to_log_domain(bumped, 1e-6);
    for (std::size_t i = 0; i < g.size(); ++i) {
      if (bumped.values()[i] > g.values()[i]) CHECK(ob.values()[i] > out.values()[i]);
    }
    ImageGrid neg(2, 2, 1, Domain::feature, -0.5);
    CHECK_THROWS_AS(to_log_domain(neg), ContractError);
  }

  TEST_CASE("gradients of a constant grid vanish") {
    ImageGrid g(6, 7, 3, Domain::composite, 0.4);
    const auto gp = spatial_gradients(g);
    for (double v : gp.grad_h.values()) CHECK(v == 0.0);
    for (double v : gp.grad_v.values()) CHECK(v == 0.0);
  }

  TEST_CASE("gradients of a vertical step") {
    const int h = 5, w = 8;
    const ImageGrid g = ridekit::testing::column_split(h, w, 4).to_grid();
    const auto gp = spatial_gradients(g);
    for (int y = 0; y < h; ++y) {
      for (int x = 0; x < w; ++x) {
        CHECK(gp.grad_h.at(y, x) == (x == 3 ? 1.0 : 0.0));
        CHECK(gp.grad_v.at(y, x) == 0.0);
      }
    }
  }

  TEST_CASE("gradients of a linear ramp") {
    const int h = 4, w = 9;
    ImageGrid g(h, w, 1, Domain::composite);
    for (int y = 0; y < h; ++y)
      for (int x = 0; x < w; ++x) g.at(y, x) = static_cast<double>(x) / (w - 1);
    const auto gp = spatial_gradients(g);
    for (int y = 0; y < h; ++y)
      for (int x = 0; x + 1 < w; ++x) CHECK(gp.grad_h.at(y, x) == doctest::Approx(1.0 / (w - 1)).epsilon(1e-14));
  }

  TEST_CASE("gradients are linear") {
    std::mt19937_64 rng(5);
    const ImageGrid X = random_grid(rng, 9, 11, 3, Domain::feature, -1, 1);
    const ImageGrid Y = random_grid(rng, 9, 11, 3, Domain::feature, -1, 1);
    const double a = 1.7, b = -0.3;
    ImageGrid Z = X;
    for (std::size_t i = 0; i < Z.size(); ++i) Z.values()[i] = a * X.values()[i] + b * Y.values()[i];
    const auto gx = spatial_gradients(X), gy = spatial_gradients(Y), gz = spatial_gradients(Z);
    for (std::size_t i = 0; i < Z.size(); ++i) {
      CHECK(gz.grad_h.values()[i] == doctest::Approx(a * gx.grad_h.values()[i] + b * gy.grad_h.values()[i]).epsilon(1e-12));
      CHECK(gz.grad_v.values()[i] == doctest::Approx(a * gx.grad_v.values()[i] + b * gy.grad_v.values()[i]).epsilon(1e-12));
    }
  }

  TEST_CASE("local variance of a constant grid is zero") {
    ImageGrid g(8, 8, 3, Domain::composite, 0.3);
    for (int k : {3, 5, 7}) {
      const auto m = local_moments(g, k);
      for (double v : m.variance.values()) CHECK(std::abs(v) <= 1e-15);
    }
    CHECK_THROWS_AS(local_moments(g, 4), ParameterError);
    CHECK_THROWS_AS(local_moments(g, 1), ParameterError);
  }

  TEST_CASE("local variance of a single white pixel") {
    ImageGrid g(9, 9, 1, Domain::composite, 0.0);
    g.at(4, 4) = 1.0;
    CHECK(local_moments(g, 3).variance.at(4, 4) == doctest::Approx(8.0 / 81.0).epsilon(1e-13));
  }

  TEST_CASE("local variance around a step edge") {
    const int h = 12, w = 20, split = 10;
    const ImageGrid g = ridekit::testing::column_split(h, w, split).to_grid();
    const auto var = local_moments(g, 7).variance;
    double best = 0.0;
    int best_x = -1;
    for (int x = 0; x < w; ++x) {
      const double v = var.at(6, x);
      const bool near = x >= split - 3 && x <= split + 2;
      if (near) CHECK(v > 0.0);
      else CHECK(std::abs(v) <= 1e-15);
      if (v > best) best = v, best_x = x;
    }
    CHECK(best_x >= split - 3);
    CHECK(best_x <= split + 2);
  }

  TEST_CASE("local variance matches a brute-force window scan") {
    std::mt19937_64 rng(99);
    for (int c : {1, 3}) {
      const ImageGrid g = random_grid(rng, 16, 16, c, Domain::feature, -2, 2);
      for (int k : {3, 5, 7}) {
        const auto lm = local_moments(g, k);
        for (int y = 0; y < 16; ++y)
          for (int x = 0; x < 16; ++x) CHECK(std::abs(lm.variance.at(y, x) - brute_variance(g, y, x, k)) <= 1e-12);
      }
    }
  }

  TEST_CASE("raw round trip is bit-identical") {
    std::mt19937_64 rng(3);
    const ImageGrid g = random_grid(rng, 7, 5, 3, Domain::feature, -1e3, 1e3);
    const fs::path p = temp_path("grid.raw");
    save_raster(g, p);
    const ImageGrid back = load_raster(p);
    CHECK(back == g);
  }

  TEST_CASE("png round trip is within one quantization step") {
    std::mt19937_64 rng(4);
    for (int c : {1, 3}) {
      const ImageGrid g = random_grid(rng, 6, 9, c, Domain::composite, 0, 1);
      const fs::path p = temp_path("grid.png");
      save_raster(g, p);
      const ImageGrid back = load_raster(p);
      REQUIRE(back.same_shape(g));
      CHECK(ridekit::testing::max_abs_diff(back, g) <= 1.0 / 255.0);
    }
  }

  TEST_CASE("pgm of zeros loads as a zero grid") {
    const fs::path p = temp_path("zeros.pgm");
    {
      std::ofstream f(p, std::ios::binary);
      f << "P5\n4 3\n255\n";
      for (int i = 0; i < 12; ++i) f.put('\0');
    }
    const ImageGrid g = load_raster(p);
    CHECK(g.height() == 3);
    CHECK(g.width() == 4);
    for (double v : g.values()) CHECK(v == 0.0);
  }

  TEST_CASE("mask pgm round trip") {
    std::mt19937_64 rng(8);
    const BinaryMask m = ridekit::testing::random_mask(rng, 10, 13);
    const fs::path p = temp_path("mask.pgm");
    save_mask(m, p);
    CHECK(load_mask(p) == m);
  }

  TEST_CASE("missing files raise io errors") {
    CHECK_THROWS_AS(load_raster(temp_path("does_not_exist.raw")), IoError);
  }

  TEST_CASE("domain ranges are enforced") {
    CHECK_THROWS_AS(ImageGrid(2, 2, 1, Domain::composite, std::vector<double>{0, 0.5, 1.2, 0}), ContractError);
    CHECK_THROWS_AS(ImageGrid(2, 2, 1, Domain::illumination, std::vector<double>{1, 1, 0, 1}), ContractError);
    CHECK_THROWS_AS(ImageGrid(2, 2, 1, Domain::log, std::vector<double>{1, NAN, 0, 1}), ContractError);
    CHECK_THROWS_AS(ImageGrid(2, 2, 1, Domain::log, std::vector<double>{1, 2, 3}), ShapeError);
  }
}
