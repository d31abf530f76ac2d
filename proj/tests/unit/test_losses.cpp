#include <doctest.h>

#include <cmath>
#include <numeric>
#include <random>

#include "../support/grids.hpp"
#include "../support/hp_oracle.hpp"
#include "ridekit/errors.hpp"
#include "ridekit/losses.hpp"
#include "ridekit/retinex.hpp"

using namespace ridekit;
using namespace ridekit::losses;
namespace hp = ridekit::testing::hp;

namespace {

double rel(double a, double oracle) { return std::abs(a - oracle) / std::abs(oracle); }

ImageGrid binary_grid(std::mt19937_64& rng, int h, int w) {
  const BinaryMask m = ridekit::testing::random_mask(rng, h, w);
  ImageGrid g(h, w, 1, Domain::feature, 0.0);
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) g.at(y, x, 0) = m.foreground(y, x) ? 1.0 : 0.0;
  return g;
}

ImageGrid probs(std::mt19937_64& rng, int h, int w) {
  return ridekit::testing::random_grid(rng, h, w, 1, Domain::feature, 0.01, 0.99);
}

std::vector<double> unit_vector(std::mt19937_64& rng, int d) {
  std::normal_distribution<double> n(0, 1);
  std::vector<double> v(d);
  for (double& x : v) x = n(rng);
  const double s = std::sqrt(std::inner_product(v.begin(), v.end(), v.begin(), 0.0));
  for (double& x : v) x /= s;
  return v;
}

ContrastBatch random_batch(std::mt19937_64& rng, int d, int j, double tau) {
  ContrastBatch b;
  b.pos_a = unit_vector(rng, d);
  b.pos_b = unit_vector(rng, d);
  for (int i = 0; i < j; ++i) b.negatives.push_back(unit_vector(rng, d));
  b.tau = tau;
  return b;
}

BinaryMask as_mask(const ImageGrid& g) {
  BinaryMask m(g.height(), g.width());
  for (int y = 0; y < g.height(); ++y)
    for (int x = 0; x < g.width(); ++x) m.set(y, x, g.at(y, x, 0) > 0.5);
  return m;
}

}  // namespace

TEST_SUITE("losses") {
  TEST_CASE("binary cross-entropy examples") {
    std::mt19937_64 rng(1);
    const ImageGrid t = binary_grid(rng, 8, 8);
    CHECK(bce(t, t) <= 1e-6);
    const ImageGrid half(8, 8, 1, Domain::feature, 0.5);
    CHECK(bce(half, t) == doctest::Approx(std::log(2.0)).epsilon(1e-14));
    const ImageGrid ones(8, 8, 1, Domain::feature, 1.0), p9(8, 8, 1, Domain::feature, 0.9);
    CHECK(bce(p9, ones) == doctest::Approx(-std::log(0.9)).epsilon(1e-14));
    CHECK(bce(p9, ones) == doctest::Approx(0.105361).epsilon(1e-5));
    const ImageGrid bad(8, 8, 1, Domain::feature, 1.5);
    CHECK_THROWS_AS(bce(p9, bad), ContractError);
    const ImageGrid other(4, 4, 1, Domain::feature, 0.5);
    CHECK_THROWS_AS(bce(p9, other), ShapeError);
  }

  TEST_CASE("soft IoU examples") {
    std::mt19937_64 rng(2);
    const ImageGrid t = binary_grid(rng, 6, 6);
    CHECK(iou_loss(t, t) <= 1e-12);
    const ImageGrid ones(6, 6, 1, Domain::feature, 1.0), zero(6, 6, 1, Domain::feature, 0.0);
    CHECK(iou_loss(zero, ones) == doctest::Approx(1.0 - 1.0 / 37.0).epsilon(1e-14));
    ImageGrid left = zero, right = zero;
    for (int y = 0; y < 6; ++y)
      for (int x = 0; x < 3; ++x) {
        left.at(y, x, 0) = 1.0;
        right.at(y, x + 3, 0) = 1.0;
      }
    CHECK(iou_loss(left, right) == doctest::Approx(1.0 - 1.0 / 37.0).epsilon(1e-14));
  }

  TEST_CASE("pyramid extents and majority pooling") {
    CHECK(level_extent(128, 128, 1) == std::pair{128, 128});
    CHECK(level_extent(128, 128, 4) == std::pair{16, 16});
    CHECK(level_extent(5, 7, 2) == std::pair{3, 4});
    BinaryMask m(2, 2);
    m.set(0, 0, true);
    m.set(1, 1, true);
    CHECK(downsample_majority(m).foreground(0, 0));
    m.set(1, 1, false);
    CHECK_FALSE(downsample_majority(m).foreground(0, 0));
    std::mt19937_64 rng(3);
    const ImageGrid g = binary_grid(rng, 9, 11);
    const auto pyr = mask_pyramid(as_mask(g));
    ImageGrid level = g;
    for (int l = 1; l < kLevels; ++l) {
      level = hp::pool(level);
      const auto [h, w] = level_extent(9, 11, l + 1);
      REQUIRE(pyr[l].height() == h);
      REQUIRE(pyr[l].width() == w);
      for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x) CHECK(pyr[l].foreground(y, x) == (level.at(y, x, 0) > 0.5));
    }
  }

  TEST_CASE("deep supervision examples") {
    std::mt19937_64 rng(4);
    const ImageGrid g = binary_grid(rng, 32, 32);
    const BinaryMask gt = as_mask(g);
    const auto pyr = mask_pyramid(gt);
    std::array<ImageGrid, kLevels> perfect, half;
    for (int l = 0; l < kLevels; ++l) {
      ImageGrid p(pyr[l].height(), pyr[l].width(), 1, Domain::feature, 0.0);
      for (int y = 0; y < p.height(); ++y)
        for (int x = 0; x < p.width(); ++x) p.at(y, x, 0) = pyr[l].foreground(y, x) ? 1.0 : 0.0;
      perfect[l] = p;
      half[l] = ImageGrid(p.height(), p.width(), 1, Domain::feature, 0.5);
    }
    CHECK(deep_seg_loss(perfect, gt).total <= 1e-5);

    auto wrong = perfect;
    wrong[0] = ImageGrid(32, 32, 1, Domain::feature, 0.3);
    const auto s = deep_seg_loss(wrong, gt);
    CHECK(s.total == doctest::Approx(bce(wrong[0], perfect[0]) + iou_loss(wrong[0], perfect[0]) +
                                     0.5 * (s.bce[1] + s.iou[1]) + 0.25 * (s.bce[2] + s.iou[2]) +
                                     0.125 * (s.bce[3] + s.iou[3]))
                           .epsilon(1e-14));
    CHECK(s.bce[1] + s.bce[2] + s.bce[3] <= 1e-5);

    const auto u = deep_seg_loss(half, gt);
    double bce_part = 0, iou_part = 0, w = 1;
    for (int l = 0; l < kLevels; ++l, w /= 2) {
      bce_part += w * u.bce[l];
      iou_part += w * u.iou[l];
    }
    CHECK(bce_part == doctest::Approx(1.875 * std::log(2.0)).epsilon(1e-14));
    CHECK(bce_part == doctest::Approx(1.29966).epsilon(1e-5));
    CHECK(u.total == doctest::Approx(bce_part + iou_part).epsilon(1e-14));
  }

  TEST_CASE("boundary loss examples") {
    std::mt19937_64 rng(5);
    const ImageGrid t = binary_grid(rng, 10, 10);
    const ImageGrid half(10, 10, 1, Domain::feature, 0.5);
    CHECK(boundary_loss(t, t, t) <= 2e-6);
    CHECK(boundary_loss(t, half, t) == doctest::Approx(std::log(2.0)).epsilon(1e-6));
    const ImageGrid a = probs(rng, 10, 10), b = probs(rng, 10, 10);
    CHECK(boundary_loss(a, b, t) == boundary_loss(b, a, t));
  }

  TEST_CASE("masked pooling examples") {
    std::mt19937_64 rng(6);
    const ImageGrid f = ridekit::testing::random_grid(rng, 5, 6, 3, Domain::feature, -1, 1);
    const ImageGrid all(5, 6, 1, Domain::feature, 1.0);
    auto p = masked_pool(f, all);
    std::vector<double> mean(3, 0.0);
    for (int y = 0; y < 5; ++y)
      for (int x = 0; x < 6; ++x)
        for (int c = 0; c < 3; ++c) mean[c] += f.at(y, x, c);
    const double nm = std::sqrt(std::inner_product(mean.begin(), mean.end(), mean.begin(), 0.0));
    for (int c = 0; c < 3; ++c) CHECK(p.vector[c] == doctest::Approx(mean[c] / nm).epsilon(1e-12));
    CHECK_FALSE(p.empty_mask);

    ImageGrid one(5, 6, 1, Domain::feature, 0.0);
    one.at(2, 3, 0) = 1.0;
    p = masked_pool(f, one);
    double n = 0;
    for (int c = 0; c < 3; ++c) n += f.at(2, 3, c) * f.at(2, 3, c);
    for (int c = 0; c < 3; ++c) CHECK(p.vector[c] == doctest::Approx(f.at(2, 3, c) / std::sqrt(n)).epsilon(1e-12));

    const ImageGrid none(5, 6, 1, Domain::feature, 0.0);
    p = masked_pool(f, none);
    CHECK(p.empty_mask);
    for (double v : p.vector) CHECK(v == 0.0);
  }

  TEST_CASE("pooled vectors have unit norm") {
    std::mt19937_64 rng(7);
    for (int t = 0; t < 200; ++t) {
      const ImageGrid f = ridekit::testing::random_grid(rng, 6, 6, 3, Domain::feature, -5, 5);
      const ImageGrid m = ridekit::testing::random_grid(rng, 6, 6, 1, Domain::feature, 0, 1);
      const auto p = masked_pool(f, m);
      const double n = std::sqrt(std::inner_product(p.vector.begin(), p.vector.end(), p.vector.begin(), 0.0));
      CHECK(std::abs(n - 1.0) <= 1e-9);
    }
  }

  TEST_CASE("InfoNCE closed forms") {
    const std::vector<double> zero{0.0};
    const double expect = -std::log(std::exp(10.0) / (std::exp(10.0) + 1.0));
    CHECK(std::abs(infonce_from_similarities(1.0, zero, 0.1) - expect) <= 1e-9 * expect);
    CHECK(infonce_from_similarities(1.0, zero, 0.1) == doctest::Approx(4.53989e-5).epsilon(1e-5));
    const std::vector<double> same{0.37};
    CHECK(std::abs(infonce_from_similarities(0.37, same, 0.1) - std::log(2.0)) <= 1e-9);
    std::mt19937_64 rng(8);
    for (int j : {1, 4, 8, 16}) {
      const auto b = random_batch(rng, 8, j, 1e6);
      CHECK(std::abs(infonce(b) - std::log(j + 1.0)) <= 1e-6);
    }
    const std::vector<double> big{-1.0, 1.0};
    CHECK(std::isfinite(infonce_from_similarities(1.0, big, 1e-4)));
  }

  TEST_CASE("InfoNCE is monotone in the similarities") {
    std::mt19937_64 rng(9);
    std::uniform_real_distribution<double> u(-1, 1);
    for (int t = 0; t < 200; ++t) {
      std::vector<double> neg(5);
      for (double& v : neg) v = u(rng);
      const double pos = u(rng) * 0.9;
      const double base = infonce_from_similarities(pos, neg, 0.2);
      CHECK(infonce_from_similarities(pos + 0.05, neg, 0.2) < base);
      auto up = neg;
      up[t % 5] += 0.05;
      CHECK(infonce_from_similarities(pos, up, 0.2) > base);
    }
  }

  TEST_CASE("contrast batches are validated") {
    std::mt19937_64 rng(10);
    auto b = random_batch(rng, 4, 2, 0.1);
    b.pos_a[0] *= 1.01;
    CHECK_THROWS_AS(infonce(b), ContractError);
    b = random_batch(rng, 4, 2, 0.1);
    b.negatives.clear();
    CHECK_THROWS_AS(infonce(b), ContractError);
    b = random_batch(rng, 4, 2, 0.0);
    CHECK_THROWS_AS(infonce(b), ContractError);
    b = random_batch(rng, 4, 2, 0.1);
    b.negatives[1].push_back(0.0);
    CHECK_THROWS_AS(infonce(b), ContractError);
  }

  TEST_CASE("total loss is a plain sum") {
    CHECK(total_loss({}) == 0.0);
    CHECK(total_loss({0, 2.5, 0, 0}) == 2.5);
    CHECK(total_loss({1, 2, 3, 4}) == total_loss({4, 3, 2, 1}));
    CHECK(total_loss({0.1, 0.2, 0.3, 0.4}) == doctest::Approx(1.0).epsilon(1e-15));
  }

  TEST_CASE("cross-entropy is convex under mixing") {
    std::mt19937_64 rng(11);
    for (int t = 0; t < 200; ++t) {
      const ImageGrid tg = binary_grid(rng, 5, 5);
      const ImageGrid a = probs(rng, 5, 5), b = probs(rng, 5, 5);
      ImageGrid mid = a;
      for (std::size_t i = 0; i < mid.size(); ++i) mid.values()[i] = 0.5 * (a.values()[i] + b.values()[i]);
      CHECK(bce(mid, tg) <= 0.5 * bce(a, tg) + 0.5 * bce(b, tg) + 1e-15);
    }
  }

  TEST_CASE("evaluators match an extended-precision oracle") {
    std::mt19937_64 rng(12);
    std::uniform_int_distribution<int> side(4, 12);
    for (int t = 0; t < 50; ++t) {
      const int h = side(rng), w = side(rng);
      const ImageGrid tg = binary_grid(rng, h, w), soft = ridekit::testing::random_grid(rng, h, w, 1, Domain::feature, 0, 1);
      const ImageGrid p = probs(rng, h, w), q = probs(rng, h, w);
      CHECK(rel(bce(p, tg), hp::bce(p, tg)) <= 1e-10);
      CHECK(rel(bce(p, soft), hp::bce(p, soft)) <= 1e-10);
      CHECK(rel(iou_loss(p, tg), hp::iou(p, tg)) <= 1e-10);
      CHECK(rel(boundary_loss(p, q, tg), hp::bce(p, tg) + hp::bce(q, tg)) <= 1e-10);

      const int H = 8 * side(rng), W = 8 * side(rng);
      const ImageGrid g = binary_grid(rng, H, W);
      std::array<ImageGrid, kLevels> preds;
      std::vector<ImageGrid> pv;
      for (int l = 0; l < kLevels; ++l) {
        const auto [lh, lw] = level_extent(H, W, l + 1);
        preds[l] = probs(rng, lh, lw);
        pv.push_back(preds[l]);
      }
      CHECK(rel(deep_seg_loss(preds, as_mask(g)).total, hp::deep_seg(pv, g)) <= 1e-10);

      const ImageGrid f = ridekit::testing::random_grid(rng, h, w, 3, Domain::feature, -2, 2);
      const ImageGrid m = ridekit::testing::random_grid(rng, h, w, 1, Domain::feature, 0, 1);
      const auto pooled = masked_pool(f, m);
      const auto oracle = hp::masked_pool(f, m);
      for (int c = 0; c < 3; ++c) CHECK(std::abs(pooled.vector[c] - oracle[c]) <= 1e-10 * std::abs(oracle[c]) + 1e-15);

      const auto batch = random_batch(rng, 16, 8, 0.1);
      CHECK(rel(infonce(batch), hp::infonce(batch.pos_a, batch.pos_b, batch.negatives, batch.tau)) <= 1e-10);

      const ImageGrid I = ridekit::testing::random_grid(rng, h, w, 3, Domain::composite, 0, 1);
      const ImageGrid L = ridekit::testing::random_grid(rng, h, w, 1, Domain::illumination, 0.2, 1.5);
      const ImageGrid R = ridekit::testing::random_grid(rng, h, w, 3, Domain::reflectance, 0, 1);
      retinex::Weights wts;
      const auto got = retinex::retinex_loss(I, L, R, wts);
      const auto ref = hp::retinex(I, L, R, wts.charbonnier_eps);
      CHECK(rel(got.rec, ref.rec) <= 1e-10);
      CHECK(rel(got.smooth_l, ref.smooth) <= 1e-10);
      CHECK(rel(got.tv_r, ref.tv) <= 1e-10);
      CHECK(rel(got.me, ref.me) <= 1e-10);
    }
  }
}
