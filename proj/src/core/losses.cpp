#include "ridekit/losses.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "ridekit/errors.hpp"

namespace ridekit::losses {

namespace {

void require_pair(const ImageGrid& pred, const ImageGrid& target) {
  if (pred.empty()) throw ShapeError("loss inputs are empty");
  if (!pred.same_shape(target)) throw ShapeError("prediction and target shapes differ");
  for (double v : pred.values()) {
    if (!std::isfinite(v)) throw ContractError("prediction contains a non-finite value");
  }
  for (double t : target.values()) {
    if (!(t >= 0.0 && t <= 1.0)) throw ContractError("targets must lie in [0,1]");
  }
}

double clamp_prob(double p) { return std::clamp(p, kProbClamp, 1.0 - kProbClamp); }

void require_level(const ImageGrid& g, int h, int w, int level) {
  if (g.height() != h || g.width() != w) {
    throw ShapeError("level " + std::to_string(level) + " must be " + std::to_string(h) + "x" + std::to_string(w));
  }
}

}  // namespace

double bce(const ImageGrid& pred, const ImageGrid& target) {
  require_pair(pred, target);
  auto p = pred.values();
  auto t = target.values();
  double acc = 0.0;
  for (std::size_t i = 0; i < p.size(); ++i) {
    const double q = clamp_prob(p[i]);
    acc -= t[i] * std::log(q) + (1.0 - t[i]) * std::log1p(-q);
  }
  return acc / static_cast<double>(p.size());
}

double iou_loss(const ImageGrid& pred, const ImageGrid& target, double smooth) {
  require_pair(pred, target);
  if (!(smooth > 0.0)) throw ParameterError("IoU smoothing must be > 0");
  auto p = pred.values();
  auto t = target.values();
  double inter = 0.0, sp = 0.0, st = 0.0;
  for (std::size_t i = 0; i < p.size(); ++i) {
    inter += p[i] * t[i];
    sp += p[i];
    st += t[i];
  }
  return 1.0 - (inter + smooth) / (sp + st - inter + smooth);
}

std::pair<int, int> level_extent(int height, int width, int level) {
  if (level < 1) throw ParameterError("pyramid levels start at 1");
  if (height < 1 || width < 1) throw ShapeError("pyramid base must be non-empty");
  for (int l = 1; l < level; ++l) {
    height = (height + 1) / 2;
    width = (width + 1) / 2;
  }
  return {height, width};
}

BinaryMask downsample_majority(const BinaryMask& mask) {
  const int h = mask.height();
  const int w = mask.width();
  const auto [oh, ow] = level_extent(h, w, 2);
  BinaryMask out(oh, ow);
  for (int y = 0; y < oh; ++y) {
    for (int x = 0; x < ow; ++x) {
      int fg = 0, n = 0;
      for (int dy = 0; dy < 2; ++dy) {
        for (int dx = 0; dx < 2; ++dx) {
          const int yy = 2 * y + dy;
          const int xx = 2 * x + dx;
          if (yy >= h || xx >= w) continue;
          ++n;
          fg += mask.foreground(yy, xx) ? 1 : 0;
        }
      }
      out.set(y, x, 2 * fg >= n);
    }
  }
  return out;
}

std::array<BinaryMask, kLevels> mask_pyramid(const BinaryMask& mask) {
  std::array<BinaryMask, kLevels> out;
  out[0] = mask;
  for (int l = 1; l < kLevels; ++l) out[l] = downsample_majority(out[l - 1]);
  return out;
}

SegLoss deep_seg_loss(const std::array<ImageGrid, kLevels>& preds, const std::array<BinaryMask, kLevels>& gts) {
  SegLoss s;
  const int h = gts[0].height();
  const int w = gts[0].width();
  double weight = 1.0;
  for (int l = 0; l < kLevels; ++l) {
    const auto [lh, lw] = level_extent(h, w, l + 1);
    require_level(preds[l], lh, lw, l + 1);
    if (gts[l].height() != lh || gts[l].width() != lw) throw ShapeError("ground-truth pyramid has wrong extents");
    if (preds[l].channels() != 1) throw ShapeError("mask predictions must be single-channel");
    const ImageGrid t = gts[l].to_grid();
    s.bce[l] = bce(preds[l], t);
    s.iou[l] = iou_loss(preds[l], t);
    s.total += weight * (s.bce[l] + s.iou[l]);
    weight *= 0.5;
  }
  return s;
}

SegLoss deep_seg_loss(const std::array<ImageGrid, kLevels>& preds, const BinaryMask& gt) {
  return deep_seg_loss(preds, mask_pyramid(gt));
}

double boundary_loss(const ImageGrid& boundary, const ImageGrid& refl_boundary, const ImageGrid& gt) {
  return bce(boundary, gt) + bce(refl_boundary, gt);
}

Pooled masked_pool(const ImageGrid& features, const ImageGrid& mask) {
  if (!features.same_extent(mask)) throw ShapeError("feature and mask extents differ");
  if (mask.channels() != 1) throw ShapeError("pooling mask must be single-channel");
  if (features.empty()) throw ShapeError("pooling input is empty");
  const int ch = features.channels();
  const std::size_t n = features.pixel_count();
  auto f = features.values();
  auto m = mask.values();
  for (double v : m) {
    if (!(v >= 0.0 && v <= 1.0)) throw ContractError("pooling mask values must lie in [0,1]");
  }
  Pooled out;
  out.vector.assign(static_cast<std::size_t>(ch), 0.0);
  double msum = 0.0;
  for (std::size_t p = 0; p < n; ++p) {
    msum += m[p];
    for (int c = 0; c < ch; ++c) out.vector[c] += f[p * ch + c] * m[p];
  }
  if (msum == 0.0) {
    out.empty_mask = true;
    std::fill(out.vector.begin(), out.vector.end(), 0.0);
    return out;
  }
  double norm = 0.0;
  for (double& v : out.vector) {
    v /= msum + kPoolEps;
    norm += v * v;
  }
  norm = std::sqrt(norm);
  if (norm == 0.0) {
    out.empty_mask = true;
    return out;
  }
  for (double& v : out.vector) v /= norm;
  return out;
}

void ContrastBatch::validate() const {
  if (!(tau > 0.0) || !std::isfinite(tau)) throw ContractError("tau must be a positive finite number");
  if (negatives.empty()) throw ContractError("at least one negative is required");
  if (pos_a.empty()) throw ContractError("contrast vectors are empty");
  const auto check = [&](const std::vector<double>& v, const char* what) {
    if (v.size() != pos_a.size()) throw ContractError(std::string(what) + " has a different length");
    double n = 0.0;
    for (double x : v) {
      if (!std::isfinite(x)) throw ContractError(std::string(what) + " has a non-finite entry");
      n += x * x;
    }
    if (std::abs(std::sqrt(n) - 1.0) > kUnitNormTol) throw ContractError(std::string(what) + " is not unit norm");
  };
  check(pos_a, "positive a");
  check(pos_b, "positive b");
  for (const auto& v : negatives) check(v, "negative");
}

double cosine(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size()) throw ShapeError("cosine inputs differ in length");
  double ab = 0.0, aa = 0.0, bb = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    ab += a[i] * b[i];
    aa += a[i] * a[i];
    bb += b[i] * b[i];
  }
  if (aa == 0.0 || bb == 0.0) throw ContractError("cosine of a zero vector");
  return ab / std::sqrt(aa * bb);
}

double infonce_from_similarities(double sim_pos, std::span<const double> sim_neg, double tau) {
  if (!(tau > 0.0)) throw ContractError("tau must be > 0");
  if (sim_neg.empty()) throw ContractError("at least one negative is required");
  const double zp = sim_pos / tau;
  double zmax = zp;
  for (double s : sim_neg) zmax = std::max(zmax, s / tau);
  if (zmax == zp) {
    double rest = 0.0;
    for (double s : sim_neg) rest += std::exp(s / tau - zp);
    return std::log1p(rest);
  }
  double sum = std::exp(zp - zmax);
  for (double s : sim_neg) sum += std::exp(s / tau - zmax);
  return zmax + std::log(sum) - zp;
}

double infonce(const ContrastBatch& batch) {
  batch.validate();
  const double sp = cosine(batch.pos_a, batch.pos_b);
  std::vector<double> sn;
  sn.reserve(batch.negatives.size());
  for (const auto& v : batch.negatives) sn.push_back(cosine(batch.pos_a, v));
  return infonce_from_similarities(sp, sn, batch.tau);
}

double total_loss(const LossParts& parts) { return parts.seg + parts.ret + parts.bnd + parts.con; }

}  // namespace ridekit::losses
