#pragma once

#include <algorithm>
#include <boost/multiprecision/cpp_bin_float.hpp>
#include <vector>

#include "ridekit/image.hpp"

namespace ridekit::testing::hp {

using Real = boost::multiprecision::cpp_bin_float_50;

inline Real clampp(double p) {
  const double lo = 1e-7, hi = 1.0 - 1e-7;
  return Real(std::clamp(p, lo, hi));
}

inline double bce(const ImageGrid& p, const ImageGrid& t) {
  Real s = 0;
  for (std::size_t i = 0; i < p.size(); ++i) {
    const Real q = clampp(p.values()[i]);
    const Real y = t.values()[i];
    s -= y * log(q) + (1 - y) * log(1 - q);
  }
  return static_cast<double>(s / p.size());
}

inline double iou(const ImageGrid& p, const ImageGrid& t, double smooth = 1.0) {
  Real pt = 0, sp = 0, st = 0;
  for (std::size_t i = 0; i < p.size(); ++i) {
    pt += Real(p.values()[i]) * Real(t.values()[i]);
    sp += p.values()[i];
    st += t.values()[i];
  }
  return static_cast<double>(1 - (pt + smooth) / (sp + st - pt + smooth));
}

/// Majority pooling of a 0/1 grid with ties to foreground, done independently
/// of the library.
inline ImageGrid pool(const ImageGrid& m) {
  const int h = (m.height() + 1) / 2, w = (m.width() + 1) / 2;
  ImageGrid out(h, w, 1, Domain::feature, 0.0);
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) {
      int ones = 0, n = 0;
      for (int dy = 0; dy < 2; ++dy)
        for (int dx = 0; dx < 2; ++dx) {
          const int yy = 2 * y + dy, xx = 2 * x + dx;
          if (yy >= m.height() || xx >= m.width()) continue;
          ++n;
          ones += m.at(yy, xx, 0) > 0.5;
        }
      out.at(y, x, 0) = 2 * ones >= n ? 1.0 : 0.0;
    }
  return out;
}

inline double deep_seg(const std::vector<ImageGrid>& preds, const ImageGrid& gt) {
  Real total = 0, weight = 1;
  ImageGrid level = gt;
  for (std::size_t l = 0; l < preds.size(); ++l) {
    if (l > 0) level = pool(level);
    total += weight * (Real(bce(preds[l], level)) + Real(iou(preds[l], level)));
    weight /= 2;
  }
  return static_cast<double>(total);
}

inline std::vector<double> masked_pool(const ImageGrid& f, const ImageGrid& m, double eps = 1e-6) {
  std::vector<Real> acc(f.channels(), Real(0));
  Real ms = 0;
  for (int y = 0; y < f.height(); ++y)
    for (int x = 0; x < f.width(); ++x) {
      const Real w = m.at(y, x, 0);
      ms += w;
      for (int c = 0; c < f.channels(); ++c) acc[c] += Real(f.at(y, x, c)) * w;
    }
  Real norm = 0;
  for (auto& a : acc) {
    a /= ms + eps;
    norm += a * a;
  }
  norm = sqrt(norm);
  std::vector<double> out;
  for (const auto& a : acc) out.push_back(norm > 0 ? static_cast<double>(a / norm) : 0.0);
  return out;
}

inline Real cosine(const std::vector<double>& a, const std::vector<double>& b) {
  Real ab = 0, aa = 0, bb = 0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    ab += Real(a[i]) * Real(b[i]);
    aa += Real(a[i]) * Real(a[i]);
    bb += Real(b[i]) * Real(b[i]);
  }
  return ab / sqrt(aa * bb);
}

inline double infonce_sims(const Real& pos, const std::vector<Real>& neg, const Real& tau) {
  const Real e = exp(pos / tau);
  Real den = e;
  for (const auto& s : neg) den += exp(s / tau);
  return static_cast<double>(-log(e / den));
}

inline double infonce(const std::vector<double>& a, const std::vector<double>& b,
                      const std::vector<std::vector<double>>& negs, double tau) {
  std::vector<Real> sn;
  for (const auto& n : negs) sn.push_back(cosine(a, n));
  return infonce_sims(cosine(a, b), sn, Real(tau));
}

struct RetinexTerms {
  double rec, smooth, tv, me;
};

inline Real charb(const Real& x, const Real& eps) { return sqrt(x * x + eps * eps) - eps; }

inline RetinexTerms retinex(const ImageGrid& I, const ImageGrid& L, const ImageGrid& R, double eps_d) {
  const int h = I.height(), w = I.width(), c = I.channels();
  const Real eps = eps_d;
  Real rec = 0, sm = 0, tv = 0, me = 0;
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) {
      for (int k = 0; k < c; ++k) rec += charb(Real(I.at(y, x, k)) - Real(L.at(y, x, 0)) * Real(R.at(y, x, k)), eps);
      const int dys[2] = {0, 1}, dxs[2] = {1, 0};
      for (int d = 0; d < 2; ++d) {
        const int yy = y + dys[d], xx = x + dxs[d];
        if (yy >= h || xx >= w) continue;
        const Real gl = Real(L.at(yy, xx, 0)) - Real(L.at(y, x, 0));
        sm += gl * gl;
        Real rsum = 0;
        for (int k = 0; k < c; ++k) rsum += charb(Real(R.at(yy, xx, k)) - Real(R.at(y, x, k)), eps);
        tv += rsum;
        me += charb(gl, eps) * rsum;
      }
    }
  const Real n = Real(h) * w;
  return {static_cast<double>(rec / n), static_cast<double>(sm / n), static_cast<double>(tv / n),
          static_cast<double>(me / n)};
}

}  // namespace ridekit::testing::hp
