#include "ridekit/retinex.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>
#include <string>

#include "ridekit/errors.hpp"

namespace ridekit::retinex {

namespace {

constexpr double kIlluminationFloor = 0.01;
constexpr double kInitBlurSigma = 3.0;
// Reflectance is kept this far from {0,1} when mapped to logits so the
// sigmoid derivative does not vanish at the starting point.
constexpr double kLogitMargin = 1e-3;
constexpr double kArmijoC = 1e-4;
constexpr double kShrink = 0.5;
constexpr int kMaxBacktracks = 60;

double softplus(double a) { return a > 0.0 ? a + std::log1p(std::exp(-a)) : std::log1p(std::exp(a)); }

double softplus_inverse(double l) { return l + std::log(-std::expm1(-l)); }

double sigmoid(double b) {
  if (b >= 0.0) return 1.0 / (1.0 + std::exp(-b));
  const double e = std::exp(b);
  return e / (1.0 + e);
}

double logit(double r) { return std::log(r / (1.0 - r)); }

/// Evaluates the Retinex objective on constrained fields (L, R) and, when
/// requested, its gradient with respect to L and R.
class Objective {
 public:
  Objective(const ImageGrid& composite, const Weights& w)
      : img_(composite.values()),
        h_(composite.height()),
        w_(composite.width()),
        c_(composite.channels()),
        weights_(w),
        inv_n_(1.0 / static_cast<double>(composite.pixel_count())) {}

  std::size_t pixels() const { return static_cast<std::size_t>(h_) * w_; }
  std::size_t values() const { return pixels() * c_; }
  int channels() const { return c_; }

  LossBreakdown evaluate(const double* L, const double* R, double* dL, double* dR) const {
    const double eps = weights_.charbonnier_eps;
    const double e2 = eps * eps;
    const bool grad = dL != nullptr;
    const std::size_t n = pixels();
    if (grad) {
      std::fill(dL, dL + n, 0.0);
      std::fill(dR, dR + n * c_, 0.0);
    }

    double rec = 0.0;
    double smooth = 0.0;
    double tv = 0.0;
    double me = 0.0;

    const double k_rec = weights_.rec * inv_n_;
    for (std::size_t p = 0; p < n; ++p) {
      const double l = L[p];
      for (int c = 0; c < c_; ++c) {
        const std::size_t i = p * c_ + c;
        const double r = img_[i] - l * R[i];
        const double s = std::sqrt(r * r + e2);
        rec += s - eps;
        if (grad) {
          const double g = k_rec * r / s;
          dL[p] -= g * R[i];
          dR[i] -= g * l;
        }
      }
    }

    const double k_smooth = 2.0 * weights_.smooth_l * inv_n_;
    const double k_tv = weights_.tv_r * inv_n_;
    const double k_me = weights_.me * inv_n_;
    for (int y = 0; y < h_; ++y) {
      for (int x = 0; x < w_; ++x) {
        const std::size_t p = static_cast<std::size_t>(y) * w_ + x;
        for (int d = 0; d < 2; ++d) {
          if (d == 0 && x + 1 >= w_) continue;
          if (d == 1 && y + 1 >= h_) continue;
          const std::size_t q = d == 0 ? p + 1 : p + static_cast<std::size_t>(w_);
          const double gl = L[q] - L[p];
          smooth += gl * gl;
          const double sl = std::sqrt(gl * gl + e2);
          const double phi_l = sl - eps;
          double phi_r_sum = 0.0;
          for (int c = 0; c < c_; ++c) {
            const double gr = R[q * c_ + c] - R[p * c_ + c];
            const double sr = std::sqrt(gr * gr + e2);
            phi_r_sum += sr - eps;
            if (grad) {
              const double coef = (gr / sr) * (k_tv + k_me * phi_l);
              dR[q * c_ + c] += coef;
              dR[p * c_ + c] -= coef;
            }
          }
          tv += phi_r_sum;
          me += phi_l * phi_r_sum;
          if (grad) {
            const double coef = k_smooth * gl + k_me * (gl / sl) * phi_r_sum;
            dL[q] += coef;
            dL[p] -= coef;
          }
        }
      }
    }

    LossBreakdown out;
    out.rec = rec * inv_n_;
    out.smooth_l = smooth * inv_n_;
    out.tv_r = tv * inv_n_;
    out.me = me * inv_n_;
    out.total = weights_.rec * out.rec + weights_.smooth_l * out.smooth_l + weights_.tv_r * out.tv_r +
                weights_.me * out.me;
    return out;
  }

 private:
  std::span<const double> img_;
  int h_;
  int w_;
  int c_;
  Weights weights_;
  double inv_n_;
};

/// Objective composed with L = softplus(a), R = sigmoid(b) over the packed
/// parameter vector x = [a; b].
class ParamObjective {
 public:
  ParamObjective(const ImageGrid& composite, const Weights& w)
      : obj_(composite, w), L_(obj_.pixels()), R_(obj_.values()), dL_(obj_.pixels()), dR_(obj_.values()) {}

  std::size_t dim() const { return L_.size() + R_.size(); }

  LossBreakdown evaluate(const double* x, double* g) {
    const std::size_t na = L_.size();
    for (std::size_t p = 0; p < na; ++p) L_[p] = softplus(x[p]);
    for (std::size_t i = 0; i < R_.size(); ++i) R_[i] = sigmoid(x[na + i]);
    if (g == nullptr) return obj_.evaluate(L_.data(), R_.data(), nullptr, nullptr);
    const LossBreakdown loss = obj_.evaluate(L_.data(), R_.data(), dL_.data(), dR_.data());
    for (std::size_t p = 0; p < na; ++p) g[p] = dL_[p] * -std::expm1(-L_[p]);
    for (std::size_t i = 0; i < R_.size(); ++i) g[na + i] = dR_[i] * R_[i] * (1.0 - R_[i]);
    return loss;
  }

  const std::vector<double>& illumination() const { return L_; }
  const std::vector<double>& reflectance() const { return R_; }

 private:
  Objective obj_;
  std::vector<double> L_;
  std::vector<double> R_;
  std::vector<double> dL_;
  std::vector<double> dR_;
};

double dot(const double* a, const double* b, std::size_t n) {
  double s0 = 0.0, s1 = 0.0, s2 = 0.0, s3 = 0.0;
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    s0 += a[i] * b[i];
    s1 += a[i + 1] * b[i + 1];
    s2 += a[i + 2] * b[i + 2];
    s3 += a[i + 3] * b[i + 3];
  }
  for (; i < n; ++i) s0 += a[i] * b[i];
  return (s0 + s1) + (s2 + s3);
}

/// Limited-memory BFGS curvature pairs kept in a ring buffer.
class QuasiNewtonMemory {
 public:
  QuasiNewtonMemory(int capacity, std::size_t dim)
      : capacity_(static_cast<std::size_t>(capacity)),
        dim_(dim),
        s_(capacity_ * dim),
        y_(capacity_ * dim),
        rho_(capacity_),
        alpha_(capacity_) {}

  std::size_t size() const { return count_; }
  void clear() { count_ = 0; }

  /// Records s = x1 - x0, y = g1 - g0 unless the curvature condition fails.
  void push(const double* x0, const double* x1, const double* g0, const double* g1) {
    if (capacity_ == 0) return;
    const std::size_t slot = (head_ + count_) % capacity_;
    double* s = &s_[slot * dim_];
    double* y = &y_[slot * dim_];
    for (std::size_t i = 0; i < dim_; ++i) {
      s[i] = x1[i] - x0[i];
      y[i] = g1[i] - g0[i];
    }
    const double sy = dot(s, y, dim_);
    const double yy = dot(y, y, dim_);
    const double ss = dot(s, s, dim_);
    // Skipping pairs with too little curvature keeps the implicit inverse
    // Hessian positive definite.
    if (!(sy > 1e-10 * std::sqrt(ss * yy))) return;
    rho_[slot] = 1.0 / sy;
    gamma_ = sy / yy;
    if (count_ < capacity_) {
      ++count_;
    } else {
      head_ = (head_ + 1) % capacity_;
    }
  }

  /// Two-loop recursion: v <- H v.
  void apply_inverse_hessian(double* v) {
    for (std::size_t k = count_; k-- > 0;) {
      const std::size_t slot = (head_ + k) % capacity_;
      const double* s = &s_[slot * dim_];
      const double* y = &y_[slot * dim_];
      alpha_[k] = rho_[slot] * dot(s, v, dim_);
      for (std::size_t i = 0; i < dim_; ++i) v[i] -= alpha_[k] * y[i];
    }
    for (std::size_t i = 0; i < dim_; ++i) v[i] *= gamma_;
    for (std::size_t k = 0; k < count_; ++k) {
      const std::size_t slot = (head_ + k) % capacity_;
      const double* s = &s_[slot * dim_];
      const double* y = &y_[slot * dim_];
      const double beta = rho_[slot] * dot(y, v, dim_);
      for (std::size_t i = 0; i < dim_; ++i) v[i] += (alpha_[k] - beta) * s[i];
    }
  }

 private:
  std::size_t capacity_;
  std::size_t dim_;
  std::vector<double> s_;
  std::vector<double> y_;
  std::vector<double> rho_;
  std::vector<double> alpha_;
  std::size_t head_ = 0;
  std::size_t count_ = 0;
  double gamma_ = 1.0;
};

void check_triplet(const ImageGrid& composite, const ImageGrid& illumination, const ImageGrid& reflectance) {
  if (illumination.channels() != 1) throw ShapeError("illumination must have a single channel");
  if (!composite.same_shape(reflectance)) throw ShapeError("reflectance shape must match the composite");
  if (!composite.same_extent(illumination)) throw ShapeError("illumination extent must match the composite");
}

void require_composite_range(const ImageGrid& composite) {
  for (double v : composite.values()) {
    if (!(v >= 0.0 && v <= 1.0)) throw ContractError("composite values must lie in [0,1]");
  }
}

}  // namespace

void Weights::validate() const {
  if (rec < 0.0 || smooth_l < 0.0 || tv_r < 0.0 || me < 0.0) throw ParameterError("loss weights must be nonnegative");
  if (!(charbonnier_eps > 0.0)) throw ParameterError("charbonnier_eps must be positive");
}

void SolverConfig::validate() const {
  if (max_iters < 1) throw ParameterError("max_iters must be >= 1");
  if (!(step_size > 0.0)) throw ParameterError("step_size must be positive");
  if (tol_rel < 0.0) throw ParameterError("tol_rel must be >= 0");
  if (init_jitter < 0.0) throw ParameterError("init_jitter must be >= 0");
  if (history < 1) throw ParameterError("history must be >= 1");
}

std::string_view to_string(StopReason r) {
  switch (r) {
    case StopReason::max_iters:
      return "max_iters";
    case StopReason::tolerance:
      return "tolerance";
    case StopReason::line_search:
      return "line_search";
    case StopReason::stationary:
      return "stationary";
  }
  return "max_iters";
}

std::string_view to_string(Direction d) { return d == Direction::steepest ? "steepest" : "lbfgs"; }

Direction direction_from_string(std::string_view s) {
  if (s == "steepest") return Direction::steepest;
  if (s == "lbfgs") return Direction::lbfgs;
  throw ParameterError("unknown solver direction '" + std::string(s) + "'");
}

RetinexPair init_decomposition(const ImageGrid& composite) {
  require_composite_range(composite);
  ImageGrid smoothed = gaussian_blur(channel_max(composite).retagged(Domain::feature), kInitBlurSigma);
  std::vector<double> l(smoothed.values().begin(), smoothed.values().end());
  for (auto& v : l) v = std::max(v, kIlluminationFloor);

  const int ch = composite.channels();
  std::vector<double> r(composite.size());
  auto in = composite.values();
  for (std::size_t p = 0; p < l.size(); ++p) {
    for (int c = 0; c < ch; ++c) r[p * ch + c] = std::clamp(in[p * ch + c] / l[p], 0.0, 1.0);
  }
  RetinexPair pair;
  pair.illumination = ImageGrid(composite.height(), composite.width(), 1, Domain::illumination, std::move(l));
  pair.reflectance = ImageGrid(composite.height(), composite.width(), ch, Domain::reflectance, std::move(r));
  pair.loss = retinex_loss(composite, pair.illumination, pair.reflectance);
  pair.iterations = 0;
  return pair;
}

LossBreakdown retinex_loss(const ImageGrid& composite, const ImageGrid& illumination, const ImageGrid& reflectance,
                           const Weights& w) {
  w.validate();
  check_triplet(composite, illumination, reflectance);
  Objective obj(composite, w);
  return obj.evaluate(illumination.values().data(), reflectance.values().data(), nullptr, nullptr);
}

double me_loss(const ImageGrid& illumination, const ImageGrid& reflectance, double charbonnier_eps) {
  if (illumination.channels() != 1) throw ShapeError("illumination must have a single channel");
  if (!illumination.same_extent(reflectance)) throw ShapeError("illumination and reflectance extents differ");
  Weights w{.rec = 0.0, .smooth_l = 0.0, .tv_r = 0.0, .me = 1.0, .charbonnier_eps = charbonnier_eps};
  w.validate();
  // The reconstruction term is weighted out, so any same-shaped composite works.
  const ImageGrid dummy(reflectance.height(), reflectance.width(), reflectance.channels(), Domain::feature);
  Objective obj(dummy, w);
  return obj.evaluate(illumination.values().data(), reflectance.values().data(), nullptr, nullptr).me;
}

ParamGradients retinex_loss_gradients(const ImageGrid& composite, const ImageGrid& illumination,
                                      const ImageGrid& reflectance, const Weights& w) {
  w.validate();
  check_triplet(composite, illumination, reflectance);
  Objective obj(composite, w);
  std::vector<double> dl(obj.pixels());
  std::vector<double> dr(obj.values());
  obj.evaluate(illumination.values().data(), reflectance.values().data(), dl.data(), dr.data());
  auto l = illumination.values();
  auto r = reflectance.values();
  for (std::size_t p = 0; p < dl.size(); ++p) dl[p] *= -std::expm1(-l[p]);
  for (std::size_t i = 0; i < dr.size(); ++i) dr[i] *= r[i] * (1.0 - r[i]);
  return {ImageGrid(composite.height(), composite.width(), 1, Domain::feature, std::move(dl)),
          ImageGrid(composite.height(), composite.width(), composite.channels(), Domain::feature, std::move(dr))};
}

RetinexPair decompose(const ImageGrid& composite, const Weights& w, const SolverConfig& cfg) {
  w.validate();
  cfg.validate();
  const RetinexPair init = init_decomposition(composite);
  ParamObjective obj(composite, w);

  const std::size_t n = composite.pixel_count();
  const std::size_t dim = obj.dim();
  std::vector<double> x(dim);
  auto l0 = init.illumination.values();
  auto r0 = init.reflectance.values();
  for (std::size_t p = 0; p < n; ++p) x[p] = softplus_inverse(l0[p]);
  for (std::size_t i = 0; i < r0.size(); ++i) x[n + i] = logit(std::clamp(r0[i], kLogitMargin, 1.0 - kLogitMargin));
  if (cfg.init_jitter > 0.0) {
    std::mt19937_64 rng(cfg.seed);
    std::normal_distribution<double> noise(0.0, cfg.init_jitter);
    for (auto& v : x) v += noise(rng);
  }

  std::vector<double> g(dim);
  std::vector<double> xt(dim);
  std::vector<double> gt(dim);
  std::vector<double> dir(dim);
  QuasiNewtonMemory memory(cfg.direction == Direction::lbfgs ? cfg.history : 0, dim);

  LossBreakdown loss = obj.evaluate(x.data(), g.data());
  if (!std::isfinite(loss.total)) throw SolverError("objective is not finite at the initial point", 0);

  RetinexPair out;
  out.trace.push_back(loss.total);
  out.stop = StopReason::max_iters;
  // Gradients are of a per-pixel mean; scaling the steepest-descent
  // direction by the pixel count makes step_size a per-pixel step
  // independent of resolution.
  const double scale = static_cast<double>(n);
  int it = 0;
  while (it < cfg.max_iters) {
    const double g2 = dot(g.data(), g.data(), dim);
    if (g2 == 0.0) {
      out.stop = StopReason::stationary;
      break;
    }
    bool quasi_newton = memory.size() > 0;
    double slope = 0.0;
    double t = 1.0;
    if (quasi_newton) {
      for (std::size_t i = 0; i < dim; ++i) dir[i] = -g[i];
      memory.apply_inverse_hessian(dir.data());
      slope = dot(dir.data(), g.data(), dim);
      if (!(slope < 0.0)) {
        memory.clear();
        quasi_newton = false;
      }
    }
    if (!quasi_newton) {
      for (std::size_t i = 0; i < dim; ++i) dir[i] = -scale * g[i];
      slope = -scale * g2;
      t = cfg.step_size;
    }

    bool accepted = false;
    LossBreakdown trial;
    for (int k = 0; k < kMaxBacktracks; ++k) {
      for (std::size_t i = 0; i < dim; ++i) xt[i] = x[i] + t * dir[i];
      trial = obj.evaluate(xt.data(), gt.data());
      if (!std::isfinite(trial.total) && !quasi_newton) throw SolverError("objective diverged", it + 1);
      if (trial.total <= loss.total + kArmijoC * t * slope && trial.total < loss.total) {
        accepted = true;
        break;
      }
      t *= kShrink;
    }
    if (!accepted) {
      if (quasi_newton) {
        // Retry the same iteration along the steepest-descent direction.
        memory.clear();
        continue;
      }
      out.stop = StopReason::line_search;
      break;
    }
    ++it;
    memory.push(x.data(), xt.data(), g.data(), gt.data());
    const double rel = (loss.total - trial.total) / std::max(std::abs(loss.total), 1e-300);
    x.swap(xt);
    g.swap(gt);
    loss = trial;
    out.trace.push_back(loss.total);
    if (rel < cfg.tol_rel) {
      out.stop = StopReason::tolerance;
      break;
    }
  }

  obj.evaluate(x.data(), nullptr);
  std::vector<double> l(obj.illumination());
  // softplus underflows to 0 for very negative parameters.
  for (auto& v : l) v = std::max(v, std::numeric_limits<double>::min());
  std::vector<double> r(obj.reflectance());
  out.illumination = ImageGrid(composite.height(), composite.width(), 1, Domain::illumination, std::move(l));
  out.reflectance =
      ImageGrid(composite.height(), composite.width(), composite.channels(), Domain::reflectance, std::move(r));
  out.loss = loss;
  out.iterations = it;
  return out;
}

double reconstruction_error(const ImageGrid& composite, const ImageGrid& illumination, const ImageGrid& reflectance) {
  check_triplet(composite, illumination, reflectance);
  const int ch = composite.channels();
  auto in = composite.values();
  auto l = illumination.values();
  auto r = reflectance.values();
  double acc = 0.0;
  for (std::size_t i = 0; i < in.size(); ++i) acc += std::abs(in[i] - l[i / ch] * r[i]);
  return acc / static_cast<double>(in.size());
}

}  // namespace ridekit::retinex
