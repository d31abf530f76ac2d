#include "ridekit/pipeline.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <thread>

#include "ridekit/errors.hpp"

namespace ridekit::pipeline {

namespace {

constexpr int kChamferEdge = 3;
constexpr int kChamferDiag = 4;

void require_match(const BinaryMask& a, const BinaryMask& b) {
  if (a.height() != b.height() || a.width() != b.width()) throw ShapeError("mask extents differ");
}

/// Two-pass 3-4 chamfer distance to the pixels where `source` is nonzero.
std::vector<int> chamfer_distance(const std::vector<std::uint8_t>& source, int h, int w) {
  const int inf = std::numeric_limits<int>::max() / 2;
  std::vector<int> d(source.size());
  for (std::size_t i = 0; i < d.size(); ++i) d[i] = source[i] ? 0 : inf;
  const auto at = [&](int y, int x) -> int& { return d[static_cast<std::size_t>(y) * w + x]; };
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      int& v = at(y, x);
      if (x > 0) v = std::min(v, at(y, x - 1) + kChamferEdge);
      if (y > 0) {
        v = std::min(v, at(y - 1, x) + kChamferEdge);
        if (x > 0) v = std::min(v, at(y - 1, x - 1) + kChamferDiag);
        if (x + 1 < w) v = std::min(v, at(y - 1, x + 1) + kChamferDiag);
      }
    }
  }
  for (int y = h - 1; y >= 0; --y) {
    for (int x = w - 1; x >= 0; --x) {
      int& v = at(y, x);
      if (x + 1 < w) v = std::min(v, at(y, x + 1) + kChamferEdge);
      if (y + 1 < h) {
        v = std::min(v, at(y + 1, x) + kChamferEdge);
        if (x + 1 < w) v = std::min(v, at(y + 1, x + 1) + kChamferDiag);
        if (x > 0) v = std::min(v, at(y + 1, x - 1) + kChamferDiag);
      }
    }
  }
  return d;
}

std::vector<double> average_ranks(std::span<const double> v) {
  std::vector<std::size_t> order(v.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return v[a] < v[b]; });
  std::vector<double> rank(v.size());
  for (std::size_t i = 0; i < order.size();) {
    std::size_t j = i;
    while (j + 1 < order.size() && v[order[j + 1]] == v[order[i]]) ++j;
    const double r = 0.5 * static_cast<double>(i + j) + 1.0;
    for (std::size_t k = i; k <= j; ++k) rank[order[k]] = r;
    i = j + 1;
  }
  return rank;
}

}  // namespace

std::string_view to_string(SegMode m) {
  return m == SegMode::composite_threshold ? "composite-threshold" : "gap-threshold";
}

SegMode seg_mode_from_string(std::string_view s) {
  if (s == "composite-threshold") return SegMode::composite_threshold;
  if (s == "gap-threshold") return SegMode::gap_threshold;
  throw ParameterError("unknown segmentation mode '" + std::string(s) + "'");
}

Metrics metrics(const BinaryMask& pred, const BinaryMask& gt) {
  require_match(pred, gt);
  auto p = pred.values();
  auto g = gt.values();
  std::size_t tp = 0, fp = 0, fn = 0;
  for (std::size_t i = 0; i < p.size(); ++i) {
    const bool a = p[i] != 0;
    const bool b = g[i] != 0;
    tp += a && b;
    fp += a && !b;
    fn += !a && b;
  }
  Metrics m;
  const double n = static_cast<double>(p.size());
  m.mae = n > 0 ? static_cast<double>(fp + fn) / n : 0.0;
  const double precision = tp + fp > 0 ? static_cast<double>(tp) / static_cast<double>(tp + fp) : 0.0;
  const double recall = tp + fn > 0 ? static_cast<double>(tp) / static_cast<double>(tp + fn) : 0.0;
  const double den = kBetaSquared * precision + recall;
  m.f_beta = den > 0.0 ? (1.0 + kBetaSquared) * precision * recall / den : 0.0;
  const std::size_t uni = tp + fp + fn;
  m.iou = uni > 0 ? static_cast<double>(tp) / static_cast<double>(uni) : 1.0;
  return m;
}

OtsuResult otsu(const ImageGrid& values, int bins) {
  if (values.channels() != 1) throw ShapeError("Otsu input must be single-channel");
  if (bins < 2) throw ParameterError("Otsu needs at least 2 bins");
  auto v = values.values();
  if (v.empty()) throw FlatInputError("Otsu input is empty");
  const auto [lo_it, hi_it] = std::minmax_element(v.begin(), v.end());
  const double lo = *lo_it;
  const double hi = *hi_it;
  if (!(hi > lo)) throw FlatInputError("Otsu input is constant");
  const double width = (hi - lo) / bins;
  std::vector<int> bin_of(v.size());
  std::vector<double> hist(static_cast<std::size_t>(bins), 0.0);
  for (std::size_t i = 0; i < v.size(); ++i) {
    const int b = std::min(bins - 1, static_cast<int>((v[i] - lo) / width));
    bin_of[i] = b;
    hist[static_cast<std::size_t>(b)] += 1.0;
  }
  const double total = static_cast<double>(v.size());
  double sum_all = 0.0;
  for (int b = 0; b < bins; ++b) sum_all += b * hist[static_cast<std::size_t>(b)];
  double w0 = 0.0, sum0 = 0.0, best = -1.0;
  int split = 0;
  for (int b = 0; b < bins - 1; ++b) {
    w0 += hist[static_cast<std::size_t>(b)];
    sum0 += b * hist[static_cast<std::size_t>(b)];
    const double w1 = total - w0;
    if (w0 == 0.0 || w1 == 0.0) continue;
    const double m0 = sum0 / w0;
    const double m1 = (sum_all - sum0) / w1;
    const double between = w0 * w1 * (m0 - m1) * (m0 - m1);
    if (between > best) {
      best = between;
      split = b;
    }
  }
  OtsuResult out;
  out.threshold = lo + (split + 1) * width;
  std::vector<std::uint8_t> m(v.size());
  for (std::size_t i = 0; i < v.size(); ++i) m[i] = bin_of[i] > split ? 1 : 0;
  out.upper = BinaryMask(values.height(), values.width(), std::move(m));
  return out;
}

BinaryMask largest_component(const BinaryMask& mask) {
  const int h = mask.height();
  const int w = mask.width();
  auto v = mask.values();
  std::vector<int> label(v.size(), -1);
  std::vector<std::size_t> stack;
  int best_label = -1;
  std::size_t best_size = 0;
  int next = 0;
  for (std::size_t s = 0; s < v.size(); ++s) {
    if (!v[s] || label[s] >= 0) continue;
    std::size_t size = 0;
    label[s] = next;
    stack.push_back(s);
    while (!stack.empty()) {
      const std::size_t p = stack.back();
      stack.pop_back();
      ++size;
      const int y = static_cast<int>(p / w);
      const int x = static_cast<int>(p % w);
      for (int dy = -1; dy <= 1; ++dy) {
        for (int dx = -1; dx <= 1; ++dx) {
          const int yy = y + dy;
          const int xx = x + dx;
          if ((dy == 0 && dx == 0) || yy < 0 || yy >= h || xx < 0 || xx >= w) continue;
          const std::size_t q = static_cast<std::size_t>(yy) * w + xx;
          if (v[q] && label[q] < 0) {
            label[q] = next;
            stack.push_back(q);
          }
        }
      }
    }
    if (size > best_size) {
      best_size = size;
      best_label = next;
    }
    ++next;
  }
  std::vector<std::uint8_t> out(v.size(), 0);
  for (std::size_t i = 0; i < v.size(); ++i) out[i] = label[i] == best_label && best_label >= 0 ? 1 : 0;
  return BinaryMask(h, w, std::move(out));
}

BinaryMask fill_enclosed(const BinaryMask& band) {
  const int h = band.height();
  const int w = band.width();
  auto v = band.values();
  // Background reachable from the border (4-connectivity) is exterior.
  std::vector<std::uint8_t> exterior(v.size(), 0);
  std::vector<std::size_t> stack;
  const auto seed = [&](int y, int x) {
    const std::size_t p = static_cast<std::size_t>(y) * w + x;
    if (!v[p] && !exterior[p]) {
      exterior[p] = 1;
      stack.push_back(p);
    }
  };
  for (int x = 0; x < w; ++x) {
    seed(0, x);
    seed(h - 1, x);
  }
  for (int y = 0; y < h; ++y) {
    seed(y, 0);
    seed(y, w - 1);
  }
  while (!stack.empty()) {
    const std::size_t p = stack.back();
    stack.pop_back();
    const int y = static_cast<int>(p / w);
    const int x = static_cast<int>(p % w);
    if (x > 0) seed(y, x - 1);
    if (x + 1 < w) seed(y, x + 1);
    if (y > 0) seed(y - 1, x);
    if (y + 1 < h) seed(y + 1, x);
  }
  std::vector<std::uint8_t> hole(v.size(), 0);
  bool any_hole = false;
  for (std::size_t p = 0; p < v.size(); ++p) {
    hole[p] = !v[p] && !exterior[p];
    any_hole = any_hole || hole[p];
  }
  if (!any_hole) return band;
  const std::vector<int> to_hole = chamfer_distance(hole, h, w);
  const std::vector<int> to_exterior = chamfer_distance(exterior, h, w);
  std::vector<std::uint8_t> out(v.size(), 0);
  for (std::size_t p = 0; p < v.size(); ++p) {
    if (hole[p]) {
      out[p] = 1;
    } else if (v[p]) {
      out[p] = to_hole[p] <= to_exterior[p] ? 1 : 0;
    }
  }
  return BinaryMask(h, w, std::move(out));
}

BinaryMask close_mask(const BinaryMask& mask, int radius) {
  if (radius < 0) throw ParameterError("closing radius must be >= 0");
  if (radius == 0) return mask;
  const int h = mask.height();
  const int w = mask.width();
  const int reach = radius * kChamferEdge;
  std::vector<std::uint8_t> fg(mask.values().begin(), mask.values().end());
  const std::vector<int> to_fg = chamfer_distance(fg, h, w);
  std::vector<std::uint8_t> outside(fg.size());
  for (std::size_t p = 0; p < fg.size(); ++p) outside[p] = to_fg[p] > reach ? 1 : 0;
  const std::vector<int> to_outside = chamfer_distance(outside, h, w);
  std::vector<std::uint8_t> out(fg.size());
  for (std::size_t p = 0; p < fg.size(); ++p) out[p] = !outside[p] && to_outside[p] > reach ? 1 : 0;
  return BinaryMask(h, w, std::move(out));
}

BinaryMask close_and_fill(const BinaryMask& band, int max_radius) {
  for (int r = 0; r <= max_radius; ++r) {
    const BinaryMask closed = largest_component(close_mask(band, r));
    BinaryMask filled = fill_enclosed(closed);
    if (filled != closed) return filled;
  }
  return largest_component(band);
}

GapAnalysis analyze(const ImageGrid& composite, const PipelineConfig& cfg) {
  if (composite.domain() != Domain::composite) throw ContractError("segmentation input must be a composite image");
  GapAnalysis a;
  a.pair = retinex::decompose(composite, cfg.weights, cfg.solver);
  a.log_I = to_log_domain(composite, cfg.eps_log);
  a.log_L = to_log_domain(a.pair.illumination, cfg.eps_log);
  a.log_R = to_log_domain(a.pair.reflectance, cfg.eps_log);
  a.maps = dga::compute_gap_maps(a.log_I, a.log_L, a.log_R, cfg.gap);
  return a;
}

SegResult segment_composite(const ImageGrid& composite, const PipelineConfig& cfg, const BinaryMask* gt) {
  if (composite.domain() != Domain::composite) throw ContractError("segmentation input must be a composite image");
  const OtsuResult o = otsu(channel_mean(composite).retagged(Domain::feature), cfg.otsu_bins);
  SegResult r;
  r.method = SegMode::composite_threshold;
  r.threshold_used = o.threshold;
  if (o.upper.foreground_count() * 2 <= o.upper.pixel_count()) {
    r.predicted = o.upper;
  } else {
    std::vector<std::uint8_t> inv(o.upper.pixel_count());
    auto u = o.upper.values();
    for (std::size_t i = 0; i < inv.size(); ++i) inv[i] = u[i] ? 0 : 1;
    r.predicted = BinaryMask(o.upper.height(), o.upper.width(), std::move(inv));
  }
  if (gt) r.metrics = metrics(r.predicted, *gt);
  return r;
}

SegResult segment_gap(const ImageGrid& delta_R, const PipelineConfig& cfg, const BinaryMask* gt) {
  ImageGrid root = delta_R;
  for (double& v : root.values()) v = std::sqrt(std::max(v, 0.0));
  const OtsuResult o = otsu(root, cfg.otsu_bins);
  SegResult r;
  r.method = SegMode::gap_threshold;
  r.threshold_used = o.threshold * o.threshold;
  r.predicted = close_and_fill(o.upper, cfg.max_close_radius);
  if (gt) r.metrics = metrics(r.predicted, *gt);
  return r;
}

SegResult segment(const ImageGrid& composite, SegMode mode, const PipelineConfig& cfg, const BinaryMask* gt) {
  if (mode == SegMode::composite_threshold) return segment_composite(composite, cfg, gt);
  return segment_gap(analyze(composite, cfg).maps.delta_R, cfg, gt);
}

double pearson(std::span<const double> x, std::span<const double> y) {
  if (x.size() != y.size()) throw ShapeError("correlation inputs differ in length");
  const std::size_t n = x.size();
  if (n < 2) return std::numeric_limits<double>::quiet_NaN();
  const double mx = std::accumulate(x.begin(), x.end(), 0.0) / static_cast<double>(n);
  const double my = std::accumulate(y.begin(), y.end(), 0.0) / static_cast<double>(n);
  double sxy = 0.0, sxx = 0.0, syy = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    sxy += (x[i] - mx) * (y[i] - my);
    sxx += (x[i] - mx) * (x[i] - mx);
    syy += (y[i] - my) * (y[i] - my);
  }
  if (sxx == 0.0 || syy == 0.0) return std::numeric_limits<double>::quiet_NaN();
  return std::clamp(sxy / std::sqrt(sxx * syy), -1.0, 1.0);
}

double spearman(std::span<const double> x, std::span<const double> y) {
  if (x.size() != y.size()) throw ShapeError("correlation inputs differ in length");
  const std::vector<double> rx = average_ranks(x);
  const std::vector<double> ry = average_ranks(y);
  return pearson(rx, ry);
}

SweepResult run_rho_sweep(const synth::SynthSpec& base, std::span<const double> targets, int per_target,
                          const PipelineConfig& cfg, int jobs) {
  if (per_target < 1) throw ParameterError("per_target must be >= 1");
  if (targets.empty()) throw ParameterError("sweep needs at least one rho target");
  std::vector<double> sorted(targets.begin(), targets.end());
  std::sort(sorted.begin(), sorted.end());
  SweepResult out;
  out.rows.resize(sorted.size() * static_cast<std::size_t>(per_target));
  for (std::size_t i = 0; i < sorted.size(); ++i) {
    for (int j = 0; j < per_target; ++j) {
      SweepRow& row = out.rows[i * per_target + j];
      row.target_rho = sorted[i];
      row.replicate = j;
      row.seed = synth::sweep_seed(base.seed, i, j);
    }
  }
  const auto run_row = [&](SweepRow& row) {
    try {
      synth::SynthSpec spec = synth::with_rho(base, row.target_rho);
      spec.seed = row.seed;
      const synth::SynthSample s = synth::generate(spec);
      row.achieved_rho = s.achieved.rho;
      row.D_I = s.achieved.D_I;
      row.iou_composite_method = segment_composite(s.composite, cfg, &s.mask).metrics->iou;
      row.iou_gap_method = segment_gap(analyze(s.composite, cfg).maps.delta_R, cfg, &s.mask).metrics->iou;
      row.delta_iou = row.iou_gap_method - row.iou_composite_method;
    } catch (const std::exception& e) {
      row.failed = true;
      row.error = e.what();
    }
  };
  const std::size_t workers = static_cast<std::size_t>(std::max(1, jobs));
  if (workers == 1) {
    for (auto& row : out.rows) run_row(row);
  } else {
    std::vector<std::jthread> pool;
    for (std::size_t t = 0; t < workers; ++t) {
      pool.emplace_back([&, t] {
        for (std::size_t r = t; r < out.rows.size(); r += workers) run_row(out.rows[r]);
      });
    }
  }

  std::vector<double> rho, diou, tgt, mean;
  for (std::size_t i = 0; i < sorted.size(); ++i) {
    TargetSummary ts;
    ts.target_rho = sorted[i];
    double acc = 0.0;
    for (int j = 0; j < per_target; ++j) {
      const SweepRow& row = out.rows[i * per_target + j];
      if (row.failed) continue;
      acc += row.delta_iou;
      ++ts.rows;
      rho.push_back(row.achieved_rho);
      diou.push_back(row.delta_iou);
    }
    ts.mean_delta_iou = ts.rows > 0 ? acc / ts.rows : std::numeric_limits<double>::quiet_NaN();
    if (ts.rows > 0) {
      tgt.push_back(ts.target_rho);
      mean.push_back(ts.mean_delta_iou);
    }
    out.targets.push_back(ts);
  }
  out.pearson_r = pearson(rho, diou);
  out.spearman_r = spearman(tgt, mean);
  return out;
}

}  // namespace ridekit::pipeline
