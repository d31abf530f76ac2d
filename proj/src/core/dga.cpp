#include "ridekit/dga.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <nlohmann/json.hpp>
#include <sstream>

#include "ridekit/errors.hpp"

namespace ridekit::dga {

namespace {

double sigmoid(double z) {
  if (z >= 0.0) return 1.0 / (1.0 + std::exp(-z));
  const double e = std::exp(z);
  return e / (1.0 + e);
}

int clamp_index(int i, int n) { return std::clamp(i, 0, n - 1); }

void require_single(const ImageGrid& g, const char* what) {
  if (g.channels() != 1) throw ShapeError(std::string(what) + " must be single-channel");
}

void require_extent(const ImageGrid& a, const ImageGrid& b) {
  if (!a.same_extent(b)) throw ShapeError("map extents differ");
}

/// 3x3 correlation with replicate padding.
std::vector<double> conv3x3(const std::vector<double>& src, int h, int w, const std::array<double, 9>& k) {
  std::vector<double> out(src.size());
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      double acc = 0.0;
      for (int dy = -1; dy <= 1; ++dy) {
        const int yy = clamp_index(y + dy, h);
        for (int dx = -1; dx <= 1; ++dx) {
          const int xx = clamp_index(x + dx, w);
          acc += k[static_cast<std::size_t>((dy + 1) * 3 + dx + 1)] * src[static_cast<std::size_t>(yy) * w + xx];
        }
      }
      out[static_cast<std::size_t>(y) * w + x] = acc;
    }
  }
  return out;
}

template <std::size_t N>
std::array<double, N> read_weights(const nlohmann::json& layer, const char* name) {
  if (!layer.is_object() || !layer.contains("weights") || !layer.contains("bias")) {
    throw ParameterError(std::string("kernel layer '") + name + "' needs 'weights' and 'bias'");
  }
  const auto& w = layer.at("weights");
  if (!w.is_array() || w.size() != N) {
    throw ParameterError(std::string("kernel layer '") + name + "' needs " + std::to_string(N) + " weights");
  }
  std::array<double, N> out{};
  for (std::size_t i = 0; i < N; ++i) {
    if (!w[i].is_number()) throw ParameterError(std::string("non-numeric weight in '") + name + "'");
    out[i] = w[i].get<double>();
    if (!std::isfinite(out[i])) throw ParameterError(std::string("non-finite weight in '") + name + "'");
  }
  if (!layer.at("bias").is_number()) throw ParameterError(std::string("non-numeric bias in '") + name + "'");
  return out;
}

}  // namespace

ImageGrid feature_normalize(const ImageGrid& f) {
  const int ch = f.channels();
  const std::size_t n = f.pixel_count();
  std::vector<double> out(f.values().begin(), f.values().end());
  for (int c = 0; c < ch; ++c) {
    double mean = 0.0;
    for (std::size_t p = 0; p < n; ++p) mean += out[p * ch + c];
    mean /= static_cast<double>(n);
    double var = 0.0;
    for (std::size_t p = 0; p < n; ++p) {
      const double d = out[p * ch + c] - mean;
      var += d * d;
    }
    var /= static_cast<double>(n);
    const double inv = 1.0 / std::sqrt(std::max(var, kVarianceFloor));
    for (std::size_t p = 0; p < n; ++p) out[p * ch + c] = (out[p * ch + c] - mean) * inv;
  }
  return ImageGrid(f.height(), f.width(), ch, Domain::feature, std::move(out));
}

ImageGrid local_contrast(const ImageGrid& f, int k) { return local_moments(f, k).variance.retagged(Domain::feature); }

ImageGrid relu_gap(const ImageGrid& d_comp, const ImageGrid& d_I) {
  if (!d_comp.same_shape(d_I)) throw ShapeError("contrast maps have different shapes");
  std::vector<double> out(d_comp.size());
  auto a = d_comp.values();
  auto b = d_I.values();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = std::max(0.0, a[i] - b[i]);
  return ImageGrid(d_comp.height(), d_comp.width(), d_comp.channels(), Domain::feature, std::move(out));
}

GapPair gap_maps(const ImageGrid& d_I, const ImageGrid& d_L, const ImageGrid& d_R) {
  return {relu_gap(d_L, d_I), relu_gap(d_R, d_I)};
}

ConvKernel parse_kernel(const std::string& json_text) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(json_text);
  } catch (const nlohmann::json::parse_error& e) {
    throw ParameterError(std::string("kernel file is not valid JSON: ") + e.what());
  }
  if (!j.is_object() || !j.contains("conv1x1") || !j.contains("conv3x3")) {
    throw ParameterError("kernel file needs 'conv1x1' and 'conv3x3' objects");
  }
  ConvKernel k;
  k.conv1x1 = read_weights<3>(j.at("conv1x1"), "conv1x1");
  k.bias1 = j.at("conv1x1").at("bias").get<double>();
  k.conv3x3 = read_weights<9>(j.at("conv3x3"), "conv3x3");
  k.bias3 = j.at("conv3x3").at("bias").get<double>();
  if (!std::isfinite(k.bias1) || !std::isfinite(k.bias3)) throw ParameterError("non-finite kernel bias");
  return k;
}

ConvKernel load_kernel(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open kernel file '" + path + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse_kernel(ss.str());
}

ImageGrid attention_weights(const ImageGrid& delta, const ImageGrid& d_comp, const ImageGrid& d_I,
                            const AlphaParams& params) {
  require_single(delta, "gap map");
  require_single(d_comp, "component contrast");
  require_single(d_I, "composite contrast");
  require_extent(delta, d_comp);
  require_extent(delta, d_I);
  const int h = delta.height();
  const int w = delta.width();
  const std::size_t n = delta.pixel_count();
  auto x0 = delta.values();
  auto x1 = d_comp.values();
  auto x2 = d_I.values();

  std::array<double, 3> wt = params.w;
  double bias = params.b;
  std::array<double, 9> spatial{};
  double post_bias = 0.0;
  if (params.kernel) {
    wt = params.kernel->conv1x1;
    bias = params.kernel->bias1;
    spatial = params.kernel->conv3x3;
    post_bias = params.kernel->bias3;
  } else if (params.blur) {
    spatial.fill(1.0 / 9.0);
  } else {
    spatial[4] = 1.0;
  }

  std::vector<double> z(n);
  for (std::size_t p = 0; p < n; ++p) z[p] = wt[0] * x0[p] + wt[1] * x1[p] + wt[2] * x2[p] + bias;
  z = conv3x3(z, h, w, spatial);
  for (auto& v : z) v = sigmoid(v + post_bias);
  return ImageGrid(h, w, 1, Domain::feature, std::move(z));
}

ImageGrid fuse(const ImageGrid& F_I, const ImageGrid& F_L, const ImageGrid& F_R, const ImageGrid& alpha_L,
               const ImageGrid& alpha_R) {
  if (!F_I.same_shape(F_L) || !F_I.same_shape(F_R)) throw ShapeError("feature views have different shapes");
  require_single(alpha_L, "alpha_L");
  require_single(alpha_R, "alpha_R");
  require_extent(F_I, alpha_L);
  require_extent(F_I, alpha_R);
  const int ch = F_I.channels();
  const std::size_t n = F_I.pixel_count();
  auto fi = F_I.values();
  auto fl = F_L.values();
  auto fr = F_R.values();
  auto al = alpha_L.values();
  auto ar = alpha_R.values();
  std::vector<double> out(F_I.size());
  for (std::size_t p = 0; p < n; ++p) {
    for (int c = 0; c < ch; ++c) {
      const std::size_t i = p * ch + c;
      out[i] = fi[i] + ar[p] * fr[i] + al[p] * fl[i];
    }
  }
  return ImageGrid(F_I.height(), F_I.width(), ch, Domain::feature, std::move(out));
}

GapMaps compute_gap_maps(const ImageGrid& view_I, const ImageGrid& view_L, const ImageGrid& view_R,
                         const GapConfig& cfg) {
  if (!view_I.same_extent(view_L) || !view_I.same_extent(view_R)) throw ShapeError("view extents differ");
  const int ch = std::max({view_I.channels(), view_L.channels(), view_R.channels()});
  const ImageGrid fi = feature_normalize(lift_channels(view_I, ch));
  const ImageGrid fl = feature_normalize(lift_channels(view_L, ch));
  const ImageGrid fr = feature_normalize(lift_channels(view_R, ch));
  GapMaps g;
  g.d_I = local_contrast(fi, cfg.window);
  g.d_L = local_contrast(fl, cfg.window);
  g.d_R = local_contrast(fr, cfg.window);
  GapPair gp = gap_maps(g.d_I, g.d_L, g.d_R);
  g.delta_L = std::move(gp.delta_L);
  g.delta_R = std::move(gp.delta_R);
  g.alpha_L = attention_weights(g.delta_L, g.d_L, g.d_I, cfg.alpha);
  g.alpha_R = attention_weights(g.delta_R, g.d_R, g.d_I, cfg.alpha);
  return g;
}

}  // namespace ridekit::dga
