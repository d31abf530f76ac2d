#include "ridekit/image.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

#include "ridekit/errors.hpp"

namespace ridekit {

namespace {

void check_dims(int height, int width, int channels) {
  if (height <= 0 || width <= 0) {
    throw ShapeError("grid dimensions must be positive, got " + std::to_string(height) + "x" + std::to_string(width));
  }
  if (channels != 1 && channels != 3) {
    throw ShapeError("channel count must be 1 or 3, got " + std::to_string(channels));
  }
}

int clamp_index(int i, int n) { return std::clamp(i, 0, n - 1); }

}  // namespace

std::string_view to_string(Domain d) {
  switch (d) {
    case Domain::composite:
      return "composite";
    case Domain::illumination:
      return "illumination";
    case Domain::reflectance:
      return "reflectance";
    case Domain::log:
      return "log";
    case Domain::feature:
      return "feature";
  }
  return "feature";
}

Domain domain_from_string(std::string_view s) {
  for (Domain d : {Domain::composite, Domain::illumination, Domain::reflectance, Domain::log, Domain::feature}) {
    if (to_string(d) == s) return d;
  }
  throw ParameterError("unknown domain tag '" + std::string(s) + "'");
}

ImageGrid::ImageGrid(int height, int width, int channels, Domain domain, double fill)
    : height_(height), width_(width), channels_(channels), domain_(domain) {
  check_dims(height, width, channels);
  data_.assign(static_cast<std::size_t>(height) * static_cast<std::size_t>(width) * static_cast<std::size_t>(channels),
               fill);
  validate();
}

ImageGrid::ImageGrid(int height, int width, int channels, Domain domain, std::vector<double> data)
    : height_(height), width_(width), channels_(channels), domain_(domain), data_(std::move(data)) {
  check_dims(height, width, channels);
  const std::size_t expected =
      static_cast<std::size_t>(height) * static_cast<std::size_t>(width) * static_cast<std::size_t>(channels);
  if (data_.size() != expected) {
    throw ShapeError("data length " + std::to_string(data_.size()) + " does not match " + std::to_string(height) +
                     "x" + std::to_string(width) + "x" + std::to_string(channels));
  }
  validate();
}

void ImageGrid::validate() const {
  for (std::size_t i = 0; i < data_.size(); ++i) {
    const double v = data_[i];
    if (!std::isfinite(v)) {
      throw ContractError("non-finite value at index " + std::to_string(i));
    }
    switch (domain_) {
      case Domain::composite:
      case Domain::reflectance:
        if (v < 0.0 || v > 1.0) {
          throw ContractError(std::string(to_string(domain_)) + " value " + std::to_string(v) +
                              " outside [0,1] at index " + std::to_string(i));
        }
        break;
      case Domain::illumination:
        if (!(v > 0.0)) {
          throw ContractError("illumination value " + std::to_string(v) + " is not positive at index " +
                              std::to_string(i));
        }
        break;
      case Domain::log:
      case Domain::feature:
        break;
    }
  }
}

ImageGrid ImageGrid::retagged(Domain domain) const {
  ImageGrid out = *this;
  out.domain_ = domain;
  out.validate();
  return out;
}

ImageGrid ImageGrid::channel(int c) const {
  if (c < 0 || c >= channels_) throw ShapeError("channel index out of range");
  std::vector<double> out(pixel_count());
  for (std::size_t p = 0; p < out.size(); ++p) out[p] = data_[p * static_cast<std::size_t>(channels_) + c];
  return ImageGrid(height_, width_, 1, domain_, std::move(out));
}

BinaryMask::BinaryMask(int height, int width, std::vector<std::uint8_t> values)
    : height_(height), width_(width), values_(std::move(values)) {
  if (height <= 0 || width <= 0) throw ShapeError("mask dimensions must be positive");
  if (values_.size() != static_cast<std::size_t>(height) * static_cast<std::size_t>(width)) {
    throw ShapeError("mask length does not match its dimensions");
  }
  for (auto& v : values_) {
    if (v > 1) throw ContractError("mask values must be 0 or 1");
  }
}

BinaryMask::BinaryMask(int height, int width, bool fill)
    : BinaryMask(height, width,
                 std::vector<std::uint8_t>(static_cast<std::size_t>(std::max(height, 0)) *
                                               static_cast<std::size_t>(std::max(width, 0)),
                                           fill ? 1 : 0)) {}

std::size_t BinaryMask::foreground_count() const noexcept {
  return static_cast<std::size_t>(std::count(values_.begin(), values_.end(), std::uint8_t{1}));
}

ImageGrid BinaryMask::to_grid() const {
  std::vector<double> data(values_.begin(), values_.end());
  return ImageGrid(height_, width_, 1, Domain::feature, std::move(data));
}

BinaryMask BinaryMask::from_grid(const ImageGrid& grid, double threshold) {
  std::vector<std::uint8_t> values(grid.pixel_count());
  for (int y = 0; y < grid.height(); ++y) {
    for (int x = 0; x < grid.width(); ++x) {
      values[static_cast<std::size_t>(y) * grid.width() + x] = grid.at(y, x, 0) >= threshold ? 1 : 0;
    }
  }
  return BinaryMask(grid.height(), grid.width(), std::move(values));
}

ImageGrid to_log_domain(const ImageGrid& img, double eps_log) {
  if (!(eps_log > 0.0) || !std::isfinite(eps_log)) {
    throw ParameterError("eps_log must be a positive finite number");
  }
  std::vector<double> out(img.size());
  auto in = img.values();
  for (std::size_t i = 0; i < in.size(); ++i) {
    if (in[i] < 0.0) {
      throw ContractError("log transform requires nonnegative input, found " + std::to_string(in[i]));
    }
    out[i] = std::log(in[i] + eps_log);
  }
  return ImageGrid(img.height(), img.width(), img.channels(), Domain::log, std::move(out));
}

GradientPair spatial_gradients(const ImageGrid& img) {
  const int h = img.height();
  const int w = img.width();
  const int ch = img.channels();
  const Domain tag = Domain::feature;
  std::vector<double> gh(img.size(), 0.0);
  std::vector<double> gv(img.size(), 0.0);
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      for (int c = 0; c < ch; ++c) {
        const std::size_t i = img.index(y, x, c);
        if (x + 1 < w) gh[i] = img.at(y, x + 1, c) - img.at(y, x, c);
        if (y + 1 < h) gv[i] = img.at(y + 1, x, c) - img.at(y, x, c);
      }
    }
  }
  return {ImageGrid(h, w, ch, tag, std::move(gh)), ImageGrid(h, w, ch, tag, std::move(gv))};
}

LocalMoments local_moments(const ImageGrid& img, int k) {
  if (k < 3 || k % 2 == 0) {
    throw ParameterError("window size must be odd and >= 3, got " + std::to_string(k));
  }
  const int h = img.height();
  const int w = img.width();
  const int ch = img.channels();
  const int r = k / 2;
  const double inv_n = 1.0 / static_cast<double>(k * k);

  std::vector<double> mean(img.size(), 0.0);
  std::vector<double> var(img.pixel_count(), 0.0);
  std::vector<double> window_mean(static_cast<std::size_t>(ch));

  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      std::fill(window_mean.begin(), window_mean.end(), 0.0);
      for (int dy = -r; dy <= r; ++dy) {
        const int yy = clamp_index(y + dy, h);
        for (int dx = -r; dx <= r; ++dx) {
          const int xx = clamp_index(x + dx, w);
          for (int c = 0; c < ch; ++c) window_mean[c] += img.at(yy, xx, c);
        }
      }
      for (int c = 0; c < ch; ++c) {
        window_mean[c] *= inv_n;
        mean[img.index(y, x, c)] = window_mean[c];
      }
      double acc = 0.0;
      for (int dy = -r; dy <= r; ++dy) {
        const int yy = clamp_index(y + dy, h);
        for (int dx = -r; dx <= r; ++dx) {
          const int xx = clamp_index(x + dx, w);
          for (int c = 0; c < ch; ++c) {
            const double d = img.at(yy, xx, c) - window_mean[c];
            acc += d * d;
          }
        }
      }
      var[static_cast<std::size_t>(y) * w + x] = acc * inv_n;
    }
  }
  const Domain mean_tag = img.domain() == Domain::log ? Domain::log : Domain::feature;
  return {ImageGrid(h, w, ch, mean_tag, std::move(mean)),
          ImageGrid(h, w, 1, Domain::feature, std::move(var))};
}

ImageGrid gaussian_blur(const ImageGrid& img, double sigma) {
  if (sigma < 0.0 || !std::isfinite(sigma)) throw ParameterError("blur sigma must be nonnegative");
  if (sigma == 0.0) return img;
  const int radius = static_cast<int>(std::ceil(3.0 * sigma));
  std::vector<double> kernel(static_cast<std::size_t>(2 * radius + 1));
  for (int i = -radius; i <= radius; ++i) kernel[i + radius] = std::exp(-0.5 * (i * i) / (sigma * sigma));
  const double norm = std::accumulate(kernel.begin(), kernel.end(), 0.0);
  for (auto& v : kernel) v /= norm;

  const int h = img.height();
  const int w = img.width();
  const int ch = img.channels();
  std::vector<double> tmp(img.size(), 0.0);
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      for (int c = 0; c < ch; ++c) {
        double acc = 0.0;
        for (int i = -radius; i <= radius; ++i) acc += kernel[i + radius] * img.at(y, clamp_index(x + i, w), c);
        tmp[img.index(y, x, c)] = acc;
      }
    }
  }
  std::vector<double> out(img.size(), 0.0);
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      for (int c = 0; c < ch; ++c) {
        double acc = 0.0;
        for (int i = -radius; i <= radius; ++i) acc += kernel[i + radius] * tmp[img.index(clamp_index(y + i, h), x, c)];
        out[img.index(y, x, c)] = acc;
      }
    }
  }
  // Convex combinations can round a hair past the input range; keep the tag
  // valid without widening it.
  if (img.domain() == Domain::composite || img.domain() == Domain::reflectance) {
    for (auto& v : out) v = std::clamp(v, 0.0, 1.0);
  }
  return ImageGrid(h, w, ch, img.domain(), std::move(out));
}

ImageGrid lift_channels(const ImageGrid& img, int channels) {
  if (img.channels() == channels) return img;
  if (img.channels() != 1) throw ShapeError("only single-channel grids can be lifted");
  std::vector<double> out(img.pixel_count() * static_cast<std::size_t>(channels));
  auto in = img.values();
  for (std::size_t p = 0; p < in.size(); ++p) {
    for (int c = 0; c < channels; ++c) out[p * channels + c] = in[p];
  }
  return ImageGrid(img.height(), img.width(), channels, img.domain(), std::move(out));
}

ImageGrid channel_mean(const ImageGrid& img) {
  const int ch = img.channels();
  std::vector<double> out(img.pixel_count());
  auto in = img.values();
  for (std::size_t p = 0; p < out.size(); ++p) {
    double acc = 0.0;
    for (int c = 0; c < ch; ++c) acc += in[p * ch + c];
    out[p] = acc / ch;
  }
  return ImageGrid(img.height(), img.width(), 1, img.domain(), std::move(out));
}

ImageGrid channel_max(const ImageGrid& img) {
  const int ch = img.channels();
  std::vector<double> out(img.pixel_count());
  auto in = img.values();
  for (std::size_t p = 0; p < out.size(); ++p) {
    double m = in[p * ch];
    for (int c = 1; c < ch; ++c) m = std::max(m, in[p * ch + c]);
    out[p] = m;
  }
  return ImageGrid(img.height(), img.width(), 1, img.domain(), std::move(out));
}

}  // namespace ridekit
