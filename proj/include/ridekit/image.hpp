#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string_view>
#include <vector>

namespace ridekit {

/// What a raster represents. The tag drives range validation:
/// composite and reflectance live in [0,1], illumination is strictly
/// positive, log and feature grids are unrestricted (but finite).
enum class Domain { composite, illumination, reflectance, log, feature };

std::string_view to_string(Domain d);
Domain domain_from_string(std::string_view s);

inline constexpr double kDefaultEpsLog = 1e-6;

/// Dense H x W x C raster of doubles, row-major with interleaved channels.
class ImageGrid {
 public:
  ImageGrid() = default;
  ImageGrid(int height, int width, int channels, Domain domain, double fill = 0.0);
  /// Takes ownership of `data`; validates length and domain range.
  ImageGrid(int height, int width, int channels, Domain domain, std::vector<double> data);

  int height() const noexcept { return height_; }
  int width() const noexcept { return width_; }
  int channels() const noexcept { return channels_; }
  Domain domain() const noexcept { return domain_; }
  std::size_t pixel_count() const noexcept {
    return static_cast<std::size_t>(height_) * static_cast<std::size_t>(width_);
  }
  std::size_t size() const noexcept { return data_.size(); }
  bool empty() const noexcept { return data_.empty(); }

  std::size_t index(int y, int x, int c = 0) const noexcept {
    return (static_cast<std::size_t>(y) * static_cast<std::size_t>(width_) + static_cast<std::size_t>(x)) *
               static_cast<std::size_t>(channels_) +
           static_cast<std::size_t>(c);
  }
  double& at(int y, int x, int c = 0) noexcept { return data_[index(y, x, c)]; }
  double at(int y, int x, int c = 0) const noexcept { return data_[index(y, x, c)]; }

  std::span<double> values() noexcept { return data_; }
  std::span<const double> values() const noexcept { return data_; }

  bool same_shape(const ImageGrid& other) const noexcept {
    return height_ == other.height_ && width_ == other.width_ && channels_ == other.channels_;
  }
  bool same_extent(const ImageGrid& other) const noexcept {
    return height_ == other.height_ && width_ == other.width_;
  }

  /// Throws ContractError when a value is non-finite or outside the range
  /// implied by the domain tag.
  void validate() const;

  /// Copy with a different tag; the new tag's range is validated.
  ImageGrid retagged(Domain domain) const;

  ImageGrid channel(int c) const;

  friend bool operator==(const ImageGrid&, const ImageGrid&) = default;

 private:
  int height_ = 0;
  int width_ = 0;
  int channels_ = 0;
  Domain domain_ = Domain::feature;
  std::vector<double> data_;
};

/// Forward differences with a zero last column (grad_h) / last row (grad_v).
struct GradientPair {
  ImageGrid grad_h;
  ImageGrid grad_v;
};

/// Foreground/background partition of an H x W grid.
class BinaryMask {
 public:
  BinaryMask() = default;
  BinaryMask(int height, int width, std::vector<std::uint8_t> values);
  BinaryMask(int height, int width, bool fill = false);

  int height() const noexcept { return height_; }
  int width() const noexcept { return width_; }
  std::size_t pixel_count() const noexcept { return values_.size(); }

  bool foreground(int y, int x) const noexcept {
    return values_[static_cast<std::size_t>(y) * static_cast<std::size_t>(width_) + static_cast<std::size_t>(x)] != 0;
  }
  void set(int y, int x, bool fg) noexcept {
    values_[static_cast<std::size_t>(y) * static_cast<std::size_t>(width_) + static_cast<std::size_t>(x)] = fg ? 1 : 0;
  }
  std::span<const std::uint8_t> values() const noexcept { return values_; }

  std::size_t foreground_count() const noexcept;
  std::size_t background_count() const noexcept { return values_.size() - foreground_count(); }

  /// Single-channel {0,1} grid (feature domain).
  ImageGrid to_grid() const;
  /// Pixels with value >= threshold become foreground; uses channel 0.
  static BinaryMask from_grid(const ImageGrid& grid, double threshold = 0.5);

  friend bool operator==(const BinaryMask&, const BinaryMask&) = default;

 private:
  int height_ = 0;
  int width_ = 0;
  std::vector<std::uint8_t> values_;
};

struct LocalMoments {
  ImageGrid mean;      // same channel count as the input
  ImageGrid variance;  // single channel: windowed mean of ||x - mean||^2
};

/// ln(img + eps_log), tagged Domain::log.
ImageGrid to_log_domain(const ImageGrid& img, double eps_log = kDefaultEpsLog);

/// Per-channel forward differences, replicate boundary.
GradientPair spatial_gradients(const ImageGrid& img);

/// k x k windowed mean and vector variance with replicate padding; k odd, >= 3.
LocalMoments local_moments(const ImageGrid& img, int k);

/// Separable Gaussian smoothing (radius ceil(3 sigma), replicate padding).
/// sigma == 0 returns the input unchanged.
ImageGrid gaussian_blur(const ImageGrid& img, double sigma);

/// Replicates a single-channel grid into `channels` identical channels.
ImageGrid lift_channels(const ImageGrid& img, int channels);

/// Per-pixel mean over channels; keeps the domain tag.
ImageGrid channel_mean(const ImageGrid& img);

/// Per-pixel max over channels; keeps the domain tag.
ImageGrid channel_max(const ImageGrid& img);

}  // namespace ridekit
