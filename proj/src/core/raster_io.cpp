#include "ridekit/raster_io.hpp"

#include <png.h>

#include <algorithm>
#include <array>
#include <bit>
#include <cmath>
#include <cctype>
#include <cstring>
#include <fstream>
#include <iterator>
#include <sstream>
#include <string>

#include "ridekit/errors.hpp"

namespace ridekit {

namespace {

constexpr std::array<char, 8> kRawMagic = {'R', 'K', 'G', 'R', 'I', 'D', '0', '1'};
constexpr std::uint32_t kDtypeF64 = 1;
constexpr std::size_t kRawHeaderBytes = 28;

void put_u32(std::string& buf, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) buf.push_back(static_cast<char>((v >> (8 * i)) & 0xFFu));
}

std::uint32_t get_u32(const unsigned char* p) {
  return static_cast<std::uint32_t>(p[0]) | (static_cast<std::uint32_t>(p[1]) << 8) |
         (static_cast<std::uint32_t>(p[2]) << 16) | (static_cast<std::uint32_t>(p[3]) << 24);
}

std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open '" + path.string() + "' for reading");
  return std::string(std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>());
}

void write_file(const std::filesystem::path& path, const std::string& bytes) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot open '" + path.string() + "' for writing");
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw IoError("short write to '" + path.string() + "'");
}

int domain_code(Domain d) { return static_cast<int>(d); }

Domain domain_from_code(std::uint32_t code) {
  if (code > static_cast<std::uint32_t>(Domain::feature)) throw IoError("raw grid has unknown domain code");
  return static_cast<Domain>(code);
}

std::uint8_t quantize8(double v) { return static_cast<std::uint8_t>(std::lround(std::clamp(v, 0.0, 1.0) * 255.0)); }

// ---------------------------------------------------------------- raw

void save_raw(const ImageGrid& img, const std::filesystem::path& path) {
  std::string buf(kRawMagic.begin(), kRawMagic.end());
  put_u32(buf, static_cast<std::uint32_t>(img.height()));
  put_u32(buf, static_cast<std::uint32_t>(img.width()));
  put_u32(buf, static_cast<std::uint32_t>(img.channels()));
  put_u32(buf, kDtypeF64);
  put_u32(buf, static_cast<std::uint32_t>(domain_code(img.domain())));
  buf.reserve(kRawHeaderBytes + img.size() * 8);
  for (double v : img.values()) {
    const auto bits = std::bit_cast<std::uint64_t>(v);
    for (int i = 0; i < 8; ++i) buf.push_back(static_cast<char>((bits >> (8 * i)) & 0xFFu));
  }
  write_file(path, buf);
}

ImageGrid load_raw(const std::filesystem::path& path) {
  const std::string bytes = read_file(path);
  if (bytes.size() < kRawHeaderBytes || !std::equal(kRawMagic.begin(), kRawMagic.end(), bytes.begin())) {
    throw IoError("'" + path.string() + "' is not a raw grid file");
  }
  const auto* p = reinterpret_cast<const unsigned char*>(bytes.data());
  const std::uint32_t h = get_u32(p + 8);
  const std::uint32_t w = get_u32(p + 12);
  const std::uint32_t c = get_u32(p + 16);
  const std::uint32_t dtype = get_u32(p + 20);
  const Domain domain = domain_from_code(get_u32(p + 24));
  if (dtype != kDtypeF64) throw IoError("unsupported raw dtype " + std::to_string(dtype));
  const std::size_t n = static_cast<std::size_t>(h) * w * c;
  if (bytes.size() != kRawHeaderBytes + n * 8) throw IoError("raw grid payload size mismatch in '" + path.string() + "'");
  std::vector<double> data(n);
  for (std::size_t i = 0; i < n; ++i) {
    std::uint64_t bits = 0;
    for (int b = 0; b < 8; ++b) bits |= static_cast<std::uint64_t>(p[kRawHeaderBytes + i * 8 + b]) << (8 * b);
    data[i] = std::bit_cast<double>(bits);
  }
  return ImageGrid(static_cast<int>(h), static_cast<int>(w), static_cast<int>(c), domain, std::move(data));
}

// ---------------------------------------------------------------- pgm

void skip_pnm_space(const std::string& s, std::size_t& pos) {
  while (pos < s.size()) {
    if (s[pos] == '#') {
      while (pos < s.size() && s[pos] != '\n') ++pos;
    } else if (std::isspace(static_cast<unsigned char>(s[pos]))) {
      ++pos;
    } else {
      break;
    }
  }
}

long read_pnm_int(const std::string& s, std::size_t& pos) {
  skip_pnm_space(s, pos);
  std::size_t start = pos;
  while (pos < s.size() && std::isdigit(static_cast<unsigned char>(s[pos]))) ++pos;
  if (start == pos) throw IoError("malformed PGM header");
  return std::stol(s.substr(start, pos - start));
}

ImageGrid load_pgm(const std::filesystem::path& path) {
  const std::string bytes = read_file(path);
  if (bytes.size() < 2 || bytes[0] != 'P' || bytes[1] != '5') {
    throw IoError("'" + path.string() + "' is not a binary (P5) PGM file");
  }
  std::size_t pos = 2;
  const long w = read_pnm_int(bytes, pos);
  const long h = read_pnm_int(bytes, pos);
  const long maxval = read_pnm_int(bytes, pos);
  if (w <= 0 || h <= 0) throw IoError("PGM has non-positive dimensions");
  if (maxval <= 0 || maxval > 65535) throw IoError("unsupported PGM bit depth (maxval " + std::to_string(maxval) + ")");
  ++pos;  // single whitespace before the raster
  const std::size_t bps = maxval < 256 ? 1 : 2;
  const std::size_t n = static_cast<std::size_t>(w) * static_cast<std::size_t>(h);
  if (bytes.size() < pos + n * bps) throw IoError("truncated PGM raster in '" + path.string() + "'");
  std::vector<double> data(n);
  const auto* p = reinterpret_cast<const unsigned char*>(bytes.data() + pos);
  for (std::size_t i = 0; i < n; ++i) {
    const unsigned v = bps == 1 ? p[i] : (static_cast<unsigned>(p[2 * i]) << 8) | p[2 * i + 1];
    data[i] = std::min(1.0, static_cast<double>(v) / static_cast<double>(maxval));
  }
  return ImageGrid(static_cast<int>(h), static_cast<int>(w), 1, Domain::composite, std::move(data));
}

void save_pgm(const ImageGrid& img, const std::filesystem::path& path) {
  if (img.channels() != 1) throw ShapeError("PGM output requires a single-channel grid");
  std::ostringstream header;
  header << "P5\n" << img.width() << " " << img.height() << "\n255\n";
  std::string buf = header.str();
  for (double v : img.values()) buf.push_back(static_cast<char>(quantize8(v)));
  write_file(path, buf);
}

// ---------------------------------------------------------------- png

struct PngImage {
  png_image image{};
  PngImage() { image.version = PNG_IMAGE_VERSION; }
  ~PngImage() { png_image_free(&image); }
  PngImage(const PngImage&) = delete;
  PngImage& operator=(const PngImage&) = delete;
};

ImageGrid load_png(const std::filesystem::path& path) {
  PngImage png;
  if (!png_image_begin_read_from_file(&png.image, path.c_str())) {
    throw IoError("cannot read PNG '" + path.string() + "': " + png.image.message);
  }
  if (png.image.format & PNG_FORMAT_FLAG_LINEAR) {
    throw IoError("unsupported PNG bit depth (16-bit) in '" + path.string() + "'");
  }
  if (png.image.format & PNG_FORMAT_FLAG_ALPHA) {
    throw IoError("unsupported PNG with alpha channel in '" + path.string() + "'");
  }
  const int channels = (png.image.format & PNG_FORMAT_FLAG_COLOR) ? 3 : 1;
  png.image.format = channels == 3 ? PNG_FORMAT_RGB : PNG_FORMAT_GRAY;
  const int w = static_cast<int>(png.image.width);
  const int h = static_cast<int>(png.image.height);
  std::vector<unsigned char> raster(PNG_IMAGE_SIZE(png.image));
  if (!png_image_finish_read(&png.image, nullptr, raster.data(), 0, nullptr)) {
    throw IoError("cannot decode PNG '" + path.string() + "': " + png.image.message);
  }
  std::vector<double> data(raster.size());
  std::transform(raster.begin(), raster.end(), data.begin(), [](unsigned char v) { return v / 255.0; });
  return ImageGrid(h, w, channels, Domain::composite, std::move(data));
}

void save_png(const ImageGrid& img, const std::filesystem::path& path) {
  PngImage png;
  png.image.width = static_cast<png_uint_32>(img.width());
  png.image.height = static_cast<png_uint_32>(img.height());
  png.image.format = img.channels() == 1 ? PNG_FORMAT_GRAY : PNG_FORMAT_RGB;
  std::vector<unsigned char> raster(img.size());
  std::transform(img.values().begin(), img.values().end(), raster.begin(), quantize8);
  if (!png_image_write_to_file(&png.image, path.c_str(), 0, raster.data(), 0, nullptr)) {
    throw IoError("cannot write PNG '" + path.string() + "': " + png.image.message);
  }
}

}  // namespace

RasterFormat format_from_path(const std::filesystem::path& path) {
  std::string ext = path.extension().string();
  std::transform(ext.begin(), ext.end(), ext.begin(), [](unsigned char ch) { return std::tolower(ch); });
  if (ext == ".raw") return RasterFormat::raw;
  if (ext == ".png") return RasterFormat::png;
  if (ext == ".pgm") return RasterFormat::pgm;
  throw IoError("cannot infer raster format from '" + path.string() + "' (expected .raw, .png or .pgm)");
}

ImageGrid load_raster(const std::filesystem::path& path) {
  switch (format_from_path(path)) {
    case RasterFormat::raw:
      return load_raw(path);
    case RasterFormat::png:
      return load_png(path);
    case RasterFormat::pgm:
      return load_pgm(path);
  }
  throw IoError("unreachable raster format");
}

void save_raster(const ImageGrid& img, const std::filesystem::path& path) {
  save_raster(img, path, format_from_path(path));
}

void save_raster(const ImageGrid& img, const std::filesystem::path& path, RasterFormat format) {
  switch (format) {
    case RasterFormat::raw:
      save_raw(img, path);
      return;
    case RasterFormat::png:
      save_png(img, path);
      return;
    case RasterFormat::pgm:
      save_pgm(img, path);
      return;
  }
}

BinaryMask load_mask(const std::filesystem::path& path) {
  const ImageGrid grid = load_raster(path);
  const double threshold = format_from_path(path) == RasterFormat::raw ? 0.5 : 1e-12;
  return BinaryMask::from_grid(grid, threshold);
}

void save_mask(const BinaryMask& mask, const std::filesystem::path& path) {
  save_pgm(mask.to_grid(), path);
}

ImageGrid preview_normalized(const ImageGrid& img) {
  auto v = img.values();
  const auto [lo, hi] = std::minmax_element(v.begin(), v.end());
  const double span = *hi - *lo;
  std::vector<double> out(v.size(), 0.0);
  if (span > 0.0) {
    for (std::size_t i = 0; i < v.size(); ++i) out[i] = std::clamp((v[i] - *lo) / span, 0.0, 1.0);
  }
  return ImageGrid(img.height(), img.width(), img.channels(), Domain::composite, std::move(out));
}

}  // namespace ridekit
