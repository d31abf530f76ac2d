#pragma once

#include <cstdint>
#include <filesystem>
#include <memory>
#include <nlohmann/json.hpp>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "ridekit/ridekit.h"

namespace ridekit::cli {

namespace fs = std::filesystem;
using nlohmann::json;

inline constexpr int kExitOk = 0;
inline constexpr int kExitUsage = 1;
inline constexpr int kExitFailure = 2;

/// Bad flags, missing inputs, malformed configs: exit 1.
class UsageError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Contract, solver and I/O failures: exit 2.
class RunError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct ImageFree {
  void operator()(rk_image* p) const { rk_image_free(p); }
};
struct MaskFree {
  void operator()(rk_mask* p) const { rk_mask_free(p); }
};
struct GapFree {
  void operator()(rk_gap* p) const { rk_gap_free(p); }
};
using Image = std::unique_ptr<rk_image, ImageFree>;
using Mask = std::unique_ptr<rk_mask, MaskFree>;
using Gap = std::unique_ptr<rk_gap, GapFree>;

/// Throws UsageError for argument and config failures, RunError otherwise.
void check(rk_status status, const std::string& what);

/// Copies and frees a string returned by the library.
std::string take(char* s);
json take_json(char* s);

/// Flags shared by every subcommand.
struct Common {
  std::string config_path;
  std::optional<std::uint64_t> seed;
  std::string out;
  int jobs = 1;
};

json default_config(const char* section);
/// `defaults` overlaid with the --config file (JSON merge patch).
json resolve_config(json defaults, const Common& common);

Image load_image(const fs::path& path);
Mask load_mask(const fs::path& path);
void require_file(const fs::path& path, const char* what);

void save_image(const rk_image* img, const fs::path& path);
void save_preview(const rk_image* img, const fs::path& path);

std::string sha256_file(const fs::path& path);

void write_text(const fs::path& path, const std::string& text);
void write_json(const fs::path& path, const json& j);

/// Creates the output directory (when one was requested) and returns it.
std::optional<fs::path> output_dir(const Common& common, bool required);

/// Writes manifest.json into `dir`, replacing any earlier manifest there.
void write_manifest(const fs::path& dir, const std::string& command, const json& config, std::uint64_t seed,
                    const std::vector<fs::path>& inputs, const std::vector<std::string>& outputs);

std::string csv_number(double v);

}  // namespace ridekit::cli
