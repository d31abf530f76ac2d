#include "common.hpp"

#include <openssl/evp.h>
#include <spdlog/spdlog.h>

#include <array>
#include <cmath>
#include <fstream>
#include <sstream>

namespace ridekit::cli {

void check(rk_status status, const std::string& what) {
  if (status == RK_OK) return;
  const std::string msg = what + ": " + rk_last_error();
  if (status == RK_ERR_ARGUMENT || status == RK_ERR_CONFIG) throw UsageError(msg);
  throw RunError(msg);
}

std::string take(char* s) {
  std::string out = s ? s : "";
  rk_string_free(s);
  return out;
}

json take_json(char* s) { return json::parse(take(s)); }

json default_config(const char* section) {
  char* text = nullptr;
  check(rk_default_config(section, &text), "default config");
  return take_json(text);
}

json resolve_config(json defaults, const Common& common) {
  json cfg = std::move(defaults);
  if (common.config_path.empty()) return cfg;
  std::ifstream in(common.config_path);
  if (!in) throw UsageError("cannot read config file " + common.config_path);
  json patch = json::parse(in, nullptr, false);
  if (patch.is_discarded() || !patch.is_object()) throw UsageError("config file is not a JSON object: " + common.config_path);
  cfg.merge_patch(patch);
  spdlog::debug("config after {}: {}", common.config_path, cfg.dump());
  return cfg;
}

void require_file(const fs::path& path, const char* what) {
  if (!fs::is_regular_file(path)) throw UsageError(std::string(what) + " not found: " + path.string());
}

Image load_image(const fs::path& path) {
  require_file(path, "input raster");
  rk_image* img = nullptr;
  check(rk_image_load(path.c_str(), &img), "loading " + path.string());
  return Image(img);
}

Mask load_mask(const fs::path& path) {
  require_file(path, "mask");
  rk_mask* m = nullptr;
  check(rk_mask_load(path.c_str(), &m), "loading " + path.string());
  return Mask(m);
}

void save_image(const rk_image* img, const fs::path& path) {
  check(rk_image_save(img, path.c_str()), "writing " + path.string());
}

void save_preview(const rk_image* img, const fs::path& path) {
  check(rk_image_save_preview(img, path.c_str()), "writing " + path.string());
}

std::string sha256_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw RunError("cannot hash " + path.string());
  std::unique_ptr<EVP_MD_CTX, decltype(&EVP_MD_CTX_free)> ctx(EVP_MD_CTX_new(), &EVP_MD_CTX_free);
  if (!ctx || EVP_DigestInit_ex(ctx.get(), EVP_sha256(), nullptr) != 1) throw RunError("sha256 init failed");
  std::array<char, 1 << 16> buf;
  while (in) {
    in.read(buf.data(), buf.size());
    if (in.gcount() > 0) EVP_DigestUpdate(ctx.get(), buf.data(), static_cast<std::size_t>(in.gcount()));
  }
  std::array<unsigned char, EVP_MAX_MD_SIZE> md{};
  unsigned int len = 0;
  EVP_DigestFinal_ex(ctx.get(), md.data(), &len);
  static constexpr char kHex[] = "0123456789abcdef";
  std::string out;
  for (unsigned int i = 0; i < len; ++i) {
    out += kHex[md[i] >> 4];
    out += kHex[md[i] & 15];
  }
  return out;
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw RunError("cannot write " + path.string());
  out << text;
  if (!out) throw RunError("write failed: " + path.string());
}

void write_json(const fs::path& path, const json& j) { write_text(path, j.dump(2) + "\n"); }

std::optional<fs::path> output_dir(const Common& common, bool required) {
  if (common.out.empty()) {
    if (required) throw UsageError("--out DIR is required");
    return std::nullopt;
  }
  std::error_code ec;
  fs::create_directories(common.out, ec);
  if (ec || !fs::is_directory(common.out)) throw RunError("cannot create output directory " + common.out);
  return fs::path(common.out);
}

void write_manifest(const fs::path& dir, const std::string& command, const json& config, std::uint64_t seed,
                    const std::vector<fs::path>& inputs, const std::vector<std::string>& outputs) {
  json in = json::object();
  for (const auto& p : inputs) in[p.string()] = sha256_file(p);
  json out = json::object();
  for (const auto& name : outputs) out[name] = sha256_file(dir / name);
  spdlog::info("{}: wrote {} files to {}", command, outputs.size() + 1, dir.string());
  write_json(dir / "manifest.json", {{"command", command},
                                     {"config", config},
                                     {"seed", seed},
                                     {"tool_version", rk_version()},
                                     {"input_hashes", in},
                                     {"output_hashes", out}});
}

std::string csv_number(double v) {
  if (!std::isfinite(v)) return "";
  std::ostringstream s;
  s.precision(17);
  s << v;
  return s.str();
}

}  // namespace ridekit::cli
