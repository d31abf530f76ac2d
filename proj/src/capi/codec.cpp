#include "codec.hpp"

#include <cmath>
#include <optional>
#include <set>

#include "ridekit/dga.hpp"
#include "ridekit/errors.hpp"

namespace ridekit::capi {

namespace {

/// Checks that `j` is an object whose keys all appear in `allowed`.
void require_keys(const json& j, std::initializer_list<const char*> allowed, const char* where) {
  if (!j.is_object()) throw ConfigError(std::string(where) + ": expected an object");
  const std::set<std::string> ok(allowed.begin(), allowed.end());
  for (const auto& [k, v] : j.items()) {
    if (!ok.count(k)) throw ConfigError(std::string(where) + ": unknown key '" + k + "'");
  }
}

template <class T>
void get(const json& j, const char* key, T& out, const char* where) {
  auto it = j.find(key);
  if (it == j.end()) return;
  try {
    out = it->get<T>();
  } catch (const json::exception&) {
    throw ConfigError(std::string(where) + "." + key + ": wrong value type");
  }
}

void get_number(const json& j, const char* key, double& out, const char* where) {
  auto it = j.find(key);
  if (it == j.end()) return;
  if (!it->is_number()) throw ConfigError(std::string(where) + "." + key + ": expected a number");
  out = it->get<double>();
}

void get_int(const json& j, const char* key, int& out, const char* where) {
  auto it = j.find(key);
  if (it == j.end()) return;
  if (!it->is_number_integer()) throw ConfigError(std::string(where) + "." + key + ": expected an integer");
  out = it->get<int>();
}

void get_seed(const json& j, const char* key, std::uint64_t& out, const char* where) {
  auto it = j.find(key);
  if (it == j.end()) return;
  if (!it->is_number_unsigned()) throw ConfigError(std::string(where) + "." + key + ": expected a non-negative integer");
  out = it->get<std::uint64_t>();
}

void get_vec3(const json& j, const char* key, std::array<double, 3>& out, const char* where) {
  auto it = j.find(key);
  if (it == j.end()) return;
  if (!it->is_array() || it->size() != 3) throw ConfigError(std::string(where) + "." + key + ": expected 3 numbers");
  for (std::size_t i = 0; i < 3; ++i) {
    if (!(*it)[i].is_number()) throw ConfigError(std::string(where) + "." + key + ": expected 3 numbers");
    out[i] = (*it)[i].get<double>();
  }
}

template <class F>
auto enum_from(const json& j, const char* key, F parse, const char* where) -> std::optional<decltype(parse(""))> {
  auto it = j.find(key);
  if (it == j.end()) return std::nullopt;
  if (!it->is_string()) throw ConfigError(std::string(where) + "." + key + ": expected a string");
  try {
    return parse(it->get<std::string>());
  } catch (const std::exception&) {
    throw ConfigError(std::string(where) + "." + key + ": unknown value '" + it->get<std::string>() + "'");
  }
}

}  // namespace

json parse_object(const char* text) {
  if (text == nullptr || *text == '\0') return json::object();
  json j = json::parse(text, nullptr, false);
  if (j.is_discarded()) throw ConfigError("config is not valid JSON");
  if (!j.is_object()) throw ConfigError("config must be a JSON object");
  return j;
}

json to_json(const retinex::Weights& w) {
  return {{"rec", w.rec}, {"smooth_l", w.smooth_l}, {"tv_r", w.tv_r}, {"me", w.me},
          {"charbonnier_eps", w.charbonnier_eps}};
}

void read(const json& j, retinex::Weights& w) {
  constexpr const char* where = "weights";
  require_keys(j, {"rec", "smooth_l", "tv_r", "me", "charbonnier_eps"}, where);
  get_number(j, "rec", w.rec, where);
  get_number(j, "smooth_l", w.smooth_l, where);
  get_number(j, "tv_r", w.tv_r, where);
  get_number(j, "me", w.me, where);
  get_number(j, "charbonnier_eps", w.charbonnier_eps, where);
}

json to_json(const retinex::SolverConfig& s) {
  return {{"max_iters", s.max_iters},
          {"step_size", s.step_size},
          {"tol_rel", s.tol_rel},
          {"seed", s.seed},
          {"init_jitter", s.init_jitter},
          {"direction", std::string(retinex::to_string(s.direction))},
          {"history", s.history}};
}

void read(const json& j, retinex::SolverConfig& s) {
  constexpr const char* where = "solver";
  require_keys(j, {"max_iters", "step_size", "tol_rel", "seed", "init_jitter", "direction", "history"}, where);
  get_int(j, "max_iters", s.max_iters, where);
  get_number(j, "step_size", s.step_size, where);
  get_number(j, "tol_rel", s.tol_rel, where);
  get_seed(j, "seed", s.seed, where);
  get_number(j, "init_jitter", s.init_jitter, where);
  if (auto d = enum_from(j, "direction", retinex::direction_from_string, where)) s.direction = *d;
  get_int(j, "history", s.history, where);
}

json to_json(const retinex::LossBreakdown& l) {
  return {{"rec", l.rec}, {"smooth_l", l.smooth_l}, {"tv_r", l.tv_r}, {"me", l.me}, {"total", l.total}};
}

json to_json(const synth::SynthSpec& s) {
  return {{"height", s.height},
          {"width", s.width},
          {"mask_shape", std::string(synth::to_string(s.mask_shape))},
          {"delta_L", s.delta_L},
          {"delta_R", s.delta_R},
          {"sigma_L", s.sigma_L},
          {"sigma_R", s.sigma_R},
          {"base_L", s.base_L},
          {"base_R", s.base_R},
          {"smooth_sigma_L", s.smooth_sigma_L},
          {"seed", s.seed}};
}

void read(const json& j, synth::SynthSpec& s) {
  constexpr const char* where = "synth";
  require_keys(j,
               {"height", "width", "mask_shape", "delta_L", "delta_R", "sigma_L", "sigma_R", "base_L", "base_R",
                "smooth_sigma_L", "seed", "rho"},
               where);
  get_int(j, "height", s.height, where);
  get_int(j, "width", s.width, where);
  if (auto m = enum_from(j, "mask_shape", synth::mask_shape_from_string, where)) s.mask_shape = *m;
  get_number(j, "delta_L", s.delta_L, where);
  get_vec3(j, "delta_R", s.delta_R, where);
  get_number(j, "sigma_L", s.sigma_L, where);
  get_number(j, "sigma_R", s.sigma_R, where);
  get_number(j, "base_L", s.base_L, where);
  get_vec3(j, "base_R", s.base_R, where);
  get_number(j, "smooth_sigma_L", s.smooth_sigma_L, where);
  get_seed(j, "seed", s.seed, where);
  if (j.contains("rho")) {
    double rho = 0.0;
    get_number(j, "rho", rho, where);
    s = synth::with_rho(s, rho);
  }
}

json to_json(const synth::Achieved& a) {
  return {{"rho", a.rho},
          {"xi", a.xi},
          {"D_I", a.D_I},
          {"D_L", a.D_L},
          {"D_R", a.D_R},
          {"delta_L", a.delta_L},
          {"delta_R", a.delta_R},
          {"max_cross_corr", a.max_cross_corr},
          {"fg_pixels", a.fg_pixels},
          {"bg_pixels", a.bg_pixels}};
}

json to_json(const dga::AlphaParams& a) {
  json j = {{"w", a.w}, {"b", a.b}, {"blur", a.blur}};
  if (a.kernel) {
    j["kernel"] = {{"conv1x1", {{"weights", a.kernel->conv1x1}, {"bias", a.kernel->bias1}}},
                   {"conv3x3", {{"weights", a.kernel->conv3x3}, {"bias", a.kernel->bias3}}}};
  }
  return j;
}

void read(const json& j, dga::AlphaParams& a) {
  constexpr const char* where = "alpha";
  require_keys(j, {"w", "b", "blur", "kernel", "kernel_file"}, where);
  get_vec3(j, "w", a.w, where);
  get_number(j, "b", a.b, where);
  get(j, "blur", a.blur, where);
  if (j.contains("kernel") && j.contains("kernel_file")) throw ConfigError("alpha: give kernel or kernel_file, not both");
  if (auto it = j.find("kernel"); it != j.end()) {
    try {
      a.kernel = dga::parse_kernel(it->dump());
    } catch (const ParameterError& e) {
      throw ConfigError(std::string("alpha.kernel: ") + e.what());
    }
  }
  if (auto it = j.find("kernel_file"); it != j.end()) {
    if (!it->is_string()) throw ConfigError("alpha.kernel_file: expected a string");
    a.kernel = dga::load_kernel(it->get<std::string>());
  }
}

json to_json(const pipeline::PipelineConfig& c) {
  return {{"weights", to_json(c.weights)},
          {"solver", to_json(c.solver)},
          {"window", c.gap.window},
          {"alpha", to_json(c.gap.alpha)},
          {"otsu_bins", c.otsu_bins},
          {"max_close_radius", c.max_close_radius},
          {"eps_log", c.eps_log}};
}

namespace {

void read_pipeline_keys(const json& j, pipeline::PipelineConfig& c, const char* where) {
  if (auto it = j.find("weights"); it != j.end()) read(*it, c.weights);
  if (auto it = j.find("solver"); it != j.end()) read(*it, c.solver);
  get_int(j, "window", c.gap.window, where);
  if (auto it = j.find("alpha"); it != j.end()) read(*it, c.gap.alpha);
  get_int(j, "otsu_bins", c.otsu_bins, where);
  get_int(j, "max_close_radius", c.max_close_radius, where);
  get_number(j, "eps_log", c.eps_log, where);
}

}  // namespace

void read(const json& j, pipeline::PipelineConfig& c) {
  require_keys(j, {"weights", "solver", "window", "alpha", "otsu_bins", "max_close_radius", "eps_log"}, "config");
  read_pipeline_keys(j, c, "config");
}

json to_json(const SweepConfig& c) {
  json j = to_json(c.pipeline);
  j["base"] = to_json(c.base);
  j["targets"] = c.targets;
  j["per_target"] = c.per_target;
  return j;
}

void read(const json& j, SweepConfig& c) {
  require_keys(j,
               {"base", "targets", "per_target", "weights", "solver", "window", "alpha", "otsu_bins",
                "max_close_radius", "eps_log"},
               "sweep");
  if (auto it = j.find("base"); it != j.end()) read(*it, c.base);
  if (auto it = j.find("targets"); it != j.end()) {
    if (!it->is_array() || it->empty()) throw ConfigError("sweep.targets: expected a non-empty array");
    c.targets.clear();
    for (const auto& v : *it) {
      if (!v.is_number()) throw ConfigError("sweep.targets: expected numbers");
      c.targets.push_back(v.get<double>());
    }
  }
  get_int(j, "per_target", c.per_target, "sweep");
  read_pipeline_keys(j, c.pipeline, "sweep");
}

json to_json(const disc::TheoremReport& r) {
  const auto nullable = [](double v) { return std::isfinite(v) ? json(v) : json(nullptr); };
  return {{"D_I", r.D_I},
          {"D_L", r.D_L},
          {"D_R", r.D_R},
          {"D_L_native", r.D_L_native},
          {"delta_L", r.delta_L},
          {"delta_R", r.delta_R},
          {"rho", r.geometry.rho},
          {"xi", r.geometry.xi},
          {"degenerate", std::string(disc::to_string(r.geometry.degenerate))},
          {"bound_factor", r.factor.infinite ? json(nullptr) : json(r.factor.value)},
          {"bound_factor_infinite", r.factor.infinite},
          {"lhs", r.lhs},
          {"rhs", r.factor.infinite ? json(nullptr) : nullable(r.rhs)},
          {"slack", nullable(r.slack)},
          {"holds", r.holds},
          {"lifted_L", r.lifted_L},
          {"eps_R", r.eps_R},
          {"entangle_eps", r.entangle_eps},
          {"entangled", r.entangled},
          {"max_cross_cov", r.max_cross_cov}};
}

json to_json(const pipeline::Metrics& m) { return {{"mae", m.mae}, {"f_beta", m.f_beta}, {"iou", m.iou}}; }

json to_json(const pipeline::SweepResult& r) {
  json rows = json::array();
  for (const auto& row : r.rows) {
    rows.push_back({{"target_rho", row.target_rho},
                    {"replicate", row.replicate},
                    {"seed", row.seed},
                    {"achieved_rho", row.achieved_rho},
                    {"D_I", row.D_I},
                    {"iou_gap_method", row.iou_gap_method},
                    {"iou_composite_method", row.iou_composite_method},
                    {"delta_iou", row.delta_iou},
                    {"failed", row.failed},
                    {"error", row.error}});
  }
  json targets = json::array();
  for (const auto& t : r.targets) {
    targets.push_back({{"target_rho", t.target_rho}, {"mean_delta_iou", t.mean_delta_iou}, {"rows", t.rows}});
  }
  return {{"rows", rows}, {"targets", targets}, {"pearson_r", r.pearson_r}, {"spearman_r", r.spearman_r}};
}

}  // namespace ridekit::capi
