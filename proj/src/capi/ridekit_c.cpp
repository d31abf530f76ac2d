#include "ridekit/ridekit.h"

#include <cstdlib>
#include <cstring>
#include <memory>
#include <new>
#include <string>

#include "codec.hpp"
#include "ridekit/dga.hpp"
#include "ridekit/disc.hpp"
#include "ridekit/errors.hpp"
#include "ridekit/losses.hpp"
#include "ridekit/pipeline.hpp"
#include "ridekit/raster_io.hpp"
#include "ridekit/retinex.hpp"
#include "ridekit/synth.hpp"

struct rk_image {
  ridekit::ImageGrid grid;
};

struct rk_mask {
  ridekit::BinaryMask mask;
};

struct rk_gap {
  ridekit::ImageGrid illumination;
  ridekit::ImageGrid reflectance;
  ridekit::dga::GapMaps maps;
  nlohmann::json report;
};

namespace {

using namespace ridekit;
using capi::json;

thread_local std::string g_last_error;

rk_status fail(rk_status s, const std::string& msg) {
  g_last_error = msg;
  return s;
}

struct ArgumentError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// Runs `body`, translating exceptions into status codes.
template <class F>
rk_status guarded(F&& body) {
  try {
    g_last_error.clear();
    body();
    return RK_OK;
  } catch (const ArgumentError& e) {
    return fail(RK_ERR_ARGUMENT, e.what());
  } catch (const capi::ConfigError& e) {
    return fail(RK_ERR_CONFIG, e.what());
  } catch (const SolverError& e) {
    return fail(RK_ERR_SOLVER, e.what());
  } catch (const ContractError& e) {
    return fail(RK_ERR_CONTRACT, e.what());
  } catch (const ParameterError& e) {
    return fail(RK_ERR_PARAMETER, e.what());
  } catch (const ShapeError& e) {
    return fail(RK_ERR_SHAPE, e.what());
  } catch (const IoError& e) {
    return fail(RK_ERR_IO, e.what());
  } catch (const EmptyRegionError& e) {
    return fail(RK_ERR_EMPTY_REGION, e.what());
  } catch (const SpecError& e) {
    return fail(RK_ERR_SPEC, e.what());
  } catch (const FlatInputError& e) {
    return fail(RK_ERR_FLAT_INPUT, e.what());
  } catch (const std::bad_alloc&) {
    return fail(RK_ERR_INTERNAL, "out of memory");
  } catch (const std::exception& e) {
    return fail(RK_ERR_INTERNAL, e.what());
  }
}

template <class T>
void need(const T* p, const char* what) {
  if (p == nullptr) throw ArgumentError(std::string(what) + " is NULL");
}

char* dup_string(const std::string& s) {
  char* out = static_cast<char*>(std::malloc(s.size() + 1));
  if (out == nullptr) throw std::bad_alloc();
  std::memcpy(out, s.data(), s.size() + 1);
  return out;
}

void emit(char** out, const json& j) {
  if (out != nullptr) *out = dup_string(j.dump());
}

rk_image* wrap(ImageGrid g) { return new rk_image{std::move(g)}; }
rk_mask* wrap(BinaryMask m) { return new rk_mask{std::move(m)}; }

json decompose_report(const ImageGrid& composite, const retinex::RetinexPair& pair, const retinex::Weights& w) {
  const auto init = retinex::init_decomposition(composite);
  const auto init_loss = retinex::retinex_loss(composite, init.illumination, init.reflectance, w);
  return {{"loss", capi::to_json(pair.loss)},
          {"init_loss", capi::to_json(init_loss)},
          {"reconstruction_error",
           retinex::reconstruction_error(composite, pair.illumination, pair.reflectance)},
          {"iterations", pair.iterations},
          {"stop", std::string(retinex::to_string(pair.stop))},
          {"trace", pair.trace}};
}

const ImageGrid& gap_member(const rk_gap& g, const std::string& name) {
  if (name == "d_I") return g.maps.d_I;
  if (name == "d_L") return g.maps.d_L;
  if (name == "d_R") return g.maps.d_R;
  if (name == "delta_L") return g.maps.delta_L;
  if (name == "delta_R") return g.maps.delta_R;
  if (name == "alpha_L") return g.maps.alpha_L;
  if (name == "alpha_R") return g.maps.alpha_R;
  if (name == "illumination") return g.illumination;
  if (name == "reflectance") return g.reflectance;
  throw ArgumentError("unknown gap map '" + name + "'");
}

}  // namespace

extern "C" {

const char* rk_version(void) { return RIDEKIT_VERSION; }

const char* rk_status_name(rk_status status) {
  switch (status) {
    case RK_OK: return "ok";
    case RK_ERR_ARGUMENT: return "argument";
    case RK_ERR_CONFIG: return "config";
    case RK_ERR_CONTRACT: return "contract";
    case RK_ERR_PARAMETER: return "parameter";
    case RK_ERR_SHAPE: return "shape";
    case RK_ERR_IO: return "io";
    case RK_ERR_EMPTY_REGION: return "empty_region";
    case RK_ERR_SPEC: return "spec";
    case RK_ERR_FLAT_INPUT: return "flat_input";
    case RK_ERR_SOLVER: return "solver";
    case RK_ERR_INTERNAL: return "internal";
  }
  return "unknown";
}

const char* rk_last_error(void) { return g_last_error.c_str(); }

void rk_string_free(char* s) { std::free(s); }

rk_status rk_default_config(const char* section, char** out_json) {
  return guarded([&] {
    need(section, "section");
    need(out_json, "out_json");
    const std::string s = section;
    json j;
    if (s == "decompose") {
      j = {{"weights", capi::to_json(retinex::Weights{})}, {"solver", capi::to_json(retinex::SolverConfig{})}};
    } else if (s == "synth") {
      j = capi::to_json(synth::SynthSpec{});
    } else if (s == "gap" || s == "segment") {
      j = capi::to_json(pipeline::PipelineConfig{});
    } else if (s == "sweep") {
      j = capi::to_json(capi::SweepConfig{});
    } else if (s == "theorem") {
      j = {{"sweeps", 100}, {"eps_R", disc::kDefaultEpsR}, {"seed", 0}};
    } else {
      throw ArgumentError("unknown config section '" + s + "'");
    }
    emit(out_json, j);
  });
}

rk_status rk_image_new(int height, int width, int channels, const char* domain, const double* data, rk_image** out) {
  return guarded([&] {
    need(domain, "domain");
    need(data, "data");
    need(out, "out");
    if (height <= 0 || width <= 0 || channels <= 0) throw ShapeError("image dimensions must be positive");
    Domain d;
    try {
      d = domain_from_string(domain);
    } catch (const std::exception&) {
      throw ArgumentError(std::string("unknown domain '") + domain + "'");
    }
    const std::size_t n = static_cast<std::size_t>(height) * width * channels;
    *out = wrap(ImageGrid(height, width, channels, d, std::vector<double>(data, data + n)));
  });
}

rk_status rk_image_load(const char* path, rk_image** out) {
  return guarded([&] {
    need(path, "path");
    need(out, "out");
    *out = wrap(load_raster(path));
  });
}

rk_status rk_image_save(const rk_image* img, const char* path) {
  return guarded([&] {
    need(img, "img");
    need(path, "path");
    save_raster(img->grid, path);
  });
}

rk_status rk_image_save_preview(const rk_image* img, const char* path) {
  return guarded([&] {
    need(img, "img");
    need(path, "path");
    save_raster(preview_normalized(img->grid), path);
  });
}

rk_status rk_image_shape(const rk_image* img, int* height, int* width, int* channels) {
  return guarded([&] {
    need(img, "img");
    if (height) *height = img->grid.height();
    if (width) *width = img->grid.width();
    if (channels) *channels = img->grid.channels();
  });
}

const char* rk_image_domain(const rk_image* img) {
  if (img == nullptr) return "";
  return to_string(img->grid.domain()).data();
}

rk_status rk_image_data(const rk_image* img, const double** data, size_t* count) {
  return guarded([&] {
    need(img, "img");
    need(data, "data");
    *data = img->grid.values().data();
    if (count) *count = img->grid.size();
  });
}

void rk_image_free(rk_image* img) { delete img; }

rk_status rk_mask_new(int height, int width, const uint8_t* values, rk_mask** out) {
  return guarded([&] {
    need(values, "values");
    need(out, "out");
    if (height <= 0 || width <= 0) throw ShapeError("mask dimensions must be positive");
    const std::size_t n = static_cast<std::size_t>(height) * width;
    std::vector<std::uint8_t> v(values, values + n);
    for (auto& x : v) x = x ? 1 : 0;
    *out = wrap(BinaryMask(height, width, std::move(v)));
  });
}

rk_status rk_mask_load(const char* path, rk_mask** out) {
  return guarded([&] {
    need(path, "path");
    need(out, "out");
    *out = wrap(load_mask(path));
  });
}

rk_status rk_mask_save(const rk_mask* mask, const char* path) {
  return guarded([&] {
    need(mask, "mask");
    need(path, "path");
    save_mask(mask->mask, path);
  });
}

rk_status rk_mask_shape(const rk_mask* mask, int* height, int* width) {
  return guarded([&] {
    need(mask, "mask");
    if (height) *height = mask->mask.height();
    if (width) *width = mask->mask.width();
  });
}

rk_status rk_mask_data(const rk_mask* mask, const uint8_t** values, size_t* count) {
  return guarded([&] {
    need(mask, "mask");
    need(values, "values");
    *values = mask->mask.values().data();
    if (count) *count = mask->mask.pixel_count();
  });
}

void rk_mask_free(rk_mask* mask) { delete mask; }

rk_status rk_synth(const char* spec_json, rk_image** composite, rk_image** illumination, rk_image** reflectance,
                   rk_mask** mask, char** report_json) {
  return guarded([&] {
    synth::SynthSpec spec;
    capi::read(capi::parse_object(spec_json), spec);
    synth::SynthSample s = synth::generate(spec);
    const json report = {{"spec", capi::to_json(s.spec)}, {"achieved", capi::to_json(s.achieved)}};
    if (composite) *composite = wrap(std::move(s.composite));
    if (illumination) *illumination = wrap(std::move(s.illumination));
    if (reflectance) *reflectance = wrap(std::move(s.reflectance));
    if (mask) *mask = wrap(std::move(s.mask));
    emit(report_json, report);
  });
}

rk_status rk_decompose(const rk_image* composite, const char* config_json, rk_image** illumination,
                       rk_image** reflectance, char** report_json) {
  return guarded([&] {
    need(composite, "composite");
    const json cfg = capi::parse_object(config_json);
    pipeline::PipelineConfig pc;
    capi::read(cfg, pc);
    auto pair = retinex::decompose(composite->grid, pc.weights, pc.solver);
    const json report = decompose_report(composite->grid, pair, pc.weights);
    if (illumination) *illumination = wrap(std::move(pair.illumination));
    if (reflectance) *reflectance = wrap(std::move(pair.reflectance));
    emit(report_json, report);
  });
}

rk_status rk_theorem_sweep(size_t count, uint64_t seed, double eps_R, int jobs, char** out_json) {
  return guarded([&] {
    need(out_json, "out_json");
    if (jobs < 1) throw ParameterError("jobs must be >= 1");
    json arr = json::array();
    std::uint64_t index = 0;
    for (const auto& r : disc::theorem_sweep(count, seed, eps_R, jobs)) {
      json row = capi::to_json(r);
      row["index"] = index++;
      arr.push_back(std::move(row));
    }
    emit(out_json, arr);
  });
}

rk_status rk_verify_theorem(const rk_image* log_illumination, const rk_image* log_reflectance, const rk_mask* mask,
                            double eps_R, char** out_json) {
  return guarded([&] {
    need(log_illumination, "log_illumination");
    need(log_reflectance, "log_reflectance");
    need(mask, "mask");
    need(out_json, "out_json");
    for (const rk_image* v : {log_illumination, log_reflectance}) {
      const Domain d = v->grid.domain();
      if (d != Domain::log && d != Domain::feature) {
        throw ContractError("theorem inputs must be log-domain grids, got " + std::string(to_string(d)));
      }
    }
    emit(out_json, capi::to_json(disc::verify_theorem(log_illumination->grid, log_reflectance->grid, mask->mask, eps_R)));
  });
}

rk_status rk_gap_compute(const rk_image* composite, const rk_image* illumination, const rk_image* reflectance,
                         const char* config_json, rk_gap** out) {
  return guarded([&] {
    need(composite, "composite");
    need(out, "out");
    if ((illumination == nullptr) != (reflectance == nullptr)) {
      throw ArgumentError("give both illumination and reflectance, or neither");
    }
    pipeline::PipelineConfig pc;
    capi::read(capi::parse_object(config_json), pc);
    auto g = std::make_unique<rk_gap>();
    if (illumination != nullptr) {
      g->illumination = illumination->grid;
      g->reflectance = reflectance->grid;
      const ImageGrid log_I = to_log_domain(composite->grid, pc.eps_log);
      const ImageGrid log_L = to_log_domain(g->illumination, pc.eps_log);
      const ImageGrid log_R = to_log_domain(g->reflectance, pc.eps_log);
      g->maps = dga::compute_gap_maps(log_I, log_L, log_R, pc.gap);
      g->report = {{"decomposed", false}};
    } else {
      auto a = pipeline::analyze(composite->grid, pc);
      g->report = {{"decomposed", true}, {"decomposition", decompose_report(composite->grid, a.pair, pc.weights)}};
      g->illumination = std::move(a.pair.illumination);
      g->reflectance = std::move(a.pair.reflectance);
      g->maps = std::move(a.maps);
    }
    const auto mean = [](const ImageGrid& m) {
      double s = 0.0;
      for (double v : m.values()) s += v;
      return s / static_cast<double>(m.size());
    };
    g->report["mean"] = {{"d_I", mean(g->maps.d_I)},         {"d_L", mean(g->maps.d_L)},
                         {"d_R", mean(g->maps.d_R)},         {"delta_L", mean(g->maps.delta_L)},
                         {"delta_R", mean(g->maps.delta_R)}, {"alpha_L", mean(g->maps.alpha_L)},
                         {"alpha_R", mean(g->maps.alpha_R)}};
    g->report["config"] = capi::to_json(pc);
    *out = g.release();
  });
}

rk_status rk_gap_map(const rk_gap* gap, const char* name, rk_image** out) {
  return guarded([&] {
    need(gap, "gap");
    need(name, "name");
    need(out, "out");
    *out = wrap(gap_member(*gap, name));
  });
}

rk_status rk_gap_report(const rk_gap* gap, char** out_json) {
  return guarded([&] {
    need(gap, "gap");
    need(out_json, "out_json");
    emit(out_json, gap->report);
  });
}

void rk_gap_free(rk_gap* gap) { delete gap; }

rk_status rk_segment(const rk_image* composite, const char* mode, const char* config_json, const rk_mask* gt,
                     rk_mask** predicted, char** result_json) {
  return guarded([&] {
    need(composite, "composite");
    need(mode, "mode");
    pipeline::SegMode m;
    try {
      m = pipeline::seg_mode_from_string(mode);
    } catch (const std::exception&) {
      throw ArgumentError(std::string("unknown segmentation mode '") + mode + "'");
    }
    pipeline::PipelineConfig pc;
    capi::read(capi::parse_object(config_json), pc);
    auto r = pipeline::segment(composite->grid, m, pc, gt ? &gt->mask : nullptr);
    json j = {{"method", std::string(pipeline::to_string(r.method))},
              {"threshold_used", r.threshold_used},
              {"foreground_pixels", r.predicted.foreground_count()},
              {"metrics", r.metrics ? capi::to_json(*r.metrics) : json(nullptr)}};
    if (predicted) *predicted = wrap(std::move(r.predicted));
    emit(result_json, j);
  });
}

rk_status rk_sweep(const char* config_json, int jobs, char** result_json) {
  return guarded([&] {
    need(result_json, "result_json");
    if (jobs < 1) throw ParameterError("jobs must be >= 1");
    capi::SweepConfig sc;
    capi::read(capi::parse_object(config_json), sc);
    const auto r = pipeline::run_rho_sweep(sc.base, sc.targets, sc.per_target, sc.pipeline, jobs);
    emit(result_json, capi::to_json(r));
  });
}

rk_status rk_loss_retinex(const rk_image* composite, const rk_image* illumination, const rk_image* reflectance,
                          const char* weights_json, char** out_json) {
  return guarded([&] {
    need(composite, "composite");
    need(illumination, "illumination");
    need(reflectance, "reflectance");
    need(out_json, "out_json");
    retinex::Weights w;
    capi::read(capi::parse_object(weights_json), w);
    emit(out_json, capi::to_json(retinex::retinex_loss(composite->grid, illumination->grid, reflectance->grid, w)));
  });
}

rk_status rk_loss_bce(const rk_image* pred, const rk_image* target, double* out) {
  return guarded([&] {
    need(pred, "pred");
    need(target, "target");
    need(out, "out");
    *out = losses::bce(pred->grid, target->grid);
  });
}

rk_status rk_loss_iou(const rk_image* pred, const rk_image* target, double* out) {
  return guarded([&] {
    need(pred, "pred");
    need(target, "target");
    need(out, "out");
    *out = losses::iou_loss(pred->grid, target->grid);
  });
}

rk_status rk_loss_deep_seg(const rk_image* const preds[4], const rk_mask* gt, char** out_json) {
  return guarded([&] {
    need(preds, "preds");
    need(gt, "gt");
    need(out_json, "out_json");
    std::array<ImageGrid, losses::kLevels> p;
    for (int l = 0; l < losses::kLevels; ++l) {
      need(preds[l], "prediction level");
      p[l] = preds[l]->grid;
    }
    const auto s = losses::deep_seg_loss(p, gt->mask);
    emit(out_json, {{"bce", s.bce}, {"iou", s.iou}, {"total", s.total}});
  });
}

rk_status rk_loss_boundary(const rk_image* boundary, const rk_image* refl_boundary, const rk_image* gt, double* out) {
  return guarded([&] {
    need(boundary, "boundary");
    need(refl_boundary, "refl_boundary");
    need(gt, "gt");
    need(out, "out");
    *out = losses::boundary_loss(boundary->grid, refl_boundary->grid, gt->grid);
  });
}

rk_status rk_masked_pool(const rk_image* features, const rk_image* mask, double* out, size_t capacity,
                         int* empty_mask) {
  return guarded([&] {
    need(features, "features");
    need(mask, "mask");
    need(out, "out");
    const auto p = losses::masked_pool(features->grid, mask->grid);
    if (capacity < p.vector.size()) throw ShapeError("output buffer is smaller than the channel count");
    std::copy(p.vector.begin(), p.vector.end(), out);
    if (empty_mask) *empty_mask = p.empty_mask ? 1 : 0;
  });
}

rk_status rk_infonce(const double* pos_a, const double* pos_b, const double* negatives, size_t count, size_t dim,
                     double tau, double* out) {
  return guarded([&] {
    need(pos_a, "pos_a");
    need(pos_b, "pos_b");
    need(out, "out");
    if (count > 0) need(negatives, "negatives");
    losses::ContrastBatch b;
    b.pos_a.assign(pos_a, pos_a + dim);
    b.pos_b.assign(pos_b, pos_b + dim);
    for (std::size_t j = 0; j < count; ++j) b.negatives.emplace_back(negatives + j * dim, negatives + (j + 1) * dim);
    b.tau = tau;
    *out = losses::infonce(b);
  });
}

rk_status rk_infonce_similarities(double sim_pos, const double* sim_neg, size_t count, double tau, double* out) {
  return guarded([&] {
    need(out, "out");
    if (count > 0) need(sim_neg, "sim_neg");
    *out = losses::infonce_from_similarities(sim_pos, std::span<const double>(sim_neg, count), tau);
  });
}

rk_status rk_total_loss(double seg, double ret, double bnd, double con, double* out) {
  return guarded([&] {
    need(out, "out");
    *out = losses::total_loss({seg, ret, bnd, con});
  });
}

}  // extern "C"
