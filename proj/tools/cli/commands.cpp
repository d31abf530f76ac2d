#include "commands.hpp"

#include <spdlog/spdlog.h>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iostream>
#include <set>
#include <sstream>

namespace ridekit::cli {

namespace {

/// Flags that override single config entries, applied after the config file.
class Overrides {
 public:
  template <class T>
  CLI::Option* add(CLI::App* app, const std::string& flag, const std::string& pointer, const std::string& desc) {
    auto value = std::make_shared<T>();
    CLI::Option* opt = app->add_option(flag, *value, desc);
    apply_.push_back([opt, value, pointer](json& cfg) {
      if (opt->count() > 0) cfg[json::json_pointer(pointer)] = *value;
    });
    return opt;
  }

  void operator()(json& cfg) const {
    for (const auto& f : apply_) f(cfg);
  }

 private:
  std::vector<std::function<void(json&)>> apply_;
};

void add_common(CLI::App* app, Common& common) {
  app->add_option("--config", common.config_path, "JSON config file; explicit flags take precedence");
  app->add_option("--seed", common.seed, "Random seed");
  app->add_option("--out", common.out, "Output directory");
  app->add_option("--jobs", common.jobs, "Worker threads")->check(CLI::PositiveNumber);
}

/// Resolves defaults < config file < flags and writes the seed into `seed_ptr`.
json finish_config(json defaults, const Common& common, const Overrides& ov, const std::string& seed_ptr) {
  json cfg = resolve_config(std::move(defaults), common);
  ov(cfg);
  if (common.seed) cfg[json::json_pointer(seed_ptr)] = *common.seed;
  spdlog::debug("resolved config: {}", cfg.dump());
  return cfg;
}

std::uint64_t seed_of(const json& cfg, const std::string& seed_ptr) {
  const auto& v = cfg.at(json::json_pointer(seed_ptr));
  if (!v.is_number_unsigned()) throw UsageError("seed must be a non-negative integer");
  return v.get<std::uint64_t>();
}

void print(const json& j) { std::cout << j.dump(2) << "\n"; }

struct Scene {
  fs::path composite;
  std::optional<fs::path> illumination;
  std::optional<fs::path> reflectance;
  std::optional<fs::path> mask;
};

/// `--in` names either a composite raster or a directory written by `synth`.
Scene scene_from(const fs::path& in) {
  Scene s;
  if (fs::is_directory(in)) {
    s.composite = in / "I.raw";
    require_file(s.composite, "composite I.raw");
    if (fs::is_regular_file(in / "L.raw") && fs::is_regular_file(in / "R.raw")) {
      s.illumination = in / "L.raw";
      s.reflectance = in / "R.raw";
    }
    if (fs::is_regular_file(in / "mask.pgm")) s.mask = in / "mask.pgm";
  } else {
    require_file(in, "input raster");
    s.composite = in;
  }
  return s;
}

// ---- decompose ----

void setup_decompose(CLI::App& root, Common& common, std::function<int()>& action) {
  auto* app = root.add_subcommand("decompose", "Split a composite image into illumination and reflectance");
  add_common(app, common);
  auto in = std::make_shared<std::string>();
  app->add_option("--in", *in, "Composite raster (.raw, .png, .pgm)")->required();
  auto ov = std::make_shared<Overrides>();
  ov->add<int>(app, "--max-iters", "/solver/max_iters", "Solver iteration cap");
  ov->add<double>(app, "--step-size", "/solver/step_size", "Initial step size");
  ov->add<double>(app, "--tol", "/solver/tol_rel", "Relative stopping tolerance");
  ov->add<std::string>(app, "--direction", "/solver/direction", "lbfgs or steepest");
  ov->add<double>(app, "--w-rec", "/weights/rec", "Reconstruction weight");
  ov->add<double>(app, "--w-smooth", "/weights/smooth_l", "Illumination smoothness weight");
  ov->add<double>(app, "--w-tv", "/weights/tv_r", "Reflectance TV weight");
  ov->add<double>(app, "--w-me", "/weights/me", "Mutual exclusivity weight");
  app->callback([&common, &action, in, ov] {
    action = [&common, in, ov] {
      const json cfg = finish_config(default_config("decompose"), common, *ov, "/solver/seed");
      const fs::path dir = *output_dir(common, true);
      const fs::path input = *in;
      Image I = load_image(input);
      rk_image* L = nullptr;
      rk_image* R = nullptr;
      char* report = nullptr;
      spdlog::info("decomposing {}", input.string());
      check(rk_decompose(I.get(), cfg.dump().c_str(), &L, &R, &report), "decompose");
      Image Lh(L), Rh(R);
      json rep = take_json(report);
      save_image(Lh.get(), dir / "L.raw");
      save_image(Rh.get(), dir / "R.raw");
      save_preview(Lh.get(), dir / "L.png");
      save_image(Rh.get(), dir / "R.png");
      write_json(dir / "loss_breakdown.json", rep);
      write_manifest(dir, "decompose", cfg, seed_of(cfg, "/solver/seed"), {input},
                     {"L.raw", "R.raw", "L.png", "R.png", "loss_breakdown.json"});
      rep.erase("trace");
      print(rep);
      return kExitOk;
    };
  });
}

// ---- synth ----

void setup_synth(CLI::App& root, Common& common, std::function<int()>& action) {
  auto* app = root.add_subcommand("synth", "Generate a synthetic two-region scene");
  add_common(app, common);
  auto ov = std::make_shared<Overrides>();
  ov->add<double>(app, "--rho", "/rho", "Target cosine between the mean differences");
  ov->add<int>(app, "--height", "/height", "Image height");
  ov->add<int>(app, "--width", "/width", "Image width");
  ov->add<std::string>(app, "--mask-shape", "/mask_shape", "centered-disk, half-plane or blob");
  ov->add<double>(app, "--delta-L", "/delta_L", "Log-illumination mean difference");
  ov->add<double>(app, "--sigma-L", "/sigma_L", "Log-illumination std. dev.");
  ov->add<double>(app, "--sigma-R", "/sigma_R", "Log-reflectance std. dev.");
  ov->add<double>(app, "--smooth-sigma-L", "/smooth_sigma_L", "Illumination blotch scale (px)");
  app->callback([&common, &action, ov] {
    action = [&common, ov] {
      const json cfg = finish_config(default_config("synth"), common, *ov, "/seed");
      const fs::path dir = *output_dir(common, true);
      rk_image *I = nullptr, *L = nullptr, *R = nullptr;
      rk_mask* M = nullptr;
      char* report = nullptr;
      check(rk_synth(cfg.dump().c_str(), &I, &L, &R, &M, &report), "synth");
      Image Ih(I), Lh(L), Rh(R);
      Mask Mh(M);
      const json rep = take_json(report);
      save_image(Ih.get(), dir / "I.raw");
      save_image(Lh.get(), dir / "L.raw");
      save_image(Rh.get(), dir / "R.raw");
      save_image(Ih.get(), dir / "I.png");
      save_preview(Lh.get(), dir / "L.png");
      save_image(Rh.get(), dir / "R.png");
      check(rk_mask_save(Mh.get(), (dir / "mask.pgm").c_str()), "writing mask");
      write_json(dir / "synth.json", rep);
      write_manifest(dir, "synth", cfg, seed_of(cfg, "/seed"), {},
                     {"I.raw", "L.raw", "R.raw", "I.png", "L.png", "R.png", "mask.pgm", "synth.json"});
      print(rep);
      return kExitOk;
    };
  });
}

// ---- validate-theorem ----

void setup_theorem(CLI::App& root, Common& common, std::function<int()>& action) {
  auto* app = root.add_subcommand("validate-theorem", "Check the discriminability bound on random configurations");
  add_common(app, common);
  auto ov = std::make_shared<Overrides>();
  ov->add<long long>(app, "--sweeps", "/sweeps", "Number of random configurations");
  ov->add<double>(app, "--eps-R", "/eps_R", "Scatter regularizer");
  app->callback([&common, &action, ov] {
    action = [&common, ov] {
      const json cfg = finish_config(default_config("theorem"), common, *ov, "/seed");
      for (const auto& [k, v] : cfg.items()) {
        if (k != "sweeps" && k != "eps_R" && k != "seed") throw UsageError("config: unknown key '" + k + "'");
      }
      if (!cfg["sweeps"].is_number_integer() || cfg["sweeps"].get<long long>() < 1) {
        throw UsageError("sweeps must be a positive integer");
      }
      if (!cfg["eps_R"].is_number()) throw UsageError("eps_R must be a number");
      const auto dir = output_dir(common, false);
      const std::uint64_t seed = seed_of(cfg, "/seed");
      char* out = nullptr;
      check(rk_theorem_sweep(cfg["sweeps"].get<std::size_t>(), seed, cfg["eps_R"].get<double>(), common.jobs, &out),
            "validate-theorem");
      const json reports = take_json(out);
      std::size_t violated = 0;
      std::ostringstream csv;
      csv << "index,rho,xi,bound_factor,slack,holds\n";
      for (const auto& r : reports) {
        if (!r["holds"].get<bool>()) ++violated;
        const auto num = [](const json& v) { return v.is_null() ? std::string("inf") : csv_number(v.get<double>()); };
        csv << r["index"].get<std::uint64_t>() << ',' << csv_number(r["rho"].get<double>()) << ','
            << csv_number(r["xi"].get<double>()) << ',' << num(r["bound_factor"]) << ',' << num(r["slack"]) << ','
            << (r["holds"].get<bool>() ? "true" : "false") << '\n';
      }
      spdlog::info("checked {} configurations", reports.size());
      if (violated > 0) spdlog::warn("{} of {} configurations violate the bound", violated, reports.size());
      if (dir) {
        write_json(*dir / "theorem_reports.json", reports);
        write_text(*dir / "theorem_summary.csv", csv.str());
        write_manifest(*dir, "validate-theorem", cfg, seed, {}, {"theorem_reports.json", "theorem_summary.csv"});
      }
      print(reports);
      return kExitOk;
    };
  });
}

// ---- gap ----

void setup_gap(CLI::App& root, Common& common, std::function<int()>& action) {
  auto* app = root.add_subcommand("gap", "Compute discriminability-gap and attention maps");
  add_common(app, common);
  auto in = std::make_shared<std::string>();
  auto l_path = std::make_shared<std::string>();
  auto r_path = std::make_shared<std::string>();
  auto force = std::make_shared<bool>(false);
  app->add_option("--in", *in, "Composite raster or a synth output directory")->required();
  app->add_option("--L", *l_path, "Illumination raster (skips decomposition together with --R)");
  app->add_option("--R", *r_path, "Reflectance raster");
  app->add_flag("--decompose", *force, "Decompose even when L and R are available");
  auto ov = std::make_shared<Overrides>();
  ov->add<int>(app, "--window", "/window", "Local contrast window (odd)");
  ov->add<double>(app, "--alpha-b", "/alpha/b", "Attention bias");
  ov->add<std::string>(app, "--kernel", "/alpha/kernel_file", "JSON attention kernel file");
  ov->add<int>(app, "--max-iters", "/solver/max_iters", "Solver iteration cap");
  app->callback([&common, &action, in, l_path, r_path, force, ov] {
    action = [&common, in, l_path, r_path, force, ov] {
      const json cfg = finish_config(default_config("gap"), common, *ov, "/solver/seed");
      const fs::path dir = *output_dir(common, true);
      Scene scene = scene_from(*in);
      if (l_path->empty() != r_path->empty()) throw UsageError("--L and --R must be given together");
      if (!l_path->empty()) {
        scene.illumination = *l_path;
        scene.reflectance = *r_path;
      }
      if (*force) scene.illumination.reset(), scene.reflectance.reset();
      std::vector<fs::path> inputs{scene.composite};
      Image I = load_image(scene.composite);
      Image L, R;
      if (scene.illumination) {
        L = load_image(*scene.illumination);
        R = load_image(*scene.reflectance);
        inputs.push_back(*scene.illumination);
        inputs.push_back(*scene.reflectance);
      }
      rk_gap* g = nullptr;
      check(rk_gap_compute(I.get(), L.get(), R.get(), cfg.dump().c_str(), &g), "gap");
      Gap gap(g);
      std::vector<std::string> outputs;
      for (const char* name : {"d_I", "d_L", "d_R", "delta_L", "delta_R", "alpha_L", "alpha_R"}) {
        rk_image* m = nullptr;
        check(rk_gap_map(gap.get(), name, &m), name);
        Image map(m);
        save_image(map.get(), dir / (std::string(name) + ".raw"));
        save_preview(map.get(), dir / (std::string(name) + ".png"));
        outputs.push_back(std::string(name) + ".raw");
        outputs.push_back(std::string(name) + ".png");
      }
      char* report = nullptr;
      check(rk_gap_report(gap.get(), &report), "gap report");
      json rep = take_json(report);
      if (rep.contains("decomposition")) rep["decomposition"].erase("trace");
      write_json(dir / "gap.json", rep);
      outputs.push_back("gap.json");
      write_manifest(dir, "gap", cfg, seed_of(cfg, "/solver/seed"), inputs, outputs);
      print(rep);
      return kExitOk;
    };
  });
}

// ---- segment ----

void setup_segment(CLI::App& root, Common& common, std::function<int()>& action) {
  auto* app = root.add_subcommand("segment", "Threshold segmentation of a composite or its reflectance gap");
  add_common(app, common);
  auto in = std::make_shared<std::string>();
  auto gt = std::make_shared<std::string>();
  app->add_option("--in", *in, "Composite raster or a synth output directory")->required();
  app->add_option("--gt", *gt, "Ground-truth mask (defaults to mask.pgm of a synth directory)");
  auto ov = std::make_shared<Overrides>();
  ov->add<std::string>(app, "--mode", "/mode", "composite-threshold or gap-threshold");
  ov->add<int>(app, "--otsu-bins", "/otsu_bins", "Histogram bins");
  ov->add<int>(app, "--max-close-radius", "/max_close_radius", "Largest closing radius for the gap band");
  ov->add<int>(app, "--max-iters", "/solver/max_iters", "Solver iteration cap");
  app->callback([&common, &action, in, gt, ov] {
    action = [&common, in, gt, ov] {
      json defaults = default_config("segment");
      defaults["mode"] = "gap-threshold";
      json cfg = finish_config(std::move(defaults), common, *ov, "/solver/seed");
      const auto dir = output_dir(common, false);
      const Scene scene = scene_from(*in);
      std::vector<fs::path> inputs{scene.composite};
      Image I = load_image(scene.composite);
      Mask truth;
      const std::optional<fs::path> gt_path = gt->empty() ? scene.mask : std::optional<fs::path>(*gt);
      if (gt_path) {
        truth = load_mask(*gt_path);
        inputs.push_back(*gt_path);
      }
      if (!cfg["mode"].is_string()) throw UsageError("mode must be a string");
      const std::string mode = cfg["mode"].get<std::string>();
      json lib_cfg = cfg;
      lib_cfg.erase("mode");
      rk_mask* pred = nullptr;
      char* result = nullptr;
      check(rk_segment(I.get(), mode.c_str(), lib_cfg.dump().c_str(), truth.get(), &pred, &result), "segment");
      Mask predicted(pred);
      json res = take_json(result);
      res["input"] = scene.composite.string();
      if (dir) {
        check(rk_mask_save(predicted.get(), (*dir / "pred_mask.pgm").c_str()), "writing mask");
        std::ostringstream csv;
        csv << "input,method,threshold_used,foreground_pixels,mae,f_beta,iou\n";
        csv << scene.composite.string() << ',' << res["method"].get<std::string>() << ','
            << csv_number(res["threshold_used"].get<double>()) << ',' << res["foreground_pixels"].get<std::size_t>();
        if (res["metrics"].is_null()) {
          csv << ",,,\n";
        } else {
          const auto& m = res["metrics"];
          csv << ',' << csv_number(m["mae"].get<double>()) << ',' << csv_number(m["f_beta"].get<double>()) << ','
              << csv_number(m["iou"].get<double>()) << '\n';
        }
        write_json(*dir / "segment.json", res);
        write_text(*dir / "segment.csv", csv.str());
        write_manifest(*dir, "segment", cfg, seed_of(cfg, "/solver/seed"), inputs,
                       {"pred_mask.pgm", "segment.json", "segment.csv"});
      }
      print(res);
      return kExitOk;
    };
  });
}

// ---- sweep ----

std::string sweep_svg(const json& result) {
  constexpr double W = 480, H = 360, ml = 60, mr = 20, mt = 30, mb = 50;
  double ylo = -0.2, yhi = 1.0;
  for (const auto& r : result["rows"]) {
    if (r["failed"].get<bool>()) continue;
    ylo = std::min(ylo, r["delta_iou"].get<double>());
    yhi = std::max(yhi, r["delta_iou"].get<double>());
  }
  const auto sx = [&](double x) { return ml + (x + 1.0) / 2.0 * (W - ml - mr); };
  const auto sy = [&](double y) { return mt + (yhi - y) / (yhi - ylo) * (H - mt - mb); };
  std::ostringstream s;
  s.precision(6);
  s << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << W << "\" height=\"" << H << "\" font-family=\"sans-serif\""
    << " font-size=\"12\">\n";
  s << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  s << "<line x1=\"" << ml << "\" y1=\"" << H - mb << "\" x2=\"" << W - mr << "\" y2=\"" << H - mb
    << "\" stroke=\"black\"/>\n";
  s << "<line x1=\"" << ml << "\" y1=\"" << mt << "\" x2=\"" << ml << "\" y2=\"" << H - mb << "\" stroke=\"black\"/>\n";
  s << "<line x1=\"" << ml << "\" y1=\"" << sy(0) << "\" x2=\"" << W - mr << "\" y2=\"" << sy(0)
    << "\" stroke=\"#bbb\" stroke-dasharray=\"4 3\"/>\n";
  for (double t : {-1.0, -0.5, 0.0, 0.5, 1.0}) {
    s << "<text x=\"" << sx(t) << "\" y=\"" << H - mb + 16 << "\" text-anchor=\"middle\">" << t << "</text>\n";
  }
  for (double t = std::ceil(ylo * 5) / 5; t <= yhi + 1e-9; t += 0.2) {
    s << "<text x=\"" << ml - 6 << "\" y=\"" << sy(t) + 4 << "\" text-anchor=\"end\">" << std::round(t * 10) / 10
      << "</text>\n";
  }
  s << "<text x=\"" << (ml + W - mr) / 2 << "\" y=\"" << H - 12 << "\" text-anchor=\"middle\">achieved rho</text>\n";
  s << "<text transform=\"translate(16," << (mt + H - mb) / 2
    << ") rotate(-90)\" text-anchor=\"middle\">delta IoU (gap - composite)</text>\n";
  for (const auto& r : result["rows"]) {
    if (r["failed"].get<bool>()) continue;
    s << "<circle cx=\"" << sx(r["achieved_rho"].get<double>()) << "\" cy=\"" << sy(r["delta_iou"].get<double>())
      << "\" r=\"3\" fill=\"#1f77b4\" fill-opacity=\"0.7\"/>\n";
  }
  s << "<text x=\"" << W - mr << "\" y=\"" << mt - 10 << "\" text-anchor=\"end\">Pearson r = "
    << result["pearson_r"].get<double>() << ", Spearman = " << result["spearman_r"].get<double>() << "</text>\n";
  s << "</svg>\n";
  return s.str();
}

void setup_sweep(CLI::App& root, Common& common, std::function<int()>& action) {
  auto* app = root.add_subcommand("sweep", "Segmentation gain across reflectance-illumination correlations");
  add_common(app, common);
  auto plot = std::make_shared<bool>(false);
  app->add_flag("--plot", *plot, "Also write sweep.svg (requires --out)");
  auto ov = std::make_shared<Overrides>();
  ov->add<std::vector<double>>(app, "--targets", "/targets", "Target rho values")->delimiter(',');
  ov->add<int>(app, "--per-target", "/per_target", "Replicates per target");
  ov->add<int>(app, "--max-iters", "/solver/max_iters", "Solver iteration cap");
  app->callback([&common, &action, plot, ov] {
    action = [&common, plot, ov] {
      const json cfg = finish_config(default_config("sweep"), common, *ov, "/base/seed");
      const auto dir = output_dir(common, *plot);
      char* out = nullptr;
      check(rk_sweep(cfg.dump().c_str(), common.jobs, &out), "sweep");
      const json res = take_json(out);
      for (const auto& r : res["rows"]) {
        if (r["failed"].get<bool>()) spdlog::warn("row seed {} failed: {}", r["seed"].get<std::uint64_t>(),
                                                  r["error"].get<std::string>());
      }
      if (dir) {
        std::ostringstream csv;
        csv << "target_rho,replicate,seed,achieved_rho,D_I,iou_gap_method,iou_composite_method,delta_iou,failed\n";
        for (const auto& r : res["rows"]) {
          csv << csv_number(r["target_rho"].get<double>()) << ',' << r["replicate"].get<int>() << ','
              << r["seed"].get<std::uint64_t>() << ',' << csv_number(r["achieved_rho"].get<double>()) << ','
              << csv_number(r["D_I"].get<double>()) << ',' << csv_number(r["iou_gap_method"].get<double>()) << ','
              << csv_number(r["iou_composite_method"].get<double>()) << ','
              << csv_number(r["delta_iou"].get<double>()) << ',' << (r["failed"].get<bool>() ? "true" : "false")
              << '\n';
        }
        std::vector<std::string> outputs{"sweep.json", "sweep.csv"};
        write_json(*dir / "sweep.json", res);
        write_text(*dir / "sweep.csv", csv.str());
        if (*plot) {
          write_text(*dir / "sweep.svg", sweep_svg(res));
          outputs.push_back("sweep.svg");
        }
        write_manifest(*dir, "sweep", cfg, seed_of(cfg, "/base/seed"), {}, outputs);
      }
      print(res);
      return kExitOk;
    };
  });
}

// ---- eval-loss ----

void require_only(const json& j, std::initializer_list<const char*> keys, const std::string& where) {
  if (!j.is_object()) throw UsageError(where + ": expected an object");
  const std::set<std::string> ok(keys.begin(), keys.end());
  for (const auto& [k, v] : j.items()) {
    if (!ok.count(k)) throw UsageError(where + ": unknown key '" + k + "'");
  }
}

std::vector<double> numbers(const json& j, const std::string& where) {
  if (!j.is_array()) throw UsageError(where + ": expected an array of numbers");
  std::vector<double> v;
  for (const auto& x : j) {
    if (!x.is_number()) throw UsageError(where + ": expected an array of numbers");
    v.push_back(x.get<double>());
  }
  return v;
}

fs::path path_in(const json& j, const char* key, const fs::path& base, const std::string& where) {
  if (!j.contains(key) || !j[key].is_string()) throw UsageError(where + "." + key + ": expected a path");
  fs::path p = j[key].get<std::string>();
  return p.is_absolute() ? p : base / p;
}

void setup_eval_loss(CLI::App& root, Common& common, std::function<int()>& action) {
  auto* app = root.add_subcommand("eval-loss", "Evaluate training losses on stored predictions");
  add_common(app, common);
  auto manifest = std::make_shared<std::string>();
  app->add_option("--manifest", *manifest, "JSON file naming the prediction and target rasters")->required();
  app->callback([&common, &action, manifest] {
    action = [&common, manifest] {
      const json cfg = resolve_config({{"weights", default_config("decompose")["weights"]}}, common);
      require_only(cfg, {"weights"}, "config");
      const fs::path mpath = *manifest;
      require_file(mpath, "loss manifest");
      std::ifstream min(mpath);
      const json m = json::parse(min, nullptr, false);
      if (m.is_discarded()) throw UsageError("loss manifest is not valid JSON");
      require_only(m, {"seg", "ret", "bnd", "con"}, "manifest");
      const fs::path base = mpath.parent_path();
      std::vector<fs::path> inputs{mpath};
      json out = {{"seg", nullptr}, {"ret", nullptr}, {"bnd", nullptr}, {"con", nullptr}};
      double seg = 0, ret = 0, bnd = 0, con = 0;
      if (m.contains("seg")) {
        const json& s = m["seg"];
        require_only(s, {"predictions", "target"}, "seg");
        if (!s.contains("predictions") || !s["predictions"].is_array() || s["predictions"].size() != 4) {
          throw UsageError("seg.predictions: expected 4 paths");
        }
        std::vector<Image> preds;
        const rk_image* raw[4];
        for (std::size_t l = 0; l < 4; ++l) {
          if (!s["predictions"][l].is_string()) throw UsageError("seg.predictions: expected 4 paths");
          fs::path p = s["predictions"][l].get<std::string>();
          if (p.is_relative()) p = base / p;
          preds.push_back(load_image(p));
          raw[l] = preds.back().get();
          inputs.push_back(p);
        }
        const fs::path tp = path_in(s, "target", base, "seg");
        Mask target = load_mask(tp);
        inputs.push_back(tp);
        char* r = nullptr;
        check(rk_loss_deep_seg(raw, target.get(), &r), "seg loss");
        out["seg"] = take_json(r);
        seg = out["seg"]["total"].get<double>();
      }
      if (m.contains("ret")) {
        const json& s = m["ret"];
        require_only(s, {"composite", "illumination", "reflectance"}, "ret");
        const fs::path pi = path_in(s, "composite", base, "ret");
        const fs::path pl = path_in(s, "illumination", base, "ret");
        const fs::path pr = path_in(s, "reflectance", base, "ret");
        Image I = load_image(pi), L = load_image(pl), R = load_image(pr);
        inputs.insert(inputs.end(), {pi, pl, pr});
        char* r = nullptr;
        check(rk_loss_retinex(I.get(), L.get(), R.get(), cfg["weights"].dump().c_str(), &r), "retinex loss");
        out["ret"] = take_json(r);
        ret = out["ret"]["total"].get<double>();
      }
      if (m.contains("bnd")) {
        const json& s = m["bnd"];
        require_only(s, {"boundary", "refl_boundary", "target"}, "bnd");
        const fs::path pb = path_in(s, "boundary", base, "bnd");
        const fs::path prb = path_in(s, "refl_boundary", base, "bnd");
        const fs::path pt = path_in(s, "target", base, "bnd");
        Image B = load_image(pb), RB = load_image(prb), T = load_image(pt);
        inputs.insert(inputs.end(), {pb, prb, pt});
        check(rk_loss_boundary(B.get(), RB.get(), T.get(), &bnd), "boundary loss");
        out["bnd"] = bnd;
      }
      if (m.contains("con")) {
        const json& s = m["con"];
        double tau = 0.1;
        if (s.contains("tau")) {
          if (!s["tau"].is_number()) throw UsageError("con.tau: expected a number");
          tau = s["tau"].get<double>();
        }
        if (s.contains("sim_pos")) {
          require_only(s, {"sim_pos", "sim_neg", "tau"}, "con");
          if (!s["sim_pos"].is_number()) throw UsageError("con.sim_pos: expected a number");
          const auto neg = numbers(s.value("sim_neg", json::array()), "con.sim_neg");
          check(rk_infonce_similarities(s["sim_pos"].get<double>(), neg.data(), neg.size(), tau, &con), "infonce");
        } else {
          require_only(s, {"pos_a", "pos_b", "negatives", "tau"}, "con");
          const auto a = numbers(s.value("pos_a", json()), "con.pos_a");
          const auto b = numbers(s.value("pos_b", json()), "con.pos_b");
          std::vector<double> flat;
          const json negs = s.value("negatives", json::array());
          if (!negs.is_array()) throw UsageError("con.negatives: expected an array of vectors");
          for (const auto& n : negs) {
            const auto v = numbers(n, "con.negatives");
            if (v.size() != a.size()) throw RunError("infonce: negative has a different length");
            flat.insert(flat.end(), v.begin(), v.end());
          }
          if (b.size() != a.size()) throw RunError("infonce: positive b has a different length");
          check(rk_infonce(a.data(), b.data(), flat.data(), negs.size(), a.size(), tau, &con), "infonce");
        }
        out["con"] = con;
      }
      double total = 0;
      check(rk_total_loss(seg, ret, bnd, con, &total), "total loss");
      out["total"] = total;
      std::uint64_t seed = common.seed.value_or(0);
      if (const auto dir = output_dir(common, false)) {
        write_json(*dir / "loss.json", out);
        write_manifest(*dir, "eval-loss", cfg, seed, inputs, {"loss.json"});
      }
      print(out);
      return kExitOk;
    };
  });
}

}  // namespace

void register_commands(CLI::App& app, Common& common, std::function<int()>& action) {
  setup_decompose(app, common, action);
  setup_synth(app, common, action);
  setup_theorem(app, common, action);
  setup_gap(app, common, action);
  setup_segment(app, common, action);
  setup_sweep(app, common, action);
  setup_eval_loss(app, common, action);
}

}  // namespace ridekit::cli
