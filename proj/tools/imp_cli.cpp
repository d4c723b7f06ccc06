// imp: batch front end for projection, evaluation, GT conversion, gradient
// checking and benchmarking.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <cstdlib>
#include <filesystem>
#include <iostream>
#include <mutex>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "imp/boundary.hpp"
#include "imp/error.hpp"
#include "imp/gradcheck.hpp"
#include "imp/io.hpp"
#include "imp/metrics.hpp"
#include "imp/parallel.hpp"
#include "imp/projection.hpp"
#include "imp/rng.hpp"
#include "imp/semantic.hpp"
#include "imp/simd/isa.hpp"
#include "imp/synthetic.hpp"
#include "json.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitFailure = 1;
constexpr int kExitInput = 2;

void print_error(std::string_view code, const std::string& message, json extra = json::object()) {
  json j = {{"error", code}, {"message", message}};
  j.update(extra);
  std::cerr << j.dump() << "\n";
}

// Parses "HxW".
std::pair<int, int> parse_dims(const std::string& text, const std::string& flag) {
  int h = 0, w = 0;
  char x = 0, tail = 0;
  std::istringstream in(text);
  if (!(in >> h >> x >> w) || (x != 'x' && x != 'X') || (in >> tail) || h < 0 || w < 0)
    throw imp::Error(imp::ErrorCode::InvalidArgument, flag + " expects HxW, got '" + text + "'");
  return {h, w};
}

int default_jobs() {
  if (const char* env = std::getenv("IMP_JOBS")) {
    try {
      const int n = std::stoi(env);
      if (n > 0) return n;
    } catch (...) {
    }
    throw imp::Error(imp::ErrorCode::InvalidArgument,
                     std::string("IMP_JOBS must be a positive integer, got '") + env + "'");
  }
  return 1;
}

std::string number(double v) { return std::isnan(v) ? "nan" : json(v).dump(); }

json nan_to_null(double v) { return std::isnan(v) ? json(nullptr) : json(v); }

std::vector<fs::path> png_files(const fs::path& dir) {
  if (!fs::is_directory(dir))
    throw imp::Error(imp::ErrorCode::IoError, "not a directory: " + dir.string());
  std::vector<fs::path> out;
  for (const auto& entry : fs::directory_iterator(dir))
    if (entry.is_regular_file() && entry.path().extension() == ".png") out.push_back(entry.path());
  std::sort(out.begin(), out.end());
  return out;
}

void check_image_id(const std::string& id) {
  if (id.empty() || id == "." || id == ".." || id.find_first_of("/\\") != std::string::npos)
    throw imp::Error(imp::ErrorCode::ValidationError,
                     "image_id '" + id + "' cannot be used as a file name");
}

// ---------------------------------------------------------------- project

struct ProjectArgs {
  std::string detections;
  std::string config;
  std::optional<int> scale;
  float tau = imp::kDefaultTau;
  std::string out_dir;
  bool emit_canvas = false;
  int height = 0;
  int width = 0;
  int jobs = 0;
  std::string mode = "nearest";
};

int run_project(const ProjectArgs& args) {
  auto config = imp::load_dataset_config(args.config);
  if (args.scale) config.scale = *args.scale;
  config.validate();
  if (!(args.tau >= 0.f && args.tau <= 1.f))
    throw imp::Error(imp::ErrorCode::InvalidArgument, "--tau must lie in [0, 1]");
  const bool bilinear = args.mode == "bilinear";

  imp::DetectionFileOptions file_opts{args.height, args.width,
                                      fs::path(args.detections).parent_path()};
  const auto images = imp::load_detections(args.detections, config, file_opts);
  for (const auto& im : images) check_image_id(im.image_id);
  fs::create_directories(args.out_dir);

  const int jobs = args.jobs > 0 ? args.jobs : default_jobs();
  imp::parallel_for(images.size(), jobs, [&](std::size_t i) {
    const auto& im = images[i];
    const imp::CanvasSpec spec{config.num_classes(), im.height, im.width, config.scale};
    const fs::path stem = fs::path(args.out_dir) / im.image_id;
    imp::LabelMap labels;
    if (args.emit_canvas || bilinear) {
      const auto fwd = imp::imp_forward(im.detections, spec);
      labels = bilinear ? imp::upsample_canvas_bilinear(fwd.canvas, args.tau, config.ignore)
                        : imp::upsample_labels(
                              imp::canvas_to_labels(fwd.canvas, args.tau, config.ignore), spec);
      if (args.emit_canvas) imp::write_canvas_dump(fwd.canvas.values, stem.string() + ".canvas");
    } else {
      labels = imp::project_to_semantic(im.detections, spec, args.tau,
                                        imp::UpsampleMode::Nearest, config.ignore);
    }
    imp::save_labelmap(labels, stem.string() + ".png");
  });

  json summary = {{"images", images.size()},
                  {"out_dir", args.out_dir},
                  {"scale", config.scale},
                  {"tau", args.tau},
                  {"mode", args.mode}};
  std::cout << summary.dump() << "\n";
  return kExitOk;
}

// ---------------------------------------------------------------- eval

struct EvalArgs {
  std::string pred_dir;
  std::string gt_dir;
  std::string config;
  std::vector<std::string> thresholds;
  bool boundary = false;
  std::string out_dir;
  int jobs = 0;
};

int run_eval(const EvalArgs& args) {
  const auto config = imp::load_dataset_config(args.config);
  const auto space = config.label_space();
  std::vector<double> thresholds;
  for (const auto& text : args.thresholds) {
    if (text.empty()) continue;
    double d = 0.0;
    try {
      std::size_t used = 0;
      d = std::stod(text, &used);
      if (used != text.size()) throw std::invalid_argument(text);
    } catch (const std::exception&) {
      throw imp::Error(imp::ErrorCode::InvalidArgument, "bad boundary threshold '" + text + "'");
    }
    if (!(d >= 0.0) || !std::isfinite(d))
      throw imp::Error(imp::ErrorCode::InvalidArgument, "boundary thresholds must be finite and >= 0");
    thresholds.push_back(d);
  }
  if (args.boundary && thresholds.empty())
    thresholds.assign(std::begin(imp::kBoundaryThresholds), std::end(imp::kBoundaryThresholds));

  const auto gt_files = png_files(args.gt_dir);
  const auto pred_files = png_files(args.pred_dir);
  for (const auto& g : gt_files)
    if (!fs::exists(fs::path(args.pred_dir) / g.filename()))
      throw imp::Error(imp::ErrorCode::MissingPair,
                       "no prediction for " + g.filename().string() + " in " + args.pred_dir);
  for (const auto& p : pred_files)
    if (!fs::exists(fs::path(args.gt_dir) / p.filename()))
      throw imp::Error(imp::ErrorCode::MissingPair,
                       "no ground truth for " + p.filename().string() + " in " + args.gt_dir);

  const int C = config.num_classes();
  const std::size_t n = gt_files.size();
  std::vector<imp::ConfusionMatrix> per_file(n, imp::ConfusionMatrix(C));
  std::vector<std::vector<imp::ConfusionMatrix>> per_file_d(
      n, std::vector<imp::ConfusionMatrix>(thresholds.size(), imp::ConfusionMatrix(C)));

  const int jobs = args.jobs > 0 ? args.jobs : default_jobs();
  imp::parallel_for(n, jobs, [&](std::size_t i) {
    const auto name = gt_files[i].filename().string();
    try {
      const auto gt = imp::load_labelmap(gt_files[i], space);
      const auto pred = imp::load_labelmap(fs::path(args.pred_dir) / name, space);
      imp::accumulate(per_file[i], pred, gt);
      if (!thresholds.empty()) {
        const auto dist = imp::distance_transform(imp::boundary_pixels(gt));
        for (std::size_t k = 0; k < thresholds.size(); ++k)
          imp::miou_within(per_file_d[i][k], pred, gt, dist, thresholds[k]);
      }
    } catch (const imp::Error& e) {
      throw imp::Error(e.code(), e.cause(), name + ": " + e.what());
    }
  });

  imp::ConfusionMatrix cm(C);
  std::vector<imp::ConfusionMatrix> cm_d(thresholds.size(), imp::ConfusionMatrix(C));
  for (std::size_t i = 0; i < n; ++i) {
    cm += per_file[i];
    for (std::size_t k = 0; k < thresholds.size(); ++k) cm_d[k] += per_file_d[i][k];
  }

  const auto iou = imp::iou_per_class(cm);
  const auto acc = imp::accuracy_per_class(cm);
  const double miou = imp::miou(cm, config.include_background);
  const double macc = imp::macc(cm, config.include_background);

  json report;
  report["config"] = json::parse(imp::dataset_config_to_json(config));
  report["config"]["boundary_thresholds"] = thresholds;
  report["images"] = n;
  report["pixels"] = cm.total();
  report["miou"] = nan_to_null(miou);
  report["macc"] = nan_to_null(macc);
  report["per_class"] = json::array();
  std::ostringstream per_class_csv;
  per_class_csv << "class,name,iou,accuracy,gt_pixels,pred_pixels,true_positive\n";
  for (int c = 0; c <= C; ++c) {
    const std::string name = c < C ? config.class_names[c] : "background";
    report["per_class"].push_back({{"class", c},
                                   {"name", name},
                                   {"iou", nan_to_null(iou[c])},
                                   {"accuracy", nan_to_null(acc[c])},
                                   {"gt_pixels", cm.row_sum(c)},
                                   {"pred_pixels", cm.col_sum(c)},
                                   {"true_positive", cm.at(c, c)}});
    per_class_csv << c << ',' << name << ',' << number(iou[c]) << ',' << number(acc[c]) << ','
                  << cm.row_sum(c) << ',' << cm.col_sum(c) << ',' << cm.at(c, c) << '\n';
  }
  std::ostringstream boundary_csv;
  boundary_csv << "d,miou,pixels\n";
  report["boundary"] = json::array();
  for (std::size_t k = 0; k < thresholds.size(); ++k) {
    const double m = imp::miou(cm_d[k], config.include_background);
    report["boundary"].push_back(
        {{"d", thresholds[k]}, {"miou", nan_to_null(m)}, {"pixels", cm_d[k].total()}});
    boundary_csv << number(thresholds[k]) << ',' << number(m) << ',' << cm_d[k].total() << '\n';
  }

  fs::create_directories(args.out_dir);
  const fs::path out(args.out_dir);
  imp::write_text_file(out / "report.json", report.dump(2) + "\n");
  imp::write_text_file(out / "per_class.csv", per_class_csv.str());
  if (!thresholds.empty()) imp::write_text_file(out / "boundary.csv", boundary_csv.str());

  std::cout << json({{"miou", nan_to_null(miou)},
                     {"macc", nan_to_null(macc)},
                     {"report", (out / "report.json").string()}})
                   .dump()
            << "\n";
  if (std::isnan(miou)) {
    print_error("EvaluationFailure", "no class has ground-truth or predicted pixels");
    return kExitFailure;
  }
  return kExitOk;
}

// ---------------------------------------------------------------- convert-gt

struct ConvertArgs {
  std::string gt_dir;
  std::string config;
  std::string mask_dims;
  int min_area = imp::kDefaultMinArea;
  std::string out;
};

int run_convert(const ConvertArgs& args) {
  auto config = imp::load_dataset_config(args.config);
  if (!args.mask_dims.empty()) {
    if (args.mask_dims == "native") {
      config.mask_dims = {0, 0};
    } else {
      const auto [h, w] = parse_dims(args.mask_dims, "--mask-dims");
      if (h < 1 || w < 1)
        throw imp::Error(imp::ErrorCode::InvalidArgument, "--mask-dims must be positive");
      config.mask_dims = {h, w};
    }
  }
  if (args.min_area < 1)
    throw imp::Error(imp::ErrorCode::InvalidArgument, "--min-area must be >= 1");

  std::vector<imp::ImageDetections> images;
  for (const auto& path : png_files(args.gt_dir)) {
    const auto gt = imp::load_labelmap(path, config.label_space());
    images.push_back({path.stem().string(), gt.rows, gt.cols,
                      imp::segments_to_instances(gt, config.mask_dims, args.min_area)});
  }
  const std::string text = imp::detections_to_json(images, config) + "\n";
  if (args.out.empty() || args.out == "-")
    std::cout << text;
  else
    imp::write_text_file(args.out, text);
  return kExitOk;
}

// ---------------------------------------------------------------- gradcheck

struct GradcheckArgs {
  std::uint64_t seed = 1;
  std::string canvas = "16x16";
  int detections = 4;
  int classes = 3;
  double step = 1e-3;
  double tol = 1e-4;
  std::string report;
};

int run_gradcheck(const GradcheckArgs& args) {
  const auto [rows, cols] = parse_dims(args.canvas, "--canvas");
  if (rows < 1 || cols < 1 || args.detections < 1 || args.classes < 1)
    throw imp::Error(imp::ErrorCode::InvalidArgument,
                     "--canvas, --detections and --classes must be positive");
  imp::ImpProgramConfig cfg;
  cfg.seed = args.seed;
  cfg.canvas_rows = rows;
  cfg.canvas_cols = cols;
  cfg.num_detections = args.detections;
  cfg.num_classes = args.classes;
  imp::GradcheckOptions opts;
  opts.step = args.step;
  opts.tolerance = args.tol;
  const auto report = imp::gradcheck(imp::make_imp_program(cfg), opts);

  json j = json::parse(report.to_json());
  j["config"] = {{"seed", cfg.seed},
                 {"canvas", {rows, cols}},
                 {"scale", cfg.scale},
                 {"classes", cfg.num_classes},
                 {"detections", cfg.num_detections},
                 {"mask", {cfg.mask_h, cfg.mask_w}},
                 {"feature_channels", cfg.feature_channels},
                 {"keep_fraction", cfg.keep_fraction}};
  const std::string text = j.dump(2) + "\n";
  if (args.report.empty())
    std::cout << text;
  else
    imp::write_text_file(args.report, text);

  if (!report.passed) {
    json extra = {{"max_rel_error", report.max_rel_error}};
    if (!args.report.empty()) extra["report"] = args.report;
    print_error("GradcheckFailure", "max relative error exceeds tolerance", extra);
    return kExitFailure;
  }
  return kExitOk;
}

// ---------------------------------------------------------------- bench

struct BenchArgs {
  std::string canvas = "256x512";
  int classes = 8;
  int detections = 100;
  int mask = 28;
  int scale = 4;
  int repeats = 20;
  std::uint64_t seed = 1;
  std::string isa = "auto";
};

json timing(std::vector<double> ms) {
  std::sort(ms.begin(), ms.end());
  const auto at = [&](double q) {
    const auto i = static_cast<std::size_t>(std::ceil(q * static_cast<double>(ms.size()))) - 1;
    return ms[std::min(i, ms.size() - 1)];
  };
  const double median = ms.size() % 2 ? ms[ms.size() / 2]
                                      : 0.5 * (ms[ms.size() / 2 - 1] + ms[ms.size() / 2]);
  return {{"median", median}, {"p95", at(0.95)}, {"min", ms.front()}};
}

int run_bench(const BenchArgs& args) {
  const auto [rows, cols] = parse_dims(args.canvas, "--canvas");
  if (rows < 1 || cols < 1 || args.classes < 1 || args.detections < 0 || args.mask < 1 ||
      args.scale < 1 || args.repeats < 1)
    throw imp::Error(imp::ErrorCode::InvalidArgument, "bench sizes must be positive");
  if (args.isa != "auto") {
    const auto isa = imp::simd::parse_isa(args.isa);
    if (!imp::simd::is_available(isa))
      throw imp::Error(imp::ErrorCode::InvalidArgument,
                       "ISA '" + args.isa + "' is not available on this machine");
    imp::simd::set_active_isa(isa);
  }

  const imp::CanvasSpec spec{args.classes, rows * args.scale, cols * args.scale, args.scale};
  imp::Rng rng(args.seed);
  imp::RandomDetectionOptions opts;
  opts.min_mask = opts.max_mask = args.mask;
  opts.allow_outside = false;
  const auto dets = imp::random_detections<float>(rng, spec, args.detections, opts);
  imp::Tensor3<float> grad(spec.num_classes, rows, cols);
  for (auto& g : grad.data) g = static_cast<float>(rng.normal());

  using clock = std::chrono::steady_clock;
  const auto elapsed = [](clock::time_point t0) {
    return std::chrono::duration<double, std::milli>(clock::now() - t0).count();
  };
  std::vector<double> fwd_ms, bwd_ms;
  auto fwd = imp::imp_forward(dets, spec);  // warm-up
  for (int r = 0; r < args.repeats; ++r) {
    auto t0 = clock::now();
    fwd = imp::imp_forward(dets, spec);
    fwd_ms.push_back(elapsed(t0));
    t0 = clock::now();
    const auto grads = imp::imp_backward(grad, fwd.provenance, dets);
    bwd_ms.push_back(elapsed(t0));
  }

  json j = {{"isa", imp::simd::to_string(imp::simd::active_isa())},
            {"canvas", {rows, cols}},
            {"image", {spec.height, spec.width}},
            {"scale", args.scale},
            {"classes", args.classes},
            {"detections", args.detections},
            {"mask", args.mask},
            {"repeats", args.repeats},
            {"forward_ms", timing(fwd_ms)},
            {"backward_ms", timing(bwd_ms)}};
  std::cout << j.dump(2) << "\n";
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Instance mask projection: project, evaluate, convert, check gradients, bench"};
  app.require_subcommand(1);

  ProjectArgs project;
  auto* p = app.add_subcommand("project", "Project detections to per-image label map PNGs");
  p->add_option("detections", project.detections, "Detection JSON file")->required();
  p->add_option("--config", project.config, "Dataset config JSON")->required();
  p->add_option("--scale", project.scale, "Canvas downsampling factor (overrides config)");
  p->add_option("--tau", project.tau, "Background threshold on the canvas max")
      ->capture_default_str();
  p->add_option("--out-dir", project.out_dir, "Output directory")->required();
  p->add_flag("--emit-canvas", project.emit_canvas, "Also write <image_id>.canvas dumps");
  p->add_option("--height", project.height, "Image height for undeclared images");
  p->add_option("--width", project.width, "Image width for undeclared images");
  p->add_option("--jobs", project.jobs, "Worker threads (default: IMP_JOBS or 1)");
  p->add_option("--mode", project.mode, "Upsampling of the label grid")
      ->check(CLI::IsMember({"nearest", "bilinear"}))
      ->capture_default_str();

  EvalArgs eval;
  auto* e = app.add_subcommand("eval", "Score predicted label maps against ground truth");
  e->add_option("pred_dir", eval.pred_dir, "Directory of predicted PNGs")->required();
  e->add_option("gt_dir", eval.gt_dir, "Directory of ground-truth PNGs")->required();
  e->add_option("--config", eval.config, "Dataset config JSON")->required();
  auto* thr = e->add_option("--boundary-thresholds", eval.thresholds,
                            "Distance thresholds in pixels; no values = 10 20 50 100 200 400")
                  ->expected(0, CLI::detail::expected_max_vector_size)
                  ->allow_extra_args();
  e->add_option("--out-dir", eval.out_dir, "Report directory")->required();
  e->add_option("--jobs", eval.jobs, "Worker threads (default: IMP_JOBS or 1)");

  ConvertArgs convert;
  auto* c = app.add_subcommand("convert-gt", "Turn GT label maps into score-1 detections");
  c->add_option("gt_dir", convert.gt_dir, "Directory of ground-truth PNGs")->required();
  c->add_option("--config", convert.config, "Dataset config JSON")->required();
  c->add_option("--mask-dims", convert.mask_dims, "HxW or 'native' (default: config)");
  c->add_option("--min-area", convert.min_area, "Drop components smaller than this")
      ->capture_default_str();
  c->add_option("--out", convert.out, "Output JSON file (default: stdout)");

  GradcheckArgs grad;
  auto* g = app.add_subcommand("gradcheck", "Finite-difference check of the backward pass");
  g->add_option("--seed", grad.seed)->capture_default_str();
  g->add_option("--canvas", grad.canvas, "Canvas size HxW")->capture_default_str();
  g->add_option("--detections", grad.detections)->capture_default_str();
  g->add_option("--classes", grad.classes)->capture_default_str();
  g->add_option("--step", grad.step, "Central-difference step")->capture_default_str();
  g->add_option("--tol", grad.tol, "Relative error tolerance")->capture_default_str();
  g->add_option("--report", grad.report, "Write the JSON report here instead of stdout");

  BenchArgs bench;
  auto* b = app.add_subcommand("bench", "Time forward and backward passes");
  b->add_option("--canvas", bench.canvas, "Canvas size HxW")->capture_default_str();
  b->add_option("--classes", bench.classes)->capture_default_str();
  b->add_option("--detections", bench.detections)->capture_default_str();
  b->add_option("--mask", bench.mask, "Square mask side")->capture_default_str();
  b->add_option("--scale", bench.scale)->capture_default_str();
  b->add_option("--repeats", bench.repeats)->capture_default_str();
  b->add_option("--seed", bench.seed)->capture_default_str();
  b->add_option("--isa", bench.isa, "auto, scalar, avx2 or neon")->capture_default_str();

  try {
    app.parse(argc, argv);
  } catch (const CLI::Success& s) {
    return app.exit(s);
  } catch (const CLI::ParseError& err) {
    print_error("UsageError", err.what());
    return kExitInput;
  }

  try {
    if (*p) return run_project(project);
    if (*e) {
      eval.boundary = thr->count() > 0;
      return run_eval(eval);
    }
    if (*c) return run_convert(convert);
    if (*g) return run_gradcheck(grad);
    if (*b) return run_bench(bench);
  } catch (const imp::Error& err) {
    json extra = json::object();
    if (err.cause() != err.code()) extra["cause"] = std::string(imp::to_string(err.cause()));
    print_error(imp::to_string(err.code()), err.what(), extra);
    return kExitInput;
  } catch (const std::exception& err) {
    print_error("IoError", err.what());
    return kExitInput;
  }
  return kExitInput;
}
