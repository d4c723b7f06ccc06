#include "imp/gradcheck.hpp"

#include <algorithm>
#include <cmath>
#include <memory>

#include "imp/projection.hpp"
#include "imp/rng.hpp"
#include "imp/synthetic.hpp"
#include "json.hpp"

namespace imp {

namespace {

nlohmann::json coordinate_json(const CoordinateError& e) {
  return {{"tensor", e.tensor},
          {"coordinate", e.coordinate},
          {"analytic", e.analytic},
          {"numeric", e.numeric},
          {"rel_error", e.rel_error}};
}

void require_finite(double v, const std::string& what) {
  if (!std::isfinite(v)) throw Error(ErrorCode::NonFiniteValue, what + " is not finite");
}

}  // namespace

std::string GradcheckReport::to_json() const {
  nlohmann::json j;
  j["passed"] = passed;
  j["max_rel_error"] = max_rel_error;
  j["step"] = step;
  j["tolerance"] = tolerance;
  j["tensors"] = nlohmann::json::array();
  for (const auto& t : tensors)
    j["tensors"].push_back({{"name", t.name},
                            {"checked", t.checked},
                            {"tie_proximal", t.tie_proximal},
                            {"max_rel_error", t.max_rel_error}});
  j["offending"] = nlohmann::json::array();
  for (const auto& e : offending) j["offending"].push_back(coordinate_json(e));
  j["tie_proximal_total"] = tie_proximal_total;
  j["tie_proximal"] = nlohmann::json::array();
  for (const auto& e : tie_proximal) j["tie_proximal"].push_back(coordinate_json(e));
  return j.dump(2);
}

GradcheckReport gradcheck(const Program& program, const GradcheckOptions& options) {
  if (!(options.step > 0.0) || !std::isfinite(options.step))
    throw Error(ErrorCode::InvalidArgument, "gradcheck step must be a positive finite number");
  GradcheckReport report;
  report.step = options.step;
  report.tolerance = options.tolerance;

  const auto analytic = program.gradient(program.inputs);
  if (analytic.size() != program.inputs.size())
    throw Error(ErrorCode::ShapeMismatch, "gradient returned the wrong number of tensors");
  std::vector<std::vector<char>> ties;
  if (program.tie_proximal) ties = program.tie_proximal(program.inputs, options.step);
  require_finite(program.forward(program.inputs), "loss");

  Program::Inputs x = program.inputs;
  for (std::size_t t = 0; t < x.size(); ++t) {
    TensorSummary summary;
    summary.name = x[t].name;
    if (analytic[t].size() != x[t].values.size())
      throw Error(ErrorCode::ShapeMismatch, "gradient for '" + x[t].name + "' has wrong size");
    for (std::size_t i = 0; i < x[t].values.size(); ++i) {
      const double original = x[t].values[i];
      x[t].values[i] = original + options.step;
      const double plus = program.forward(x);
      x[t].values[i] = original - options.step;
      const double minus = program.forward(x);
      x[t].values[i] = original;
      require_finite(plus, "perturbed loss");
      require_finite(minus, "perturbed loss");

      const double a = analytic[t][i];
      require_finite(a, "analytic gradient of '" + x[t].name + "'");
      const double n = (plus - minus) / (2.0 * options.step);
      const double rel =
          std::abs(a - n) / std::max({std::abs(a), std::abs(n), options.relative_floor});
      const CoordinateError entry{x[t].name, i, a, n, rel};
      ++summary.checked;
      const bool tie = !ties.empty() && t < ties.size() && i < ties[t].size() && ties[t][i];
      if (tie) {
        ++summary.tie_proximal;
        ++report.tie_proximal_total;
        if (report.tie_proximal.size() < options.max_listed) report.tie_proximal.push_back(entry);
        continue;
      }
      summary.max_rel_error = std::max(summary.max_rel_error, rel);
      if (rel > options.tolerance && report.offending.size() < options.max_listed)
        report.offending.push_back(entry);
    }
    report.max_rel_error = std::max(report.max_rel_error, summary.max_rel_error);
    report.tensors.push_back(summary);
  }
  report.passed = report.max_rel_error <= options.tolerance;
  return report;
}

namespace {

// Fixed part of the canonical program; the inputs vector carries the rest.
struct ImpInstance {
  CanvasSpec spec;
  std::vector<BasicDetection<double>> detections;  // template: boxes, classes, dims
  Tensor3<double> features;
  LinearReadout readout;
  LabelMap target;
  std::vector<std::size_t> kept;
  double tie_margin = 1e-3;

  std::vector<BasicDetection<double>> with_inputs(const Program::Inputs& in) const {
    auto dets = detections;
    std::size_t offset = 0;
    for (std::size_t i = 0; i < dets.size(); ++i) {
      dets[i].score = in[0].values[i];
      for (auto& v : dets[i].mask.values) v = in[1].values[offset++];
    }
    return dets;
  }

  Tensor3<double> logits(const std::vector<BasicDetection<double>>& dets,
                         ForwardResult<double>* keep = nullptr) const {
    auto fwd = imp_forward(dets, spec);
    auto out = readout.forward(concat_canvas(features, fwd.canvas));
    if (keep) *keep = std::move(fwd);
    return out;
  }
};

}  // namespace

Program make_imp_program(const ImpProgramConfig& config) {
  auto inst = std::make_shared<ImpInstance>();
  Rng rng(config.seed);
  inst->spec = CanvasSpec{config.num_classes, config.canvas_rows * config.scale,
                          config.canvas_cols * config.scale, config.scale};
  inst->tie_margin = config.tie_margin;

  RandomDetectionOptions det_opts;
  det_opts.min_score = 0.3;
  det_opts.max_score = 0.95;
  det_opts.min_mask_value = 0.05;
  det_opts.max_mask_value = 0.95;
  det_opts.min_box_fraction = 0.3;
  det_opts.max_box_fraction = 0.8;
  det_opts.min_mask = std::min(config.mask_h, config.mask_w);
  det_opts.max_mask = std::max(config.mask_h, config.mask_w);
  inst->detections =
      random_detections<double>(rng, inst->spec, config.num_detections, det_opts);

  const int rows = inst->spec.rows();
  const int cols = inst->spec.cols();
  inst->features = Tensor3<double>(config.feature_channels, rows, cols);
  for (auto& v : inst->features.data) v = 0.5 * rng.normal();

  const int in_channels = config.feature_channels + config.num_classes;
  const int out_channels = config.num_classes + 1;
  inst->readout.in_channels = in_channels;
  inst->readout.out_channels = out_channels;
  inst->readout.weight.resize(static_cast<std::size_t>(in_channels) * out_channels);
  for (auto& w : inst->readout.weight) w = 2.0 * rng.normal();
  inst->readout.bias.resize(out_channels);
  for (auto& b : inst->readout.bias) b = 0.1 * rng.normal();

  inst->target = random_labelmap(rng, rows, cols, LabelSpace{config.num_classes, kDefaultIgnore},
                                 config.ignore_fraction);

  Program program;
  Program::Input scores{"scores", {}};
  Program::Input masks{"masks", {}};
  for (const auto& d : inst->detections) {
    scores.values.push_back(d.score);
    masks.values.insert(masks.values.end(), d.mask.values.begin(), d.mask.values.end());
  }
  program.inputs = {scores, masks};

  inst->kept = bootstrapped_ce(inst->logits(inst->detections), inst->target,
                               config.keep_fraction)
                   .kept;

  program.forward = [inst](const Program::Inputs& in) {
    return cross_entropy_on(inst->logits(inst->with_inputs(in)), inst->target, inst->kept).loss;
  };

  program.gradient = [inst](const Program::Inputs& in) {
    const auto dets = inst->with_inputs(in);
    ForwardResult<double> fwd;
    const auto logits = inst->logits(dets, &fwd);
    const auto ce = cross_entropy_on(logits, inst->target, inst->kept);
    const auto d_concat = inst->readout.backward(ce.grad_logits);
    const auto [d_features, d_canvas] = split_concat_grad(d_concat, inst->features.channels);
    const auto grads = imp_backward(d_canvas, fwd.provenance, dets);
    std::vector<std::vector<double>> out(2);
    for (const auto& g : grads) {
      out[0].push_back(g.d_score);
      out[1].insert(out[1].end(), g.d_mask.begin(), g.d_mask.end());
    }
    return out;
  };

  program.tie_proximal = [inst](const Program::Inputs& in, double step) {
    const auto dets = inst->with_inputs(in);
    std::vector<std::vector<char>> flags(2);
    flags[0].assign(in[0].values.size(), 0);
    flags[1].assign(in[1].values.size(), 0);
    std::vector<std::size_t> mask_offset(dets.size(), 0);
    std::vector<int> position(dets.size(), 0);
    for (std::size_t i = 0, off = 0; i < dets.size(); ++i) {
      mask_offset[i] = off;
      off += dets[i].mask.values.size();
      position[dets[i].index] = static_cast<int>(i);
    }
    const double margin = std::max(inst->tie_margin, 2.0 * step);
    const auto ties =
        find_near_ties(std::span<const BasicDetection<double>>(dets), inst->spec, margin);
    for (const auto& tie : ties) {
      for (int idx : tie.contenders) {
        const int pos = position[idx];
        const auto& d = dets[pos];
        flags[0][pos] = 1;
        const auto p = pre_map(tie.y, tie.x, d.bbox, d.mask.h, d.mask.w, inst->spec);
        if (!p) continue;
        const std::size_t base = mask_offset[pos];
        for (int r : {p->row.lo, p->row.hi})
          for (int c : {p->col.lo, p->col.hi})
            flags[1][base + static_cast<std::size_t>(r) * d.mask.w + c] = 1;
      }
    }
    return flags;
  };
  return program;
}

}  // namespace imp
