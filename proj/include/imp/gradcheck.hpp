#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "imp/train.hpp"
#include "imp/types.hpp"

namespace imp {

/// A differentiable program over named flat input tensors, as seen by the
/// finite-difference harness.
struct Program {
  struct Input {
    std::string name;
    std::vector<double> values;
  };
  using Inputs = std::vector<Input>;

  Inputs inputs;
  /// Scalar loss at the given inputs.
  std::function<double(const Inputs&)> forward;
  /// Analytic gradient, one vector per input tensor.
  std::function<std::vector<std::vector<double>>(const Inputs&)> gradient;
  /// Optional: marks coordinates whose perturbation may flip a
  /// non-differentiable selection (max winner). One flag vector per input.
  std::function<std::vector<std::vector<char>>(const Inputs&, double step)> tie_proximal;
};

struct GradcheckOptions {
  double step = 1e-3;
  double tolerance = 1e-4;
  /// Denominator floor of the relative error |a - n| / max(|a|, |n|, floor).
  double relative_floor = 1e-6;
  std::size_t max_listed = 32;  // offending / tie-proximal coordinates kept in the report
};

struct CoordinateError {
  std::string tensor;
  std::size_t coordinate = 0;
  double analytic = 0.0;
  double numeric = 0.0;
  double rel_error = 0.0;
};

struct TensorSummary {
  std::string name;
  std::size_t checked = 0;
  std::size_t tie_proximal = 0;
  double max_rel_error = 0.0;  // over non-tie-proximal coordinates
};

struct GradcheckReport {
  bool passed = false;
  double max_rel_error = 0.0;
  double step = 0.0;
  double tolerance = 0.0;
  std::vector<TensorSummary> tensors;
  std::vector<CoordinateError> offending;     // rel error above tolerance, not tie-proximal
  std::vector<CoordinateError> tie_proximal;  // excluded from the verdict
  std::size_t tie_proximal_total = 0;

  std::string to_json() const;
};

/// Central differences on every input coordinate. Throws NonFiniteValue if
/// the program yields a non-finite loss or gradient.
GradcheckReport gradcheck(const Program& program, const GradcheckOptions& options = {});

/// Settings of the canonical end-to-end check:
/// imp_forward -> concat with fixed features -> linear readout ->
/// bootstrapped CE against a random target, differentiated with respect to
/// every detection score and mask value.
struct ImpProgramConfig {
  std::uint64_t seed = 1;
  int canvas_rows = 16;
  int canvas_cols = 16;
  int scale = 4;
  int num_classes = 3;
  int num_detections = 4;
  int mask_h = 6;
  int mask_w = 6;
  int feature_channels = 2;
  double keep_fraction = 0.25;
  double ignore_fraction = 0.1;
  /// Contributions closer than this at a cell count as a near tie; the
  /// effective margin is max(tie_margin, 2 * step).
  double tie_margin = 1e-3;
};

/// Builds the seeded instance and wraps it as a Program. The bootstrap
/// selection is computed once at the unperturbed inputs and held fixed.
Program make_imp_program(const ImpProgramConfig& config);

}  // namespace imp
