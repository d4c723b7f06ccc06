#pragma once

#include <cstdint>
#include <vector>

#include "imp/types.hpp"

namespace imp {

/// (C+1) x (C+1) pixel counts; row = ground truth, column = prediction, with
/// index C standing for BACKGROUND. IGNORE pixels are never counted.
class ConfusionMatrix {
 public:
  ConfusionMatrix() = default;
  explicit ConfusionMatrix(int num_classes);

  int num_classes() const { return num_classes_; }
  int size() const { return num_classes_ + 1; }

  std::uint64_t at(int gt, int pred) const {
    return counts_[static_cast<std::size_t>(gt) * size() + pred];
  }
  void add(int gt, int pred, std::uint64_t n = 1) {
    counts_[static_cast<std::size_t>(gt) * size() + pred] += n;
  }
  std::uint64_t row_sum(int gt) const;
  std::uint64_t col_sum(int pred) const;
  std::uint64_t total() const;

  /// Entrywise sum; both matrices must have the same class count.
  ConfusionMatrix& operator+=(const ConfusionMatrix& other);
  bool operator==(const ConfusionMatrix&) const = default;

  const std::vector<std::uint64_t>& counts() const { return counts_; }

 private:
  int num_classes_ = 0;
  std::vector<std::uint64_t> counts_;
};

/// cm[gt[p]][pred[p]] += 1 for every pixel whose gt is not IGNORE. Throws
/// ShapeMismatch or LabelOutOfRange.
void accumulate(ConfusionMatrix& cm, const LabelMap& pred, const LabelMap& gt);

/// IOU per class (index C is background); NaN marks classes absent from
/// both ground truth and prediction.
std::vector<double> iou_per_class(const ConfusionMatrix& cm);

/// Recall per class; NaN where the class never occurs in ground truth.
std::vector<double> accuracy_per_class(const ConfusionMatrix& cm);

double miou(const ConfusionMatrix& cm, bool include_background);
double macc(const ConfusionMatrix& cm, bool include_background);

}  // namespace imp
