#include "imp/metrics.hpp"

#include <cmath>
#include <limits>
#include <string>

namespace imp {

ConfusionMatrix::ConfusionMatrix(int num_classes)
    : num_classes_(num_classes),
      counts_(static_cast<std::size_t>(num_classes + 1) * (num_classes + 1), 0) {
  if (num_classes < 1) throw Error(ErrorCode::InvalidArgument, "num_classes must be >= 1");
}

std::uint64_t ConfusionMatrix::row_sum(int gt) const {
  std::uint64_t s = 0;
  for (int p = 0; p < size(); ++p) s += at(gt, p);
  return s;
}

std::uint64_t ConfusionMatrix::col_sum(int pred) const {
  std::uint64_t s = 0;
  for (int g = 0; g < size(); ++g) s += at(g, pred);
  return s;
}

std::uint64_t ConfusionMatrix::total() const {
  std::uint64_t s = 0;
  for (auto v : counts_) s += v;
  return s;
}

ConfusionMatrix& ConfusionMatrix::operator+=(const ConfusionMatrix& other) {
  if (other.num_classes_ != num_classes_)
    throw Error(ErrorCode::ShapeMismatch, "confusion matrices differ in class count");
  for (std::size_t i = 0; i < counts_.size(); ++i) counts_[i] += other.counts_[i];
  return *this;
}

void accumulate(ConfusionMatrix& cm, const LabelMap& pred, const LabelMap& gt) {
  if (pred.rows != gt.rows || pred.cols != gt.cols)
    throw Error(ErrorCode::ShapeMismatch,
                "prediction is " + std::to_string(pred.rows) + "x" + std::to_string(pred.cols) +
                    ", ground truth is " + std::to_string(gt.rows) + "x" +
                    std::to_string(gt.cols));
  const int background = cm.num_classes();
  const std::uint16_t ignore = gt.space.ignore;
  for (std::size_t i = 0; i < gt.labels.size(); ++i) {
    const std::uint16_t g = gt.labels[i];
    if (g == ignore) continue;
    const std::uint16_t p = pred.labels[i];
    if (g > background || p > background)
      throw Error(ErrorCode::LabelOutOfRange,
                  "label " + std::to_string(g > background ? g : p) + " at pixel " +
                      std::to_string(i) + " exceeds background id " +
                      std::to_string(background));
    cm.add(g, p);
  }
}

std::vector<double> iou_per_class(const ConfusionMatrix& cm) {
  std::vector<double> iou(cm.size(), std::numeric_limits<double>::quiet_NaN());
  for (int c = 0; c < cm.size(); ++c) {
    const std::uint64_t tp = cm.at(c, c);
    const std::uint64_t denom = cm.row_sum(c) + cm.col_sum(c) - tp;
    if (denom > 0) iou[c] = static_cast<double>(tp) / static_cast<double>(denom);
  }
  return iou;
}

std::vector<double> accuracy_per_class(const ConfusionMatrix& cm) {
  std::vector<double> acc(cm.size(), std::numeric_limits<double>::quiet_NaN());
  for (int c = 0; c < cm.size(); ++c) {
    const std::uint64_t rs = cm.row_sum(c);
    if (rs > 0) acc[c] = static_cast<double>(cm.at(c, c)) / static_cast<double>(rs);
  }
  return acc;
}

namespace {

double mean_present(const std::vector<double>& values, int num_classes, bool include_background) {
  const int n = include_background ? num_classes + 1 : num_classes;
  double sum = 0.0;
  int count = 0;
  for (int c = 0; c < n; ++c) {
    if (std::isnan(values[c])) continue;
    sum += values[c];
    ++count;
  }
  return count > 0 ? sum / count : std::numeric_limits<double>::quiet_NaN();
}

}  // namespace

double miou(const ConfusionMatrix& cm, bool include_background) {
  return mean_present(iou_per_class(cm), cm.num_classes(), include_background);
}

double macc(const ConfusionMatrix& cm, bool include_background) {
  return mean_present(accuracy_per_class(cm), cm.num_classes(), include_background);
}

}  // namespace imp
