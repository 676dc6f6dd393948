#include "js3c/metrics.hpp"

#include <cmath>
#include <cstdio>

#include "js3c/errors.hpp"

namespace js3c {

void ConfusionMatrix::merge(const ConfusionMatrix& other) {
  require(other.num_labels == num_labels, "confusion merge: size mismatch");
  for (std::size_t i = 0; i < counts.size(); ++i) counts[i] += other.counts[i];
  ignored += other.ignored;
}

long ConfusionMatrix::fp(int c) const {
  long n = 0;
  for (int t = 0; t < num_labels; ++t)
    if (t != c) n += at(t, c);
  return n;
}

long ConfusionMatrix::fn(int c) const {
  long n = 0;
  for (int p = 0; p < num_labels; ++p)
    if (p != c) n += at(c, p);
  return n;
}

std::vector<double> per_class_iou(const ConfusionMatrix& cm) {
  std::vector<double> iou(static_cast<std::size_t>(cm.num_labels), -1.0);
  for (int c = 0; c < cm.num_labels; ++c) {
    const long tp = cm.tp(c), fp = cm.fp(c), fn = cm.fn(c);
    if (tp + fp + fn == 0) continue;  // absent from both
    iou[static_cast<std::size_t>(c)] =
        static_cast<double>(tp) / static_cast<double>(tp + fp + fn);
  }
  return iou;
}

double seg_miou(const std::vector<std::int32_t>& pred,
                const std::vector<std::int32_t>& truth, int num_classes,
                ConfusionMatrix* out_cm) {
  require(pred.size() == truth.size(), "seg_miou: length mismatch");
  ConfusionMatrix cm(num_classes + 1);
  for (std::size_t i = 0; i < pred.size(); ++i) {
    const std::int32_t t = truth[i], p = pred[i];
    require(t >= 0 && t <= num_classes, "seg_miou: truth label out of range");
    require(p >= 0 && p <= num_classes, "seg_miou: predicted label out of range");
    if (t == 0) {
      ++cm.ignored;
      continue;
    }
    cm.add(t, p);
  }
  const auto iou = per_class_iou(cm);
  double sum = 0.0;
  int n = 0;
  for (int c = 1; c <= num_classes; ++c) {
    if (iou[static_cast<std::size_t>(c)] < 0.0) continue;
    sum += iou[static_cast<std::size_t>(c)];
    ++n;
  }
  if (out_cm) *out_cm = cm;
  require(n > 0, "seg_miou: no class present in prediction or truth");
  return sum / static_cast<double>(n);
}

ScMetrics sc_metrics(const LabeledVolume& pred, const LabeledVolume& truth,
                     int num_classes) {
  require(pred.spec == truth.spec, "sc_metrics: volume specs differ");
  require(pred.labels.size() == truth.labels.size(), "sc_metrics: cell count mismatch");
  long tp = 0, fp = 0, fn = 0;
  for (std::size_t i = 0; i < truth.labels.size(); ++i) {
    const std::uint8_t t = truth.labels[i];
    if (t == LabeledVolume::kInvalid) continue;
    const std::uint8_t p = pred.labels[i];
    require(p != LabeledVolume::kInvalid, "sc_metrics: invalid label in prediction");
    require(t <= num_classes && p <= num_classes, "sc_metrics: label out of range");
    const bool to = t >= 1, po = p >= 1;
    if (to && po) ++tp;
    else if (!to && po) ++fp;
    else if (to && !po) ++fn;
  }
  ScMetrics out;
  out.precision = tp + fp == 0 ? 0.0 : static_cast<double>(tp) / static_cast<double>(tp + fp);
  out.recall = tp + fn == 0 ? 0.0 : static_cast<double>(tp) / static_cast<double>(tp + fn);
  out.iou = tp + fp + fn == 0 ? 0.0
                              : static_cast<double>(tp) / static_cast<double>(tp + fp + fn);
  return out;
}

double ssc_miou(const LabeledVolume& pred, const LabeledVolume& truth,
                int num_classes, ConfusionMatrix* out_cm) {
  require(pred.spec == truth.spec, "ssc_miou: volume specs differ");
  ConfusionMatrix cm(num_classes + 1);
  for (std::size_t i = 0; i < truth.labels.size(); ++i) {
    const std::uint8_t t = truth.labels[i];
    if (t == LabeledVolume::kInvalid) {
      ++cm.ignored;
      continue;
    }
    const std::uint8_t p = pred.labels[i];
    require(p != LabeledVolume::kInvalid, "ssc_miou: invalid label in prediction");
    require(t <= num_classes && p <= num_classes, "ssc_miou: label out of range");
    cm.add(t, p);
  }
  const auto iou = per_class_iou(cm);
  double sum = 0.0;
  int n = 0;
  for (int c = 1; c <= num_classes; ++c) {  // empty class excluded from the mean
    if (iou[static_cast<std::size_t>(c)] < 0.0) continue;
    sum += iou[static_cast<std::size_t>(c)];
    ++n;
  }
  if (out_cm) *out_cm = cm;
  require(n > 0, "ssc_miou: no semantic class present in prediction or truth");
  return sum / static_cast<double>(n);
}

std::string MetricsReport::table() const {
  std::size_t width = 6;
  for (const auto& [k, v] : entries) width = std::max(width, k.size());
  std::string out;
  char buf[128];
  std::snprintf(buf, sizeof(buf), "%-*s  %12s\n", static_cast<int>(width), "metric",
                "value");
  out += buf;
  out.append(width + 14, '-');
  out += '\n';
  for (const auto& [k, v] : entries) {
    std::snprintf(buf, sizeof(buf), "%-*s  %12.6f\n", static_cast<int>(width),
                  k.c_str(), v);
    out += buf;
  }
  return out;
}

std::string MetricsReport::key_values() const {
  std::string out;
  char buf[128];
  for (const auto& [k, v] : entries) {
    std::snprintf(buf, sizeof(buf), "%s %.17g\n", k.c_str(), v);
    out += buf;
  }
  return out;
}

}  // namespace js3c
