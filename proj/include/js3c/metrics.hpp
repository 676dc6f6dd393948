#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "js3c/labeled_volume.hpp"

namespace js3c {

// Square confusion counts: rows = truth, cols = prediction, plus a count of
// ignored elements. Mergeable across scenes.
struct ConfusionMatrix {
  int num_labels = 0;
  std::vector<long> counts;  // num_labels^2, row-major
  long ignored = 0;

  explicit ConfusionMatrix(int labels = 0)
      : num_labels(labels),
        counts(static_cast<std::size_t>(labels) * static_cast<std::size_t>(labels), 0) {}

  void add(int truth, int pred) {
    counts[static_cast<std::size_t>(truth) * num_labels + pred] += 1;
  }

  long at(int truth, int pred) const {
    return counts[static_cast<std::size_t>(truth) * num_labels + pred];
  }

  void merge(const ConfusionMatrix& other);

  long tp(int c) const { return at(c, c); }
  long fp(int c) const;
  long fn(int c) const;
};

// Per-class IoU = TP / (TP + FP + FN). A negative entry marks a class absent
// from both prediction and truth (excluded from means).
std::vector<double> per_class_iou(const ConfusionMatrix& cm);

// Point segmentation mIoU over classes 1..C; label 0 is ignored entirely.
// Classes absent from both prediction and truth are excluded from the mean.
double seg_miou(const std::vector<std::int32_t>& pred,
                const std::vector<std::int32_t>& truth, int num_classes,
                ConfusionMatrix* out_cm = nullptr);

struct ScMetrics {
  double precision = 0.0;
  double recall = 0.0;
  double iou = 0.0;
};

// Binary scene-completion quality: occupied = label in 1..C, evaluated over
// cells valid in the ground truth (255 excluded).
ScMetrics sc_metrics(const LabeledVolume& pred, const LabeledVolume& truth,
                     int num_classes);

// Semantic completion mIoU over classes 0..C with the empty class excluded
// from the mean; 255 cells in the truth are excluded from all counts.
double ssc_miou(const LabeledVolume& pred, const LabeledVolume& truth,
                int num_classes, ConfusionMatrix* out_cm = nullptr);

// Two-form report: aligned text table plus machine-readable "key value"
// lines, one metric per line.
struct MetricsReport {
  std::vector<std::pair<std::string, double>> entries;

  void add(const std::string& key, double value) { entries.emplace_back(key, value); }
  std::string table() const;
  std::string key_values() const;
};

}  // namespace js3c
