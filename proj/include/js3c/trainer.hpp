#pragma once

#include <cstdint>
#include <ostream>
#include <string>
#include <vector>

#include "js3c/labeled_volume.hpp"
#include "js3c/model.hpp"
#include "js3c/point_cloud.hpp"

namespace js3c {

// One training example: a labeled sweep and its completion ground truth.
// The sweep's labels are per-point classes 1..C (0 = unlabeled); the volume
// carries 0 = empty, 1..C = classes, 255 = unobserved.
struct TrainScene {
  PointCloud sweep;
  LabeledVolume gt;
};

struct TrainConfig {
  int epochs = 3;
  double lr = 1e-3;
  std::uint64_t seed = 0;
  bool seg_only = false;  // train W_seg alone with a plain point loss
  bool augment = true;    // grid-aligned flips/turns on sweep and volume
  std::string checkpoint_dir;  // empty: keep checkpoints off disk
};

struct StepStats {
  double loss_seg = 0.0;
  double loss_complet = 0.0;
  double sigma1 = 1.0;
  double sigma2 = 1.0;
  double total = 0.0;
};

struct EpochStats {
  double mean_total = 0.0;
  double mean_seg = 0.0;
  double mean_complet = 0.0;
  long steps = 0;
};

// Inverse-sqrt-frequency class weights over a training split: point-label
// weights for the segmentation loss (C entries over shifted classes 0..C-1)
// and cell-label weights for the completion loss (C+1 entries, empty first).
std::vector<double> seg_class_weights(const std::vector<TrainScene>& scenes,
                                      int num_classes);
std::vector<double> ssc_class_weights(const std::vector<TrainScene>& scenes,
                                      int num_classes);

class Trainer {
 public:
  // The model is borrowed and updated in place. Scenes must share the
  // model's completion volume spec.
  Trainer(Model& model, TrainConfig cfg);

  // Runs one pass over the scenes in order, one Adam step per scene, and
  // returns the epoch means. `epoch` drives the rate schedule and the
  // augmentation stream. Writes one `step L_seg L_complet sigma1 sigma2
  // total` line per step to `log` when given. Throws contract_error on a
  // non-finite loss.
  EpochStats run_epoch(const std::vector<TrainScene>& scenes, long epoch,
                       std::ostream* log);

  // Full run: writes checkpoint_NNN.jsck after every epoch (and the initial
  // state as checkpoint_000.jsck) plus final.jsck when checkpoint_dir is
  // set. Returns per-epoch stats.
  std::vector<EpochStats> fit(const std::vector<TrainScene>& scenes,
                              std::ostream* log);

  // One forward/backward/update on a single scene; exposed for tests.
  StepStats step(const TrainScene& scene, long epoch, long step_index);

  const std::vector<double>& seg_weights() const { return seg_w_; }
  const std::vector<double>& ssc_weights() const { return ssc_w_; }
  void set_weights(std::vector<double> seg_w, std::vector<double> ssc_w);

 private:
  Model& model_;
  TrainConfig cfg_;
  std::vector<double> seg_w_, ssc_w_;
  bool weights_ready_ = false;
  long global_step_ = 0;
};

// Mean per-point probabilities -> predicted labels 1..C (argmax + 1).
std::vector<std::int32_t> labels_from_probs(const ad::Tensor& probs);

// Stamps features = positions, the convention every pipeline entry uses.
PointCloud with_position_features(PointCloud cloud);

}  // namespace js3c
