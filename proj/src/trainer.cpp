#include "js3c/trainer.hpp"

#include <cmath>
#include <cstdio>

#include "js3c/losses.hpp"
#include "js3c/ops.hpp"

namespace js3c {

namespace ops = ad::ops;
namespace loss = ad::loss;
using ad::Tape;
using ad::Tensor;

PointCloud with_position_features(PointCloud cloud) {
  cloud.features = Tensor({cloud.size(), 3});
  for (long i = 0; i < cloud.size(); ++i)
    for (int a = 0; a < 3; ++a)
      cloud.features.data[i * 3 + a] = cloud.positions[static_cast<std::size_t>(i)][a];
  return cloud;
}

std::vector<std::int32_t> labels_from_probs(const Tensor& probs) {
  require(probs.rank() == 2 && probs.cols() >= 1, "labels_from_probs: need rows");
  std::vector<std::int32_t> out;
  out.reserve(static_cast<std::size_t>(probs.rows()));
  for (long i = 0; i < probs.rows(); ++i) {
    long best = 0;
    for (long c = 1; c < probs.cols(); ++c)
      if (probs.data[i * probs.cols() + c] > probs.data[i * probs.cols() + best])
        best = c;
    out.push_back(static_cast<std::int32_t>(best + 1));
  }
  return out;
}

std::vector<double> seg_class_weights(const std::vector<TrainScene>& scenes,
                                      int num_classes) {
  std::vector<long> counts(static_cast<std::size_t>(num_classes), 0);
  for (const TrainScene& scene : scenes) {
    require(scene.sweep.labels.has_value(), "class weights: sweep has no labels");
    for (std::int32_t l : *scene.sweep.labels) {
      require(l >= 0 && l <= num_classes, "class weights: point label out of range");
      if (l > 0) ++counts[static_cast<std::size_t>(l - 1)];
    }
  }
  return inv_sqrt_freq_weights(counts);
}

std::vector<double> ssc_class_weights(const std::vector<TrainScene>& scenes,
                                      int num_classes) {
  std::vector<long> counts(static_cast<std::size_t>(num_classes) + 1, 0);
  for (const TrainScene& scene : scenes)
    for (std::uint8_t l : scene.gt.labels) {
      if (l == LabeledVolume::kInvalid) continue;
      require(l <= num_classes, "class weights: cell label out of range");
      ++counts[l];
    }
  return inv_sqrt_freq_weights(counts);
}

Trainer::Trainer(Model& model, TrainConfig cfg) : model_(model), cfg_(std::move(cfg)) {
  require(cfg_.epochs >= 0, "trainer: negative epoch count");
  require(cfg_.lr > 0.0, "trainer: learning rate must be positive");
}

void Trainer::set_weights(std::vector<double> seg_w, std::vector<double> ssc_w) {
  const int C = model_.config().num_classes;
  require(static_cast<int>(seg_w.size()) == C, "trainer: seg weight count");
  require(static_cast<int>(ssc_w.size()) == C + 1, "trainer: ssc weight count");
  seg_w_ = std::move(seg_w);
  ssc_w_ = std::move(ssc_w);
  weights_ready_ = true;
}

StepStats Trainer::step(const TrainScene& scene, long epoch, long step_index) {
  require(weights_ready_, "trainer: class weights not set");
  const ModelConfig& mc = model_.config();
  require(scene.gt.spec == mc.ssc_spec,
          "trainer: scene volume spec does not match the model");
  require(scene.sweep.labels.has_value(), "trainer: sweep has no labels");

  PointCloud sweep = scene.sweep;
  LabeledVolume gt = scene.gt;
  if (cfg_.augment) {
    Rng rng(derive_seed(derive_seed(cfg_.seed, static_cast<std::uint64_t>(epoch)),
                        static_cast<std::uint64_t>(step_index) + 1));
    if (cfg_.seg_only) {
      const SegAugment aug = draw_seg_augment(rng);
      sweep = apply_seg_augment(sweep, aug);
    } else {
      GridAugment aug = draw_grid_augment(rng);
      if (gt.spec.dims[0] != gt.spec.dims[1] && aug.quarter_turns % 2 == 1)
        aug.quarter_turns = (aug.quarter_turns + 1) % 4;
      sweep = apply_grid_augment_points(sweep, aug, gt.spec);
      gt = apply_grid_augment(gt, aug);
    }
  }
  sweep = with_position_features(std::move(sweep));

  Tape t;
  ForwardOutput out =
      model_.forward(t, sweep, cfg_.seg_only ? Mode::kInfer : Mode::kTrain);

  const int C = mc.num_classes;
  const int loss_seg =
      loss::weighted_ce(t, out.seg_logits, seg_targets(*sweep.labels, C), seg_w_);

  StepStats stats;
  int total = loss_seg;
  const double s1v = model_.params().at("aux.s1").value.data[0];
  const double s2v = model_.params().at("aux.s2").value.data[0];
  stats.sigma1 = std::exp(0.5 * s1v);
  stats.sigma2 = std::exp(0.5 * s2v);

  if (!cfg_.seg_only) {
    const int flat = ops::reshape(t, out.refined_ssc,
                                  {mc.ssc_spec.num_cells(), static_cast<long>(C) + 1});
    const int loss_complet =
        loss::weighted_ce(t, flat, ssc_targets(gt.labels, C), ssc_w_);
    const int s1 = t.leaf(model_.params().at("aux.s1").value);
    const int s2 = t.leaf(model_.params().at("aux.s2").value);
    out.param_nodes.emplace("aux.s1", s1);
    out.param_nodes.emplace("aux.s2", s2);
    total = loss::uncertainty_combine(t, loss_seg, loss_complet, s1, s2);
    stats.loss_complet = t.val(loss_complet).data[0];
  }

  stats.loss_seg = t.val(loss_seg).data[0];
  stats.total = t.val(total).data[0];
  if (!std::isfinite(stats.total))
    throw numerical_error("training diverged: non-finite loss");

  t.backward(total);
  std::map<std::string, Tensor> grads;
  for (const auto& [name, node] : out.param_nodes) grads.emplace(name, t.grad(node));

  AdamConfig adam;
  adam.lr = lr_schedule(cfg_.lr, epoch);
  adam_step(model_.params(), grads, adam);
  return stats;
}

EpochStats Trainer::run_epoch(const std::vector<TrainScene>& scenes, long epoch,
                              std::ostream* log) {
  require(!scenes.empty(), "trainer: empty scene list");
  if (!weights_ready_)
    set_weights(seg_class_weights(scenes, model_.config().num_classes),
                ssc_class_weights(scenes, model_.config().num_classes));

  EpochStats es;
  char line[192];
  for (std::size_t i = 0; i < scenes.size(); ++i) {
    const StepStats st = step(scenes[i], epoch, static_cast<long>(i));
    ++global_step_;
    es.mean_total += st.total;
    es.mean_seg += st.loss_seg;
    es.mean_complet += st.loss_complet;
    ++es.steps;
    if (log) {
      std::snprintf(line, sizeof(line), "%ld %.9g %.9g %.9g %.9g %.9g\n",
                    global_step_, st.loss_seg, st.loss_complet, st.sigma1,
                    st.sigma2, st.total);
      (*log) << line;
    }
  }
  es.mean_total /= static_cast<double>(es.steps);
  es.mean_seg /= static_cast<double>(es.steps);
  es.mean_complet /= static_cast<double>(es.steps);
  return es;
}

std::vector<EpochStats> Trainer::fit(const std::vector<TrainScene>& scenes,
                                     std::ostream* log) {
  require(!scenes.empty(), "trainer: empty scene list");
  if (!weights_ready_)
    set_weights(seg_class_weights(scenes, model_.config().num_classes),
                ssc_class_weights(scenes, model_.config().num_classes));

  char name[64];
  auto checkpoint = [&](long epoch_done) {
    if (cfg_.checkpoint_dir.empty()) return;
    std::snprintf(name, sizeof(name), "/checkpoint_%03ld.jsck", epoch_done);
    save_checkpoint(model_.params(), cfg_.checkpoint_dir + name);
  };

  checkpoint(0);
  std::vector<EpochStats> history;
  for (long epoch = 0; epoch < cfg_.epochs; ++epoch) {
    history.push_back(run_epoch(scenes, epoch, log));
    checkpoint(epoch + 1);
  }
  if (!cfg_.checkpoint_dir.empty())
    save_checkpoint(model_.params(), cfg_.checkpoint_dir + "/final.jsck");
  return history;
}

}  // namespace js3c
