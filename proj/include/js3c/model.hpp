#pragma once

#include <cstdint>
#include <map>
#include <memory>
#include <string>
#include <vector>

#include "js3c/geometry.hpp"
#include "js3c/labeled_volume.hpp"
#include "js3c/param_store.hpp"
#include "js3c/point_cloud.hpp"
#include "js3c/pvi.hpp"
#include "js3c/rng.hpp"
#include "js3c/sparse_conv.hpp"
#include "js3c/tape.hpp"
#include "js3c/voxelize.hpp"

namespace js3c {

// Structural description of the network. Two presets share every structural
// element and differ only in scale.
struct ModelConfig {
  std::string preset = "toy";
  int num_classes = 4;
  long in_features = 3;  // per-point input feature width

  // segmentation branch
  std::vector<long> seg_channels{8, 16, 24};  // per-scale block widths
  double voxel_size_seg = 0.1;

  // completion branch
  VolumeSpec ssc_spec;
  int ssc_blocks = 3;
  long ssc_width = 16;

  // shape embedding and interaction module
  long embed_dim = 16;
  int pvi_k = 8;
  int pvi_layers = 1;
  long pvi_hidden = 32;

  double leaky_slope = 0.01;

  static ModelConfig toy();
  static ModelConfig paper();
  void validate() const;
};

// Flat `key = value` text form, one key per line, '#' comments allowed.
// Unknown keys and malformed lines are format errors.
std::string config_to_text(const ModelConfig& cfg);
ModelConfig config_from_text(const std::string& text);
void save_config(const ModelConfig& cfg, const std::string& path);
ModelConfig load_config(const std::string& path);

enum class Mode : std::uint8_t { kTrain = 0, kInfer = 1 };

// Instrumentation for the disposability contract: inference must build no
// completion-side structure, so every counter stays zero in infer mode.
struct ForwardCounters {
  long ssc_volumes = 0;  // dense completion input volumes assembled
  long dense_convs = 0;  // dense convolutions executed
  long pvi_graphs = 0;   // neighbor graphs built
  long pvi_refines = 0;  // refinement applications
  void reset() { *this = ForwardCounters{}; }
};

// Tape node ids plus everything a forward pass allocates besides nodes.
// Convolution plans are captured by pointer inside tape closures, so this
// object must outlive any backward pass over the tape it was built on.
struct ForwardOutput {
  int f_enc = -1;      // {N, F}
  int f_se = -1;       // {N, D^e}
  int seg_logits = -1; // {N, C}

  bool has_aux = false;   // train mode only fields below
  int seg_probs = -1;     // {N, C}, softmax of seg_logits
  int coarse_ssc = -1;    // {dz, dy, dx, C+1}
  int refined_ssc = -1;   // {dz, dy, dx, C+1}

  // node id on the tape for every parameter this pass touched
  std::map<std::string, int> param_nodes;

  std::vector<std::unique_ptr<Rulebook>> rulebooks;
  std::vector<std::unique_ptr<SparsePoolMap>> pool_maps;
  VoxelizeResult seg_vox;
  VoxelizeResult ssc_vox;          // built from the cropped points
  std::vector<long> ssc_members;   // indices of points inside ssc_spec
  VoxelCenters centers;
  KnnGraph graph;
};

// The joint segmentation/completion network. Owns the parameters; each
// forward pass stamps them onto a caller-provided tape as leaves.
class Model {
 public:
  // Fresh parameters, deterministic in (cfg, seed).
  Model(const ModelConfig& cfg, std::uint64_t seed);
  // Adopt existing parameters (e.g. a loaded checkpoint).
  Model(const ModelConfig& cfg, ParamStore params);

  const ModelConfig& config() const { return cfg_; }
  ParamStore& params() { return params_; }
  const ParamStore& params() const { return params_; }
  ForwardCounters& counters() { return counters_; }

  // Train mode runs segmentation, completion, and refinement on one tape;
  // infer mode runs segmentation only. Segmentation outputs are bitwise
  // identical between modes: the auxiliary path is strictly downstream.
  ForwardOutput forward(ad::Tape& t, const PointCloud& cloud, Mode mode);

 private:
  int param_node(ad::Tape& t, ForwardOutput& out, const std::string& name);
  void init_params(std::uint64_t seed);

  ModelConfig cfg_;
  ParamStore params_;
  ForwardCounters counters_;
};

// Point-cloud augmentation for segmentation: rotation about the vertical
// axis and a uniform scale drawn from [0.9, 1.1].
struct SegAugment {
  double angle = 0.0;
  double scale = 1.0;
};
SegAugment draw_seg_augment(Rng& rng);
PointCloud apply_seg_augment(const PointCloud& cloud, const SegAugment& aug);

// Grid-exact augmentation shared by the completion volume and the cloud:
// quarter turns about the volume's vertical center axis, then mirror in x,
// then mirror in y. Quarter turns require a square horizontal footprint.
struct GridAugment {
  int quarter_turns = 0;  // 0..3
  bool flip_x = false;
  bool flip_y = false;
};
GridAugment draw_grid_augment(Rng& rng);
LabeledVolume apply_grid_augment(const LabeledVolume& vol, const GridAugment& aug);
PointCloud apply_grid_augment_points(const PointCloud& cloud,
                                     const GridAugment& aug,
                                     const VolumeSpec& spec);

// Mean softmax segmentation probabilities over `votes` augmented passes.
// Vote 0 is the identity augmentation; later votes draw rotation and scale
// from seeded streams. Rows follow the input point order. {N, C}.
ad::Tensor vote_inference(Model& model, const PointCloud& cloud, int votes,
                          std::uint64_t seed);

}  // namespace js3c
