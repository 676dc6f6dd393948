#pragma once

#include <cstdint>

#include "js3c/geometry.hpp"
#include "js3c/labeled_volume.hpp"
#include "js3c/point_cloud.hpp"

namespace js3c {

// Desk-scale labeled scene: a handful of boxes over ground planes inside a
// fixed volume. The dense sampling defines the ground truth; the sweep is a
// seeded subsample with an angular-sector occlusion mimicking a single
// sparse LiDAR view.
struct SyntheticSceneSpec {
  VolumeSpec volume;
  int num_classes = 4;       // semantic classes 1..C (0 stays empty)
  int boxes = 5;
  int planes = 1;
  long points_per_box = 300;
  long points_per_plane = 1200;
  double sweep_fraction = 0.3;     // per-point keep probability, (0, 1]
  double occlusion_fraction = 1.0; // fraction of azimuth kept visible, (0, 1]
  std::uint64_t seed = 0;

  void validate() const;
};

struct SyntheticScene {
  PointCloud dense;  // fully labeled samples; source of the ground truth
  PointCloud sweep;  // occluded subsample, labels carried over
  LabeledVolume gt;  // majority-vote labels of the dense set; no invalid cells
  Vec3 sensor;       // sweep viewpoint (volume center)
};

// Deterministic in spec.seed, bit for bit. All generated coordinates are
// snapped through f32 so in-memory scenes equal their on-disk round trip.
SyntheticScene synth_generate(const SyntheticSceneSpec& spec);

}  // namespace js3c
