#include "js3c/synthetic.hpp"

#include <cmath>
#include <numbers>

#include "js3c/rng.hpp"
#include "js3c/volume_io.hpp"
#include "js3c/voxelize.hpp"

namespace js3c {

void SyntheticSceneSpec::validate() const {
  volume.validate();
  require(num_classes >= 1, "synth: need at least one class");
  require(boxes >= 0 && planes >= 0 && boxes + planes >= 1,
          "synth: need at least one primitive");
  require(points_per_box >= 1 && points_per_plane >= 1,
          "synth: point counts must be positive");
  require(sweep_fraction > 0.0 && sweep_fraction <= 1.0,
          "synth: sweep_fraction out of (0, 1]");
  require(occlusion_fraction > 0.0 && occlusion_fraction <= 1.0,
          "synth: occlusion_fraction out of (0, 1]");
}

namespace {

double snap(double v) { return static_cast<double>(static_cast<float>(v)); }

Vec3 snap(const Vec3& v) { return Vec3(snap(v.x()), snap(v.y()), snap(v.z())); }

}  // namespace

SyntheticScene synth_generate(const SyntheticSceneSpec& spec) {
  spec.validate();
  const VolumeSpec vol = quantize_spec(spec.volume);
  const Vec3 lo = vol.origin;
  const Vec3 ext(static_cast<double>(vol.dims[0]) * vol.voxel_size,
                 static_cast<double>(vol.dims[1]) * vol.voxel_size,
                 static_cast<double>(vol.dims[2]) * vol.voxel_size);

  Rng rng(spec.seed);
  SyntheticScene scene;
  scene.sensor = snap(lo + 0.5 * ext);

  std::vector<std::int32_t> labels;
  auto push = [&](double x, double y, double z, std::int32_t label) {
    scene.dense.positions.push_back(snap(Vec3(x, y, z)));
    labels.push_back(label);
  };

  for (int p = 0; p < spec.planes; ++p) {
    const double z = lo.z() + ext.z() * uniform(rng, 0.05, 0.3);
    const std::int32_t label = 1 + p % spec.num_classes;
    for (long i = 0; i < spec.points_per_plane; ++i)
      push(lo.x() + ext.x() * uniform(rng, 1e-4, 0.9999),
           lo.y() + ext.y() * uniform(rng, 1e-4, 0.9999),
           z + uniform(rng, -0.02, 0.02) * vol.voxel_size, label);
  }

  // Planes take the low classes; boxes share the remaining ones by the
  // height band their center falls in, so the class of every point is a
  // function of scene geometry (learnable), not of primitive index. Height
  // is untouched by the right-angle turns and axis flips used as training
  // augmentation, which keeps augmented copies label-consistent.
  const int plane_classes = std::min(spec.planes, spec.num_classes - 1);
  const int box_classes = spec.num_classes - plane_classes;
  const double center_lo = 0.15, center_hi = 0.85;
  for (int b = 0; b < spec.boxes; ++b) {
    Vec3 center, half;
    for (int a = 0; a < 3; ++a) {
      center[a] = lo[a] + ext[a] * uniform(rng, center_lo, center_hi);
      half[a] = std::min(uniform(rng, 1.0, 4.0) * vol.voxel_size, 0.14 * ext[a]);
    }
    const double u = ((center.z() - lo.z()) / ext.z() - center_lo) / (center_hi - center_lo);
    const int band = std::min(box_classes - 1,
                              static_cast<int>(u * static_cast<double>(box_classes)));
    const std::int32_t label = 1 + plane_classes + band;
    for (long i = 0; i < spec.points_per_box; ++i) {
      // one sample per face pick, uniform over the face
      const int axis = std::uniform_int_distribution<int>(0, 2)(rng);
      const double side = std::uniform_int_distribution<int>(0, 1)(rng) ? 1.0 : -1.0;
      Vec3 p = center;
      p[axis] += side * half[axis];
      p[(axis + 1) % 3] += uniform(rng, -half[(axis + 1) % 3], half[(axis + 1) % 3]);
      p[(axis + 2) % 3] += uniform(rng, -half[(axis + 2) % 3], half[(axis + 2) % 3]);
      push(p.x(), p.y(), p.z(), label);
    }
  }

  scene.dense.features = ad::Tensor({scene.dense.size(), 0});
  scene.dense.labels = labels;

  const VoxelizeResult vox = voxelize_points(scene.dense, vol);
  const std::vector<std::int32_t> voted = majority_vote_labels(labels, vox.map);
  scene.gt = LabeledVolume(vol, 0);
  for (long v = 0; v < vox.tensor.num_sites(); ++v) {
    const auto& c = vox.tensor.coords[static_cast<std::size_t>(v)];
    scene.gt.labels[static_cast<std::size_t>(vol.linear(c[0], c[1], c[2]))] =
        static_cast<std::uint8_t>(voted[static_cast<std::size_t>(v)]);
  }

  // sweep: keep points inside a random azimuth sector, then thin them
  const double phi0 = uniform(rng, -std::numbers::pi, std::numbers::pi);
  const double span = spec.occlusion_fraction * 2.0 * std::numbers::pi;
  std::vector<std::int32_t> sweep_labels;
  for (std::size_t i = 0; i < scene.dense.positions.size(); ++i) {
    const Vec3& p = scene.dense.positions[i];
    const double u = uniform(rng, 0.0, 1.0);
    double d = std::atan2(p.y() - scene.sensor.y(), p.x() - scene.sensor.x()) - phi0;
    if (d < 0.0) d += 2.0 * std::numbers::pi;
    if (d < span && u < spec.sweep_fraction) {
      scene.sweep.positions.push_back(p);
      sweep_labels.push_back(labels[i]);
    }
  }
  scene.sweep.features = ad::Tensor({scene.sweep.size(), 0});
  scene.sweep.labels = std::move(sweep_labels);
  return scene;
}

}  // namespace js3c
