#include "js3c/ground_truth.hpp"

#include <cstdio>

#include "js3c/kitti_io.hpp"
#include "js3c/raycast.hpp"
#include "js3c/voxelize.hpp"

namespace js3c {

namespace {

PointCloud load_frame(const SequenceIndex& seq, long j) {
  const FrameRecord& fr = seq.frames[static_cast<std::size_t>(j)];
  PointCloud cloud = read_scan(read_file(fr.scan_path));
  const std::vector<std::int32_t> labels = read_labels(read_file(fr.label_path));
  if (static_cast<long>(labels.size()) != cloud.size())
    throw format_error("frame " + std::to_string(j) + ": " +
                       std::to_string(cloud.size()) + " points but " +
                       std::to_string(labels.size()) + " labels");
  cloud.labels = labels;
  cloud.features = ad::Tensor({cloud.size(), 0});
  return cloud;
}

// sensor-of-frame-j -> sensor-of-center transform
Pose frame_to_center(const SequenceIndex& seq, long center, long j) {
  const Pose& pc = seq.frames[static_cast<std::size_t>(center)].pose;
  const Pose& pj = seq.frames[static_cast<std::size_t>(j)].pose;
  return seq.tr.inverse().compose(pc.inverse()).compose(pj).compose(seq.tr);
}

long window_end(const SequenceIndex& seq, long center, long window) {
  require(center >= 0 && center < seq.size(), "aggregate: center frame out of range");
  require(window >= 1, "aggregate: window must be positive");
  return std::min(seq.size(), center + window);
}

}  // namespace

SequenceIndex load_sequence(const std::string& dir) {
  SequenceIndex seq;
  const std::vector<Pose> poses = read_poses(read_text_file(dir + "/poses.txt"));
  seq.tr = read_calib(read_text_file(dir + "/calib.txt"));
  seq.frames.reserve(poses.size());
  char name[32];
  for (std::size_t i = 0; i < poses.size(); ++i) {
    std::snprintf(name, sizeof(name), "%06zu", i);
    FrameRecord fr;
    fr.scan_path = dir + "/velodyne/" + name + ".bin";
    fr.label_path = dir + "/labels/" + name + ".label";
    fr.pose = poses[i];
    seq.frames.push_back(std::move(fr));
  }
  return seq;
}

PointCloud aggregate_frames(const SequenceIndex& seq, long center, long window) {
  const long end = window_end(seq, center, window);
  PointCloud merged;
  std::vector<std::int32_t> labels;
  for (long j = center; j < end; ++j) {
    const PointCloud frame = load_frame(seq, j);
    const Pose t = frame_to_center(seq, center, j);
    for (const Vec3& p : frame.positions) merged.positions.push_back(t.apply(p));
    labels.insert(labels.end(), frame.labels->begin(), frame.labels->end());
  }
  merged.labels = std::move(labels);
  merged.features = ad::Tensor({merged.size(), 0});
  return merged;
}

LabeledVolume generate_gt(const SequenceIndex& seq, long center, long window,
                          const VolumeSpec& spec) {
  spec.validate();
  const long end = window_end(seq, center, window);

  Visibility vis(spec);
  PointCloud merged;
  std::vector<std::int32_t> merged_labels;
  for (long j = center; j < end; ++j) {
    const PointCloud frame = load_frame(seq, j);
    const Pose t = frame_to_center(seq, center, j);
    PointCloud world = transform_cloud(frame, t);
    vis.merge(raycast_visibility(world, t.apply(Vec3::Zero()), spec));
    for (const Vec3& p : world.positions) merged.positions.push_back(p);
    merged_labels.insert(merged_labels.end(), world.labels->begin(),
                         world.labels->end());
  }

  // crop the merged cloud to the volume before voting
  PointCloud inside;
  std::vector<std::int32_t> inside_labels;
  for (std::size_t i = 0; i < merged.positions.size(); ++i)
    if (spec.contains(merged.positions[i])) {
      inside.positions.push_back(merged.positions[i]);
      inside_labels.push_back(merged_labels[i]);
    }
  inside.features = ad::Tensor({inside.size(), 0});

  LabeledVolume out(spec, LabeledVolume::kInvalid);
  for (long cell = 0; cell < spec.num_cells(); ++cell)
    if (vis.at(cell) == CellView::kEmpty) out.labels[static_cast<std::size_t>(cell)] = 0;

  if (inside.size() > 0) {
    const VoxelizeResult vox = voxelize_points(inside, spec);
    const std::vector<std::int32_t> voted =
        majority_vote_labels(inside_labels, vox.map);
    for (long v = 0; v < vox.tensor.num_sites(); ++v) {
      const std::int32_t label = voted[static_cast<std::size_t>(v)];
      require(label >= 0 && label < 255, "generate_gt: label out of byte range");
      const auto& c = vox.tensor.coords[static_cast<std::size_t>(v)];
      out.labels[static_cast<std::size_t>(spec.linear(c[0], c[1], c[2]))] =
          static_cast<std::uint8_t>(label);
    }
  }
  return out;
}

}  // namespace js3c
