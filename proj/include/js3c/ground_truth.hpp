#pragma once

#include <string>
#include <vector>

#include "js3c/geometry.hpp"
#include "js3c/labeled_volume.hpp"
#include "js3c/point_cloud.hpp"

namespace js3c {

struct FrameRecord {
  std::string scan_path;
  std::string label_path;
  Pose pose;  // sensor-reference pose from the odometry file
};

struct SequenceIndex {
  std::vector<FrameRecord> frames;  // ordered by frame index
  Pose tr;                          // sensor-to-reference calibration

  long size() const { return static_cast<long>(frames.size()); }
};

// Indexes a sequence directory laid out as
//   dir/velodyne/NNNNNN.bin  dir/labels/NNNNNN.label  dir/poses.txt  dir/calib.txt
// with one frame per pose line. Files are read lazily; a missing file
// surfaces as an io_error naming its path when the frame is touched.
SequenceIndex load_sequence(const std::string& dir);

// Merges frames [center, center + window) (truncated at the sequence end)
// into the center frame's sensor coordinates: each frame j is transformed
// by Tr^-1 * pose_center^-1 * pose_j * Tr, then concatenated with labels.
PointCloud aggregate_frames(const SequenceIndex& seq, long center, long window);

// Completion ground truth over `spec` in center-frame coordinates: occupied
// cells take the majority label of the merged points inside them, cells
// carved empty by at least one frame's rays and never occupied become 0,
// and cells never observed stay 255. Occupied wins over empty-observed.
LabeledVolume generate_gt(const SequenceIndex& seq, long center, long window,
                          const VolumeSpec& spec);

}  // namespace js3c
