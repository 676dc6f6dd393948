#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "js3c/point_cloud.hpp"

namespace js3c {

// Whole-file helpers. Both throw io_error on filesystem failures.
std::vector<std::uint8_t> read_file(const std::string& path);
void write_file(const std::string& path, const std::vector<std::uint8_t>& bytes);
std::string read_text_file(const std::string& path);
void write_text_file(const std::string& path, const std::string& text);

// Scan files are consecutive 16-byte records of four little-endian f32
// (x, y, z, intensity). The intensity survives as a one-column feature.
PointCloud read_scan(const std::vector<std::uint8_t>& bytes);
std::vector<std::uint8_t> write_scan(const PointCloud& cloud);

// Label files carry one little-endian u32 per point; the low 16 bits are the
// raw semantic id (the high bits are instance data and are dropped).
std::vector<std::int32_t> read_labels(const std::vector<std::uint8_t>& bytes);
std::vector<std::uint8_t> write_labels(const std::vector<std::int32_t>& ids);

// Class remap: text lines `raw_id target_id`, `#` comments. Applying the
// remap to an id it does not cover is a format error.
using ClassRemap = std::map<std::int32_t, std::int32_t>;
ClassRemap read_remap(const std::string& text);
std::vector<std::int32_t> apply_remap(const std::vector<std::int32_t>& ids,
                                      const ClassRemap& remap);

// Pose files: 12 whitespace-separated reals per line, row-major 3x4.
std::vector<Pose> read_poses(const std::string& text);
std::string write_poses(const std::vector<Pose>& poses);

// Calibration: the `Tr:` line of a KITTI calib file, same 3x4 layout.
Pose read_calib(const std::string& text);
std::string write_calib(const Pose& tr);

}  // namespace js3c
