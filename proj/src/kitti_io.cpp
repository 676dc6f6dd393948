#include "js3c/kitti_io.hpp"

#include <bit>
#include <cstdio>
#include <fstream>
#include <sstream>

namespace js3c {

namespace {

std::uint32_t get_u32(const std::vector<std::uint8_t>& b, std::size_t at) {
  return static_cast<std::uint32_t>(b[at]) |
         (static_cast<std::uint32_t>(b[at + 1]) << 8) |
         (static_cast<std::uint32_t>(b[at + 2]) << 16) |
         (static_cast<std::uint32_t>(b[at + 3]) << 24);
}

void put_u32(std::vector<std::uint8_t>& out, std::uint32_t v) {
  out.push_back(static_cast<std::uint8_t>(v & 0xff));
  out.push_back(static_cast<std::uint8_t>((v >> 8) & 0xff));
  out.push_back(static_cast<std::uint8_t>((v >> 16) & 0xff));
  out.push_back(static_cast<std::uint8_t>((v >> 24) & 0xff));
}

std::string fmt_real(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

Pose pose_from_reals(const std::vector<double>& r) {
  Pose p;
  p.rotation << r[0], r[1], r[2], r[4], r[5], r[6], r[8], r[9], r[10];
  p.translation = Vec3(r[3], r[7], r[11]);
  return p;
}

std::string pose_to_line(const Pose& p) {
  std::string out;
  for (int row = 0; row < 3; ++row) {
    for (int col = 0; col < 3; ++col) {
      out += fmt_real(p.rotation(row, col));
      out += ' ';
    }
    out += fmt_real(p.translation[row]);
    if (row != 2) out += ' ';
  }
  return out;
}

}  // namespace

std::vector<std::uint8_t> read_file(const std::string& path) {
  std::ifstream f(path, std::ios::binary | std::ios::ate);
  if (!f.good()) throw io_error("cannot open " + path);
  const std::streamsize n = f.tellg();
  f.seekg(0);
  std::vector<std::uint8_t> bytes(static_cast<std::size_t>(n));
  f.read(reinterpret_cast<char*>(bytes.data()), n);
  if (!f.good()) throw io_error("read failed: " + path);
  return bytes;
}

void write_file(const std::string& path, const std::vector<std::uint8_t>& bytes) {
  std::ofstream f(path, std::ios::binary);
  if (!f.good()) throw io_error("cannot open for writing: " + path);
  f.write(reinterpret_cast<const char*>(bytes.data()),
          static_cast<std::streamsize>(bytes.size()));
  if (!f.good()) throw io_error("write failed: " + path);
}

std::string read_text_file(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f.good()) throw io_error("cannot open " + path);
  std::stringstream ss;
  ss << f.rdbuf();
  return ss.str();
}

void write_text_file(const std::string& path, const std::string& text) {
  std::ofstream f(path, std::ios::binary);
  if (!f.good()) throw io_error("cannot open for writing: " + path);
  f.write(text.data(), static_cast<std::streamsize>(text.size()));
  if (!f.good()) throw io_error("write failed: " + path);
}

PointCloud read_scan(const std::vector<std::uint8_t>& bytes) {
  if (bytes.size() % 16 != 0)
    throw format_error("scan: truncated record at byte offset " +
                       std::to_string((bytes.size() / 16) * 16));
  const long n = static_cast<long>(bytes.size() / 16);
  PointCloud cloud;
  cloud.positions.reserve(static_cast<std::size_t>(n));
  cloud.features = ad::Tensor({n, 1});
  for (long i = 0; i < n; ++i) {
    const std::size_t at = static_cast<std::size_t>(i) * 16;
    const float x = std::bit_cast<float>(get_u32(bytes, at));
    const float y = std::bit_cast<float>(get_u32(bytes, at + 4));
    const float z = std::bit_cast<float>(get_u32(bytes, at + 8));
    const float w = std::bit_cast<float>(get_u32(bytes, at + 12));
    cloud.positions.emplace_back(static_cast<double>(x), static_cast<double>(y),
                                 static_cast<double>(z));
    cloud.features.data[i] = static_cast<double>(w);
  }
  return cloud;
}

std::vector<std::uint8_t> write_scan(const PointCloud& cloud) {
  cloud.validate();
  const bool has_intensity = cloud.feature_dim() >= 1;
  std::vector<std::uint8_t> out;
  out.reserve(static_cast<std::size_t>(cloud.size()) * 16);
  for (long i = 0; i < cloud.size(); ++i) {
    const Vec3& p = cloud.positions[static_cast<std::size_t>(i)];
    for (int a = 0; a < 3; ++a)
      put_u32(out, std::bit_cast<std::uint32_t>(static_cast<float>(p[a])));
    const double w =
        has_intensity ? cloud.features.data[i * cloud.feature_dim()] : 0.0;
    put_u32(out, std::bit_cast<std::uint32_t>(static_cast<float>(w)));
  }
  return out;
}

std::vector<std::int32_t> read_labels(const std::vector<std::uint8_t>& bytes) {
  if (bytes.size() % 4 != 0)
    throw format_error("labels: truncated record at byte offset " +
                       std::to_string((bytes.size() / 4) * 4));
  std::vector<std::int32_t> out;
  out.reserve(bytes.size() / 4);
  for (std::size_t at = 0; at < bytes.size(); at += 4)
    out.push_back(static_cast<std::int32_t>(get_u32(bytes, at) & 0xffffu));
  return out;
}

std::vector<std::uint8_t> write_labels(const std::vector<std::int32_t>& ids) {
  std::vector<std::uint8_t> out;
  out.reserve(ids.size() * 4);
  for (std::int32_t id : ids) {
    require(id >= 0 && id <= 0xffff, "labels: id out of the 16-bit range");
    put_u32(out, static_cast<std::uint32_t>(id));
  }
  return out;
}

ClassRemap read_remap(const std::string& text) {
  ClassRemap remap;
  std::stringstream ss(text);
  std::string line;
  long line_no = 0;
  while (std::getline(ss, line)) {
    ++line_no;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line = line.substr(0, hash);
    std::stringstream ls(line);
    long raw = 0, target = 0;
    if (!(ls >> raw)) continue;  // blank line
    if (!(ls >> target))
      throw format_error("remap: line " + std::to_string(line_no) +
                         ": expected `raw_id target_id`");
    std::string extra;
    if (ls >> extra)
      throw format_error("remap: line " + std::to_string(line_no) +
                         ": trailing tokens");
    remap[static_cast<std::int32_t>(raw)] = static_cast<std::int32_t>(target);
  }
  return remap;
}

std::vector<std::int32_t> apply_remap(const std::vector<std::int32_t>& ids,
                                      const ClassRemap& remap) {
  std::vector<std::int32_t> out;
  out.reserve(ids.size());
  for (std::int32_t id : ids) {
    const auto it = remap.find(id);
    if (it == remap.end())
      throw format_error("remap: no mapping for raw id " + std::to_string(id));
    out.push_back(it->second);
  }
  return out;
}

std::vector<Pose> read_poses(const std::string& text) {
  std::vector<Pose> poses;
  std::stringstream ss(text);
  std::string line;
  long line_no = 0;
  while (std::getline(ss, line)) {
    ++line_no;
    std::stringstream ls(line);
    std::vector<double> reals;
    double v = 0.0;
    while (ls >> v) reals.push_back(v);
    if (reals.empty()) continue;
    if (reals.size() != 12)
      throw format_error("poses: line " + std::to_string(line_no) + ": got " +
                         std::to_string(reals.size()) + " values, expected 12");
    poses.push_back(pose_from_reals(reals));
  }
  return poses;
}

std::string write_poses(const std::vector<Pose>& poses) {
  std::string out;
  for (const Pose& p : poses) {
    out += pose_to_line(p);
    out += '\n';
  }
  return out;
}

Pose read_calib(const std::string& text) {
  std::stringstream ss(text);
  std::string line;
  while (std::getline(ss, line)) {
    std::stringstream ls(line);
    std::string tag;
    if (!(ls >> tag)) continue;
    if (tag != "Tr:") continue;
    std::vector<double> reals;
    double v = 0.0;
    while (ls >> v) reals.push_back(v);
    if (reals.size() != 12)
      throw format_error("calib: Tr line has " + std::to_string(reals.size()) +
                         " values, expected 12");
    return pose_from_reals(reals);
  }
  throw format_error("calib: no Tr line found");
}

std::string write_calib(const Pose& tr) {
  return "Tr: " + pose_to_line(tr) + "\n";
}

}  // namespace js3c
