#include "js3c/volume_io.hpp"

#include <bit>
#include <cstring>
#include <fstream>

namespace js3c {

namespace {

constexpr std::uint32_t kVersion = 1;

void put_u32(std::vector<std::uint8_t>& out, std::uint32_t v) {
  out.push_back(static_cast<std::uint8_t>(v & 0xff));
  out.push_back(static_cast<std::uint8_t>((v >> 8) & 0xff));
  out.push_back(static_cast<std::uint8_t>((v >> 16) & 0xff));
  out.push_back(static_cast<std::uint8_t>((v >> 24) & 0xff));
}

void put_f32(std::vector<std::uint8_t>& out, float v) {
  put_u32(out, std::bit_cast<std::uint32_t>(v));
}

std::uint32_t get_u32(const std::vector<std::uint8_t>& b, std::size_t at) {
  return static_cast<std::uint32_t>(b[at]) |
         (static_cast<std::uint32_t>(b[at + 1]) << 8) |
         (static_cast<std::uint32_t>(b[at + 2]) << 16) |
         (static_cast<std::uint32_t>(b[at + 3]) << 24);
}

float get_f32(const std::vector<std::uint8_t>& b, std::size_t at) {
  return std::bit_cast<float>(get_u32(b, at));
}

constexpr std::size_t kHeaderBytes = 4 + 4 + 12 + 12 + 4;

}  // namespace

VolumeSpec quantize_spec(const VolumeSpec& spec) {
  VolumeSpec q = spec;
  q.origin = Vec3(static_cast<double>(static_cast<float>(spec.origin.x())),
                  static_cast<double>(static_cast<float>(spec.origin.y())),
                  static_cast<double>(static_cast<float>(spec.origin.z())));
  q.voxel_size = static_cast<double>(static_cast<float>(spec.voxel_size));
  return q;
}

std::vector<std::uint8_t> write_volume(const LabeledVolume& vol) {
  vol.spec.validate();
  require(static_cast<long>(vol.labels.size()) == vol.spec.num_cells(),
          "write_volume: label count does not match spec");
  std::vector<std::uint8_t> out;
  out.reserve(kHeaderBytes + vol.labels.size());
  out.push_back('S');
  out.push_back('S');
  out.push_back('C');
  out.push_back('V');
  put_u32(out, kVersion);
  for (int a = 0; a < 3; ++a)
    put_u32(out, static_cast<std::uint32_t>(vol.spec.dims[static_cast<std::size_t>(a)]));
  for (int a = 0; a < 3; ++a) put_f32(out, static_cast<float>(vol.spec.origin[a]));
  put_f32(out, static_cast<float>(vol.spec.voxel_size));
  out.insert(out.end(), vol.labels.begin(), vol.labels.end());
  return out;
}

LabeledVolume read_volume(const std::vector<std::uint8_t>& bytes) {
  if (bytes.size() < kHeaderBytes)
    throw format_error("read_volume: header truncated: " +
                       std::to_string(bytes.size()) + " bytes, need " +
                       std::to_string(kHeaderBytes));
  if (!(bytes[0] == 'S' && bytes[1] == 'S' && bytes[2] == 'C' && bytes[3] == 'V'))
    throw format_error("read_volume: bad magic");
  const std::uint32_t version = get_u32(bytes, 4);
  if (version != kVersion)
    throw format_error("read_volume: unsupported version " + std::to_string(version));

  VolumeSpec spec;
  for (int a = 0; a < 3; ++a)
    spec.dims[static_cast<std::size_t>(a)] = static_cast<long>(get_u32(bytes, 8 + 4 * static_cast<std::size_t>(a)));
  spec.origin = Vec3(static_cast<double>(get_f32(bytes, 20)),
                     static_cast<double>(get_f32(bytes, 24)),
                     static_cast<double>(get_f32(bytes, 28)));
  spec.voxel_size = static_cast<double>(get_f32(bytes, 32));
  try {
    spec.validate();
  } catch (const contract_error& e) {
    throw format_error(std::string("read_volume: bad header: ") + e.what());
  }

  const std::size_t expected = static_cast<std::size_t>(spec.num_cells());
  const std::size_t actual = bytes.size() - kHeaderBytes;
  if (actual != expected)
    throw format_error("read_volume: payload length " + std::to_string(actual) +
                       ", expected " + std::to_string(expected));

  LabeledVolume vol(spec);
  std::memcpy(vol.labels.data(), bytes.data() + kHeaderBytes, expected);
  return vol;
}

void save_volume(const LabeledVolume& vol, const std::string& path) {
  const std::vector<std::uint8_t> bytes = write_volume(vol);
  std::ofstream f(path, std::ios::binary);
  if (!f.good()) throw io_error("save_volume: cannot open " + path);
  f.write(reinterpret_cast<const char*>(bytes.data()),
          static_cast<std::streamsize>(bytes.size()));
  if (!f.good()) throw io_error("save_volume: write failed: " + path);
}

LabeledVolume load_volume(const std::string& path) {
  std::ifstream f(path, std::ios::binary | std::ios::ate);
  if (!f.good()) throw io_error("load_volume: cannot open " + path);
  const std::streamsize n = f.tellg();
  f.seekg(0);
  std::vector<std::uint8_t> bytes(static_cast<std::size_t>(n));
  f.read(reinterpret_cast<char*>(bytes.data()), n);
  if (!f.good()) throw io_error("load_volume: read failed: " + path);
  return read_volume(bytes);
}

}  // namespace js3c
