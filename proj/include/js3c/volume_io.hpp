#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "js3c/labeled_volume.hpp"

namespace js3c {

// Binary container for labeled volumes, format "SSCV":
//   magic `SSCV`, version u32, dims 3xu32, origin 3xf32, voxel_size f32,
//   then dims-product label bytes in x-fastest order. All little-endian.
// write(read(bytes)) == bytes and read(write(vol)) == vol whenever the
// spec values are exactly representable in f32 (files always are).
std::vector<std::uint8_t> write_volume(const LabeledVolume& vol);
LabeledVolume read_volume(const std::vector<std::uint8_t>& bytes);

void save_volume(const LabeledVolume& vol, const std::string& path);
LabeledVolume load_volume(const std::string& path);

// Rounds origin and voxel size through f32 so in-memory volumes match their
// on-disk form exactly. Generators apply this once at the source.
VolumeSpec quantize_spec(const VolumeSpec& spec);

}  // namespace js3c
