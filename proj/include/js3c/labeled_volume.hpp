#pragma once

#include <cstdint>
#include <vector>

#include "js3c/geometry.hpp"

namespace js3c {

// Per-cell class labels over a dense grid. 0 = empty, 1..C = semantic
// classes, 255 = invalid/unobserved. Cell order follows VolumeSpec::linear
// (x fastest).
struct LabeledVolume {
  static constexpr std::uint8_t kInvalid = 255;

  VolumeSpec spec;
  std::vector<std::uint8_t> labels;

  LabeledVolume() = default;
  explicit LabeledVolume(const VolumeSpec& s, std::uint8_t fill = 0)
      : spec(s), labels(static_cast<std::size_t>(s.num_cells()), fill) {
    spec.validate();
  }

  std::uint8_t at(long x, long y, long z) const {
    return labels[static_cast<std::size_t>(spec.linear(x, y, z))];
  }

  void set(long x, long y, long z, std::uint8_t v) {
    labels[static_cast<std::size_t>(spec.linear(x, y, z))] = v;
  }

  void validate(int num_classes) const {
    spec.validate();
    require(static_cast<long>(labels.size()) == spec.num_cells(),
            "labeled volume: cell count does not match dims");
    for (std::uint8_t v : labels)
      require(v == kInvalid || v <= num_classes,
              "labeled volume: label out of range");
  }
};

}  // namespace js3c
