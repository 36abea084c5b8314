#pragma once

#include <cstdint>
#include <span>
#include <vector>

namespace adisep::detail {

/// Raw PNG samples as stored: `bit_depth` is 8 or 16 after palette / low-depth
/// expansion; samples are interleaved per pixel.
struct RawPng {
  int width = 0;
  int height = 0;
  int channels = 0;
  int bit_depth = 0;
  bool had_alpha = false;
  std::vector<std::uint16_t> samples;
};

RawPng decode_png(std::span<const std::uint8_t> bytes);

/// channels: 1 (gray) or 3 (RGB); bit_depth 8 or 16.
std::vector<std::uint8_t> encode_png(int width, int height, int channels, int bit_depth,
                                     std::span<const std::uint16_t> samples);

}  // namespace adisep::detail
