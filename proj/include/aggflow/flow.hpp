#pragma once

#include <cmath>
#include <cstdint>
#include <vector>

#include "aggflow/image.hpp"

namespace aggflow {

// Dense per-pixel motion field, one vector per pixel in row-major order.
struct FlowField {
  int width = 0;
  int height = 0;
  std::vector<Vec2> data;

  FlowField() = default;
  FlowField(int w, int h, Vec2 fill = {0.0, 0.0})
      : width(w), height(h), data((size_t)w * h, fill) {}

  Vec2& at(int x, int y) { return data[(size_t)y * width + x]; }
  const Vec2& at(int x, int y) const { return data[(size_t)y * width + x]; }
  bool in_bounds(int x, int y) const { return x >= 0 && x < width && y >= 0 && y < height; }
  bool empty() const { return data.empty(); }
};

// Values above this magnitude (or non-finite) mark pixels with no known motion.
inline constexpr double kUnknownFlowLimit = 1e9;

inline bool flow_known(Vec2 v) {
  return std::isfinite(v.x) && std::isfinite(v.y) && std::abs(v.x) <= kUnknownFlowLimit &&
         std::abs(v.y) <= kUnknownFlowLimit;
}

inline Vec2 unknown_flow() { return {1e10, 1e10}; }

// Per-pixel binary occlusion mask, 1 = occluded in frame 2.
struct OcclusionMap {
  int width = 0;
  int height = 0;
  std::vector<uint8_t> data;

  OcclusionMap() = default;
  OcclusionMap(int w, int h, uint8_t fill = 0)
      : width(w), height(h), data((size_t)w * h, fill) {}

  uint8_t& at(int x, int y) { return data[(size_t)y * width + x]; }
  const uint8_t& at(int x, int y) const { return data[(size_t)y * width + x]; }
  bool in_bounds(int x, int y) const { return x >= 0 && x < width && y >= 0 && y < height; }
  bool empty() const { return data.empty(); }
};

}  // namespace aggflow
