#pragma once

#include <cmath>
#include <cstddef>
#include <vector>

namespace aggflow {

struct Vec2i {
  int x = 0;
  int y = 0;

  friend bool operator==(const Vec2i& a, const Vec2i& b) { return a.x == b.x && a.y == b.y; }
  friend bool operator!=(const Vec2i& a, const Vec2i& b) { return !(a == b); }
  friend Vec2i operator+(const Vec2i& a, const Vec2i& b) { return {a.x + b.x, a.y + b.y}; }
  friend Vec2i operator-(const Vec2i& a, const Vec2i& b) { return {a.x - b.x, a.y - b.y}; }
};

struct Vec2 {
  double x = 0.0;
  double y = 0.0;

  Vec2() = default;
  Vec2(double px, double py) : x(px), y(py) {}
  Vec2(const Vec2i& v) : x(v.x), y(v.y) {}

  double squared_norm() const { return x * x + y * y; }
  double norm() const { return std::sqrt(squared_norm()); }

  friend Vec2 operator+(const Vec2& a, const Vec2& b) { return {a.x + b.x, a.y + b.y}; }
  friend Vec2 operator-(const Vec2& a, const Vec2& b) { return {a.x - b.x, a.y - b.y}; }
  friend Vec2 operator*(double s, const Vec2& a) { return {s * a.x, s * a.y}; }
  friend bool operator==(const Vec2& a, const Vec2& b) { return a.x == b.x && a.y == b.y; }
  friend bool operator!=(const Vec2& a, const Vec2& b) { return !(a == b); }
};

// Single-channel image, row-major, x = column, y = row.
struct ScalarImage {
  int width = 0;
  int height = 0;
  std::vector<double> data;

  ScalarImage() = default;
  ScalarImage(int w, int h, double fill = 0.0) : width(w), height(h), data((size_t)w * h, fill) {}

  double& at(int x, int y) { return data[(size_t)y * width + x]; }
  double at(int x, int y) const { return data[(size_t)y * width + x]; }
  bool in_bounds(int x, int y) const { return x >= 0 && x < width && y >= 0 && y < height; }
  bool empty() const { return width <= 0 || height <= 0; }
};

using WeightMap = ScalarImage;      // regularization weights beta in (0,1]
using ConfidenceMap = ScalarImage;  // occlusion confidence, >= 0

// RGB image, interleaved channels.
struct ColorImage {
  int width = 0;
  int height = 0;
  std::vector<double> data;  // r,g,b per pixel

  ColorImage() = default;
  ColorImage(int w, int h) : width(w), height(h), data((size_t)w * h * 3, 0.0) {}

  double& at(int x, int y, int c) { return data[((size_t)y * width + x) * 3 + c]; }
  double at(int x, int y, int c) const { return data[((size_t)y * width + x) * 3 + c]; }
  bool empty() const { return width <= 0 || height <= 0; }
};

// Two-channel matching image: HSV saturation and value.
struct MatchImage {
  int width = 0;
  int height = 0;
  std::vector<double> data;  // s,v per pixel

  MatchImage() = default;
  MatchImage(int w, int h) : width(w), height(h), data((size_t)w * h * 2, 0.0) {}

  double& at(int x, int y, int c) { return data[((size_t)y * width + x) * 2 + c]; }
  double at(int x, int y, int c) const { return data[((size_t)y * width + x) * 2 + c]; }
};

struct GradientField {
  int width = 0;
  int height = 0;
  std::vector<Vec2> data;

  GradientField() = default;
  GradientField(int w, int h) : width(w), height(h), data((size_t)w * h) {}

  Vec2& at(int x, int y) { return data[(size_t)y * width + x]; }
  const Vec2& at(int x, int y) const { return data[(size_t)y * width + x]; }
};

struct Sample {
  double value = 0.0;
  bool in_bounds = false;
};

struct GradientSample {
  Vec2 value;
  bool in_bounds = false;
};

enum class Smoothing { none, l0_approx };

// Pre-smoothing applied before measuring edge strength.
struct SmoothingConfig {
  Smoothing mode = Smoothing::l0_approx;
  double lambda = 0.02;  // gradient sparsity weight
  double kappa = 2.0;    // per-iteration growth of the quadratic penalty
  int iters = 8;
};

// Saturation/value channels of the HSV representation of an RGB image.
MatchImage to_match_image(const ColorImage& rgb);

// Luma (BT.601) grayscale.
ScalarImage to_gray(const ColorImage& rgb);

// Bilinear interpolation with border clamping; in_bounds is false when pos
// falls outside [0,w-1]x[0,h-1].
Sample bilinear_sample(const ScalarImage& img, Vec2 pos);
GradientSample bilinear_sample(const GradientField& g, Vec2 pos);

// Central differences in the interior, one-sided at borders.
GradientField spatial_gradient(const ScalarImage& img);

// Half-quadratic approximation of L0 gradient smoothing.
ScalarImage l0_smooth(const ScalarImage& img, const SmoothingConfig& cfg);

// beta(x) = exp(-|grad I0|^2 / tau^2) where I0 is the (optionally smoothed)
// input; gradient taken with forward differences so a unit step yields one
// low-weight column.
WeightMap edge_weights(const ScalarImage& i1, double tau, const SmoothingConfig& smoothing);

// Gaussian pyramid ([1 4 6 4 1]/16, factor 2), finest first. The level count
// is clipped so the coarsest level keeps both dimensions >= 8.
std::vector<ScalarImage> build_pyramid(const ScalarImage& img, int levels);

}  // namespace aggflow
