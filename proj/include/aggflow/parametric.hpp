#pragma once

#include <vector>

#include "aggflow/flow.hpp"
#include "aggflow/image.hpp"
#include "aggflow/patches.hpp"

namespace aggflow {

// Six-parameter affine motion model in patch-local coordinates:
// u = a1 + a2*x + a3*y, v = a4 + a5*x + a6*y.
struct AffineParams {
  double a[6] = {0, 0, 0, 0, 0, 0};
};

Vec2 affine_flow_at(const AffineParams& theta, Vec2 x);

// Eight-parameter quadratic motion model in image-global coordinates:
// u = c1 + l1*x + l2*y + q1*x^2 + q2*x*y
// v = c2 + l3*x + l4*y + q1*x*y + q2*y^2   (q1, q2 shared across components).
struct QuadraticParams {
  double c1 = 0, l1 = 0, l2 = 0;
  double c2 = 0, l3 = 0, l4 = 0;
  double q1 = 0, q2 = 0;
};

Vec2 quadratic_flow_at(const QuadraticParams& q, Vec2 x);

// Tukey biweight: rho is the penalty, weight = psi(r)/r used by IRLS.
// weight(r) = (1 - (r/c)^2)^2 for |r| <= c, 0 beyond; rho saturates at c^2/6.
double tukey_rho(double r, double c);
double tukey_weight(double r, double c);

struct ScalePolicy {
  enum class Kind { mad, fixed };
  Kind kind = Kind::mad;  // mad: c = 4.685 * MAD of residuals, per IRLS pass
  double value = 0.0;     // fixed: c is this constant
};

struct RobustConfig {
  ScalePolicy scale;
  int max_irls_iters = 20;
  int pyramid_levels = 0;  // 0 = automatic (up to 3 for patches, 4 for global)
  double tol = 1e-3;       // stop when the parameter increment norm drops below
};

// level_energies[l][k]: mean robust energy at pyramid level l (coarsest first)
// after k accepted IRLS passes; entry 0 is the starting energy. Comparable
// across passes only under a fixed scale policy.
struct AffineResult {
  AffineParams params;
  bool low_confidence = false;
  std::vector<std::vector<double>> level_energies;
};

struct QuadraticResult {
  QuadraticParams params;
  bool low_confidence = false;
  std::vector<std::vector<double>> level_energies;
};

// Coarse-to-fine incremental IRLS over precomputed grayscale pyramids.
// Construct once per frame pair, then refine many patches cheaply.
class RobustEstimator {
 public:
  RobustEstimator(const ScalarImage& f1, const ScalarImage& f2, RobustConfig cfg);

  // Refines the motion of `patch` (a rect of frame 1, >= 8x8) around the
  // integer translation w_init. Returns only the refinement model; w_init is
  // carried separately by the caller. Textureless patches come back as a zero
  // model flagged low-confidence.
  AffineResult refine_affine(Rect patch, Vec2i w_init) const;

  // Fits the 8-parameter model over the whole frame; robust weights suppress
  // independently moving regions so the dominant motion is recovered.
  QuadraticResult dominant_quadratic() const;

 private:
  RobustConfig cfg_;
  std::vector<ScalarImage> pyr1_, pyr2_;
  std::vector<GradientField> grad2_;
};

AffineResult estimate_affine(const ScalarImage& f1, Rect patch, const ScalarImage& f2,
                             Vec2i w_init, const RobustConfig& cfg);
QuadraticResult estimate_dominant_quadratic(const ScalarImage& i1, const ScalarImage& i2,
                                            const RobustConfig& cfg);

// Evaluates the quadratic model at every pixel.
FlowField camera_flow_field(const QuadraticParams& q, int width, int height);

}  // namespace aggflow
