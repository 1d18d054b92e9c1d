#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>

#include "aggflow/error.hpp"
#include "aggflow/parametric.hpp"

using namespace aggflow;

namespace {

template <class F>
ScalarImage make_scalar(int w, int h, F f) {
  ScalarImage m;
  m.width = w;
  m.height = h;
  m.data.resize((size_t)w * h);
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) m.data[(size_t)y * w + x] = f(x, y);
  return m;
}

double tex_a(double x, double y) {
  return 0.5 + 0.2 * std::sin(0.37 * x + 0.9 * std::sin(0.23 * y)) +
         0.15 * std::cos(0.31 * y - 0.4 * std::cos(0.19 * x));
}

double tex_b(double x, double y) {
  return 0.5 + 0.25 * std::sin(0.22 * y + 0.7 * std::cos(0.29 * x)) +
         0.1 * std::cos(0.41 * x + 0.27 * y);
}

// Frame 1 whose exact motion toward `f2` is w(x): samples f2's grid at x+w(x),
// so the truth is a zero-residual optimum of the estimator's own model.
template <class W>
ScalarImage synth_frame1(const ScalarImage& f2, W w) {
  return make_scalar(f2.width, f2.height, [&](int x, int y) {
    Vec2 d = w(x, y);
    return bilinear_sample(f2, {x + d.x, y + d.y}).value;
  });
}

}  // namespace

TEST_CASE("affine_flow_at evaluates the six-parameter model") {
  AffineParams t1{{1, 0, 0, 2, 0, 0}};
  CHECK(affine_flow_at(t1, {7.0, -3.0}) == Vec2{1.0, 2.0});
  AffineParams t2{{0, 1, 0, 0, 0, 1}};
  CHECK(affine_flow_at(t2, {3.0, 4.0}) == Vec2{3.0, 4.0});
  AffineParams t3{{0.5, 0.1, -0.2, 1, 0, 0.3}};
  Vec2 v = affine_flow_at(t3, {2.0, 1.0});
  CHECK(v.x == doctest::Approx(0.5).epsilon(1e-12));
  CHECK(v.y == doctest::Approx(1.3).epsilon(1e-12));
}

TEST_CASE("tukey weight and penalty") {
  CHECK(tukey_weight(0.0, 1.0) == 1.0);
  CHECK(tukey_rho(0.0, 1.0) == 0.0);
  for (double r : {1.0, -1.0, 2.5, -7.0}) {
    CHECK(tukey_weight(r, 1.0) == 0.0);
    CHECK(tukey_rho(r, 1.0) == doctest::Approx(1.0 / 6.0).epsilon(1e-12));
  }
  CHECK(tukey_weight(0.5, 1.0) == doctest::Approx(0.5625).epsilon(1e-12));
  double c = 2.0;
  CHECK(tukey_rho(1.0, c) ==
        doctest::Approx(c * c / 6.0 * (1.0 - std::pow(1.0 - 0.25, 3))).epsilon(1e-12));
  // Even, continuous at the cutoff, maximal at zero.
  for (double r : {0.1, 0.4, 0.9}) {
    CHECK(tukey_weight(r, 1.0) == tukey_weight(-r, 1.0));
    CHECK(tukey_weight(r, 1.0) < 1.0);
  }
  CHECK(tukey_weight(0.999999, 1.0) < 1e-10);
}

TEST_CASE("identical frames give a zero refinement") {
  ScalarImage f = make_scalar(64, 64, tex_a);
  RobustConfig cfg;
  auto res = estimate_affine(f, Rect{10, 10, 54, 54}, f, {0, 0}, cfg);
  CHECK(!res.low_confidence);
  double norm = 0;
  for (double a : res.params.a) norm += a * a;
  CHECK(std::sqrt(norm) <= cfg.tol);
}

TEST_CASE("subpixel translation is recovered") {
  ScalarImage f2 = make_scalar(64, 64, tex_a);
  ScalarImage f1 = synth_frame1(f2, [](int, int) { return Vec2{0.5, -0.25}; });

  RobustConfig cfg;  // default: 3-level pyramid, MAD scale
  auto res = estimate_affine(f1, Rect{10, 10, 54, 54}, f2, {0, 0}, cfg);
  CHECK(!res.low_confidence);
  CHECK(res.params.a[0] == doctest::Approx(0.5).epsilon(0.2));
  CHECK(res.params.a[3] == doctest::Approx(-0.25).epsilon(0.4));
  CHECK(std::abs(res.params.a[1]) < 0.01);
  CHECK(std::abs(res.params.a[2]) < 0.01);
  CHECK(std::abs(res.params.a[4]) < 0.01);
  CHECK(std::abs(res.params.a[5]) < 0.01);

  // Noise-free, sub-pixel, single level: translation exact to 1e-3.
  RobustConfig tight;
  tight.pyramid_levels = 1;
  tight.tol = 1e-8;
  tight.max_irls_iters = 50;
  auto fine = estimate_affine(f1, Rect{10, 10, 54, 54}, f2, {0, 0}, tight);
  CHECK(std::abs(fine.params.a[0] - 0.5) <= 1e-3);
  CHECK(std::abs(fine.params.a[3] + 0.25) <= 1e-3);
}

TEST_CASE("affine linear part is recovered") {
  ScalarImage f2 = make_scalar(64, 64, tex_a);
  // Local frame anchored at the patch origin (10,10); linear part
  // [[1.02,0],[0,0.98]] means flow (0.02*lx, -0.02*ly).
  ScalarImage f1 = synth_frame1(f2, [](int x, int y) {
    return Vec2{0.02 * (x - 10), -0.02 * (y - 10)};
  });
  RobustConfig cfg;
  cfg.pyramid_levels = 1;
  cfg.tol = 1e-8;
  cfg.max_irls_iters = 50;
  auto res = estimate_affine(f1, Rect{10, 10, 54, 54}, f2, {0, 0}, cfg);
  CHECK(!res.low_confidence);
  CHECK(std::abs(res.params.a[1] - 0.02) <= 0.01);
  CHECK(std::abs(res.params.a[5] + 0.02) <= 0.01);
  CHECK(std::abs(res.params.a[0]) <= 0.05);
  CHECK(std::abs(res.params.a[3]) <= 0.05);
}

TEST_CASE("textureless patch returns zero with low confidence") {
  ScalarImage flat = make_scalar(32, 32, [](int, int) { return 0.5; });
  auto res = estimate_affine(flat, Rect{4, 4, 28, 28}, flat, {0, 0}, RobustConfig{});
  CHECK(res.low_confidence);
  for (double a : res.params.a) CHECK(a == 0.0);
}

TEST_CASE("patch below 8x8 is rejected") {
  ScalarImage f = make_scalar(32, 32, tex_a);
  CHECK_THROWS_AS(estimate_affine(f, Rect{0, 0, 7, 20}, f, {0, 0}, RobustConfig{}),
                  std::invalid_argument);
}

TEST_CASE("shifting w_init against a pre-shifted frame leaves the model unchanged") {
  ScalarImage f2 = make_scalar(64, 64, [](int x, int y) { return tex_a(x, y); });
  ScalarImage f2p = make_scalar(64, 64, [](int x, int y) { return tex_a(x + 3, y + 1); });
  ScalarImage f1 = synth_frame1(f2, [](int, int) { return Vec2{3.3, 0.8}; });

  RobustConfig cfg;
  cfg.pyramid_levels = 1;
  cfg.tol = 1e-8;
  cfg.max_irls_iters = 50;
  Rect patch{16, 16, 40, 40};
  auto a = estimate_affine(f1, patch, f2, {3, 1}, cfg);
  auto b = estimate_affine(f1, patch, f2p, {0, 0}, cfg);
  CHECK(!a.low_confidence);
  CHECK(!b.low_confidence);
  for (int i = 0; i < 6; ++i) CHECK(std::abs(a.params.a[i] - b.params.a[i]) <= 1e-5);
  CHECK(std::abs(a.params.a[0] - 0.3) <= 0.05);
  CHECK(std::abs(a.params.a[3] + 0.2) <= 0.05);
}

TEST_CASE("robust energy is non-increasing within each pyramid level") {
  ScalarImage f1 = make_scalar(64, 64, tex_a);
  ScalarImage f2 = make_scalar(64, 64, [](int x, int y) {
    return 0.6 * tex_a(x - 1.4, y + 0.9) + 0.4 * tex_b(x, y);
  });
  RobustConfig cfg;
  cfg.scale.kind = ScalePolicy::Kind::fixed;
  cfg.scale.value = 0.3;
  cfg.max_irls_iters = 20;
  auto res = estimate_affine(f1, Rect{16, 16, 48, 48}, f2, {0, 0}, cfg);
  REQUIRE(!res.level_energies.empty());
  int recorded = 0;
  for (const auto& level : res.level_energies) {
    for (size_t k = 1; k < level.size(); ++k) {
      CHECK(level[k] <= level[k - 1] + 1e-9);
      ++recorded;
    }
  }
  CHECK(recorded > 0);
}

TEST_CASE("dominant quadratic: identical frames give zeros") {
  ScalarImage f = make_scalar(64, 64, tex_a);
  auto res = estimate_dominant_quadratic(f, f, RobustConfig{});
  CHECK(!res.low_confidence);
  RobustConfig cfg;
  for (double v : {res.params.c1, res.params.l1, res.params.l2, res.params.c2, res.params.l3,
                   res.params.l4, res.params.q1, res.params.q2})
    CHECK(std::abs(v) <= cfg.tol);
}

TEST_CASE("dominant quadratic recovers a 3-pixel shift") {
  ScalarImage f1 = make_scalar(128, 128, tex_a);
  ScalarImage f2 = make_scalar(128, 128, [](int x, int y) { return tex_a(x - 3, y); });
  auto res = estimate_dominant_quadratic(f1, f2, RobustConfig{});
  CHECK(!res.low_confidence);
  CHECK(std::abs(res.params.c1 - 3.0) <= 0.2);
  CHECK(std::abs(res.params.c2) <= 0.2);
  CHECK(std::abs(res.params.l1) <= 0.02);
  CHECK(std::abs(res.params.l2) <= 0.02);
  CHECK(std::abs(res.params.l3) <= 0.02);
  CHECK(std::abs(res.params.l4) <= 0.02);
  CHECK(std::abs(res.params.q1) <= 1e-3);
  CHECK(std::abs(res.params.q2) <= 1e-3);
}

TEST_CASE("dominant motion wins against a large secondary region") {
  // Background (70%) moves (2,0); a 70x70 block carries its own texture and
  // moves (-8,0). The robust fit must lock onto the background.
  auto in_block = [](int x, int y) { return x >= 30 && x < 100 && y >= 30 && y < 100; };
  ScalarImage f1 = make_scalar(128, 128, [&](int x, int y) {
    return in_block(x, y) ? tex_b(x, y) : tex_a(x, y);
  });
  ScalarImage f2 = make_scalar(128, 128, [&](int x, int y) {
    if (in_block(x + 8, y)) return tex_b(x + 8, y);
    return tex_a(x - 2, y);
  });
  auto res = estimate_dominant_quadratic(f1, f2, RobustConfig{});
  CHECK(!res.low_confidence);
  CHECK(std::abs(res.params.c1 - 2.0) <= 0.3);
  CHECK(std::abs(res.params.c2) <= 0.3);
}

TEST_CASE("quadratic terms are recovered from a synthetic quadratic warp") {
  QuadraticParams truth;
  truth.c1 = 0.3;
  truth.c2 = -0.2;
  truth.l1 = 0.004;
  truth.l4 = -0.003;
  truth.q1 = 3e-6;
  truth.q2 = -2e-6;
  ScalarImage f2 = make_scalar(128, 128, tex_a);
  ScalarImage f1 = synth_frame1(f2, [&](int x, int y) {
    return quadratic_flow_at(truth, {(double)x, (double)y});
  });
  RobustConfig cfg;
  cfg.pyramid_levels = 1;
  cfg.tol = 1e-9;
  cfg.max_irls_iters = 60;
  auto res = estimate_dominant_quadratic(f1, f2, cfg);
  CHECK(!res.low_confidence);
  CHECK(std::abs(res.params.c1 - truth.c1) <= 1e-2);
  CHECK(std::abs(res.params.c2 - truth.c2) <= 1e-2);
  CHECK(std::abs(res.params.l1 - truth.l1) <= 5e-4);
  CHECK(std::abs(res.params.l4 - truth.l4) <= 5e-4);
  CHECK(std::abs(res.params.q1 - truth.q1) <= 5e-6);
  CHECK(std::abs(res.params.q2 - truth.q2) <= 5e-6);
}

TEST_CASE("dominant quadratic input validation") {
  ScalarImage small = make_scalar(16, 16, tex_a);
  CHECK_THROWS_AS(estimate_dominant_quadratic(small, small, RobustConfig{}),
                  std::invalid_argument);
  ScalarImage a = make_scalar(64, 64, tex_a);
  ScalarImage b = make_scalar(64, 32, tex_a);
  CHECK_THROWS_AS(estimate_dominant_quadratic(a, b, RobustConfig{}), std::invalid_argument);
}

TEST_CASE("camera_flow_field evaluates the model everywhere") {
  FlowField zero = camera_flow_field(QuadraticParams{}, 5, 4);
  for (const Vec2& v : zero.data) CHECK(v == Vec2{0.0, 0.0});

  QuadraticParams tr;
  tr.c1 = 1.0;
  tr.c2 = 2.0;
  FlowField cst = camera_flow_field(tr, 3, 3);
  for (const Vec2& v : cst.data) CHECK(v == Vec2{1.0, 2.0});

  QuadraticParams q;
  q.c1 = 0.3;
  q.l1 = -0.02;
  q.l2 = 0.05;
  q.c2 = -1.1;
  q.l3 = 0.07;
  q.l4 = 0.001;
  q.q1 = 0.002;
  q.q2 = -0.004;
  FlowField f = camera_flow_field(q, 4, 4);
  for (int y = 0; y < 4; ++y)
    for (int x = 0; x < 4; ++x) {
      double u = q.c1 + q.l1 * x + q.l2 * y + q.q1 * x * x + q.q2 * x * y;
      double v = q.c2 + q.l3 * x + q.l4 * y + q.q1 * x * y + q.q2 * y * y;
      CHECK(f.at(x, y).x == doctest::Approx(u).epsilon(1e-12));
      CHECK(f.at(x, y).y == doctest::Approx(v).epsilon(1e-12));
    }
}
