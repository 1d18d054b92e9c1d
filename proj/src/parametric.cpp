#include "aggflow/parametric.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "aggflow/error.hpp"

namespace aggflow {

Vec2 affine_flow_at(const AffineParams& t, Vec2 x) {
  return {t.a[0] + t.a[1] * x.x + t.a[2] * x.y, t.a[3] + t.a[4] * x.x + t.a[5] * x.y};
}

Vec2 quadratic_flow_at(const QuadraticParams& q, Vec2 x) {
  return {q.c1 + q.l1 * x.x + q.l2 * x.y + q.q1 * x.x * x.x + q.q2 * x.x * x.y,
          q.c2 + q.l3 * x.x + q.l4 * x.y + q.q1 * x.x * x.y + q.q2 * x.y * x.y};
}

double tukey_rho(double r, double c) {
  if (!std::isfinite(c)) return 0.5 * r * r;  // infinite scale: least squares
  double u = r / c;
  if (std::abs(u) >= 1.0) return c * c / 6.0;
  double t = 1.0 - u * u;
  return c * c / 6.0 * (1.0 - t * t * t);
}

double tukey_weight(double r, double c) {
  if (!std::isfinite(c)) return 1.0;
  double u = r / c;
  if (std::abs(u) >= 1.0) return 0.0;
  double t = 1.0 - u * u;
  return t * t;
}

namespace {

struct AffineModel {
  static constexpr int NP = 6;
  static Vec2 flow(const double* t, double x, double y) {
    return {t[0] + t[1] * x + t[2] * y, t[3] + t[4] * x + t[5] * y};
  }
  static void jac(double x, double y, double gx, double gy, double* row) {
    row[0] = gx;
    row[1] = gx * x;
    row[2] = gx * y;
    row[3] = gy;
    row[4] = gy * x;
    row[5] = gy * y;
  }
  static void to_finer(double* t) {
    t[0] *= 2.0;
    t[3] *= 2.0;
  }
};

struct QuadraticModel {
  static constexpr int NP = 8;
  // parameter order: c1, l1, l2, c2, l3, l4, q1, q2
  static Vec2 flow(const double* t, double x, double y) {
    return {t[0] + t[1] * x + t[2] * y + t[6] * x * x + t[7] * x * y,
            t[3] + t[4] * x + t[5] * y + t[6] * x * y + t[7] * y * y};
  }
  static void jac(double x, double y, double gx, double gy, double* row) {
    row[0] = gx;
    row[1] = gx * x;
    row[2] = gx * y;
    row[3] = gy;
    row[4] = gy * x;
    row[5] = gy * y;
    row[6] = gx * x * x + gy * x * y;
    row[7] = gx * x * y + gy * y * y;
  }
  static void to_finer(double* t) {
    t[0] *= 2.0;
    t[3] *= 2.0;
    t[6] *= 0.5;
    t[7] *= 0.5;
  }
};

// Sample points of one pyramid level: pixel coordinates in the level image
// plus the coordinates the motion model is expressed in.
struct LevelSamples {
  std::vector<Vec2i> pix;
  std::vector<Vec2> local;
};

double median_of(std::vector<double> v) {
  size_t mid = v.size() / 2;
  std::nth_element(v.begin(), v.begin() + mid, v.end());
  double m = v[mid];
  if (v.size() % 2 == 0) {
    std::nth_element(v.begin(), v.begin() + mid - 1, v.begin() + mid);
    m = 0.5 * (m + v[mid - 1]);
  }
  return m;
}

double mad_scale(const std::vector<double>& r) {
  double med = median_of(r);
  std::vector<double> dev(r.size());
  for (size_t i = 0; i < r.size(); ++i) dev[i] = std::abs(r[i] - med);
  return median_of(dev);
}

struct PassData {
  std::vector<double> r, gx, gy, lx, ly;
};

template <class Model>
void gather_pass(const ScalarImage& i1, const ScalarImage& i2, const GradientField* g2,
                 const LevelSamples& smp, Vec2 binit, const double* theta, PassData* out) {
  out->r.clear();
  out->gx.clear();
  out->gy.clear();
  out->lx.clear();
  out->ly.clear();
  for (size_t i = 0; i < smp.pix.size(); ++i) {
    Vec2i p = smp.pix[i];
    Vec2 l = smp.local[i];
    Vec2 d = Model::flow(theta, l.x, l.y);
    Vec2 pos{p.x + binit.x + d.x, p.y + binit.y + d.y};
    Sample s = bilinear_sample(i2, pos);
    if (!s.in_bounds) continue;
    double res = s.value - i1.at(p.x, p.y);
    if (!std::isfinite(res)) throw NumericalError("parametric: non-finite residual");
    out->r.push_back(res);
    out->lx.push_back(l.x);
    out->ly.push_back(l.y);
    if (g2) {
      GradientSample gs = bilinear_sample(*g2, pos);
      out->gx.push_back(gs.value.x);
      out->gy.push_back(gs.value.y);
    }
  }
}

template <class Model>
double mean_energy(const ScalarImage& i1, const ScalarImage& i2, const LevelSamples& smp,
                   Vec2 binit, const double* theta, double c, PassData* scratch) {
  gather_pass<Model>(i1, i2, nullptr, smp, binit, theta, scratch);
  if (scratch->r.empty()) return std::numeric_limits<double>::infinity();
  double acc = 0.0;
  for (double r : scratch->r) acc += tukey_rho(r, c);
  return acc / scratch->r.size();
}

// One pyramid level of incremental IRLS. Returns false when the normal
// equations are unsolvable (textureless patch / no valid samples).
template <class Model>
bool irls_level(const ScalarImage& i1, const ScalarImage& i2, const GradientField& g2,
                const LevelSamples& smp, Vec2 binit, const RobustConfig& cfg, double* theta,
                std::vector<double>* energies) {
  constexpr int NP = Model::NP;
  using MatN = Eigen::Matrix<double, NP, NP>;
  using VecN = Eigen::Matrix<double, NP, 1>;
  PassData pass, scratch;

  for (int iter = 0; iter < cfg.max_irls_iters; ++iter) {
    gather_pass<Model>(i1, i2, &g2, smp, binit, theta, &pass);
    if ((int)pass.r.size() < 3 * NP) return false;

    double c;
    if (cfg.scale.kind == ScalePolicy::Kind::fixed) {
      c = cfg.scale.value;
      if (!(c > 0.0)) throw std::invalid_argument("parametric: fixed scale must be > 0");
    } else {
      double mad = mad_scale(pass.r);
      c = mad < 1e-12 ? std::numeric_limits<double>::infinity() : 4.685 * mad;
    }

    double e_cur = 0.0;
    for (double r : pass.r) e_cur += tukey_rho(r, c);
    e_cur /= pass.r.size();
    if (iter == 0) energies->push_back(e_cur);

    MatN a = MatN::Zero();
    VecN b = VecN::Zero();
    double row[NP];
    for (size_t i = 0; i < pass.r.size(); ++i) {
      double w = tukey_weight(pass.r[i], c);
      if (w <= 0.0) continue;
      Model::jac(pass.lx[i], pass.ly[i], pass.gx[i], pass.gy[i], row);
      for (int p = 0; p < NP; ++p) {
        b(p) -= w * pass.r[i] * row[p];
        for (int q = p; q < NP; ++q) a(p, q) += w * row[p] * row[q];
      }
    }
    for (int p = 0; p < NP; ++p)
      for (int q = 0; q < p; ++q) a(p, q) = a(q, p);

    Eigen::LDLT<MatN> ldlt(a);
    VecN d = ldlt.vectorD().cwiseAbs();
    double dmax = d.maxCoeff();
    if (!(d.minCoeff() > 1e-12 * dmax) || !std::isfinite(dmax)) return false;
    VecN step = ldlt.solve(b);

    // Gauss-Newton direction with step halving: accept only descent.
    double trial[NP];
    double s = 1.0;
    bool accepted = false;
    for (int h = 0; h < 12; ++h, s *= 0.5) {
      for (int p = 0; p < NP; ++p) trial[p] = theta[p] + s * step(p);
      double e_try = mean_energy<Model>(i1, i2, smp, binit, trial, c, &scratch);
      if (e_try <= e_cur + 1e-12) {
        for (int p = 0; p < NP; ++p) theta[p] = trial[p];
        energies->push_back(e_try);
        accepted = true;
        break;
      }
    }
    if (!accepted) return true;  // local minimum at this level

    double inc = 0.0;
    for (int p = 0; p < NP; ++p) inc += s * step(p) * s * step(p);
    if (std::sqrt(inc) <= cfg.tol) return true;
  }
  return true;
}

int affine_level_count(Rect patch, const RobustConfig& cfg, int available) {
  int cap = cfg.pyramid_levels > 0 ? cfg.pyramid_levels : 3;
  int side = std::min(patch.w(), patch.h());
  int levels = 1;
  while (levels < cap && side >= 8 * (1 << levels)) ++levels;
  return std::min(levels, available);
}

}  // namespace

RobustEstimator::RobustEstimator(const ScalarImage& f1, const ScalarImage& f2, RobustConfig cfg)
    : cfg_(cfg) {
  if (f1.empty() || f2.empty()) throw std::invalid_argument("RobustEstimator: empty image");
  int depth = cfg.pyramid_levels > 0 ? cfg.pyramid_levels : 4;
  pyr1_ = build_pyramid(f1, depth);
  pyr2_ = build_pyramid(f2, depth);
  int common = (int)std::min(pyr1_.size(), pyr2_.size());
  pyr1_.resize(common);
  pyr2_.resize(common);
  grad2_.reserve(common);
  for (const ScalarImage& lvl : pyr2_) grad2_.push_back(spatial_gradient(lvl));
}

AffineResult RobustEstimator::refine_affine(Rect patch, Vec2i w_init) const {
  patch.x0 = std::max(patch.x0, 0);
  patch.y0 = std::max(patch.y0, 0);
  patch.x1 = std::min(patch.x1, pyr1_[0].width);
  patch.y1 = std::min(patch.y1, pyr1_[0].height);
  if (patch.w() < 8 || patch.h() < 8)
    throw std::invalid_argument("refine_affine: patch smaller than 8x8");

  AffineResult out;
  int levels = affine_level_count(patch, cfg_, (int)pyr1_.size());
  double theta[6] = {0, 0, 0, 0, 0, 0};
  out.level_energies.resize(levels);

  for (int l = levels - 1; l >= 0; --l) {
    int scale = 1 << l;
    const ScalarImage& i1 = pyr1_[l];
    LevelSamples smp;
    int xa = (patch.x0 + scale - 1) / scale, xb = (patch.x1 + scale - 1) / scale;
    int ya = (patch.y0 + scale - 1) / scale, yb = (patch.y1 + scale - 1) / scale;
    xb = std::min(xb, i1.width);
    yb = std::min(yb, i1.height);
    double ox = (double)patch.x0 / scale, oy = (double)patch.y0 / scale;
    for (int y = ya; y < yb; ++y)
      for (int x = xa; x < xb; ++x) {
        smp.pix.push_back({x, y});
        smp.local.push_back({x - ox, y - oy});
      }
    Vec2 binit{(double)w_init.x / scale, (double)w_init.y / scale};
    if (!irls_level<AffineModel>(i1, pyr2_[l], grad2_[l], smp, binit, cfg_, theta,
                                 &out.level_energies[levels - 1 - l])) {
      out.params = AffineParams{};
      out.low_confidence = true;
      return out;
    }
    if (l > 0) AffineModel::to_finer(theta);
  }
  for (int p = 0; p < 6; ++p) out.params.a[p] = theta[p];
  return out;
}

QuadraticResult RobustEstimator::dominant_quadratic() const {
  const ScalarImage& f1 = pyr1_[0];
  const ScalarImage& f2 = pyr2_[0];
  if (f1.width != f2.width || f1.height != f2.height)
    throw std::invalid_argument("dominant_quadratic: frame sizes differ");
  if (f1.width < 32 || f1.height < 32)
    throw std::invalid_argument("dominant_quadratic: frames must be at least 32x32");

  int cap = cfg_.pyramid_levels > 0 ? cfg_.pyramid_levels : 4;
  int side = std::min(f1.width, f1.height);
  int levels = 1;
  while (levels < cap && side >= 32 * (1 << levels)) ++levels;
  levels = std::min(levels, (int)pyr1_.size());

  QuadraticResult out;
  out.level_energies.resize(levels);
  double theta[8] = {0, 0, 0, 0, 0, 0, 0, 0};

  for (int l = levels - 1; l >= 0; --l) {
    const ScalarImage& i1 = pyr1_[l];
    LevelSamples smp;
    double cx = 0.5 * (i1.width - 1), cy = 0.5 * (i1.height - 1);
    smp.pix.reserve((size_t)i1.width * i1.height);
    smp.local.reserve((size_t)i1.width * i1.height);
    for (int y = 0; y < i1.height; ++y)
      for (int x = 0; x < i1.width; ++x) {
        smp.pix.push_back({x, y});
        smp.local.push_back({x - cx, y - cy});
      }
    if (!irls_level<QuadraticModel>(i1, pyr2_[l], grad2_[l], smp, {0.0, 0.0}, cfg_, theta,
                                    &out.level_energies[levels - 1 - l])) {
      out.params = QuadraticParams{};
      out.low_confidence = true;
      return out;
    }
    if (l > 0) QuadraticModel::to_finer(theta);
  }

  // The solve ran in center-origin coordinates; expand to image-global ones.
  double cx = 0.5 * (f1.width - 1), cy = 0.5 * (f1.height - 1);
  QuadraticParams c;
  c.q1 = theta[6];
  c.q2 = theta[7];
  c.c1 = theta[0] - theta[1] * cx - theta[2] * cy + c.q1 * cx * cx + c.q2 * cx * cy;
  c.l1 = theta[1] - 2.0 * c.q1 * cx - c.q2 * cy;
  c.l2 = theta[2] - c.q2 * cx;
  c.c2 = theta[3] - theta[4] * cx - theta[5] * cy + c.q1 * cx * cy + c.q2 * cy * cy;
  c.l3 = theta[4] - c.q1 * cy;
  c.l4 = theta[5] - c.q1 * cx - 2.0 * c.q2 * cy;
  out.params = c;
  return out;
}

AffineResult estimate_affine(const ScalarImage& f1, Rect patch, const ScalarImage& f2,
                             Vec2i w_init, const RobustConfig& cfg) {
  return RobustEstimator(f1, f2, cfg).refine_affine(patch, w_init);
}

QuadraticResult estimate_dominant_quadratic(const ScalarImage& i1, const ScalarImage& i2,
                                            const RobustConfig& cfg) {
  return RobustEstimator(i1, i2, cfg).dominant_quadratic();
}

FlowField camera_flow_field(const QuadraticParams& q, int width, int height) {
  FlowField f(width, height);
  for (int y = 0; y < height; ++y)
    for (int x = 0; x < width; ++x) f.at(x, y) = quadratic_flow_at(q, {(double)x, (double)y});
  return f;
}

}  // namespace aggflow
