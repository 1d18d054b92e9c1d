#include "aggflow/image.hpp"

#include <algorithm>
#include <stdexcept>

namespace aggflow {

namespace {

double clampd(double v, double lo, double hi) { return v < lo ? lo : (v > hi ? hi : v); }

}  // namespace

MatchImage to_match_image(const ColorImage& rgb) {
  if (rgb.empty()) throw std::invalid_argument("to_match_image: empty image");
  MatchImage out(rgb.width, rgb.height);
  for (int y = 0; y < rgb.height; ++y) {
    for (int x = 0; x < rgb.width; ++x) {
      double r = rgb.at(x, y, 0), g = rgb.at(x, y, 1), b = rgb.at(x, y, 2);
      double v = std::max(r, std::max(g, b));
      double mn = std::min(r, std::min(g, b));
      double s = v <= 1e-12 ? 0.0 : (v - mn) / v;
      out.at(x, y, 0) = s;
      out.at(x, y, 1) = v;
    }
  }
  return out;
}

ScalarImage to_gray(const ColorImage& rgb) {
  if (rgb.empty()) throw std::invalid_argument("to_gray: empty image");
  ScalarImage out(rgb.width, rgb.height);
  for (int y = 0; y < rgb.height; ++y)
    for (int x = 0; x < rgb.width; ++x)
      out.at(x, y) = 0.299 * rgb.at(x, y, 0) + 0.587 * rgb.at(x, y, 1) + 0.114 * rgb.at(x, y, 2);
  return out;
}

Sample bilinear_sample(const ScalarImage& img, Vec2 pos) {
  if (img.empty()) throw std::invalid_argument("bilinear_sample: empty image");
  bool in = pos.x >= 0.0 && pos.x <= img.width - 1.0 && pos.y >= 0.0 && pos.y <= img.height - 1.0;
  double cx = clampd(pos.x, 0.0, img.width - 1.0);
  double cy = clampd(pos.y, 0.0, img.height - 1.0);
  int x0 = (int)std::floor(cx);
  int y0 = (int)std::floor(cy);
  int x1 = std::min(x0 + 1, img.width - 1);
  int y1 = std::min(y0 + 1, img.height - 1);
  double fx = cx - x0, fy = cy - y0;
  double v = (1.0 - fy) * ((1.0 - fx) * img.at(x0, y0) + fx * img.at(x1, y0)) +
             fy * ((1.0 - fx) * img.at(x0, y1) + fx * img.at(x1, y1));
  return {v, in};
}

GradientSample bilinear_sample(const GradientField& g, Vec2 pos) {
  if (g.width <= 0 || g.height <= 0) throw std::invalid_argument("bilinear_sample: empty field");
  bool in = pos.x >= 0.0 && pos.x <= g.width - 1.0 && pos.y >= 0.0 && pos.y <= g.height - 1.0;
  double cx = clampd(pos.x, 0.0, g.width - 1.0);
  double cy = clampd(pos.y, 0.0, g.height - 1.0);
  int x0 = (int)std::floor(cx);
  int y0 = (int)std::floor(cy);
  int x1 = std::min(x0 + 1, g.width - 1);
  int y1 = std::min(y0 + 1, g.height - 1);
  double fx = cx - x0, fy = cy - y0;
  Vec2 top = (1.0 - fx) * g.at(x0, y0) + fx * g.at(x1, y0);
  Vec2 bot = (1.0 - fx) * g.at(x0, y1) + fx * g.at(x1, y1);
  return {(1.0 - fy) * top + fy * bot, in};
}

GradientField spatial_gradient(const ScalarImage& img) {
  if (img.empty()) throw std::invalid_argument("spatial_gradient: empty image");
  GradientField g(img.width, img.height);
  int w = img.width, h = img.height;
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      double gx = 0.0, gy = 0.0;
      if (w > 1) {
        if (x == 0)
          gx = img.at(1, y) - img.at(0, y);
        else if (x == w - 1)
          gx = img.at(w - 1, y) - img.at(w - 2, y);
        else
          gx = 0.5 * (img.at(x + 1, y) - img.at(x - 1, y));
      }
      if (h > 1) {
        if (y == 0)
          gy = img.at(x, 1) - img.at(x, 0);
        else if (y == h - 1)
          gy = img.at(x, h - 1) - img.at(x, h - 2);
        else
          gy = 0.5 * (img.at(x, y + 1) - img.at(x, y - 1));
      }
      g.at(x, y) = {gx, gy};
    }
  }
  return g;
}

ScalarImage l0_smooth(const ScalarImage& img, const SmoothingConfig& cfg) {
  if (img.empty()) throw std::invalid_argument("l0_smooth: empty image");
  if (cfg.lambda <= 0.0 || cfg.kappa <= 1.0 || cfg.iters < 1)
    throw std::invalid_argument("l0_smooth: bad config");

  const int w = img.width, h = img.height;
  ScalarImage s = img;
  std::vector<double> hx((size_t)w * h, 0.0), vy((size_t)w * h, 0.0);
  double beta = 2.0 * cfg.lambda;
  const int gs_sweeps = 25;

  for (int it = 0; it < cfg.iters; ++it) {
    // Threshold gradients: keep only those whose energy beats the sparsity cost.
    double cut = cfg.lambda / beta;
    for (int y = 0; y < h; ++y) {
      for (int x = 0; x < w; ++x) {
        double gx = x + 1 < w ? s.at(x + 1, y) - s.at(x, y) : 0.0;
        double gy = y + 1 < h ? s.at(x, y + 1) - s.at(x, y) : 0.0;
        size_t i = (size_t)y * w + x;
        if (gx * gx + gy * gy <= cut) {
          hx[i] = 0.0;
          vy[i] = 0.0;
        } else {
          hx[i] = gx;
          vy[i] = gy;
        }
      }
    }
    // Gauss-Seidel sweeps on the screened-Poisson data fit.
    for (int sweep = 0; sweep < gs_sweeps; ++sweep) {
      for (int y = 0; y < h; ++y) {
        for (int x = 0; x < w; ++x) {
          size_t i = (size_t)y * w + x;
          double num = img.at(x, y);
          double den = 1.0;
          if (x + 1 < w) {
            num += beta * (s.at(x + 1, y) - hx[i]);
            den += beta;
          }
          if (y + 1 < h) {
            num += beta * (s.at(x, y + 1) - vy[i]);
            den += beta;
          }
          if (x > 0) {
            num += beta * (s.at(x - 1, y) + hx[i - 1]);
            den += beta;
          }
          if (y > 0) {
            num += beta * (s.at(x, y - 1) + vy[i - w]);
            den += beta;
          }
          s.at(x, y) = num / den;
        }
      }
    }
    beta *= cfg.kappa;
  }
  return s;
}

WeightMap edge_weights(const ScalarImage& i1, double tau, const SmoothingConfig& smoothing) {
  if (i1.empty()) throw std::invalid_argument("edge_weights: empty image");
  if (!(tau > 0.0)) throw std::invalid_argument("edge_weights: tau must be positive");
  ScalarImage base = smoothing.mode == Smoothing::l0_approx ? l0_smooth(i1, smoothing) : i1;
  WeightMap beta(base.width, base.height);
  double inv_t2 = 1.0 / (tau * tau);
  for (int y = 0; y < base.height; ++y) {
    for (int x = 0; x < base.width; ++x) {
      double gx = x + 1 < base.width ? base.at(x + 1, y) - base.at(x, y) : 0.0;
      double gy = y + 1 < base.height ? base.at(x, y + 1) - base.at(x, y) : 0.0;
      beta.at(x, y) = std::exp(-(gx * gx + gy * gy) * inv_t2);
    }
  }
  return beta;
}

namespace {

ScalarImage blur_and_decimate(const ScalarImage& in) {
  static const double k[5] = {1.0 / 16, 4.0 / 16, 6.0 / 16, 4.0 / 16, 1.0 / 16};
  int w = in.width, h = in.height;
  ScalarImage tmp(w, h);
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      double acc = 0.0;
      for (int t = -2; t <= 2; ++t) {
        int xx = std::clamp(x + t, 0, w - 1);
        acc += k[t + 2] * in.at(xx, y);
      }
      tmp.at(x, y) = acc;
    }
  }
  ScalarImage blur(w, h);
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      double acc = 0.0;
      for (int t = -2; t <= 2; ++t) {
        int yy = std::clamp(y + t, 0, h - 1);
        acc += k[t + 2] * tmp.at(x, yy);
      }
      blur.at(x, y) = acc;
    }
  }
  int ow = (w + 1) / 2, oh = (h + 1) / 2;
  ScalarImage out(ow, oh);
  for (int y = 0; y < oh; ++y)
    for (int x = 0; x < ow; ++x) out.at(x, y) = blur.at(2 * x, 2 * y);
  return out;
}

}  // namespace

std::vector<ScalarImage> build_pyramid(const ScalarImage& img, int levels) {
  if (img.empty()) throw std::invalid_argument("build_pyramid: empty image");
  if (levels < 1) throw std::invalid_argument("build_pyramid: levels must be >= 1");
  std::vector<ScalarImage> pyr;
  pyr.push_back(img);
  while ((int)pyr.size() < levels) {
    const ScalarImage& cur = pyr.back();
    int nw = (cur.width + 1) / 2, nh = (cur.height + 1) / 2;
    if (nw < 8 || nh < 8) break;
    pyr.push_back(blur_and_decimate(cur));
  }
  return pyr;
}

}  // namespace aggflow
