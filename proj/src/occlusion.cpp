#include "aggflow/occlusion.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace aggflow {

PatchOcclusion patch_occlusion_map(const PatchSet& set, int grid_idx,
                                   const std::vector<Vec2i>& fwd_best,
                                   const std::vector<Vec2i>& bwd_best, double nu) {
  const PatchSet::Grid& grid = set.grids[grid_idx];
  if ((int)fwd_best.size() != grid.count() || (int)bwd_best.size() != grid.count())
    throw std::invalid_argument("patch_occlusion_map: translation arrays must match the grid");
  if (!(nu > 0.0)) throw std::invalid_argument("patch_occlusion_map: nu must be > 0");

  PatchOcclusion out;
  out.map = OcclusionMap(set.width, set.height, 0);
  int nx = (int)grid.xs.size();
  for (int cell = 0; cell < grid.count(); ++cell) {
    double sx = fwd_best[cell].x + bwd_best[cell].x;
    double sy = fwd_best[cell].y + bwd_best[cell].y;
    if (std::sqrt(sx * sx + sy * sy) <= nu) continue;
    Rect r = set.rect(set.index_of(grid_idx, cell % nx, cell / nx));
    for (int y = r.y0; y < r.y1; ++y)
      for (int x = r.x0; x < r.x1; ++x) out.map.at(x, y) = 1;
    out.centers.push_back({(r.x0 + r.x1) / 2, (r.y0 + r.y1) / 2});
  }
  return out;
}

std::vector<Vec2i> backward_translations(const PatchSet& set, int grid_idx,
                                         const std::vector<Vec2i>& fwd_best,
                                         const MatchImage& f1, const MatchImage& f2,
                                         const SearchStrategy& strategy) {
  const PatchSet::Grid& grid = set.grids[grid_idx];
  if ((int)fwd_best.size() != grid.count())
    throw std::invalid_argument("backward_translations: translation array must match the grid");
  PatchMatcher back(f2, f1, strategy);
  std::vector<Vec2i> out(fwd_best.size());
  int nx = (int)grid.xs.size();
  for (int cell = 0; cell < grid.count(); ++cell) {
    Rect r = set.rect(set.index_of(grid_idx, cell % nx, cell / nx));
    Rect matched{r.x0 + fwd_best[cell].x, r.y0 + fwd_best[cell].y, r.x1 + fwd_best[cell].x,
                 r.y1 + fwd_best[cell].y};
    auto m = back.match_rect(matched, 1, 0.0);
    out[cell] = m.empty() ? Vec2i{0, 0} : m[0].translation;
  }
  return out;
}

ConfidenceMap parzen_confidence(const std::vector<Vec2i>& centers, double sigma, int width,
                                int height, bool raw_scale) {
  if (!(sigma > 0.0)) throw std::invalid_argument("parzen_confidence: sigma must be > 0");
  ConfidenceMap map;
  map.width = width;
  map.height = height;
  map.data.assign((size_t)width * height, 0.0);
  if (centers.empty()) return map;

  double inv2s2 = 1.0 / (2.0 * sigma * sigma);
  double norm;
  if (raw_scale) {
    norm = 1.0 / (sigma * 2.0 * M_PI);
  } else {
    // Discrete partition sum over the plane (separable, truncated at ~10 sigma).
    int k10 = (int)std::ceil(10.0 * sigma);
    double z1 = 0.0;
    for (int k = -k10; k <= k10; ++k) z1 += std::exp(-(double)k * k * inv2s2);
    norm = 1.0 / (z1 * z1);
  }

  int r = (int)std::ceil(8.5 * sigma);
  double scale = norm / centers.size();
  for (Vec2i c : centers) {
    int x0 = std::max(0, c.x - r), x1 = std::min(width - 1, c.x + r);
    int y0 = std::max(0, c.y - r), y1 = std::min(height - 1, c.y + r);
    for (int y = y0; y <= y1; ++y)
      for (int x = x0; x <= x1; ++x) {
        double dx = x - c.x, dy = y - c.y;
        map.at(x, y) += scale * std::exp(-(dx * dx + dy * dy) * inv2s2);
      }
  }
  return map;
}

SearchBand build_search_band(const OcclusionMap& o, int radius) {
  if (radius <= 0) throw std::invalid_argument("build_search_band: radius must be > 0");
  SearchBand band;
  bool any_visible = false, any_occluded = false;
  for (uint8_t v : o.data) (v ? any_occluded : any_visible) = true;
  band.all_occluded = !any_visible && !o.data.empty();
  if (band.all_occluded || !any_occluded) return band;

  for (int y = 0; y < o.height; ++y)
    for (int x = 0; x < o.width; ++x) {
      if (o.at(x, y)) continue;
      bool near = false;
      int ya = std::max(0, y - radius), yb = std::min(o.height - 1, y + radius);
      int xa = std::max(0, x - radius), xb = std::min(o.width - 1, x + radius);
      for (int v = ya; v <= yb && !near; ++v)
        for (int u = xa; u <= xb; ++u)
          if (o.at(u, v)) {
            near = true;
            break;
          }
      if (near) band.pixels.push_back({x, y});
    }
  return band;
}

namespace {

// Normalized window SAD between patches centered at a and b; offsets counted
// only where both windows are inside the frame. `limit` allows an early abort
// once the lower bound on the final cost exceeds it.
double window_cost(const MatchImage& f, Vec2i a, Vec2i b, int half, double limit) {
  double acc = 0.0;
  int cnt = 0;
  int total = (2 * half + 1) * (2 * half + 1);
  int visited = 0;
  for (int dy = -half; dy <= half; ++dy)
    for (int dx = -half; dx <= half; ++dx) {
      ++visited;
      int ax = a.x + dx, ay = a.y + dy;
      int bx = b.x + dx, by = b.y + dy;
      if (ax < 0 || ax >= f.width || ay < 0 || ay >= f.height) continue;
      if (bx < 0 || bx >= f.width || by < 0 || by >= f.height) continue;
      const double* pa = &f.data[((size_t)ay * f.width + ax) * 2];
      const double* pb = &f.data[((size_t)by * f.width + bx) * 2];
      acc += std::abs(pa[0] - pb[0]) + std::abs(pa[1] - pb[1]);
      ++cnt;
      if (limit >= 0.0 && acc > limit * (cnt + total - visited))
        return std::numeric_limits<double>::infinity();
    }
  return cnt > 0 ? acc / cnt : std::numeric_limits<double>::infinity();
}

}  // namespace

ExemplarMatch exemplar_match(const MatchImage& f1, const std::vector<Vec2i>& queries,
                             const SearchBand& band, int patch_size) {
  if (band.empty()) throw std::invalid_argument("exemplar_match: empty search band");
  if (patch_size < 1 || patch_size % 2 == 0)
    throw std::invalid_argument("exemplar_match: patch size must be odd and positive");
  int half = patch_size / 2;

  ExemplarMatch out(f1.width, f1.height);
  for (Vec2i q : queries) {
    double best_cost = std::numeric_limits<double>::infinity();
    double best_d2 = 0.0;
    Vec2i best{-1, -1};
    for (Vec2i y : band.pixels) {
      double c = window_cost(f1, q, y, half, best_cost);
      if (!(c <= best_cost)) continue;
      double ddx = y.x - q.x, ddy = y.y - q.y;
      double d2 = ddx * ddx + ddy * ddy;
      if (c < best_cost || d2 < best_d2) {
        best_cost = c;
        best_d2 = d2;
        best = y;
      }
    }
    out.set(q.x, q.y, best);
  }
  return out;
}

ExemplarMatch exemplar_match(const ColorImage& i1, const OcclusionMap& o, const SearchBand& band,
                             int patch_size) {
  MatchImage m = to_match_image(i1);
  std::vector<Vec2i> queries;
  for (int y = 0; y < o.height; ++y)
    for (int x = 0; x < o.width; ++x)
      if (o.at(x, y)) queries.push_back({x, y});
  return exemplar_match(m, queries, band, patch_size);
}

std::vector<std::vector<int>> extend_candidates(CandidateSet& c, const OcclusionMap& o,
                                                const ExemplarMatch& m, const FlowField& cam) {
  if (c.width != o.width || c.height != o.height || c.width != cam.width ||
      c.height != cam.height)
    throw std::invalid_argument("extend_candidates: dimension mismatch");

  std::vector<std::vector<int>> copied((size_t)c.width * c.height);
  // Exemplar copies first: sources sit in the band, disjoint from the
  // occluded set, so source lists are still the unextended ones.
  for (int y = 0; y < c.height; ++y)
    for (int x = 0; x < c.width; ++x) {
      if (!o.at(x, y) || !m.defined(x, y)) continue;
      Vec2i src = m.at(x, y);
      std::vector<Candidate> donor = c.at(src.x, src.y);
      auto& list = c.at(x, y);
      auto& idx = copied[(size_t)y * c.width + x];
      for (const Candidate& d : donor)
        idx.push_back(add_candidate(list, {d.v, CandidateTag::exemplar_copied}));
    }
  for (int y = 0; y < c.height; ++y)
    for (int x = 0; x < c.width; ++x)
      add_candidate(c.at(x, y), {cam.at(x, y), CandidateTag::camera});
  return copied;
}

}  // namespace aggflow
