#include "aggflow/patches.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <stdexcept>

namespace aggflow {

Rect clip_to(const PatchSpec& p, int width, int height) {
  Rect r;
  r.x0 = std::max(0, p.origin.x);
  r.y0 = std::max(0, p.origin.y);
  r.x1 = std::min(width, p.origin.x + p.size);
  r.y1 = std::min(height, p.origin.y + p.size);
  return r;
}

namespace {

std::vector<int> axis_origins(int extent, int size, int stride) {
  std::vector<int> xs;
  if (size >= extent) {
    xs.push_back(0);
    return xs;
  }
  for (int o = 0; o + size <= extent; o += stride) xs.push_back(o);
  if (xs.back() + size < extent) xs.push_back(extent - size);
  return xs;
}

}  // namespace

PatchSet build_patch_set(int width, int height, const std::vector<int>& sizes, double overlap) {
  if (width <= 0 || height <= 0) throw std::invalid_argument("build_patch_set: empty domain");
  if (sizes.empty()) throw std::invalid_argument("build_patch_set: no sizes");
  if (!(overlap >= 0.0 && overlap < 1.0))
    throw std::invalid_argument("build_patch_set: overlap must be in [0,1)");
  PatchSet set;
  set.width = width;
  set.height = height;
  set.overlap = overlap;
  int flat = 0;
  for (int s : sizes) {
    if (s < 2) throw std::invalid_argument("build_patch_set: size must be >= 2");
    PatchSet::Grid g;
    g.size = s;
    g.stride = std::max(1, (int)std::lround((1.0 - overlap) * s));
    g.xs = axis_origins(width, s, g.stride);
    g.ys = axis_origins(height, s, g.stride);
    g.first = flat;
    flat += g.count();
    set.grids.push_back(std::move(g));
  }
  set.total = flat;
  return set;
}

PatchSpec PatchSet::spec(int index) const {
  int g = grid_of(index);
  const Grid& grid = grids[g];
  int local = index - grid.first;
  int nx = (int)grid.xs.size();
  return PatchSpec{{grid.xs[local % nx], grid.ys[local / nx]}, grid.size};
}

Rect PatchSet::rect(int index) const { return clip_to(spec(index), width, height); }

int PatchSet::grid_of(int index) const {
  for (size_t g = 0; g < grids.size(); ++g)
    if (index < grids[g].first + grids[g].count()) return (int)g;
  throw std::out_of_range("PatchSet::grid_of");
}

int PatchSet::index_of(int g, int ix, int iy) const {
  const Grid& grid = grids[g];
  return grid.first + iy * (int)grid.xs.size() + ix;
}

double sad_distance(const MatchImage& a, Rect ra, const MatchImage& b, Rect rb) {
  if (ra.w() != rb.w() || ra.h() != rb.h())
    throw std::invalid_argument("sad_distance: rect shapes differ");
  if (ra.x0 < 0 || ra.y0 < 0 || ra.x1 > a.width || ra.y1 > a.height || rb.x0 < 0 || rb.y0 < 0 ||
      rb.x1 > b.width || rb.y1 > b.height)
    throw std::invalid_argument("sad_distance: rect out of bounds");
  double acc = 0.0;
  int row = ra.w() * 2;
  for (int y = 0; y < ra.h(); ++y) {
    const double* pa = &a.data[((size_t)(ra.y0 + y) * a.width + ra.x0) * 2];
    const double* pb = &b.data[((size_t)(rb.y0 + y) * b.width + rb.x0) * 2];
    for (int i = 0; i < row; ++i) acc += std::abs(pa[i] - pb[i]);
  }
  return acc;
}

namespace {

struct Cand {
  double cost;
  Vec2i t;
};

bool cand_less(const Cand& a, const Cand& b) {
  if (a.cost != b.cost) return a.cost < b.cost;
  if (a.t.y != b.t.y) return a.t.y < b.t.y;
  return a.t.x < b.t.x;
}

struct Box {
  int txmin, txmax, tymin, tymax;
  bool contains(Vec2i t) const {
    return t.x >= txmin && t.x <= txmax && t.y >= tymin && t.y <= tymax;
  }
  Vec2i clamp(Vec2i t) const {
    return {std::clamp(t.x, txmin, txmax), std::clamp(t.y, tymin, tymax)};
  }
};

Box translation_box(Rect src, int w2, int h2, int radius) {
  Box b{-src.x0, w2 - src.x1, -src.y0, h2 - src.y1};
  if (radius > 0) {
    b.txmin = std::max(b.txmin, -radius);
    b.txmax = std::min(b.txmax, radius);
    b.tymin = std::max(b.tymin, -radius);
    b.tymax = std::min(b.tymax, radius);
  }
  return b;
}

double rect_cost(const MatchImage& f1, const MatchImage& f2, Rect src, Vec2i t) {
  Rect dst{src.x0 + t.x, src.y0 + t.y, src.x1 + t.x, src.y1 + t.y};
  return sad_distance(f1, src, f2, dst) / src.area();
}

std::vector<Correspondence> select_separated(std::vector<Cand>& cands, int n, double min_sep) {
  std::sort(cands.begin(), cands.end(), cand_less);
  std::vector<Correspondence> out;
  for (const Cand& c : cands) {
    if ((int)out.size() >= n) break;
    bool ok = true;
    if (min_sep > 0.0) {
      for (const Correspondence& s : out) {
        double dx = c.t.x - s.translation.x, dy = c.t.y - s.translation.y;
        if (dx * dx + dy * dy < min_sep * min_sep) {
          ok = false;
          break;
        }
      }
    }
    if (ok) out.push_back(Correspondence{-1, c.t, c.cost});
  }
  return out;
}

// Pool of the best translations seen so far, sorted, bounded, duplicate-free.
class CandPool {
 public:
  explicit CandPool(size_t cap) : cap_(cap) {}

  bool seen(Vec2i t) const {
    for (const Cand& c : items_)
      if (c.t == t) return true;
    return false;
  }

  void add(Cand c) {
    auto it = std::lower_bound(items_.begin(), items_.end(), c, cand_less);
    items_.insert(it, c);
    if (items_.size() > cap_) items_.pop_back();
  }

  const std::vector<Cand>& items() const { return items_; }
  bool empty() const { return items_.empty(); }
  const Cand& best() const { return items_.front(); }

 private:
  size_t cap_;
  std::vector<Cand> items_;
};

}  // namespace

PatchMatcher::PatchMatcher(const MatchImage& f1, const MatchImage& f2, SearchStrategy strategy)
    : f1_(f1), f2_(f2), strategy_(strategy) {}

std::vector<Correspondence> PatchMatcher::match_rect(Rect src, int n, double min_sep) const {
  if (n < 1) throw std::invalid_argument("match_rect: n must be >= 1");
  if (src.w() <= 0 || src.h() <= 0) throw std::invalid_argument("match_rect: empty rect");
  Box box = translation_box(src, f2_.width, f2_.height, strategy_.radius);

  if (strategy_.kind == SearchStrategy::Kind::exhaustive) {
    std::vector<Cand> cands;
    cands.reserve((size_t)(box.txmax - box.txmin + 1) * (box.tymax - box.tymin + 1));
    for (int ty = box.tymin; ty <= box.tymax; ++ty)
      for (int tx = box.txmin; tx <= box.txmax; ++tx)
        cands.push_back({rect_cost(f1_, f2_, src, {tx, ty}), {tx, ty}});
    return select_separated(cands, n, min_sep);
  }

  // Independent randomized search: seeded probes plus log-radius refinement.
  std::mt19937_64 rng(strategy_.seed ^ ((uint64_t)src.x0 << 32 | (uint64_t)(uint32_t)src.y0));
  CandPool pool(256);
  auto eval = [&](Vec2i t) {
    t = box.clamp(t);
    if (pool.seen(t)) return;
    pool.add({rect_cost(f1_, f2_, src, t), t});
  };
  auto rand_in = [&](int lo, int hi) {
    return lo + (int)(rng() % (uint64_t)(hi - lo + 1));
  };
  eval({0, 0});
  for (int i = 0; i < 4; ++i) eval({rand_in(box.txmin, box.txmax), rand_in(box.tymin, box.tymax)});
  int rmax = std::max(f2_.width, f2_.height);
  for (int it = 0; it < strategy_.iters; ++it) {
    Vec2i best = pool.best().t;
    for (int r = rmax; r >= 1; r /= 2)
      eval({best.x + rand_in(-r, r), best.y + rand_in(-r, r)});
    eval({rand_in(box.txmin, box.txmax), rand_in(box.tymin, box.tymax)});
  }
  // Exhaustive polish around the best entries so near-misses resolve exactly.
  std::vector<Vec2i> centers;
  for (int k = 0; k < 3 && k < (int)pool.items().size(); ++k)
    centers.push_back(pool.items()[k].t);
  for (Vec2i c : centers)
    for (int dy = -2; dy <= 2; ++dy)
      for (int dx = -2; dx <= 2; ++dx) eval({c.x + dx, c.y + dy});
  std::vector<Cand> cands = pool.items();
  return select_separated(cands, n, min_sep);
}

std::vector<std::vector<Correspondence>> PatchMatcher::match_grid(const PatchSet& set, int grid_idx,
                                                                  int n, double min_sep) const {
  const PatchSet::Grid& grid = set.grids[grid_idx];
  int nx = (int)grid.xs.size(), ny = (int)grid.ys.size();
  std::vector<std::vector<Correspondence>> out((size_t)nx * ny);

  if (strategy_.kind == SearchStrategy::Kind::exhaustive) {
    for (int iy = 0; iy < ny; ++iy)
      for (int ix = 0; ix < nx; ++ix) {
        int flat = set.index_of(grid_idx, ix, iy);
        auto m = match_rect(set.rect(flat), n, min_sep);
        for (auto& c : m) c.patch = flat;
        out[(size_t)iy * nx + ix] = std::move(m);
      }
    return out;
  }

  // PatchMatch-style pass: per-cell pools, neighbor propagation, random search.
  std::mt19937_64 rng(strategy_.seed + 0x9E3779B97F4A7C15ull * (uint64_t)(grid_idx + 1));
  std::vector<Rect> rects((size_t)nx * ny);
  std::vector<Box> boxes((size_t)nx * ny);
  std::vector<CandPool> pools((size_t)nx * ny, CandPool(256));
  auto eval = [&](int cell, Vec2i t) {
    t = boxes[cell].clamp(t);
    if (pools[cell].seen(t)) return;
    pools[cell].add({rect_cost(f1_, f2_, rects[cell], t), t});
  };
  auto rand_in = [&](int lo, int hi) { return lo + (int)(rng() % (uint64_t)(hi - lo + 1)); };

  for (int iy = 0; iy < ny; ++iy)
    for (int ix = 0; ix < nx; ++ix) {
      int cell = iy * nx + ix;
      rects[cell] = set.rect(set.index_of(grid_idx, ix, iy));
      boxes[cell] = translation_box(rects[cell], f2_.width, f2_.height, strategy_.radius);
      eval(cell, {0, 0});
      eval(cell, {rand_in(boxes[cell].txmin, boxes[cell].txmax),
                  rand_in(boxes[cell].tymin, boxes[cell].tymax)});
      eval(cell, {rand_in(boxes[cell].txmin, boxes[cell].txmax),
                  rand_in(boxes[cell].tymin, boxes[cell].tymax)});
    }

  int rmax = std::max(f2_.width, f2_.height);
  for (int it = 0; it < strategy_.iters; ++it) {
    bool forward = it % 2 == 0;
    for (int step = 0; step < nx * ny; ++step) {
      int cell = forward ? step : nx * ny - 1 - step;
      int ix = cell % nx, iy = cell / nx;
      int px = forward ? ix - 1 : ix + 1;
      int py = forward ? iy - 1 : iy + 1;
      if (px >= 0 && px < nx) {
        const auto& src = pools[iy * nx + px].items();
        for (size_t k = 0; k < src.size() && k < 3; ++k) eval(cell, src[k].t);
      }
      if (py >= 0 && py < ny) {
        const auto& src = pools[py * nx + ix].items();
        for (size_t k = 0; k < src.size() && k < 3; ++k) eval(cell, src[k].t);
      }
      Vec2i best = pools[cell].best().t;
      for (int r = rmax; r >= 1; r /= 2)
        eval(cell, {best.x + rand_in(-r, r), best.y + rand_in(-r, r)});
      const Box& b = boxes[cell];
      for (int p = 0; p < 6; ++p)
        eval(cell, {rand_in(b.txmin, b.txmax), rand_in(b.tymin, b.tymax)});
    }
  }

  // Final sweep: spread each cell's winner once more, descending locally.
  for (int pass = 0; pass < 2; ++pass) {
    bool forward = pass == 0;
    for (int step = 0; step < nx * ny; ++step) {
      int cell = forward ? step : nx * ny - 1 - step;
      int ix = cell % nx, iy = cell / nx;
      int px = forward ? ix - 1 : ix + 1;
      int py = forward ? iy - 1 : iy + 1;
      if (px >= 0 && px < nx) eval(cell, pools[iy * nx + px].best().t);
      if (py >= 0 && py < ny) eval(cell, pools[py * nx + ix].best().t);
      Vec2i best = pools[cell].best().t;
      for (int r = 4; r >= 1; r /= 2)
        eval(cell, {best.x + rand_in(-r, r), best.y + rand_in(-r, r)});
    }
  }

  for (int iy = 0; iy < ny; ++iy)
    for (int ix = 0; ix < nx; ++ix) {
      int cell = iy * nx + ix;
      std::vector<Vec2i> centers;
      for (int k = 0; k < 3 && k < (int)pools[cell].items().size(); ++k)
        centers.push_back(pools[cell].items()[k].t);
      for (Vec2i c : centers)
        for (int dy = -2; dy <= 2; ++dy)
          for (int dx = -2; dx <= 2; ++dx) eval(cell, {c.x + dx, c.y + dy});
      std::vector<Cand> cands = pools[cell].items();
      auto m = select_separated(cands, n, min_sep);
      for (auto& c : m) c.patch = set.index_of(grid_idx, ix, iy);
      out[cell] = std::move(m);
    }
  return out;
}

std::vector<Correspondence> match_patches(const PatchSpec& src, const MatchImage& f1,
                                          const MatchImage& f2, int n, double min_sep,
                                          const SearchStrategy& strategy) {
  PatchMatcher matcher(f1, f2, strategy);
  return matcher.match_rect(clip_to(src, f1.width, f1.height), n, min_sep);
}

}  // namespace aggflow
