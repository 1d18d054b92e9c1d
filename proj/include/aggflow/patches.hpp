#pragma once

#include <cstdint>
#include <vector>

#include "aggflow/image.hpp"

namespace aggflow {

// Half-open pixel rectangle [x0,x1) x [y0,y1).
struct Rect {
  int x0 = 0, y0 = 0, x1 = 0, y1 = 0;
  int w() const { return x1 - x0; }
  int h() const { return y1 - y0; }
  int area() const { return w() * h(); }
  bool contains(int x, int y) const { return x >= x0 && x < x1 && y >= y0 && y < y1; }
};

// Square patch by nominal origin and size; may overhang the domain and get
// clipped.
struct PatchSpec {
  Vec2i origin;
  int size = 0;
};

Rect clip_to(const PatchSpec& p, int width, int height);

// Multi-scale overlapping patch grids covering the full domain.
struct PatchSet {
  struct Grid {
    int size = 0;
    int stride = 0;
    std::vector<int> xs, ys;  // origin coordinates per axis, ascending
    int first = 0;            // flat index of patch (xs[0], ys[0])
    int count() const { return (int)(xs.size() * ys.size()); }
  };

  int width = 0, height = 0;
  double overlap = 0.0;
  std::vector<Grid> grids;
  int total = 0;

  PatchSpec spec(int index) const;
  Rect rect(int index) const;  // clipped to the domain
  int grid_of(int index) const;
  // Flat index of the patch at grid positions (ix, iy) of grid g.
  int index_of(int g, int ix, int iy) const;
};

// Origins advance by stride = max(1, round((1-overlap)*size)); a final origin
// clamped to the border is appended when the regular grid stops short, and
// oversize patches clip to the whole axis.
PatchSet build_patch_set(int width, int height, const std::vector<int>& sizes, double overlap);

// Sum of absolute differences over both channels of two equally-sized rects.
double sad_distance(const MatchImage& a, Rect ra, const MatchImage& b, Rect rb);

struct Correspondence {
  int patch = -1;       // flat index in the owning PatchSet, -1 when standalone
  Vec2i translation;    // frame-1 rect maps to rect + translation in frame 2
  double cost = 0.0;    // SAD normalized by pixel count
};

struct SearchStrategy {
  enum class Kind { exhaustive, randomized };
  Kind kind = Kind::exhaustive;
  int radius = 0;       // exhaustive: max |t| per axis, 0 = whole frame
  int iters = 8;        // randomized: propagation/search rounds
  uint64_t seed = 1;    // randomized: rng seed
};

// n best translations of the source rect into frame 2 (whole translated rect
// kept inside the frame), pairwise at least min_sep apart in translation
// space, cost-ascending with (ty,tx) tie-breaking. May return fewer than n
// when the search region is too small. The exhaustive kind returns the global
// minimizer first.
std::vector<Correspondence> match_patches(const PatchSpec& src, const MatchImage& f1,
                                          const MatchImage& f2, int n, double min_sep,
                                          const SearchStrategy& strategy);

class PatchMatcher {
 public:
  PatchMatcher(const MatchImage& f1, const MatchImage& f2, SearchStrategy strategy);

  std::vector<Correspondence> match_rect(Rect src, int n, double min_sep) const;

  // Matches every patch of one size grid; the randomized strategy propagates
  // translations between neighboring grid cells.
  std::vector<std::vector<Correspondence>> match_grid(const PatchSet& set, int grid_idx, int n,
                                                      double min_sep) const;

 private:
  const MatchImage& f1_;
  const MatchImage& f2_;
  SearchStrategy strategy_;
};

}  // namespace aggflow
