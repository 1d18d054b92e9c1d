#pragma once

#include <cstdint>
#include <vector>

#include "aggflow/candidates.hpp"
#include "aggflow/flow.hpp"
#include "aggflow/image.hpp"
#include "aggflow/patches.hpp"

namespace aggflow {

struct PatchOcclusion {
  OcclusionMap map;            // union of the occluded patches' pixels
  std::vector<Vec2i> centers;  // center pixel of each occluded patch
};

// Forward-backward consistency on one patch grid: patch flagged occluded iff
// ||t_fwd + t_bwd|| > nu. `fwd_best`/`bwd_best` are the best translations per
// grid cell, in grid scan order (x fastest).
PatchOcclusion patch_occlusion_map(const PatchSet& set, int grid_idx,
                                   const std::vector<Vec2i>& fwd_best,
                                   const std::vector<Vec2i>& bwd_best, double nu);

// Best backward translation of each forward-matched rect: the matched rect in
// frame 2 is searched back against frame 1.
std::vector<Vec2i> backward_translations(const PatchSet& set, int grid_idx,
                                         const std::vector<Vec2i>& fwd_best,
                                         const MatchImage& f1, const MatchImage& f2,
                                         const SearchStrategy& strategy);

// Gaussian Parzen estimate over the occluded-patch centers. By default the
// kernel is normalized to sum to 1 over the discrete plane, making the map a
// probability density up to border truncation; `raw_scale` instead applies a
// (1/sigma) * exp(-||d/sigma||^2 / 2) / (2*pi) kernel verbatim.
ConfidenceMap parzen_confidence(const std::vector<Vec2i>& centers, double sigma, int width,
                                int height, bool raw_scale = false);

// Non-occluded pixels within `radius` (Chebyshev) of an occluded pixel, in
// row-major order. `all_occluded` flags the degenerate mask with no visible
// pixel at all.
struct SearchBand {
  std::vector<Vec2i> pixels;
  bool all_occluded = false;
  bool empty() const { return pixels.empty(); }
};

SearchBand build_search_band(const OcclusionMap& o, int radius);

// Partial map from pixels to their best exemplar in the search band.
struct ExemplarMatch {
  int width = 0;
  int height = 0;
  std::vector<int32_t> target;  // row-major pixel id of the match, -1 if unset

  ExemplarMatch() = default;
  ExemplarMatch(int w, int h) : width(w), height(h), target((size_t)w * h, -1) {}

  bool defined(int x, int y) const { return target[(size_t)y * width + x] >= 0; }
  Vec2i at(int x, int y) const {
    int32_t id = target[(size_t)y * width + x];
    return {id % width, id / width};
  }
  void set(int x, int y, Vec2i m) {
    target[(size_t)y * width + x] = m.y * (int32_t)width + m.x;
  }
};

// Best band pixel per query by normalized SAD between patch_size x patch_size
// windows (HSV S,V channels, border-clipped, counted over mutually valid
// offsets). Ties: smaller Euclidean distance to the query, then row-major
// order. Throws if the band is empty.
ExemplarMatch exemplar_match(const MatchImage& f1, const std::vector<Vec2i>& queries,
                             const SearchBand& band, int patch_size);
ExemplarMatch exemplar_match(const ColorImage& i1, const OcclusionMap& o, const SearchBand& band,
                             int patch_size);

// Grows candidate lists in place: occluded pixels absorb the candidates of
// their exemplar match, then every pixel gains the camera-model vector.
// Returns, per pixel (row-major), the candidate indices copied from the
// exemplar — empty everywhere except occluded pixels with a defined match.
std::vector<std::vector<int>> extend_candidates(CandidateSet& c, const OcclusionMap& o,
                                                const ExemplarMatch& m, const FlowField& cam);

}  // namespace aggflow
