#pragma once

#include <vector>

#include "aggflow/parametric.hpp"
#include "aggflow/patches.hpp"

namespace aggflow {

enum class CandidateTag { patch_local, exemplar_copied, camera };

struct Candidate {
  Vec2 v;
  CandidateTag tag = CandidateTag::patch_local;
};

// Per-pixel motion candidate lists, row-major over the frame-1 domain.
struct CandidateSet {
  int width = 0;
  int height = 0;
  std::vector<std::vector<Candidate>> data;

  CandidateSet() = default;
  CandidateSet(int w, int h) : width(w), height(h), data((size_t)w * h) {}

  std::vector<Candidate>& at(int x, int y) { return data[(size_t)y * width + x]; }
  const std::vector<Candidate>& at(int x, int y) const { return data[(size_t)y * width + x]; }
};

// Candidates closer than this (L-inf) are considered duplicates.
inline constexpr double kCandidateDedupEps = 1e-6;

// Appends `c` unless a duplicate already exists; returns the index of the
// surviving entry (the existing one keeps its tag on a duplicate hit).
int add_candidate(std::vector<Candidate>& list, Candidate c);

// Index of the list entry nearest to `v` in Euclidean norm; ties keep the
// earliest entry. The list must be non-empty.
int nearest_candidate(const std::vector<Candidate>& list, Vec2 v);

// Assembles per-pixel candidates: every patch covering a pixel contributes,
// for each of its correspondences, the integer translation plus the refined
// local model evaluated in the patch's local frame (origin at the clipped
// rect corner). Lists come back canonically sorted and deduplicated, so the
// result does not depend on patch enumeration order. `correspondences` and
// `models` are parallel to the flat patch indices of `set`.
CandidateSet collect_candidates(const PatchSet& set,
                                const std::vector<std::vector<Correspondence>>& correspondences,
                                const std::vector<std::vector<AffineResult>>& models);

}  // namespace aggflow
