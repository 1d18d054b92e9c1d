#include "aggflow/candidates.hpp"

#include <algorithm>
#include <cassert>
#include <cmath>
#include <stdexcept>

namespace aggflow {

int add_candidate(std::vector<Candidate>& list, Candidate c) {
  for (size_t i = 0; i < list.size(); ++i) {
    if (std::abs(list[i].v.x - c.v.x) <= kCandidateDedupEps &&
        std::abs(list[i].v.y - c.v.y) <= kCandidateDedupEps)
      return (int)i;
  }
  list.push_back(c);
  return (int)list.size() - 1;
}

int nearest_candidate(const std::vector<Candidate>& list, Vec2 v) {
  if (list.empty()) throw std::invalid_argument("nearest_candidate: empty list");
  int best = 0;
  double best_d = (list[0].v - v).squared_norm();
  for (size_t i = 1; i < list.size(); ++i) {
    double d = (list[i].v - v).squared_norm();
    if (d < best_d) {
      best_d = d;
      best = (int)i;
    }
  }
  return best;
}

CandidateSet collect_candidates(const PatchSet& set,
                                const std::vector<std::vector<Correspondence>>& correspondences,
                                const std::vector<std::vector<AffineResult>>& models) {
  if ((int)correspondences.size() != set.total || (int)models.size() != set.total)
    throw std::invalid_argument("collect_candidates: per-patch arrays must match the patch set");

  CandidateSet out(set.width, set.height);
  for (int i = 0; i < set.total; ++i) {
    const auto& corr = correspondences[i];
    const auto& mods = models[i];
    if (corr.size() != mods.size())
      throw std::invalid_argument("collect_candidates: correspondence/model count mismatch");
    Rect r = set.rect(i);
    for (size_t k = 0; k < corr.size(); ++k) {
      Vec2 t{(double)corr[k].translation.x, (double)corr[k].translation.y};
      const AffineParams& th = mods[k].params;
      for (int y = r.y0; y < r.y1; ++y)
        for (int x = r.x0; x < r.x1; ++x) {
          Vec2 d = affine_flow_at(th, {(double)(x - r.x0), (double)(y - r.y0)});
          out.at(x, y).push_back({t + d, CandidateTag::patch_local});
        }
    }
  }

  for (auto& list : out.data) {
    assert(!list.empty());
    std::sort(list.begin(), list.end(), [](const Candidate& a, const Candidate& b) {
      if (a.v.x != b.v.x) return a.v.x < b.v.x;
      return a.v.y < b.v.y;
    });
    std::vector<Candidate> kept;
    kept.reserve(list.size());
    for (const Candidate& c : list) add_candidate(kept, c);
    list = std::move(kept);
  }
  return out;
}

}  // namespace aggflow
