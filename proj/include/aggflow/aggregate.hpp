#pragma once

#include <cstdint>
#include <vector>

#include "aggflow/candidates.hpp"
#include "aggflow/flow.hpp"
#include "aggflow/image.hpp"
#include "aggflow/occlusion.hpp"
#include "aggflow/parametric.hpp"
#include "aggflow/patches.hpp"

namespace aggflow {

// Penalty applied to flow differences across neighboring pixels.
enum class RegPenalty : uint8_t { l1_of_norm, squared };

// Weights and shape of the aggregation energy.
struct EnergyParams {
  double lambda1 = 5.0;    // coupling of occluded flow to its exemplar
  double lambda2 = 50.0;   // occlusion cost, scaled by the confidence map
  double lambda3 = 500.0;  // flow smoothness
  double lambda4 = 20.0;   // occlusion smoothness (Potts)
  double gamma = 1.0;      // gradient term weight in the data cost
  double tau = 0.2;        // contrast scale for the smoothness weights
  RegPenalty reg_penalty = RegPenalty::l1_of_norm;
};

EnergyParams sintel_params();
EnergyParams middlebury_params();

// Read-only bundle of everything the energy evaluation needs. All pointers
// must stay valid while aggregation runs; dimensions must agree with the
// frames. `copied` holds, per pixel, the candidate indices absorbed from its
// exemplar match (see extend_candidates).
struct AggregationInputs {
  const ScalarImage* i1 = nullptr;    // frame 1, grayscale
  const ScalarImage* i2 = nullptr;    // frame 2, grayscale
  const GradientField* g1 = nullptr;  // spatial gradient of frame 1
  const GradientField* g2 = nullptr;  // spatial gradient of frame 2
  const WeightMap* beta = nullptr;    // contrast weights on frame 1
  const ConfidenceMap* omega = nullptr;
  const CandidateSet* candidates = nullptr;
  const std::vector<std::vector<int>>* copied = nullptr;
  const FlowField* camera = nullptr;   // dominant-motion flow
  const MatchImage* match1 = nullptr;  // frame 1 in the matching color space
};

// Data cost of flow w at pixel x: intensity difference plus gamma-weighted
// gradient difference against frame 2, both L1; rho_oob when x + w lands
// outside frame 2.
double rho_vis(Vec2i x, Vec2 w, const ScalarImage& i1, const ScalarImage& i2,
               const GradientField& g1, const GradientField& g2, double gamma, double rho_oob);

// Squared deviation between a flow vector and the vector it is tied to.
double rho_occ(Vec2 w, Vec2 target);

// 90th-percentile in-bounds data cost over one or two flow fields. Falls back
// to 1.0 when every sample lands out of bounds.
double oob_cost(const FlowField& a, const FlowField* b, const AggregationInputs& in, double gamma);

// Full energy of a flow/occlusion state. Occluded pixels are tied to the flow
// at their exemplar match, or to the camera flow where the match is unset.
// Smoothness runs over the 8-neighborhood with diagonal cliques down-weighted
// by 1/sqrt(2); each clique is counted once, with the contrast weight taken at
// its first pixel.
double energy_total(const FlowField& w, const OcclusionMap& o, const ExemplarMatch& m,
                    const AggregationInputs& in, const EnergyParams& p, double rho_oob);

// Sequence of whole-frame flow proposals fed to the fusion steps. Tiled
// proposals paste per-patch motion models over non-overlapping patch subsets
// (one proposal per subset and per match rank), on top of the camera flow;
// every vector is snapped to the pixel's candidate list. Exemplar proposals
// rewrite occluded pixels with their copied candidates; the final proposal is
// the snapped camera flow itself.
class ProposalSchedule {
 public:
  ProposalSchedule(const PatchSet& patches,
                   const std::vector<std::vector<Correspondence>>& correspondences,
                   const std::vector<std::vector<AffineResult>>& models,
                   const AggregationInputs& in);

  int count() const { return (int)entries_.size(); }
  const FlowField& camera_snapped() const { return camera_snapped_; }

  // Builds proposal `index`. Exemplar entries read the current flow and
  // occlusion state; tiled and camera entries ignore them.
  FlowField proposal(int index, const FlowField& current, const OcclusionMap& o) const;

 private:
  enum class EntryKind : uint8_t { tiled, exemplar, camera };
  struct Entry {
    EntryKind kind;
    int grid = 0;   // tiled: grid index
    int phase = 0;  // tiled: tiling subset
    int rank = 0;   // tiled: match rank; exemplar: copied-candidate slot
  };

  const PatchSet* patches_;
  const std::vector<std::vector<Correspondence>>* corr_;
  const std::vector<std::vector<AffineResult>>* models_;
  const AggregationInputs* in_;
  FlowField camera_snapped_;
  // Per grid and axis: tiling chains as indices into Grid::xs / Grid::ys.
  std::vector<std::vector<std::vector<int>>> xchains_, ychains_;
  std::vector<Entry> entries_;
};

struct FuseOutcome {
  bool committed = false;
  double energy_before = 0.0;
  double energy_after = 0.0;
  double rho_oob = 0.0;
};

// Binary fusion of `w` with `proposal` under fixed occlusion and matches:
// pixels where the two fields differ pick one side via roof-dual relaxation
// (undecided pixels keep `w`). The result replaces `w` only when its energy
// does not exceed the current one; both energies are reported.
FuseOutcome fuse_move(FlowField& w, const OcclusionMap& o, const ExemplarMatch& m,
                      const FlowField& proposal, const AggregationInputs& in,
                      const EnergyParams& p);

// Exact minimizer of the energy over the occlusion mask with the flow and
// matches held fixed (the unary/Potts subproblem is submodular).
OcclusionMap estimate_occlusion(const FlowField& w, const ExemplarMatch& m,
                                const AggregationInputs& in, const EnergyParams& p,
                                double rho_oob);

enum class MoveKind : uint8_t { init, fuse, occlusion, match_update };

struct TraceRecord {
  int iteration = 0;   // 0 for the initial state, then 1-based
  int move_index = 0;  // position in the overall move sequence
  MoveKind kind = MoveKind::init;
  double energy_before = 0.0;
  double energy_after = 0.0;
  bool committed = false;
};

struct AggregationConfig {
  EnergyParams energy;
  int iterations = 3;
  int band_radius = 10;        // exemplar search band / mask dilation radius
  int exemplar_patch_size = 11;
};

struct AggregationResult {
  FlowField flow;
  OcclusionMap occ;
  std::vector<TraceRecord> trace;
};

// Alternating minimization: starts from the snapped camera flow and the given
// occlusion/match state, then per iteration runs a full proposal sweep of
// fusion moves, re-estimates the occlusion mask, and recomputes exemplar
// matches over the dilated mask plus previously matched pixels. Fusion and
// occlusion steps never increase the energy (the occlusion step throws
// NumericalError if that is violated); match updates may, and are traced but
// not guarded. With lambda1 = lambda2 = lambda4 = 0 the occlusion and match
// steps are skipped and the mask stays at `o_init`.
AggregationResult aggregate(const PatchSet& patches,
                            const std::vector<std::vector<Correspondence>>& correspondences,
                            const std::vector<std::vector<AffineResult>>& models,
                            const OcclusionMap& o_init, const ExemplarMatch& m_init,
                            const AggregationInputs& in, const AggregationConfig& cfg);

}  // namespace aggflow
