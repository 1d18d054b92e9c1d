#include "aggflow/aggregate.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <utility>

#include "aggflow/discrete.hpp"
#include "aggflow/error.hpp"

namespace aggflow {
namespace {

constexpr double kMonotoneSlack = 1e-9;
const double kDiagWeight = 1.0 / std::sqrt(2.0);

// Forward half of the 8-neighborhood; visiting these from every pixel touches
// each clique exactly once.
constexpr int kCliqueDx[4] = {1, 0, 1, 1};
constexpr int kCliqueDy[4] = {0, 1, 1, -1};

template <class F>
void for_each_clique(int width, int height, F&& f) {
  for (int y = 0; y < height; ++y)
    for (int x = 0; x < width; ++x)
      for (int k = 0; k < 4; ++k) {
        int nx = x + kCliqueDx[k];
        int ny = y + kCliqueDy[k];
        if (nx < 0 || nx >= width || ny < 0 || ny >= height) continue;
        f(x, y, nx, ny, k < 2 ? 1.0 : kDiagWeight);
      }
}

double reg_phi(Vec2 d, RegPenalty p) {
  return p == RegPenalty::l1_of_norm ? d.norm() : d.squared_norm();
}

void check_inputs(const AggregationInputs& in) {
  if (!in.i1 || !in.i2 || !in.g1 || !in.g2 || !in.beta || !in.omega || !in.candidates ||
      !in.copied || !in.camera || !in.match1)
    throw std::invalid_argument("aggregation inputs: null field");
  int w = in.i1->width, h = in.i1->height;
  if (w <= 0 || h <= 0) throw std::invalid_argument("aggregation inputs: empty frame");
  auto same = [&](int ow, int oh) { return ow == w && oh == h; };
  if (!same(in.i2->width, in.i2->height) || !same(in.g1->width, in.g1->height) ||
      !same(in.g2->width, in.g2->height) || !same(in.beta->width, in.beta->height) ||
      !same(in.omega->width, in.omega->height) ||
      !same(in.candidates->width, in.candidates->height) ||
      !same(in.camera->width, in.camera->height) || !same(in.match1->width, in.match1->height))
    throw std::invalid_argument("aggregation inputs: dimension mismatch");
  if (in.copied->size() != (size_t)w * h)
    throw std::invalid_argument("aggregation inputs: copied-index list size mismatch");
}

void check_state(const AggregationInputs& in, const FlowField& w, const OcclusionMap& o,
                 const ExemplarMatch& m) {
  if (w.width != in.i1->width || w.height != in.i1->height || o.width != w.width ||
      o.height != w.height || m.width != w.width || m.height != w.height)
    throw std::invalid_argument("aggregation state: dimension mismatch");
}

// Flow the occluded pixel is tied to: the current flow at its exemplar match,
// or the camera flow when no match is set.
Vec2 tied_flow(const ExemplarMatch& m, const FlowField& w, const FlowField& camera, int x, int y) {
  if (m.defined(x, y)) {
    Vec2i t = m.at(x, y);
    return w.at(t.x, t.y);
  }
  return camera.at(x, y);
}

void gather_data_costs(const FlowField& f, const AggregationInputs& in, double gamma,
                       std::vector<double>& out) {
  for (int y = 0; y < f.height; ++y)
    for (int x = 0; x < f.width; ++x) {
      double c = rho_vis({x, y}, f.at(x, y), *in.i1, *in.i2, *in.g1, *in.g2, gamma, -1.0);
      if (c >= 0.0) out.push_back(c);
    }
}

OcclusionMap dilate_chebyshev(const OcclusionMap& o, int radius) {
  OcclusionMap rows(o.width, o.height, 0), out(o.width, o.height, 0);
  for (int y = 0; y < o.height; ++y)
    for (int x = 0; x < o.width; ++x) {
      uint8_t v = 0;
      for (int dx = -radius; dx <= radius && !v; ++dx) {
        int nx = x + dx;
        if (nx >= 0 && nx < o.width && o.at(nx, y)) v = 1;
      }
      rows.at(x, y) = v;
    }
  for (int y = 0; y < o.height; ++y)
    for (int x = 0; x < o.width; ++x) {
      uint8_t v = 0;
      for (int dy = -radius; dy <= radius && !v; ++dy) {
        int ny = y + dy;
        if (ny >= 0 && ny < o.height && rows.at(x, ny)) v = 1;
      }
      out.at(x, y) = v;
    }
  return out;
}

// Greedy split of ascending origins into subsets whose patches cannot overlap
// along the axis.
std::vector<std::vector<int>> build_chains(const std::vector<int>& origins, int size) {
  std::vector<std::vector<int>> chains;
  std::vector<char> used(origins.size(), 0);
  size_t taken = 0;
  while (taken < origins.size()) {
    std::vector<int> chain;
    int next_free = 0;
    for (size_t i = 0; i < origins.size(); ++i) {
      if (used[i]) continue;
      if (chain.empty() || origins[i] >= next_free) {
        chain.push_back((int)i);
        used[i] = 1;
        ++taken;
        next_free = origins[i] + size;
      }
    }
    chains.push_back(std::move(chain));
  }
  return chains;
}

}  // namespace

EnergyParams sintel_params() { return EnergyParams{}; }

EnergyParams middlebury_params() {
  EnergyParams p;
  p.lambda1 = 2.0;
  p.lambda2 = 10.0;
  p.lambda3 = 250.0;
  p.lambda4 = 4.5;
  return p;
}

double rho_vis(Vec2i x, Vec2 w, const ScalarImage& i1, const ScalarImage& i2,
               const GradientField& g1, const GradientField& g2, double gamma, double rho_oob) {
  Vec2 pos{x.x + w.x, x.y + w.y};
  Sample s = bilinear_sample(i2, pos);
  if (!s.in_bounds) return rho_oob;
  double cost = std::abs(s.value - i1.at(x.x, x.y));
  if (gamma != 0.0) {
    GradientSample gs = bilinear_sample(g2, pos);
    Vec2 d = gs.value - g1.at(x.x, x.y);
    cost += gamma * (std::abs(d.x) + std::abs(d.y));
  }
  return cost;
}

double rho_occ(Vec2 w, Vec2 target) { return (w - target).squared_norm(); }

double oob_cost(const FlowField& a, const FlowField* b, const AggregationInputs& in,
                double gamma) {
  std::vector<double> costs;
  costs.reserve((size_t)a.width * a.height * (b ? 2 : 1));
  gather_data_costs(a, in, gamma, costs);
  if (b) gather_data_costs(*b, in, gamma, costs);
  if (costs.empty()) return 1.0;
  size_t k = (size_t)std::floor(0.9 * (double)(costs.size() - 1));
  std::nth_element(costs.begin(), costs.begin() + k, costs.end());
  return costs[k];
}

double energy_total(const FlowField& w, const OcclusionMap& o, const ExemplarMatch& m,
                    const AggregationInputs& in, const EnergyParams& p, double rho_oob) {
  check_inputs(in);
  check_state(in, w, o, m);
  double e = 0.0;
  for (int y = 0; y < w.height; ++y)
    for (int x = 0; x < w.width; ++x) {
      if (o.at(x, y)) {
        e += p.lambda1 * rho_occ(w.at(x, y), tied_flow(m, w, *in.camera, x, y));
        e += p.lambda2 * in.omega->at(x, y);
      } else {
        e += rho_vis({x, y}, w.at(x, y), *in.i1, *in.i2, *in.g1, *in.g2, p.gamma, rho_oob);
      }
    }
  for_each_clique(w.width, w.height, [&](int x, int y, int nx, int ny, double wgt) {
    e += p.lambda3 * in.beta->at(x, y) * wgt * reg_phi(w.at(x, y) - w.at(nx, ny), p.reg_penalty);
    if (o.at(x, y) != o.at(nx, ny)) e += p.lambda4 * wgt;
  });
  return e;
}

ProposalSchedule::ProposalSchedule(const PatchSet& patches,
                                   const std::vector<std::vector<Correspondence>>& correspondences,
                                   const std::vector<std::vector<AffineResult>>& models,
                                   const AggregationInputs& in)
    : patches_(&patches), corr_(&correspondences), models_(&models), in_(&in) {
  check_inputs(in);
  if (patches.width != in.i1->width || patches.height != in.i1->height)
    throw std::invalid_argument("proposal schedule: patch set does not match the frame");
  if (correspondences.size() != (size_t)patches.total || models.size() != (size_t)patches.total)
    throw std::invalid_argument("proposal schedule: per-patch arrays must match the patch set");
  for (int i = 0; i < patches.total; ++i)
    if (correspondences[i].size() != models[i].size())
      throw std::invalid_argument("proposal schedule: correspondence/model count mismatch");

  camera_snapped_ = FlowField(patches.width, patches.height);
  for (int y = 0; y < patches.height; ++y)
    for (int x = 0; x < patches.width; ++x) {
      const auto& list = in.candidates->at(x, y);
      camera_snapped_.at(x, y) = list[nearest_candidate(list, in.camera->at(x, y))].v;
    }

  int ngrids = (int)patches.grids.size();
  std::vector<int> phases(ngrids), nmax(ngrids, 0);
  int max_phases = 0;
  for (int g = 0; g < ngrids; ++g) {
    const PatchSet::Grid& grid = patches.grids[g];
    xchains_.push_back(build_chains(grid.xs, grid.size));
    ychains_.push_back(build_chains(grid.ys, grid.size));
    phases[g] = (int)(xchains_[g].size() * ychains_[g].size());
    max_phases = std::max(max_phases, phases[g]);
    for (int i = grid.first; i < grid.first + grid.count(); ++i)
      nmax[g] = std::max(nmax[g], (int)correspondences[i].size());
  }
  // Scales take turns within each tiling round so no single patch size
  // dominates a stretch of the sweep.
  for (int ph = 0; ph < max_phases; ++ph)
    for (int g = 0; g < ngrids; ++g) {
      if (ph >= phases[g]) continue;
      for (int k = 0; k < nmax[g]; ++k) entries_.push_back({EntryKind::tiled, g, ph, k});
    }
  size_t slots = 0;
  for (const auto& list : *in.copied) slots = std::max(slots, list.size());
  for (int k = 0; k < (int)slots; ++k) entries_.push_back({EntryKind::exemplar, 0, 0, k});
  entries_.push_back({EntryKind::camera, 0, 0, 0});
}

FlowField ProposalSchedule::proposal(int index, const FlowField& current,
                                     const OcclusionMap& o) const {
  if (index < 0 || index >= (int)entries_.size())
    throw std::invalid_argument("proposal schedule: index out of range");
  if (current.width != camera_snapped_.width || current.height != camera_snapped_.height ||
      o.width != camera_snapped_.width || o.height != camera_snapped_.height)
    throw std::invalid_argument("proposal schedule: state dimension mismatch");
  const Entry& e = entries_[index];

  if (e.kind == EntryKind::camera) return camera_snapped_;

  if (e.kind == EntryKind::exemplar) {
    FlowField prop = current;
    for (int y = 0; y < prop.height; ++y)
      for (int x = 0; x < prop.width; ++x) {
        if (!o.at(x, y)) continue;
        const auto& copied = (*in_->copied)[(size_t)y * prop.width + x];
        if (copied.empty()) continue;
        int idx = copied[(size_t)e.rank % copied.size()];
        prop.at(x, y) = in_->candidates->at(x, y)[idx].v;
      }
    return prop;
  }

  FlowField prop = camera_snapped_;
  int ny_chains = (int)ychains_[e.grid].size();
  const std::vector<int>& cx = xchains_[e.grid][e.phase / ny_chains];
  const std::vector<int>& cy = ychains_[e.grid][e.phase % ny_chains];
  for (int iy : cy)
    for (int ix : cx) {
      int flat = patches_->index_of(e.grid, ix, iy);
      const auto& corr = (*corr_)[flat];
      if (e.rank >= (int)corr.size()) continue;  // patch keeps the camera flow
      Rect r = patches_->rect(flat);
      Vec2 t{(double)corr[e.rank].translation.x, (double)corr[e.rank].translation.y};
      const AffineParams& th = (*models_)[flat][e.rank].params;
      for (int y = r.y0; y < r.y1; ++y)
        for (int x = r.x0; x < r.x1; ++x) {
          Vec2 v = t + affine_flow_at(th, {(double)(x - r.x0), (double)(y - r.y0)});
          const auto& list = in_->candidates->at(x, y);
          prop.at(x, y) = list[nearest_candidate(list, v)].v;
        }
    }
  return prop;
}

FuseOutcome fuse_move(FlowField& w, const OcclusionMap& o, const ExemplarMatch& m,
                      const FlowField& proposal, const AggregationInputs& in,
                      const EnergyParams& p) {
  check_inputs(in);
  check_state(in, w, o, m);
  if (proposal.width != w.width || proposal.height != w.height)
    throw std::invalid_argument("fuse_move: proposal dimension mismatch");

  FuseOutcome out;
  out.rho_oob = oob_cost(w, &proposal, in, p.gamma);
  out.energy_before = energy_total(w, o, m, in, p, out.rho_oob);
  out.energy_after = out.energy_before;

  std::vector<int> node((size_t)w.width * w.height, -1);
  std::vector<Vec2i> moved;
  for (int y = 0; y < w.height; ++y)
    for (int x = 0; x < w.width; ++x)
      if (!(proposal.at(x, y) == w.at(x, y))) {
        node[(size_t)y * w.width + x] = (int)moved.size();
        moved.push_back({x, y});
      }
  if (moved.empty()) return out;

  BinaryMRF mrf((int)moved.size());
  for (size_t i = 0; i < moved.size(); ++i) {
    int x = moved[i].x, y = moved[i].y;
    double u0, u1;
    if (o.at(x, y)) {
      Vec2 tied = tied_flow(m, w, *in.camera, x, y);
      u0 = p.lambda1 * rho_occ(w.at(x, y), tied);
      u1 = p.lambda1 * rho_occ(proposal.at(x, y), tied);
    } else {
      u0 = rho_vis({x, y}, w.at(x, y), *in.i1, *in.i2, *in.g1, *in.g2, p.gamma, out.rho_oob);
      u1 = rho_vis({x, y}, proposal.at(x, y), *in.i1, *in.i2, *in.g1, *in.g2, p.gamma,
                   out.rho_oob);
    }
    mrf.add_unary((int)i, u0, u1);
  }
  for_each_clique(w.width, w.height, [&](int x, int y, int nx, int ny, double wgt) {
    double base = p.lambda3 * in.beta->at(x, y) * wgt;
    if (base == 0.0) return;
    int ia = node[(size_t)y * w.width + x];
    int ib = node[(size_t)ny * w.width + nx];
    if (ia < 0 && ib < 0) return;
    Vec2 ca = w.at(x, y), pa = proposal.at(x, y);
    Vec2 cb = w.at(nx, ny), pb = proposal.at(nx, ny);
    if (ia >= 0 && ib >= 0)
      mrf.add_pairwise(ia, ib, base * reg_phi(ca - cb, p.reg_penalty),
                       base * reg_phi(ca - pb, p.reg_penalty),
                       base * reg_phi(pa - cb, p.reg_penalty),
                       base * reg_phi(pa - pb, p.reg_penalty));
    else if (ia >= 0)
      mrf.add_unary(ia, base * reg_phi(ca - cb, p.reg_penalty),
                    base * reg_phi(pa - cb, p.reg_penalty));
    else
      mrf.add_unary(ib, base * reg_phi(ca - cb, p.reg_penalty),
                    base * reg_phi(ca - pb, p.reg_penalty));
  });

  QpboResult labels = qpbo_solve(mrf);
  FlowField fused = w;
  bool any = false;
  for (size_t i = 0; i < moved.size(); ++i)
    if (labels.labels[i] == 1) {
      fused.at(moved[i].x, moved[i].y) = proposal.at(moved[i].x, moved[i].y);
      any = true;
    }
  if (!any) return out;

  double e_new = energy_total(fused, o, m, in, p, out.rho_oob);
  if (e_new <= out.energy_before) {
    w = std::move(fused);
    out.energy_after = e_new;
    out.committed = true;
  }
  return out;
}

OcclusionMap estimate_occlusion(const FlowField& w, const ExemplarMatch& m,
                                const AggregationInputs& in, const EnergyParams& p,
                                double rho_oob) {
  check_inputs(in);
  if (w.width != in.i1->width || w.height != in.i1->height || m.width != w.width ||
      m.height != w.height)
    throw std::invalid_argument("estimate_occlusion: dimension mismatch");

  // Label 1 encodes "visible" so that exact cost ties resolve to visible (the
  // canonical min cut keeps tied nodes on the sink side).
  BinaryMRF mrf(w.width * w.height);
  for (int y = 0; y < w.height; ++y)
    for (int x = 0; x < w.width; ++x) {
      double vis = rho_vis({x, y}, w.at(x, y), *in.i1, *in.i2, *in.g1, *in.g2, p.gamma, rho_oob);
      double occ = p.lambda1 * rho_occ(w.at(x, y), tied_flow(m, w, *in.camera, x, y)) +
                   p.lambda2 * in.omega->at(x, y);
      mrf.add_unary(y * w.width + x, occ, vis);
    }
  if (p.lambda4 != 0.0)
    for_each_clique(w.width, w.height, [&](int x, int y, int nx, int ny, double wgt) {
      double c = p.lambda4 * wgt;
      mrf.add_pairwise(y * w.width + x, ny * w.width + nx, 0.0, c, c, 0.0);
    });

  CutResult cut = max_flow_solve(mrf);
  OcclusionMap o(w.width, w.height);
  for (int y = 0; y < w.height; ++y)
    for (int x = 0; x < w.width; ++x) o.at(x, y) = (uint8_t)(cut.labels[y * w.width + x] == 0);
  return o;
}

AggregationResult aggregate(const PatchSet& patches,
                            const std::vector<std::vector<Correspondence>>& correspondences,
                            const std::vector<std::vector<AffineResult>>& models,
                            const OcclusionMap& o_init, const ExemplarMatch& m_init,
                            const AggregationInputs& in, const AggregationConfig& cfg) {
  check_inputs(in);
  if (cfg.iterations < 0) throw std::invalid_argument("aggregate: negative iteration count");
  if (cfg.band_radius <= 0) throw std::invalid_argument("aggregate: band radius must be positive");
  const EnergyParams& p = cfg.energy;
  bool occlusion_steps = p.lambda1 != 0.0 || p.lambda2 != 0.0 || p.lambda4 != 0.0;

  ProposalSchedule schedule(patches, correspondences, models, in);
  AggregationResult res;
  res.flow = schedule.camera_snapped();
  res.occ = o_init;
  ExemplarMatch m = m_init;
  check_state(in, res.flow, res.occ, m);

  double rho_oob = oob_cost(res.flow, nullptr, in, p.gamma);
  double e = energy_total(res.flow, res.occ, m, in, p, rho_oob);
  res.trace.push_back({0, 0, MoveKind::init, e, e, true});
  int move_index = 1;

  for (int iter = 1; iter <= cfg.iterations; ++iter) {
    for (int k = 0; k < schedule.count(); ++k) {
      FlowField prop = schedule.proposal(k, res.flow, res.occ);
      FuseOutcome fo = fuse_move(res.flow, res.occ, m, prop, in, p);
      rho_oob = fo.rho_oob;
      res.trace.push_back(
          {iter, move_index++, MoveKind::fuse, fo.energy_before, fo.energy_after, fo.committed});
    }
    if (!occlusion_steps) continue;

    double before = energy_total(res.flow, res.occ, m, in, p, rho_oob);
    OcclusionMap o_new = estimate_occlusion(res.flow, m, in, p, rho_oob);
    double after = energy_total(res.flow, o_new, m, in, p, rho_oob);
    if (after > before + kMonotoneSlack)
      throw NumericalError("aggregate: occlusion step increased the energy");
    res.trace.push_back({iter, move_index++, MoveKind::occlusion, before, after, true});
    OcclusionMap o_prev = std::move(res.occ);
    res.occ = std::move(o_new);

    // Refresh matches over the new mask's neighborhood, keeping previously
    // matched pixels covered so their tie targets stay defined.
    SearchBand band = build_search_band(res.occ, cfg.band_radius);
    ExemplarMatch m_new(res.flow.width, res.flow.height);
    if (!band.empty()) {
      OcclusionMap region = dilate_chebyshev(res.occ, cfg.band_radius);
      std::vector<Vec2i> queries;
      for (int y = 0; y < res.flow.height; ++y)
        for (int x = 0; x < res.flow.width; ++x)
          if (region.at(x, y) || o_prev.at(x, y)) queries.push_back({x, y});
      m_new = exemplar_match(*in.match1, queries, band, cfg.exemplar_patch_size);
    }
    double refreshed = energy_total(res.flow, res.occ, m_new, in, p, rho_oob);
    res.trace.push_back({iter, move_index++, MoveKind::match_update, after, refreshed, true});
    m = std::move(m_new);
  }
  return res;
}

}  // namespace aggflow
