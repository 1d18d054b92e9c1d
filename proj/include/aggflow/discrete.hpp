#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <vector>

namespace aggflow {

// Pairwise energy term over two binary variables. e01 is the cost of
// labels (i=0, j=1), and so on.
struct PairwiseTerm {
  int i = 0;
  int j = 0;
  double e00 = 0.0;
  double e01 = 0.0;
  double e10 = 0.0;
  double e11 = 0.0;
};

// Energy over binary labels: sum of per-node unary costs plus pairwise terms.
// Multiple pairwise terms between the same pair simply add up.
struct BinaryMRF {
  int num_nodes = 0;
  std::vector<std::array<double, 2>> unary;  // unary[i][label]
  std::vector<PairwiseTerm> pairwise;

  BinaryMRF() = default;
  explicit BinaryMRF(int n);

  void add_unary(int i, double e0, double e1);
  void add_pairwise(int i, int j, double e00, double e01, double e10, double e11);
};

// True when every pairwise term satisfies e00 + e11 <= e01 + e10.
bool is_submodular(const BinaryMRF& mrf);

// Evaluates the energy at a full labeling (entries must be 0 or 1).
double mrf_energy(const BinaryMRF& mrf, const std::vector<uint8_t>& labels);

struct CutResult {
  std::vector<uint8_t> labels;
  double energy = 0.0;  // mrf_energy at `labels`
};

// Exact global minimum of a submodular BinaryMRF via min-cut. Pairwise terms
// may violate submodularity by at most 1e-9 (clamped); beyond that it throws
// std::invalid_argument.
CutResult max_flow_solve(const BinaryMRF& mrf);

struct QpboResult {
  // Per-node label: 0, 1, or -1 for unlabeled. Overwriting the labeled nodes
  // of any labeling with these values never increases its energy.
  std::vector<int8_t> labels;
  int num_unlabeled = 0;
};

// Roof-dual relaxation for arbitrary (possibly non-submodular) BinaryMRFs.
// Submodular inputs come back fully labeled at the global minimum.
QpboResult qpbo_solve(const BinaryMRF& mrf);

// Plain-text serialization: "mrf N" header, then "node i u0 u1" and
// "edge i j e00 e01 e10 e11" records. Doubles round-trip exactly.
std::string dump_mrf(const BinaryMRF& mrf);
BinaryMRF parse_mrf(const std::string& text);

}  // namespace aggflow
