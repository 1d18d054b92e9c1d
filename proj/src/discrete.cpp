#include "aggflow/discrete.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <limits>
#include <sstream>
#include <stdexcept>
#include <utility>

namespace aggflow {

namespace {

constexpr double kCapEps = 1e-9;
constexpr double kSubmodularSlack = 1e-9;

// Boykov-Kolmogorov max-flow on a graph with per-node terminal capacities.
// tr_cap > 0 is residual from the source, tr_cap < 0 residual to the sink.
class FlowGraph {
 public:
  explicit FlowGraph(int n) : node_(n) {}

  void add_tcap(int i, double w) { node_[i].tr_cap += w; }

  void add_arc(int u, int v, double cap) {
    arcs_.push_back({v, node_[u].first, cap});
    node_[u].first = (int)arcs_.size() - 1;
    arcs_.push_back({u, node_[v].first, 0.0});
    node_[v].first = (int)arcs_.size() - 1;
  }

  double max_flow();

  // Nodes reachable from the source in the residual graph after max_flow().
  std::vector<uint8_t> source_side() const;

  double terminal_residual(int i) const { return node_[i].tr_cap; }

  // Visits every directed arc as f(tail, head, residual).
  template <class F>
  void for_each_arc(F f) const {
    for (size_t a = 0; a < arcs_.size(); ++a)
      f(arcs_[a ^ 1].head, arcs_[a].head, arcs_[a].r_cap);
  }

 private:
  static constexpr int kNone = -1;
  static constexpr int kTerminal = -2;
  static constexpr int kOrphan = -3;

  struct Node {
    int first = -1;     // head of the outgoing arc list
    int parent = kNone;  // arc from this node to its tree parent, or a marker
    int ts = 0;
    int dist = 0;
    bool is_sink = false;  // tree membership; valid while parent != kNone
    bool in_active = false;
    double tr_cap = 0.0;
  };
  struct Arc {
    int head;
    int next;
    double r_cap;
  };

  int sister(int a) const { return a ^ 1; }

  // Distance from q to its tree root, or -1 if q hangs off an orphan.
  int origin_dist(int q, int time);

  void adopt_source(int v, int time, std::deque<int>& orphans);
  void adopt_sink(int v, int time, std::deque<int>& orphans);

  void activate(int i, std::deque<int>& active) {
    if (!node_[i].in_active) {
      node_[i].in_active = true;
      active.push_back(i);
    }
  }

  std::vector<Node> node_;
  std::vector<Arc> arcs_;
};

int FlowGraph::origin_dist(int q, int time) {
  int d = 0;
  int v = q;
  while (true) {
    if (node_[v].ts == time) {
      d += node_[v].dist;
      break;
    }
    int pa = node_[v].parent;
    if (pa == kTerminal) {
      ++d;
      break;
    }
    if (pa == kOrphan || pa == kNone) return -1;
    ++d;
    v = arcs_[pa].head;
  }
  int dd = d;
  v = q;
  while (node_[v].ts != time) {
    node_[v].dist = dd--;
    node_[v].ts = time;
    int pa = node_[v].parent;
    if (pa == kTerminal) break;
    v = arcs_[pa].head;
  }
  return d;
}

void FlowGraph::adopt_source(int v, int time, std::deque<int>& orphans) {
  int best_arc = kNone;
  int best_dist = std::numeric_limits<int>::max();
  for (int a = node_[v].first; a != kNone; a = arcs_[a].next) {
    if (arcs_[sister(a)].r_cap <= kCapEps) continue;  // need residual parent->v
    int q = arcs_[a].head;
    if (node_[q].parent == kNone || node_[q].is_sink) continue;
    int d = origin_dist(q, time);
    if (d >= 0 && d < best_dist) {
      best_dist = d;
      best_arc = a;
    }
  }
  if (best_arc != kNone) {
    node_[v].parent = best_arc;
    node_[v].ts = time;
    node_[v].dist = best_dist + 1;
    return;
  }
  // v leaves the tree; children become orphans.
  for (int a = node_[v].first; a != kNone; a = arcs_[a].next) {
    int q = arcs_[a].head;
    if (node_[q].parent == kNone || node_[q].is_sink) continue;
    int qp = node_[q].parent;
    if (qp >= 0 && arcs_[qp].head == v) {
      node_[q].parent = kOrphan;
      orphans.push_back(q);
    }
  }
  node_[v].parent = kNone;
}

void FlowGraph::adopt_sink(int v, int time, std::deque<int>& orphans) {
  int best_arc = kNone;
  int best_dist = std::numeric_limits<int>::max();
  for (int a = node_[v].first; a != kNone; a = arcs_[a].next) {
    if (arcs_[a].r_cap <= kCapEps) continue;  // need residual v->parent
    int q = arcs_[a].head;
    if (node_[q].parent == kNone || !node_[q].is_sink) continue;
    int d = origin_dist(q, time);
    if (d >= 0 && d < best_dist) {
      best_dist = d;
      best_arc = a;
    }
  }
  if (best_arc != kNone) {
    node_[v].parent = best_arc;
    node_[v].ts = time;
    node_[v].dist = best_dist + 1;
    return;
  }
  for (int a = node_[v].first; a != kNone; a = arcs_[a].next) {
    int q = arcs_[a].head;
    if (node_[q].parent == kNone || !node_[q].is_sink) continue;
    int qp = node_[q].parent;
    if (qp >= 0 && arcs_[qp].head == v) {
      node_[q].parent = kOrphan;
      orphans.push_back(q);
    }
  }
  node_[v].parent = kNone;
}

double FlowGraph::max_flow() {
  double flow = 0.0;
  std::deque<int> active;
  std::deque<int> orphans;
  int time = 0;

  for (int i = 0; i < (int)node_.size(); ++i) {
    if (node_[i].tr_cap > kCapEps) {
      node_[i].is_sink = false;
      node_[i].parent = kTerminal;
      node_[i].dist = 1;
      activate(i, active);
    } else if (node_[i].tr_cap < -kCapEps) {
      node_[i].is_sink = true;
      node_[i].parent = kTerminal;
      node_[i].dist = 1;
      activate(i, active);
    }
  }

  while (true) {
    // Growth: expand trees from active nodes until the trees touch.
    int mid = kNone;  // arc from a source-tree node to a sink-tree node
    while (mid == kNone) {
      if (active.empty()) return flow;
      int p = active.front();
      if (node_[p].parent == kNone) {
        node_[p].in_active = false;
        active.pop_front();
        continue;
      }
      if (!node_[p].is_sink) {
        for (int a = node_[p].first; a != kNone; a = arcs_[a].next) {
          if (arcs_[a].r_cap <= kCapEps) continue;
          int q = arcs_[a].head;
          if (node_[q].parent == kNone) {
            node_[q].is_sink = false;
            node_[q].parent = sister(a);
            node_[q].ts = node_[p].ts;
            node_[q].dist = node_[p].dist + 1;
            activate(q, active);
          } else if (node_[q].is_sink) {
            mid = a;
            break;
          } else if (node_[q].ts <= node_[p].ts && node_[q].dist > node_[p].dist + 1) {
            node_[q].parent = sister(a);
            node_[q].ts = node_[p].ts;
            node_[q].dist = node_[p].dist + 1;
          }
        }
      } else {
        for (int a = node_[p].first; a != kNone; a = arcs_[a].next) {
          if (arcs_[sister(a)].r_cap <= kCapEps) continue;
          int q = arcs_[a].head;
          if (node_[q].parent == kNone) {
            node_[q].is_sink = true;
            node_[q].parent = sister(a);
            node_[q].ts = node_[p].ts;
            node_[q].dist = node_[p].dist + 1;
            activate(q, active);
          } else if (!node_[q].is_sink) {
            mid = sister(a);  // arc q -> p crosses source tree to sink tree
            break;
          } else if (node_[q].ts <= node_[p].ts && node_[q].dist > node_[p].dist + 1) {
            node_[q].parent = sister(a);
            node_[q].ts = node_[p].ts;
            node_[q].dist = node_[p].dist + 1;
          }
        }
      }
      if (mid == kNone) {
        node_[p].in_active = false;
        active.pop_front();
      }
    }

    ++time;

    // Augment along the path s -> ... -> tail(mid) -> head(mid) -> ... -> t.
    double bn = arcs_[mid].r_cap;
    for (int v = arcs_[sister(mid)].head;;) {
      int pa = node_[v].parent;
      if (pa == kTerminal) {
        bn = std::min(bn, node_[v].tr_cap);
        break;
      }
      bn = std::min(bn, arcs_[sister(pa)].r_cap);
      v = arcs_[pa].head;
    }
    for (int v = arcs_[mid].head;;) {
      int pa = node_[v].parent;
      if (pa == kTerminal) {
        bn = std::min(bn, -node_[v].tr_cap);
        break;
      }
      bn = std::min(bn, arcs_[pa].r_cap);
      v = arcs_[pa].head;
    }

    arcs_[sister(mid)].r_cap += bn;
    arcs_[mid].r_cap -= bn;
    for (int v = arcs_[sister(mid)].head;;) {
      int pa = node_[v].parent;
      if (pa == kTerminal) {
        node_[v].tr_cap -= bn;
        if (node_[v].tr_cap <= kCapEps) {
          node_[v].parent = kOrphan;
          orphans.push_front(v);
        }
        break;
      }
      arcs_[pa].r_cap += bn;
      arcs_[sister(pa)].r_cap -= bn;
      if (arcs_[sister(pa)].r_cap <= kCapEps) {
        node_[v].parent = kOrphan;
        orphans.push_front(v);
      }
      v = arcs_[pa].head;
    }
    for (int v = arcs_[mid].head;;) {
      int pa = node_[v].parent;
      if (pa == kTerminal) {
        node_[v].tr_cap += bn;
        if (node_[v].tr_cap >= -kCapEps) {
          node_[v].parent = kOrphan;
          orphans.push_front(v);
        }
        break;
      }
      arcs_[sister(pa)].r_cap += bn;
      arcs_[pa].r_cap -= bn;
      if (arcs_[pa].r_cap <= kCapEps) {
        node_[v].parent = kOrphan;
        orphans.push_front(v);
      }
      v = arcs_[pa].head;
    }
    flow += bn;

    // Adoption: reattach or free every orphan.
    while (!orphans.empty()) {
      int v = orphans.front();
      orphans.pop_front();
      bool was_sink = node_[v].is_sink;
      if (was_sink)
        adopt_sink(v, time, orphans);
      else
        adopt_source(v, time, orphans);
      if (node_[v].parent == kNone) {
        // Freed: neighbors in the same tree may offer paths to other orphans.
        for (int a = node_[v].first; a != kNone; a = arcs_[a].next) {
          int q = arcs_[a].head;
          if (node_[q].parent == kNone || node_[q].is_sink != was_sink) continue;
          double res = was_sink ? arcs_[a].r_cap : arcs_[sister(a)].r_cap;
          if (res > kCapEps) activate(q, active);
        }
      }
    }
  }
}

std::vector<uint8_t> FlowGraph::source_side() const {
  std::vector<uint8_t> seen(node_.size(), 0);
  std::deque<int> bfs;
  for (int i = 0; i < (int)node_.size(); ++i) {
    if (node_[i].tr_cap > kCapEps) {
      seen[i] = 1;
      bfs.push_back(i);
    }
  }
  while (!bfs.empty()) {
    int v = bfs.front();
    bfs.pop_front();
    for (int a = node_[v].first; a != kNone; a = arcs_[a].next) {
      if (arcs_[a].r_cap <= kCapEps) continue;
      int q = arcs_[a].head;
      if (!seen[q]) {
        seen[q] = 1;
        bfs.push_back(q);
      }
    }
  }
  return seen;
}

void check_node(const BinaryMRF& mrf, int i) {
  if (i < 0 || i >= mrf.num_nodes) throw std::invalid_argument("node index out of range");
}

void check_finite(double v) {
  if (!std::isfinite(v)) throw std::invalid_argument("energy term must be finite");
}

// Adds pairwise term (a,b,c,d) on nodes (i,j) of a min-cut network where a
// node on the sink side takes label 1. Linear parts accumulate into pot.
void reduce_pairwise(FlowGraph& g, std::vector<double>& pot, int i, int j, double a, double b,
                     double c, double d) {
  double theta = std::max(0.0, b + c - a - d);
  pot[i] += c - a;
  pot[j] += d - c;
  if (theta > 0.0) g.add_arc(i, j, theta);
}

// Strongly connected components of a directed graph; component ids come out
// in reverse topological order of the condensation.
std::vector<int> strongly_connected_components(const std::vector<std::vector<int>>& adj) {
  int n = (int)adj.size();
  std::vector<int> comp(n, -1), low(n, 0), idx(n, -1), stack;
  std::vector<uint8_t> on(n, 0);
  std::vector<std::pair<int, size_t>> dfs;
  stack.reserve(n);
  int counter = 0;
  int ncomp = 0;
  for (int s = 0; s < n; ++s) {
    if (idx[s] >= 0) continue;
    idx[s] = low[s] = counter++;
    stack.push_back(s);
    on[s] = 1;
    dfs.push_back({s, 0});
    while (!dfs.empty()) {
      int v = dfs.back().first;
      size_t& pos = dfs.back().second;
      if (pos < adj[v].size()) {
        int w = adj[v][pos];
        ++pos;
        if (idx[w] < 0) {
          idx[w] = low[w] = counter++;
          stack.push_back(w);
          on[w] = 1;
          dfs.push_back({w, 0});
        } else if (on[w]) {
          low[v] = std::min(low[v], idx[w]);
        }
      } else {
        if (low[v] == idx[v]) {
          while (true) {
            int w = stack.back();
            stack.pop_back();
            on[w] = 0;
            comp[w] = ncomp;
            if (w == v) break;
          }
          ++ncomp;
        }
        dfs.pop_back();
        if (!dfs.empty()) low[dfs.back().first] = std::min(low[dfs.back().first], low[v]);
      }
    }
  }
  return comp;
}

}  // namespace

BinaryMRF::BinaryMRF(int n) : num_nodes(n) {
  if (n < 0) throw std::invalid_argument("negative node count");
  unary.assign(n, {0.0, 0.0});
}

void BinaryMRF::add_unary(int i, double e0, double e1) {
  check_node(*this, i);
  check_finite(e0);
  check_finite(e1);
  unary[i][0] += e0;
  unary[i][1] += e1;
}

void BinaryMRF::add_pairwise(int i, int j, double e00, double e01, double e10, double e11) {
  check_node(*this, i);
  check_node(*this, j);
  if (i == j) throw std::invalid_argument("pairwise term needs distinct nodes");
  check_finite(e00);
  check_finite(e01);
  check_finite(e10);
  check_finite(e11);
  pairwise.push_back({i, j, e00, e01, e10, e11});
}

bool is_submodular(const BinaryMRF& mrf) {
  for (const PairwiseTerm& t : mrf.pairwise)
    if (t.e00 + t.e11 > t.e01 + t.e10) return false;
  return true;
}

double mrf_energy(const BinaryMRF& mrf, const std::vector<uint8_t>& labels) {
  if ((int)labels.size() != mrf.num_nodes) throw std::invalid_argument("label count mismatch");
  for (uint8_t l : labels)
    if (l > 1) throw std::invalid_argument("labels must be 0 or 1");
  double e = 0.0;
  for (int i = 0; i < mrf.num_nodes; ++i) e += mrf.unary[i][labels[i]];
  for (const PairwiseTerm& t : mrf.pairwise) {
    if (labels[t.i] == 0)
      e += labels[t.j] == 0 ? t.e00 : t.e01;
    else
      e += labels[t.j] == 0 ? t.e10 : t.e11;
  }
  return e;
}

CutResult max_flow_solve(const BinaryMRF& mrf) {
  for (const PairwiseTerm& t : mrf.pairwise) {
    if (t.e00 + t.e11 > t.e01 + t.e10 + kSubmodularSlack)
      throw std::invalid_argument("max_flow_solve requires submodular pairwise terms");
  }
  FlowGraph g(mrf.num_nodes);
  std::vector<double> pot(mrf.num_nodes, 0.0);
  for (int i = 0; i < mrf.num_nodes; ++i) pot[i] += mrf.unary[i][1] - mrf.unary[i][0];
  for (const PairwiseTerm& t : mrf.pairwise)
    reduce_pairwise(g, pot, t.i, t.j, t.e00, t.e01, t.e10, t.e11);
  for (int i = 0; i < mrf.num_nodes; ++i) g.add_tcap(i, pot[i]);
  g.max_flow();
  std::vector<uint8_t> side = g.source_side();
  CutResult out;
  out.labels.resize(mrf.num_nodes);
  for (int i = 0; i < mrf.num_nodes; ++i) out.labels[i] = side[i] ? 0 : 1;
  out.energy = mrf_energy(mrf, out.labels);
  return out;
}

QpboResult qpbo_solve(const BinaryMRF& mrf) {
  // Doubled network: node 2i stands for x_i, node 2i+1 for its complement.
  // Each half carries one copy of the energy at half scale; non-submodular
  // terms couple a variable with the complement of the other, which makes
  // both copies submodular.
  int n = mrf.num_nodes;
  FlowGraph g(2 * n);
  std::vector<double> pot(2 * n, 0.0);
  auto P = [](int i) { return 2 * i; };
  auto N = [](int i) { return 2 * i + 1; };
  for (int i = 0; i < n; ++i) {
    double delta = (mrf.unary[i][1] - mrf.unary[i][0]) / 2.0;
    pot[P(i)] += delta;
    pot[N(i)] -= delta;
  }
  for (const PairwiseTerm& t : mrf.pairwise) {
    double a = t.e00 / 2.0, b = t.e01 / 2.0, c = t.e10 / 2.0, d = t.e11 / 2.0;
    if (t.e00 + t.e11 <= t.e01 + t.e10) {
      reduce_pairwise(g, pot, P(t.i), P(t.j), a, b, c, d);
      reduce_pairwise(g, pot, N(t.j), N(t.i), d, b, c, a);
    } else {
      // Couple x_i with the complement of x_j (and vice versa).
      reduce_pairwise(g, pot, P(t.i), N(t.j), b, a, d, c);
      reduce_pairwise(g, pot, P(t.j), N(t.i), c, a, d, b);
    }
  }
  for (int u = 0; u < 2 * n; ++u) g.add_tcap(u, pot[u]);
  g.max_flow();

  // The construction keeps the arc set mirror-closed: every arc u->v has a
  // twin v^1 -> u^1 of equal capacity, and every source link s->u a twin
  // u^1 -> t. Averaging any max flow with its mirror image is again a max
  // flow whose residual graph is mirror-symmetric; its residual arcs are
  // exactly those where either member of a twin pair keeps slack. Labels are
  // read off that symmetrized residual.
  std::vector<std::vector<int>> adj(2 * n);
  g.for_each_arc([&](int u, int v, double r) {
    if (r > kCapEps) {
      adj[u].push_back(v);
      adj[v ^ 1].push_back(u ^ 1);
    }
  });
  std::vector<uint8_t> reach(2 * n, 0);
  std::deque<int> bfs;
  for (int u = 0; u < 2 * n; ++u) {
    if (g.terminal_residual(u) > kCapEps || g.terminal_residual(u ^ 1) < -kCapEps) {
      reach[u] = 1;
      bfs.push_back(u);
    }
  }
  while (!bfs.empty()) {
    int v = bfs.front();
    bfs.pop_front();
    for (int w : adj[v]) {
      if (!reach[w]) {
        reach[w] = 1;
        bfs.push_back(w);
      }
    }
  }

  QpboResult out;
  out.labels.assign(n, -1);
  bool any_unlabeled = false;
  for (int i = 0; i < n; ++i) {
    bool in_p = reach[P(i)] != 0;
    bool in_n = reach[N(i)] != 0;
    if (in_p && !in_n)
      out.labels[i] = 0;
    else if (!in_p && in_n)
      out.labels[i] = 1;
    else
      any_unlabeled = true;
  }

  if (any_unlabeled && n > 0) {
    // Residual strongly connected components decide the remaining nodes.
    std::vector<int> comp = strongly_connected_components(adj);
    for (int i = 0; i < n; ++i) {
      if (out.labels[i] >= 0) continue;
      int cp = comp[P(i)];
      int cn = comp[N(i)];
      if (cp == cn) continue;  // genuinely undecided
      out.labels[i] = cp < cn ? 1 : 0;
    }
  }
  for (int i = 0; i < n; ++i)
    if (out.labels[i] < 0) ++out.num_unlabeled;
  return out;
}

std::string dump_mrf(const BinaryMRF& mrf) {
  std::ostringstream os;
  os.precision(17);
  os << "mrf " << mrf.num_nodes << "\n";
  for (int i = 0; i < mrf.num_nodes; ++i)
    os << "node " << i << ' ' << mrf.unary[i][0] << ' ' << mrf.unary[i][1] << "\n";
  for (const PairwiseTerm& t : mrf.pairwise)
    os << "edge " << t.i << ' ' << t.j << ' ' << t.e00 << ' ' << t.e01 << ' ' << t.e10 << ' '
       << t.e11 << "\n";
  return os.str();
}

BinaryMRF parse_mrf(const std::string& text) {
  std::istringstream is(text);
  std::string tok;
  if (!(is >> tok) || tok != "mrf") throw std::invalid_argument("expected 'mrf' header");
  int n = 0;
  if (!(is >> n) || n < 0) throw std::invalid_argument("bad node count");
  BinaryMRF mrf(n);
  while (is >> tok) {
    if (tok == "node") {
      int i;
      double u0, u1;
      if (!(is >> i >> u0 >> u1)) throw std::invalid_argument("truncated node record");
      check_node(mrf, i);
      check_finite(u0);
      check_finite(u1);
      mrf.unary[i] = {u0, u1};
    } else if (tok == "edge") {
      int i, j;
      double e00, e01, e10, e11;
      if (!(is >> i >> j >> e00 >> e01 >> e10 >> e11))
        throw std::invalid_argument("truncated edge record");
      mrf.add_pairwise(i, j, e00, e01, e10, e11);
    } else {
      throw std::invalid_argument("unknown record: " + tok);
    }
  }
  return mrf;
}

}  // namespace aggflow
