#include "copho/persistence.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <sstream>

namespace copho {

namespace {
constexpr double kInf = std::numeric_limits<double>::infinity();
}

void ScoredGraph::validate() const {
  if (node_score.size() != base.n() || edge_score.size() != pair_count(base.n()))
    throw std::invalid_argument("ScoredGraph: score array size mismatch");
  for (int v = 0; v < base.n(); ++v)
    if (base.active(v) && !std::isfinite(node_score[v]))
      throw std::invalid_argument("ScoredGraph: non-finite node score");
  for (int e = 0; e < edge_score.size(); ++e)
    if (base.edge_class_at(e) != 0 && !std::isfinite(edge_score[e]))
      throw std::invalid_argument("ScoredGraph: non-finite edge score");
}

double PersistenceDiagram::lifetime(int i) const {
  const auto& p = pairs.at(i);
  const double death = std::isinf(p.death) ? score_max : p.death;
  return death - p.birth;
}

std::vector<double> select_thresholds(const std::vector<double>& scores_desc, int t_homo) {
  if (t_homo < 1) throw ScheduleError("select_thresholds: t_homo must be positive");
  if (static_cast<int>(scores_desc.size()) < t_homo + 1)
    throw ScheduleError("select_thresholds: need at least t_homo + 1 scores");
  for (std::size_t i = 1; i < scores_desc.size(); ++i)
    if (scores_desc[i] > scores_desc[i - 1])
      throw std::invalid_argument("select_thresholds: scores not descending");
  std::vector<double> alphas(t_homo);
  for (int i = 0; i < t_homo; ++i) alphas[i] = 0.5 * (scores_desc[i] + scores_desc[i + 1]);
  return alphas;
}

namespace {

struct PoolEntry {
  double score;
  Element elem;
};

// Removable elements of g: every present edge, plus every active node whose
// incident edge labels are all zero. Node masking needs a reserved class, so
// nodes never enter the pool when the node alphabet has a single class.
std::vector<PoolEntry> removable_pool(const Graph& g, const ScoredGraph& sg) {
  std::vector<PoolEntry> pool;
  if (g.node_classes() >= 2) {
    for (int v = 0; v < g.n(); ++v) {
      if (!g.active(v)) continue;
      bool has_edge = false;
      for (int u = 0; u < g.n() && !has_edge; ++u)
        if (u != v && g.edge_class(u, v) != 0) has_edge = true;
      if (!has_edge) pool.push_back({sg.node_score[v], Element{false, v}});
    }
  }
  for (int e = 0; e < g.edge_class_pairs().size(); ++e)
    if (g.edge_class_at(e) != 0) pool.push_back({sg.edge_score[e], Element{true, e}});
  return pool;
}

// Highest score wins; ties go to nodes before edges, then ascending index.
bool better(const PoolEntry& a, const PoolEntry& b) {
  if (a.score != b.score) return a.score > b.score;
  if (a.elem.is_edge != b.elem.is_edge) return !a.elem.is_edge;
  return a.elem.index < b.elem.index;
}

}  // namespace

Filtration build_filtration(const ScoredGraph& sg, int t_homo) {
  sg.validate();
  if (t_homo < 1) throw ScheduleError("build_filtration: t_homo must be positive");

  // Threshold ladder from the pooled score ranking (diagnostic view of the
  // same removal order). A pool of exactly t_homo elements gets one sentinel
  // below its minimum so the last midpoint still exists.
  std::vector<double> ranked;
  for (int v = 0; v < sg.base.n(); ++v)
    if (sg.base.active(v) && sg.base.node_classes() >= 2) ranked.push_back(sg.node_score[v]);
  for (int e = 0; e < sg.base.edge_class_pairs().size(); ++e)
    if (sg.base.edge_class_at(e) != 0) ranked.push_back(sg.edge_score[e]);
  std::sort(ranked.begin(), ranked.end(), std::greater<>());
  if (static_cast<int>(ranked.size()) < t_homo)
    throw ScheduleError("build_filtration: fewer removable elements than t_homo");
  if (static_cast<int>(ranked.size()) == t_homo) ranked.push_back(ranked.back() - 2.0);

  Filtration f{sg.base, {}, {}};
  f.thresholds.push_back(ranked.front());
  for (double a : select_thresholds(ranked, t_homo)) f.thresholds.push_back(a);

  Graph current = sg.base;
  for (int step = 0; step < t_homo; ++step) {
    auto pool = removable_pool(current, sg);
    if (pool.empty()) throw ScheduleError("build_filtration: removable pool exhausted");
    const PoolEntry& pick = *std::min_element(
        pool.begin(), pool.end(), [](const PoolEntry& a, const PoolEntry& b) {
          return better(a, b);  // min under "better-first" = the best entry
        });
    if (pick.elem.is_edge) {
      auto [u, v] = pair_nodes(current.n(), pick.elem.index);
      current = apply_removals(current, {}, {{u, v}});
    } else {
      current = apply_removals(current, {pick.elem.index}, {});
    }
    f.steps.push_back({pick.elem, pick.score, current});
  }
  return f;
}

namespace {

struct UnionFind {
  std::vector<int> parent;
  std::vector<double> birth;  // per-root: earliest birth in the component
  explicit UnionFind(int n) : parent(n) { std::iota(parent.begin(), parent.end(), 0); }
  int find(int x) {
    while (parent[x] != x) x = parent[x] = parent[parent[x]];
    return x;
  }
};

}  // namespace

PersistenceDiagram persistence_diagram(const ScoredGraph& sg) {
  sg.validate();
  const Graph& g = sg.base;
  const int n = g.n();

  PersistenceDiagram d;
  d.score_max = -kInf;

  UnionFind uf(n);
  uf.birth.assign(n, 0.0);
  std::vector<bool> live(n, false);
  for (int v = 0; v < n; ++v) {
    if (!g.active(v)) continue;
    live[v] = true;
    uf.birth[v] = sg.node_score[v];
    d.score_max = std::max(d.score_max, sg.node_score[v]);
  }

  struct EdgeEntry {
    double value;  // entry time: max of edge and endpoint scores
    int pair_idx;
    int u, v;
  };
  std::vector<EdgeEntry> edges;
  for (auto [u, v] : g.edges()) {
    if (!live[u] || !live[v]) continue;  // stray labels to masked nodes are not edges
    const int e = pair_index(n, u, v);
    const double value = std::max({sg.edge_score[e], sg.node_score[u], sg.node_score[v]});
    edges.push_back({value, e, u, v});
    d.score_max = std::max(d.score_max, value);
  }
  std::sort(edges.begin(), edges.end(), [](const EdgeEntry& a, const EdgeEntry& b) {
    return a.value != b.value ? a.value < b.value : a.pair_idx < b.pair_idx;
  });
  if (!std::isfinite(d.score_max)) d.score_max = 0.0;

  for (const auto& e : edges) {
    int ru = uf.find(e.u), rv = uf.find(e.v);
    if (ru == rv) {
      d.pairs.push_back({1, e.value, kInf});
      continue;
    }
    // elder rule: the younger component (larger birth) dies at the edge
    if (uf.birth[ru] > uf.birth[rv]) std::swap(ru, rv);
    d.pairs.push_back({0, uf.birth[rv], e.value});
    uf.parent[rv] = ru;
  }
  for (int v = 0; v < n; ++v)
    if (live[v] && uf.find(v) == v) d.pairs.push_back({0, uf.birth[v], kInf});

  std::sort(d.pairs.begin(), d.pairs.end(), [](const PersistencePair& a, const PersistencePair& b) {
    if (a.dim != b.dim) return a.dim < b.dim;
    if (a.birth != b.birth) return a.birth < b.birth;
    return a.death < b.death;
  });
  return d;
}

std::string diagram_csv(const PersistenceDiagram& d) {
  std::ostringstream os;
  os << "dimension,birth,death\n";
  for (const auto& p : d.pairs) {
    os << p.dim << ',' << p.birth << ',';
    if (std::isinf(p.death))
      os << "inf";
    else
      os << p.death;
    os << '\n';
  }
  return os.str();
}

}  // namespace copho
