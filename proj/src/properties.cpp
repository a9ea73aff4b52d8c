#include "copho/properties.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <unordered_set>

namespace copho {

std::string property_name(PropertyKind kind) {
  switch (kind) {
    case PropertyKind::Density: return "density";
    case PropertyKind::Clustering: return "clustering";
    case PropertyKind::Assortativity: return "assortativity";
    case PropertyKind::Transitivity: return "transitivity";
    case PropertyKind::ShortestPathSet: return "shortest_path";
  }
  return "unknown";
}

PropertyKind property_from_name(const std::string& name) {
  if (name == "density") return PropertyKind::Density;
  if (name == "clustering") return PropertyKind::Clustering;
  if (name == "assortativity") return PropertyKind::Assortativity;
  if (name == "transitivity") return PropertyKind::Transitivity;
  if (name == "shortest_path" || name == "path") return PropertyKind::ShortestPathSet;
  throw std::invalid_argument("unknown property: " + name);
}

double PropertyTarget::effective_epsilon() const {
  if (epsilon > 0.0) return epsilon;
  if (kind == PropertyKind::ShortestPathSet) return 1.0;
  return 0.1 * std::max(std::abs(value), 1e-6);
}

void PropertyTarget::validate() const {
  if (epsilon < 0.0) throw std::invalid_argument("PropertyTarget: negative epsilon");
  if (kind == PropertyKind::ShortestPathSet) {
    if (paths.empty()) throw std::invalid_argument("PropertyTarget: empty path set");
    for (const auto& p : paths) {
      if (p.source == p.target) throw std::invalid_argument("PropertyTarget: source == target");
      if (p.length < 1) throw std::invalid_argument("PropertyTarget: nonpositive path length");
    }
  }
}

double density(const Graph& g) {
  const auto nodes = g.active_nodes();
  const int k = static_cast<int>(nodes.size());
  if (k < 2) throw std::domain_error("density: fewer than 2 active nodes");
  int e = 0;
  for (std::size_t i = 0; i < nodes.size(); ++i)
    for (std::size_t j = i + 1; j < nodes.size(); ++j) e += g.present(nodes[i], nodes[j]);
  return 2.0 * e / (static_cast<double>(k) * (k - 1));
}

Vector local_clustering(const Graph& g) {
  Vector out = Vector::Zero(g.n());
  for (int v = 0; v < g.n(); ++v) {
    if (!g.active(v)) continue;
    const auto nb = g.neighbors(v);
    const int k = static_cast<int>(nb.size());
    if (k < 2) continue;
    int tri = 0;
    for (int i = 0; i < k; ++i)
      for (int j = i + 1; j < k; ++j) tri += g.present(nb[i], nb[j]);
    out[v] = 2.0 * tri / (static_cast<double>(k) * (k - 1));
  }
  return out;
}

double clustering(const Graph& g) {
  const auto nodes = g.active_nodes();
  if (nodes.empty()) return 0.0;
  const Vector local = local_clustering(g);
  double s = 0.0;
  for (int v : nodes) s += local[v];
  return s / static_cast<double>(nodes.size());
}

double transitivity(const Graph& g) {
  const auto nodes = g.active_nodes();
  long triples = 0;
  long triangles3 = 0;  // counts each triangle once per corner, i.e. 3x
  for (int v : nodes) {
    const auto nb = g.neighbors(v);
    const long k = static_cast<long>(nb.size());
    triples += k * (k - 1) / 2;
    for (std::size_t i = 0; i < nb.size(); ++i)
      for (std::size_t j = i + 1; j < nb.size(); ++j) triangles3 += g.present(nb[i], nb[j]);
  }
  if (triples == 0) return 0.0;
  return static_cast<double>(triangles3) / static_cast<double>(triples);
}

double assortativity(const Graph& g) {
  std::vector<double> xs, ys;  // ordered endpoint degrees, both orientations
  for (auto [u, v] : g.edges()) {
    if (!g.active(u) || !g.active(v)) continue;
    const double du = g.degree(u), dv = g.degree(v);
    xs.push_back(du);
    ys.push_back(dv);
    xs.push_back(dv);
    ys.push_back(du);
  }
  if (xs.size() < 4) throw std::domain_error("assortativity: fewer than 2 edges");
  const double n = static_cast<double>(xs.size());
  double mx = 0, my = 0;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    mx += xs[i];
    my += ys[i];
  }
  mx /= n;
  my /= n;
  double sxy = 0, sxx = 0, syy = 0;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    sxy += (xs[i] - mx) * (ys[i] - my);
    sxx += (xs[i] - mx) * (xs[i] - mx);
    syy += (ys[i] - my) * (ys[i] - my);
  }
  if (sxx <= 0.0 || syy <= 0.0)
    throw std::domain_error("assortativity: zero variance of endpoint degrees");
  return sxy / std::sqrt(sxx * syy);
}

std::vector<int> bfs_distances(const Graph& g, int src) {
  std::vector<int> dist(g.n(), kUnreachable);
  if (!g.active(src)) throw std::invalid_argument("bfs_distances: inactive source");
  std::deque<int> q{src};
  dist[src] = 0;
  while (!q.empty()) {
    int v = q.front();
    q.pop_front();
    for (int u : g.neighbors(v)) {
      if (dist[u] != kUnreachable) continue;
      dist[u] = dist[v] + 1;
      q.push_back(u);
    }
  }
  return dist;
}

std::vector<int> shortest_path_lengths(const Graph& g,
                                       const std::vector<std::pair<int, int>>& pairs) {
  std::vector<int> out;
  out.reserve(pairs.size());
  for (auto [u, v] : pairs) {
    if (!g.active(u) || !g.active(v))
      throw std::invalid_argument("shortest_path_lengths: inactive endpoint");
    out.push_back(bfs_distances(g, u)[v]);
  }
  return out;
}

IntVector degree_histogram(const Graph& g) {
  int max_deg = 0;
  std::vector<int> degs;
  for (int v : g.active_nodes()) {
    degs.push_back(g.degree(v));
    max_deg = std::max(max_deg, degs.back());
  }
  IntVector hist = IntVector::Zero(max_deg + 1);
  for (int d : degs) hist[d] += 1;
  return hist;
}

namespace {

// Connected 4-node graphlet classes keyed by (edge count, sorted degree seq).
enum Graphlet4 { kPath4 = 0, kStar4, kCycle4, kPaw, kDiamond, kK4, kNotConnected };

Graphlet4 classify4(int edges, const std::array<int, 4>& degs_sorted) {
  switch (edges) {
    case 3:
      if (degs_sorted == std::array<int, 4>{1, 1, 2, 2}) return kPath4;
      if (degs_sorted == std::array<int, 4>{1, 1, 1, 3}) return kStar4;
      return kNotConnected;  // triangle + isolated node
    case 4:
      if (degs_sorted == std::array<int, 4>{2, 2, 2, 2}) return kCycle4;
      return kPaw;  // (1,2,2,3)
    case 5:
      return kDiamond;
    case 6:
      return kK4;
    default:
      return kNotConnected;
  }
}

template <typename PerSubset>
void for_each_4subset(const Graph& g, PerSubset&& fn) {
  const auto nodes = g.active_nodes();
  const int k = static_cast<int>(nodes.size());
  for (int i = 0; i < k; ++i)
    for (int j = i + 1; j < k; ++j)
      for (int l = j + 1; l < k; ++l)
        for (int m = l + 1; m < k; ++m) {
          std::array<int, 4> q{nodes[i], nodes[j], nodes[l], nodes[m]};
          int edges = 0;
          std::array<int, 4> deg{0, 0, 0, 0};
          for (int x = 0; x < 4; ++x)
            for (int y = x + 1; y < 4; ++y)
              if (g.present(q[x], q[y])) {
                ++edges;
                ++deg[x];
                ++deg[y];
              }
          std::array<int, 4> sorted = deg;
          std::sort(sorted.begin(), sorted.end());
          Graphlet4 cls = classify4(edges, sorted);
          if (cls != kNotConnected) fn(cls, q, deg);
        }
}

}  // namespace

IntVector graphlet_counts(const Graph& g) {
  IntVector counts = IntVector::Zero(6);
  for_each_4subset(g, [&](Graphlet4 cls, const std::array<int, 4>&, const std::array<int, 4>&) {
    counts[cls] += 1;
  });
  return counts;
}

IntVector graphlet_orbit_counts(const Graph& g) {
  IntVector orbits = IntVector::Zero(11);
  for_each_4subset(g,
                   [&](Graphlet4 cls, const std::array<int, 4>&, const std::array<int, 4>& deg) {
                     for (int x = 0; x < 4; ++x) {
                       switch (cls) {
                         case kPath4: orbits[deg[x] == 1 ? 0 : 1] += 1; break;
                         case kStar4: orbits[deg[x] == 1 ? 2 : 3] += 1; break;
                         case kCycle4: orbits[4] += 1; break;
                         case kPaw: orbits[deg[x] == 1 ? 5 : (deg[x] == 2 ? 6 : 7)] += 1; break;
                         case kDiamond: orbits[deg[x] == 2 ? 8 : 9] += 1; break;
                         case kK4: orbits[10] += 1; break;
                         default: break;
                       }
                     }
                   });
  return orbits;
}

namespace {

Vector normalized_histogram(const Vector& counts) {
  const double total = counts.sum();
  if (total <= 0.0) return Vector::Zero(counts.size());
  return counts / total;
}

Vector statistic_vector(const Graph& g, MmdStatistic stat, int degree_bins) {
  switch (stat) {
    case MmdStatistic::Degree: {
      Vector h = Vector::Zero(degree_bins);
      for (int v : g.active_nodes()) h[std::min(g.degree(v), degree_bins - 1)] += 1.0;
      return normalized_histogram(h);
    }
    case MmdStatistic::Clustering: {
      constexpr int kBins = 100;
      Vector h = Vector::Zero(kBins);
      const Vector local = local_clustering(g);
      for (int v : g.active_nodes()) {
        int b = std::min(static_cast<int>(local[v] * kBins), kBins - 1);
        h[b] += 1.0;
      }
      return normalized_histogram(h);
    }
    case MmdStatistic::Orbit: {
      const IntVector o = graphlet_orbit_counts(g);
      return normalized_histogram(o.cast<double>());
    }
  }
  throw std::invalid_argument("mmd: unknown statistic");
}

double tv_distance(const Vector& a, const Vector& b) { return 0.5 * (a - b).lpNorm<1>(); }

}  // namespace

double mmd(const std::vector<Graph>& samples_a, const std::vector<Graph>& samples_b,
           MmdStatistic statistic) {
  if (samples_a.empty() || samples_b.empty()) throw std::invalid_argument("mmd: empty sample set");

  int degree_bins = 1;
  if (statistic == MmdStatistic::Degree) {
    int max_deg = 0;
    for (const auto* set : {&samples_a, &samples_b})
      for (const Graph& g : *set)
        for (int v : g.active_nodes()) max_deg = std::max(max_deg, g.degree(v));
    degree_bins = max_deg + 1;
  }

  std::vector<Vector> fa, fb;
  for (const Graph& g : samples_a) fa.push_back(statistic_vector(g, statistic, degree_bins));
  for (const Graph& g : samples_b) fb.push_back(statistic_vector(g, statistic, degree_bins));

  // Median heuristic over all pooled pairwise distances.
  std::vector<double> dists;
  std::vector<const Vector*> pooled;
  for (const auto& v : fa) pooled.push_back(&v);
  for (const auto& v : fb) pooled.push_back(&v);
  for (std::size_t i = 0; i < pooled.size(); ++i)
    for (std::size_t j = i + 1; j < pooled.size(); ++j)
      dists.push_back(tv_distance(*pooled[i], *pooled[j]));
  double sigma = 1.0;
  if (!dists.empty()) {
    std::nth_element(dists.begin(), dists.begin() + dists.size() / 2, dists.end());
    sigma = dists[dists.size() / 2];
    if (sigma <= 0.0) sigma = 1.0;
  }

  auto kernel = [sigma](const Vector& x, const Vector& y) {
    const double d = tv_distance(x, y);
    return std::exp(-d * d / (2.0 * sigma * sigma));
  };
  double kaa = 0, kbb = 0, kab = 0;
  for (const auto& x : fa)
    for (const auto& y : fa) kaa += kernel(x, y);
  for (const auto& x : fb)
    for (const auto& y : fb) kbb += kernel(x, y);
  for (const auto& x : fa)
    for (const auto& y : fb) kab += kernel(x, y);
  const double na = static_cast<double>(fa.size()), nb = static_cast<double>(fb.size());
  const double v = kaa / (na * na) + kbb / (nb * nb) - 2.0 * kab / (na * nb);
  return std::max(v, 0.0);  // clamp float negatives of the V-statistic
}

double eval_property(const Graph& g, PropertyKind kind) {
  switch (kind) {
    case PropertyKind::Density: return density(g);
    case PropertyKind::Clustering: return clustering(g);
    case PropertyKind::Assortativity: return assortativity(g);
    case PropertyKind::Transitivity: return transitivity(g);
    case PropertyKind::ShortestPathSet:
      throw std::invalid_argument("eval_property: path sets are vector-valued");
  }
  throw std::invalid_argument("eval_property: unknown kind");
}

std::vector<int> path_lengths_for_target(const Graph& g, const PropertyTarget& target) {
  std::vector<std::pair<int, int>> pairs;
  for (const auto& p : target.paths) pairs.emplace_back(p.source, p.target);
  return shortest_path_lengths(g, pairs);
}

namespace {

// Range width used when phi is undefined on a sample (degenerate graph):
// the worst possible |phi - y| for that property.
double undefined_phi_error(PropertyKind kind) {
  return kind == PropertyKind::Assortativity ? 2.0 : 1.0;
}

}  // namespace

double condition_mae(const std::vector<Graph>& samples, const PropertyTarget& target) {
  if (samples.empty()) throw std::invalid_argument("condition_mae: empty sample set");
  target.validate();
  double total = 0.0;
  long terms = 0;
  for (const Graph& g : samples) {
    if (target.kind == PropertyKind::ShortestPathSet) {
      for (const auto& p : target.paths) {
        int d;
        try {
          d = shortest_path_lengths(g, {{p.source, p.target}})[0];
        } catch (const std::invalid_argument&) {
          d = kUnreachable;
        }
        const double dv = d == kUnreachable ? static_cast<double>(g.n()) : d;
        total += std::abs(dv - p.length);
        ++terms;
      }
    } else {
      try {
        total += std::abs(eval_property(g, target.kind) - target.value);
      } catch (const std::domain_error&) {
        total += undefined_phi_error(target.kind);
      }
      ++terms;
    }
  }
  return total / static_cast<double>(terms);
}

double path_kl(const std::vector<Graph>& samples, const PropertyTarget& target) {
  if (samples.empty()) throw std::invalid_argument("path_kl: empty sample set");
  if (target.kind != PropertyKind::ShortestPathSet)
    throw std::invalid_argument("path_kl: target is not a path set");
  target.validate();
  const int n = samples.front().n();
  const int support = std::max(n - 1, 1);  // lengths 1..n-1
  Vector p = Vector::Ones(support);        // add-one smoothing
  Vector q = Vector::Ones(support);
  auto bin = [support](int len) { return std::min(std::max(len, 1), support) - 1; };
  for (const auto& t : target.paths) p[bin(t.length)] += 1.0;
  for (const Graph& g : samples)
    for (const auto& t : target.paths) {
      int d;
      try {
        d = shortest_path_lengths(g, {{t.source, t.target}})[0];
      } catch (const std::invalid_argument&) {
        d = kUnreachable;
      }
      q[bin(d == kUnreachable ? support : d)] += 1.0;
    }
  p /= p.sum();
  q /= q.sum();
  double kl = 0.0;
  for (int i = 0; i < support; ++i) kl += p[i] * std::log(p[i] / q[i]);
  return kl;
}

std::vector<int> conditioned_path_subgraph(const Graph& g,
                                           const std::vector<std::pair<int, int>>& pairs) {
  std::unordered_set<int> edge_set;
  for (auto [s, t] : pairs) {
    if (!g.active(s) || !g.active(t))
      throw std::invalid_argument("conditioned_path_subgraph: inactive endpoint");
    const auto ds = bfs_distances(g, s);
    const auto dt = bfs_distances(g, t);
    const int d = ds[t];
    if (d == kUnreachable)
      throw std::invalid_argument("conditioned_path_subgraph: disconnected pair");
    for (auto [u, v] : g.edges()) {
      if (!g.active(u) || !g.active(v)) continue;
      if (ds[u] == kUnreachable || ds[v] == kUnreachable) continue;
      const bool on_path = (ds[u] + 1 + dt[v] == d) || (ds[v] + 1 + dt[u] == d);
      if (on_path) edge_set.insert(pair_index(g.n(), u, v));
    }
  }
  std::vector<int> out(edge_set.begin(), edge_set.end());
  std::sort(out.begin(), out.end());
  return out;
}

double overlap_rate(const Graph& generated, const Graph& original,
                    const std::vector<std::pair<int, int>>& pairs) {
  if (generated.n() != original.n())
    throw std::invalid_argument("overlap_rate: node count mismatch");
  const auto orig = conditioned_path_subgraph(original, pairs);
  if (orig.empty()) throw std::invalid_argument("overlap_rate: empty conditioned subgraph");
  const auto gen = conditioned_path_subgraph(generated, pairs);
  std::unordered_set<int> gen_set(gen.begin(), gen.end());
  int shared = 0;
  for (int e : orig) shared += gen_set.count(e) > 0;
  return static_cast<double>(shared) / static_cast<double>(orig.size());
}

}  // namespace copho
