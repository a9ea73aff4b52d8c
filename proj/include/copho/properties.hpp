#pragma once

#include <limits>
#include <string>
#include <vector>

#include "copho/graph.hpp"

namespace copho {

/// Sentinel returned by shortest_path_lengths for a disconnected pair.
inline constexpr int kUnreachable = std::numeric_limits<int>::max();

enum class PropertyKind { Density, Clustering, Assortativity, Transitivity, ShortestPathSet };

std::string property_name(PropertyKind kind);
PropertyKind property_from_name(const std::string& name);

struct PathTarget {
  int source = 0;
  int target = 0;
  int length = 1;
};

/// Conditioning target: a property kind, a desired value y (or path triples),
/// and the acceptance tolerance epsilon used by the candidate-weight
/// indicator. Default epsilon is 10% of |y| (at least 1 hop for path sets).
struct PropertyTarget {
  PropertyKind kind = PropertyKind::Density;
  double value = 0.0;
  std::vector<PathTarget> paths;  // only for ShortestPathSet
  double epsilon = 0.0;           // 0 means "use default"

  double effective_epsilon() const;
  void validate() const;
};

// All graph properties are computed over the subgraph induced by active
// nodes; edges whose endpoint is inactive do not count.

/// 2|E| / (|V|(|V|-1)). Throws std::domain_error with fewer than 2 active nodes.
double density(const Graph& g);

/// Average local clustering coefficient; degree<2 nodes contribute 0.
/// Empty graph yields 0.
double clustering(const Graph& g);

/// 3 * triangles / connected triples; 0 when the graph has no triple.
double transitivity(const Graph& g);

/// Pearson correlation of degrees over the 2|E| ordered edge-endpoint pairs.
/// Throws std::domain_error with fewer than 2 edges or zero degree variance.
double assortativity(const Graph& g);

/// Hop counts for the given pairs; kUnreachable for disconnected pairs.
/// Throws std::invalid_argument if an endpoint is inactive.
std::vector<int> shortest_path_lengths(const Graph& g,
                                       const std::vector<std::pair<int, int>>& pairs);

/// BFS distances from src to every node (kUnreachable where not reached).
std::vector<int> bfs_distances(const Graph& g, int src);

/// Histogram of active-node degrees; bin k = number of nodes with degree k.
IntVector degree_histogram(const Graph& g);

/// Local clustering coefficient per active node (inactive slots get 0).
Vector local_clustering(const Graph& g);

/// Occurrence counts of the six connected 4-node graphlets:
/// [path4, star4, cycle4, paw, diamond, k4].
IntVector graphlet_counts(const Graph& g);

/// Node-orbit occupancy totals for the connected 4-node graphlets, eleven
/// orbits: path-end, path-mid, star-leaf, star-hub, cycle4, paw-pendant,
/// paw-cycle, paw-hub, diamond-rim, diamond-hub, k4.
IntVector graphlet_orbit_counts(const Graph& g);

enum class MmdStatistic { Degree, Clustering, Orbit };

/// Squared MMD with a Gaussian kernel over total-variation distance between
/// normalized statistic histograms; bandwidth from the median heuristic.
/// Zero on identical multisets. Throws std::invalid_argument on empty sets.
double mmd(const std::vector<Graph>& samples_a, const std::vector<Graph>& samples_b,
           MmdStatistic statistic);

/// The property value phi(g) for a scalar target kind. ShortestPathSet kinds
/// are vector-valued; use path_lengths_for_target.
double eval_property(const Graph& g, PropertyKind kind);

/// Distances for each conditioned pair of a ShortestPathSet target.
std::vector<int> path_lengths_for_target(const Graph& g, const PropertyTarget& target);

/// Mean |phi(sample) - y| over samples (and over conditioned pairs for path
/// sets; unreachable pairs count as distance n). Throws on empty samples.
double condition_mae(const std::vector<Graph>& samples, const PropertyTarget& target);

/// KL(target path-length histogram || sample path-length histogram) with
/// add-one smoothing over integer support [1, n-1].
double path_kl(const std::vector<Graph>& samples, const PropertyTarget& target);

/// Union of all shortest paths between the given pairs, as an edge set on
/// pair indices. Throws std::invalid_argument on a disconnected pair.
std::vector<int> conditioned_path_subgraph(const Graph& g,
                                           const std::vector<std::pair<int, int>>& pairs);

/// Fraction of the original conditioned-path subgraph's edges shared by the
/// generated graph's conditioned-path subgraph.
double overlap_rate(const Graph& generated, const Graph& original,
                    const std::vector<std::pair<int, int>>& pairs);

}  // namespace copho
