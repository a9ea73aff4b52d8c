#pragma once

#include <iosfwd>
#include <string>
#include <utility>
#include <vector>

#include "copho/errors.hpp"
#include "copho/rng.hpp"
#include "copho/types.hpp"

namespace copho {

/// Undirected labeled graph on a fixed node set. Node classes live in
/// {0..a-1}, edge classes in {0..b-1}; edge class 0 means "no edge".
/// When a >= 2, class a-1 is the reserved inactive marker: a node carrying it
/// counts as removed from the graph even though the tensor keeps its slot.
/// Edge labels are stored once per unordered pair (upper triangle), so the
/// symmetry invariant is structural. Treat instances as immutable values once
/// built; all operations below are pure.
class Graph {
 public:
  Graph(int n, int node_classes, int edge_classes);
  Graph(IntVector node_class, IntVector edge_class_pairs, int node_classes, int edge_classes);

  int n() const { return n_; }
  int node_classes() const { return a_; }
  int edge_classes() const { return b_; }

  int node_class(int v) const { return node_class_[check_node(v)]; }
  int edge_class(int u, int v) const {
    if (u == v) return 0;
    return edge_class_[pair_index(n_, check_node(u), check_node(v))];
  }
  int edge_class_at(int pair_idx) const { return edge_class_[pair_idx]; }

  void set_node_class(int v, int c);
  void set_edge_class(int u, int v, int c);

  /// A node is active unless it carries the reserved inactive class.
  bool active(int v) const { return a_ < 2 || node_class_[check_node(v)] != a_ - 1; }
  bool present(int u, int v) const { return edge_class(u, v) != 0; }

  int active_count() const;
  std::vector<int> active_nodes() const;

  /// Present edges as (u, v) with u < v, in pair-index order.
  std::vector<std::pair<int, int>> edges() const;
  int edge_count() const;

  /// Degree of v counting neighbors over present edges whose other endpoint
  /// is active. Inactive v has degree 0.
  int degree(int v) const;
  std::vector<int> neighbors(int v) const;

  const IntVector& node_class_vector() const { return node_class_; }
  const IntVector& edge_class_pairs() const { return edge_class_; }

  bool operator==(const Graph& o) const;
  bool operator!=(const Graph& o) const { return !(*this == o); }

 private:
  int check_node(int v) const {
    if (v < 0 || v >= n_) throw std::out_of_range("Graph: node index out of range");
    return v;
  }
  void validate() const;

  int n_, a_, b_;
  IntVector node_class_;  // n entries
  IntVector edge_class_;  // n(n-1)/2 entries, upper-triangle order
};

/// Categorical state of the diffusion chain before sampling: one simplex over
/// node classes per node, one simplex over edge classes per unordered pair.
class GraphDistribution {
 public:
  GraphDistribution(Matrix node_probs, Matrix edge_probs, int n);

  static GraphDistribution one_hot(const Graph& g);

  int n() const { return n_; }
  int node_classes() const { return static_cast<int>(node_probs_.cols()); }
  int edge_classes() const { return static_cast<int>(edge_probs_.cols()); }

  const Matrix& node_probs() const { return node_probs_; }   // n x a
  const Matrix& edge_probs() const { return edge_probs_; }   // n(n-1)/2 x b

  double node_prob(int v, int c) const { return node_probs_(v, c); }
  double edge_prob(int u, int v, int c) const { return edge_probs_(pair_index(n_, u, v), c); }

  Graph sample(Rng& rng) const;
  Graph argmax() const;

 private:
  void validate() const;
  int n_;
  Matrix node_probs_;
  Matrix edge_probs_;
};

/// Count of node-label plus edge-label disagreements (Hamming distance over
/// the fixed-size encoding). Symmetric; zero iff identical.
int edit_distance(const Graph& g1, const Graph& g2);

/// Returns g with the listed nodes masked (class a-1, incident edges zeroed)
/// and the listed edges set to class 0. Idempotent on already-removed
/// elements.
Graph apply_removals(const Graph& g, const std::vector<int>& nodes,
                     const std::vector<std::pair<int, int>>& edges);

// --- edge-list text format -------------------------------------------------
// One record per graph: "n a b", then one "v class" line per node, then one
// "u v class" line per present edge (u < v, pair-index order). Records in a
// multi-graph file are separated by a single blank line. Round-trips
// bit-exactly on canonical output.

void write_edge_list(std::ostream& os, const Graph& g);
std::string to_edge_list(const Graph& g);
void save_edge_list(const std::string& path, const std::vector<Graph>& graphs);
std::vector<Graph> load_edge_list(const std::string& path);
std::vector<Graph> parse_edge_list(std::istream& is);

}  // namespace copho
