#pragma once

#include <string>
#include <vector>

#include "copho/graph.hpp"

namespace copho {

/// A graph whose active nodes and present edges carry real-valued removal
/// scores (higher score = removed earlier in the decreasing filtration).
struct ScoredGraph {
  Graph base;
  Vector node_score;  // length n; read on active nodes
  Vector edge_score;  // length pair_count(n); read on present edges

  /// Throws std::invalid_argument on size mismatch or non-finite scores at
  /// active/present slots.
  void validate() const;
};

/// One removable element: either a node (index = node id) or an edge
/// (index = unordered pair index).
struct Element {
  bool is_edge = false;
  int index = 0;
  friend bool operator==(const Element&, const Element&) = default;
};

struct FiltrationStep {
  Element removed;
  double score = 0.0;
  Graph graph;  // state after the removal
};

/// Shrinking subcomplex ladder S^0 >= S^1 >= ... >= S^T where every step
/// deletes exactly one element (so edit_distance(S^i, S^0) == i).
struct Filtration {
  Graph base;                      // S^0
  std::vector<double> thresholds;  // alpha_0 (>= every score) .. alpha_T
  std::vector<FiltrationStep> steps;

  int size() const { return static_cast<int>(steps.size()); }
  const Graph& subcomplex(int i) const { return i == 0 ? base : steps.at(i - 1).graph; }
};

struct PersistencePair {
  int dim = 0;  // 0 = component, 1 = cycle
  double birth = 0.0;
  double death = 0.0;  // +inf for essential classes
  friend bool operator==(const PersistencePair&, const PersistencePair&) = default;
};

struct PersistenceDiagram {
  std::vector<PersistencePair> pairs;
  double score_max = 0.0;  // cap used when summarizing infinite lifetimes

  /// death - birth, with infinite deaths capped at score_max.
  double lifetime(int i) const;
};

/// Midpoints between consecutive entries of a descending-sorted score list:
/// alpha_i = (g_i + g_{i+1}) / 2 for i = 1..t_homo, so that with distinct
/// scores exactly the top-i elements lie above alpha_i.
/// Throws std::invalid_argument if the list is not descending, ScheduleError
/// if fewer than t_homo + 1 scores are given or t_homo < 1.
std::vector<double> select_thresholds(const std::vector<double>& scores_desc, int t_homo);

/// Greedy one-element-per-step removal ladder of length t_homo. At each step
/// the highest-scored *removable* element goes: any present edge, or any
/// active node with no present incident edge (so each step changes exactly
/// one label and every state stays a graph). Ties break nodes-before-edges,
/// then ascending index. Throws ScheduleError when the removable pool runs
/// dry before t_homo steps.
Filtration build_filtration(const ScoredGraph& sg, int t_homo);

/// Union-find persistence of the score filtration, edges processed in
/// ascending entry order. An edge enters once both endpoints have entered
/// (entry value = max of its own and its endpoints' scores). A merge kills
/// the younger component at the edge's entry value; an edge inside one
/// component births a 1-dim class with death +inf. Every active node yields
/// one 0-dim pair; #1-dim pairs equals the circuit rank.
PersistenceDiagram persistence_diagram(const ScoredGraph& sg);

/// CSV dump (header "dimension,birth,death"; "inf" for infinite deaths).
std::string diagram_csv(const PersistenceDiagram& d);

}  // namespace copho
