#pragma once

#include <cstdint>
#include <iosfwd>
#include <string>
#include <utility>
#include <vector>

#include "copho/graph.hpp"
#include "copho/rng.hpp"

namespace copho {

enum class DatasetKind { CommunitySmall, Planar, File };

std::string dataset_kind_name(DatasetKind kind);
DatasetKind dataset_kind_from_name(const std::string& name);

/// Recipe for a graph corpus: either a seeded generator or a file to ingest.
struct DatasetSpec {
  DatasetKind kind = DatasetKind::CommunitySmall;
  int count = 200;
  int n_min = 12;
  int n_max = 20;
  double p_in = 0.7;   // community-small: intra-community edge probability
  double p_out = 0.05; // community-small: inter-community edge probability
  std::uint64_t seed = 0;
  std::string path;  // File kind: .graphml/.xml or edge-list text

  void validate() const;
};

/// Two equal planted communities with dense intra / sparse inter edges;
/// every sample is regenerated until connected (bounded retries, then
/// GenerationError). Per-graph streams derive from rng's seed, so a dataset
/// is a pure function of the descriptor fields and seed. `regenerations` (optional)
/// receives the number of discarded disconnected draws.
std::vector<Graph> gen_community_small(const DatasetSpec& spec, Rng& rng,
                                       int* regenerations = nullptr);

/// Delaunay triangulations of uniform random points in the unit square:
/// connected, planar by construction, and checked (no crossing edges, Euler
/// bound) before a sample is accepted; degenerate point sets are re-drawn.
std::vector<Graph> gen_planar(const DatasetSpec& spec, Rng& rng,
                              int* regenerations = nullptr);

/// Dispatch on spec.kind; File loads every graph in the file (.graphml/.xml
/// via the GraphML reader, anything else as edge-list text).
std::vector<Graph> generate_dataset(const DatasetSpec& spec, int* regenerations = nullptr);

struct Point {
  double x = 0.0;
  double y = 0.0;
};

/// Edges of the Delaunay triangulation (incremental Bowyer-Watson). Two
/// points give the single edge, fewer give none; exact degeneracies may
/// yield a partial triangulation, which gen_planar screens out.
std::vector<std::pair<int, int>> delaunay_edges(const std::vector<Point>& pts);

/// GraphML ingestion result: simple undirected graphs (multi-edges collapsed,
/// self-loops dropped with a warning), original node ids kept per graph in
/// document order.
struct GraphmlFile {
  std::vector<Graph> graphs;
  std::vector<std::vector<std::string>> node_ids;
  std::vector<std::string> warnings;
};

/// Parses the structural GraphML subset: graphml/graph/node/edge elements,
/// everything else (keys, data) ignored. Attribute values decode the five
/// predefined XML entities. Malformed input throws ParseError with the
/// offending line.
GraphmlFile parse_graphml(std::istream& is);
GraphmlFile load_graphml(const std::string& path);

/// Minimal structural GraphML for a graph (edge presence only). Node ids
/// default to n0..n{n-1} when none are given.
std::string to_graphml(const Graph& g, const std::vector<std::string>& node_ids = {});
void save_graphml(const std::string& path, const Graph& g,
                  const std::vector<std::string>& node_ids = {});

}  // namespace copho
