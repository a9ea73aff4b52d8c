#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <sstream>

#include "copho/graph.hpp"

using namespace copho;

namespace {

Graph make_graph(int n, const std::vector<std::pair<int, int>>& edges, int a = 2, int b = 2) {
  Graph g(n, a, b);
  for (auto [u, v] : edges) g.set_edge_class(u, v, 1);
  return g;
}

}  // namespace

TEST_CASE("pair indexing round-trips") {
  for (int n = 2; n <= 12; ++n) {
    int idx = 0;
    for (int u = 0; u < n; ++u)
      for (int v = u + 1; v < n; ++v) {
        CHECK(pair_index(n, u, v) == idx);
        CHECK(pair_index(n, v, u) == idx);  // order-insensitive
        auto [a, b] = pair_nodes(n, idx);
        CHECK(a == u);
        CHECK(b == v);
        ++idx;
      }
    CHECK(idx == pair_count(n));
  }
  CHECK_THROWS_AS(pair_index(4, 2, 2), std::out_of_range);
  CHECK_THROWS_AS(pair_index(4, 0, 4), std::out_of_range);
  CHECK_THROWS_AS(pair_nodes(4, 6), std::out_of_range);
}

TEST_CASE("graph accessors and active semantics") {
  Graph g(4, 3, 2);
  CHECK(g.n() == 4);
  CHECK(g.active_count() == 4);
  g.set_edge_class(0, 1, 1);
  g.set_edge_class(2, 1, 1);
  CHECK(g.present(0, 1));
  CHECK(g.present(1, 0));
  CHECK(g.edge_class(1, 2) == 1);
  CHECK_FALSE(g.present(0, 0));
  CHECK(g.edge_count() == 2);
  CHECK(g.degree(1) == 2);
  CHECK(g.neighbors(1) == std::vector<int>{0, 2});

  g.set_node_class(0, 2);  // reserved inactive class when a=3
  CHECK_FALSE(g.active(0));
  CHECK(g.active_count() == 3);
  CHECK(g.degree(0) == 0);
  CHECK(g.degree(1) == 1);  // edge to inactive 0 no longer counts
  CHECK(g.present(0, 1));   // ...but the label itself is untouched

  CHECK_THROWS_AS(g.set_edge_class(2, 2, 1), std::invalid_argument);
  CHECK_THROWS_AS(g.set_node_class(0, 3), std::invalid_argument);
  CHECK_THROWS_AS(g.set_edge_class(0, 1, 2), std::invalid_argument);
  CHECK_THROWS_AS((void)g.node_class(7), std::out_of_range);
}

TEST_CASE("edges enumerate in pair-index order") {
  Graph g = make_graph(5, {{3, 4}, {0, 2}, {1, 2}, {0, 4}});
  std::vector<std::pair<int, int>> want{{0, 2}, {0, 4}, {1, 2}, {3, 4}};
  CHECK(g.edges() == want);
}

TEST_CASE("edit distance is a label Hamming distance") {
  Graph g = make_graph(4, {{0, 1}, {1, 2}});
  Graph h = g;
  CHECK(edit_distance(g, h) == 0);
  h.set_edge_class(0, 1, 0);
  CHECK(edit_distance(g, h) == 1);
  h.set_node_class(3, 1);
  CHECK(edit_distance(g, h) == 2);
  CHECK(edit_distance(h, g) == 2);
}

TEST_CASE("apply_removals masks nodes and zeroes incident edges") {
  Graph g = make_graph(4, {{0, 1}, {1, 2}, {2, 3}}, 3, 2);
  Graph r = apply_removals(g, {1}, {{2, 3}});
  CHECK(r.node_class(1) == 2);
  CHECK_FALSE(r.active(1));
  CHECK_FALSE(r.present(0, 1));
  CHECK_FALSE(r.present(1, 2));
  CHECK_FALSE(r.present(2, 3));
  CHECK(r.edge_count() == 0);
  // idempotent
  CHECK(apply_removals(r, {1}, {{2, 3}}) == r);
  // node masking needs a reserved class
  Graph flat(3, 1, 2);
  CHECK_THROWS_AS(apply_removals(flat, {0}, {}), std::invalid_argument);
}

TEST_CASE("distribution one_hot/sample/argmax agree on deterministic input") {
  Graph g = make_graph(4, {{0, 3}, {1, 2}}, 3, 3);
  g.set_node_class(1, 1);
  g.set_edge_class(1, 2, 2);
  GraphDistribution d = GraphDistribution::one_hot(g);
  CHECK(d.node_prob(1, 1) == 1.0);
  CHECK(d.edge_prob(1, 2, 2) == 1.0);
  CHECK(d.argmax() == g);
  Rng rng(7);
  CHECK(d.sample(rng) == g);
}

TEST_CASE("distribution validates simplex rows") {
  Matrix np = Matrix::Constant(2, 2, 0.5);
  Matrix ep = Matrix::Constant(1, 2, 0.5);
  CHECK_NOTHROW(GraphDistribution(np, ep, 2));
  Matrix bad = np;
  bad(0, 0) = 0.7;  // row sums to 1.2
  CHECK_THROWS_AS(GraphDistribution(bad, ep, 2), std::invalid_argument);
  Matrix neg = np;
  neg(0, 0) = -0.1;
  neg(0, 1) = 1.1;
  CHECK_THROWS_AS(GraphDistribution(neg, ep, 2), std::invalid_argument);
}

TEST_CASE("distribution sampling tracks probabilities") {
  Matrix np(1, 2);
  np << 0.25, 0.75;
  Matrix ep = Matrix::Zero(0, 2);
  GraphDistribution d(np, ep, 1);
  Rng rng(123);
  int ones = 0;
  const int trials = 20000;
  for (int i = 0; i < trials; ++i) ones += d.sample(rng).node_class(0) == 1;
  CHECK(std::abs(ones / double(trials) - 0.75) < 0.02);
}

TEST_CASE("edge-list round-trip is bit exact") {
  Graph g1 = make_graph(4, {{0, 1}, {1, 3}}, 3, 2);
  g1.set_node_class(2, 1);
  Graph g2 = make_graph(3, {{0, 2}}, 2, 3);
  g2.set_edge_class(0, 2, 2);

  std::ostringstream os;
  write_edge_list(os, g1);
  os << "\n";
  write_edge_list(os, g2);
  const std::string text = os.str();

  std::istringstream is(text);
  auto parsed = parse_edge_list(is);
  REQUIRE(parsed.size() == 2);
  CHECK(parsed[0] == g1);
  CHECK(parsed[1] == g2);

  std::ostringstream os2;
  write_edge_list(os2, parsed[0]);
  os2 << "\n";
  write_edge_list(os2, parsed[1]);
  CHECK(os2.str() == text);
}

TEST_CASE("edge-list parser reports line numbers") {
  std::istringstream missing_header("3 2\n0 0\n1 0\n2 0\n");
  CHECK_THROWS_AS(parse_edge_list(missing_header), ParseError);

  std::istringstream bad_node("3 2 2\n0 0\n1 5\n2 0\n");
  try {
    parse_edge_list(bad_node);
    FAIL("expected ParseError");
  } catch (const ParseError& e) {
    CHECK(e.line == 3);
  }

  std::istringstream zero_edge("2 2 2\n0 0\n1 0\n0 1 0\n");
  CHECK_THROWS_AS(parse_edge_list(zero_edge), ParseError);
}

TEST_CASE("rng split streams are stable and distinct") {
  Rng root(42);
  Rng a = root.split("nodes");
  Rng b = root.split("edges");
  Rng a2 = Rng(42).split("nodes");
  CHECK(a.seed() == a2.seed());
  CHECK(a.seed() != b.seed());
  CHECK(root.split(std::uint64_t{1}).seed() != root.split(std::uint64_t{2}).seed());
}

TEST_CASE("rng categorical follows weights") {
  Rng rng(9);
  Vector w(3);
  w << 1.0, 0.0, 3.0;
  int counts[3] = {0, 0, 0};
  for (int i = 0; i < 40000; ++i) counts[rng.categorical(w)] += 1;
  CHECK(counts[1] == 0);
  CHECK(std::abs(counts[0] / 40000.0 - 0.25) < 0.02);
  Vector bad = Vector::Zero(2);
  CHECK_THROWS_AS(rng.categorical(bad), std::invalid_argument);
}
