#include "copho/graph.hpp"

#include <fstream>
#include <sstream>

namespace copho {

Graph::Graph(int n, int node_classes, int edge_classes)
    : n_(n), a_(node_classes), b_(edge_classes) {
  if (n < 0 || a_ < 1 || b_ < 1) throw std::invalid_argument("Graph: bad dimensions");
  node_class_ = IntVector::Zero(n_);
  edge_class_ = IntVector::Zero(pair_count(n_));
}

Graph::Graph(IntVector node_class, IntVector edge_class_pairs, int node_classes, int edge_classes)
    : n_(static_cast<int>(node_class.size())),
      a_(node_classes),
      b_(edge_classes),
      node_class_(std::move(node_class)),
      edge_class_(std::move(edge_class_pairs)) {
  validate();
}

void Graph::validate() const {
  if (a_ < 1 || b_ < 1) throw std::invalid_argument("Graph: class counts must be positive");
  if (edge_class_.size() != pair_count(n_))
    throw std::invalid_argument("Graph: edge array size mismatch");
  for (int v = 0; v < n_; ++v)
    if (node_class_[v] < 0 || node_class_[v] >= a_)
      throw std::invalid_argument("Graph: node class out of range");
  for (int p = 0; p < edge_class_.size(); ++p)
    if (edge_class_[p] < 0 || edge_class_[p] >= b_)
      throw std::invalid_argument("Graph: edge class out of range");
}

void Graph::set_node_class(int v, int c) {
  if (c < 0 || c >= a_) throw std::invalid_argument("set_node_class: class out of range");
  node_class_[check_node(v)] = c;
}

void Graph::set_edge_class(int u, int v, int c) {
  if (u == v) throw std::invalid_argument("set_edge_class: self-loops not representable");
  if (c < 0 || c >= b_) throw std::invalid_argument("set_edge_class: class out of range");
  edge_class_[pair_index(n_, check_node(u), check_node(v))] = c;
}

int Graph::active_count() const {
  int k = 0;
  for (int v = 0; v < n_; ++v) k += active(v);
  return k;
}

std::vector<int> Graph::active_nodes() const {
  std::vector<int> out;
  out.reserve(n_);
  for (int v = 0; v < n_; ++v)
    if (active(v)) out.push_back(v);
  return out;
}

std::vector<std::pair<int, int>> Graph::edges() const {
  std::vector<std::pair<int, int>> out;
  for (int p = 0; p < edge_class_.size(); ++p)
    if (edge_class_[p] != 0) out.push_back(pair_nodes(n_, p));
  return out;
}

int Graph::edge_count() const {
  int k = 0;
  for (int p = 0; p < edge_class_.size(); ++p) k += edge_class_[p] != 0;
  return k;
}

int Graph::degree(int v) const {
  check_node(v);
  if (!active(v)) return 0;
  int d = 0;
  for (int u = 0; u < n_; ++u)
    if (u != v && active(u) && present(u, v)) ++d;
  return d;
}

std::vector<int> Graph::neighbors(int v) const {
  check_node(v);
  std::vector<int> out;
  if (!active(v)) return out;
  for (int u = 0; u < n_; ++u)
    if (u != v && active(u) && present(u, v)) out.push_back(u);
  return out;
}

bool Graph::operator==(const Graph& o) const {
  return n_ == o.n_ && a_ == o.a_ && b_ == o.b_ && node_class_ == o.node_class_ &&
         edge_class_ == o.edge_class_;
}

int edit_distance(const Graph& g1, const Graph& g2) {
  if (g1.n() != g2.n() || g1.node_classes() != g2.node_classes() ||
      g1.edge_classes() != g2.edge_classes())
    throw std::invalid_argument("edit_distance: size or class-space mismatch");
  int d = 0;
  for (int v = 0; v < g1.n(); ++v) d += g1.node_class(v) != g2.node_class(v);
  for (int p = 0; p < pair_count(g1.n()); ++p)
    d += g1.edge_class_at(p) != g2.edge_class_at(p);
  return d;
}

Graph apply_removals(const Graph& g, const std::vector<int>& nodes,
                     const std::vector<std::pair<int, int>>& edges) {
  Graph out = g;
  if (!nodes.empty() && g.node_classes() < 2)
    throw std::invalid_argument("apply_removals: no inactive class with a == 1");
  for (auto [u, v] : edges) {
    if (u == v) throw std::out_of_range("apply_removals: self-loop edge");
    out.set_edge_class(u, v, 0);
  }
  for (int v : nodes) {
    out.set_node_class(v, g.node_classes() - 1);
    for (int u = 0; u < g.n(); ++u)
      if (u != v) out.set_edge_class(u, v, 0);
  }
  return out;
}

// --- GraphDistribution -------------------------------------------------------

GraphDistribution::GraphDistribution(Matrix node_probs, Matrix edge_probs, int n)
    : n_(n), node_probs_(std::move(node_probs)), edge_probs_(std::move(edge_probs)) {
  validate();
}

void GraphDistribution::validate() const {
  if (node_probs_.rows() != n_ || edge_probs_.rows() != pair_count(n_))
    throw std::invalid_argument("GraphDistribution: row count mismatch");
  auto check_rows = [](const Matrix& m, const char* what) {
    for (int r = 0; r < m.rows(); ++r) {
      double s = m.row(r).sum();
      if (std::abs(s - 1.0) > 1e-9)
        throw std::invalid_argument(std::string("GraphDistribution: ") + what +
                                    " row does not sum to 1");
      if ((m.row(r).array() < -1e-15).any() || (m.row(r).array() > 1.0 + 1e-12).any())
        throw std::invalid_argument(std::string("GraphDistribution: ") + what +
                                    " entry outside [0,1]");
    }
  };
  check_rows(node_probs_, "node");
  check_rows(edge_probs_, "edge");
}

GraphDistribution GraphDistribution::one_hot(const Graph& g) {
  Matrix np = Matrix::Zero(g.n(), g.node_classes());
  for (int v = 0; v < g.n(); ++v) np(v, g.node_class(v)) = 1.0;
  Matrix ep = Matrix::Zero(pair_count(g.n()), g.edge_classes());
  for (int p = 0; p < ep.rows(); ++p) ep(p, g.edge_class_at(p)) = 1.0;
  return GraphDistribution(std::move(np), std::move(ep), g.n());
}

Graph GraphDistribution::sample(Rng& rng) const {
  Graph g(n_, node_classes(), edge_classes());
  for (int v = 0; v < n_; ++v) g.set_node_class(v, rng.categorical(node_probs_.row(v)));
  for (int p = 0; p < edge_probs_.rows(); ++p) {
    auto [u, v] = pair_nodes(n_, p);
    g.set_edge_class(u, v, rng.categorical(edge_probs_.row(p)));
  }
  return g;
}

Graph GraphDistribution::argmax() const {
  Graph g(n_, node_classes(), edge_classes());
  for (int v = 0; v < n_; ++v) {
    int c;
    node_probs_.row(v).maxCoeff(&c);
    g.set_node_class(v, c);
  }
  for (int p = 0; p < edge_probs_.rows(); ++p) {
    int c;
    edge_probs_.row(p).maxCoeff(&c);
    auto [u, v] = pair_nodes(n_, p);
    g.set_edge_class(u, v, c);
  }
  return g;
}

// --- edge-list text format ---------------------------------------------------

void write_edge_list(std::ostream& os, const Graph& g) {
  os << g.n() << ' ' << g.node_classes() << ' ' << g.edge_classes() << '\n';
  for (int v = 0; v < g.n(); ++v) os << v << ' ' << g.node_class(v) << '\n';
  for (int p = 0; p < pair_count(g.n()); ++p) {
    if (g.edge_class_at(p) == 0) continue;
    auto [u, v] = pair_nodes(g.n(), p);
    os << u << ' ' << v << ' ' << g.edge_class_at(p) << '\n';
  }
}

std::string to_edge_list(const Graph& g) {
  std::ostringstream os;
  write_edge_list(os, g);
  return os.str();
}

void save_edge_list(const std::string& path, const std::vector<Graph>& graphs) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw FormatError("save_edge_list: cannot open " + path);
  for (std::size_t i = 0; i < graphs.size(); ++i) {
    if (i) os << '\n';
    write_edge_list(os, graphs[i]);
  }
}

std::vector<Graph> parse_edge_list(std::istream& is) {
  std::vector<Graph> out;
  std::string line;
  int line_no = 0;
  auto next_line = [&](std::string& dst) -> bool {
    if (!std::getline(is, dst)) return false;
    ++line_no;
    return true;
  };
  while (true) {
    // skip blank separators
    bool have = false;
    while (next_line(line)) {
      if (!line.empty()) {
        have = true;
        break;
      }
    }
    if (!have) break;
    std::istringstream hdr(line);
    int n, a, b;
    if (!(hdr >> n >> a >> b) || n < 0 || a < 1 || b < 1)
      throw ParseError("edge list: bad header", line_no);
    Graph g(n, a, b);
    for (int i = 0; i < n; ++i) {
      if (!next_line(line)) throw ParseError("edge list: truncated node section", line_no);
      std::istringstream ls(line);
      int v, c;
      if (!(ls >> v >> c)) throw ParseError("edge list: bad node line", line_no);
      if (v != i) throw ParseError("edge list: nodes must appear in order", line_no);
      if (c < 0 || c >= a) throw ParseError("edge list: node class out of range", line_no);
      g.set_node_class(v, c);
    }
    while (next_line(line)) {
      if (line.empty()) break;  // record separator
      std::istringstream ls(line);
      int u, v, c;
      if (!(ls >> u >> v >> c)) throw ParseError("edge list: bad edge line", line_no);
      if (c == 0) throw ParseError("edge list: explicit class-0 edge", line_no);
      if (u < 0 || v < 0 || u >= n || v >= n || u == v || c < 0 || c >= b)
        throw ParseError("edge list: bad edge endpoints or class", line_no);
      g.set_edge_class(u, v, c);
    }
    out.push_back(std::move(g));
  }
  return out;
}

std::vector<Graph> load_edge_list(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw FormatError("load_edge_list: cannot open " + path);
  return parse_edge_list(is);
}

}  // namespace copho
