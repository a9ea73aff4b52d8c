#include "copho/datasets.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <set>
#include <sstream>
#include <stdexcept>

#include "copho/errors.hpp"
#include "copho/properties.hpp"

namespace copho {

namespace {

constexpr int kCommunityRetries = 500;
constexpr int kPlanarRetries = 100;

bool connected(const Graph& g) {
  const std::vector<int> actives = g.active_nodes();
  if (actives.empty()) return false;
  const std::vector<int> d = bfs_distances(g, actives.front());
  for (int v : actives) {
    if (d[v] == kUnreachable) return false;
  }
  return true;
}

double orient(const Point& a, const Point& b, const Point& c) {
  return (b.x - a.x) * (c.y - a.y) - (b.y - a.y) * (c.x - a.x);
}

/// Strictly inside the circumcircle of the (counterclockwise) triangle abc.
bool in_circumcircle(const Point& a, const Point& b, const Point& c, const Point& d) {
  const double ax = a.x - d.x, ay = a.y - d.y;
  const double bx = b.x - d.x, by = b.y - d.y;
  const double cx = c.x - d.x, cy = c.y - d.y;
  const double det = (ax * ax + ay * ay) * (bx * cy - cx * by) -
                     (bx * bx + by * by) * (ax * cy - cx * ay) +
                     (cx * cx + cy * cy) * (ax * by - bx * ay);
  return det > 0.0;
}

bool segments_cross(const Point& p1, const Point& p2, const Point& p3, const Point& p4) {
  const double d1 = orient(p3, p4, p1);
  const double d2 = orient(p3, p4, p2);
  const double d3 = orient(p1, p2, p3);
  const double d4 = orient(p1, p2, p4);
  return ((d1 > 0.0) != (d2 > 0.0)) && ((d3 > 0.0) != (d4 > 0.0));
}

bool planar_layout_ok(const std::vector<Point>& pts, const std::vector<std::pair<int, int>>& edges) {
  for (std::size_t i = 0; i < edges.size(); ++i) {
    for (std::size_t j = i + 1; j < edges.size(); ++j) {
      const auto [a, b] = edges[i];
      const auto [c, d] = edges[j];
      if (a == c || a == d || b == c || b == d) continue;
      if (segments_cross(pts[a], pts[b], pts[c], pts[d])) return false;
    }
  }
  return true;
}

int draw_n(const DatasetSpec& spec, Rng& rng) {
  return spec.n_min + rng.uniform_int(spec.n_max - spec.n_min + 1);
}

}  // namespace

std::string dataset_kind_name(DatasetKind kind) {
  switch (kind) {
    case DatasetKind::CommunitySmall: return "community-small";
    case DatasetKind::Planar: return "planar";
    case DatasetKind::File: return "file";
  }
  throw std::invalid_argument("dataset_kind_name: unknown kind");
}

DatasetKind dataset_kind_from_name(const std::string& name) {
  if (name == "community-small") return DatasetKind::CommunitySmall;
  if (name == "planar") return DatasetKind::Planar;
  if (name == "file") return DatasetKind::File;
  throw std::invalid_argument("dataset_kind_from_name: unknown kind '" + name + "'");
}

void DatasetSpec::validate() const {
  if (kind == DatasetKind::File) {
    if (path.empty()) throw std::invalid_argument("DatasetSpec: file kind needs a path");
    return;
  }
  if (count <= 0) throw std::invalid_argument("DatasetSpec: count must be positive");
  if (n_min > n_max) throw std::invalid_argument("DatasetSpec: n_min must not exceed n_max");
  if (kind == DatasetKind::CommunitySmall) {
    if (n_min < 2) throw std::invalid_argument("DatasetSpec: community graphs need n >= 2");
    if (!(p_in > p_out)) throw std::invalid_argument("DatasetSpec: p_in must exceed p_out");
    if (p_in < 0.0 || p_in > 1.0 || p_out < 0.0 || p_out > 1.0) {
      throw std::invalid_argument("DatasetSpec: edge probabilities must lie in [0, 1]");
    }
  }
  if (kind == DatasetKind::Planar && n_min < 4) {
    throw std::invalid_argument("DatasetSpec: planar graphs need n >= 4");
  }
}

std::vector<Graph> gen_community_small(const DatasetSpec& spec, Rng& rng, int* regenerations) {
  spec.validate();
  if (spec.kind != DatasetKind::CommunitySmall) {
    throw std::invalid_argument("gen_community_small: spec kind mismatch");
  }
  if (regenerations) *regenerations = 0;
  std::vector<Graph> out;
  out.reserve(spec.count);
  for (int i = 0; i < spec.count; ++i) {
    Rng gr = rng.split(static_cast<std::uint64_t>(i));
    bool done = false;
    for (int attempt = 0; attempt < kCommunityRetries && !done; ++attempt) {
      const int n = draw_n(spec, gr);
      const int half = n / 2;
      Graph g(n, 1, 2);
      for (int u = 0; u < n; ++u) {
        for (int v = u + 1; v < n; ++v) {
          const bool same = (u < half) == (v < half);
          if (gr.uniform() < (same ? spec.p_in : spec.p_out)) g.set_edge_class(u, v, 1);
        }
      }
      if (connected(g)) {
        out.push_back(std::move(g));
        done = true;
      } else if (regenerations) {
        ++*regenerations;
      }
    }
    if (!done) {
      throw GenerationError("gen_community_small: no connected sample within retry budget");
    }
  }
  return out;
}

std::vector<std::pair<int, int>> delaunay_edges(const std::vector<Point>& pts) {
  const int n = static_cast<int>(pts.size());
  if (n < 2) return {};
  if (n == 2) return {{0, 1}};

  // Enclosing super-triangle, far outside the input's bounding box.
  double lox = pts[0].x, hix = pts[0].x, loy = pts[0].y, hiy = pts[0].y;
  for (const Point& p : pts) {
    lox = std::min(lox, p.x);
    hix = std::max(hix, p.x);
    loy = std::min(loy, p.y);
    hiy = std::max(hiy, p.y);
  }
  const double cx = (lox + hix) / 2.0, cy = (loy + hiy) / 2.0;
  const double d = std::max({hix - lox, hiy - loy, 1.0});
  std::vector<Point> P(pts);
  P.push_back({cx - 40.0 * d, cy - 20.0 * d});
  P.push_back({cx + 40.0 * d, cy - 20.0 * d});
  P.push_back({cx, cy + 40.0 * d});

  struct Tri {
    int a, b, c;
  };
  auto ccw = [&](Tri t) {
    if (orient(P[t.a], P[t.b], P[t.c]) < 0.0) std::swap(t.b, t.c);
    return t;
  };
  std::vector<Tri> tris{ccw({n, n + 1, n + 2})};

  for (int i = 0; i < n; ++i) {
    std::vector<Tri> keep;
    std::map<std::pair<int, int>, int> boundary;  // polygon edge -> multiplicity
    for (const Tri& t : tris) {
      if (in_circumcircle(P[t.a], P[t.b], P[t.c], P[i])) {
        const std::pair<int, int> es[3] = {{std::min(t.a, t.b), std::max(t.a, t.b)},
                                           {std::min(t.b, t.c), std::max(t.b, t.c)},
                                           {std::min(t.a, t.c), std::max(t.a, t.c)}};
        for (const auto& e : es) ++boundary[e];
      } else {
        keep.push_back(t);
      }
    }
    tris = std::move(keep);
    for (const auto& [e, mult] : boundary) {
      if (mult == 1) tris.push_back(ccw({e.first, e.second, i}));
    }
  }

  std::set<std::pair<int, int>> edges;
  for (const Tri& t : tris) {
    if (t.a >= n || t.b >= n || t.c >= n) continue;  // touches the super-triangle
    edges.insert({std::min(t.a, t.b), std::max(t.a, t.b)});
    edges.insert({std::min(t.b, t.c), std::max(t.b, t.c)});
    edges.insert({std::min(t.a, t.c), std::max(t.a, t.c)});
  }
  return {edges.begin(), edges.end()};
}

std::vector<Graph> gen_planar(const DatasetSpec& spec, Rng& rng, int* regenerations) {
  spec.validate();
  if (spec.kind != DatasetKind::Planar) {
    throw std::invalid_argument("gen_planar: spec kind mismatch");
  }
  if (regenerations) *regenerations = 0;
  std::vector<Graph> out;
  out.reserve(spec.count);
  for (int i = 0; i < spec.count; ++i) {
    Rng gr = rng.split(static_cast<std::uint64_t>(i));
    bool done = false;
    for (int attempt = 0; attempt < kPlanarRetries && !done; ++attempt) {
      const int n = draw_n(spec, gr);
      std::vector<Point> pts(n);
      for (Point& p : pts) {
        p.x = gr.uniform();
        p.y = gr.uniform();
      }
      const auto edges = delaunay_edges(pts);
      Graph g(n, 1, 2);
      for (auto [u, v] : edges) g.set_edge_class(u, v, 1);
      const bool euler_ok = g.edge_count() <= 3 * n - 6;
      if (euler_ok && connected(g) && planar_layout_ok(pts, edges)) {
        out.push_back(std::move(g));
        done = true;
      } else if (regenerations) {
        ++*regenerations;  // degenerate point set; draw a fresh one
      }
    }
    if (!done) throw GenerationError("gen_planar: no valid triangulation within retry budget");
  }
  return out;
}

namespace {

bool has_suffix(const std::string& s, const std::string& suffix) {
  return s.size() >= suffix.size() && s.compare(s.size() - suffix.size(), suffix.size(), suffix) == 0;
}

}  // namespace

std::vector<Graph> generate_dataset(const DatasetSpec& spec, int* regenerations) {
  spec.validate();
  if (regenerations) *regenerations = 0;
  Rng rng(spec.seed);
  switch (spec.kind) {
    case DatasetKind::CommunitySmall:
      return gen_community_small(spec, rng, regenerations);
    case DatasetKind::Planar:
      return gen_planar(spec, rng, regenerations);
    case DatasetKind::File:
      if (has_suffix(spec.path, ".graphml") || has_suffix(spec.path, ".xml")) {
        return load_graphml(spec.path).graphs;
      }
      return load_edge_list(spec.path);
  }
  throw std::invalid_argument("generate_dataset: unknown kind");
}

// ---------------------------------------------------------------------------
// GraphML (structural subset)
// ---------------------------------------------------------------------------

namespace {

struct XmlTag {
  std::string name;
  std::map<std::string, std::string> attrs;
  bool closing = false;
  bool self_closing = false;
  int line = 1;
};

/// Hand-rolled scanner for the tag stream; text content is skipped.
class XmlScanner {
 public:
  explicit XmlScanner(const std::string& text) : s_(text) {}

  /// Next element tag, or false at end of input.
  bool next(XmlTag& tag) {
    while (pos_ < s_.size()) {
      if (s_[pos_] != '<') {
        bump();
        continue;
      }
      if (match("<?")) {
        skip_until("?>");
        continue;
      }
      if (match("<!--")) {
        skip_until("-->");
        continue;
      }
      if (match("<!")) {
        skip_until(">");
        continue;
      }
      parse_tag(tag);
      return true;
    }
    return false;
  }

 private:
  void bump() {
    if (s_[pos_] == '\n') ++line_;
    ++pos_;
  }

  bool match(const std::string& lit) {
    if (s_.compare(pos_, lit.size(), lit) != 0) return false;
    for (std::size_t i = 0; i < lit.size(); ++i) bump();
    return true;
  }

  void skip_until(const std::string& lit) {
    const int start = line_;
    while (pos_ < s_.size()) {
      if (s_.compare(pos_, lit.size(), lit) == 0) {
        for (std::size_t i = 0; i < lit.size(); ++i) bump();
        return;
      }
      bump();
    }
    throw ParseError("graphml: unterminated markup", start);
  }

  void skip_ws() {
    while (pos_ < s_.size() && std::isspace(static_cast<unsigned char>(s_[pos_]))) bump();
  }

  /// Decodes the five predefined references; the escaper is its inverse.
  char read_entity() {
    static const std::pair<const char*, char> table[] = {
        {"&amp;", '&'}, {"&lt;", '<'}, {"&gt;", '>'}, {"&quot;", '"'}, {"&apos;", '\''}};
    for (const auto& [name, ch] : table) {
      if (s_.compare(pos_, std::string::traits_type::length(name), name) == 0) {
        for (std::size_t i = 0; i < std::string::traits_type::length(name); ++i) bump();
        return ch;
      }
    }
    throw ParseError("graphml: unknown entity reference", line_);
  }

  static bool name_char(char c) {
    return !std::isspace(static_cast<unsigned char>(c)) && c != '>' && c != '/' && c != '=' &&
           c != '<';
  }

  void parse_tag(XmlTag& tag) {
    tag = XmlTag{};
    tag.line = line_;
    bump();  // '<'
    if (pos_ < s_.size() && s_[pos_] == '/') {
      tag.closing = true;
      bump();
    }
    while (pos_ < s_.size() && name_char(s_[pos_])) {
      tag.name += s_[pos_];
      bump();
    }
    if (tag.name.empty()) throw ParseError("graphml: empty tag name", tag.line);
    while (true) {
      skip_ws();
      if (pos_ >= s_.size()) throw ParseError("graphml: unterminated tag", tag.line);
      if (s_[pos_] == '>') {
        bump();
        return;
      }
      if (s_[pos_] == '/') {
        bump();
        skip_ws();
        if (pos_ >= s_.size() || s_[pos_] != '>') {
          throw ParseError("graphml: malformed self-closing tag", tag.line);
        }
        bump();
        tag.self_closing = true;
        return;
      }
      // attribute
      std::string key;
      while (pos_ < s_.size() && name_char(s_[pos_])) {
        key += s_[pos_];
        bump();
      }
      if (key.empty()) throw ParseError("graphml: malformed attribute", line_);
      skip_ws();
      if (pos_ >= s_.size() || s_[pos_] != '=') {
        throw ParseError("graphml: attribute without value", line_);
      }
      bump();
      skip_ws();
      if (pos_ >= s_.size() || (s_[pos_] != '"' && s_[pos_] != '\'')) {
        throw ParseError("graphml: attribute value must be quoted", line_);
      }
      const char quote = s_[pos_];
      bump();
      std::string value;
      const int vline = line_;
      while (pos_ < s_.size() && s_[pos_] != quote) {
        if (s_[pos_] == '&') {
          value += read_entity();
        } else {
          value += s_[pos_];
          bump();
        }
      }
      if (pos_ >= s_.size()) throw ParseError("graphml: unterminated attribute value", vline);
      bump();
      tag.attrs[key] = value;
    }
  }

  const std::string& s_;
  std::size_t pos_ = 0;
  int line_ = 1;
};

std::string require_attr(const XmlTag& tag, const std::string& key) {
  const auto it = tag.attrs.find(key);
  if (it == tag.attrs.end()) {
    throw ParseError("graphml: <" + tag.name + "> missing '" + key + "' attribute", tag.line);
  }
  return it->second;
}

std::string xml_escape(const std::string& s) {
  std::string out;
  for (char c : s) {
    switch (c) {
      case '&': out += "&amp;"; break;
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      case '"': out += "&quot;"; break;
      case '\'': out += "&apos;"; break;
      default: out += c;
    }
  }
  return out;
}

}  // namespace

GraphmlFile parse_graphml(std::istream& is) {
  std::ostringstream buf;
  buf << is.rdbuf();
  const std::string text = buf.str();

  GraphmlFile out;
  XmlScanner scanner(text);
  XmlTag tag;

  bool saw_root = false, in_root = false, in_graph = false;
  std::map<std::string, int> ids;
  std::vector<std::string> id_list;
  std::set<std::pair<int, int>> edge_set;
  int depth_skip = 0;  // nesting inside ignored elements

  auto finish_graph = [&](int line) {
    (void)line;
    Graph g(static_cast<int>(id_list.size()), 1, 2);
    for (const auto& [u, v] : edge_set) g.set_edge_class(u, v, 1);
    out.graphs.push_back(std::move(g));
    out.node_ids.push_back(id_list);
    ids.clear();
    id_list.clear();
    edge_set.clear();
  };

  while (scanner.next(tag)) {
    if (tag.name == "graphml") {
      if (tag.closing) {
        if (!in_root) throw ParseError("graphml: stray </graphml>", tag.line);
        in_root = false;
      } else {
        if (saw_root) throw ParseError("graphml: multiple <graphml> roots", tag.line);
        saw_root = true;
        in_root = !tag.self_closing;
      }
      continue;
    }
    if (!saw_root) throw ParseError("graphml: expected <graphml> root element", tag.line);
    if (!in_root) throw ParseError("graphml: content after </graphml>", tag.line);

    if (tag.name == "graph") {
      if (tag.closing) {
        if (!in_graph) throw ParseError("graphml: stray </graph>", tag.line);
        in_graph = false;
        finish_graph(tag.line);
      } else {
        if (in_graph) throw ParseError("graphml: nested <graph> elements", tag.line);
        in_graph = true;
        if (tag.self_closing) {
          in_graph = false;
          finish_graph(tag.line);
        }
      }
      continue;
    }
    if (tag.name == "node" && !tag.closing && depth_skip == 0) {
      if (!in_graph) throw ParseError("graphml: <node> outside <graph>", tag.line);
      const std::string id = require_attr(tag, "id");
      if (ids.count(id)) throw ParseError("graphml: duplicate node id '" + id + "'", tag.line);
      ids[id] = static_cast<int>(id_list.size());
      id_list.push_back(id);
      continue;
    }
    if (tag.name == "edge" && !tag.closing && depth_skip == 0) {
      if (!in_graph) throw ParseError("graphml: <edge> outside <graph>", tag.line);
      const std::string src = require_attr(tag, "source");
      const std::string dst = require_attr(tag, "target");
      const auto si = ids.find(src), di = ids.find(dst);
      if (si == ids.end() || di == ids.end()) {
        throw ParseError("graphml: edge references undeclared node", tag.line);
      }
      if (si->second == di->second) {
        out.warnings.push_back("dropped self-loop at node '" + src + "' (line " +
                               std::to_string(tag.line) + ")");
        continue;
      }
      const auto e = std::minmax(si->second, di->second);
      if (!edge_set.insert({e.first, e.second}).second) {
        out.warnings.push_back("collapsed duplicate edge '" + src + "'-'" + dst + "' (line " +
                               std::to_string(tag.line) + ")");
      }
      continue;
    }
    // anything else (keys, data, defaults): ignored, but keep nesting balanced
    if (!tag.closing && !tag.self_closing) ++depth_skip;
    if (tag.closing && depth_skip > 0) --depth_skip;
  }
  if (in_graph) throw ParseError("graphml: unterminated <graph> element", 0);
  if (in_root) throw ParseError("graphml: unterminated <graphml> element", 0);
  if (!saw_root) throw ParseError("graphml: no <graphml> root element found", 0);
  return out;
}

GraphmlFile load_graphml(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw FormatError("load_graphml: cannot open '" + path + "'");
  return parse_graphml(in);
}

std::string to_graphml(const Graph& g, const std::vector<std::string>& node_ids) {
  if (!node_ids.empty() && static_cast<int>(node_ids.size()) != g.n()) {
    throw std::invalid_argument("to_graphml: id list size does not match the graph");
  }
  auto id_of = [&](int v) {
    return node_ids.empty() ? "n" + std::to_string(v) : xml_escape(node_ids[v]);
  };
  std::ostringstream os;
  os << "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n";
  os << "<graphml>\n  <graph edgedefault=\"undirected\">\n";
  for (int v = 0; v < g.n(); ++v) os << "    <node id=\"" << id_of(v) << "\"/>\n";
  for (auto [u, v] : g.edges()) {
    os << "    <edge source=\"" << id_of(u) << "\" target=\"" << id_of(v) << "\"/>\n";
  }
  os << "  </graph>\n</graphml>\n";
  return os.str();
}

void save_graphml(const std::string& path, const Graph& g,
                  const std::vector<std::string>& node_ids) {
  std::ofstream outf(path);
  if (!outf) throw FormatError("save_graphml: cannot open '" + path + "' for writing");
  outf << to_graphml(g, node_ids);
  if (!outf) throw FormatError("save_graphml: write failed for '" + path + "'");
}

}  // namespace copho
