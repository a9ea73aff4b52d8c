#include "copho/guidance.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <stdexcept>
#include <utility>

namespace copho {

namespace {

constexpr double kNan = std::numeric_limits<double>::quiet_NaN();

/// Per-element removal scores from one loss-gradient field: current class
/// minus the absent/inactive class, so positive means "removal lowers loss".
/// Absent edges and inactive nodes come out exactly zero.
struct ScoreField {
  Vector node;
  Vector edge;
};

ScoreField field_to_scores(const Graph& g, const GradientField& gf) {
  const int n = g.n();
  const int P = pair_count(n);
  const int a = g.node_classes();
  ScoreField out{Vector::Zero(n), Vector::Zero(P)};
  if (a >= 2) {
    for (int v = 0; v < n; ++v) {
      out.node[v] = gf.node_grad(v, g.node_class(v)) - gf.node_grad(v, a - 1);
    }
  }
  for (int p = 0; p < P; ++p) {
    out.edge[p] = gf.edge_grad(p, g.edge_class_at(p)) - gf.edge_grad(p, 0);
  }
  return out;
}

void check_condition(const ConditionModel& c, const Graph& g) {
  c.target.validate();
  const MpnnConfig& mc = c.model.config;
  if (mc.head != MpnnConfig::Head::Regression) {
    throw std::invalid_argument("gradient_scores: conditioning model must have a regression head");
  }
  if (mc.node_classes != g.node_classes() || mc.edge_classes != g.edge_classes()) {
    throw std::invalid_argument("gradient_scores: model class counts do not match the graph");
  }
  const bool is_path = c.target.kind == PropertyKind::ShortestPathSet;
  if (is_path && !mc.marker_channels) {
    throw std::invalid_argument("gradient_scores: path conditioning needs a marker-aware model");
  }
  if (!is_path && mc.marker_channels) {
    throw std::invalid_argument("gradient_scores: scalar conditioning model must not expect markers");
  }
}

double max_abs(const ScoreField& f) {
  const double nm = f.node.size() ? f.node.cwiseAbs().maxCoeff() : 0.0;
  const double em = f.edge.size() ? f.edge.cwiseAbs().maxCoeff() : 0.0;
  return std::max(nm, em);
}

}  // namespace

std::string selection_name(SelectionMode mode) {
  switch (mode) {
    case SelectionMode::ArgmaxWeight: return "argmax-weight";
    case SelectionMode::SampleProportional: return "sample-proportional";
  }
  throw std::invalid_argument("selection_name: unknown mode");
}

SelectionMode selection_from_name(const std::string& name) {
  if (name == "argmax-weight") return SelectionMode::ArgmaxWeight;
  if (name == "sample-proportional") return SelectionMode::SampleProportional;
  throw std::invalid_argument("selection_from_name: unknown mode '" + name + "'");
}

std::string proposal_name(ProposalKind kind) {
  switch (kind) {
    case ProposalKind::Gradient: return "grad";
    case ProposalKind::LoopGradient: return "loop-grad";
    case ProposalKind::EdgeBetweenness: return "ebc";
    case ProposalKind::NegEdgeBetweenness: return "neg-ebc";
    case ProposalKind::Random: return "rand";
  }
  throw std::invalid_argument("proposal_name: unknown kind");
}

ProposalKind proposal_from_name(const std::string& name) {
  if (name == "grad" || name == "gradient") return ProposalKind::Gradient;
  if (name == "loop-grad") return ProposalKind::LoopGradient;
  if (name == "ebc") return ProposalKind::EdgeBetweenness;
  if (name == "neg-ebc") return ProposalKind::NegEdgeBetweenness;
  if (name == "rand") return ProposalKind::Random;
  throw std::invalid_argument("proposal_from_name: unknown kind '" + name + "'");
}

void GuidanceConfig::validate() const {
  if (t_homo < 0) throw std::invalid_argument("GuidanceConfig: t_homo must be >= 0");
  if (!(ph_timing >= 0.0 && ph_timing < 1.0)) {
    throw std::invalid_argument("GuidanceConfig: ph_timing must lie in [0, 1)");
  }
  if (apply_every < 1) throw std::invalid_argument("GuidanceConfig: apply_every must be >= 1");
}

PropertyKind loop_gradient_source(PropertyKind kind) {
  switch (kind) {
    case PropertyKind::Clustering: return PropertyKind::Density;
    case PropertyKind::Assortativity: return PropertyKind::Clustering;
    case PropertyKind::Transitivity: return PropertyKind::Assortativity;
    case PropertyKind::Density: return PropertyKind::Transitivity;
    case PropertyKind::ShortestPathSet: break;
  }
  throw std::invalid_argument("loop_gradient_source: path sets are outside the property cycle");
}

std::vector<ConditionModel> loop_mismatched(
    const std::vector<ConditionModel>& conditions,
    const std::vector<ConditionModel>& registry) {
  std::vector<ConditionModel> out;
  out.reserve(conditions.size());
  for (const ConditionModel& c : conditions) {
    if (c.target.kind == PropertyKind::ShortestPathSet) {
      out.push_back(c);
      continue;
    }
    const PropertyKind src = loop_gradient_source(c.target.kind);
    const auto it = std::find_if(registry.begin(), registry.end(),
                                 [src](const ConditionModel& r) { return r.target.kind == src; });
    if (it == registry.end()) {
      throw std::invalid_argument("loop_mismatched: registry has no model for " + property_name(src));
    }
    out.push_back({c.target, it->model});
  }
  return out;
}

void CandidateSet::validate() const {
  if (items.empty()) throw std::invalid_argument("CandidateSet: empty");
  for (std::size_t i = 0; i < items.size(); ++i) {
    if (items[i].distance != static_cast<int>(i)) {
      throw std::invalid_argument("CandidateSet: edit distances must run 0, 1, ...");
    }
    if (weighted && !(items[i].weight >= 0.0)) {
      throw std::invalid_argument("CandidateSet: weights must be nonnegative");
    }
  }
}

ScoredGraph gradient_scores(const std::vector<ConditionModel>& conditions, const Graph& g_t) {
  if (conditions.empty()) {
    throw std::invalid_argument("gradient_scores: needs at least one conditioning target");
  }
  std::vector<ScoreField> fields;
  for (const ConditionModel& c : conditions) {
    check_condition(c, g_t);
    if (c.target.kind == PropertyKind::ShortestPathSet) {
      for (const PathTarget& pt : c.target.paths) {
        const GradientField gf = grad_wrt_graph(c.model, g_t, static_cast<double>(pt.length),
                                                {{pt.source, pt.target}});
        fields.push_back(field_to_scores(g_t, gf));
      }
    } else {
      const GradientField gf = grad_wrt_graph(c.model, g_t, c.target.value);
      fields.push_back(field_to_scores(g_t, gf));
    }
  }
  if (fields.size() == 1) {
    return ScoredGraph{g_t, std::move(fields[0].node), std::move(fields[0].edge)};
  }
  Vector node = Vector::Zero(g_t.n());
  Vector edge = Vector::Zero(pair_count(g_t.n()));
  for (const ScoreField& f : fields) {
    const double m = max_abs(f);
    if (m > 0.0) {
      node += f.node / m;
      edge += f.edge / m;
    }
  }
  return ScoredGraph{g_t, std::move(node), std::move(edge)};
}

ScoredGraph proposal_scores(ProposalKind kind, const std::vector<ConditionModel>& conditions,
                            const Graph& g_t, Rng& rng) {
  switch (kind) {
    case ProposalKind::Gradient:
    case ProposalKind::LoopGradient:
      return gradient_scores(conditions, g_t);
    case ProposalKind::EdgeBetweenness:
      return ebc_proposal(g_t, false);
    case ProposalKind::NegEdgeBetweenness:
      return ebc_proposal(g_t, true);
    case ProposalKind::Random:
      return random_proposal(g_t, rng);
  }
  throw std::invalid_argument("proposal_scores: unknown kind");
}

CandidateSet build_candidates(const ScoredGraph& scored, const GuidanceConfig& cfg) {
  cfg.validate();
  scored.validate();
  CandidateSet cs;
  cs.items.push_back({scored.base, 0, {}, 0.0});
  if (cfg.t_homo == 0) return cs;
  const Filtration f = build_filtration(scored, cfg.t_homo);
  for (int i = 1; i <= cfg.t_homo; ++i) {
    cs.items.push_back({f.subcomplex(i), i, {}, 0.0});
  }
  return cs;
}

std::vector<double> property_values(const Graph& g, const std::vector<PropertyTarget>& targets) {
  std::vector<double> phi;
  for (const PropertyTarget& t : targets) {
    if (t.kind == PropertyKind::ShortestPathSet) {
      for (const PathTarget& pt : t.paths) {
        double d = kNan;
        try {
          const int hops = shortest_path_lengths(g, {{pt.source, pt.target}}).front();
          if (hops != kUnreachable) d = static_cast<double>(hops);
        } catch (const std::invalid_argument&) {
          // endpoint deactivated by an edit: the value is undefined
        }
        phi.push_back(d);
      }
    } else {
      double v = kNan;
      try {
        v = eval_property(g, t.kind);
      } catch (const std::domain_error&) {
        // degenerate graph (no edges / constant degrees): undefined
      }
      phi.push_back(v);
    }
  }
  return phi;
}

double candidate_weight(int distance, const std::vector<double>& phi,
                        const std::vector<PropertyTarget>& targets) {
  if (distance < 0) throw std::invalid_argument("candidate_weight: negative edit distance");
  std::vector<std::pair<double, double>> factors;  // (|phi - y|, epsilon)
  std::size_t k = 0;
  for (const PropertyTarget& t : targets) {
    t.validate();
    const double eps = t.effective_epsilon();
    const std::size_t arity = t.kind == PropertyKind::ShortestPathSet ? t.paths.size() : 1;
    for (std::size_t j = 0; j < arity; ++j, ++k) {
      if (k >= phi.size()) throw std::invalid_argument("candidate_weight: phi/target arity mismatch");
      const double y = t.kind == PropertyKind::ShortestPathSet
                           ? static_cast<double>(t.paths[j].length)
                           : t.value;
      if (std::isnan(phi[k])) return 0.0;
      factors.emplace_back(std::abs(phi[k] - y), eps);
    }
  }
  if (k != phi.size()) throw std::invalid_argument("candidate_weight: phi/target arity mismatch");

  bool all_exact = true;
  for (const auto& [delta, eps] : factors) {
    if (delta > eps) return 0.0;
    all_exact = all_exact && delta <= kExactHitTol;
  }
  if (all_exact) return kWeightCap;

  double w = std::exp(-static_cast<double>(distance));
  for (const auto& [delta, eps] : factors) {
    w *= delta <= kExactHitTol ? kWeightCap : 1.0 / (delta * delta);
  }
  return w;
}

CandidateSet weight_candidates(CandidateSet cs, const std::vector<PropertyTarget>& targets) {
  cs.validate();
  bool any = false;
  for (Candidate& c : cs.items) {
    c.phi = property_values(c.graph, targets);
    c.weight = candidate_weight(c.distance, c.phi, targets);
    any = any || c.weight > 0.0;
  }
  cs.weighted = true;
  cs.all_rejected = !any;
  return cs;
}

int select_candidate_index(const CandidateSet& cs, const GuidanceConfig& cfg, Rng& rng) {
  cfg.validate();
  cs.validate();
  if (!cs.weighted) throw std::invalid_argument("select_candidate_index: candidates not weighted yet");
  if (cs.all_rejected) return 0;
  if (cfg.selection == SelectionMode::ArgmaxWeight) {
    int best = 0;
    for (int i = 1; i < static_cast<int>(cs.items.size()); ++i) {
      if (cs.items[i].weight > cs.items[best].weight) best = i;
    }
    return best;
  }
  Vector w(cs.items.size());
  for (std::size_t i = 0; i < cs.items.size(); ++i) w[static_cast<int>(i)] = cs.items[i].weight;
  return rng.categorical(w);
}

Graph select_candidate(const CandidateSet& cs, const GuidanceConfig& cfg, Rng& rng) {
  return cs.items[select_candidate_index(cs, cfg, rng)].graph;
}

Graph conditioned_sample(const DenoiserFn& denoiser, const std::vector<ConditionModel>& conditions,
                         const NoiseSchedule& schedule, const GuidanceConfig& cfg, int n, Rng& rng,
                         GuidanceTrace* trace) {
  cfg.validate();
  if (conditions.empty()) {
    throw std::invalid_argument("conditioned_sample: needs at least one conditioning target");
  }
  std::vector<PropertyTarget> targets;
  for (const ConditionModel& c : conditions) {
    c.target.validate();
    targets.push_back(c.target);
  }
  if (trace) trace->steps.clear();

  Graph g = sample_limit(schedule, n, rng);
  for (int t = schedule.T; t >= 1; --t) {
    g = reverse_step(g, t, denoiser, schedule, rng);
    const int done = schedule.T - t;  // reverse steps completed before this one
    const double progress = static_cast<double>(done) / static_cast<double>(schedule.T);
    GuidanceStep rec;
    rec.t = t - 1;
    rec.active = progress >= cfg.ph_timing && done % cfg.apply_every == 0;
    if (rec.active) {
      try {
        const ScoredGraph scored = proposal_scores(cfg.proposal, conditions, g, rng);
        CandidateSet cs = weight_candidates(build_candidates(scored, cfg), targets);
        rec.selected = select_candidate_index(cs, cfg, rng);
        rec.weight = cs.items[rec.selected].weight;
        g = std::move(cs.items[rec.selected].graph);
      } catch (const ScheduleError&) {
        rec.declined = true;  // too few removable elements to build the ladder
      }
    }
    if (trace) trace->steps.push_back(rec);
  }
  return g;
}

MulticlassTendency multiclass_tendency(const GradientField& grad, int c_star) {
  const int b = static_cast<int>(grad.edge_grad.cols());
  if (b < 2) throw std::invalid_argument("multiclass_tendency: needs at least two edge classes");
  if (c_star < 0 || c_star >= b) throw std::invalid_argument("multiclass_tendency: class out of range");
  const int P = static_cast<int>(grad.edge_grad.rows());
  MulticlassTendency out;
  out.tau = Vector::Zero(P);
  for (int p = 0; p < P; ++p) {
    double lo = std::numeric_limits<double>::infinity();
    for (int c = 0; c < b; ++c) {
      if (c != c_star) lo = std::min(lo, grad.edge_grad(p, c));
    }
    out.tau[p] = grad.edge_grad(p, c_star) - lo;
  }
  out.ranking.resize(P);
  std::iota(out.ranking.begin(), out.ranking.end(), 0);
  std::stable_sort(out.ranking.begin(), out.ranking.end(),
                   [&](int x, int y) { return out.tau[x] > out.tau[y]; });
  return out;
}

Graph dense_guidance_step(const Graph& g, const GradientField& grad, int k) {
  if (g.edge_classes() != 2) {
    throw std::invalid_argument("dense_guidance_step: needs exactly two edge classes");
  }
  if (k < 0) throw std::invalid_argument("dense_guidance_step: k must be >= 0");
  const int P = pair_count(g.n());
  if (grad.edge_grad.rows() != P || grad.edge_grad.cols() != 2) {
    throw std::invalid_argument("dense_guidance_step: gradient shape does not match the graph");
  }
  Vector score(P);
  for (int p = 0; p < P; ++p) score[p] = grad.edge_grad(p, 1) - grad.edge_grad(p, 0);
  std::vector<int> order(P);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](int x, int y) { return std::abs(score[x]) > std::abs(score[y]); });
  Graph out = g;
  const int m = std::min(k, P);
  for (int i = 0; i < m; ++i) {
    const int p = order[i];
    const auto [u, v] = pair_nodes(g.n(), p);
    if (!g.active(u) || !g.active(v)) continue;  // no edge slot between removed nodes
    if (score[p] > 0.0 && out.present(u, v)) out.set_edge_class(u, v, 0);
    if (score[p] < 0.0 && !out.present(u, v)) out.set_edge_class(u, v, 1);
  }
  return out;
}

Graph nsp_baseline(const Graph& original, const std::vector<std::pair<int, int>>& pairs,
                   double noise_rate, Rng& rng) {
  if (!(noise_rate >= 0.0 && noise_rate <= 1.0)) {
    throw std::invalid_argument("nsp_baseline: noise_rate must lie in [0, 1]");
  }
  if (pairs.empty()) throw std::invalid_argument("nsp_baseline: needs at least one conditioned pair");
  const std::vector<int> kept = conditioned_path_subgraph(original, pairs);
  const std::vector<int> want = shortest_path_lengths(original, pairs);
  for (int d : want) {
    if (d == kUnreachable) throw std::invalid_argument("nsp_baseline: conditioned pair is disconnected");
  }
  Graph g = original;
  if (noise_rate <= 0.0) return g;

  const int n = g.n();
  const int P = pair_count(n);
  std::vector<char> is_kept(P, 0);
  for (int p : kept) is_kept[p] = 1;

  for (int p = 0; p < P; ++p) {
    const int cls = original.edge_class_at(p);
    if (cls == 0 || is_kept[p]) continue;
    if (rng.uniform() >= noise_rate) continue;
    const auto [u, v] = pair_nodes(n, p);
    g.set_edge_class(u, v, 0);  // removal is always safe: no kept path uses p
    bool moved = false;
    for (int attempt = 0; attempt < 100 && !moved; ++attempt) {
      const int q = rng.uniform_int(P);
      if (q == p || is_kept[q] || g.edge_class_at(q) != 0) continue;
      const auto [x, y] = pair_nodes(n, q);
      if (!g.active(x) || !g.active(y)) continue;
      g.set_edge_class(x, y, cls);
      if (shortest_path_lengths(g, pairs) == want) {
        moved = true;  // no shortcut created
      } else {
        g.set_edge_class(x, y, 0);
      }
    }
    if (!moved) g.set_edge_class(u, v, cls);  // keep the edge rather than lose it
  }
  return g;
}

Vector edge_betweenness(const Graph& g) {
  const int n = g.n();
  const int P = pair_count(n);
  Vector eb = Vector::Zero(P);
  std::vector<int> dist(n);
  std::vector<double> sigma(n), delta(n);
  std::vector<std::vector<int>> preds(n);
  std::vector<int> order;
  order.reserve(n);
  for (int s = 0; s < n; ++s) {
    if (!g.active(s)) continue;
    std::fill(dist.begin(), dist.end(), -1);
    std::fill(sigma.begin(), sigma.end(), 0.0);
    std::fill(delta.begin(), delta.end(), 0.0);
    for (auto& pl : preds) pl.clear();
    order.clear();
    dist[s] = 0;
    sigma[s] = 1.0;
    std::vector<int> queue{s};
    for (std::size_t head = 0; head < queue.size(); ++head) {
      const int w = queue[head];
      order.push_back(w);
      for (int x : g.neighbors(w)) {
        if (dist[x] < 0) {
          dist[x] = dist[w] + 1;
          queue.push_back(x);
        }
        if (dist[x] == dist[w] + 1) {
          sigma[x] += sigma[w];
          preds[x].push_back(w);
        }
      }
    }
    for (auto it = order.rbegin(); it != order.rend(); ++it) {
      const int w = *it;
      for (int x : preds[w]) {
        const double c = sigma[x] / sigma[w] * (1.0 + delta[w]);
        eb[pair_index(n, x, w)] += c;
        delta[x] += c;
      }
    }
  }
  return eb / 2.0;  // each unordered pair was accumulated from both endpoints
}

ScoredGraph ebc_proposal(const Graph& g, bool negate) {
  Vector edge = edge_betweenness(g);
  if (negate) edge = -edge;
  return ScoredGraph{g, Vector::Zero(g.n()), std::move(edge)};
}

ScoredGraph random_proposal(const Graph& g, Rng& rng) {
  const int n = g.n();
  const int P = pair_count(n);
  Vector node(n), edge(P);
  for (int v = 0; v < n; ++v) node[v] = rng.uniform();
  for (int p = 0; p < P; ++p) edge[p] = rng.uniform();
  return ScoredGraph{g, std::move(node), std::move(edge)};
}

}  // namespace copho
