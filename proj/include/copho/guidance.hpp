#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "copho/diffusion.hpp"
#include "copho/graph.hpp"
#include "copho/neural.hpp"
#include "copho/persistence.hpp"
#include "copho/properties.hpp"
#include "copho/rng.hpp"
#include "copho/types.hpp"

namespace copho {

/// Weight assigned to a candidate whose properties all match their targets
/// exactly; caps the (phi - y)^-2 singularity so exact hits dominate any
/// finite-error candidate.
inline constexpr double kWeightCap = 1e12;

/// |phi - y| below this counts as an exact hit.
inline constexpr double kExactHitTol = 1e-12;

enum class SelectionMode { ArgmaxWeight, SampleProportional };
enum class ProposalKind {
  Gradient,            // classifier gradient scores (the default proposal)
  LoopGradient,        // gradient from a cyclically mismatched classifier
  EdgeBetweenness,     // remove high-betweenness edges first
  NegEdgeBetweenness,  // remove low-betweenness edges first
  Random,              // seeded random scores
};

std::string selection_name(SelectionMode mode);
SelectionMode selection_from_name(const std::string& name);
std::string proposal_name(ProposalKind kind);
ProposalKind proposal_from_name(const std::string& name);

/// Knobs for the conditioned sampling loop.
struct GuidanceConfig {
  int t_homo = 5;         // edit-ladder length; 0 disables editing entirely
  double ph_timing = 0.6; // fraction of reverse steps completed before the
                          // edit loop starts firing (0 = from the start)
  int apply_every = 1;    // fire only when completed-step count is a multiple
  SelectionMode selection = SelectionMode::ArgmaxWeight;
  ProposalKind proposal = ProposalKind::Gradient;

  void validate() const;
};

/// A conditioning target paired with the regressor whose gradient scores the
/// edit proposals for it. Weighting always uses the exact property functions;
/// the model only shapes the removal ranking, so a deliberately mismatched
/// model (see loop_gradient_source) changes the proposal, not the acceptance
/// test.
struct ConditionModel {
  PropertyTarget target;
  MpnnModel model;
};

/// The scalar-property cycle used by the mismatched-gradient proposal: each
/// property is scored with the previous property's regressor
/// (clustering <- density <- transitivity <- assortativity <- clustering).
PropertyKind loop_gradient_source(PropertyKind kind);

/// Rewires each condition to the model registered for its cycle source.
/// `registry` supplies one trained model per scalar property kind; path
/// conditions keep their own model. Missing source kind -> invalid_argument.
std::vector<ConditionModel> loop_mismatched(
    const std::vector<ConditionModel>& conditions,
    const std::vector<ConditionModel>& registry);

/// One edit candidate: the graph reached after `distance` single-element
/// removals, its exact property values (one per scalar target, one per
/// conditioned pair; NaN where undefined), and its importance weight.
struct Candidate {
  Graph graph;
  int distance = 0;
  std::vector<double> phi;
  double weight = 0.0;
};

struct CandidateSet {
  std::vector<Candidate> items;  // distances 0, 1, ..., t_homo
  bool weighted = false;
  bool all_rejected = false;  // set by weight_candidates when no weight > 0

  void validate() const;
};

/// Per-element removal scores from the conditioning regressors: the loss
/// gradient toward an element's current class minus the gradient toward its
/// absent/inactive class, so a positive score marks an element whose removal
/// lowers the loss. Multiple targets (and multiple conditioned pairs) are
/// fused by normalizing each score field to unit max-abs and summing; a
/// single field is returned unscaled. Model/target mismatches throw
/// std::invalid_argument.
ScoredGraph gradient_scores(const std::vector<ConditionModel>& conditions,
                            const Graph& g_t);

/// Scores for one proposal family. Gradient and LoopGradient both evaluate
/// the models riding in `conditions` (build the latter with loop_mismatched);
/// EdgeBetweenness ranks by (+/-) exact betweenness; Random draws node then
/// edge scores from rng.
ScoredGraph proposal_scores(ProposalKind kind,
                            const std::vector<ConditionModel>& conditions,
                            const Graph& g_t, Rng& rng);

/// The unedited graph plus the first cfg.t_homo rungs of its removal ladder
/// (one element deleted per rung, highest score first). Propagates
/// ScheduleError when the graph has fewer removable elements than t_homo.
CandidateSet build_candidates(const ScoredGraph& scored,
                              const GuidanceConfig& cfg);

/// Exact property values for every target, in target order (path sets expand
/// to one value per pair). Undefined values (degenerate graphs, unreachable
/// pairs) come back as NaN.
std::vector<double> property_values(const Graph& g,
                                    const std::vector<PropertyTarget>& targets);

/// exp(-distance) times the product over targets of (phi - y)^-2, gated by
/// the tolerance indicator 1[|phi - y| <= epsilon]; any out-of-tolerance or
/// undefined value zeroes the weight. A candidate matching every target
/// within 1e-12 gets kWeightCap outright.
double candidate_weight(int distance, const std::vector<double>& phi,
                        const std::vector<PropertyTarget>& targets);

/// Fills phi and weight for every candidate and flags all-zero sets.
CandidateSet weight_candidates(CandidateSet cs,
                               const std::vector<PropertyTarget>& targets);

/// ArgmaxWeight: highest weight, ties to the smaller edit distance.
/// SampleProportional: categorical draw over normalized weights (consumes
/// rng). Either mode falls back to index 0 when every weight is zero.
int select_candidate_index(const CandidateSet& cs, const GuidanceConfig& cfg,
                           Rng& rng);
Graph select_candidate(const CandidateSet& cs, const GuidanceConfig& cfg,
                       Rng& rng);

/// Per-step record for run manifests and ablation audits.
struct GuidanceStep {
  int t = 0;            // time index of the graph the step produced
  bool active = false;  // gate open at this step
  bool declined = false;  // gate open but the graph had too few removable
                          // elements to build the ladder; kept unedited
  int selected = 0;
  double weight = 0.0;
};

struct GuidanceTrace {
  std::vector<GuidanceStep> steps;
};

/// Full conditioned reverse run: denoise from the noise limit, and once the
/// completed-step fraction reaches cfg.ph_timing (at multiples of
/// cfg.apply_every), replace each intermediate graph by the best-weighted
/// rung of its removal ladder. With the gate shut the rng consumption is
/// identical to sample_unconditional, so the two are bit-identical under the
/// same seed.
Graph conditioned_sample(const DenoiserFn& denoiser,
                         const std::vector<ConditionModel>& conditions,
                         const NoiseSchedule& schedule,
                         const GuidanceConfig& cfg, int n, Rng& rng,
                         GuidanceTrace* trace = nullptr);

/// Multi-class transition tendency toward class c_star:
/// tau(p) = grad[p, c_star] - min over other classes of grad[p, c].
/// `ranking` orders pairs by descending tau (ties by index). Fewer than two
/// edge classes -> invalid_argument.
struct MulticlassTendency {
  Vector tau;
  std::vector<int> ranking;
};
MulticlassTendency multiclass_tendency(const GradientField& grad, int c_star);

/// Dense two-class variant: flip the k pairs with the largest absolute
/// removal score by E <- clip(E - sign(score), {0,1}); clipping makes
/// wrong-direction flips no-ops, so at most k entries change.
Graph dense_guidance_step(const Graph& g, const GradientField& grad, int k);

/// Rewiring baseline that keeps the union of shortest paths between the
/// conditioned pairs intact: every other present edge is moved to a random
/// absent slot with probability noise_rate, rejecting any move that changes
/// a conditioned distance. Disconnected pair -> invalid_argument.
Graph nsp_baseline(const Graph& original,
                   const std::vector<std::pair<int, int>>& pairs,
                   double noise_rate, Rng& rng);

/// Exact per-edge shortest-path betweenness (unordered source/target pairs,
/// per component) on the active subgraph; absent pairs score 0.
Vector edge_betweenness(const Graph& g);

/// Betweenness scores as an edit proposal (negate=true reverses the ranking).
/// Node scores are zero.
ScoredGraph ebc_proposal(const Graph& g, bool negate = false);

/// Uniform(0,1) scores for every node, then every pair, drawn from rng.
ScoredGraph random_proposal(const Graph& g, Rng& rng);

}  // namespace copho
