#pragma once

#include <functional>
#include <string>
#include <vector>

#include "copho/graph.hpp"

namespace copho {

/// Per-step categorical corruption kernels for node and edge classes, plus
/// their cumulative products. Index t runs 1..T; slot 0 holds the identity
/// so Q̄_0 = I. All kernels here mix toward a fixed limit row, so every
/// matrix is symmetric and doubly stochastic.
struct NoiseSchedule {
  int T = 0;
  int a = 0;  // node classes
  int b = 0;  // edge classes
  Vector beta;                 // size T+1; beta[0] unused
  std::vector<Matrix> Qv;      // a x a, single step
  std::vector<Matrix> Qe;      // b x b, single step
  std::vector<Matrix> Qv_bar;  // cumulative: Q̄_t = Q̄_{t-1} Q_t
  std::vector<Matrix> Qe_bar;
  Vector limit_v;  // stationary class distribution (uniform)
  Vector limit_e;

  /// Structural checks: stochastic rows, nonnegative entries, and Q̄_T within
  /// total variation 0.01 of the limit. Throws ScheduleError.
  void validate() const;
};

/// Cosine-spaced corruption strength composed into uniform-mixture kernels
/// Q_t = (1-beta_t) I + beta_t * (uniform row). kind: "uniform-cosine".
NoiseSchedule make_schedule(int T, int a, int b, const std::string& kind = "uniform-cosine");

/// Rebuilds the kernel stacks from a stored beta sequence (beta[0] unused)
/// with exactly the operations make_schedule uses, so persisted schedules
/// round-trip bit for bit.
NoiseSchedule schedule_from_betas(int T, int a, int b, const Vector& beta);

/// One-shot corruption of the clean graph to step t (each element sampled
/// from the Q̄_t row of its clean class; one draw per unordered pair).
Graph forward_noise(const Graph& g0, int t, const NoiseSchedule& schedule, Rng& rng);

/// Single-step corruption from step t-1 to t via Q_t.
Graph forward_step(const Graph& g_prev, int t, const NoiseSchedule& schedule, Rng& rng);

/// Clean-graph predictor: maps a noisy graph and its step to a distribution
/// over clean classes per element.
using DenoiserFn = std::function<GraphDistribution(const Graph& g_t, int t)>;

/// Per-element posterior over step t-1 classes given the step t state and a
/// clean-class prediction: row j proportional to
///   Q_t(class_t, j) * sum_k p0_hat[k] Q̄_{t-1}(k, j).
GraphDistribution reverse_posterior(const Graph& g_next, int t, const GraphDistribution& p0_hat,
                                    const NoiseSchedule& schedule);

/// Samples the step t-1 state from the posterior under the denoiser's
/// clean-class prediction.
Graph reverse_step(const Graph& g_next, int t, const DenoiserFn& denoiser,
                   const NoiseSchedule& schedule, Rng& rng);

/// Fully random graph from the limit distribution (the chain's start state).
Graph sample_limit(const NoiseSchedule& schedule, int n, Rng& rng);

/// Limit draw followed by reverse steps t = T..1.
Graph sample_unconditional(const DenoiserFn& denoiser, const NoiseSchedule& schedule, int n,
                           Rng& rng);

}  // namespace copho
