#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>

#include "copho/diffusion.hpp"

using namespace copho;

namespace {

Graph make_graph(int n, const std::vector<std::pair<int, int>>& edges, int a = 2, int b = 2) {
  Graph g(n, a, b);
  for (auto [u, v] : edges) g.set_edge_class(u, v, 1);
  return g;
}

NoiseSchedule identity_schedule(int T, int a, int b) {
  NoiseSchedule s;
  s.T = T;
  s.a = a;
  s.b = b;
  s.beta = Vector::Zero(T + 1);
  s.limit_v = Vector::Constant(a, 1.0 / a);
  s.limit_e = Vector::Constant(b, 1.0 / b);
  for (int t = 0; t <= T; ++t) {
    s.Qv.push_back(Matrix::Identity(a, a));
    s.Qe.push_back(Matrix::Identity(b, b));
    s.Qv_bar.push_back(Matrix::Identity(a, a));
    s.Qe_bar.push_back(Matrix::Identity(b, b));
  }
  return s;
}

DenoiserFn oracle_denoiser(const Graph& truth) {
  return [truth](const Graph&, int) { return GraphDistribution::one_hot(truth); };
}

double tv(const Vector& p, const Vector& q) { return 0.5 * (p - q).lpNorm<1>(); }

}  // namespace

TEST_CASE("schedule matrices are stochastic and converge to the limit") {
  NoiseSchedule s = make_schedule(40, 3, 2);
  CHECK_NOTHROW(s.validate());
  for (int t = 1; t <= s.T; ++t) {
    CHECK(s.beta[t] >= 0.0);
    CHECK(s.beta[t] <= 0.999);
    for (int r = 0; r < s.a; ++r)
      CHECK(s.Qv_bar[t].row(r).sum() == doctest::Approx(1.0).epsilon(1e-9));
    for (int r = 0; r < s.b; ++r)
      CHECK(s.Qe_bar[t].row(r).sum() == doctest::Approx(1.0).epsilon(1e-9));
  }
  for (int r = 0; r < s.a; ++r)
    CHECK(tv(s.Qv_bar[s.T].row(r).transpose(), s.limit_v) <= 0.01);
  // corruption strength grows toward the end of the chain
  CHECK(s.beta[s.T] > s.beta[1]);
}

TEST_CASE("cumulative products satisfy the step-composition identity") {
  NoiseSchedule s = make_schedule(25, 4, 3);
  Matrix prod_v = Matrix::Identity(4, 4);
  Matrix prod_e = Matrix::Identity(3, 3);
  for (int t = 1; t <= s.T; ++t) {
    prod_v = prod_v * s.Qv[t];
    prod_e = prod_e * s.Qe[t];
    CHECK((s.Qv_bar[t] - prod_v).cwiseAbs().maxCoeff() < 1e-12);
    CHECK((s.Qe_bar[t] - prod_e).cwiseAbs().maxCoeff() < 1e-12);
    CHECK((s.Qv_bar[t] - s.Qv_bar[t - 1] * s.Qv[t]).cwiseAbs().maxCoeff() < 1e-12);
  }
}

TEST_CASE("schedule constructor rejects bad arguments") {
  CHECK_THROWS_AS(make_schedule(0, 2, 2), std::invalid_argument);
  CHECK_THROWS_AS(make_schedule(10, 2, 2, "linear"), std::invalid_argument);
  // a short chain still lands on the limit thanks to the final-step clamp
  CHECK_NOTHROW(make_schedule(1, 2, 2));
}

TEST_CASE("identity corruption returns the input graph") {
  NoiseSchedule s = identity_schedule(3, 2, 2);
  Graph g = make_graph(4, {{0, 1}, {2, 3}});
  Rng rng(5);
  CHECK(forward_noise(g, 3, s, rng) == g);
  CHECK(forward_step(g, 2, s, rng) == g);
}

TEST_CASE("forward noising is deterministic under a seed and checks t") {
  NoiseSchedule s = make_schedule(20, 2, 2);
  Graph g = make_graph(5, {{0, 1}, {1, 2}, {3, 4}});
  Rng r1(77), r2(77);
  CHECK(forward_noise(g, 10, s, r1) == forward_noise(g, 10, s, r2));
  Rng r3(1);
  CHECK_THROWS_AS(forward_noise(g, 0, s, r3), std::invalid_argument);
  CHECK_THROWS_AS(forward_noise(g, 21, s, r3), std::invalid_argument);
  Graph wrong(3, 5, 2);
  CHECK_THROWS_AS(forward_noise(wrong, 5, s, r3), std::invalid_argument);
}

TEST_CASE("terminal-step noising matches the uniform limit") {
  NoiseSchedule s = make_schedule(30, 2, 3);
  Graph g = make_graph(2, {{0, 1}}, 2, 3);
  Rng rng(11);
  Vector freq = Vector::Zero(3);
  const int trials = 10000;
  for (int i = 0; i < trials; ++i)
    freq[forward_noise(g, s.T, s, rng).edge_class(0, 1)] += 1.0;
  freq /= trials;
  CHECK(tv(freq, s.limit_e) < 0.05);
}

TEST_CASE("one-shot noising matches stepwise noising in distribution") {
  NoiseSchedule s = make_schedule(6, 3, 2);
  Graph g0(1, 3, 2);  // single node, class 0
  Rng rng(13);
  const int trials = 10000;
  Vector one_shot = Vector::Zero(3), stepwise = Vector::Zero(3);
  for (int i = 0; i < trials; ++i) {
    one_shot[forward_noise(g0, s.T, s, rng).node_class(0)] += 1.0;
    Graph g = g0;
    for (int t = 1; t <= s.T; ++t) g = forward_step(g, t, s, rng);
    stepwise[g.node_class(0)] += 1.0;
  }
  CHECK(tv(one_shot / trials, stepwise / trials) < 0.05);
}

TEST_CASE("reverse posterior matches exact Bayes enumeration on a toy chain") {
  // one node, two classes; clean class fixed at 0; oracle clean prediction
  NoiseSchedule s = make_schedule(8, 2, 1);
  Graph truth(1, 2, 1);
  const int t = 5;

  // exact posterior: q(j | i, x0=0) = Qbar_{t-1}(0,j) Q_t(j,i) / Qbar_t(0,i)
  for (int i = 0; i < 2; ++i) {
    Graph g_next(1, 2, 1);
    g_next.set_node_class(0, i);
    Vector exact(2);
    for (int j = 0; j < 2; ++j)
      exact[j] = s.Qv_bar[t - 1](0, j) * s.Qv[t](j, i) / s.Qv_bar[t](0, i);
    CHECK(exact.sum() == doctest::Approx(1.0).epsilon(1e-9));

    GraphDistribution post =
        reverse_posterior(g_next, t, GraphDistribution::one_hot(truth), s);
    CHECK(tv(post.node_probs().row(0).transpose(), exact) < 1e-12);

    // and the sampler follows it
    Rng rng(100 + i);
    Vector freq = Vector::Zero(2);
    const int draws = 10000;
    for (int d = 0; d < draws; ++d) {
      Graph out = reverse_step(g_next, t, oracle_denoiser(truth), s, rng);
      freq[out.node_class(0)] += 1.0;
    }
    CHECK(tv(freq / draws, exact) < 0.02);
  }
}

TEST_CASE("final reverse step recovers the oracle's clean graph exactly") {
  NoiseSchedule s = make_schedule(12, 2, 2);
  Graph truth = make_graph(4, {{0, 2}, {1, 3}, {2, 3}});
  Rng rng(21);
  for (int rep = 0; rep < 50; ++rep) {
    Graph g1 = sample_limit(s, 4, rng);
    CHECK(reverse_step(g1, 1, oracle_denoiser(truth), s, rng) == truth);
  }
}

TEST_CASE("unconditional sampling with an oracle lands on its target") {
  NoiseSchedule s = make_schedule(16, 2, 2);
  Graph truth = make_graph(5, {{0, 1}, {1, 2}, {2, 3}, {3, 4}, {0, 4}});
  Rng r1(33), r2(33);
  Graph out1 = sample_unconditional(oracle_denoiser(truth), s, 5, r1);
  Graph out2 = sample_unconditional(oracle_denoiser(truth), s, 5, r2);
  CHECK(out1 == truth);
  CHECK(out1 == out2);  // seeded determinism
}

TEST_CASE("limit sampling is uniform over classes") {
  NoiseSchedule s = make_schedule(5, 4, 2);
  Rng rng(55);
  Vector freq = Vector::Zero(4);
  const int trials = 20000;
  for (int i = 0; i < trials; ++i) freq[sample_limit(s, 1, rng).node_class(0)] += 1.0;
  CHECK(tv(freq / trials, s.limit_v) < 0.02);
}

TEST_CASE("posterior validates dimensions") {
  NoiseSchedule s = make_schedule(6, 2, 2);
  Graph g(3, 2, 2);
  Graph small(2, 2, 2);
  CHECK_THROWS_AS(
      reverse_posterior(g, 3, GraphDistribution::one_hot(small), s), std::invalid_argument);
  CHECK_THROWS_AS(
      reverse_posterior(g, 0, GraphDistribution::one_hot(g), s), std::invalid_argument);
}
