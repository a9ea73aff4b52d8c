#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>

#include "copho/neural.hpp"

using namespace copho;

namespace {

Graph make_graph(int n, const std::vector<std::pair<int, int>>& edges, int a = 2, int b = 2) {
  Graph g(n, a, b);
  for (auto [u, v] : edges) g.set_edge_class(u, v, 1);
  return g;
}

Graph random_graph(Rng& rng, int n, double p, int a = 2, int b = 2) {
  Graph g(n, a, b);
  for (int u = 0; u < n; ++u)
    for (int v = u + 1; v < n; ++v)
      if (rng.uniform() < p) g.set_edge_class(u, v, 1 + rng.uniform_int(b - 1));
  return g;
}

double denoiser_loss(const MpnnModel& m, const RelaxedGraph& rg, int t, const Graph& clean) {
  const ForwardPass f = forward(m, rg, t);
  const int P = static_cast<int>(rg.E.rows());
  double loss = 0.0;
  for (int v = 0; v < rg.n; ++v) loss -= std::log(f.node_probs(v, clean.node_class(v)));
  for (int p = 0; p < P; ++p) loss -= std::log(f.edge_probs(p, clean.edge_class_at(p)));
  return loss / (rg.n + P);
}

// Central finite differences over every relaxed entry.
void check_field(const std::function<double(const RelaxedGraph&)>& loss, const RelaxedGraph& rg,
                 const GradientField& analytic) {
  constexpr double h = 1e-5;
  auto check_entry = [&](double an, double fd) {
    if (std::abs(an) <= 1e-8) return;
    CHECK(std::abs(fd - an) <= 1e-4 * std::max(std::abs(fd), std::abs(an)));
  };
  for (int v = 0; v < rg.X.rows(); ++v)
    for (int c = 0; c < rg.X.cols(); ++c) {
      RelaxedGraph up = rg, dn = rg;
      up.X(v, c) += h;
      dn.X(v, c) -= h;
      check_entry(analytic.node_grad(v, c), (loss(up) - loss(dn)) / (2 * h));
    }
  for (int p = 0; p < rg.E.rows(); ++p)
    for (int c = 0; c < rg.E.cols(); ++c) {
      RelaxedGraph up = rg, dn = rg;
      up.E(p, c) += h;
      dn.E(p, c) -= h;
      check_entry(analytic.edge_grad(p, c), (loss(up) - loss(dn)) / (2 * h));
    }
}

}  // namespace

TEST_CASE("zero weights yield the bias output and a zero gradient field") {
  MpnnConfig cfg;
  cfg.layers = 2;
  cfg.hidden = 4;
  MpnnModel m = make_zero_model(cfg);
  m.w.b_out = 1.25;
  Graph g = make_graph(4, {{0, 1}, {2, 3}});
  ForwardPass f = forward(m, RelaxedGraph::from(g));
  CHECK(f.value == doctest::Approx(1.25));
  GradientField field = grad_wrt_graph(m, g, 0.0);
  CHECK(field.node_grad.cwiseAbs().maxCoeff() == 0.0);
  CHECK(field.edge_grad.cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("two-node single-layer output matches the closed form") {
  MpnnConfig cfg;
  cfg.layers = 1;
  cfg.hidden = 1;
  MpnnModel m = make_zero_model(cfg);
  const double p = 0.3, r = 0.5, beta = 0.05, omega = 0.7, c0 = -0.4;
  m.w.w_self[0](0, 0) = p;
  m.w.w_self[0](1, 0) = -0.2;
  m.w.w_msg[0][0](0, 0) = r;
  m.w.w_msg[0][0](1, 0) = 0.1;
  m.w.bias[0][0] = beta;
  m.w.w_out[0] = omega;
  m.w.b_out = c0;
  Graph g = make_graph(2, {{0, 1}});
  // each node: tanh(p + r + beta); activity-weighted mean pooling; linear head
  const double want = omega * std::tanh(p + r + beta) + c0;
  CHECK(forward(m, RelaxedGraph::from(g)).value == doctest::Approx(want).epsilon(1e-12));
}

TEST_CASE("graph-level output is invariant to node relabeling") {
  Rng rng(3);
  MpnnConfig cfg;
  cfg.layers = 3;
  cfg.hidden = 8;
  MpnnModel m = make_model(cfg, 99);
  for (int rep = 0; rep < 10; ++rep) {
    Graph g = random_graph(rng, 7, 0.4);
    std::vector<int> perm{3, 0, 6, 2, 5, 1, 4};
    Graph pg(7, 2, 2);
    for (int v = 0; v < 7; ++v) pg.set_node_class(perm[v], g.node_class(v));
    for (auto [u, v] : g.edges()) pg.set_edge_class(perm[u], perm[v], g.edge_class(u, v));
    const double a = forward(m, RelaxedGraph::from(g)).value;
    const double b = forward(m, RelaxedGraph::from(pg)).value;
    CHECK(a == doctest::Approx(b).epsilon(1e-9));
  }
}

TEST_CASE("denoiser node outputs permute with the nodes") {
  MpnnConfig cfg;
  cfg.layers = 2;
  cfg.hidden = 6;
  cfg.head = MpnnConfig::Head::Denoiser;
  cfg.time_dim = 4;
  MpnnModel m = make_model(cfg, 7);
  Rng rng(8);
  Graph g = random_graph(rng, 6, 0.5);
  std::vector<int> perm{2, 4, 0, 5, 1, 3};
  Graph pg(6, 2, 2);
  for (int v = 0; v < 6; ++v) pg.set_node_class(perm[v], g.node_class(v));
  for (auto [u, v] : g.edges()) pg.set_edge_class(perm[u], perm[v], g.edge_class(u, v));
  ForwardPass f = forward(m, RelaxedGraph::from(g), 3);
  ForwardPass pf = forward(m, RelaxedGraph::from(pg), 3);
  for (int v = 0; v < 6; ++v)
    CHECK((f.node_probs.row(v) - pf.node_probs.row(perm[v])).cwiseAbs().maxCoeff() < 1e-9);
  for (int u = 0; u < 6; ++u)
    for (int v = u + 1; v < 6; ++v) {
      const int p0 = pair_index(6, u, v);
      const int p1 = pair_index(6, perm[u], perm[v]);
      CHECK((f.edge_probs.row(p0) - pf.edge_probs.row(p1)).cwiseAbs().maxCoeff() < 1e-9);
    }
}

TEST_CASE("regression gradients match central differences") {
  Rng rng(41);
  for (int rep = 0; rep < 8; ++rep) {
    MpnnConfig cfg;
    cfg.layers = 1 + rng.uniform_int(3);
    cfg.hidden = 3 + rng.uniform_int(5);
    MpnnModel m = make_model(cfg, 1000 + rep);
    Graph g = random_graph(rng, 4 + rng.uniform_int(3), 0.5);
    RelaxedGraph rg = RelaxedGraph::from(g);
    const double y = rng.uniform();
    Gradients an = backward_regression(m, forward(m, rg), y);
    auto loss = [&](const RelaxedGraph& x) {
      const double v = forward(m, x).value;
      return (v - y) * (v - y);
    };
    CHECK(an.loss == doctest::Approx(loss(rg)));
    check_field(loss, rg, an.field);
  }
}

TEST_CASE("denoiser gradients match central differences") {
  Rng rng(43);
  for (int rep = 0; rep < 6; ++rep) {
    MpnnConfig cfg;
    cfg.layers = 1 + rng.uniform_int(2);
    cfg.hidden = 3 + rng.uniform_int(4);
    cfg.head = MpnnConfig::Head::Denoiser;
    cfg.time_dim = 4;
    cfg.edge_classes = 2 + rng.uniform_int(2);
    MpnnModel m = make_model(cfg, 2000 + rep);
    const int n = 4 + rng.uniform_int(2);
    Graph clean = random_graph(rng, n, 0.5, 2, cfg.edge_classes);
    Graph noisy = random_graph(rng, n, 0.5, 2, cfg.edge_classes);
    RelaxedGraph rg = RelaxedGraph::from(noisy);
    const int t = 1 + rng.uniform_int(5);
    Gradients an = backward_denoiser(m, forward(m, rg, t), clean);
    auto loss = [&](const RelaxedGraph& x) { return denoiser_loss(m, x, t, clean); };
    CHECK(an.loss == doctest::Approx(loss(rg)));
    check_field(loss, rg, an.field);
  }
}

TEST_CASE("weight gradients match central differences") {
  Rng rng(47);
  MpnnConfig cfg;
  cfg.layers = 2;
  cfg.hidden = 5;
  MpnnModel m = make_model(cfg, 77);
  Graph g = random_graph(rng, 5, 0.5);
  RelaxedGraph rg = RelaxedGraph::from(g);
  const double y = 0.3;
  Gradients an = backward_regression(m, forward(m, rg), y);
  constexpr double h = 1e-5;
  auto loss_with = [&](const MpnnModel& mm) {
    const double v = forward(mm, rg).value;
    return (v - y) * (v - y);
  };
  auto fd_weight = [&](auto getter) {
    MpnnModel up = m, dn = m;
    getter(up.w) += h;
    getter(dn.w) -= h;
    return (loss_with(up) - loss_with(dn)) / (2 * h);
  };
  auto check = [&](double analytic, double fd) {
    if (std::abs(analytic) <= 1e-8) return;
    CHECK(std::abs(fd - analytic) <= 1e-4 * std::max(std::abs(fd), std::abs(analytic)));
  };
  check(an.weights.w_self[0](0, 1), fd_weight([](MpnnWeights& w) -> double& { return w.w_self[0](0, 1); }));
  check(an.weights.w_self[1](2, 3), fd_weight([](MpnnWeights& w) -> double& { return w.w_self[1](2, 3); }));
  check(an.weights.w_msg[0][0](1, 2), fd_weight([](MpnnWeights& w) -> double& { return w.w_msg[0][0](1, 2); }));
  check(an.weights.w_msg[1][0](4, 0), fd_weight([](MpnnWeights& w) -> double& { return w.w_msg[1][0](4, 0); }));
  check(an.weights.bias[0][2], fd_weight([](MpnnWeights& w) -> double& { return w.bias[0][2]; }));
  check(an.weights.w_out[1], fd_weight([](MpnnWeights& w) -> double& { return w.w_out[1]; }));
  check(an.weights.b_out, fd_weight([](MpnnWeights& w) -> double& { return w.b_out; }));
}

TEST_CASE("marker channels feed the forward pass") {
  MpnnConfig cfg;
  cfg.layers = 2;
  cfg.hidden = 6;
  cfg.marker_channels = true;
  MpnnModel m = make_model(cfg, 5);
  Graph g = make_graph(5, {{0, 1}, {1, 2}, {2, 3}, {3, 4}});
  const double plain = forward(m, RelaxedGraph::from(g)).value;
  const double marked = forward(m, RelaxedGraph::from(g), 0, {{0, 4}}).value;
  CHECK(plain != marked);
  MpnnConfig bare;
  MpnnModel mb = make_model(bare, 5);
  CHECK_THROWS_AS(forward(mb, RelaxedGraph::from(g), 0, {{0, 4}}), std::invalid_argument);
}

TEST_CASE("constant-target training converges to the constant") {
  Rng rng(51);
  std::vector<RegressionExample> data;
  for (int i = 0; i < 12; ++i) data.push_back({random_graph(rng, 6, 0.4), {}, 0.7});
  MpnnConfig cfg;
  cfg.layers = 2;
  cfg.hidden = 8;
  TrainConfig tc;
  tc.lr = 0.1;
  tc.epochs = 150;
  tc.seed = 9;
  TrainResult res = train_regressor(data, cfg, tc);
  CHECK(res.epoch_loss.back() <= res.epoch_loss.front());
  CHECK(res.epoch_loss.back() < 0.01);
}

TEST_CASE("density regression generalizes to held-out graphs") {
  Rng rng(53);
  auto density_of = [](const Graph& g) {
    return 2.0 * g.edge_count() / (g.n() * (g.n() - 1.0));
  };
  std::vector<RegressionExample> train, test;
  for (int i = 0; i < 50; ++i) {
    Graph g = random_graph(rng, 12, 0.1 + 0.8 * rng.uniform());
    RegressionExample ex{g, {}, density_of(g)};
    (i < 40 ? train : test).push_back(ex);
  }
  MpnnConfig cfg;
  cfg.layers = 3;
  cfg.hidden = 16;
  TrainConfig tc;
  tc.lr = 0.05;
  tc.epochs = 300;
  tc.seed = 4;
  TrainResult res = train_regressor(train, cfg, tc);
  double mae = 0.0;
  for (const auto& ex : test)
    mae += std::abs(forward(res.model, RelaxedGraph::from(ex.g)).value - ex.y);
  mae /= test.size();
  CHECK(mae < 0.1);
}

TEST_CASE("training is reproducible bit for bit") {
  Rng rng(57);
  std::vector<RegressionExample> data;
  for (int i = 0; i < 8; ++i)
    data.push_back({random_graph(rng, 5, 0.5), {}, rng.uniform()});
  MpnnConfig cfg;
  cfg.layers = 2;
  cfg.hidden = 6;
  TrainConfig tc;
  tc.epochs = 20;
  tc.seed = 31;
  TrainResult r1 = train_regressor(data, cfg, tc);
  TrainResult r2 = train_regressor(data, cfg, tc);
  CHECK(r1.epoch_loss == r2.epoch_loss);
  CHECK((forward(r1.model, RelaxedGraph::from(data[0].g)).value ==
         forward(r2.model, RelaxedGraph::from(data[0].g)).value));
}

TEST_CASE("near-noiseless denoiser learns to reconstruct") {
  // single-step schedule with 2% corruption
  NoiseSchedule s;
  s.T = 1;
  s.a = 2;
  s.b = 2;
  s.beta = Vector::Zero(2);
  s.beta[1] = 0.02;
  s.limit_v = Vector::Constant(2, 0.5);
  s.limit_e = Vector::Constant(2, 0.5);
  const Matrix mix = 0.98 * Matrix::Identity(2, 2) + 0.01 * Matrix::Ones(2, 2);
  s.Qv = {Matrix::Identity(2, 2), mix};
  s.Qe = {Matrix::Identity(2, 2), mix};
  s.Qv_bar = s.Qv;
  s.Qe_bar = s.Qe;

  Rng rng(61);
  std::vector<Graph> data;
  for (int i = 0; i < 8; ++i) data.push_back(random_graph(rng, 6, 0.5));
  MpnnConfig cfg;
  cfg.layers = 2;
  cfg.hidden = 12;
  cfg.time_dim = 4;
  cfg.head = MpnnConfig::Head::Denoiser;
  TrainConfig tc;
  tc.lr = 0.1;
  tc.epochs = 250;
  tc.seed = 13;
  TrainResult res = train_denoiser(data, s, cfg, tc);
  CHECK(res.epoch_loss.back() <= res.epoch_loss.front());

  int correct = 0, total = 0;
  for (const Graph& clean : data) {
    Graph noisy = forward_noise(clean, 1, s, rng);
    Graph pred = forward(res.model, RelaxedGraph::from(noisy), 1).distribution().argmax();
    for (int v = 0; v < clean.n(); ++v) {
      correct += pred.node_class(v) == clean.node_class(v);
      ++total;
    }
    for (int p = 0; p < pair_count(clean.n()); ++p) {
      correct += pred.edge_class_at(p) == clean.edge_class_at(p);
      ++total;
    }
  }
  CHECK(static_cast<double>(correct) / total > 0.95);
}

TEST_CASE("the step embedding changes denoiser outputs") {
  MpnnConfig cfg;
  cfg.layers = 2;
  cfg.hidden = 8;
  cfg.time_dim = 4;
  cfg.head = MpnnConfig::Head::Denoiser;
  MpnnModel m = make_model(cfg, 3);
  Graph g = make_graph(5, {{0, 1}, {2, 4}});
  ForwardPass early = forward(m, RelaxedGraph::from(g), 1);
  ForwardPass late = forward(m, RelaxedGraph::from(g), 400);
  CHECK((early.node_probs - late.node_probs).cwiseAbs().maxCoeff() > 1e-9);
}

TEST_CASE("non-finite intermediates raise a training error naming the layer") {
  MpnnConfig cfg;
  cfg.layers = 2;
  cfg.hidden = 4;
  MpnnModel m = make_zero_model(cfg);
  m.w.w_self[0](0, 0) = 1e308;
  m.w.bias[0][0] = 1e308;
  Graph g = make_graph(3, {{0, 1}});
  try {
    forward(m, RelaxedGraph::from(g));
    FAIL("expected TrainingError");
  } catch (const TrainingError& e) {
    CHECK(std::string(e.what()).find("layer 0") != std::string::npos);
  }
}

TEST_CASE("head/config mismatches are rejected") {
  MpnnConfig reg;
  MpnnModel mr = make_model(reg, 1);
  Graph g = make_graph(3, {{0, 1}});
  ForwardPass f = forward(mr, RelaxedGraph::from(g));
  CHECK_THROWS_AS(backward_denoiser(mr, f, g), std::invalid_argument);
  CHECK_THROWS_AS(make_denoiser(mr), std::invalid_argument);
  MpnnConfig bad;
  bad.time_dim = 3;  // must be even
  CHECK_THROWS_AS(make_zero_model(bad), std::invalid_argument);
  CHECK_THROWS_AS(forward(mr, RelaxedGraph::from(g), 5), std::invalid_argument);
}

TEST_CASE("denoiser wrapper emits valid distributions") {
  MpnnConfig cfg;
  cfg.layers = 2;
  cfg.hidden = 6;
  cfg.time_dim = 4;
  cfg.head = MpnnConfig::Head::Denoiser;
  MpnnModel m = make_model(cfg, 17);
  DenoiserFn fn = make_denoiser(m);
  Rng rng(2);
  Graph g = random_graph(rng, 6, 0.5);
  GraphDistribution d = fn(g, 3);  // constructor validates simplex rows
  CHECK(d.n() == 6);
  CHECK(d.node_probs().rowwise().sum().isApproxToConstant(1.0, 1e-9));
}
