#include "copho/diffusion.hpp"

#include <cmath>

namespace copho {

namespace {

double tv(const Eigen::RowVectorXd& p, const Vector& q) {
  return 0.5 * (p.transpose() - q).lpNorm<1>();
}

void check_t(int t, const NoiseSchedule& s, const char* who) {
  if (t < 1 || t > s.T) throw std::invalid_argument(std::string(who) + ": t out of range");
}

}  // namespace

void NoiseSchedule::validate() const {
  auto check_stochastic = [](const std::vector<Matrix>& mats, const char* what) {
    for (const Matrix& m : mats) {
      if ((m.array() < -1e-12).any()) throw ScheduleError(std::string(what) + ": negative entry");
      for (int r = 0; r < m.rows(); ++r)
        if (std::abs(m.row(r).sum() - 1.0) > 1e-9)
          throw ScheduleError(std::string(what) + ": row does not sum to 1");
    }
  };
  if (T < 1 || a < 1 || b < 1) throw ScheduleError("NoiseSchedule: bad dimensions");
  if (static_cast<int>(Qv.size()) != T + 1 || static_cast<int>(Qe.size()) != T + 1 ||
      static_cast<int>(Qv_bar.size()) != T + 1 || static_cast<int>(Qe_bar.size()) != T + 1)
    throw ScheduleError("NoiseSchedule: matrix count mismatch");
  check_stochastic(Qv, "Qv");
  check_stochastic(Qe, "Qe");
  check_stochastic(Qv_bar, "Qv_bar");
  check_stochastic(Qe_bar, "Qe_bar");
  for (int r = 0; r < a; ++r)
    if (tv(Qv_bar[T].row(r), limit_v) > 0.01)
      throw ScheduleError("NoiseSchedule: Q̄_T far from node limit");
  for (int r = 0; r < b; ++r)
    if (tv(Qe_bar[T].row(r), limit_e) > 0.01)
      throw ScheduleError("NoiseSchedule: Q̄_T far from edge limit");
}

NoiseSchedule schedule_from_betas(int T, int a, int b, const Vector& beta) {
  if (T < 1) throw std::invalid_argument("schedule_from_betas: T must be >= 1");
  if (a < 1 || b < 1) throw std::invalid_argument("schedule_from_betas: class counts must be >= 1");
  if (beta.size() != T + 1) throw std::invalid_argument("schedule_from_betas: beta must have T + 1 entries");

  NoiseSchedule s;
  s.T = T;
  s.a = a;
  s.b = b;
  s.limit_v = Vector::Constant(a, 1.0 / a);
  s.limit_e = Vector::Constant(b, 1.0 / b);
  s.beta = beta;

  auto mixer = [](int k, double beta) {
    return (1.0 - beta) * Matrix::Identity(k, k) + (beta / k) * Matrix::Ones(k, k);
  };
  s.Qv.resize(T + 1);
  s.Qe.resize(T + 1);
  s.Qv_bar.resize(T + 1);
  s.Qe_bar.resize(T + 1);
  s.Qv[0] = Matrix::Identity(a, a);
  s.Qe[0] = Matrix::Identity(b, b);
  s.Qv_bar[0] = Matrix::Identity(a, a);
  s.Qe_bar[0] = Matrix::Identity(b, b);
  for (int t = 1; t <= T; ++t) {
    s.Qv[t] = mixer(a, s.beta[t]);
    s.Qe[t] = mixer(b, s.beta[t]);
    s.Qv_bar[t] = s.Qv_bar[t - 1] * s.Qv[t];
    s.Qe_bar[t] = s.Qe_bar[t - 1] * s.Qe[t];
  }
  s.validate();
  return s;
}

NoiseSchedule make_schedule(int T, int a, int b, const std::string& kind) {
  if (T < 1) throw std::invalid_argument("make_schedule: T must be >= 1");
  if (a < 1 || b < 1) throw std::invalid_argument("make_schedule: class counts must be >= 1");
  if (kind != "uniform-cosine") throw std::invalid_argument("make_schedule: unknown kind " + kind);

  Vector beta = Vector::Zero(T + 1);
  constexpr double kOffset = 0.008;
  auto f = [T](double t) {
    const double x = (t / T + kOffset) / (1.0 + kOffset) * M_PI / 2.0;
    const double c = std::cos(x);
    return c * c;
  };
  for (int t = 1; t <= T; ++t) {
    beta[t] = std::clamp(1.0 - f(t) / f(t - 1), 0.0, 0.999);
  }
  return schedule_from_betas(T, a, b, beta);
}

namespace {

Graph corrupt(const Graph& g, const Matrix& Mv, const Matrix& Me, Rng& rng) {
  Graph out(g.n(), g.node_classes(), g.edge_classes());
  for (int v = 0; v < g.n(); ++v)
    out.set_node_class(v, rng.categorical(Mv.row(g.node_class(v)).transpose()));
  for (int e = 0; e < g.edge_class_pairs().size(); ++e) {
    auto [u, v] = pair_nodes(g.n(), e);
    out.set_edge_class(u, v, rng.categorical(Me.row(g.edge_class_at(e)).transpose()));
  }
  return out;
}

}  // namespace

Graph forward_noise(const Graph& g0, int t, const NoiseSchedule& schedule, Rng& rng) {
  check_t(t, schedule, "forward_noise");
  if (g0.node_classes() != schedule.a || g0.edge_classes() != schedule.b)
    throw std::invalid_argument("forward_noise: class-space mismatch");
  return corrupt(g0, schedule.Qv_bar[t], schedule.Qe_bar[t], rng);
}

Graph forward_step(const Graph& g_prev, int t, const NoiseSchedule& schedule, Rng& rng) {
  check_t(t, schedule, "forward_step");
  if (g_prev.node_classes() != schedule.a || g_prev.edge_classes() != schedule.b)
    throw std::invalid_argument("forward_step: class-space mismatch");
  return corrupt(g_prev, schedule.Qv[t], schedule.Qe[t], rng);
}

GraphDistribution reverse_posterior(const Graph& g_next, int t, const GraphDistribution& p0_hat,
                                    const NoiseSchedule& schedule) {
  check_t(t, schedule, "reverse_posterior");
  const int n = g_next.n();
  if (p0_hat.n() != n || p0_hat.node_classes() != schedule.a ||
      p0_hat.edge_classes() != schedule.b || g_next.node_classes() != schedule.a ||
      g_next.edge_classes() != schedule.b)
    throw std::invalid_argument("reverse_posterior: dimension mismatch");

  // prior over step t-1 classes implied by the clean prediction
  Matrix node_prior = p0_hat.node_probs() * schedule.Qv_bar[t - 1];  // n x a
  Matrix edge_prior = p0_hat.edge_probs() * schedule.Qe_bar[t - 1];  // P x b

  Matrix node_post(n, schedule.a);
  for (int v = 0; v < n; ++v) {
    Eigen::RowVectorXd w =
        schedule.Qv[t].row(g_next.node_class(v)).cwiseProduct(node_prior.row(v));
    const double z = w.sum();
    if (!(z > 0.0)) throw GenerationError("reverse_posterior: zero node posterior mass");
    node_post.row(v) = w / z;
  }
  Matrix edge_post(pair_count(n), schedule.b);
  for (int e = 0; e < edge_post.rows(); ++e) {
    Eigen::RowVectorXd w =
        schedule.Qe[t].row(g_next.edge_class_at(e)).cwiseProduct(edge_prior.row(e));
    const double z = w.sum();
    if (!(z > 0.0)) throw GenerationError("reverse_posterior: zero edge posterior mass");
    edge_post.row(e) = w / z;
  }
  return GraphDistribution(std::move(node_post), std::move(edge_post), n);
}

Graph reverse_step(const Graph& g_next, int t, const DenoiserFn& denoiser,
                   const NoiseSchedule& schedule, Rng& rng) {
  return reverse_posterior(g_next, t, denoiser(g_next, t), schedule).sample(rng);
}

Graph sample_limit(const NoiseSchedule& schedule, int n, Rng& rng) {
  Graph g(n, schedule.a, schedule.b);
  for (int v = 0; v < n; ++v) g.set_node_class(v, rng.categorical(schedule.limit_v));
  for (int e = 0; e < pair_count(n); ++e) {
    auto [u, v] = pair_nodes(n, e);
    g.set_edge_class(u, v, rng.categorical(schedule.limit_e));
  }
  return g;
}

Graph sample_unconditional(const DenoiserFn& denoiser, const NoiseSchedule& schedule, int n,
                           Rng& rng) {
  Graph g = sample_limit(schedule, n, rng);
  for (int t = schedule.T; t >= 1; --t) g = reverse_step(g, t, denoiser, schedule, rng);
  return g;
}

}  // namespace copho
