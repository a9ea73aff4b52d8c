#include "copho/neural.hpp"

#include <cmath>

namespace copho {

RelaxedGraph RelaxedGraph::from(const Graph& g) {
  RelaxedGraph r;
  r.n = g.n();
  r.X = Matrix::Zero(g.n(), g.node_classes());
  for (int v = 0; v < g.n(); ++v) r.X(v, g.node_class(v)) = 1.0;
  r.E = Matrix::Zero(pair_count(g.n()), g.edge_classes());
  for (int e = 0; e < r.E.rows(); ++e) r.E(e, g.edge_class_at(e)) = 1.0;
  return r;
}

RelaxedGraph RelaxedGraph::from(const GraphDistribution& d) {
  return RelaxedGraph{d.node_probs(), d.edge_probs(), d.n()};
}

void MpnnConfig::validate() const {
  if (layers < 1 || hidden < 1) throw std::invalid_argument("MpnnConfig: bad depth/width");
  if (node_classes < 1 || edge_classes < 1)
    throw std::invalid_argument("MpnnConfig: class counts must be positive");
  if (time_dim < 0 || time_dim % 2 != 0)
    throw std::invalid_argument("MpnnConfig: time_dim must be even and nonnegative");
}

void TrainConfig::validate() const {
  if (!(lr > 0.0)) throw std::invalid_argument("TrainConfig: learning rate must be positive");
  if (epochs < 1 || batch_size < 1)
    throw std::invalid_argument("TrainConfig: epochs and batch size must be positive");
}

namespace {

void zip(MpnnWeights& a, const MpnnWeights* b, const std::function<void(Matrix&, const Matrix*)>& fm,
         const std::function<void(Vector&, const Vector*)>& fv, const double* b_out_other,
         const std::function<void(double&, const double*)>& fs) {
  for (std::size_t l = 0; l < a.w_self.size(); ++l) {
    fm(a.w_self[l], b ? &b->w_self[l] : nullptr);
    for (std::size_t c = 0; c < a.w_msg[l].size(); ++c)
      fm(a.w_msg[l][c], b ? &b->w_msg[l][c] : nullptr);
    fv(a.bias[l], b ? &b->bias[l] : nullptr);
  }
  fv(a.w_out, b ? &b->w_out : nullptr);
  fs(a.b_out, b_out_other);
  fm(a.w_node, b ? &b->w_node : nullptr);
  fv(a.b_node, b ? &b->b_node : nullptr);
  fm(a.w_edge, b ? &b->w_edge : nullptr);
  fv(a.b_edge, b ? &b->b_edge : nullptr);
}

}  // namespace

MpnnWeights& MpnnWeights::operator+=(const MpnnWeights& o) {
  zip(
      *this, &o, [](Matrix& m, const Matrix* x) { if (m.size()) m += *x; },
      [](Vector& v, const Vector* x) { if (v.size()) v += *x; }, &o.b_out,
      [](double& s, const double* x) { s += *x; });
  return *this;
}

MpnnWeights& MpnnWeights::operator*=(double k) {
  zip(
      *this, nullptr, [k](Matrix& m, const Matrix*) { m *= k; },
      [k](Vector& v, const Vector*) { v *= k; }, nullptr,
      [k](double& s, const double*) { s *= k; });
  return *this;
}

double MpnnWeights::squared_norm() const {
  double n2 = 0.0;
  auto& self = const_cast<MpnnWeights&>(*this);
  zip(
      self, nullptr, [&n2](Matrix& m, const Matrix*) { n2 += m.squaredNorm(); },
      [&n2](Vector& v, const Vector*) { n2 += v.squaredNorm(); }, nullptr,
      [&n2](double& s, const double*) { n2 += s * s; });
  return n2;
}

bool MpnnWeights::all_finite() const {
  bool ok = true;
  auto& self = const_cast<MpnnWeights&>(*this);
  zip(
      self, nullptr, [&ok](Matrix& m, const Matrix*) { ok = ok && m.allFinite(); },
      [&ok](Vector& v, const Vector*) { ok = ok && v.allFinite(); }, nullptr,
      [&ok](double& s, const double*) { ok = ok && std::isfinite(s); });
  return ok;
}

namespace {

MpnnWeights shaped_weights(const MpnnConfig& cfg) {
  MpnnWeights w;
  const int h = cfg.hidden;
  const int msg_classes = cfg.edge_classes - 1;
  for (int l = 0; l < cfg.layers; ++l) {
    const int din = l == 0 ? cfg.input_dim() : h;
    w.w_self.push_back(Matrix::Zero(din, h));
    w.w_msg.emplace_back();
    for (int c = 0; c < msg_classes; ++c) w.w_msg.back().push_back(Matrix::Zero(din, h));
    w.bias.push_back(Vector::Zero(h));
  }
  if (cfg.head == MpnnConfig::Head::Regression) {
    w.w_out = Vector::Zero(h);
  } else {
    w.w_node = Matrix::Zero(h, cfg.node_classes);
    w.b_node = Vector::Zero(cfg.node_classes);
    w.w_edge = Matrix::Zero(2 * h + cfg.edge_classes, cfg.edge_classes);
    w.b_edge = Vector::Zero(cfg.edge_classes);
  }
  return w;
}

}  // namespace

MpnnModel make_zero_model(const MpnnConfig& cfg) {
  cfg.validate();
  return MpnnModel{cfg, shaped_weights(cfg)};
}

MpnnModel make_model(const MpnnConfig& cfg, std::uint64_t seed) {
  MpnnModel m = make_zero_model(cfg);
  Rng rng(Rng(seed).split("mpnn-init").seed());
  auto fill = [&rng](Matrix& w) {
    if (!w.size()) return;
    const double s = 1.0 / std::sqrt(static_cast<double>(w.rows()));
    for (int i = 0; i < w.rows(); ++i)
      for (int j = 0; j < w.cols(); ++j) w(i, j) = (2.0 * rng.uniform() - 1.0) * s;
  };
  for (std::size_t l = 0; l < m.w.w_self.size(); ++l) {
    fill(m.w.w_self[l]);
    for (Matrix& wm : m.w.w_msg[l]) fill(wm);
  }
  if (m.config.head == MpnnConfig::Head::Regression) {
    const double s = 1.0 / std::sqrt(static_cast<double>(m.config.hidden));
    for (int i = 0; i < m.w.w_out.size(); ++i) m.w.w_out[i] = (2.0 * rng.uniform() - 1.0) * s;
  } else {
    fill(m.w.w_node);
    fill(m.w.w_edge);
  }
  return m;
}

namespace {

Vector time_embedding(int t, int dim) {
  Vector e(dim);
  for (int i = 0; i < dim / 2; ++i) {
    const double freq = std::pow(10000.0, -2.0 * i / dim);
    e[2 * i] = std::sin(t * freq);
    e[2 * i + 1] = std::cos(t * freq);
  }
  return e;
}

Matrix row_softmax(const Matrix& logits) {
  Matrix p(logits.rows(), logits.cols());
  for (int r = 0; r < logits.rows(); ++r) {
    Eigen::RowVectorXd z = logits.row(r).array() - logits.row(r).maxCoeff();
    Eigen::RowVectorXd e = z.array().exp();
    p.row(r) = e / e.sum();
  }
  return p;
}

// Edge-head input per pair (u, v): [H_u + H_v | H_u .* H_v | E row].
Matrix edge_features(const Matrix& HL, const Matrix& E, int n) {
  const int h = static_cast<int>(HL.cols());
  Matrix F(pair_count(n), 2 * h + E.cols());
  for (int p = 0; p < F.rows(); ++p) {
    auto [u, v] = pair_nodes(n, p);
    F.block(p, 0, 1, h) = HL.row(u) + HL.row(v);
    F.block(p, h, 1, h) = HL.row(u).cwiseProduct(HL.row(v));
    F.block(p, 2 * h, 1, E.cols()) = E.row(p);
  }
  return F;
}

}  // namespace

GraphDistribution ForwardPass::distribution() const {
  return GraphDistribution(node_probs, edge_probs, input.n);
}

ForwardPass forward(const MpnnModel& m, const RelaxedGraph& g, int t,
                    const std::vector<std::pair<int, int>>& markers) {
  const MpnnConfig& cfg = m.config;
  const int n = g.n;
  const int a = cfg.node_classes, b = cfg.edge_classes;
  if (g.X.rows() != n || g.X.cols() != a || g.E.rows() != pair_count(n) || g.E.cols() != b)
    throw std::invalid_argument("forward: input shape mismatch");
  if (n < 1) throw std::invalid_argument("forward: empty graph");
  if (t != 0 && cfg.time_dim == 0)
    throw std::invalid_argument("forward: model has no step embedding");
  if (!markers.empty() && !cfg.marker_channels)
    throw std::invalid_argument("forward: model has no marker channels");

  ForwardPass f;
  f.input = g;
  f.t = t;
  f.markers = markers;

  f.act = a >= 2 ? Vector(1.0 - g.X.col(a - 1).array()) : Vector(Vector::Ones(n));

  f.gates.resize(b - 1);
  for (int c = 0; c < b - 1; ++c) {
    Matrix G = Matrix::Zero(n, n);
    for (int p = 0; p < g.E.rows(); ++p) {
      auto [u, v] = pair_nodes(n, p);
      const double w = g.E(p, c + 1) * f.act[u] * f.act[v];
      G(u, v) = G(v, u) = w;
    }
    f.gates[c] = std::move(G);
  }

  f.features = Matrix::Zero(n, cfg.input_dim());
  f.features.leftCols(a) = g.X;
  int col = a;
  if (cfg.time_dim > 0) {
    const Vector emb = time_embedding(t, cfg.time_dim);
    f.features.middleCols(col, cfg.time_dim) = emb.transpose().replicate(n, 1);
    col += cfg.time_dim;
  }
  if (cfg.marker_channels) {
    for (auto [s, d] : markers) {
      if (s < 0 || s >= n || d < 0 || d >= n)
        throw std::invalid_argument("forward: marker node out of range");
      f.features(s, col) = 1.0;
      f.features(d, col + 1) = 1.0;
    }
  }

  f.H.reserve(cfg.layers + 1);
  f.H.push_back(f.features);
  for (int l = 0; l < cfg.layers; ++l) {
    Matrix Z = f.H.back() * m.w.w_self[l];
    for (int c = 0; c < b - 1; ++c) Z += f.gates[c] * (f.H.back() * m.w.w_msg[l][c]);
    Z.rowwise() += m.w.bias[l].transpose();
    if (!Z.allFinite())
      throw TrainingError("forward: non-finite pre-activation at layer " + std::to_string(l));
    f.H.push_back(Z.array().tanh().matrix());
  }

  if (cfg.head == MpnnConfig::Head::Regression) {
    const double s = std::max(f.act.sum(), 1e-12);
    const Vector z = (f.H.back().transpose() * f.act) / s;
    f.value = z.dot(m.w.w_out) + m.w.b_out;
    if (!std::isfinite(f.value)) throw TrainingError("forward: non-finite readout");
  } else {
    Matrix node_logits = f.H.back() * m.w.w_node;
    node_logits.rowwise() += m.w.b_node.transpose();
    Matrix edge_logits = edge_features(f.H.back(), g.E, n) * m.w.w_edge;
    edge_logits.rowwise() += m.w.b_edge.transpose();
    if (!node_logits.allFinite() || !edge_logits.allFinite())
      throw TrainingError("forward: non-finite head logits");
    f.node_probs = row_softmax(node_logits);
    f.edge_probs = row_softmax(edge_logits);
  }
  return f;
}

namespace {

// Shared trunk backward: propagates dH (gradient on H_L) and dact through
// the message-passing layers and gates into the relaxed input and weights.
void backward_trunk(const MpnnModel& m, const ForwardPass& f, Matrix dH, Vector dact,
                    Gradients& out) {
  const MpnnConfig& cfg = m.config;
  const int n = f.input.n;
  const int a = cfg.node_classes, b = cfg.edge_classes;

  std::vector<Matrix> dGates(b - 1, Matrix::Zero(n, n));
  for (int l = cfg.layers - 1; l >= 0; --l) {
    const Matrix& Hn = f.H[l + 1];
    const Matrix& Hp = f.H[l];
    const Matrix dZ = dH.cwiseProduct((1.0 - Hn.array().square()).matrix());
    out.weights.bias[l] += dZ.colwise().sum().transpose();
    out.weights.w_self[l] += Hp.transpose() * dZ;
    Matrix dHp = dZ * m.w.w_self[l].transpose();
    for (int c = 0; c < b - 1; ++c) {
      const Matrix& G = f.gates[c];
      out.weights.w_msg[l][c] += (G * Hp).transpose() * dZ;
      dHp += G * (dZ * m.w.w_msg[l][c].transpose());
      dGates[c] += dZ * (Hp * m.w.w_msg[l][c]).transpose();
    }
    dH = std::move(dHp);
  }

  out.field.node_grad.leftCols(a) += dH.leftCols(a);

  for (int p = 0; p < f.input.E.rows(); ++p) {
    auto [u, v] = pair_nodes(n, p);
    for (int c = 0; c < b - 1; ++c) {
      const double both = dGates[c](u, v) + dGates[c](v, u);
      out.field.edge_grad(p, c + 1) += both * f.act[u] * f.act[v];
      dact[u] += both * f.input.E(p, c + 1) * f.act[v];
      dact[v] += both * f.input.E(p, c + 1) * f.act[u];
    }
  }
  if (a >= 2) out.field.node_grad.col(a - 1) -= dact;

  if (!out.field.node_grad.allFinite() || !out.field.edge_grad.allFinite() ||
      !out.weights.all_finite())
    throw TrainingError("backward: non-finite gradients");
}

Gradients zero_gradients(const MpnnModel& m, const ForwardPass& f) {
  Gradients g;
  g.field.node_grad = Matrix::Zero(f.input.n, m.config.node_classes);
  g.field.edge_grad = Matrix::Zero(f.input.E.rows(), m.config.edge_classes);
  g.weights = shaped_weights(m.config);
  return g;
}

}  // namespace

Gradients backward_regression(const MpnnModel& m, const ForwardPass& f, double y) {
  if (m.config.head != MpnnConfig::Head::Regression)
    throw std::invalid_argument("backward_regression: model has no regression head");
  Gradients out = zero_gradients(m, f);
  const double err = f.value - y;
  out.loss = err * err;

  const double dvalue = 2.0 * err;
  const double s = std::max(f.act.sum(), 1e-12);
  const Vector z = (f.H.back().transpose() * f.act) / s;
  out.weights.w_out += dvalue * z;
  out.weights.b_out += dvalue;
  const Vector dz = dvalue * m.w.w_out;
  Matrix dH = (f.act / s) * dz.transpose();
  Vector dact = (f.H.back() * dz - Vector::Constant(f.input.n, dz.dot(z))) / s;
  backward_trunk(m, f, std::move(dH), std::move(dact), out);
  return out;
}

Gradients backward_denoiser(const MpnnModel& m, const ForwardPass& f, const Graph& clean) {
  if (m.config.head != MpnnConfig::Head::Denoiser)
    throw std::invalid_argument("backward_denoiser: model has no denoiser head");
  const int n = f.input.n;
  const int a = m.config.node_classes, b = m.config.edge_classes;
  if (clean.n() != n || clean.node_classes() != a || clean.edge_classes() != b)
    throw std::invalid_argument("backward_denoiser: clean graph shape mismatch");

  Gradients out = zero_gradients(m, f);
  const int P = static_cast<int>(f.input.E.rows());
  const double scale = 1.0 / (n + P);

  Matrix dnode = f.node_probs;
  for (int v = 0; v < n; ++v) {
    const int c = clean.node_class(v);
    out.loss -= scale * std::log(std::max(f.node_probs(v, c), 1e-300));
    dnode(v, c) -= 1.0;
  }
  Matrix dedge = f.edge_probs;
  for (int p = 0; p < P; ++p) {
    const int c = clean.edge_class_at(p);
    out.loss -= scale * std::log(std::max(f.edge_probs(p, c), 1e-300));
    dedge(p, c) -= 1.0;
  }
  dnode *= scale;
  dedge *= scale;

  const Matrix& HL = f.H.back();
  const int h = m.config.hidden;

  out.weights.w_node += HL.transpose() * dnode;
  out.weights.b_node += dnode.colwise().sum().transpose();
  Matrix dH = dnode * m.w.w_node.transpose();

  const Matrix F = edge_features(HL, f.input.E, n);
  out.weights.w_edge += F.transpose() * dedge;
  out.weights.b_edge += dedge.colwise().sum().transpose();
  const Matrix dF = dedge * m.w.w_edge.transpose();
  for (int p = 0; p < P; ++p) {
    auto [u, v] = pair_nodes(n, p);
    dH.row(u) += dF.block(p, 0, 1, h) + dF.block(p, h, 1, h).cwiseProduct(HL.row(v));
    dH.row(v) += dF.block(p, 0, 1, h) + dF.block(p, h, 1, h).cwiseProduct(HL.row(u));
    out.field.edge_grad.row(p) += dF.block(p, 2 * h, 1, b);
  }

  backward_trunk(m, f, std::move(dH), Vector::Zero(n), out);
  return out;
}

GradientField grad_wrt_graph(const MpnnModel& m, const Graph& g, double y,
                             const std::vector<std::pair<int, int>>& markers) {
  const ForwardPass f = forward(m, RelaxedGraph::from(g), 0, markers);
  return backward_regression(m, f, y).field;
}

namespace {

std::vector<int> shuffled_indices(int n, Rng& rng) {
  std::vector<int> idx(n);
  for (int i = 0; i < n; ++i) idx[i] = i;
  for (int i = n - 1; i > 0; --i) std::swap(idx[i], idx[rng.uniform_int(i + 1)]);
  return idx;
}

void sgd_step(MpnnModel& model, MpnnWeights grad, double count, double lr) {
  grad *= 1.0 / count;
  const double norm = std::sqrt(grad.squared_norm());
  constexpr double kClip = 10.0;
  if (norm > kClip) grad *= kClip / norm;
  grad *= -lr;
  model.w += grad;
}

}  // namespace

TrainResult train_regressor(const std::vector<RegressionExample>& data, const MpnnConfig& mcfg,
                            const TrainConfig& cfg) {
  mcfg.validate();
  cfg.validate();
  if (data.empty()) throw std::invalid_argument("train_regressor: empty dataset");
  if (cfg.loss != TrainConfig::Loss::SquaredError)
    throw std::invalid_argument("train_regressor: continuous targets use squared error");
  if (mcfg.head != MpnnConfig::Head::Regression)
    throw std::invalid_argument("train_regressor: config head must be Regression");

  TrainResult result{make_model(mcfg, cfg.seed), {}};
  Rng rng = Rng(cfg.seed).split("train-regressor");
  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    const auto order = shuffled_indices(static_cast<int>(data.size()), rng);
    double epoch_loss = 0.0;
    for (std::size_t start = 0; start < order.size(); start += cfg.batch_size) {
      MpnnWeights grad = shaped_weights(mcfg);
      const std::size_t end = std::min(order.size(), start + cfg.batch_size);
      for (std::size_t i = start; i < end; ++i) {
        const RegressionExample& ex = data[order[i]];
        const ForwardPass f = forward(result.model, RelaxedGraph::from(ex.g), 0, ex.markers);
        Gradients gr = backward_regression(result.model, f, ex.y);
        grad += gr.weights;
        epoch_loss += gr.loss;
      }
      sgd_step(result.model, std::move(grad), static_cast<double>(end - start), cfg.lr);
    }
    epoch_loss /= static_cast<double>(data.size());
    if (!std::isfinite(epoch_loss)) throw TrainingError("train_regressor: loss diverged");
    result.epoch_loss.push_back(epoch_loss);
  }
  return result;
}

TrainResult train_denoiser(const std::vector<Graph>& data, const NoiseSchedule& schedule,
                           const MpnnConfig& mcfg, const TrainConfig& cfg) {
  mcfg.validate();
  cfg.validate();
  if (data.empty()) throw std::invalid_argument("train_denoiser: empty dataset");
  if (mcfg.head != MpnnConfig::Head::Denoiser)
    throw std::invalid_argument("train_denoiser: config head must be Denoiser");
  if (mcfg.node_classes != schedule.a || mcfg.edge_classes != schedule.b)
    throw std::invalid_argument("train_denoiser: class spaces disagree with the schedule");
  for (const Graph& g : data)
    if (g.node_classes() != schedule.a || g.edge_classes() != schedule.b)
      throw std::invalid_argument("train_denoiser: graph class spaces disagree");

  TrainResult result{make_model(mcfg, cfg.seed), {}};
  Rng rng = Rng(cfg.seed).split("train-denoiser");
  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    const auto order = shuffled_indices(static_cast<int>(data.size()), rng);
    double epoch_loss = 0.0;
    for (std::size_t start = 0; start < order.size(); start += cfg.batch_size) {
      MpnnWeights grad = shaped_weights(mcfg);
      const std::size_t end = std::min(order.size(), start + cfg.batch_size);
      for (std::size_t i = start; i < end; ++i) {
        const Graph& clean = data[order[i]];
        const int t = 1 + rng.uniform_int(schedule.T);
        const Graph noisy = forward_noise(clean, t, schedule, rng);
        const ForwardPass f = forward(result.model, RelaxedGraph::from(noisy), t);
        Gradients gr = backward_denoiser(result.model, f, clean);
        grad += gr.weights;
        epoch_loss += gr.loss;
      }
      sgd_step(result.model, std::move(grad), static_cast<double>(end - start), cfg.lr);
    }
    epoch_loss /= static_cast<double>(data.size());
    if (!std::isfinite(epoch_loss)) throw TrainingError("train_denoiser: loss diverged");
    result.epoch_loss.push_back(epoch_loss);
  }
  return result;
}

DenoiserFn make_denoiser(const MpnnModel& m) {
  if (m.config.head != MpnnConfig::Head::Denoiser)
    throw std::invalid_argument("make_denoiser: model has no denoiser head");
  return [m](const Graph& g, int t) {
    return forward(m, RelaxedGraph::from(g), t).distribution();
  };
}

}  // namespace copho
