#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "copho/diffusion.hpp"
#include "copho/graph.hpp"

namespace copho {

/// Dense encoding a message-passing net can differentiate through: one row
/// of class weights per node and per unordered pair. Discrete graphs embed
/// at the one-hot point.
struct RelaxedGraph {
  Matrix X;  // n x a
  Matrix E;  // n(n-1)/2 x b
  int n = 0;

  static RelaxedGraph from(const Graph& g);
  static RelaxedGraph from(const GraphDistribution& d);
};

struct MpnnConfig {
  int layers = 6;
  int hidden = 32;
  int node_classes = 2;  // a
  int edge_classes = 2;  // b
  int time_dim = 0;      // sinusoidal step embedding width (0 = no steps)
  bool marker_channels = false;  // two extra input columns flagging endpoint pairs

  enum class Head { Regression, Denoiser };
  Head head = Head::Regression;

  int input_dim() const {
    return node_classes + time_dim + (marker_channels ? 2 : 0);
  }
  void validate() const;
};

/// Flat weight container; shapes derive from MpnnConfig. Also used for
/// gradient accumulators (same shapes).
struct MpnnWeights {
  std::vector<Matrix> w_self;               // [0]: d_in x h, then h x h
  std::vector<std::vector<Matrix>> w_msg;   // per layer, per edge class 1..b-1
  std::vector<Vector> bias;                 // per layer, h
  Vector w_out;                             // regression head, h
  double b_out = 0.0;
  Matrix w_node;  // denoiser node head, h x a
  Vector b_node;
  Matrix w_edge;  // denoiser edge head, (2h + b) x b
  Vector b_edge;

  MpnnWeights& operator+=(const MpnnWeights& o);
  MpnnWeights& operator*=(double s);
  double squared_norm() const;
  bool all_finite() const;
};

struct MpnnModel {
  MpnnConfig config;
  MpnnWeights w;
};

/// Zero-initialized weights with the right shapes.
MpnnModel make_zero_model(const MpnnConfig& cfg);
/// Uniform init in [-s, s] with s = 1/sqrt(fan-in), deterministic in seed.
MpnnModel make_model(const MpnnConfig& cfg, std::uint64_t seed);

/// Activations and gates kept from a forward evaluation so the backward pass
/// can replay it exactly.
struct ForwardPass {
  RelaxedGraph input;
  int t = 0;
  std::vector<std::pair<int, int>> markers;
  Vector act;              // node activity gates, n
  Matrix features;         // input row per node (classes | time | markers)
  std::vector<Matrix> H;   // layer activations, H[0] = features
  std::vector<Matrix> gates;  // one n x n symmetric gate per edge class >= 1

  double value = 0.0;  // regression head output
  Matrix node_probs;   // denoiser head, n x a rows on the simplex
  Matrix edge_probs;   // denoiser head, P x b

  GraphDistribution distribution() const;  // denoiser heads as a distribution
};

/// Evaluates the network. Messages along a pair are gated by the product of
/// "edge present" probability (1 - P[class 0]) and both endpoints' activity,
/// so the evaluation is differentiable in every X/E entry. Throws
/// TrainingError (with the layer index) on non-finite intermediates.
ForwardPass forward(const MpnnModel& m, const RelaxedGraph& g, int t = 0,
                    const std::vector<std::pair<int, int>>& markers = {});

/// Loss gradient with respect to the relaxed input entries.
struct GradientField {
  Matrix node_grad;  // n x a
  Matrix edge_grad;  // P x b
};

struct Gradients {
  double loss = 0.0;
  GradientField field;
  MpnnWeights weights;  // same shapes as the model's
};

/// Reverse-mode pass for the squared-error regression loss (value - y)^2.
Gradients backward_regression(const MpnnModel& m, const ForwardPass& f, double y);

/// Reverse-mode pass for the denoiser: mean cross-entropy of the clean
/// graph's classes under the predicted distributions.
Gradients backward_denoiser(const MpnnModel& m, const ForwardPass& f, const Graph& clean);

/// Gradient of (phi(g) - y)^2 with respect to the one-hot encoding of g.
GradientField grad_wrt_graph(const MpnnModel& m, const Graph& g, double y,
                             const std::vector<std::pair<int, int>>& markers = {});

struct TrainConfig {
  double lr = 0.05;
  int epochs = 100;
  int batch_size = 8;
  std::uint64_t seed = 0;
  enum class Loss { SquaredError, CrossEntropy };
  Loss loss = Loss::SquaredError;
  void validate() const;
};

struct RegressionExample {
  Graph g;
  std::vector<std::pair<int, int>> markers;  // empty unless endpoint-conditioned
  double y = 0.0;
};

struct TrainResult {
  MpnnModel model;
  std::vector<double> epoch_loss;
};

/// Plain SGD (gradient clipped at norm 10) on the squared-error objective.
/// Deterministic in cfg.seed. Throws TrainingError on divergence.
TrainResult train_regressor(const std::vector<RegressionExample>& data, const MpnnConfig& mcfg,
                            const TrainConfig& cfg);

/// Denoiser training: per example, draw a step t, corrupt the clean graph
/// with the schedule, and minimize clean-class cross-entropy.
TrainResult train_denoiser(const std::vector<Graph>& data, const NoiseSchedule& schedule,
                           const MpnnConfig& mcfg, const TrainConfig& cfg);

/// Wraps a denoiser-headed model as the reverse-process predictor.
DenoiserFn make_denoiser(const MpnnModel& m);

}  // namespace copho
