#pragma once

#include <cmath>
#include <random>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "skylink/common.hpp"

namespace skylink {

struct LayerParams {
  Eigen::MatrixXd weights;  // out x in
  Eigen::VectorXd biases;   // out

  friend bool operator==(const LayerParams& a, const LayerParams& b) {
    return a.weights.rows() == b.weights.rows() && a.weights.cols() == b.weights.cols() &&
           a.weights == b.weights && a.biases == b.biases;
  }
};

// Same shape as a network's parameters; used for gradients and Adam moments.
using ParamSet = std::vector<LayerParams>;

inline ParamSet zeros_like(const ParamSet& p) {
  ParamSet z(p.size());
  for (std::size_t i = 0; i < p.size(); ++i) {
    z[i].weights = Eigen::MatrixXd::Zero(p[i].weights.rows(), p[i].weights.cols());
    z[i].biases = Eigen::VectorXd::Zero(p[i].biases.size());
  }
  return z;
}

// Fully connected rectifier network with an identity output layer.
class QNetwork {
 public:
  QNetwork() = default;

  // widths = {input, hidden..., output}. All parameters start at zero.
  explicit QNetwork(std::vector<int> widths) : widths_(std::move(widths)) {
    if (widths_.size() < 2) throw ShapeError("network needs at least input and output widths");
    for (int w : widths_)
      if (w <= 0) throw ShapeError("layer widths must be positive");
    for (std::size_t i = 0; i + 1 < widths_.size(); ++i) {
      layers_.push_back({Eigen::MatrixXd::Zero(widths_[i + 1], widths_[i]),
                         Eigen::VectorXd::Zero(widths_[i + 1])});
    }
  }

  // Uniform(-1/sqrt(fan_in), 1/sqrt(fan_in)) for weights and biases.
  template <typename Rng>
  QNetwork(std::vector<int> widths, Rng& rng) : QNetwork(std::move(widths)) {
    for (auto& l : layers_) {
      const double bound = 1.0 / std::sqrt(static_cast<double>(l.weights.cols()));
      std::uniform_real_distribution<double> u(-bound, bound);
      for (Eigen::Index c = 0; c < l.weights.cols(); ++c)
        for (Eigen::Index r = 0; r < l.weights.rows(); ++r) l.weights(r, c) = u(rng);
      for (Eigen::Index r = 0; r < l.biases.size(); ++r) l.biases[r] = u(rng);
    }
  }

  const std::vector<int>& widths() const { return widths_; }
  int input_size() const { return widths_.front(); }
  int output_size() const { return widths_.back(); }
  ParamSet& params() { return layers_; }
  const ParamSet& params() const { return layers_; }

  friend bool operator==(const QNetwork&, const QNetwork&) = default;

  Eigen::VectorXd forward(const Eigen::VectorXd& obs) const {
    if (obs.size() != input_size())
      throw ShapeError("forward: observation has " + std::to_string(obs.size()) +
                       " values, network expects " + std::to_string(input_size()));
    Eigen::VectorXd a = obs;
    for (std::size_t i = 0; i < layers_.size(); ++i) {
      Eigen::VectorXd z = layers_[i].weights * a + layers_[i].biases;
      a = (i + 1 < layers_.size()) ? Eigen::VectorXd(z.cwiseMax(0.0)) : z;
    }
    return a;
  }

  // Column-per-sample batch forward.
  Eigen::MatrixXd forward_batch(const Eigen::MatrixXd& obs) const {
    std::vector<Eigen::MatrixXd> acts;
    return forward_batch(obs, acts);
  }

  // Also returns the input to every layer (acts[0] = obs) for backprop.
  Eigen::MatrixXd forward_batch(const Eigen::MatrixXd& obs,
                                std::vector<Eigen::MatrixXd>& acts) const {
    if (obs.rows() != input_size()) throw ShapeError("forward_batch: input width mismatch");
    acts.clear();
    acts.push_back(obs);
    for (std::size_t i = 0; i < layers_.size(); ++i) {
      Eigen::MatrixXd z = layers_[i].weights * acts.back();
      z.colwise() += layers_[i].biases;
      if (i + 1 < layers_.size()) {
        acts.push_back(z.cwiseMax(0.0));
      } else {
        return z;
      }
    }
    return acts.back();
  }

 private:
  std::vector<int> widths_;
  ParamSet layers_;
};

inline std::vector<int> mlp_widths(int inputs, int hidden_layers, int hidden_width, int outputs) {
  std::vector<int> w{inputs};
  for (int i = 0; i < hidden_layers; ++i) w.push_back(hidden_width);
  w.push_back(outputs);
  return w;
}

// Gradient of mean_i (targets_i - Q(obs_i, actions_i))^2 over the batch
// columns. Writes the mean squared error to `loss` when non-null.
inline ParamSet backward_batch(const QNetwork& net, const Eigen::MatrixXd& obs,
                               std::span<const int> actions, std::span<const double> targets,
                               double* loss = nullptr) {
  const Eigen::Index batch = obs.cols();
  if (static_cast<Eigen::Index>(actions.size()) != batch ||
      static_cast<Eigen::Index>(targets.size()) != batch)
    throw ShapeError("backward: batch size mismatch");
  std::vector<Eigen::MatrixXd> acts;
  const Eigen::MatrixXd q = net.forward_batch(obs, acts);
  Eigen::MatrixXd delta = Eigen::MatrixXd::Zero(q.rows(), batch);
  double sq = 0.0;
  for (Eigen::Index b = 0; b < batch; ++b) {
    const int a = actions[b];
    if (a < 0 || a >= q.rows()) throw ShapeError("backward: action index out of range");
    const double err = targets[b] - q(a, b);
    sq += err * err;
    delta(a, b) = -2.0 * err / static_cast<double>(batch);
  }
  if (loss) *loss = sq / static_cast<double>(batch);

  const ParamSet& layers = net.params();
  ParamSet grads(layers.size());
  Eigen::MatrixXd back;
  for (std::size_t i = layers.size(); i-- > 0;) {
    grads[i].weights.resize(layers[i].weights.rows(), layers[i].weights.cols());
    grads[i].weights.noalias() = delta * acts[i].transpose();
    grads[i].biases = delta.rowwise().sum();
    if (i > 0) {
      back.resize(layers[i].weights.cols(), batch);
      back.noalias() = layers[i].weights.transpose() * delta;
      delta = (acts[i].array() > 0.0).select(back, 0.0);
    }
  }
  return grads;
}

// Gradient of (target - Q(obs, action))^2 for a single sample.
inline ParamSet backward(const QNetwork& net, const Eigen::VectorXd& obs, int action,
                         double target) {
  if (obs.size() != net.input_size()) throw ShapeError("backward: input width mismatch");
  const int a[1] = {action};
  const double t[1] = {target};
  return backward_batch(net, obs, a, t);
}

struct AdamState {
  ParamSet m;
  ParamSet v;
  long long step = 0;
  double learning_rate = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;

  friend bool operator==(const AdamState&, const AdamState&) = default;
};

inline AdamState make_adam(const QNetwork& net, double lr = 1e-3, double beta1 = 0.9,
                           double beta2 = 0.999, double eps = 1e-8) {
  AdamState s;
  s.m = zeros_like(net.params());
  s.v = zeros_like(net.params());
  s.learning_rate = lr;
  s.beta1 = beta1;
  s.beta2 = beta2;
  s.epsilon = eps;
  return s;
}

// One bias-corrected Adam update, applied elementwise.
inline void adam_step(ParamSet& params, const ParamSet& grads, AdamState& state) {
  if (params.size() != grads.size() || params.size() != state.m.size())
    throw ShapeError("adam: parameter/gradient layer count mismatch");
  ++state.step;
  const double c1 = 1.0 - std::pow(state.beta1, static_cast<double>(state.step));
  const double c2 = 1.0 - std::pow(state.beta2, static_cast<double>(state.step));
  const double lr = state.learning_rate;
  const double b1 = state.beta1;
  const double b2 = state.beta2;
  const double eps = state.epsilon;
  auto update = [&](auto& p, const auto& g, auto& m, auto& v) {
    if (p.size() != g.size()) throw ShapeError("adam: parameter/gradient shape mismatch");
    m = b1 * m + (1.0 - b1) * g;
    v = b2 * v + (1.0 - b2) * g.cwiseProduct(g);
    p.array() -= lr * (m.array() / c1) / ((v.array() / c2).sqrt() + eps);
  };
  for (std::size_t i = 0; i < params.size(); ++i) {
    update(params[i].weights, grads[i].weights, state.m[i].weights, state.v[i].weights);
    update(params[i].biases, grads[i].biases, state.m[i].biases, state.v[i].biases);
  }
}

}  // namespace skylink
