#pragma once

#include <cstdint>
#include <optional>
#include <random>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "skylink/channel.hpp"
#include "skylink/mlp.hpp"
#include "skylink/replay.hpp"

namespace skylink {

struct DqnHyperparams {
  int hidden_layers = 4;
  int hidden_width = 128;
  double learning_rate = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double adam_epsilon = 1e-8;
  double epsilon = 0.4;  // exploration rate while training
  double gamma = 1.0;
  int batch_size = 32;
  int memory_capacity = 100000;
  int warmup = 1000;             // transitions stored before the first update
  int target_sync_period = 200;  // environment steps between target syncs
  // Stopping rule: at least `min_gradient_steps` updates and a flat moving
  // average of episode returns over windows in which every episode reached
  // the destination, or the `max_env_steps` budget.
  long long min_gradient_steps = 25000;
  long long max_env_steps = 30000;
  int plateau_window = 20;
  double plateau_tolerance = 0.05;
  // Weight of the potential-based shaping term added to stored rewards,
  // w * (phi(s') - phi(s)) with phi = -(moves left to the destination).
  double shaping_weight = 1.0;
  // Every `selection_period` episodes the greedy network is scored on
  // `selection_episodes` fixed rollouts; training returns the best one.
  int selection_period = 10;
  int selection_episodes = 20;
};

inline int greedy_action(const QNetwork& net, const Eigen::VectorXd& obs) {
  const Eigen::VectorXd q = net.forward(obs);
  return argmax_lowest(std::span<const double>(q.data(), static_cast<std::size_t>(q.size())));
}

template <typename Rng>
int select_action(const QNetwork& net, const Eigen::VectorXd& obs, double epsilon, Rng& rng) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  if (u(rng) < epsilon) {
    std::uniform_int_distribution<int> pick(0, net.output_size() - 1);
    return pick(rng);
  }
  return greedy_action(net, obs);
}

// Double-Q bootstrap target: the primary network picks the next action, the
// target network values it.
inline double ddqn_target(const QNetwork& primary, const QNetwork& target, const Transition& t,
                          double gamma) {
  if (t.terminal) return t.reward;
  const int a = greedy_action(primary, t.next_obs);
  return t.reward + gamma * target.forward(t.next_obs)[a];
}

inline void sync_target(const QNetwork& primary, QNetwork& target) {
  if (primary.widths() != target.widths()) throw ShapeError("sync_target: architecture mismatch");
  target = primary;
}

// One minibatch update; returns the mean squared TD error before the update.
template <typename Rng>
double train_step(QNetwork& primary, const QNetwork& target, const ReplayMemory& memory,
                  int batch_size, AdamState& adam, double gamma, Rng& rng) {
  if (batch_size <= 0 || memory.size() < static_cast<std::size_t>(batch_size))
    throw Error("train_step: insufficient samples in replay memory");
  const auto idx = memory.sample_indices(static_cast<std::size_t>(batch_size), rng);
  const int in = primary.input_size();
  Eigen::MatrixXd obs(in, batch_size), next(in, batch_size);
  std::vector<int> actions(batch_size);
  for (int b = 0; b < batch_size; ++b) {
    const Transition& t = memory[idx[b]];
    obs.col(b) = t.obs;
    next.col(b) = t.next_obs;
    actions[b] = t.action;
  }
  const Eigen::MatrixXd q_next_primary = primary.forward_batch(next);
  const Eigen::MatrixXd q_next_target = target.forward_batch(next);
  std::vector<double> targets(batch_size);
  for (int b = 0; b < batch_size; ++b) {
    const Transition& t = memory[idx[b]];
    if (t.terminal) {
      targets[b] = t.reward;
      continue;
    }
    const auto col = q_next_primary.col(b);
    const int a = argmax_lowest(std::span<const double>(col.data(), col.size()));
    targets[b] = t.reward + gamma * q_next_target(a, b);
  }
  double loss = 0.0;
  const ParamSet grads = backward_batch(primary, obs, actions, targets, &loss);
  adam_step(primary.params(), grads, adam);
  return loss;
}

// Primary/target pair, optimizer, replay memory and the Algorithm-1 cadence
// (store, update after warm-up, sync every C environment steps).
class DdqnAgent {
 public:
  template <typename Rng>
  DdqnAgent(int observations, int actions, const DqnHyperparams& hp, Rng& rng)
      : hp_(hp),
        primary_(mlp_widths(observations, hp.hidden_layers, hp.hidden_width, actions), rng),
        target_(primary_),
        adam_(make_adam(primary_, hp.learning_rate, hp.beta1, hp.beta2, hp.adam_epsilon)),
        memory_(static_cast<std::size_t>(hp.memory_capacity)) {}

  template <typename Rng>
  int act(const Eigen::VectorXd& obs, Rng& rng) const {
    return select_action(primary_, obs, hp_.epsilon, rng);
  }

  // Stores the transition and performs the scheduled update and sync.
  // Returns the training loss when an update happened.
  template <typename Rng>
  std::optional<double> observe(Transition t, Rng& rng) {
    memory_.push(std::move(t));
    ++env_steps_;
    std::optional<double> loss;
    if (memory_.size() >= static_cast<std::size_t>(std::max(hp_.warmup, hp_.batch_size))) {
      loss = train_step(primary_, target_, memory_, hp_.batch_size, adam_, hp_.gamma, rng);
      ++gradient_steps_;
    }
    if (hp_.target_sync_period > 0 && env_steps_ % hp_.target_sync_period == 0) {
      sync_target(primary_, target_);
      ++syncs_;
    }
    return loss;
  }

  const DqnHyperparams& hyperparams() const { return hp_; }
  const QNetwork& primary() const { return primary_; }
  const QNetwork& target() const { return target_; }
  const AdamState& adam() const { return adam_; }
  const ReplayMemory& memory() const { return memory_; }
  long long env_steps() const { return env_steps_; }
  long long gradient_steps() const { return gradient_steps_; }
  long long syncs() const { return syncs_; }

 private:
  DqnHyperparams hp_;
  QNetwork primary_;
  QNetwork target_;
  AdamState adam_;
  ReplayMemory memory_;
  long long env_steps_ = 0;
  long long gradient_steps_ = 0;
  long long syncs_ = 0;
};

// ---------------------------------------------------------------------------
// Checkpoints

inline constexpr int kCheckpointSchemaVersion = 1;

inline nlohmann::json params_to_json(const ParamSet& ps) {
  nlohmann::json arr = nlohmann::json::array();
  for (const auto& l : ps) {
    std::vector<double> w;
    w.reserve(l.weights.size());
    for (Eigen::Index r = 0; r < l.weights.rows(); ++r)
      for (Eigen::Index c = 0; c < l.weights.cols(); ++c) w.push_back(l.weights(r, c));
    std::vector<double> b(l.biases.data(), l.biases.data() + l.biases.size());
    arr.push_back({{"weights", w}, {"biases", b}});
  }
  return arr;
}

inline ParamSet params_from_json(const nlohmann::json& arr, const std::vector<int>& widths) {
  if (!arr.is_array() || arr.size() + 1 != widths.size())
    throw SchemaError("checkpoint: layer count does not match architecture");
  ParamSet ps(arr.size());
  for (std::size_t i = 0; i < arr.size(); ++i) {
    const auto w = arr[i].at("weights").get<std::vector<double>>();
    const auto b = arr[i].at("biases").get<std::vector<double>>();
    const int rows = widths[i + 1];
    const int cols = widths[i];
    if (static_cast<int>(w.size()) != rows * cols || static_cast<int>(b.size()) != rows)
      throw SchemaError("checkpoint: layer " + std::to_string(i) + " has the wrong size");
    ps[i].weights.resize(rows, cols);
    for (int r = 0; r < rows; ++r)
      for (int c = 0; c < cols; ++c) ps[i].weights(r, c) = w[static_cast<std::size_t>(r) * cols + c];
    ps[i].biases = Eigen::Map<const Eigen::VectorXd>(b.data(), rows);
  }
  return ps;
}

struct Checkpoint {
  QNetwork network;
  AdamState adam;
  long long env_steps = 0;
  long long gradient_steps = 0;
  nlohmann::json header = nlohmann::json::object();  // caller metadata

  friend bool operator==(const Checkpoint&, const Checkpoint&) = default;
};

inline nlohmann::json checkpoint_to_json(const Checkpoint& c) {
  nlohmann::json j;
  j["version"] = kCheckpointSchemaVersion;
  j["header"] = c.header;
  j["architecture"] = c.network.widths();
  j["layers"] = params_to_json(c.network.params());
  j["optimizer"] = {{"step", c.adam.step},
                    {"learning_rate", c.adam.learning_rate},
                    {"beta1", c.adam.beta1},
                    {"beta2", c.adam.beta2},
                    {"epsilon", c.adam.epsilon},
                    {"m", params_to_json(c.adam.m)},
                    {"v", params_to_json(c.adam.v)}};
  j["counters"] = {{"env_steps", c.env_steps}, {"gradient_steps", c.gradient_steps}};
  return j;
}

inline Checkpoint checkpoint_from_json(const nlohmann::json& j) {
  try {
    if (!j.is_object() || !j.contains("version")) throw SchemaError("checkpoint: missing version");
    if (j.at("version").get<int>() != kCheckpointSchemaVersion)
      throw SchemaError("checkpoint: unsupported schema version");
    Checkpoint c;
    c.header = j.value("header", nlohmann::json::object());
    const auto widths = j.at("architecture").get<std::vector<int>>();
    c.network = QNetwork(widths);
    c.network.params() = params_from_json(j.at("layers"), widths);
    const auto& o = j.at("optimizer");
    c.adam.step = o.at("step").get<long long>();
    c.adam.learning_rate = o.at("learning_rate").get<double>();
    c.adam.beta1 = o.at("beta1").get<double>();
    c.adam.beta2 = o.at("beta2").get<double>();
    c.adam.epsilon = o.at("epsilon").get<double>();
    c.adam.m = params_from_json(o.at("m"), widths);
    c.adam.v = params_from_json(o.at("v"), widths);
    c.env_steps = j.at("counters").at("env_steps").get<long long>();
    c.gradient_steps = j.at("counters").at("gradient_steps").get<long long>();
    return c;
  } catch (const nlohmann::json::exception& e) {
    throw SchemaError(std::string("checkpoint: malformed document: ") + e.what());
  } catch (const ShapeError& e) {
    throw SchemaError(std::string("checkpoint: ") + e.what());
  }
}

}  // namespace skylink
