#pragma once

#include <cstdint>
#include <filesystem>
#include <memory>
#include <random>
#include <string>
#include <vector>

#include <json.hpp>

#include "skylink/dqn.hpp"
#include "skylink/environment.hpp"

namespace skylink {

// smart/blind/optimal are the band-switch policies; the single-band kinds
// learn a trajectory on one band with switching disabled.
enum class PolicyKind { smart, blind, optimal, sub6_only, mmwave_only };

inline std::string to_string(PolicyKind k) {
  switch (k) {
    case PolicyKind::smart: return "smart";
    case PolicyKind::blind: return "blind";
    case PolicyKind::optimal: return "optimal";
    case PolicyKind::sub6_only: return "sub6";
    case PolicyKind::mmwave_only: return "mmwave";
  }
  return "?";
}

inline PolicyKind parse_policy_kind(const std::string& s) {
  for (auto k : {PolicyKind::smart, PolicyKind::blind, PolicyKind::optimal,
                 PolicyKind::sub6_only, PolicyKind::mmwave_only})
    if (to_string(k) == s) return k;
  throw ConfigError("unknown policy '" + s + "' (expected one of smart, blind, optimal, sub6, mmwave)");
}

inline SwitchMode switch_mode(PolicyKind k) {
  switch (k) {
    case PolicyKind::smart: return SwitchMode::smart;
    case PolicyKind::blind: return SwitchMode::blind;
    case PolicyKind::optimal: return SwitchMode::optimal;
    default: return SwitchMode::none;
  }
}

inline EpisodeConfig configure_episode(PolicyKind k, EpisodeConfig base) {
  base.mode = switch_mode(k);
  base.initial_band = k == PolicyKind::mmwave_only ? 2 : 1;
  return base;
}

inline Environment make_environment(PolicyKind k, std::shared_ptr<const LinkTable> table,
                                    const EpisodeConfig& base) {
  return Environment(std::move(table), configure_episode(k, base));
}

struct TraceRow {
  int k = 0;
  Vec3 position;
  int band = 1;
  int cell_id = 0;
  double rate = 0.0;
  double rate_band1 = 0.0;
  double rate_band2 = 0.0;
  int failure = 0;
  bool switched = false;
  double reward = 0.0;
};

struct EpisodeRecord {
  int episode = 0;
  int steps = 0;
  int failures = 0;
  int switches = 0;
  bool success = false;
  double total_return = 0.0;
  std::vector<TraceRow> trace;
};

// Plays one episode. `choose(obs)` returns an action index; `on_step` sees
// every transition (training hooks in here).
template <typename Rng, typename Choose, typename OnStep>
EpisodeRecord run_episode(const Environment& env, Rng& channel_rng, Choose&& choose,
                          OnStep&& on_step, bool keep_trace) {
  EpisodeRecord rec;
  UavState state = env.reset(channel_rng);
  Eigen::VectorXd obs = env.observe(state);
  while (!state.terminal) {
    const int a = choose(obs);
    const StepOutcome out = env.step(state, decode_action(a, env.mode()), channel_rng);
    Eigen::VectorXd next_obs = env.observe(out.next_state);
    on_step(Transition{obs, a, out.reward, next_obs, out.terminal}, state, out);
    ++rec.steps;
    rec.failures += out.failure;
    rec.switches += out.switched ? 1 : 0;
    rec.total_return += out.reward;
    if (keep_trace) {
      rec.trace.push_back({out.next_state.step_index, out.next_state.position,
                           out.measured_band, out.cell_id, out.rate, out.rate_band1,
                           out.rate_band2, out.failure, out.switched, out.reward});
    }
    rec.success = out.terminal_reason == TerminalReason::destination;
    state = out.next_state;
    obs = std::move(next_obs);
  }
  return rec;
}

struct TrainedPolicy {
  PolicyKind kind = PolicyKind::smart;
  QNetwork network;
  AdamState adam;
  long long env_steps = 0;
  long long gradient_steps = 0;
  nlohmann::json metadata = nlohmann::json::object();
};

struct LearningCurveRow {
  int episode = 0;
  double total_return = 0.0;
  int failures = 0;
  int switches = 0;
  int steps = 0;
  bool success = false;
};

struct TrainingResult {
  TrainedPolicy policy;
  std::vector<LearningCurveRow> curve;
  long long syncs = 0;
  int selected_episode = 0;  // episode after which the returned network was taken
  double selection_score = 0.0;
};

// Mean return of greedy rollouts on fixed channel streams.
inline double greedy_score(const QNetwork& net, const Environment& env, int episodes,
                           std::uint64_t seed) {
  double total = 0.0;
  for (int i = 0; i < episodes; ++i) {
    std::mt19937_64 rng(derive_seed(seed, "selection", static_cast<std::uint64_t>(i)));
    total += run_episode(
                 env, rng, [&](const Eigen::VectorXd& o) { return greedy_action(net, o); },
                 [](const Transition&, const UavState&, const StepOutcome&) {}, false)
                 .total_return;
  }
  return episodes > 0 ? total / episodes : 0.0;
}

// Compares the mean return of the last `window` episodes with the window
// before it. Windows containing an episode that missed the destination never
// count as flat.
inline bool returns_plateaued(const std::vector<LearningCurveRow>& curve, int window,
                              double tolerance) {
  if (window <= 0 || curve.size() < static_cast<std::size_t>(2 * window)) return false;
  double recent = 0.0, previous = 0.0;
  const std::size_t n = curve.size();
  for (int i = 0; i < window; ++i) {
    const auto& r = curve[n - 1 - i];
    if (!r.success) return false;
    recent += r.total_return;
    previous += curve[n - 1 - window - i].total_return;
  }
  recent /= window;
  previous /= window;
  return std::abs(recent - previous) <= tolerance * std::abs(previous);
}

// Double-DQN training loop for one policy kind.
inline TrainingResult run_training(PolicyKind kind, std::shared_ptr<const LinkTable> table,
                                   const EpisodeConfig& base, const DqnHyperparams& hp,
                                   std::uint64_t seed) {
  const Environment env = make_environment(kind, std::move(table), base);
  std::mt19937_64 init_rng(derive_seed(seed, "training-init"));
  std::mt19937_64 agent_rng(derive_seed(seed, "training-agent"));
  std::mt19937_64 channel_rng(derive_seed(seed, "training-channel"));
  DdqnAgent agent(env.num_observations(), env.num_actions(), hp, init_rng);

  TrainingResult result;
  QNetwork best;
  AdamState best_adam;
  bool have_best = false;
  auto consider = [&](int episode) {
    if (hp.selection_period <= 0 || hp.selection_episodes <= 0 || agent.gradient_steps() == 0)
      return;
    const double score = greedy_score(agent.primary(), env, hp.selection_episodes,
                                      derive_seed(seed, "training-selection"));
    if (!have_best || score > result.selection_score) {
      best = agent.primary();
      best_adam = agent.adam();
      have_best = true;
      result.selection_score = score;
      result.selected_episode = episode;
    }
  };
  int episode = 1;
  for (;; ++episode) {
    const EpisodeRecord rec = run_episode(
        env, channel_rng, [&](const Eigen::VectorXd& o) { return agent.act(o, agent_rng); },
        [&](Transition t, const UavState& s, const StepOutcome& out) {
          if (hp.shaping_weight != 0.0)
            t.reward += hp.shaping_weight * (env.steps_to_destination(s.cell) -
                                             env.steps_to_destination(out.next_state.cell));
          agent.observe(std::move(t), agent_rng);
        },
        false);
    result.curve.push_back(
        {episode, rec.total_return, rec.failures, rec.switches, rec.steps, rec.success});
    if (hp.selection_period > 0 && episode % hp.selection_period == 0) consider(episode);
    if (agent.env_steps() >= hp.max_env_steps) break;
    if (agent.gradient_steps() >= hp.min_gradient_steps &&
        returns_plateaued(result.curve, hp.plateau_window, hp.plateau_tolerance))
      break;
  }
  if (hp.selection_period > 0 && episode % hp.selection_period != 0) consider(episode);
  result.policy.kind = kind;
  result.policy.network = have_best ? best : agent.primary();
  result.policy.adam = have_best ? best_adam : agent.adam();
  if (!have_best) result.selected_episode = episode;
  result.policy.env_steps = agent.env_steps();
  result.policy.gradient_steps = agent.gradient_steps();
  result.syncs = agent.syncs();
  return result;
}

// Greedy rollouts. Episode i draws from its own stream, so results do not
// depend on evaluation order.
inline std::vector<EpisodeRecord> evaluate(const TrainedPolicy& policy, const Environment& env,
                                           int episodes, std::uint64_t seed,
                                           bool keep_traces = true) {
  if (policy.network.input_size() != env.num_observations() ||
      policy.network.output_size() != env.num_actions())
    throw ShapeError("evaluate: policy network does not match the environment's spaces");
  std::vector<EpisodeRecord> out;
  out.reserve(std::max(episodes, 0));
  for (int i = 0; i < episodes; ++i) {
    std::mt19937_64 rng(derive_seed(seed, "evaluation", static_cast<std::uint64_t>(i)));
    EpisodeRecord rec = run_episode(
        env, rng, [&](const Eigen::VectorXd& o) { return greedy_action(policy.network, o); },
        [](const Transition&, const UavState&, const StepOutcome&) {}, keep_traces);
    rec.episode = i;
    out.push_back(std::move(rec));
  }
  return out;
}

inline double failure_percentage(const std::vector<EpisodeRecord>& records) {
  long long failures = 0, steps = 0;
  for (const auto& r : records) {
    failures += r.failures;
    steps += r.steps;
  }
  return steps == 0 ? 0.0 : 100.0 * static_cast<double>(failures) / static_cast<double>(steps);
}

// ---------------------------------------------------------------------------
// Persistence: the dqn checkpoint plus a policy-kind header.

inline nlohmann::json policy_to_json(const TrainedPolicy& p) {
  Checkpoint c{p.network, p.adam, p.env_steps, p.gradient_steps, p.metadata};
  c.header["policy"] = to_string(p.kind);
  return checkpoint_to_json(c);
}

inline TrainedPolicy policy_from_json(const nlohmann::json& j) {
  Checkpoint c = checkpoint_from_json(j);
  if (!c.header.contains("policy") || !c.header["policy"].is_string())
    throw SchemaError("checkpoint: missing policy kind header");
  TrainedPolicy p;
  try {
    p.kind = parse_policy_kind(c.header["policy"].get<std::string>());
  } catch (const ConfigError& e) {
    throw SchemaError(std::string("checkpoint: ") + e.what());
  }
  p.network = std::move(c.network);
  p.adam = std::move(c.adam);
  p.env_steps = c.env_steps;
  p.gradient_steps = c.gradient_steps;
  c.header.erase("policy");
  p.metadata = std::move(c.header);
  const int obs = observation_size(switch_mode(p.kind));
  const int acts = action_space_size(switch_mode(p.kind));
  if (p.network.input_size() != obs || p.network.output_size() != acts)
    throw SchemaError("checkpoint: architecture does not match policy kind " + to_string(p.kind));
  return p;
}

inline void save_policy(const TrainedPolicy& p, const std::filesystem::path& path) {
  write_text_file(path, policy_to_json(p).dump() + "\n");
}

inline TrainedPolicy load_policy(const std::filesystem::path& path) {
  return policy_from_json(parse_json_text(read_text_file(path), "checkpoint"));
}

}  // namespace skylink
