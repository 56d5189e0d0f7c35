#pragma once

#include <algorithm>
#include <array>
#include <memory>
#include <random>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "skylink/channel.hpp"
#include "skylink/link_table.hpp"

namespace skylink {

// How the serving band evolves during an episode.
//   smart   - the agent toggles the band through its action
//   blind   - the band toggles after every radio failure
//   optimal - an oracle picks the better instantaneous band each step
//   none    - the band never changes (single-band missions)
enum class SwitchMode { smart, blind, optimal, none };

enum class Direction { up = 0, down, left, right, forward, back };
inline constexpr int kNumDirections = 6;

struct Action {
  Direction direction = Direction::up;
  bool switch_band = false;
};

inline int action_space_size(SwitchMode mode) {
  return mode == SwitchMode::smart ? 2 * kNumDirections : kNumDirections;
}
inline int observation_size(SwitchMode mode) { return mode == SwitchMode::smart ? 4 : 3; }

inline Action decode_action(int index, SwitchMode mode) {
  if (index < 0 || index >= action_space_size(mode))
    throw std::out_of_range("action index " + std::to_string(index) + " out of range");
  return {static_cast<Direction>(index % kNumDirections), index >= kNumDirections};
}

inline int encode_action(const Action& a, SwitchMode mode) {
  const int base = static_cast<int>(a.direction);
  return (mode == SwitchMode::smart && a.switch_band) ? base + kNumDirections : base;
}

struct RateThresholds {
  double band1 = 150e3;  // bit/s
  double band2 = 3e6;
  double of(int band_id) const { return band_id == 1 ? band1 : band2; }
};

struct RewardWeights {
  double travel = 0.1;     // lambda_1
  double rate = 0.8;       // lambda_2
  double switching = 0.1;  // lambda_3
};

// normalized: location min-max scaled to [0,1] over the area.
// relative: offset from the destination in units of observation_scale meters.
enum class ObservationKind { normalized, relative };

struct EpisodeConfig {
  Vec3 start{800.0, 1000.0, 60.0};
  Vec3 destination{1200.0, 1000.0, 100.0};
  bool randomize_start = false;
  RateThresholds thresholds;
  int max_steps = 200;
  double step_length = 40.0;
  double vertical_step = 20.0;
  RewardWeights weights;
  double goal_reward = 200.0;
  double ratio_clip = 5.0;
  SwitchMode mode = SwitchMode::smart;
  int initial_band = 1;
  bool fading = true;
  ObservationKind observation = ObservationKind::relative;
  double observation_scale = 200.0;

  void validate(const AreaSpec& area) const {
    if (start == destination) throw ConfigError("episode: start equals destination");
    if (max_steps <= 0) throw ConfigError("episode: max_steps must be positive");
    const auto& w = weights;
    if (w.travel < 0 || w.rate < 0 || w.switching < 0)
      throw ConfigError("episode: reward weights must be nonnegative");
    if (std::abs(w.travel + w.rate + w.switching - 1.0) > 1e-9)
      throw ConfigError("episode: reward weights must sum to 1");
    if (initial_band != 1 && initial_band != 2) throw ConfigError("episode: band must be 1 or 2");
    if (!(ratio_clip > 0.0)) throw ConfigError("episode: ratio_clip must be positive");
    if (!(observation_scale > 0.0)) throw ConfigError("episode: observation_scale must be positive");
    auto inside = [&](const Vec3& v) {
      return area.contains_xy(v.x, v.y) && v.z >= area.h_min && v.z <= area.h_max;
    };
    if (!inside(start)) throw ConfigError("episode: start lies outside the area");
    if (!inside(destination)) throw ConfigError("episode: destination lies outside the area");
  }
};

struct UavState {
  GridPoint cell;
  Vec3 position;
  int band = 1;
  int step_index = 0;
  bool terminal = false;
};

enum class TerminalReason { none, destination, step_limit };

struct StepOutcome {
  UavState next_state;
  double reward = 0.0;
  int failure = 0;
  bool switched = false;
  double rate = 0.0;        // active band
  double rate_band1 = 0.0;  // both bands under this step's fading draws
  double rate_band2 = 0.0;
  int cell_id = 0;
  int measured_band = 1;    // band the rate was measured on
  bool terminal = false;
  TerminalReason terminal_reason = TerminalReason::none;
};

struct RewardInputs {
  bool reached_destination = false;
  double rate = 0.0;
  double threshold = 0.0;
  bool switched = false;
};

inline double compute_reward(const RewardInputs& in, const EpisodeConfig& config) {
  const double f1 = -1.0 + (in.reached_destination ? config.goal_reward : 0.0);
  const double ratio = in.rate > 0.0 ? std::min(in.threshold / in.rate, config.ratio_clip)
                                     : config.ratio_clip;
  const double f2 = -ratio;
  const double f3 = (config.mode == SwitchMode::smart && in.switched) ? -1.0 : 0.0;
  const auto& w = config.weights;
  return w.travel * f1 + w.rate * f2 + w.switching * f3;
}

inline int other_band(int band) { return band == 1 ? 2 : 1; }

// Blind-mode reaction: toggle the band after a failed step.
inline UavState auto_switch_on_failure(UavState state, const StepOutcome& outcome) {
  if (outcome.failure == 1) state.band = other_band(state.band);
  return state;
}

// Band with the higher instantaneous rate; ties keep the current band.
inline int oracle_band(double rate_band1, double rate_band2, int current_band) {
  if (rate_band1 == rate_band2) return current_band;
  return rate_band1 > rate_band2 ? 1 : 2;
}

// Per-cell fading draws of one step, for both bands.
struct StepFading {
  std::vector<double> band1;
  std::vector<double> band2;
  const std::vector<double>& of(int band_id) const { return band_id == 1 ? band1 : band2; }
};

inline int oracle_band(const LinkTable& table, const GridPoint& p, const StepFading& fading,
                       int current_band) {
  return oracle_band(table.measure(p, 1, fading.band1).rate,
                     table.measure(p, 2, fading.band2).rate, current_band);
}

// Location min-max normalized over the area bounds, plus the active band in
// smart mode.
inline Eigen::VectorXd encode_observation(const UavState& state, const AreaSpec& area,
                                          SwitchMode mode) {
  Eigen::VectorXd obs(observation_size(mode));
  obs[0] = (state.position.x - area.x_min) / (area.x_max - area.x_min);
  obs[1] = (state.position.y - area.y_min) / (area.y_max - area.y_min);
  obs[2] = (state.position.z - area.h_min) / (area.h_max - area.h_min);
  if (mode == SwitchMode::smart) obs[3] = state.band == 2 ? 1.0 : 0.0;
  return obs;
}

inline Eigen::VectorXd encode_relative_observation(const UavState& state, const Vec3& destination,
                                                   double scale, SwitchMode mode) {
  Eigen::VectorXd obs(observation_size(mode));
  obs[0] = (state.position.x - destination.x) / scale;
  obs[1] = (state.position.y - destination.y) / scale;
  obs[2] = (state.position.z - destination.z) / scale;
  if (mode == SwitchMode::smart) obs[3] = state.band == 2 ? 1.0 : 0.0;
  return obs;
}

// Episodic UAV MDP over a precomputed link table. Holds no episode state:
// `step` maps (state, action) to an outcome, so one instance can drive any
// number of independent episodes.
class Environment {
 public:
  Environment(std::shared_ptr<const LinkTable> table, EpisodeConfig config)
      : table_(std::move(table)), config_(config) {
    config_.validate(table_->scenario().area);
    const Grid& g = table_->grid();
    if (g.step != config_.step_length || g.vertical_step != config_.vertical_step)
      throw ConfigError("episode: step lengths differ from the link table grid");
    start_ = g.snap(config_.start);
    dest_ = g.snap(config_.destination);
  }

  const EpisodeConfig& config() const { return config_; }
  const LinkTable& table() const { return *table_; }
  std::shared_ptr<const LinkTable> table_ptr() const { return table_; }
  const AreaSpec& area() const { return table_->scenario().area; }
  SwitchMode mode() const { return config_.mode; }
  int num_actions() const { return action_space_size(config_.mode); }
  int num_observations() const { return observation_size(config_.mode); }

  template <typename Rng>
  UavState reset(Rng& rng) const {
    UavState s;
    s.cell = start_;
    if (config_.randomize_start) {
      const Grid& g = table_->grid();
      std::uniform_int_distribution<int> dx(0, g.nx - 1), dy(0, g.ny - 1), dz(0, g.nz - 1);
      do {
        s.cell = {dx(rng), dy(rng), dz(rng)};
      } while (s.cell == dest_);
    }
    s.position = table_->grid().position(s.cell);
    s.band = config_.initial_band;
    s.step_index = 0;
    return s;
  }

  const GridPoint& destination_cell() const { return dest_; }

  // Lattice moves still needed to reach the destination.
  int steps_to_destination(const GridPoint& p) const {
    return std::abs(p.ix - dest_.ix) + std::abs(p.iy - dest_.iy) + std::abs(p.iz - dest_.iz);
  }

  Eigen::VectorXd observe(const UavState& s) const {
    if (config_.observation == ObservationKind::normalized)
      return encode_observation(s, area(), config_.mode);
    return encode_relative_observation(s, table_->grid().position(dest_), config_.observation_scale,
                                       config_.mode);
  }

  GridPoint move(const GridPoint& p, Direction d) const {
    GridPoint n = p;
    switch (d) {
      case Direction::up: ++n.iz; break;
      case Direction::down: --n.iz; break;
      case Direction::left: --n.ix; break;
      case Direction::right: ++n.ix; break;
      case Direction::forward: ++n.iy; break;
      case Direction::back: --n.iy; break;
    }
    return table_->grid().contains(n) ? n : p;
  }

  template <typename Rng>
  StepFading draw_step_fading(Rng& rng) const {
    const int n = table_->num_cells();
    StepFading f{std::vector<double>(n, 1.0), std::vector<double>(n, 1.0)};
    if (!config_.fading) return f;
    const Scenario& s = table_->scenario();
    for (auto& v : f.band1) v = draw_fading(s.band(1), rng);
    for (auto& v : f.band2) v = draw_fading(s.band(2), rng);
    return f;
  }

  template <typename Rng>
  StepOutcome step(const UavState& state, const Action& action, Rng& rng) const {
    const StepFading fading = draw_step_fading(rng);
    return step(state, action, fading);
  }

  StepOutcome step(const UavState& state, const Action& action, const StepFading& fading) const {
    if (state.terminal || state.step_index >= config_.max_steps)
      throw std::logic_error("step called on a terminal state");
    StepOutcome out;
    UavState next = state;
    next.cell = move(state.cell, action.direction);
    next.position = table_->grid().position(next.cell);
    next.step_index = state.step_index + 1;

    const ChannelSample s1 = table_->measure(next.cell, 1, fading.band1);
    const ChannelSample s2 = table_->measure(next.cell, 2, fading.band2);
    out.rate_band1 = s1.rate;
    out.rate_band2 = s2.rate;

    switch (config_.mode) {
      case SwitchMode::smart:
        if (action.switch_band) {
          next.band = other_band(next.band);
          out.switched = true;
        }
        break;
      case SwitchMode::optimal: {
        const int b = oracle_band(s1.rate, s2.rate, next.band);
        out.switched = b != next.band;
        next.band = b;
        break;
      }
      case SwitchMode::blind:
      case SwitchMode::none:
        break;
    }

    const ChannelSample& active = next.band == 1 ? s1 : s2;
    out.measured_band = next.band;
    out.cell_id = active.cell_id;
    out.rate = active.rate;
    const double threshold = config_.thresholds.of(next.band);
    out.failure = out.rate < threshold ? 1 : 0;

    const bool reached = next.cell == dest_;
    out.reward = compute_reward({reached, out.rate, threshold, out.switched}, config_);
    out.terminal = reached || next.step_index >= config_.max_steps;
    out.terminal_reason = reached       ? TerminalReason::destination
                          : out.terminal ? TerminalReason::step_limit
                                         : TerminalReason::none;
    next.terminal = out.terminal;

    if (config_.mode == SwitchMode::blind) {
      out.switched = out.failure == 1;
      next = auto_switch_on_failure(next, out);
    }
    out.next_state = next;
    return out;
  }

 private:
  std::shared_ptr<const LinkTable> table_;
  EpisodeConfig config_;
  GridPoint start_;
  GridPoint dest_;
};

inline std::shared_ptr<const LinkTable> make_link_table(std::shared_ptr<const Scenario> scenario,
                                                        const EpisodeConfig& config) {
  const Grid grid(scenario->area, config.step_length, config.vertical_step);
  return std::make_shared<const LinkTable>(std::move(scenario), grid);
}

}  // namespace skylink
