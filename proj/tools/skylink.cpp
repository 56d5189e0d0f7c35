// skylink command line: scenario generation, training, evaluation, sweeps.

#include <algorithm>
#include <cctype>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "skylink/skylink.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace skylink;

namespace {

constexpr int kExitUsage = 1;
constexpr int kExitRuntime = 2;

// Every long option can also be set through SKYLINK_<NAME>.
void attach_env_names(CLI::App& app) {
  for (CLI::Option* opt : app.get_options()) {
    const std::string name = opt->get_single_name();
    if (name.empty() || name == "help") continue;
    std::string env = "SKYLINK_";
    for (char c : name) env += c == '-' ? '_' : static_cast<char>(std::toupper(c));
    opt->envname(env);
  }
}

json vec_json(const Vec3& v) { return {v.x, v.y, v.z}; }

Vec3 parse_vec3(const std::vector<double>& v, const std::string& what) {
  if (v.size() != 3) throw ConfigError(what + " needs three values x,y,h");
  return {v[0], v[1], v[2]};
}

struct ScenarioOptions {
  std::string config;
  std::uint64_t seed = 1;
  std::string out;
  std::optional<double> buildings_per_km2;
  std::optional<int> num_sites;
  std::optional<double> mmwave_noise_psd;
};

struct EpisodeOptions {
  std::string scenario;
  std::vector<double> start, destination;
  int max_steps = 200;
  bool no_fading = false;
  bool random_start = false;
  double lambda_travel = 0.1, lambda_rate = 0.8, lambda_switch = 0.1;
  double goal_reward = 200.0;
  std::string observation = "relative";
  double observation_scale = 200.0;
  double ratio_clip = 5.0;
};

void add_episode_options(CLI::App& cmd, EpisodeOptions& o) {
  cmd.add_option("--scenario", o.scenario, "Scenario file")->required();
  cmd.add_option("--start", o.start, "Start position x,y,h")->delimiter(',')->expected(3);
  cmd.add_option("--destination", o.destination, "Destination x,y,h")->delimiter(',')->expected(3);
  cmd.add_option("--max-steps", o.max_steps, "Step limit per episode")->capture_default_str();
  cmd.add_flag("--no-fading", o.no_fading, "Disable small-scale fading");
  cmd.add_flag("--random-start", o.random_start, "Draw the start position per episode");
  cmd.add_option("--lambda-travel", o.lambda_travel, "Travel reward weight")->capture_default_str();
  cmd.add_option("--lambda-rate", o.lambda_rate, "Rate reward weight")->capture_default_str();
  cmd.add_option("--lambda-switch", o.lambda_switch, "Switch reward weight")->capture_default_str();
  cmd.add_option("--goal-reward", o.goal_reward, "Arrival bonus")->capture_default_str();
  cmd.add_option("--ratio-clip", o.ratio_clip, "Clip for the threshold/rate ratio")
      ->capture_default_str();
  cmd.add_option("--observation", o.observation, "Network input: relative or normalized")
      ->check(CLI::IsMember({"relative", "normalized"}))
      ->capture_default_str();
  cmd.add_option("--observation-scale", o.observation_scale,
                 "Length unit of the relative observation (m)")
      ->capture_default_str();
}

EpisodeConfig episode_config(const EpisodeOptions& o) {
  EpisodeConfig e;
  if (!o.start.empty()) e.start = parse_vec3(o.start, "--start");
  if (!o.destination.empty()) e.destination = parse_vec3(o.destination, "--destination");
  e.max_steps = o.max_steps;
  e.fading = !o.no_fading;
  e.randomize_start = o.random_start;
  e.weights = {o.lambda_travel, o.lambda_rate, o.lambda_switch};
  e.goal_reward = o.goal_reward;
  e.ratio_clip = o.ratio_clip;
  e.observation = o.observation == "normalized" ? ObservationKind::normalized
                                                : ObservationKind::relative;
  e.observation_scale = o.observation_scale;
  return e;
}

json episode_json(const EpisodeConfig& e) {
  return {{"start", vec_json(e.start)},
          {"destination", vec_json(e.destination)},
          {"randomize_start", e.randomize_start},
          {"thresholds", {e.thresholds.band1, e.thresholds.band2}},
          {"max_steps", e.max_steps},
          {"step_length", e.step_length},
          {"vertical_step", e.vertical_step},
          {"weights", {{"travel", e.weights.travel}, {"rate", e.weights.rate},
                       {"switching", e.weights.switching}}},
          {"goal_reward", e.goal_reward},
          {"ratio_clip", e.ratio_clip},
          {"observation", e.observation == ObservationKind::normalized ? "normalized" : "relative"},
          {"observation_scale", e.observation_scale},
          {"fading", e.fading}};
}

void add_dqn_options(CLI::App& cmd, DqnHyperparams& hp) {
  cmd.add_option("--hidden-layers", hp.hidden_layers)->capture_default_str();
  cmd.add_option("--hidden-width", hp.hidden_width)->capture_default_str();
  cmd.add_option("--learning-rate", hp.learning_rate)->capture_default_str();
  cmd.add_option("--epsilon", hp.epsilon, "Exploration rate")->capture_default_str();
  cmd.add_option("--gamma", hp.gamma, "Discount factor")->capture_default_str();
  cmd.add_option("--batch-size", hp.batch_size)->capture_default_str();
  cmd.add_option("--memory", hp.memory_capacity, "Replay capacity")->capture_default_str();
  cmd.add_option("--warmup", hp.warmup, "Transitions before the first update")
      ->capture_default_str();
  cmd.add_option("--target-sync", hp.target_sync_period, "Steps between target syncs")
      ->capture_default_str();
  cmd.add_option("--min-gradient-steps", hp.min_gradient_steps)->capture_default_str();
  cmd.add_option("--max-env-steps", hp.max_env_steps)->capture_default_str();
  cmd.add_option("--plateau-window", hp.plateau_window)->capture_default_str();
  cmd.add_option("--plateau-tolerance", hp.plateau_tolerance)->capture_default_str();
  cmd.add_option("--shaping-weight", hp.shaping_weight)->capture_default_str();
}

json dqn_json(const DqnHyperparams& hp) {
  return {{"hidden_layers", hp.hidden_layers},
          {"hidden_width", hp.hidden_width},
          {"learning_rate", hp.learning_rate},
          {"beta1", hp.beta1},
          {"beta2", hp.beta2},
          {"adam_epsilon", hp.adam_epsilon},
          {"epsilon", hp.epsilon},
          {"gamma", hp.gamma},
          {"batch_size", hp.batch_size},
          {"memory_capacity", hp.memory_capacity},
          {"warmup", hp.warmup},
          {"target_sync_period", hp.target_sync_period},
          {"min_gradient_steps", hp.min_gradient_steps},
          {"max_env_steps", hp.max_env_steps},
          {"plateau_window", hp.plateau_window},
          {"plateau_tolerance", hp.plateau_tolerance},
          {"shaping_weight", hp.shaping_weight}};
}

std::string checkpoint_name(PolicyKind kind, const std::string& preset, std::uint64_t seed) {
  return to_string(kind) + "_" + preset + "_seed" + std::to_string(seed) + ".json";
}

void write_manifest(const fs::path& dir, const std::string& command,
                    const std::vector<std::string>& argv, json config) {
  json m{{"tool", "skylink"}, {"command", command}, {"argv", argv}, {"config", std::move(config)}};
  write_text_file(dir / "manifest.json", m.dump(2) + "\n");
}

std::shared_ptr<const LinkTable> load_table(const std::string& path, const EpisodeConfig& e) {
  return make_link_table(std::make_shared<const Scenario>(load_scenario(path)), e);
}

std::vector<std::string> split_list(const std::string& s) {
  std::vector<std::string> out;
  std::string cur;
  for (char c : s) {
    if (c == ',') {
      if (!cur.empty()) out.push_back(cur);
      cur.clear();
    } else if (!std::isspace(static_cast<unsigned char>(c))) {
      cur += c;
    }
  }
  if (!cur.empty()) out.push_back(cur);
  return out;
}

void write_study(const StudyResult& r, const fs::path& dir, bool traces) {
  write_failures_csv(r, dir / "failures.csv");
  write_switch_cdf_csv(r, dir / "switch_cdf.csv");
  write_summary_csv(r, dir / "summary.csv");
  write_episodes_csv(r, dir / "episodes.csv");
  if (traces) write_traces_csv(r, dir / "traces.csv");
}

}  // namespace

int main(int argc, char** argv) {
  const std::vector<std::string> args(argv + 1, argv + argc);

  CLI::App app{"Dual-band UAV trajectory and band-switch learning"};
  app.require_subcommand(1);

  // generate-scenario
  ScenarioOptions so;
  auto* gen = app.add_subcommand("generate-scenario", "Write a random urban scenario");
  gen->add_option("--config", so.config, "Partial scenario config document");
  gen->add_option("--seed", so.seed, "Scenario seed")->capture_default_str();
  gen->add_option("--out", so.out, "Output scenario file")->required();
  gen->add_option("--buildings-per-km2", so.buildings_per_km2, "Building density");
  gen->add_option("--num-sites", so.num_sites, "Number of DU sites (1..5)");
  gen->add_option("--mmwave-noise-psd", so.mmwave_noise_psd, "Band 2 noise density, dBW/Hz");

  // train
  EpisodeOptions train_eo;
  DqnHyperparams hp;
  std::string train_policy, train_preset = "T1", train_out = ".";
  std::uint64_t train_seed = 0;
  auto* train = app.add_subcommand("train", "Train one policy at one threshold preset");
  add_episode_options(*train, train_eo);
  add_dqn_options(*train, hp);
  train->add_option("--policy", train_policy, "smart, blind, optimal, sub6 or mmwave")->required();
  train->add_option("--preset", train_preset, "Threshold preset")->capture_default_str();
  train->add_option("--seed", train_seed, "Training seed")->required();
  train->add_option("--out-dir", train_out, "Output directory")->capture_default_str();

  // evaluate
  EpisodeOptions eval_eo;
  std::string eval_checkpoint, eval_preset, eval_out = ".";
  std::uint64_t eval_seed = 0;
  int eval_episodes = 500;
  bool eval_traces = false;
  auto* evalc = app.add_subcommand("evaluate", "Greedy rollouts of a trained policy");
  add_episode_options(*evalc, eval_eo);
  evalc->add_option("--checkpoint", eval_checkpoint, "Policy checkpoint")->required();
  evalc->add_option("--preset", eval_preset, "Threshold preset (default: the training preset)");
  evalc->add_option("--seed", eval_seed, "Evaluation seed")->required();
  evalc->add_option("--episodes", eval_episodes, "Episode count")->capture_default_str();
  evalc->add_option("--out-dir", eval_out, "Output directory")->capture_default_str();
  evalc->add_flag("--traces", eval_traces, "Also write per-step traces.csv");

  // compare
  EpisodeOptions cmp_eo;
  DqnHyperparams cmp_hp;
  std::string cmp_policies = "optimal,smart,blind", cmp_presets = "T1,T2,T3", cmp_seeds = "1,2,3";
  std::string cmp_checkpoints, cmp_out = ".";
  int cmp_episodes = 500, cmp_jobs = 1;
  bool cmp_traces = false;
  auto* cmp = app.add_subcommand("compare", "Policy x preset grid over several seeds");
  add_episode_options(*cmp, cmp_eo);
  add_dqn_options(*cmp, cmp_hp);
  cmp->add_option("--policies", cmp_policies, "Policy kinds")->capture_default_str();
  cmp->add_option("--presets", cmp_presets, "Threshold presets")->capture_default_str();
  cmp->add_option("--seeds", cmp_seeds, "Training seeds")->capture_default_str();
  cmp->add_option("--episodes", cmp_episodes, "Evaluation episodes per seed")
      ->capture_default_str();
  cmp->add_option("--jobs", cmp_jobs, "Worker threads")->capture_default_str()->check(
      CLI::PositiveNumber);
  cmp->add_option("--checkpoint-dir", cmp_checkpoints,
                  "Load <policy>_<preset>_seed<n>.json from here instead of training");
  cmp->add_option("--out-dir", cmp_out, "Output directory")->capture_default_str();
  cmp->add_flag("--traces", cmp_traces, "Also write per-step traces.csv");

  // rate-trace
  EpisodeOptions rt_eo;
  std::string rt_checkpoint, rt_preset, rt_out = ".";
  std::uint64_t rt_seed = 0;
  auto* rt = app.add_subcommand("rate-trace", "Rates on both bands along one greedy flight");
  add_episode_options(*rt, rt_eo);
  rt->add_option("--checkpoint", rt_checkpoint, "Policy checkpoint")->required();
  rt->add_option("--preset", rt_preset, "Threshold preset (default: the training preset)");
  rt->add_option("--seed", rt_seed, "Channel seed")->required();
  rt->add_option("--out-dir", rt_out, "Output directory")->capture_default_str();

  for (CLI::App* sub : app.get_subcommands({})) attach_env_names(*sub);

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kExitUsage;
  }

  try {
    if (*gen) {
      ScenarioConfig c;
      if (!so.config.empty())
        c = scenario_config_from_json(parse_json_text(read_text_file(so.config), "config"));
      if (so.buildings_per_km2) c.buildings_per_km2 = *so.buildings_per_km2;
      if (so.num_sites) c.num_sites = *so.num_sites;
      if (so.mmwave_noise_psd) c.bands[1].noise_psd_db = *so.mmwave_noise_psd;
      save_scenario(generate_scenario(c, so.seed), so.out);
      std::cout << "wrote " << so.out << "\n";
      return 0;
    }

    auto preset_of = [](const std::string& requested, const TrainedPolicy& p) {
      if (!requested.empty()) return find_preset(requested);
      if (p.metadata.contains("preset") && p.metadata["preset"].is_string())
        return find_preset(p.metadata["preset"].get<std::string>());
      throw ConfigError("checkpoint carries no preset; pass --preset");
    };

    if (*train) {
      const PolicyKind kind = parse_policy_kind(train_policy);
      const ThresholdPreset& preset = find_preset(train_preset);
      const EpisodeConfig e = with_preset(episode_config(train_eo), preset);
      const auto table = load_table(train_eo.scenario, e);
      fs::create_directories(train_out);
      TrainingResult r = run_training(kind, table, e, hp, train_seed);
      r.policy.metadata["preset"] = preset.name;
      r.policy.metadata["seed"] = train_seed;
      const fs::path ckpt = fs::path(train_out) / checkpoint_name(kind, preset.name, train_seed);
      save_policy(r.policy, ckpt);
      write_learning_curve_csv(r.curve, fs::path(train_out) / "learning_curve.csv");
      write_manifest(train_out, "train", args,
                     {{"scenario", train_eo.scenario},
                      {"policy", to_string(kind)},
                      {"preset", preset.name},
                      {"seed", train_seed},
                      {"episode", episode_json(configure_episode(kind, e))},
                      {"dqn", dqn_json(hp)},
                      {"result", {{"episodes", r.curve.size()},
                                  {"env_steps", r.policy.env_steps},
                                  {"gradient_steps", r.policy.gradient_steps},
                                  {"target_syncs", r.syncs},
                                  {"checkpoint", ckpt.filename().string()}}}});
      std::cout << "wrote " << ckpt.string() << " after " << r.policy.env_steps << " steps\n";
      return 0;
    }

    if (*evalc) {
      const TrainedPolicy p = load_policy(eval_checkpoint);
      const ThresholdPreset preset = preset_of(eval_preset, p);
      const EpisodeConfig e = with_preset(episode_config(eval_eo), preset);
      const Environment env = make_environment(p.kind, load_table(eval_eo.scenario, e), e);
      if (eval_episodes < 0) throw ConfigError("--episodes must be nonnegative");
      fs::create_directories(eval_out);
      StudyResult r{{summarize_cell(
          p.kind, preset.name,
          {summarize_seed(eval_seed, evaluate(p, env, eval_episodes, evaluation_seed(eval_seed),
                                              eval_traces))},
          objective_weights_from(e.weights))}};
      write_study(r, eval_out, eval_traces);
      write_manifest(eval_out, "evaluate", args,
                     {{"scenario", eval_eo.scenario},
                      {"checkpoint", eval_checkpoint},
                      {"policy", to_string(p.kind)},
                      {"preset", preset.name},
                      {"seed", eval_seed},
                      {"episodes", eval_episodes},
                      {"episode", episode_json(configure_episode(p.kind, e))}});
      std::cout << to_string(p.kind) << " " << preset.name << " failure "
                << r.cells[0].mean_failure_pct << "%\n";
      return 0;
    }

    if (*cmp) {
      StudyConfig cfg;
      for (const auto& k : split_list(cmp_policies)) cfg.kinds.push_back(parse_policy_kind(k));
      cfg.presets = parse_presets(split_list(cmp_presets));
      cfg.seeds.clear();
      for (const auto& s : split_list(cmp_seeds)) {
        try {
          cfg.seeds.push_back(std::stoull(s));
        } catch (const std::exception&) {
          throw ConfigError("--seeds: '" + s + "' is not a seed");
        }
      }
      if (cfg.kinds.empty() || cfg.presets.empty() || cfg.seeds.empty())
        throw ConfigError("compare needs at least one policy, preset and seed");
      if (cmp_episodes < 0) throw ConfigError("--episodes must be nonnegative");
      cfg.episodes = cmp_episodes;
      cfg.jobs = cmp_jobs;
      cfg.keep_traces = cmp_traces;
      const EpisodeConfig e = episode_config(cmp_eo);
      cfg.kappa = objective_weights_from(e.weights);
      const auto table = load_table(cmp_eo.scenario, e);

      PolicySource source;
      if (!cmp_checkpoints.empty()) {
        // Check every cell up front so a missing file fails before any work.
        for (auto k : cfg.kinds)
          for (const auto& pr : cfg.presets)
            for (auto s : cfg.seeds) {
              const fs::path f = fs::path(cmp_checkpoints) / checkpoint_name(k, pr.name, s);
              if (!fs::exists(f))
                throw IoError("missing checkpoint for cell (" + to_string(k) + ", " + pr.name +
                              ") seed " + std::to_string(s) + ": " + f.string());
            }
        source = [dir = cmp_checkpoints](PolicyKind k, const ThresholdPreset& pr,
                                         std::uint64_t s) {
          return load_policy(fs::path(dir) / checkpoint_name(k, pr.name, s));
        };
      } else {
        source = training_source(table, e, cmp_hp);
      }
      fs::create_directories(cmp_out);
      const StudyResult r = compare_policies(table, e, cfg, source);
      write_study(r, cmp_out, cmp_traces);
      json presets = json::array();
      for (const auto& pr : cfg.presets)
        presets.push_back({{"name", pr.name},
                           {"thresholds", {pr.thresholds.band1, pr.thresholds.band2}}});
      std::vector<std::string> kinds;
      for (auto k : cfg.kinds) kinds.push_back(to_string(k));
      write_manifest(cmp_out, "compare", args,
                     {{"scenario", cmp_eo.scenario},
                      {"policies", kinds},
                      {"presets", presets},
                      {"seeds", cfg.seeds},
                      {"episodes", cfg.episodes},
                      {"jobs", cfg.jobs},
                      {"checkpoint_dir", cmp_checkpoints},
                      {"episode", episode_json(e)},
                      {"dqn", dqn_json(cmp_hp)},
                      {"objective", {{"failures", cfg.kappa.failures},
                                     {"steps", cfg.kappa.steps},
                                     {"switches", cfg.kappa.switches}}}});
      for (const auto& c : r.cells)
        std::cout << to_string(c.kind) << " " << c.preset << " failure " << c.mean_failure_pct
                  << "% +- " << c.stderr_failure_pct << ", median switches "
                  << c.median_switches << "\n";
      return 0;
    }

    if (*rt) {
      const TrainedPolicy p = load_policy(rt_checkpoint);
      const ThresholdPreset preset = preset_of(rt_preset, p);
      const EpisodeConfig e = with_preset(episode_config(rt_eo), preset);
      const Environment env = make_environment(p.kind, load_table(rt_eo.scenario, e), e);
      fs::create_directories(rt_out);
      const auto rows = rate_trace(p, env, evaluation_seed(rt_seed));
      write_rate_trace_csv(rows, fs::path(rt_out) / "rate_trace.csv");
      write_manifest(rt_out, "rate-trace", args,
                     {{"scenario", rt_eo.scenario},
                      {"checkpoint", rt_checkpoint},
                      {"policy", to_string(p.kind)},
                      {"preset", preset.name},
                      {"seed", rt_seed},
                      {"episode", episode_json(configure_episode(p.kind, e))}});
      std::cout << "wrote " << rows.size() << " rows\n";
      return 0;
    }
  } catch (const ConfigError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitRuntime;
  }
  return kExitUsage;
}
