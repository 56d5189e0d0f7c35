#include <gtest/gtest.h>

#include <filesystem>

#include "skylink/policies.hpp"

using namespace skylink;

namespace {

std::shared_ptr<const LinkTable> small_table(double buildings_per_km2 = 300.0) {
  ScenarioConfig c;
  c.area = {0, 400, 0, 400, 60, 120};
  c.num_sites = 1;
  c.buildings_per_km2 = buildings_per_km2;
  EpisodeConfig e;
  return make_link_table(std::make_shared<const Scenario>(generate_scenario(c, 2)), e);
}

EpisodeConfig short_mission() {
  EpisodeConfig e;
  e.start = {120, 200, 80};
  e.destination = {280, 200, 80};
  e.thresholds = {4e5, 4e6};
  e.max_steps = 60;
  return e;
}

DqnHyperparams quick_hp(long long steps = 2000) {
  DqnHyperparams hp;
  hp.hidden_width = 32;
  hp.warmup = 200;
  hp.max_env_steps = steps;
  return hp;
}

TrainedPolicy random_policy(PolicyKind kind, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  TrainedPolicy p;
  p.kind = kind;
  const SwitchMode m = switch_mode(kind);
  p.network = QNetwork(mlp_widths(observation_size(m), 2, 16, action_space_size(m)), rng);
  p.adam = make_adam(p.network);
  return p;
}

}  // namespace

TEST(PolicyKind, Spaces) {
  EXPECT_EQ(action_space_size(switch_mode(PolicyKind::smart)), 12);
  EXPECT_EQ(observation_size(switch_mode(PolicyKind::smart)), 4);
  for (auto k : {PolicyKind::blind, PolicyKind::optimal, PolicyKind::sub6_only,
                 PolicyKind::mmwave_only}) {
    EXPECT_EQ(action_space_size(switch_mode(k)), 6);
    EXPECT_EQ(observation_size(switch_mode(k)), 3);
  }
  EXPECT_EQ(parse_policy_kind("blind"), PolicyKind::blind);
  EXPECT_THROW(parse_policy_kind("greedy"), ConfigError);
}

TEST(PolicyKind, SingleBandStartsOnItsBand) {
  EXPECT_EQ(configure_episode(PolicyKind::mmwave_only, {}).initial_band, 2);
  EXPECT_EQ(configure_episode(PolicyKind::sub6_only, {}).initial_band, 1);
  EXPECT_EQ(configure_episode(PolicyKind::sub6_only, {}).mode, SwitchMode::none);
}

TEST(Training, SmartLearnsCleanChannelMission) {
  EpisodeConfig e = short_mission();
  e.thresholds = {0.0, 0.0};
  const auto table = small_table(0.0);
  const TrainingResult r = run_training(PolicyKind::smart, table, e, quick_hp(4000), 1);
  const Environment env = make_environment(PolicyKind::smart, table, e);
  const auto recs = evaluate(r.policy, env, 20, 5, false);
  for (const auto& rec : recs) {
    EXPECT_TRUE(rec.success);
    EXPECT_EQ(rec.failures, 0);
  }
}

TEST(Training, ReproducibleWeights) {
  const auto table = small_table();
  const TrainingResult a = run_training(PolicyKind::blind, table, short_mission(), quick_hp(600), 3);
  const TrainingResult b = run_training(PolicyKind::blind, table, short_mission(), quick_hp(600), 3);
  EXPECT_EQ(a.policy.network, b.policy.network);
  EXPECT_EQ(a.curve.size(), b.curve.size());
  EXPECT_EQ(a.policy.gradient_steps, b.policy.gradient_steps);
  EXPECT_GT(a.policy.gradient_steps, 0);
}

TEST(Training, ReturnsBestScoredSnapshot) {
  const auto table = small_table();
  const DqnHyperparams hp = quick_hp(1500);
  const TrainingResult r = run_training(PolicyKind::smart, table, short_mission(), hp, 4);
  const Environment env = make_environment(PolicyKind::smart, table, short_mission());
  ASSERT_GT(r.selected_episode, 0);
  EXPECT_EQ(greedy_score(r.policy.network, env, hp.selection_episodes,
                         derive_seed(4, "training-selection")),
            r.selection_score);
}

TEST(Training, PlateauRule) {
  std::vector<LearningCurveRow> c;
  for (int i = 0; i < 10; ++i) c.push_back({i, -10.0, 0, 0, 10, true});
  EXPECT_TRUE(returns_plateaued(c, 5, 0.05));
  EXPECT_FALSE(returns_plateaued(c, 6, 0.05));
  c[9].total_return = -20.0;
  EXPECT_FALSE(returns_plateaued(c, 5, 0.05));
  c[9].total_return = -10.0;
  c[8].success = false;
  EXPECT_FALSE(returns_plateaued(c, 5, 0.05));
}

TEST(Evaluate, EmptyAndDeterministic) {
  const auto table = small_table();
  const Environment env = make_environment(PolicyKind::smart, table, short_mission());
  const TrainedPolicy p = random_policy(PolicyKind::smart, 4);
  EXPECT_TRUE(evaluate(p, env, 0, 1).empty());
  const auto a = evaluate(p, env, 5, 9);
  const auto b = evaluate(p, env, 5, 9);
  ASSERT_EQ(a.size(), 5u);
  for (int i = 0; i < 5; ++i) {
    EXPECT_EQ(a[i].total_return, b[i].total_return);
    EXPECT_EQ(a[i].failures, b[i].failures);
  }
}

TEST(Evaluate, WrongPolicyShapeRejected) {
  const auto table = small_table();
  const Environment env = make_environment(PolicyKind::blind, table, short_mission());
  EXPECT_THROW(evaluate(random_policy(PolicyKind::smart, 1), env, 1, 1), ShapeError);
}

TEST(Evaluate, FailurePercentageRecount) {
  const auto table = small_table();
  const Environment env = make_environment(PolicyKind::blind, table, short_mission());
  const auto recs = evaluate(random_policy(PolicyKind::blind, 5), env, 10, 3);
  long long failures = 0, steps = 0;
  for (const auto& r : recs)
    for (const auto& row : r.trace) {
      failures += row.rate < short_mission().thresholds.of(row.band);
      ++steps;
    }
  EXPECT_DOUBLE_EQ(failure_percentage(recs), 100.0 * failures / steps);
}

TEST(Audit, OptimalPicksFasterBand) {
  const auto table = small_table();
  const Environment env = make_environment(PolicyKind::optimal, table, short_mission());
  const auto recs = evaluate(random_policy(PolicyKind::optimal, 6), env, 10, 4);
  for (const auto& r : recs) {
    int band = 1;
    for (const auto& row : r.trace) {
      EXPECT_EQ(row.band, oracle_band(row.rate_band1, row.rate_band2, band));
      EXPECT_GE(row.rate, row.band == 1 ? row.rate_band2 : row.rate_band1);
      EXPECT_EQ(row.switched, row.band != band);
      band = row.band;
    }
  }
}

TEST(Audit, BlindSwitchesExactlyAfterFailures) {
  const auto table = small_table();
  const Environment env = make_environment(PolicyKind::blind, table, short_mission());
  const auto recs = evaluate(random_policy(PolicyKind::blind, 7), env, 10, 5);
  for (const auto& r : recs) {
    int failures = 0;
    for (const auto& row : r.trace) {
      EXPECT_EQ(row.switched, row.failure == 1);
      failures += row.failure;
    }
    EXPECT_EQ(r.switches, failures);
  }
}

TEST(Audit, SmartSwitchPenaltiesMatchSwitches) {
  const auto table = small_table();
  const EpisodeConfig e = configure_episode(PolicyKind::smart, short_mission());
  const Environment env = make_environment(PolicyKind::smart, table, e);
  std::mt19937_64 rng(8);
  std::uniform_int_distribution<int> pick(0, 11);
  for (int ep = 0; ep < 10; ++ep) {
    const EpisodeRecord rec = run_episode(
        env, rng, [&](const Eigen::VectorXd&) { return pick(rng); },
        [](const Transition&, const UavState&, const StepOutcome&) {}, true);
    for (std::size_t k = 0; k < rec.trace.size(); ++k) {
      const auto& row = rec.trace[k];
      const bool reached = rec.success && k + 1 == rec.trace.size();
      const double without = compute_reward(
          {reached, row.rate, e.thresholds.of(row.band), false}, e);
      EXPECT_NEAR(row.reward - without, row.switched ? -0.1 : 0.0, 1e-12);
    }
  }
}

TEST(PolicyIo, RoundTripAndKindCheck) {
  TrainedPolicy p = random_policy(PolicyKind::blind, 9);
  p.env_steps = 77;
  p.metadata["preset"] = "T1";
  const auto dir = std::filesystem::temp_directory_path() / "skylink_tests";
  std::filesystem::create_directories(dir);
  save_policy(p, dir / "blind.json");
  const TrainedPolicy q = load_policy(dir / "blind.json");
  EXPECT_EQ(q.kind, PolicyKind::blind);
  EXPECT_EQ(q.network, p.network);
  EXPECT_EQ(q.adam, p.adam);
  EXPECT_EQ(q.env_steps, 77);
  EXPECT_EQ(q.metadata["preset"], "T1");

  nlohmann::json j = policy_to_json(p);
  j["header"]["policy"] = "smart";
  EXPECT_THROW(policy_from_json(j), SchemaError);
  j["header"].erase("policy");
  EXPECT_THROW(policy_from_json(j), SchemaError);
}
