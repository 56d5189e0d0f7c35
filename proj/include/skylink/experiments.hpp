#pragma once

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <exception>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <mutex>
#include <span>
#include <string>
#include <thread>
#include <vector>

#include "skylink/policies.hpp"

namespace skylink {

struct ThresholdPreset {
  std::string name;
  RateThresholds thresholds;
};

inline const std::vector<ThresholdPreset>& threshold_presets() {
  static const std::vector<ThresholdPreset> presets{
      {"T1", {150e3, 3e6}}, {"T2", {300e3, 3e6}}, {"T3", {400e3, 4e6}}};
  return presets;
}

inline const ThresholdPreset& find_preset(const std::string& name) {
  for (const auto& p : threshold_presets())
    if (p.name == name) return p;
  throw ConfigError("unknown preset '" + name + "' (expected one of T1, T2, T3)");
}

inline std::vector<ThresholdPreset> parse_presets(const std::vector<std::string>& names) {
  std::vector<ThresholdPreset> out;
  for (const auto& n : names) out.push_back(find_preset(n));
  return out;
}

// ---------------------------------------------------------------------------
// Statistics

inline double mean_of(std::span<const double> v) {
  if (v.empty()) return 0.0;
  double s = 0.0;
  for (double x : v) s += x;
  return s / static_cast<double>(v.size());
}

// Sample standard deviation over sqrt(n); zero below two samples.
inline double standard_error(std::span<const double> v) {
  if (v.size() < 2) return 0.0;
  const double m = mean_of(v);
  double ss = 0.0;
  for (double x : v) ss += (x - m) * (x - m);
  const double n = static_cast<double>(v.size());
  return std::sqrt(ss / (n - 1.0)) / std::sqrt(n);
}

struct CdfPoint {
  int value = 0;
  double cdf = 0.0;
  friend bool operator==(const CdfPoint&, const CdfPoint&) = default;
};

// Right-continuous step function: one point per distinct value, P(X <= value).
inline std::vector<CdfPoint> empirical_cdf(std::vector<int> values) {
  std::vector<CdfPoint> out;
  if (values.empty()) return out;
  std::sort(values.begin(), values.end());
  const double n = static_cast<double>(values.size());
  for (std::size_t i = 0; i < values.size(); ++i) {
    if (i + 1 < values.size() && values[i + 1] == values[i]) continue;
    out.push_back({values[i], static_cast<double>(i + 1) / n});
  }
  return out;
}

// Step-function lookup; 0 left of the support.
inline double cdf_at(const std::vector<CdfPoint>& cdf, double x) {
  double c = 0.0;
  for (const auto& p : cdf) {
    if (p.value > x) break;
    c = p.cdf;
  }
  return c;
}

inline double median_of(std::vector<double> v) {
  if (v.empty()) return 0.0;
  std::sort(v.begin(), v.end());
  const std::size_t n = v.size();
  return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

// Weights of the mission objective: failures, mission length and switches.
struct ObjectiveWeights {
  double failures = 0.8;
  double steps = 0.1;
  double switches = 0.1;
};

inline ObjectiveWeights objective_weights_from(const RewardWeights& w) {
  return {w.rate, w.travel, w.switching};
}

inline double mission_objective(const EpisodeRecord& r, const ObjectiveWeights& k) {
  return k.failures * r.failures + k.steps * r.steps + k.switches * r.switches;
}

inline double episode_failure_pct(const EpisodeRecord& r) {
  return r.steps == 0 ? 0.0 : 100.0 * r.failures / r.steps;
}

// ---------------------------------------------------------------------------
// Worker pool

// Runs body(i) for i in [0, n) on up to `jobs` threads. The first exception
// is rethrown after all workers stop.
inline void parallel_for(std::size_t n, int jobs, const std::function<void(std::size_t)>& body) {
  if (jobs <= 1 || n <= 1) {
    for (std::size_t i = 0; i < n; ++i) body(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::atomic<bool> failed{false};
  std::exception_ptr error;
  std::mutex error_mutex;
  auto worker = [&] {
    while (!failed) {
      const std::size_t i = next++;
      if (i >= n) return;
      try {
        body(i);
      } catch (...) {
        std::lock_guard lock(error_mutex);
        if (!error) error = std::current_exception();
        failed = true;
      }
    }
  };
  std::vector<std::thread> pool;
  const std::size_t count = std::min<std::size_t>(static_cast<std::size_t>(jobs), n);
  for (std::size_t t = 0; t < count; ++t) pool.emplace_back(worker);
  for (auto& t : pool) t.join();
  if (error) std::rethrow_exception(error);
}

// ---------------------------------------------------------------------------
// Studies: train (or load) one policy per (kind, preset, seed) cell and
// evaluate it greedily under that preset.

inline EpisodeConfig with_preset(EpisodeConfig base, const ThresholdPreset& preset) {
  base.thresholds = preset.thresholds;
  return base;
}

// All kinds and presets evaluated with one seed share the evaluation stream,
// so their fading draws line up step for step.
inline std::uint64_t evaluation_seed(std::uint64_t seed) { return derive_seed(seed, "evaluation"); }

struct SeedResult {
  std::uint64_t seed = 0;
  std::vector<EpisodeRecord> episodes;
  double mean_failure_pct = 0.0;
  double stderr_failure_pct = 0.0;
};

struct CellResult {
  PolicyKind kind = PolicyKind::smart;
  std::string preset;
  std::vector<SeedResult> seeds;
  double mean_failure_pct = 0.0;    // mean of seed means
  double stderr_failure_pct = 0.0;  // across seeds
  double mean_switches = 0.0;
  double median_switches = 0.0;
  double success_rate = 0.0;
  double objective = 0.0;
  std::vector<CdfPoint> switch_cdf;  // pooled over seeds

  std::vector<int> switch_counts() const {
    std::vector<int> out;
    for (const auto& s : seeds)
      for (const auto& e : s.episodes) out.push_back(e.switches);
    return out;
  }
};

inline SeedResult summarize_seed(std::uint64_t seed, std::vector<EpisodeRecord> episodes) {
  SeedResult r;
  r.seed = seed;
  std::vector<double> pct;
  for (const auto& e : episodes) pct.push_back(episode_failure_pct(e));
  r.mean_failure_pct = mean_of(pct);
  r.stderr_failure_pct = standard_error(pct);
  r.episodes = std::move(episodes);
  return r;
}

inline CellResult summarize_cell(PolicyKind kind, const std::string& preset,
                                 std::vector<SeedResult> seeds, const ObjectiveWeights& kappa) {
  CellResult c;
  c.kind = kind;
  c.preset = preset;
  c.seeds = std::move(seeds);
  std::vector<double> means, switches, objective;
  double successes = 0.0;
  for (const auto& s : c.seeds) {
    means.push_back(s.mean_failure_pct);
    for (const auto& e : s.episodes) {
      switches.push_back(e.switches);
      objective.push_back(mission_objective(e, kappa));
      successes += e.success ? 1.0 : 0.0;
    }
  }
  c.mean_failure_pct = mean_of(means);
  c.stderr_failure_pct = standard_error(means);
  c.mean_switches = mean_of(switches);
  c.median_switches = median_of(switches);
  c.success_rate = switches.empty() ? 0.0 : successes / static_cast<double>(switches.size());
  c.objective = mean_of(objective);
  c.switch_cdf = empirical_cdf(c.switch_counts());
  return c;
}

struct StudyConfig {
  std::vector<PolicyKind> kinds;
  std::vector<ThresholdPreset> presets;
  std::vector<std::uint64_t> seeds{1, 2, 3};
  int episodes = 500;
  int jobs = 1;
  bool keep_traces = false;
  ObjectiveWeights kappa;
};

struct StudyResult {
  std::vector<CellResult> cells;

  const CellResult& cell(PolicyKind kind, const std::string& preset) const {
    for (const auto& c : cells)
      if (c.kind == kind && c.preset == preset) return c;
    throw ConfigError("no result for policy " + to_string(kind) + " at preset " + preset);
  }
};

// Supplies the policy for one cell: trains it, or loads a checkpoint.
using PolicySource =
    std::function<TrainedPolicy(PolicyKind, const ThresholdPreset&, std::uint64_t seed)>;

inline PolicySource training_source(std::shared_ptr<const LinkTable> table, EpisodeConfig base,
                                    DqnHyperparams hp) {
  return [table = std::move(table), base, hp](PolicyKind kind, const ThresholdPreset& preset,
                                              std::uint64_t seed) {
    TrainedPolicy p = run_training(kind, table, with_preset(base, preset), hp, seed).policy;
    p.metadata["preset"] = preset.name;
    p.metadata["seed"] = seed;
    return p;
  };
}

inline StudyResult run_study(std::shared_ptr<const LinkTable> table, const EpisodeConfig& base,
                             const StudyConfig& config, const PolicySource& source) {
  if (config.episodes < 0) throw ConfigError("study: episode count must be nonnegative");
  struct Job {
    std::size_t kind, preset, seed;
  };
  std::vector<Job> jobs;
  for (std::size_t k = 0; k < config.kinds.size(); ++k)
    for (std::size_t p = 0; p < config.presets.size(); ++p)
      for (std::size_t s = 0; s < config.seeds.size(); ++s) jobs.push_back({k, p, s});

  std::vector<SeedResult> results(jobs.size());
  parallel_for(jobs.size(), config.jobs, [&](std::size_t i) {
    const Job& j = jobs[i];
    const PolicyKind kind = config.kinds[j.kind];
    const ThresholdPreset& preset = config.presets[j.preset];
    const std::uint64_t seed = config.seeds[j.seed];
    const TrainedPolicy policy = source(kind, preset, seed);
    if (policy.kind != kind)
      throw ConfigError("policy for cell (" + to_string(kind) + ", " + preset.name + ") has kind " +
                        to_string(policy.kind));
    const Environment env = make_environment(kind, table, with_preset(base, preset));
    results[i] = summarize_seed(
        seed, evaluate(policy, env, config.episodes, evaluation_seed(seed), config.keep_traces));
  });

  StudyResult out;
  std::size_t i = 0;
  for (std::size_t k = 0; k < config.kinds.size(); ++k) {
    for (std::size_t p = 0; p < config.presets.size(); ++p) {
      std::vector<SeedResult> seeds;
      for (std::size_t s = 0; s < config.seeds.size(); ++s) seeds.push_back(std::move(results[i++]));
      out.cells.push_back(summarize_cell(config.kinds[k], config.presets[p].name, std::move(seeds),
                                         config.kappa));
    }
  }
  return out;
}

// Trajectory-only policies on a single band, one per (band, preset, seed).
inline StudyResult single_band_failure_study(std::shared_ptr<const LinkTable> table,
                                             const EpisodeConfig& base, const DqnHyperparams& hp,
                                             StudyConfig config) {
  config.kinds = {PolicyKind::sub6_only, PolicyKind::mmwave_only};
  return run_study(table, base, config, training_source(table, base, hp));
}

inline StudyResult compare_policies(std::shared_ptr<const LinkTable> table,
                                    const EpisodeConfig& base, StudyConfig config,
                                    const PolicySource& source) {
  if (config.kinds.empty())
    config.kinds = {PolicyKind::optimal, PolicyKind::smart, PolicyKind::blind};
  return run_study(std::move(table), base, config, source);
}

struct RateTraceRow {
  int k = 0;
  double rate_band1 = 0.0;
  double rate_band2 = 0.0;
};

// Rates on both bands along one greedy episode of `policy`.
inline std::vector<RateTraceRow> rate_trace(const TrainedPolicy& policy, const Environment& env,
                                            std::uint64_t seed) {
  const auto recs = evaluate(policy, env, 1, seed, true);
  std::vector<RateTraceRow> out;
  for (const auto& r : recs.front().trace) out.push_back({r.k, r.rate_band1, r.rate_band2});
  return out;
}

// ---------------------------------------------------------------------------
// CSV output

inline std::string format_real(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

class CsvWriter {
 public:
  CsvWriter(const std::filesystem::path& path, const std::vector<std::string>& header)
      : out_(path) {
    if (!out_) throw IoError("cannot open " + path.string() + " for writing");
    row(header);
  }

  void row(const std::vector<std::string>& cells) {
    for (std::size_t i = 0; i < cells.size(); ++i) out_ << (i ? "," : "") << cells[i];
    out_ << '\n';
    if (!out_) throw IoError("write failed");
  }

 private:
  std::ofstream out_;
};

inline void write_failures_csv(const StudyResult& r, const std::filesystem::path& path) {
  CsvWriter w(path, {"policy", "preset", "seed", "mean_failure_pct", "stderr"});
  for (const auto& c : r.cells) {
    for (const auto& s : c.seeds)
      w.row({to_string(c.kind), c.preset, std::to_string(s.seed), format_real(s.mean_failure_pct),
             format_real(s.stderr_failure_pct)});
    w.row({to_string(c.kind), c.preset, "all", format_real(c.mean_failure_pct),
           format_real(c.stderr_failure_pct)});
  }
}

inline void write_switch_cdf_csv(const StudyResult& r, const std::filesystem::path& path) {
  CsvWriter w(path, {"policy", "preset", "switch_count", "cdf"});
  for (const auto& c : r.cells)
    for (const auto& p : c.switch_cdf)
      w.row({to_string(c.kind), c.preset, std::to_string(p.value), format_real(p.cdf)});
}

inline void write_summary_csv(const StudyResult& r, const std::filesystem::path& path) {
  CsvWriter w(path, {"policy", "preset", "mean_failure_pct", "stderr", "mean_switches",
                     "median_switches", "success_rate", "objective"});
  for (const auto& c : r.cells)
    w.row({to_string(c.kind), c.preset, format_real(c.mean_failure_pct),
           format_real(c.stderr_failure_pct), format_real(c.mean_switches),
           format_real(c.median_switches), format_real(c.success_rate), format_real(c.objective)});
}

inline const std::vector<std::string>& episode_columns() {
  static const std::vector<std::string> cols{"policy", "preset",   "seed",    "episode", "steps",
                                             "failures", "switches", "success", "return"};
  return cols;
}

inline std::vector<std::string> episode_row(const std::string& policy, const std::string& preset,
                                            std::uint64_t seed, const EpisodeRecord& e) {
  return {policy,
          preset,
          std::to_string(seed),
          std::to_string(e.episode),
          std::to_string(e.steps),
          std::to_string(e.failures),
          std::to_string(e.switches),
          e.success ? "1" : "0",
          format_real(e.total_return)};
}

inline void write_episodes_csv(const StudyResult& r, const std::filesystem::path& path) {
  CsvWriter w(path, episode_columns());
  for (const auto& c : r.cells)
    for (const auto& s : c.seeds)
      for (const auto& e : s.episodes) w.row(episode_row(to_string(c.kind), c.preset, s.seed, e));
}

inline void write_traces_csv(const StudyResult& r, const std::filesystem::path& path) {
  CsvWriter w(path, {"policy", "preset", "seed", "episode", "k", "x", "y", "h", "band", "cell_id",
                     "rate", "failure", "switched", "reward"});
  for (const auto& c : r.cells)
    for (const auto& s : c.seeds)
      for (const auto& e : s.episodes)
        for (const auto& t : e.trace)
          w.row({to_string(c.kind), c.preset, std::to_string(s.seed), std::to_string(e.episode),
                 std::to_string(t.k), format_real(t.position.x), format_real(t.position.y),
                 format_real(t.position.z), std::to_string(t.band), std::to_string(t.cell_id),
                 format_real(t.rate), std::to_string(t.failure), t.switched ? "1" : "0",
                 format_real(t.reward)});
}

inline void write_rate_trace_csv(const std::vector<RateTraceRow>& rows,
                                 const std::filesystem::path& path) {
  CsvWriter w(path, {"k", "rate_band1", "rate_band2"});
  for (const auto& r : rows)
    w.row({std::to_string(r.k), format_real(r.rate_band1), format_real(r.rate_band2)});
}

inline void write_learning_curve_csv(const std::vector<LearningCurveRow>& rows,
                                     const std::filesystem::path& path) {
  CsvWriter w(path, {"episode", "return", "failures", "switches", "steps"});
  for (const auto& r : rows)
    w.row({std::to_string(r.episode), format_real(r.total_return), std::to_string(r.failures),
           std::to_string(r.switches), std::to_string(r.steps)});
}

}  // namespace skylink
