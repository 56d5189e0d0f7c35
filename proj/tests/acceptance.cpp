// Acceptance run: one PASS/FAIL line per criterion, nonzero exit on any FAIL.
// Usage: skylink_acceptance [--workdir DIR] [--only 1,2,...]

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <functional>
#include <iostream>
#include <map>
#include <random>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "skylink/skylink.hpp"

using namespace skylink;
namespace fs = std::filesystem;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

std::string fmt(const char* f, double a, double b = 0, double c = 0, double d = 0, double e = 0,
                double g = 0) {
  char buf[512];
  std::snprintf(buf, sizeof buf, f, a, b, c, d, e, g);
  return buf;
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

// ---------------------------------------------------------------------------
// 1. Gradients against central differences

double loss_at(const QNetwork& net, const Eigen::VectorXd& x, int a, double y) {
  const double e = y - net.forward(x)[a];
  return e * e;
}

// Relative error over `checks` parameters (all of them when checks <= 0).
double fd_relative_error(QNetwork net, const Eigen::VectorXd& x, int a, double y, int checks,
                         std::mt19937_64& rng) {
  const ParamSet g = backward(net, x, a, y);
  std::vector<std::pair<double*, double>> params;
  for (std::size_t l = 0; l < net.params().size(); ++l) {
    auto& L = net.params()[l];
    for (Eigen::Index i = 0; i < L.weights.size(); ++i)
      params.push_back({&L.weights.data()[i], g[l].weights.data()[i]});
    for (Eigen::Index i = 0; i < L.biases.size(); ++i)
      params.push_back({&L.biases[i], g[l].biases[i]});
  }
  if (checks > 0 && static_cast<std::size_t>(checks) < params.size()) {
    std::shuffle(params.begin(), params.end(), rng);
    params.resize(checks);
  }
  // The loss is piecewise quadratic in any single parameter of a ReLU net, so
  // a wider step costs no truncation error and cuts round-off.
  const double h = 1e-5;
  double worst = 0.0;
  for (auto& [p, analytic] : params) {
    const double saved = *p;
    *p = saved + h;
    const double up = loss_at(net, x, a, y);
    *p = saved - h;
    const double down = loss_at(net, x, a, y);
    *p = saved;
    const double numeric = (up - down) / (2 * h);
    const double scale = std::max({std::abs(numeric), std::abs(analytic), 1e-6});
    worst = std::max(worst, std::abs(numeric - analytic) / scale);
  }
  return worst;
}

Outcome criterion_gradients() {
  const auto t0 = std::chrono::steady_clock::now();
  std::mt19937_64 rng(101);
  std::normal_distribution<double> n(0.0, 1.0);
  double worst = 0.0;
  int nets = 0;
  // Every input/output size the policies use, at small and full hidden width.
  for (int in : {3, 4})
    for (int out : {6, 12})
      for (int width : {8, 32, 128})
        for (int rep = 0; rep < 2; ++rep) {
          const int layers = width == 128 ? 4 : 1 + rep;
          QNetwork net(mlp_widths(in, layers, width, out), rng);
          Eigen::VectorXd x(in);
          for (auto& v : x) v = n(rng);
          const int checks = width == 128 ? 2000 : 0;
          worst = std::max(worst, fd_relative_error(net, x, nets % out, n(rng), checks, rng));
          ++nets;
        }
  const double t = seconds_since(t0);
  return {nets >= 20 && worst <= 1e-4 && t < 60.0,
          fmt("%.0f networks, max relative error %.2e, %.1f s", nets, worst, t)};
}

// ---------------------------------------------------------------------------
// 2. Double-Q target and replay memory

Outcome criterion_ddqn() {
  QNetwork primary({2, 4}), target({2, 4});
  const std::vector<double> qp{0, 0, 1, 0}, qt{9, 9, 5, 9};
  for (int i = 0; i < 4; ++i) {
    primary.params()[0].biases[i] = qp[i];
    target.params()[0].biases[i] = qt[i];
  }
  const Transition t{Eigen::Vector2d(0, 0), 0, 0.5, Eigen::Vector2d(1, 1), false};
  const double y = ddqn_target(primary, target, t, 1.0);
  Transition terminal = t;
  terminal.terminal = true;
  const bool target_ok = y == 0.5 + 5.0 && ddqn_target(primary, target, terminal, 1.0) == 0.5;

  const std::size_t H = 64, extra = 23;
  ReplayMemory m(H);
  bool capacity_ok = true;
  for (std::size_t i = 0; i < H + extra; ++i) {
    m.push({Eigen::Vector2d(0, 0), 0, static_cast<double>(i), Eigen::Vector2d(0, 0), false});
    capacity_ok = capacity_ok && m.size() == std::min(i + 1, H);
  }
  std::set<double> kept;
  for (std::size_t i = 0; i < m.size(); ++i) kept.insert(m[i].reward);
  bool eviction_ok = kept.size() == H;
  for (std::size_t i = 0; i < H + extra; ++i)
    eviction_ok = eviction_ok && (kept.count(static_cast<double>(i)) == (i >= extra ? 1u : 0u));

  std::mt19937_64 rng(7);
  std::set<std::size_t> seen;
  bool distinct = true;
  for (int d = 0; d < 200; ++d) {
    const auto idx = m.sample_indices(32, rng);
    distinct = distinct && std::set<std::size_t>(idx.begin(), idx.end()).size() == idx.size();
    seen.insert(idx.begin(), idx.end());
  }
  const bool sampling_ok = distinct && seen.size() == H;
  return {target_ok && capacity_ok && eviction_ok && sampling_ok,
          fmt("target %.1f (expected 5.5)", y) + ", capacity " + (capacity_ok ? "ok" : "bad") +
              ", eviction " + (eviction_ok ? "ok" : "bad") + ", sampling " +
              (sampling_ok ? "ok" : "bad")};
}

// ---------------------------------------------------------------------------
// 3. 5x5 gridworld

Outcome criterion_gridworld() {
  const auto t0 = std::chrono::steady_clock::now();
  DqnHyperparams hp;
  std::mt19937_64 rng(3);
  DdqnAgent agent(2, 4, hp, rng);
  auto obs = [](int x, int y) {
    Eigen::VectorXd o(2);
    o << x / 4.0, y / 4.0;
    return o;
  };
  auto move = [](int x, int y, int a) {
    x = std::clamp(x + (a == 0) - (a == 1), 0, 4);
    y = std::clamp(y + (a == 2) - (a == 3), 0, 4);
    return std::pair{x, y};
  };
  std::uniform_int_distribution<int> cell(0, 4);
  int x = 0, y = 0, k = 0;
  auto reset = [&] {
    do {
      x = cell(rng);
      y = cell(rng);
    } while (x == 4 && y == 4);
    k = 0;
  };
  reset();
  while (agent.gradient_steps() < 3500) {
    const Eigen::VectorXd o = obs(x, y);
    const int a = agent.act(o, rng);
    const auto [nx, ny] = move(x, y, a);
    const bool goal = nx == 4 && ny == 4;
    agent.observe({o, a, goal ? 0.0 : -1.0, obs(nx, ny), goal}, rng);
    x = nx;
    y = ny;
    if (goal || ++k >= 50) reset();
  }
  int optimal = 0, starts = 0;
  for (int sx = 0; sx < 5; ++sx)
    for (int sy = 0; sy < 5; ++sy) {
      if (sx == 4 && sy == 4) continue;
      ++starts;
      int cx = sx, cy = sy, n = 0;
      while (!(cx == 4 && cy == 4) && n < 20) {
        std::tie(cx, cy) = move(cx, cy, greedy_action(agent.primary(), obs(cx, cy)));
        ++n;
      }
      optimal += cx == 4 && cy == 4 && n == (4 - sx) + (4 - sy);
    }
  const double t = seconds_since(t0);
  const double frac = static_cast<double>(optimal) / starts;
  return {frac >= 0.9 && t < 300.0,
          fmt("%.0f/%.0f starts optimal after %.0f gradient steps, %.1f s", optimal, starts,
              static_cast<double>(agent.gradient_steps()), t)};
}

// ---------------------------------------------------------------------------
// 4. Channel statistics

Outcome criterion_channel() {
  std::mt19937_64 rng(4);
  double worst_mean = 0.0;
  for (const BandSpec& b : {default_sub6_band(), default_mmwave_band()}) {
    double s = 0.0;
    const int n = 1000000;
    for (int i = 0; i < n; ++i) s += draw_fading(b, rng);
    worst_mean = std::max(worst_mean, std::abs(s / n - 1.0));
  }

  BandSpec unit = default_sub6_band();
  unit.nakagami_m = 1.0;
  const int n = 100000;
  std::vector<double> x(n);
  for (auto& v : x) v = draw_fading(unit, rng);
  std::sort(x.begin(), x.end());
  double ks = 0.0;
  for (int i = 0; i < n; ++i) {
    const double f = 1.0 - std::exp(-x[i]);
    ks = std::max({ks, std::abs(f - static_cast<double>(i) / n),
                   std::abs(static_cast<double>(i + 1) / n - f)});
  }
  const double ks_crit = 1.628 / std::sqrt(static_cast<double>(n));

  const Scenario s = generate_scenario({}, 4);
  std::uniform_real_distribution<double> ux(0, 2000), uh(60, 120);
  double worst_sinr = 0.0;
  for (int t = 0; t < 100; ++t) {
    const Vec3 uav{ux(rng), ux(rng), uh(rng)};
    const int band_id = 1 + t % 2;
    const BandSpec& band = s.band(band_id);
    std::vector<double> fading(s.num_cells());
    for (auto& f : fading) f = draw_fading(band, rng);
    const int serving = associate(s, uav, band_id);
    const double got = compute_sinr(s, uav, serving, band_id, fading).sinr;
    double signal = 0.0, interference = 0.0;
    for (int c = 0; c < s.num_cells(); ++c) {
      const Vec3 bs = s.sites[c / 3].position;
      const double d = (uav - bs).norm();
      const bool los = check_los(s, bs, uav);
      const auto& p = band.pathloss;
      const double pl = los ? p.x_los * std::pow(d, -p.alpha_los) : p.x_nlos * std::pow(d, -p.alpha_nlos);
      const double g = antenna_gain(s.sites[c / 3].sectors[c % 3], band_id, link_geometry(bs, uav, los));
      const double gamma = band.tx_power * pl * fading[c] * g;
      (c == serving ? signal : interference) += gamma;
    }
    const double noise =
        std::pow(10.0, band.noise_psd_db / 10.0) * band.bandwidth_per_rb * band.num_rbs;
    const double expected = signal / (noise + interference);
    worst_sinr = std::max(worst_sinr, std::abs(got - expected) / expected);
  }
  return {worst_mean <= 0.01 && ks < ks_crit && worst_sinr <= 1e-12,
          fmt("mean deviation %.2e, KS %.4f < %.4f, SINR relative error %.1e", worst_mean, ks,
              ks_crit, worst_sinr)};
}

// ---------------------------------------------------------------------------
// Shared desk-scale setup for the learning criteria

struct Desk {
  std::shared_ptr<const LinkTable> table;
  EpisodeConfig base;
  DqnHyperparams hp;
};

const Desk& desk() {
  static const Desk d = [] {
    Desk x;
    x.table = make_link_table(std::make_shared<const Scenario>(generate_scenario({}, 1)), x.base);
    return x;
  }();
  return d;
}

StudyConfig desk_study(std::vector<ThresholdPreset> presets, bool traces) {
  StudyConfig cfg;
  cfg.presets = std::move(presets);
  cfg.seeds = {1, 2, 3};
  cfg.episodes = 500;
  cfg.keep_traces = traces;
  cfg.kappa = objective_weights_from(desk().base.weights);
  return cfg;
}

const StudyResult& comparison() {
  static const StudyResult r = [] {
    const auto t0 = std::chrono::steady_clock::now();
    const Desk& d = desk();
    StudyResult out = compare_policies(d.table, d.base,
                                       desk_study(parse_presets({"T1", "T3"}), true),
                                       training_source(d.table, d.base, d.hp));
    std::cout << "  (policy comparison: " << fmt("%.0f", seconds_since(t0)) << " s)\n";
    for (const auto& c : out.cells)
      std::cout << "  " << to_string(c.kind) << " " << c.preset
                << fmt(": failure %.2f%% +- %.2f, median switches %.1f, success %.3f",
                       c.mean_failure_pct, c.stderr_failure_pct, c.median_switches,
                       c.success_rate)
                << "\n";
    return out;
  }();
  return r;
}

double diff_se(const CellResult& a, const CellResult& b) {
  return std::hypot(a.stderr_failure_pct, b.stderr_failure_pct);
}

// ---------------------------------------------------------------------------
// 5. Single-band failures grow with the threshold

Outcome criterion_single_band() {
  const auto t0 = std::chrono::steady_clock::now();
  const Desk& d = desk();
  const StudyResult r =
      single_band_failure_study(d.table, d.base, d.hp, desk_study(threshold_presets(), false));
  const double t = seconds_since(t0);
  bool monotone = true;
  std::ostringstream detail;
  for (auto kind : {PolicyKind::sub6_only, PolicyKind::mmwave_only}) {
    detail << to_string(kind);
    double prev = -1.0;
    for (const auto& p : threshold_presets()) {
      const double v = r.cell(kind, p.name).mean_failure_pct;
      detail << fmt(" %.2f", v);
      monotone = monotone && v >= prev;
      prev = v;
    }
    detail << "; ";
  }
  detail << fmt("%.0f s", t);
  return {monotone && t < 1800.0, detail.str()};
}

// ---------------------------------------------------------------------------
// 6-8. Band-switch policies

Outcome criterion_ordering_t3() {
  const StudyResult& r = comparison();
  const auto& opt = r.cell(PolicyKind::optimal, "T3");
  const auto& smart = r.cell(PolicyKind::smart, "T3");
  const auto& blind = r.cell(PolicyKind::blind, "T3");
  const double g1 = smart.mean_failure_pct - opt.mean_failure_pct;
  const double g2 = blind.mean_failure_pct - smart.mean_failure_pct;
  const double s1 = diff_se(smart, opt), s2 = diff_se(blind, smart);
  return {g1 >= -s1 && g2 >= -s2,
          fmt("optimal %.2f, smart %.2f, blind %.2f; ", opt.mean_failure_pct,
              smart.mean_failure_pct, blind.mean_failure_pct) +
              fmt("gaps %.2f (se %.2f), %.2f (se %.2f)", g1, s1, g2, s2)};
}

Outcome criterion_similar_t1() {
  const StudyResult& r = comparison();
  const auto& smart = r.cell(PolicyKind::smart, "T1");
  const auto& blind = r.cell(PolicyKind::blind, "T1");
  const double gap = std::abs(smart.mean_failure_pct - blind.mean_failure_pct);
  const double se = diff_se(smart, blind);
  return {gap <= 2.0 || gap <= 2.0 * se,
          fmt("smart %.2f, blind %.2f, |gap| %.2f pp, 2 se %.2f", smart.mean_failure_pct,
              blind.mean_failure_pct, gap, 2 * se)};
}

Outcome criterion_switches_t3() {
  const StudyResult& r = comparison();
  const auto& smart = r.cell(PolicyKind::smart, "T3");
  const auto& blind = r.cell(PolicyKind::blind, "T3");
  const double m = blind.median_switches;
  const double fs = cdf_at(smart.switch_cdf, m), fb = cdf_at(blind.switch_cdf, m);
  return {smart.median_switches < m && fs >= fb,
          fmt("median smart %.1f, blind %.1f; CDF at %.1f: smart %.3f, blind %.3f",
              smart.median_switches, m, m, fs, fb)};
}

// ---------------------------------------------------------------------------
// 9. Reproducibility

std::string pipeline_bytes(const fs::path& dir) {
  fs::create_directories(dir);
  const Scenario sc = generate_scenario({}, 9);
  save_scenario(sc, dir / "scenario.json");
  EpisodeConfig e = with_preset(EpisodeConfig{}, find_preset("T3"));
  const auto table = make_link_table(std::make_shared<const Scenario>(load_scenario(dir / "scenario.json")), e);
  TrainingResult tr = run_training(PolicyKind::smart, table, e, DqnHyperparams{}, 9);
  save_policy(tr.policy, dir / "policy.json");
  write_learning_curve_csv(tr.curve, dir / "learning_curve.csv");
  const TrainedPolicy p = load_policy(dir / "policy.json");
  const Environment env = make_environment(PolicyKind::smart, table, e);
  StudyResult r{{summarize_cell(PolicyKind::smart, "T3",
                                {summarize_seed(9, evaluate(p, env, 200, evaluation_seed(9)))}, {})}};
  write_episodes_csv(r, dir / "episodes.csv");
  write_traces_csv(r, dir / "traces.csv");
  std::string all;
  for (const char* f : {"scenario.json", "policy.json", "learning_curve.csv", "episodes.csv",
                        "traces.csv"})
    all += read_text_file(dir / f);
  return all;
}

Outcome criterion_reproducible(const fs::path& workdir) {
  const std::string a = pipeline_bytes(workdir / "run1");
  const std::string b = pipeline_bytes(workdir / "run2");
  return {!a.empty() && a == b, fmt("%.0f bytes per run, runs ", static_cast<double>(a.size())) +
                                    (a == b ? "identical" : "differ")};
}

// ---------------------------------------------------------------------------
// 10. Optimal-policy trace audit

Outcome criterion_oracle_audit() {
  const StudyResult& r = comparison();
  long long steps = 0, violations = 0;
  for (const auto& c : r.cells) {
    if (c.kind != PolicyKind::optimal) continue;
    for (const auto& s : c.seeds)
      for (const auto& e : s.episodes)
        for (const auto& row : e.trace) {
          ++steps;
          const double chosen = row.band == 1 ? row.rate_band1 : row.rate_band2;
          const double other = row.band == 1 ? row.rate_band2 : row.rate_band1;
          violations += chosen < other || chosen != row.rate;
        }
  }
  return {steps > 0 && violations == 0,
          fmt("%.0f logged steps, %.0f violations", static_cast<double>(steps),
              static_cast<double>(violations))};
}

}  // namespace

int main(int argc, char** argv) {
  fs::path workdir = fs::temp_directory_path() / "skylink_acceptance";
  std::set<int> only;
  for (int i = 1; i < argc; ++i) {
    const std::string a = argv[i];
    if (a == "--workdir" && i + 1 < argc) {
      workdir = argv[++i];
    } else if (a == "--only" && i + 1 < argc) {
      std::stringstream ss(argv[++i]);
      for (std::string t; std::getline(ss, t, ',');) only.insert(std::stoi(t));
    } else {
      std::cerr << "usage: skylink_acceptance [--workdir DIR] [--only 1,2,...]\n";
      return 1;
    }
  }

  const std::vector<std::pair<std::string, std::function<Outcome()>>> criteria{
      {"gradient check", criterion_gradients},
      {"double-Q target and replay", criterion_ddqn},
      {"gridworld", criterion_gridworld},
      {"channel statistics", criterion_channel},
      {"single-band failures rise with threshold", criterion_single_band},
      {"T3 ordering optimal <= smart <= blind", criterion_ordering_t3},
      {"T1 smart similar to blind", criterion_similar_t1},
      {"T3 smart switches less than blind", criterion_switches_t3},
      {"bit-identical pipeline", [&] { return criterion_reproducible(workdir); }},
      {"optimal trace audit", criterion_oracle_audit},
  };

  int failed = 0;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    const int id = static_cast<int>(i) + 1;
    if (!only.empty() && !only.count(id)) continue;
    Outcome o;
    try {
      o = criteria[i].second();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    failed += !o.pass;
    std::cout << "criterion " << id << " " << (o.pass ? "PASS" : "FAIL") << "  "
              << criteria[i].first << ": " << o.detail << std::endl;
  }
  std::cout << (failed ? "FAILED " : "all passed ") << "(" << failed << " failing)\n";
  return failed ? 1 : 0;
}
