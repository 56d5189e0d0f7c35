#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "skylink/common.hpp"
#include "skylink/geometry.hpp"

namespace skylink {

inline constexpr int kScenarioSchemaVersion = 1;
inline constexpr int kSectorsPerSite = 3;

struct AreaSpec {
  double x_min = 0.0;
  double x_max = 2000.0;
  double y_min = 0.0;
  double y_max = 2000.0;
  double h_min = 60.0;  // UAV altitude bounds
  double h_max = 120.0;

  friend bool operator==(const AreaSpec&, const AreaSpec&) = default;

  void validate() const {
    if (!(x_min < x_max) || !(y_min < y_max))
      throw ConfigError("area: horizontal bounds must satisfy min < max");
    if (!(h_min > 0.0) || !(h_min < h_max))
      throw ConfigError("area: altitude bounds must satisfy 0 < h_min < h_max");
  }
  bool contains_xy(double x, double y) const {
    return x >= x_min && x <= x_max && y >= y_min && y <= y_max;
  }
};

struct Building {
  Rect footprint;
  double height = 0.0;

  friend bool operator==(const Building&, const Building&) = default;
};

// Two-branch power law: gain = x * d^-alpha, with x the gain at 1 m.
struct PathLossParams {
  double alpha_los = 2.0;
  double alpha_nlos = 3.3;
  double x_los = 1.0;
  double x_nlos = 1.0;

  friend bool operator==(const PathLossParams&, const PathLossParams&) = default;
};

struct BandSpec {
  int band_id = 1;
  double carrier_frequency = 2e9;  // Hz
  double bandwidth_per_rb = 180e3;  // Hz
  int num_rbs = 1;
  double tx_power = 1.0;       // W
  double noise_psd_db = -204;  // dBW/Hz
  double nakagami_m = 1.0;
  PathLossParams pathloss;

  friend bool operator==(const BandSpec&, const BandSpec&) = default;

  double bandwidth() const { return bandwidth_per_rb * num_rbs; }
  double noise_power() const { return from_db(noise_psd_db) * bandwidth(); }

  void validate() const {
    if (band_id != 1 && band_id != 2) throw ConfigError("band_id must be 1 or 2");
    if (!(carrier_frequency > 0.0) || !(bandwidth_per_rb > 0.0) || num_rbs <= 0)
      throw ConfigError("band: frequency, bandwidth and RB count must be positive");
    if (!(tx_power > 0.0)) throw ConfigError("band: tx_power must be positive");
    if (!(nakagami_m >= 1.0)) throw ConfigError("band: nakagami_m must be >= 1");
    const auto& p = pathloss;
    if (!(p.alpha_los > 0.0) || !(p.alpha_nlos >= p.alpha_los))
      throw ConfigError("band: need alpha_nlos >= alpha_los > 0");
    if (!(p.x_los > 0.0) || !(p.x_nlos > 0.0))
      throw ConfigError("band: 1 m path gains must be positive");
  }
};

// Free-space power gain at 1 m, (lambda / 4 pi)^2.
inline double free_space_gain_1m(double frequency_hz) {
  const double lambda = kSpeedOfLight / frequency_hz;
  const double g = lambda / (4.0 * kPi);
  return g * g;
}

inline BandSpec default_sub6_band() {
  BandSpec b;
  b.band_id = 1;
  b.carrier_frequency = 2e9;
  b.bandwidth_per_rb = 180e3;
  b.num_rbs = 1;
  b.tx_power = 1.0;
  b.noise_psd_db = -204.0;
  b.nakagami_m = 1.0;
  const double x = free_space_gain_1m(b.carrier_frequency);
  b.pathloss = {2.2, 3.6, x, x};
  return b;
}

// Noise density listed for the mmWave band in the original parameter table.
// Kept available behind a flag; it makes the band noise-limited everywhere.
inline constexpr double kTableMmwaveNoisePsdDb = -120.0;

inline BandSpec default_mmwave_band() {
  BandSpec b;
  b.band_id = 2;
  b.carrier_frequency = 28e9;
  b.bandwidth_per_rb = 180e3;
  b.num_rbs = 10;
  b.tx_power = 0.1;
  b.noise_psd_db = -204.0;
  b.nakagami_m = 3.0;
  const double x = free_space_gain_1m(b.carrier_frequency);
  b.pathloss = {2.0, 3.3, x, x};
  return b;
}

struct Sector {
  double azimuth_center = 0.0;  // degrees
  double tilt_band1 = -10.0;    // beam elevation, degrees (negative = down)
  double tilt_band2 = 10.0;
  int elements_band1 = 8;       // vertical ULA
  int elements_band2_side = 8;  // planar side x side array

  friend bool operator==(const Sector&, const Sector&) = default;
};

struct DuSite {
  Vec3 position;
  std::array<Sector, kSectorsPerSite> sectors;

  friend bool operator==(const DuSite&, const DuSite&) = default;
};

struct Scenario {
  AreaSpec area;
  std::vector<Building> buildings;
  std::vector<DuSite> sites;
  std::array<BandSpec, 2> bands{default_sub6_band(), default_mmwave_band()};
  std::uint64_t rng_seed = 0;

  friend bool operator==(const Scenario&, const Scenario&) = default;

  int num_cells() const { return static_cast<int>(sites.size()) * kSectorsPerSite; }
  const BandSpec& band(int band_id) const { return bands.at(band_id - 1); }
  const DuSite& site_of(int cell_id) const { return sites.at(cell_id / kSectorsPerSite); }
  const Sector& sector_of(int cell_id) const {
    return site_of(cell_id).sectors[cell_id % kSectorsPerSite];
  }
};

struct ScenarioConfig {
  AreaSpec area;
  // Statistical urban building model: built-up fraction, buildings per km^2,
  // Rayleigh height scale, truncation height.
  double built_up_fraction = 0.3;
  double buildings_per_km2 = 300.0;
  double height_scale = 20.0;
  double max_building_height = 50.0;

  int num_sites = 5;
  double site_offset = 500.0;
  double du_height = 25.0;
  std::array<double, kSectorsPerSite> sector_azimuths{30.0, 150.0, 270.0};
  Sector sector_template;

  std::array<BandSpec, 2> bands{default_sub6_band(), default_mmwave_band()};

  void validate() const {
    area.validate();
    if (!(built_up_fraction > 0.0) || built_up_fraction > 1.0)
      throw ConfigError("built_up_fraction must be in (0, 1]");
    if (!(buildings_per_km2 >= 0.0)) throw ConfigError("buildings_per_km2 must be >= 0");
    if (!(height_scale > 0.0)) throw ConfigError("height_scale must be positive");
    if (!(max_building_height > 0.0)) throw ConfigError("max_building_height must be positive");
    if (num_sites < 1 || num_sites > 5) throw ConfigError("num_sites must be in [1, 5]");
    if (!(site_offset >= 0.0)) throw ConfigError("site_offset must be >= 0");
    if (!(du_height > 0.0)) throw ConfigError("du_height must be positive");
    if (sector_template.elements_band1 < 1 || sector_template.elements_band2_side < 1)
      throw ConfigError("antenna element counts must be positive");
    for (const auto& b : bands) b.validate();
    if (bands[0].band_id != 1 || bands[1].band_id != 2)
      throw ConfigError("bands must be listed as [band 1, band 2]");
  }
};

// Draws a Rayleigh(scale) height conditioned on h <= cap via the inverse CDF.
template <typename Rng>
double draw_truncated_rayleigh(double scale, double cap, Rng& rng) {
  std::uniform_real_distribution<double> uni(0.0, 1.0);
  const double mass = 1.0 - std::exp(-cap * cap / (2.0 * scale * scale));
  for (;;) {
    const double u = uni(rng);
    const double h = scale * std::sqrt(-2.0 * std::log1p(-u * mass));
    if (h > 0.0 && h <= cap) return h;
  }
}

inline Scenario generate_scenario(const ScenarioConfig& config, std::uint64_t seed) {
  config.validate();
  Scenario s;
  s.area = config.area;
  s.bands = config.bands;
  s.rng_seed = seed;

  const double cx = 0.5 * (config.area.x_min + config.area.x_max);
  const double cy = 0.5 * (config.area.y_min + config.area.y_max);
  const double o = config.site_offset;
  const std::array<std::pair<double, double>, 5> layout{
      {{0.0, 0.0}, {-o, -o}, {o, -o}, {-o, o}, {o, o}}};
  for (int i = 0; i < config.num_sites; ++i) {
    DuSite site;
    site.position = {cx + layout[i].first, cy + layout[i].second, config.du_height};
    if (!config.area.contains_xy(site.position.x, site.position.y))
      throw ConfigError("site " + std::to_string(i) + " falls outside the area");
    for (int k = 0; k < kSectorsPerSite; ++k) {
      site.sectors[k] = config.sector_template;
      site.sectors[k].azimuth_center = config.sector_azimuths[k];
    }
    s.sites.push_back(site);
  }

  if (config.buildings_per_km2 <= 0.0) return s;

  // One building per jittered grid cell; footprint area fixes the built-up
  // fraction, cell area fixes the density.
  std::mt19937_64 rng(derive_seed(seed, "scenario"));
  const double cell = 1000.0 / std::sqrt(config.buildings_per_km2);
  const double side = 1000.0 * std::sqrt(config.built_up_fraction / config.buildings_per_km2);
  const int nx = static_cast<int>(std::floor((config.area.x_max - config.area.x_min) / cell));
  const int ny = static_cast<int>(std::floor((config.area.y_max - config.area.y_min) / cell));
  std::uniform_real_distribution<double> jitter(0.0, cell - side);
  for (int j = 0; j < ny; ++j) {
    for (int i = 0; i < nx; ++i) {
      Building b;
      b.footprint.x_min = config.area.x_min + i * cell + jitter(rng);
      b.footprint.y_min = config.area.y_min + j * cell + jitter(rng);
      b.footprint.x_max = b.footprint.x_min + side;
      b.footprint.y_max = b.footprint.y_min + side;
      b.height = draw_truncated_rayleigh(config.height_scale, config.max_building_height, rng);
      bool covers_site = false;
      for (const auto& site : s.sites)
        covers_site = covers_site || b.footprint.contains(site.position.x, site.position.y);
      if (!covers_site) s.buildings.push_back(b);
    }
  }
  return s;
}

// ---------------------------------------------------------------------------
// Serialization

inline nlohmann::json band_to_json(const BandSpec& b) {
  return {{"band_id", b.band_id},
          {"carrier_frequency", b.carrier_frequency},
          {"bandwidth_per_rb", b.bandwidth_per_rb},
          {"num_rbs", b.num_rbs},
          {"tx_power", b.tx_power},
          {"noise_psd_db", b.noise_psd_db},
          {"nakagami_m", b.nakagami_m},
          {"pathloss",
           {{"alpha_los", b.pathloss.alpha_los},
            {"alpha_nlos", b.pathloss.alpha_nlos},
            {"x_los", b.pathloss.x_los},
            {"x_nlos", b.pathloss.x_nlos}}}};
}

inline BandSpec band_from_json(const nlohmann::json& j, BandSpec b = {}) {
  b.band_id = j.value("band_id", b.band_id);
  b.carrier_frequency = j.value("carrier_frequency", b.carrier_frequency);
  b.bandwidth_per_rb = j.value("bandwidth_per_rb", b.bandwidth_per_rb);
  b.num_rbs = j.value("num_rbs", b.num_rbs);
  b.tx_power = j.value("tx_power", b.tx_power);
  b.noise_psd_db = j.value("noise_psd_db", b.noise_psd_db);
  b.nakagami_m = j.value("nakagami_m", b.nakagami_m);
  if (j.contains("pathloss")) {
    const auto& p = j.at("pathloss");
    b.pathloss.alpha_los = p.value("alpha_los", b.pathloss.alpha_los);
    b.pathloss.alpha_nlos = p.value("alpha_nlos", b.pathloss.alpha_nlos);
    b.pathloss.x_los = p.value("x_los", b.pathloss.x_los);
    b.pathloss.x_nlos = p.value("x_nlos", b.pathloss.x_nlos);
  }
  return b;
}

inline nlohmann::json area_to_json(const AreaSpec& a) {
  return {{"x_min", a.x_min}, {"x_max", a.x_max}, {"y_min", a.y_min},
          {"y_max", a.y_max}, {"h_min", a.h_min}, {"h_max", a.h_max}};
}

inline AreaSpec area_from_json(const nlohmann::json& j, AreaSpec a = {}) {
  a.x_min = j.value("x_min", a.x_min);
  a.x_max = j.value("x_max", a.x_max);
  a.y_min = j.value("y_min", a.y_min);
  a.y_max = j.value("y_max", a.y_max);
  a.h_min = j.value("h_min", a.h_min);
  a.h_max = j.value("h_max", a.h_max);
  return a;
}

inline nlohmann::json scenario_to_json(const Scenario& s) {
  nlohmann::json j;
  j["version"] = kScenarioSchemaVersion;
  j["area"] = area_to_json(s.area);
  j["bands"] = nlohmann::json::array({band_to_json(s.bands[0]), band_to_json(s.bands[1])});
  auto& sites = j["sites"] = nlohmann::json::array();
  for (const auto& site : s.sites) {
    nlohmann::json js;
    js["position"] = {site.position.x, site.position.y, site.position.z};
    auto& secs = js["sectors"] = nlohmann::json::array();
    for (const auto& sec : site.sectors) {
      secs.push_back({{"azimuth_center", sec.azimuth_center},
                      {"tilt_band1", sec.tilt_band1},
                      {"tilt_band2", sec.tilt_band2},
                      {"elements_band1", sec.elements_band1},
                      {"elements_band2_side", sec.elements_band2_side}});
    }
    sites.push_back(std::move(js));
  }
  auto& bl = j["buildings"] = nlohmann::json::array();
  for (const auto& b : s.buildings) {
    bl.push_back({b.footprint.x_min, b.footprint.y_min, b.footprint.x_max, b.footprint.y_max,
                  b.height});
  }
  j["rng_seed"] = s.rng_seed;
  return j;
}

inline Scenario scenario_from_json(const nlohmann::json& j) {
  try {
    if (!j.is_object() || !j.contains("version"))
      throw SchemaError("scenario: missing schema version");
    const int version = j.at("version").get<int>();
    if (version != kScenarioSchemaVersion)
      throw SchemaError("scenario: schema version " + std::to_string(version) +
                        " unsupported (expected " +
                        std::to_string(kScenarioSchemaVersion) + ")");
    Scenario s;
    s.area = area_from_json(j.at("area"));
    const auto& bands = j.at("bands");
    if (!bands.is_array() || bands.size() != 2)
      throw SchemaError("scenario: expected exactly two bands");
    s.bands[0] = band_from_json(bands[0]);
    s.bands[1] = band_from_json(bands[1]);
    for (const auto& js : j.at("sites")) {
      DuSite site;
      const auto& p = js.at("position");
      site.position = {p.at(0).get<double>(), p.at(1).get<double>(), p.at(2).get<double>()};
      const auto& secs = js.at("sectors");
      if (!secs.is_array() || secs.size() != kSectorsPerSite)
        throw SchemaError("scenario: every site needs exactly 3 sectors");
      for (int k = 0; k < kSectorsPerSite; ++k) {
        const auto& sj = secs[k];
        Sector& sec = site.sectors[k];
        sec.azimuth_center = sj.at("azimuth_center").get<double>();
        sec.tilt_band1 = sj.at("tilt_band1").get<double>();
        sec.tilt_band2 = sj.at("tilt_band2").get<double>();
        sec.elements_band1 = sj.at("elements_band1").get<int>();
        sec.elements_band2_side = sj.at("elements_band2_side").get<int>();
      }
      s.sites.push_back(site);
    }
    for (const auto& bj : j.at("buildings")) {
      if (!bj.is_array() || bj.size() != 5)
        throw SchemaError("scenario: building rows are [x_min, y_min, x_max, y_max, height]");
      Building b;
      b.footprint = {bj[0].get<double>(), bj[1].get<double>(), bj[2].get<double>(),
                     bj[3].get<double>()};
      b.height = bj[4].get<double>();
      s.buildings.push_back(b);
    }
    s.rng_seed = j.at("rng_seed").get<std::uint64_t>();
    s.area.validate();
    for (const auto& b : s.bands) b.validate();
    if (s.sites.empty()) throw SchemaError("scenario: no sites");
    return s;
  } catch (const nlohmann::json::exception& e) {
    throw SchemaError(std::string("scenario: malformed document: ") + e.what());
  } catch (const ConfigError& e) {
    throw SchemaError(std::string("scenario: invalid values: ") + e.what());
  }
}

inline std::string read_text_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string() + " for reading");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

inline void write_text_file(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot open " + path.string() + " for writing");
  out << text;
  if (!out) throw IoError("write failed for " + path.string());
}

inline nlohmann::json parse_json_text(const std::string& text, const std::string& what) {
  try {
    return nlohmann::json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    throw SchemaError(what + ": not a valid document: " + e.what());
  }
}

inline void save_scenario(const Scenario& s, const std::filesystem::path& path) {
  write_text_file(path, scenario_to_json(s).dump(1) + "\n");
}

inline Scenario load_scenario(const std::filesystem::path& path) {
  return scenario_from_json(parse_json_text(read_text_file(path), "scenario"));
}

// Reads a partial config document; absent keys keep their defaults.
inline ScenarioConfig scenario_config_from_json(const nlohmann::json& j) {
  ScenarioConfig c;
  try {
    if (j.contains("area")) c.area = area_from_json(j.at("area"), c.area);
    c.built_up_fraction = j.value("built_up_fraction", c.built_up_fraction);
    c.buildings_per_km2 = j.value("buildings_per_km2", c.buildings_per_km2);
    c.height_scale = j.value("height_scale", c.height_scale);
    c.max_building_height = j.value("max_building_height", c.max_building_height);
    c.num_sites = j.value("num_sites", c.num_sites);
    c.site_offset = j.value("site_offset", c.site_offset);
    c.du_height = j.value("du_height", c.du_height);
    if (j.contains("bands")) {
      const auto& b = j.at("bands");
      for (std::size_t i = 0; i < std::min<std::size_t>(b.size(), 2); ++i)
        c.bands[i] = band_from_json(b[i], c.bands[i]);
    }
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("scenario config: ") + e.what());
  }
  return c;
}

}  // namespace skylink
