#pragma once

#include <algorithm>
#include <cmath>
#include <complex>
#include <random>
#include <span>
#include <vector>

#include "skylink/common.hpp"
#include "skylink/geometry.hpp"
#include "skylink/scenario.hpp"

namespace skylink {

struct LinkGeometry {
  double distance_3d = 1.0;  // m
  double elevation = 0.0;    // degrees, [-90, 90]
  double azimuth = 0.0;      // degrees, [-180, 180)
  bool los = true;
};

struct ChannelSample {
  int cell_id = 0;
  int band_id = 1;
  double path_gain = 0.0;     // L(d) * G(theta, phi)
  double fading_power = 1.0;
  double rsrp_dbm = 0.0;      // large-scale only
  double sinr = 0.0;
  double rate = 0.0;          // bit/s
};

// True iff the segment tx -> rx crosses no building box.
inline bool check_los(const Scenario& scenario, const Vec3& tx, const Vec3& rx) {
  const double bx0 = std::min(tx.x, rx.x), bx1 = std::max(tx.x, rx.x);
  const double by0 = std::min(tx.y, rx.y), by1 = std::max(tx.y, rx.y);
  const double z_low = std::min(tx.z, rx.z);
  for (const auto& b : scenario.buildings) {
    const Rect& r = b.footprint;
    if (r.x_max < bx0 || r.x_min > bx1 || r.y_max < by0 || r.y_min > by1) continue;
    if (b.height < z_low) continue;
    if (segment_intersects_box(tx, rx, r, b.height)) return false;
  }
  return true;
}

inline LinkGeometry link_geometry(const Vec3& tx, const Vec3& rx, bool los) {
  const Vec3 d = rx - tx;
  LinkGeometry g;
  g.distance_3d = d.norm();
  g.elevation = rad2deg(std::atan2(d.z, std::hypot(d.x, d.y)));
  g.azimuth = wrap_degrees(rad2deg(std::atan2(d.y, d.x)));
  g.los = los;
  return g;
}

inline LinkGeometry link_geometry(const Scenario& scenario, const Vec3& tx, const Vec3& rx) {
  return link_geometry(tx, rx, check_los(scenario, tx, rx));
}

// ---------------------------------------------------------------------------
// Path loss. Both bands use the LoS/NLoS power law; they differ only in the
// parameters carried by the band.

inline double power_law_gain(double d, bool los, const PathLossParams& p) {
  if (!(d > 0.0)) throw std::domain_error("path loss: distance must be positive");
  return los ? p.x_los * std::pow(d, -p.alpha_los) : p.x_nlos * std::pow(d, -p.alpha_nlos);
}

inline double path_loss_mmwave(double d, bool los, const PathLossParams& p) {
  return power_law_gain(d, los, p);
}

inline double path_loss_sub6(double d, bool los, const PathLossParams& p) {
  return power_law_gain(d, los, p);
}

inline double path_gain(const BandSpec& band, double d, bool los) {
  return band.band_id == 1 ? path_loss_sub6(d, los, band.pathloss)
                           : path_loss_mmwave(d, los, band.pathloss);
}

// ---------------------------------------------------------------------------
// Antennas

struct ElementPattern {
  double beamwidth_3db = 65.0;      // degrees
  double front_to_back_db = 30.0;
  double peak_gain_db = 8.0;        // dBi
};

inline double element_gain(double elevation_offset, double azimuth_offset,
                           const ElementPattern& e = {}) {
  const double av = -std::min(12.0 * std::pow(elevation_offset / e.beamwidth_3db, 2.0),
                              e.front_to_back_db);
  const double ah = -std::min(12.0 * std::pow(azimuth_offset / e.beamwidth_3db, 2.0),
                              e.front_to_back_db);
  const double a = -std::min(-(av + ah), e.front_to_back_db);
  return from_db(e.peak_gain_db + a);
}

// Normalised power array factor of an n-element half-wavelength ULA with
// inter-element phase psi; peaks at n when psi = 0.
inline double ula_array_factor(int n, double psi) {
  std::complex<double> sum{0.0, 0.0};
  for (int k = 0; k < n; ++k) sum += std::polar(1.0, k * psi);
  return std::norm(sum) / n;
}

// Sector panel gain toward `geometry`. The panel is mechanically pointed at
// (azimuth_center, tilt), so the element and array maxima coincide there.
// Sidelobe nulls are floored at the element pattern's floor.
inline double antenna_gain(const Sector& sector, int band_id, const LinkGeometry& geometry,
                           const ElementPattern& element = {}) {
  const double tilt = band_id == 1 ? sector.tilt_band1 : sector.tilt_band2;
  const double del = geometry.elevation - tilt;
  const double daz = wrap_degrees(geometry.azimuth - sector.azimuth_center);
  const double g_elem = element_gain(del, daz, element);
  const double psi_v = kPi * std::sin(deg2rad(del));
  double af = 0.0;
  if (band_id == 1) {
    af = ula_array_factor(sector.elements_band1, psi_v);
  } else {
    const double psi_h = kPi * std::cos(deg2rad(del)) * std::sin(deg2rad(daz));
    af = ula_array_factor(sector.elements_band2_side, psi_v) *
         ula_array_factor(sector.elements_band2_side, psi_h);
  }
  const double floor = from_db(element.peak_gain_db - element.front_to_back_db);
  return std::max(g_elem * af, floor);
}

inline double uav_antenna_gain(const LinkGeometry&) { return 1.0; }

// ---------------------------------------------------------------------------
// Fading and received power

// Nakagami-m power: Gamma(shape m, scale 1/m), unit mean.
template <typename Rng>
double draw_fading(const BandSpec& band, Rng& rng) {
  std::gamma_distribution<double> g(band.nakagami_m, 1.0 / band.nakagami_m);
  return g(rng);
}

inline double received_power(double tx_power, double path_gain, double fading,
                             double antenna_gain) {
  return tx_power * path_gain * fading * antenna_gain;
}

inline double received_power(const Scenario& scenario, int cell_id, int band_id,
                             const Vec3& uav, double fading) {
  const BandSpec& band = scenario.band(band_id);
  const DuSite& site = scenario.site_of(cell_id);
  const LinkGeometry g = link_geometry(scenario, site.position, uav);
  return received_power(band.tx_power, path_gain(band, g.distance_3d, g.los), fading,
                        antenna_gain(scenario.sector_of(cell_id), band_id, g) *
                            uav_antenna_gain(g));
}

inline double large_scale_power(const Scenario& scenario, int cell_id, int band_id,
                                const Vec3& uav) {
  return received_power(scenario, cell_id, band_id, uav, 1.0);
}

inline double rsrp(const Scenario& scenario, const Vec3& uav, int cell_id, int band_id) {
  return watts_to_dbm(large_scale_power(scenario, cell_id, band_id, uav));
}

// Index of the largest value; ties resolve to the lowest index.
inline int argmax_lowest(std::span<const double> values) {
  int best = 0;
  for (int i = 1; i < static_cast<int>(values.size()); ++i)
    if (values[i] > values[best]) best = i;
  return best;
}

inline int associate(const Scenario& scenario, const Vec3& uav, int band_id) {
  if (scenario.num_cells() == 0) throw ConfigError("associate: scenario has no cells");
  std::vector<double> r(scenario.num_cells());
  for (int c = 0; c < scenario.num_cells(); ++c) r[c] = rsrp(scenario, uav, c, band_id);
  return argmax_lowest(r);
}

inline double shannon_rate(double bandwidth, double sinr) {
  return bandwidth * std::log2(1.0 + sinr);
}

// SINR of `serving` given every cell's received power on the band.
inline double sinr_from_powers(std::span<const double> powers, int serving, double noise) {
  double interference = 0.0;
  for (int j = 0; j < static_cast<int>(powers.size()); ++j)
    if (j != serving) interference += powers[j];
  return powers[serving] / (noise + interference);
}

// Full-buffer downlink SINR with one fading draw per cell (`fading[c]`).
inline ChannelSample compute_sinr(const Scenario& scenario, const Vec3& uav, int serving,
                                  int band_id, std::span<const double> fading) {
  const int n = scenario.num_cells();
  if (serving < 0 || serving >= n) throw ConfigError("compute_sinr: invalid serving cell");
  if (static_cast<int>(fading.size()) != n)
    throw ShapeError("compute_sinr: need one fading draw per cell");
  const BandSpec& band = scenario.band(band_id);
  std::vector<double> gamma(n);
  double serving_gain = 0.0;
  for (int c = 0; c < n; ++c) {
    const LinkGeometry g = link_geometry(scenario, scenario.site_of(c).position, uav);
    const double gain = path_gain(band, g.distance_3d, g.los) *
                        antenna_gain(scenario.sector_of(c), band_id, g) * uav_antenna_gain(g);
    gamma[c] = received_power(band.tx_power, gain, fading[c], 1.0);
    if (c == serving) serving_gain = gain;
  }
  ChannelSample s;
  s.cell_id = serving;
  s.band_id = band_id;
  s.path_gain = serving_gain;
  s.fading_power = fading[serving];
  s.rsrp_dbm = watts_to_dbm(band.tx_power * serving_gain);
  s.sinr = sinr_from_powers(gamma, serving, band.noise_power());
  s.rate = shannon_rate(band.bandwidth(), s.sinr);
  return s;
}

template <std::uniform_random_bit_generator Rng>
ChannelSample compute_sinr(const Scenario& scenario, const Vec3& uav, int serving, int band_id,
                           Rng& rng) {
  std::vector<double> fading(scenario.num_cells());
  for (auto& f : fading) f = draw_fading(scenario.band(band_id), rng);
  return compute_sinr(scenario, uav, serving, band_id, fading);
}

}  // namespace skylink
