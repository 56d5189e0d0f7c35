#pragma once

#include <cmath>
#include <memory>
#include <span>
#include <vector>

#include "skylink/channel.hpp"
#include "skylink/scenario.hpp"

namespace skylink {

struct GridPoint {
  int ix = 0;
  int iy = 0;
  int iz = 0;

  friend bool operator==(const GridPoint&, const GridPoint&) = default;
};

// Discrete UAV lattice over the area: horizontal spacing `step`, vertical
// spacing `vertical_step`, anchored at (x_min, y_min, h_min).
struct Grid {
  AreaSpec area;
  double step = 40.0;
  double vertical_step = 20.0;
  int nx = 0;
  int ny = 0;
  int nz = 0;

  Grid() = default;
  Grid(const AreaSpec& a, double step_length, double vstep)
      : area(a), step(step_length), vertical_step(vstep) {
    if (!(step > 0.0) || !(vertical_step > 0.0))
      throw ConfigError("grid: step lengths must be positive");
    nx = static_cast<int>(std::floor((a.x_max - a.x_min) / step + 1e-9)) + 1;
    ny = static_cast<int>(std::floor((a.y_max - a.y_min) / step + 1e-9)) + 1;
    nz = static_cast<int>(std::floor((a.h_max - a.h_min) / vertical_step + 1e-9)) + 1;
  }

  int size() const { return nx * ny * nz; }
  int index(const GridPoint& p) const { return (p.iz * ny + p.iy) * nx + p.ix; }
  bool contains(const GridPoint& p) const {
    return p.ix >= 0 && p.ix < nx && p.iy >= 0 && p.iy < ny && p.iz >= 0 && p.iz < nz;
  }
  Vec3 position(const GridPoint& p) const {
    return {area.x_min + p.ix * step, area.y_min + p.iy * step,
            area.h_min + p.iz * vertical_step};
  }
  // Exact lattice point for `v`, or throws if `v` is off-lattice or outside.
  GridPoint snap(const Vec3& v) const {
    GridPoint p{static_cast<int>(std::lround((v.x - area.x_min) / step)),
                static_cast<int>(std::lround((v.y - area.y_min) / step)),
                static_cast<int>(std::lround((v.z - area.h_min) / vertical_step))};
    const Vec3 back = position(p);
    if (!contains(p) || std::abs(back.x - v.x) > 1e-6 || std::abs(back.y - v.y) > 1e-6 ||
        std::abs(back.z - v.z) > 1e-6)
      throw ConfigError("point is not a lattice point inside the area");
    return p;
  }
};

// Large-scale received power of every cell on both bands at every lattice
// point, plus the RSRP-best cell per band. Immutable once built.
class LinkTable {
 public:
  LinkTable(std::shared_ptr<const Scenario> scenario, const Grid& grid)
      : scenario_(std::move(scenario)), grid_(grid), cells_(scenario_->num_cells()) {
    power_.resize(static_cast<std::size_t>(grid_.size()) * 2 * cells_);
    serving_.resize(static_cast<std::size_t>(grid_.size()) * 2);
    const Scenario& s = *scenario_;
    std::vector<bool> los(s.sites.size());
    for (int iz = 0; iz < grid_.nz; ++iz)
      for (int iy = 0; iy < grid_.ny; ++iy)
        for (int ix = 0; ix < grid_.nx; ++ix) {
          const GridPoint p{ix, iy, iz};
          const Vec3 uav = grid_.position(p);
          for (std::size_t k = 0; k < s.sites.size(); ++k)
            los[k] = check_los(s, s.sites[k].position, uav);
          for (int band_id = 1; band_id <= 2; ++band_id) {
            const BandSpec& band = s.band(band_id);
            double* row = &power_[offset(p, band_id)];
            for (int c = 0; c < cells_; ++c) {
              const int site = c / kSectorsPerSite;
              const LinkGeometry g = link_geometry(s.sites[site].position, uav, los[site]);
              row[c] = received_power(band.tx_power, path_gain(band, g.distance_3d, g.los), 1.0,
                                      antenna_gain(s.sector_of(c), band_id, g) *
                                          uav_antenna_gain(g));
            }
            serving_[grid_.index(p) * 2 + (band_id - 1)] =
                argmax_lowest(std::span<const double>(row, cells_));
          }
        }
  }

  const Scenario& scenario() const { return *scenario_; }
  std::shared_ptr<const Scenario> scenario_ptr() const { return scenario_; }
  const Grid& grid() const { return grid_; }
  int num_cells() const { return cells_; }

  std::span<const double> powers(const GridPoint& p, int band_id) const {
    return {&power_[offset(p, band_id)], static_cast<std::size_t>(cells_)};
  }
  int serving_cell(const GridPoint& p, int band_id) const {
    return serving_[grid_.index(p) * 2 + (band_id - 1)];
  }

  // SINR and rate on `band_id` at `p` for per-cell fading draws.
  ChannelSample measure(const GridPoint& p, int band_id, std::span<const double> fading) const {
    const auto ls = powers(p, band_id);
    const BandSpec& band = scenario_->band(band_id);
    const int serving = serving_cell(p, band_id);
    double signal = 0.0;
    double interference = 0.0;
    for (int c = 0; c < cells_; ++c) {
      const double g = ls[c] * fading[c];
      if (c == serving)
        signal = g;
      else
        interference += g;
    }
    ChannelSample out;
    out.cell_id = serving;
    out.band_id = band_id;
    out.path_gain = ls[serving] / band.tx_power;
    out.fading_power = fading[serving];
    out.rsrp_dbm = watts_to_dbm(ls[serving]);
    out.sinr = signal / (band.noise_power() + interference);
    out.rate = shannon_rate(band.bandwidth(), out.sinr);
    return out;
  }

 private:
  std::size_t offset(const GridPoint& p, int band_id) const {
    return (static_cast<std::size_t>(grid_.index(p)) * 2 + (band_id - 1)) * cells_;
  }

  std::shared_ptr<const Scenario> scenario_;
  Grid grid_;
  int cells_;
  std::vector<double> power_;
  std::vector<int> serving_;
};

}  // namespace skylink
