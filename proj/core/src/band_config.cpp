#include "bandfit/band_config.hpp"

#include <string>

#include "bandfit/errors.hpp"

namespace bandfit {

void BandConfig::validate() const {
  if (band_edges_hz.size() < 2) {
    throw ConfigError("band layout needs at least two edges");
  }
  for (std::size_t i = 1; i < band_edges_hz.size(); ++i) {
    if (!(band_edges_hz[i] > band_edges_hz[i - 1])) {
      throw ConfigError("band edges must be strictly ascending");
    }
  }
  if (n_levels < 2) throw ConfigError("need at least two adjustment levels");
  if (static_cast<int>(level_to_db.size()) != n_levels) {
    throw ConfigError("level_to_db has " + std::to_string(level_to_db.size()) +
                      " entries, expected " + std::to_string(n_levels));
  }
}

double BandConfig::db(int level) const {
  if (level < 1 || level > static_cast<int>(level_to_db.size())) {
    throw DomainError("level index " + std::to_string(level) + " out of range");
  }
  return level_to_db[static_cast<std::size_t>(level - 1)];
}

std::vector<double> BandConfig::centers_hz() const {
  std::vector<double> c;
  c.reserve(band_edges_hz.size());
  for (std::size_t i = 1; i < band_edges_hz.size(); ++i) {
    c.push_back(0.5 * (band_edges_hz[i - 1] + band_edges_hz[i]));
  }
  return c;
}

void validate_gain_set(const GainSet& g, int n_levels) {
  for (int v : g.levels) {
    if (v < 1 || v > n_levels) {
      throw DomainError("gain-set level " + std::to_string(v) + " out of range");
    }
  }
}

}  // namespace bandfit
