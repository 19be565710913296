#pragma once

#include <vector>

namespace bandfit {

// Frequency-band layout and the mapping from adjustment-level index to a dB
// offset around the prescriptive gain. Level indices are 1-based.
struct BandConfig {
  std::vector<double> band_edges_hz{0.0, 500.0, 1000.0, 2000.0, 4000.0, 6000.0};
  int n_levels = 8;
  std::vector<double> level_to_db{12.0, 9.0, 6.0, 3.0, 0.0, -3.0, -6.0, -9.0};

  int bands() const { return static_cast<int>(band_edges_hz.size()) - 1; }

  // Throws ConfigError when edges are not strictly ascending or the level map
  // does not have exactly n_levels entries.
  void validate() const;

  // Throws DomainError for an index outside [1, n_levels].
  double db(int level) const;

  // Arithmetic midpoints of adjacent edges.
  std::vector<double> centers_hz() const;
};

// A point in the levels^bands search space.
struct GainSet {
  std::vector<int> levels;

  int bands() const { return static_cast<int>(levels.size()); }
  bool operator==(const GainSet&) const = default;
};

// Throws DomainError unless every level is in [1, n_levels].
void validate_gain_set(const GainSet& g, int n_levels);

}  // namespace bandfit
