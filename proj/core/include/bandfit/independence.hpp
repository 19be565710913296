#pragma once

// Round-robin tournament over the full gain-set space against a
// deterministic similarity oracle. For every compared pair, each band where
// the two curves differ records one occurrence for both levels and one
// preference for the winning curve's level. The preference/occurrence ratio
// per (level, band) then estimates a per-band preference curve whose argmax
// should coincide with the true gain set if bands act independently.

#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "bandfit/band_config.hpp"

namespace bandfit::rrt {

// Higher is more similar. Receives 1-based level vectors.
using Similarity =
    std::function<double(std::span<const int> curve, std::span<const int> truth)>;

// -||curve - truth||_2 over level indices.
double negative_euclidean(std::span<const int> curve, std::span<const int> truth);

enum class Outcome { First, Second, Tie };

// Throws DomainError on length mismatch.
Outcome oracle_prefer(const GainSet& c1, const GainSet& c2, const GainSet& truth,
                      const Similarity& similarity = negative_euclidean);

// Level-by-band tables, row-major with rows = levels (1-based in accessors).
struct CountTables {
  int n_levels = 0;
  int bands = 0;
  std::vector<double> preference;
  std::vector<double> occurrence;

  CountTables() = default;
  CountTables(int n_levels, int bands);

  double& pref(int level, int band) { return preference[index(level, band)]; }
  double& occ(int level, int band) { return occurrence[index(level, band)]; }
  double pref(int level, int band) const { return preference[index(level, band)]; }
  double occ(int level, int band) const { return occurrence[index(level, band)]; }

  // Elementwise sum; associative and exact for the half-integer counts used.
  void merge(const CountTables& other);

  bool operator==(const CountTables&) const = default;

 private:
  std::size_t index(int level, int band) const {
    return static_cast<std::size_t>((level - 1) * bands + band);
  }
};

// Ties credit half a preference to each level.
void update_counts(CountTables& tables, const GainSet& c1, const GainSet& c2,
                   Outcome outcome);

struct RatioTable {
  int n_levels = 0;
  int bands = 0;
  std::vector<double> ratio;  // row-major, 0/0 -> 0

  double at(int level, int band) const {
    return ratio[static_cast<std::size_t>((level - 1) * bands + band)];
  }
  // 1-based argmax level per band, ties to the lowest level.
  std::vector<int> argmax() const;

  bool operator==(const RatioTable&) const = default;
};

RatioTable ratio_table(const CountTables& tables);

struct RrtMode {
  enum class Kind { Full, Sampled } kind = Kind::Full;
  std::uint64_t n_pairs = 0;  // sampled mode only
  std::uint64_t seed = 0;     // sampled mode only

  static RrtMode full() { return {}; }
  static RrtMode sampled(std::uint64_t n_pairs, std::uint64_t seed) {
    return {Kind::Sampled, n_pairs, seed};
  }
};

struct RrtOptions {
  // Full mode is refused above this many pairs unless allow_over_budget.
  std::uint64_t pair_budget = 50'000'000;
  bool allow_over_budget = false;
  // 0 picks std::thread::hardware_concurrency().
  unsigned workers = 0;
  // When unset the default oracle runs on precomputed squared distances.
  std::optional<Similarity> similarity;
};

struct RrtRun {
  CountTables counts;
  RatioTable ratios;
  std::uint64_t pairs = 0;
};

// Number of unordered pairs of distinct gain sets.
std::uint64_t full_pair_count(int n_levels, int bands);

// Throws ResourceError when full mode exceeds the budget, DomainError when
// the space is too large to index.
RrtRun run_rrt_tables(int n_levels, int bands, const GainSet& truth, const RrtMode& mode,
                      const RrtOptions& options = {});

RatioTable run_rrt(int n_levels, int bands, const GainSet& truth, const RrtMode& mode,
                   const RrtOptions& options = {});

struct MismatchCase {
  GainSet truth;
  std::vector<int> recovered;
  RatioTable ratios;
};

struct IndependenceReport {
  int trials = 0;
  int matches = 0;
  std::vector<MismatchCase> mismatched_cases;
  std::vector<GainSet> truths;

  bool operator==(const IndependenceReport& o) const {
    return trials == o.trials && matches == o.matches && truths == o.truths &&
           mismatched_cases.size() == o.mismatched_cases.size();
  }
};

IndependenceReport validate_independence(int trials, int n_levels, int bands,
                                         const RrtMode& mode, std::uint64_t seed,
                                         const RrtOptions& options = {});

}  // namespace bandfit::rrt
