#include "bandfit/independence.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <thread>

#include "bandfit/errors.hpp"
#include "bandfit/random.hpp"

namespace bandfit::rrt {
namespace {

// Per-worker integer accumulators. Preferences are stored doubled so a tie
// is one unit per level and everything stays integral.
struct RawCounts {
  int bands = 0;
  std::vector<std::uint64_t> pref2;
  std::vector<std::uint64_t> occ;

  RawCounts(int n_levels, int b)
      : bands(b),
        pref2(static_cast<std::size_t>(n_levels * b), 0),
        occ(static_cast<std::size_t>(n_levels * b), 0) {}

  void add(const RawCounts& o) {
    for (std::size_t k = 0; k < occ.size(); ++k) {
      pref2[k] += o.pref2[k];
      occ[k] += o.occ[k];
    }
  }
};

// Gain-set space laid out as index -> levels (0-based, row of `bands` bytes).
struct Space {
  int n_levels = 0;
  int bands = 0;
  std::size_t size = 0;
  std::vector<std::uint8_t> levels;
  std::vector<double> score;
};

Space enumerate_space(int n_levels, int bands, const GainSet& truth,
                      const std::optional<Similarity>& similarity) {
  Space s;
  s.n_levels = n_levels;
  s.bands = bands;
  double size = std::pow(static_cast<double>(n_levels), bands);
  if (size > static_cast<double>(std::numeric_limits<std::uint32_t>::max())) {
    throw DomainError("gain-set space too large to enumerate");
  }
  s.size = static_cast<std::size_t>(size);
  s.levels.resize(s.size * static_cast<std::size_t>(bands));
  s.score.resize(s.size);
  std::vector<int> curve(static_cast<std::size_t>(bands));
  for (std::size_t idx = 0; idx < s.size; ++idx) {
    std::size_t rem = idx;
    for (int b = bands - 1; b >= 0; --b) {
      const auto lvl = static_cast<int>(rem % static_cast<std::size_t>(n_levels));
      rem /= static_cast<std::size_t>(n_levels);
      s.levels[idx * static_cast<std::size_t>(bands) + static_cast<std::size_t>(b)] =
          static_cast<std::uint8_t>(lvl);
      curve[static_cast<std::size_t>(b)] = lvl + 1;
    }
    if (similarity) {
      s.score[idx] = (*similarity)(curve, truth.levels);
    } else {
      s.score[idx] = negative_euclidean(curve, truth.levels);
    }
  }
  return s;
}

inline void tally(const Space& s, std::size_t i, std::size_t j, RawCounts& out) {
  const std::size_t B = static_cast<std::size_t>(s.bands);
  const std::uint8_t* li = &s.levels[i * B];
  const std::uint8_t* lj = &s.levels[j * B];
  const double si = s.score[i];
  const double sj = s.score[j];
  for (std::size_t b = 0; b < B; ++b) {
    if (li[b] == lj[b]) continue;
    const std::size_t ci = li[b] * B + b;
    const std::size_t cj = lj[b] * B + b;
    ++out.occ[ci];
    ++out.occ[cj];
    if (si > sj) {
      out.pref2[ci] += 2;
    } else if (sj > si) {
      out.pref2[cj] += 2;
    } else {
      ++out.pref2[ci];
      ++out.pref2[cj];
    }
  }
}

CountTables to_tables(const RawCounts& raw, int n_levels, int bands) {
  CountTables t(n_levels, bands);
  for (std::size_t k = 0; k < raw.occ.size(); ++k) {
    t.preference[k] = 0.5 * static_cast<double>(raw.pref2[k]);
    t.occurrence[k] = static_cast<double>(raw.occ[k]);
  }
  return t;
}

}  // namespace

double negative_euclidean(std::span<const int> curve, std::span<const int> truth) {
  if (curve.size() != truth.size()) throw DomainError("similarity length mismatch");
  long sum = 0;
  for (std::size_t b = 0; b < curve.size(); ++b) {
    const long d = curve[b] - truth[b];
    sum += d * d;
  }
  return -std::sqrt(static_cast<double>(sum));
}

Outcome oracle_prefer(const GainSet& c1, const GainSet& c2, const GainSet& truth,
                      const Similarity& similarity) {
  if (c1.levels.size() != c2.levels.size() || c1.levels.size() != truth.levels.size()) {
    throw DomainError("gain sets of different lengths");
  }
  const double s1 = similarity(c1.levels, truth.levels);
  const double s2 = similarity(c2.levels, truth.levels);
  if (s1 > s2) return Outcome::First;
  if (s2 > s1) return Outcome::Second;
  return Outcome::Tie;
}

CountTables::CountTables(int levels, int b)
    : n_levels(levels),
      bands(b),
      preference(static_cast<std::size_t>(levels * b), 0.0),
      occurrence(static_cast<std::size_t>(levels * b), 0.0) {}

void CountTables::merge(const CountTables& other) {
  if (other.n_levels != n_levels || other.bands != bands) {
    throw DomainError("cannot merge tables of different shapes");
  }
  for (std::size_t k = 0; k < preference.size(); ++k) {
    preference[k] += other.preference[k];
    occurrence[k] += other.occurrence[k];
  }
}

void update_counts(CountTables& tables, const GainSet& c1, const GainSet& c2,
                   Outcome outcome) {
  if (c1.bands() != tables.bands || c2.bands() != tables.bands) {
    throw DomainError("gain set does not match table bands");
  }
  validate_gain_set(c1, tables.n_levels);
  validate_gain_set(c2, tables.n_levels);
  for (int b = 0; b < tables.bands; ++b) {
    const int l1 = c1.levels[static_cast<std::size_t>(b)];
    const int l2 = c2.levels[static_cast<std::size_t>(b)];
    if (l1 == l2) continue;
    tables.occ(l1, b) += 1.0;
    tables.occ(l2, b) += 1.0;
    switch (outcome) {
      case Outcome::First:
        tables.pref(l1, b) += 1.0;
        break;
      case Outcome::Second:
        tables.pref(l2, b) += 1.0;
        break;
      case Outcome::Tie:
        tables.pref(l1, b) += 0.5;
        tables.pref(l2, b) += 0.5;
        break;
    }
  }
}

std::vector<int> RatioTable::argmax() const {
  std::vector<int> out(static_cast<std::size_t>(bands), 1);
  for (int b = 0; b < bands; ++b) {
    int best = 1;
    for (int l = 2; l <= n_levels; ++l) {
      if (at(l, b) > at(best, b)) best = l;
    }
    out[static_cast<std::size_t>(b)] = best;
  }
  return out;
}

RatioTable ratio_table(const CountTables& tables) {
  RatioTable r;
  r.n_levels = tables.n_levels;
  r.bands = tables.bands;
  r.ratio.resize(tables.preference.size());
  for (std::size_t k = 0; k < r.ratio.size(); ++k) {
    const double occ = tables.occurrence[k];
    r.ratio[k] = occ > 0.0 ? tables.preference[k] / occ : 0.0;
  }
  return r;
}

std::uint64_t full_pair_count(int n_levels, int bands) {
  const double s = std::pow(static_cast<double>(n_levels), bands);
  if (s > 4.0e9) throw DomainError("gain-set space too large");
  const auto n = static_cast<std::uint64_t>(s);
  return n * (n - 1) / 2;
}

RrtRun run_rrt_tables(int n_levels, int bands, const GainSet& truth, const RrtMode& mode,
                      const RrtOptions& options) {
  if (n_levels < 2 || n_levels > 255 || bands < 1) {
    throw DomainError("unsupported tournament dimensions");
  }
  if (truth.bands() != bands) throw DomainError("true gain set has wrong length");
  validate_gain_set(truth, n_levels);

  const std::uint64_t total = full_pair_count(n_levels, bands);
  if (mode.kind == RrtMode::Kind::Full && total > options.pair_budget &&
      !options.allow_over_budget) {
    throw ResourceError("full tournament needs " + std::to_string(total) +
                        " pairs, above the budget of " +
                        std::to_string(options.pair_budget));
  }

  const Space space = enumerate_space(n_levels, bands, truth, options.similarity);
  RawCounts merged(n_levels, bands);
  RrtRun run;

  if (mode.kind == RrtMode::Kind::Full) {
    unsigned workers = options.workers != 0 ? options.workers
                                            : std::max(1u, std::thread::hardware_concurrency());
    workers = std::min<unsigned>(workers, static_cast<unsigned>(space.size));
    std::vector<RawCounts> partial(workers, RawCounts(n_levels, bands));
    auto work = [&](unsigned w) {
      RawCounts& out = partial[w];
      // Interleaved rows balance the triangular workload.
      for (std::size_t i = w; i < space.size; i += workers) {
        for (std::size_t j = i + 1; j < space.size; ++j) tally(space, i, j, out);
      }
    };
    if (workers == 1) {
      work(0);
    } else {
      std::vector<std::thread> threads;
      threads.reserve(workers);
      for (unsigned w = 0; w < workers; ++w) threads.emplace_back(work, w);
      for (auto& t : threads) t.join();
    }
    for (const auto& p : partial) merged.add(p);
    run.pairs = total;
  } else {
    if (space.size < 2) throw DomainError("sampling needs at least two gain sets");
    Rng rng(mode.seed);
    for (std::uint64_t k = 0; k < mode.n_pairs; ++k) {
      std::size_t i;
      std::size_t j;
      do {
        i = static_cast<std::size_t>(uniform_index(rng, space.size));
        j = static_cast<std::size_t>(uniform_index(rng, space.size));
      } while (i == j);
      tally(space, i, j, merged);
    }
    run.pairs = mode.n_pairs;
  }

  run.counts = to_tables(merged, n_levels, bands);
  run.ratios = ratio_table(run.counts);
  return run;
}

RatioTable run_rrt(int n_levels, int bands, const GainSet& truth, const RrtMode& mode,
                   const RrtOptions& options) {
  return run_rrt_tables(n_levels, bands, truth, mode, options).ratios;
}

IndependenceReport validate_independence(int trials, int n_levels, int bands,
                                         const RrtMode& mode, std::uint64_t seed,
                                         const RrtOptions& options) {
  if (trials < 1) throw DomainError("trials must be at least 1");
  IndependenceReport report;
  report.trials = trials;
  Rng rng(seed);
  for (int t = 0; t < trials; ++t) {
    GainSet truth;
    truth.levels.resize(static_cast<std::size_t>(bands));
    for (auto& l : truth.levels) {
      l = 1 + static_cast<int>(uniform_index(rng, static_cast<std::uint64_t>(n_levels)));
    }
    RrtMode trial_mode = mode;
    if (mode.kind == RrtMode::Kind::Sampled) trial_mode.seed = rng();
    RatioTable ratios = run_rrt(n_levels, bands, truth, trial_mode, options);
    auto recovered = ratios.argmax();
    report.truths.push_back(truth);
    if (recovered == truth.levels) {
      ++report.matches;
    } else {
      report.mismatched_cases.push_back({truth, std::move(recovered), std::move(ratios)});
    }
  }
  return report;
}

}  // namespace bandfit::rrt
