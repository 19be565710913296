// Acceptance criteria, one PASS/FAIL line each.
//
//   acceptance_suite [--known-red name,name,...] [--only name]
//
// Exit status is nonzero when a criterion fails that is not listed as known
// red. Known-red criteria still run and still print FAIL.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <iostream>
#include <set>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include <nlohmann/json.hpp>

#include "bandfit/dsp.hpp"
#include "bandfit/http_server.hpp"
#include "bandfit/independence.hpp"
#include "bandfit/preference_model.hpp"
#include "bandfit/random.hpp"
#include "bandfit/session_service.hpp"
#include "bandfit/simulation.hpp"
#include "oracles/fft.hpp"
#include "oracles/finite_difference.hpp"

#include <httplib.h>

using namespace bandfit;
using nlohmann::json;

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

struct Outcome {
  bool pass = false;
  std::string detail;
};

std::string fmt(const char* f, double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, f, v);
  return buf;
}

// ---------------------------------------------------------------------------

Outcome independence_desk_scale() {
  const auto t0 = Clock::now();
  const rrt::IndependenceReport r =
      rrt::validate_independence(50, 4, 3, rrt::RrtMode::full(), 2024);
  const double t = seconds_since(t0);
  return {r.matches == 50 && r.trials == 50 && t <= 10.0,
          std::to_string(r.matches) + "/" + std::to_string(r.trials) + " truths recovered, " +
              fmt("%.2f s (limit 10 s)", t)};
}

Outcome independence_full_scale() {
  const auto t0 = Clock::now();
  const GainSet truth{{3, 4, 5, 2, 3}};
  const rrt::RatioTable table =
      rrt::run_rrt(8, 5, truth, rrt::RrtMode::sampled(10'000'000, 2024));
  const double t = seconds_since(t0);
  const auto argmax = table.argmax();
  std::string got;
  for (int l : argmax) got += std::to_string(l) + " ";
  return {argmax == truth.levels && t <= 60.0,
          "argmax [" + got.substr(0, got.size() - 1) + "] from 1e7 pairs, " +
              fmt("%.2f s (limit 60 s)", t)};
}

Outcome single_band_convergence() {
  const auto t0 = Clock::now();
  const sim::SingleBandReport r = sim::run_single_band_study({}, 200, 2024);
  const double t = seconds_since(t0);
  return {r.agreement_rate() >= 0.95 && t <= 60.0,
          std::to_string(r.agreements) + "/200 top-1 agreement (need 95%), " +
              fmt("%.2f s (limit 60 s)", t)};
}

pref::ComparisonSet random_comparisons(Rng& rng, int n, int m) {
  pref::ComparisonSet d;
  while (static_cast<int>(d.size()) < m) {
    const int a = 1 + static_cast<int>(uniform_index(rng, static_cast<std::uint64_t>(n)));
    const int b = 1 + static_cast<int>(uniform_index(rng, static_cast<std::uint64_t>(n)));
    if (a != b) d.push_back({a, b, uniform_index(rng, 2) ? 1 : -1});
  }
  return d;
}

double log_uniform(Rng& rng, double lo, double hi) {
  return std::exp(std::log(lo) + uniform01(rng) * (std::log(hi) - std::log(lo)));
}

// Relative error in the infinity norm, floored at unit scale.
double rel_error(const pref::Matrix& analytic, const pref::Matrix& reference) {
  const double scale = std::max(1.0, reference.cwiseAbs().maxCoeff());
  return (analytic - reference).cwiseAbs().maxCoeff() / scale;
}

Outcome gradient_hessian() {
  Rng rng(7);
  const pref::HyperBounds bounds;
  double worst_g = 0.0, worst_h = 0.0;
  for (int t = 0; t < 100; ++t) {
    const int n = 2 + static_cast<int>(uniform_index(rng, 11));
    const int m = 1 + static_cast<int>(uniform_index(rng, 40));
    const double sigma = log_uniform(rng, bounds.sigma_min, bounds.sigma_max);
    const auto data = random_comparisons(rng, n, m);
    pref::Vector f(n);
    const double scale = 0.1 + 2.0 * uniform01(rng);
    for (int i = 0; i < n; ++i) f[i] = scale * standard_normal(rng);

    const auto d = pref::likelihood_grad_hessian(f, data, sigma);
    const pref::Vector fd = oracle::fd_gradient(
        [&](const pref::Vector& v) { return pref::log_likelihood(v, data, sigma); }, f);
    const pref::Matrix J = oracle::fd_jacobian(
        [&](const pref::Vector& v) {
          return pref::likelihood_grad_hessian(v, data, sigma).gradient;
        },
        f);
    worst_g = std::max(worst_g, rel_error(d.gradient, fd));
    worst_h = std::max(worst_h, rel_error(d.W, -J));
  }
  return {worst_g <= 1e-5 && worst_h <= 1e-4,
          "100 instances, gradient " + fmt("%.2e", worst_g) + " (limit 1e-5), Hessian " +
              fmt("%.2e", worst_h) + " (limit 1e-4)"};
}

Outcome laplace_fixed_point() {
  Rng rng(11);
  const pref::HyperBounds bounds;
  int returned = 0, failed = 0;
  double worst = 0.0;
  for (int t = 0; t < 1000; ++t) {
    const int n = 2 + static_cast<int>(uniform_index(rng, 11));
    const int m = static_cast<int>(uniform_index(rng, 60));
    const double lambda = log_uniform(rng, bounds.lambda_min, bounds.lambda_max);
    const double sigma = log_uniform(rng, bounds.sigma_min, bounds.sigma_max);
    const auto data = random_comparisons(rng, n, m);
    const pref::Matrix K = pref::kernel_matrix(n, lambda);
    try {
      const pref::Vector f = pref::laplace_mode(K, data, sigma, pref::Vector::Zero(n));
      ++returned;
      worst = std::max(worst, pref::stationarity_residual(K, data, sigma, f));
    } catch (const ConvergenceError&) {
      ++failed;
    }
  }
  bool empty_zero = true;
  for (double lambda : {0.1, 1.0, 10.0}) {
    for (double sigma : {0.05, 1.0, 10.0}) {
      const pref::Vector f = pref::laplace_mode(pref::kernel_matrix(8, lambda), {}, sigma,
                                                pref::Vector::Zero(8));
      empty_zero = empty_zero && (f.array() == 0.0).all();
    }
  }
  return {worst <= 1e-6 && empty_zero,
          std::to_string(returned) + " modes, worst residual " + fmt("%.2e", worst) +
              " (limit 1e-6), " + std::to_string(failed) + " convergence errors, empty data " +
              (empty_zero ? "exactly 0" : "NOT 0")};
}

Outcome hyperparameter_map() {
  Rng rng(13);
  const pref::HyperBounds bounds;
  const pref::Hyperparams init{1.0, 1.0};
  constexpr int kGrid = 50;
  double worst_gap = -1e300;
  int covered = 0;
  for (int t = 0; t < 20; ++t) {
    // A single-band session's worth of answers from a random listener; odd
    // datasets carry probit response noise, sizes follow episode boundaries.
    std::vector<double> u(8);
    for (auto& v : u) v = uniform01(rng);
    std::vector<std::pair<int, int>> pairs;
    for (int a = 1; a <= 8; ++a)
      for (int b = a + 1; b <= 8; ++b) pairs.push_back({a, b});
    shuffle(std::span<std::pair<int, int>>(pairs), rng);
    const int m = 4 * (1 + t % 7);
    const double noise = t % 2 ? 0.2 : 0.0;
    pref::ComparisonSet data;
    for (int k = 0; k < m; ++k) {
      const auto [a, b] = pairs[static_cast<std::size_t>(k)];
      double diff = u[a - 1] - u[b - 1];
      if (noise > 0.0) diff += noise * std::sqrt(2.0) * standard_normal(rng);
      data.push_back({a, b, diff > 0.0 ? 1 : -1});
    }

    const pref::Hyperparams hp = pref::fit_hyperparams(data, 8, bounds, init);
    const double fitted = pref::log_marginal_laplace(data, 8, hp);
    double grid_max = -1e300;
    for (int i = 0; i < kGrid; ++i) {
      for (int j = 0; j < kGrid; ++j) {
        const double fi = static_cast<double>(i) / (kGrid - 1);
        const double fj = static_cast<double>(j) / (kGrid - 1);
        const pref::Hyperparams g{
            bounds.lambda_min * std::pow(bounds.lambda_max / bounds.lambda_min, fi),
            bounds.sigma_min * std::pow(bounds.sigma_max / bounds.sigma_min, fj)};
        grid_max = std::max(grid_max, pref::log_marginal_laplace(data, 8, g));
      }
    }
    worst_gap = std::max(worst_gap, grid_max - fitted);
    covered += fitted >= grid_max - 0.1;
  }
  return {covered == 20,
          std::to_string(covered) + "/20 datasets within 0.1 nats of the 50x50 grid maximum, "
          "worst shortfall " + fmt("%.3g nats", worst_gap)};
}

Outcome counting_conservation() {
  constexpr int kLevels = 8, kBands = 5;
  constexpr long kUpdates = 1'000'000;
  Rng rng(17);
  rrt::CountTables tables(kLevels, kBands);
  auto random_set = [&] {
    GainSet g;
    for (int b = 0; b < kBands; ++b) g.levels.push_back(1 + static_cast<int>(uniform_index(rng, kLevels)));
    return g;
  };
  auto sums = [&] {
    double p = 0.0, o = 0.0;
    for (double v : tables.preference) p += v;
    for (double v : tables.occurrence) o += v;
    return std::pair{p, o};
  };
  long bad_increment = 0, bad_order = 0;
  auto [p_prev, o_prev] = sums();
  for (long k = 0; k < kUpdates; ++k) {
    GainSet c1 = random_set();
    GainSet c2 = random_set();
    // Every tenth update shares some bands to exercise the no-op path.
    if (k % 10 == 0) c2.levels[uniform_index(rng, kBands)] = c1.levels[0];
    const auto outcome = static_cast<rrt::Outcome>(uniform_index(rng, 3));
    int differing = 0;
    for (int b = 0; b < kBands; ++b) differing += c1.levels[b] != c2.levels[b];
    rrt::update_counts(tables, c1, c2, outcome);
    const auto [p, o] = sums();
    if (p - p_prev != differing || o - o_prev != 2.0 * differing) ++bad_increment;
    for (std::size_t i = 0; i < tables.preference.size(); ++i) {
      if (tables.preference[i] > tables.occurrence[i]) {
        ++bad_order;
        break;
      }
    }
    p_prev = p;
    o_prev = o;
  }
  return {bad_increment == 0 && bad_order == 0,
          "1e6 updates, " + std::to_string(bad_increment) + " bad increments, " +
              std::to_string(bad_order) + " preference > occurrence"};
}

Outcome dsp_accuracy() {
  const BandConfig config;
  const int fs = dsp::kDefaultSampleRate;
  const int n_fft = 4096;
  const std::vector<double> zero(5, 0.0);

  // Band centres fall on exact bins of a 4096-point transform at 16 kHz.
  Rng rng(19);
  double worst_centre = 0.0;
  for (int t = 0; t < 1000; ++t) {
    GainSet g;
    for (int b = 0; b < 5; ++b) g.levels.push_back(1 + static_cast<int>(uniform_index(rng, 8)));
    std::vector<double> gains;
    for (int l : g.levels) gains.push_back(config.db(l));
    const dsp::FirFilter fir = dsp::design_gain_filter(gains, config, fs);
    const auto mag = oracle::fft_magnitude_db(fir.coefficients, n_fft);
    const auto centres = config.centers_hz();
    for (std::size_t b = 0; b < 5; ++b) {
      const auto bin = static_cast<std::size_t>(std::lround(centres[b] * n_fft / fs));
      worst_centre = std::max(worst_centre, std::abs(mag[bin] - gains[b]));
    }
  }

  double worst_snr = 0.0;
  const dsp::AudioClip short_noise = dsp::synthetic_babble(3, 1.0, fs);
  const dsp::AudioClip long_noise = dsp::synthetic_babble(4, 6.0, fs);
  int mixes = 0;
  for (int k = 0; k <= 60; ++k) {
    const double snr = -10.0 + 0.5 * k;
    const dsp::AudioClip clean = dsp::synthetic_speech(100 + k, 2.5, fs);
    for (const auto* noise : {&short_noise, &long_noise}) {
      const dsp::AudioClip mixed = dsp::mix_noise(clean, *noise, snr, 1000 + k);
      std::vector<double> residual(clean.samples.size());
      for (std::size_t i = 0; i < residual.size(); ++i) {
        residual[i] = mixed.samples[i] / mixed.guard_gain - clean.samples[i];
      }
      const double measured =
          20.0 * std::log10(dsp::rms(clean.samples) / dsp::rms(residual));
      worst_snr = std::max(worst_snr, std::abs(measured - snr));
      ++mixes;
    }
  }

  // Flat chain over the fitted band span.
  const dsp::FirFilter flat = dsp::design_gain_filter(zero, config, fs);
  const auto mag = oracle::fft_magnitude_db(flat.coefficients, n_fft);
  const double top = config.band_edges_hz.back();
  double worst_flat = 0.0;
  for (std::size_t k = 0; k < mag.size(); ++k) {
    const double hz = static_cast<double>(k) * fs / n_fft;
    if (hz >= config.band_edges_hz.front() && hz <= top) {
      worst_flat = std::max(worst_flat, std::abs(mag[k]));
    }
  }

  return {worst_centre <= 1.0 && worst_snr <= 0.01 && worst_flat <= 0.1,
          "1000 gain sets worst centre error " + fmt("%.3f dB", worst_centre) +
              " (limit 1), " + std::to_string(mixes) + " mixes worst SNR error " +
              fmt("%.2e dB", worst_snr) + " (limit 0.01), flat chain 0-" +
              fmt("%.0f Hz", top) + " worst " + fmt("%.3f dB", worst_flat) + " (limit 0.1)"};
}

Outcome end_to_end_simulated_fitting() {
  service::SessionManager sessions;
  service::HttpServer server(sessions);
  const int port = server.bind("127.0.0.1", 0);
  std::thread listener([&] { server.listen(); });
  server.wait_until_ready();
  httplib::Client cli("127.0.0.1", port);

  constexpr int kSessions = 20;
  Rng rng(23);
  int exact = 0, bands_hit = 0, replay_identical = 0, completed = 0;
  double slowest = 0.0;
  std::string error;
  for (int s = 0; s < kSessions && error.empty(); ++s) {
    std::vector<int> truth;
    for (int b = 0; b < 5; ++b) truth.push_back(1 + static_cast<int>(uniform_index(rng, 8)));
    const json cfg = {{"prescription_db", {4, 2, 12, 30, 28}},
                      {"seed", rng()},
                      {"mode", "simulated"},
                      {"simulated", {{"truth_gain_set", truth}}}};
    const auto t0 = Clock::now();
    auto created = cli.Post("/sessions", cfg.dump(), "application/json");
    if (!created || created->status != 201) {
      error = "session creation failed";
      break;
    }
    const std::string base = "/sessions/" + json::parse(created->body)["id"].get<std::string>();
    int steps = 0;
    while (true) {
      auto step = cli.Post(base + "/simulate-step", "", "application/json");
      if (!step) {
        error = "simulate-step transport failure";
        break;
      }
      if (step->status == 409) break;
      if (step->status != 200) {
        error = "simulate-step returned " + std::to_string(step->status);
        break;
      }
      ++steps;
    }
    auto result = cli.Get(base + "/result");
    auto events = cli.Get(base + "/events");
    slowest = std::max(slowest, seconds_since(t0));
    if (!error.empty() || !result || result->status != 200 || !events) {
      if (error.empty()) error = "result unavailable";
      break;
    }
    completed += steps == 28;
    const json r = json::parse(result->body);
    const auto levels = r["personalized_levels"].get<std::vector<int>>();
    int hits = 0;
    for (int b = 0; b < 5; ++b) hits += levels[b] == truth[b];
    bands_hit += hits;
    exact += hits == 5;
    replay_identical += service::SessionManager::replay_result(events->body).dump() == result->body;
  }
  server.stop();
  listener.join();

  if (!error.empty()) return {false, error};
  return {exact == kSessions && replay_identical == kSessions && completed == kSessions &&
              slowest <= 60.0,
          std::to_string(exact) + "/" + std::to_string(kSessions) +
              " sessions recovered the truth exactly (" + std::to_string(bands_hit) + "/" +
              std::to_string(5 * kSessions) + " bands), " + std::to_string(completed) +
              " completed 28 comparisons, replay identical " + std::to_string(replay_identical) +
              "/" + std::to_string(kSessions) + ", slowest " + fmt("%.2f s (limit 60 s)", slowest)};
}

std::set<std::string> split(const std::string& s) {
  std::set<std::string> out;
  std::stringstream in(s);
  std::string item;
  while (std::getline(in, item, ',')) {
    if (!item.empty()) out.insert(item);
  }
  return out;
}

}  // namespace

int main(int argc, char** argv) {
  std::set<std::string> known_red;
  std::string only;
  for (int i = 1; i < argc; ++i) {
    const std::string arg = argv[i];
    if (arg == "--known-red" && i + 1 < argc) {
      known_red = split(argv[++i]);
    } else if (arg == "--only" && i + 1 < argc) {
      only = argv[++i];
    } else {
      std::cerr << "usage: acceptance_suite [--known-red a,b] [--only name]\n";
      return 2;
    }
  }

  const std::vector<std::pair<std::string, std::function<Outcome()>>> criteria{
      {"independence_desk_scale", independence_desk_scale},
      {"independence_full_scale", independence_full_scale},
      {"single_band_convergence", single_band_convergence},
      {"gradient_hessian", gradient_hessian},
      {"laplace_fixed_point", laplace_fixed_point},
      {"hyperparameter_map", hyperparameter_map},
      {"counting_conservation", counting_conservation},
      {"dsp_accuracy", dsp_accuracy},
      {"end_to_end_simulated_fitting", end_to_end_simulated_fitting},
  };

  int unexpected = 0;
  for (const auto& [name, run] : criteria) {
    if (!only.empty() && name != only) continue;
    const auto t0 = Clock::now();
    Outcome o;
    try {
      o = run();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    std::cout << (o.pass ? "PASS " : "FAIL ") << name << ": " << o.detail
              << fmt(" [%.1f s]", seconds_since(t0));
    if (known_red.count(name)) std::cout << (o.pass ? " (listed known red, now passing)" : " (known red)");
    std::cout << std::endl;
    if (!o.pass && !known_red.count(name)) ++unexpected;
  }
  return unexpected == 0 ? 0 : 1;
}
