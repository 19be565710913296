#include <csignal>
#include <cstdlib>
#include <fstream>
#include <iostream>
#include <pthread.h>
#include <sstream>
#include <thread>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "bandfit/dsp.hpp"
#include "bandfit/http_server.hpp"
#include "bandfit/independence.hpp"
#include "bandfit/session_service.hpp"
#include "bandfit/simulation.hpp"
#include "bandfit/wav.hpp"

using namespace bandfit;
using nlohmann::json;

namespace {

constexpr int kOk = 0;
constexpr int kValidationFailed = 1;
constexpr int kUsage = 2;

// Thrown for bad argument combinations detected after parsing.
struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

void write_output(const std::string& path, const std::string& content) {
  if (path == "-") {
    std::cout << content;
    std::cout.flush();
    return;
  }
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write " + path);
  out << content;
  if (!out) throw Error("cannot write " + path);
}

std::string join(const std::vector<int>& v, char sep = ' ') {
  std::ostringstream s;
  for (std::size_t i = 0; i < v.size(); ++i) s << (i ? std::string(1, sep) : "") << v[i];
  return s.str();
}

std::string join(const std::vector<double>& v, char sep = ' ') {
  std::ostringstream s;
  s.precision(17);
  for (std::size_t i = 0; i < v.size(); ++i) s << (i ? std::string(1, sep) : "") << v[i];
  return s.str();
}

json read_json_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open " + path);
  try {
    return json::parse(in);
  } catch (const json::exception& e) {
    throw ConfigError(path + ": " + e.what());
  }
}

// ---------------------------------------------------------------------------

struct IndependenceArgs {
  int levels = 8;
  int bands = 5;
  std::vector<int> truth;
  int trials = 0;
  std::string mode = "sampled";
  std::uint64_t pairs = 10'000'000;
  std::uint64_t seed = 2024;
  unsigned workers = 0;
  bool allow_over_budget = false;
  std::string out = "-";
  std::string format = "json";
};

int cmd_independence(const IndependenceArgs& a) {
  const rrt::RrtMode mode = a.mode == "full" ? rrt::RrtMode::full()
                                             : rrt::RrtMode::sampled(a.pairs, a.seed);
  rrt::RrtOptions options;
  options.workers = a.workers;
  options.allow_over_budget = a.allow_over_budget;

  if (a.trials > 0) {
    if (!a.truth.empty()) throw UsageError("--truth and --trials are mutually exclusive");
    std::cerr << "independence: " << a.trials << " random truths, " << a.levels << " levels x "
              << a.bands << " bands, " << a.mode << " mode\n";
    const rrt::IndependenceReport r =
        rrt::validate_independence(a.trials, a.levels, a.bands, mode, a.seed, options);
    std::vector<std::vector<int>> recovered;
    for (const auto& t : r.truths) recovered.push_back(t.levels);
    std::size_t next = 0;
    for (std::size_t i = 0; i < r.truths.size() && next < r.mismatched_cases.size(); ++i) {
      if (r.mismatched_cases[next].truth == r.truths[i]) {
        recovered[i] = r.mismatched_cases[next++].recovered;
      }
    }
    if (a.format == "csv") {
      std::string csv = "trial,truth,recovered,match\n";
      for (std::size_t i = 0; i < r.truths.size(); ++i) {
        csv += std::to_string(i) + "," + join(r.truths[i].levels) + "," + join(recovered[i]) +
               "," + (recovered[i] == r.truths[i].levels ? "1" : "0") + "\n";
      }
      write_output(a.out, csv);
    } else {
      json cases = json::array();
      for (std::size_t i = 0; i < r.truths.size(); ++i) {
        cases.push_back({{"truth", r.truths[i].levels},
                         {"recovered", recovered[i]},
                         {"match", recovered[i] == r.truths[i].levels}});
      }
      write_output(a.out, json{{"n_levels", a.levels},
                               {"bands", a.bands},
                               {"mode", a.mode},
                               {"seed", a.seed},
                               {"trials", r.trials},
                               {"matches", r.matches},
                               {"cases", cases}}
                                  .dump(2) +
                              "\n");
    }
    std::cerr << "independence: " << r.matches << "/" << r.trials << " truths recovered\n";
    return r.matches == r.trials ? kOk : kValidationFailed;
  }

  GainSet truth;
  if (!a.truth.empty()) {
    truth.levels = a.truth;
  } else if (a.levels == 8 && a.bands == 5) {
    truth.levels = {3, 4, 5, 2, 3};
  } else {
    throw UsageError("--truth is required unless levels = 8 and bands = 5");
  }
  if (truth.bands() != a.bands) throw UsageError("--truth needs one level per band");
  validate_gain_set(truth, a.levels);

  std::cerr << "independence: truth [" << join(truth.levels) << "], " << a.mode << " mode\n";
  const rrt::RrtRun run = rrt::run_rrt_tables(a.levels, a.bands, truth, mode, options);
  const std::vector<int> argmax = run.ratios.argmax();
  const bool match = argmax == truth.levels;

  if (a.format == "csv") {
    std::string csv = "level";
    for (int b = 1; b <= a.bands; ++b) csv += ",band_" + std::to_string(b);
    csv += "\n";
    for (int l = 1; l <= a.levels; ++l) {
      std::vector<double> row;
      for (int b = 0; b < a.bands; ++b) row.push_back(run.ratios.at(l, b));
      csv += std::to_string(l) + "," + join(row, ',') + "\n";
    }
    write_output(a.out, csv);
  } else {
    json ratio = json::array();
    json preference = json::array();
    json occurrence = json::array();
    for (int l = 1; l <= a.levels; ++l) {
      json r = json::array(), p = json::array(), o = json::array();
      for (int b = 0; b < a.bands; ++b) {
        r.push_back(run.ratios.at(l, b));
        p.push_back(run.counts.pref(l, b));
        o.push_back(run.counts.occ(l, b));
      }
      ratio.push_back(r);
      preference.push_back(p);
      occurrence.push_back(o);
    }
    write_output(a.out, json{{"n_levels", a.levels},
                             {"bands", a.bands},
                             {"mode", a.mode},
                             {"seed", a.seed},
                             {"pairs", run.pairs},
                             {"truth", truth.levels},
                             {"ratio", ratio},
                             {"preference", preference},
                             {"occurrence", occurrence},
                             {"argmax", argmax},
                             {"match", match}}
                                .dump(2) +
                            "\n");
  }
  std::cerr << "independence: " << run.pairs << " pairs, argmax [" << join(argmax) << "] "
            << (match ? "matches" : "does not match") << " the truth\n";
  return match ? kOk : kValidationFailed;
}

// ---------------------------------------------------------------------------

struct FitSimArgs {
  int levels = 8;
  int episodes = 7;
  int per_episode = 4;
  int runs = 200;
  double noise_sigma = 0.0;
  double min_agreement = 0.0;
  std::uint64_t seed = 2024;
  std::string out = "-";
  std::string format = "json";
};

int cmd_fit_sim(const FitSimArgs& a) {
  sim::SingleBandOptions options;
  options.n_levels = a.levels;
  options.episodes = a.episodes;
  options.per_episode = a.per_episode;
  options.noise_sigma = a.noise_sigma;

  sim::SingleBandReport report;
  for (int r = 0; r < a.runs; ++r) {
    report.runs.push_back(sim::run_single_band(options, sim::study_run_seed(a.seed, r)));
    report.agreements += report.runs.back().estimated_best == report.runs.back().true_best;
    if ((r + 1) % 50 == 0 || r + 1 == a.runs) {
      std::cerr << "fit-sim: " << r + 1 << "/" << a.runs << " runs\n";
    }
  }

  if (a.format == "csv") {
    std::string csv =
        "run,seed,true_best,estimated_best,match,lambda,sigma,true_utility,estimate\n";
    for (std::size_t i = 0; i < report.runs.size(); ++i) {
      const auto& r = report.runs[i];
      std::ostringstream line;
      line.precision(17);
      line << i << "," << r.seed << "," << r.true_best << "," << r.estimated_best << ","
           << (r.true_best == r.estimated_best) << "," << r.lambda << "," << r.sigma << ","
           << join(r.true_utility) << "," << join(r.estimate) << "\n";
      csv += line.str();
    }
    write_output(a.out, csv);
  } else {
    json runs = json::array();
    for (const auto& r : report.runs) {
      runs.push_back({{"seed", r.seed},
                      {"true_utility", r.true_utility},
                      {"estimate", r.estimate},
                      {"true_best", r.true_best},
                      {"estimated_best", r.estimated_best},
                      {"lambda", r.lambda},
                      {"sigma", r.sigma}});
    }
    write_output(a.out, json{{"n_levels", a.levels},
                             {"episodes", a.episodes},
                             {"per_episode", a.per_episode},
                             {"noise_sigma", a.noise_sigma},
                             {"seed", a.seed},
                             {"runs", a.runs},
                             {"agreements", report.agreements},
                             {"agreement_rate", report.agreement_rate()},
                             {"results", runs}}
                                .dump(2) +
                            "\n");
  }
  std::cerr << "fit-sim: top-1 agreement " << report.agreements << "/" << a.runs << "\n";
  return report.agreement_rate() >= a.min_agreement ? kOk : kValidationFailed;
}

// ---------------------------------------------------------------------------

struct ProcessArgs {
  std::string in;
  std::string out;
  std::vector<double> gains_db;
  std::vector<int> levels;
  std::vector<double> prescription_db;
  std::string noise;
  double snr_db = 5.0;
  std::uint64_t seed = 0;
};

int cmd_process(const ProcessArgs& a) {
  const BandConfig bands;
  std::vector<double> gains = a.gains_db;
  if (gains.empty()) {
    if (a.levels.empty() || a.prescription_db.empty()) {
      throw UsageError("give --gains-db, or --levels together with --prescription");
    }
    if (a.levels.size() != a.prescription_db.size()) {
      throw UsageError("--levels and --prescription need the same length");
    }
    for (std::size_t b = 0; b < a.levels.size(); ++b) {
      gains.push_back(a.prescription_db[b] + bands.db(a.levels[b]));
    }
  } else if (!a.levels.empty() || !a.prescription_db.empty()) {
    throw UsageError("--gains-db excludes --levels and --prescription");
  }
  if (static_cast<int>(gains.size()) != bands.bands()) {
    throw UsageError("need " + std::to_string(bands.bands()) + " band gains");
  }

  const dsp::AudioClip clean = wav::read(a.in);
  dsp::AudioClip input = clean;
  json report = {{"gains_db", gains}, {"samples", clean.samples.size()},
                 {"sample_rate_hz", clean.sample_rate_hz}};
  if (!a.noise.empty()) {
    const dsp::AudioClip noise = wav::read(a.noise);
    input = dsp::mix_noise(clean, noise, a.snr_db, a.seed);
    std::vector<double> residual(clean.samples.size());
    for (std::size_t i = 0; i < residual.size(); ++i) {
      residual[i] = input.samples[i] / input.guard_gain - clean.samples[i];
    }
    const double measured = 20.0 * std::log10(dsp::rms(clean.samples) / dsp::rms(residual));
    report["snr_db"] = a.snr_db;
    report["snr_db_measured"] = measured;
    std::cerr << "process: mixed noise at " << measured << " dB SNR\n";
  }

  const dsp::AudioClip output = dsp::apply_gains_db(input, gains, bands);
  const dsp::FirFilter fir = dsp::design_gain_filter(gains, bands, clean.sample_rate_hz);
  json at_centres = json::array();
  for (double c : bands.centers_hz()) at_centres.push_back(dsp::filter_gain_db(fir, c));
  report["filter_gain_at_centres_db"] = at_centres;
  report["guard_gain"] = output.guard_gain;
  wav::write(output, a.out);
  std::cout << report.dump(2) << "\n";
  return kOk;
}

// ---------------------------------------------------------------------------

struct ServeArgs {
  std::string config;
  std::string session;
  std::string host;
  int port = -1;
  std::string data_dir;
};

void split_listen(const std::string& listen, std::string& host, int& port) {
  const auto colon = listen.rfind(':');
  if (colon == std::string::npos) throw ConfigError("listen address must be host:port");
  host = listen.substr(0, colon);
  try {
    port = std::stoi(listen.substr(colon + 1));
  } catch (const std::exception&) {
    throw ConfigError("bad port in '" + listen + "'");
  }
}

int cmd_serve(const ServeArgs& a) {
  std::string host = "127.0.0.1";
  int port = 8080;
  std::string data_dir;
  if (!a.config.empty()) {
    const json cfg = read_json_file(a.config);
    if (!cfg.is_object()) throw ConfigError(a.config + ": expected an object");
    for (const auto& [k, v] : cfg.items()) {
      if (k != "listen" && k != "data_dir") throw ConfigError("unknown server field '" + k + "'");
    }
    if (cfg.contains("listen")) split_listen(cfg["listen"].get<std::string>(), host, port);
    if (cfg.contains("data_dir")) data_dir = cfg["data_dir"].get<std::string>();
  }
  if (const char* env = std::getenv("BANDFIT_LISTEN"); env && *env) {
    split_listen(env, host, port);
  }
  if (!a.host.empty()) host = a.host;
  if (a.port >= 0) port = a.port;
  if (!a.data_dir.empty()) data_dir = a.data_dir;
  if (port < 0 || port > 65535) throw ConfigError("port out of range");

  std::optional<service::SessionConfig> initial;
  if (!a.session.empty()) initial = service::session_config_from_json(read_json_file(a.session));

  // Block termination signals before any thread starts so a dedicated
  // thread can wait for them.
  sigset_t signals;
  sigemptyset(&signals);
  sigaddset(&signals, SIGINT);
  sigaddset(&signals, SIGTERM);
  pthread_sigmask(SIG_BLOCK, &signals, nullptr);

  service::ServiceOptions options;
  options.data_dir = data_dir;
  service::SessionManager sessions(options);
  if (initial) std::cerr << "serve: created session " << sessions.create_session(*initial) << "\n";

  service::HttpServer server(sessions);
  const int bound = server.bind(host, port);
  std::cout << "listening on http://" << host << ":" << bound << std::endl;

  std::thread waiter([&] {
    int sig = 0;
    sigwait(&signals, &sig);
    server.stop();
  });
  server.listen();
  // listen() returning without a signal (e.g. socket failure) still needs
  // the waiter released.
  pthread_kill(waiter.native_handle(), SIGTERM);
  waiter.join();
  std::cerr << "serve: stopped\n";
  return kOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Pairwise-comparison hearing-aid gain fitting"};
  app.require_subcommand(1);

  IndependenceArgs ind;
  auto* c_ind = app.add_subcommand("independence", "Band-independence study on synthetic preferences");
  c_ind->add_option("--levels", ind.levels, "Adjustment levels per band")->check(CLI::Range(2, 64));
  c_ind->add_option("--bands", ind.bands, "Number of bands")->check(CLI::Range(1, 16));
  c_ind->add_option("--truth", ind.truth, "True gain set, comma separated")->delimiter(',');
  c_ind->add_option("--trials", ind.trials, "Random truths to validate (0 = single run)")
      ->check(CLI::NonNegativeNumber);
  c_ind->add_option("--mode", ind.mode, "full or sampled")->check(CLI::IsMember({"full", "sampled"}));
  c_ind->add_option("--pairs", ind.pairs, "Pairs drawn in sampled mode");
  c_ind->add_option("--seed", ind.seed, "Random seed");
  c_ind->add_option("--workers", ind.workers, "Threads for full enumeration (0 = all cores)");
  c_ind->add_flag("--allow-over-budget", ind.allow_over_budget, "Permit very large full runs");
  c_ind->add_option("--out", ind.out, "Output path, - for stdout");
  c_ind->add_option("--format", ind.format, "csv or json")->check(CLI::IsMember({"csv", "json"}));

  FitSimArgs fit;
  auto* c_fit = app.add_subcommand("fit-sim", "Single-band convergence with a simulated listener");
  c_fit->add_option("--levels", fit.levels, "Adjustment levels")->check(CLI::Range(2, 64));
  c_fit->add_option("--episodes", fit.episodes, "Episodes per session")->check(CLI::PositiveNumber);
  c_fit->add_option("--per-episode", fit.per_episode, "Comparisons per episode")
      ->check(CLI::PositiveNumber);
  c_fit->add_option("--runs", fit.runs, "Simulated sessions")->check(CLI::PositiveNumber);
  c_fit->add_option("--noise-sigma", fit.noise_sigma, "Probit response noise")
      ->check(CLI::NonNegativeNumber);
  c_fit->add_option("--min-agreement", fit.min_agreement,
                    "Exit 1 when top-1 agreement falls below this fraction")
      ->check(CLI::Range(0.0, 1.0));
  c_fit->add_option("--seed", fit.seed, "Random seed");
  c_fit->add_option("--out", fit.out, "Output path, - for stdout");
  c_fit->add_option("--format", fit.format, "csv or json")->check(CLI::IsMember({"csv", "json"}));

  ProcessArgs proc;
  auto* c_proc = app.add_subcommand("process", "Apply a 5-band gain set to a WAV file");
  c_proc->add_option("--in", proc.in, "Input PCM16 WAV")->required()->check(CLI::ExistingFile);
  c_proc->add_option("--out", proc.out, "Output PCM16 WAV")->required();
  c_proc->add_option("--gains-db", proc.gains_db, "Per-band gains in dB")->delimiter(',');
  c_proc->add_option("--levels", proc.levels, "Per-band level indices")->delimiter(',');
  c_proc->add_option("--prescription", proc.prescription_db, "Per-band prescription in dB")
      ->delimiter(',');
  c_proc->add_option("--noise", proc.noise, "Babble WAV mixed in before filtering")
      ->check(CLI::ExistingFile);
  c_proc->add_option("--snr", proc.snr_db, "Speech-to-noise ratio in dB");
  c_proc->add_option("--seed", proc.seed, "Noise offset seed");

  ServeArgs serve;
  auto* c_serve = app.add_subcommand("serve", "Run the fitting HTTP service");
  c_serve->add_option("--config", serve.config, "Server config JSON (listen, data_dir)")
      ->check(CLI::ExistingFile);
  c_serve->add_option("--session", serve.session, "Session config JSON created at startup")
      ->check(CLI::ExistingFile);
  c_serve->add_option("--host", serve.host, "Listen host (overrides BANDFIT_LISTEN)");
  c_serve->add_option("--port", serve.port, "Listen port, 0 for any free port")
      ->check(CLI::Range(0, 65535));
  c_serve->add_option("--data-dir", serve.data_dir, "Directory for session event logs");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kOk : kUsage;
  }

  try {
    if (*c_ind) return cmd_independence(ind);
    if (*c_fit) return cmd_fit_sim(fit);
    if (*c_proc) return cmd_process(proc);
    if (*c_serve) return cmd_serve(serve);
  } catch (const UsageError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kUsage;
  } catch (const ConfigError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kUsage;
  } catch (const DomainError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kUsage;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kValidationFailed;
  }
  return kUsage;
}
