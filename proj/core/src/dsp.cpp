#include "bandfit/dsp.hpp"

#include <algorithm>
#include <cmath>
#include <complex>
#include <limits>
#include <numbers>
#include <string>

#include "bandfit/errors.hpp"
#include "bandfit/random.hpp"

namespace bandfit::dsp {
namespace {

constexpr double kPi = std::numbers::pi;

double db_to_linear(double db) { return std::pow(10.0, db / 20.0); }

// Samples a response onto the uniform design grid, linear in dB.
std::vector<double> resample_db(const FrequencyResponse& r, int fft_size) {
  const int bins = fft_size / 2 + 1;
  std::vector<double> out(static_cast<std::size_t>(bins));
  const double nyquist = 0.5 * r.sample_rate_hz;
  for (int k = 0; k < bins; ++k) {
    const double hz = nyquist * k / (bins - 1);
    auto it = std::lower_bound(r.grid_hz.begin(), r.grid_hz.end(), hz);
    if (it == r.grid_hz.begin()) {
      out[static_cast<std::size_t>(k)] = r.gain_db.front();
    } else if (it == r.grid_hz.end()) {
      out[static_cast<std::size_t>(k)] = r.gain_db.back();
    } else {
      const auto hi = static_cast<std::size_t>(it - r.grid_hz.begin());
      const auto lo = hi - 1;
      const double t = (hz - r.grid_hz[lo]) / (r.grid_hz[hi] - r.grid_hz[lo]);
      out[static_cast<std::size_t>(k)] = r.gain_db[lo] + t * (r.gain_db[hi] - r.gain_db[lo]);
    }
  }
  return out;
}

// Windowed linear-phase inverse-transform basis: h = basis * magnitude.
class SamplingBasis {
 public:
  SamplingBasis(int taps, int fft_size)
      : taps_(taps), bins_(fft_size / 2 + 1),
        basis_(static_cast<std::size_t>(taps * bins_)) {
    const double delay = 0.5 * (taps - 1);
    for (int n = 0; n < taps; ++n) {
      const double t = n - delay;
      const double w = 0.5 - 0.5 * std::cos(2.0 * kPi * (n + 0.5) / taps);
      for (int k = 0; k < bins_; ++k) {
        const double weight = (k == 0 || k == bins_ - 1) ? 1.0 : 2.0;
        basis_[static_cast<std::size_t>(n * bins_ + k)] =
            w * weight * std::cos(2.0 * kPi * k * t / fft_size) / fft_size;
      }
    }
  }

  std::vector<double> design(std::span<const double> gain_db) const {
    std::vector<double> mag(static_cast<std::size_t>(bins_));
    for (int k = 0; k < bins_; ++k) {
      mag[static_cast<std::size_t>(k)] = db_to_linear(gain_db[static_cast<std::size_t>(k)]);
    }
    std::vector<double> h(static_cast<std::size_t>(taps_), 0.0);
    for (int n = 0; n < taps_; ++n) {
      double acc = 0.0;
      for (int k = 0; k < bins_; ++k) {
        acc += basis_[static_cast<std::size_t>(n * bins_ + k)] * mag[static_cast<std::size_t>(k)];
      }
      h[static_cast<std::size_t>(n)] = acc;
    }
    for (int n = 0; n < taps_ / 2; ++n) {
      auto& lo = h[static_cast<std::size_t>(n)];
      auto& hi = h[static_cast<std::size_t>(taps_ - 1 - n)];
      const double avg = 0.5 * (lo + hi);
      lo = avg;
      hi = avg;
    }
    return h;
  }

 private:
  int taps_;
  int bins_;
  std::vector<double> basis_;
};

}  // namespace

double level_to_db(const BandConfig& config, int level) { return config.db(level); }

double cosine_interpolate(std::span<const double> anchor_hz,
                          std::span<const double> anchor_db, double hz) {
  if (anchor_hz.empty() || anchor_hz.size() != anchor_db.size()) {
    throw DomainError("anchor lists must be non-empty and equally long");
  }
  if (hz <= anchor_hz.front()) return anchor_db.front();
  if (hz >= anchor_hz.back()) return anchor_db.back();
  const auto it = std::upper_bound(anchor_hz.begin(), anchor_hz.end(), hz);
  const auto hi = static_cast<std::size_t>(it - anchor_hz.begin());
  const auto lo = hi - 1;
  const double t = (std::log(hz) - std::log(anchor_hz[lo])) /
                   (std::log(anchor_hz[hi]) - std::log(anchor_hz[lo]));
  const double w = 0.5 - 0.5 * std::cos(kPi * t);
  return anchor_db[lo] * (1.0 - w) + anchor_db[hi] * w;
}

FrequencyResponse interpolate_response(std::span<const double> band_gains_db,
                                       const BandConfig& config, int sample_rate_hz,
                                       int grid_points) {
  config.validate();
  if (static_cast<int>(band_gains_db.size()) != config.bands()) {
    throw DomainError("expected " + std::to_string(config.bands()) + " band gains, got " +
                      std::to_string(band_gains_db.size()));
  }
  if (grid_points < 2) throw DomainError("frequency grid needs two points");
  if (sample_rate_hz <= 0) throw DomainError("sample rate must be positive");
  for (double g : band_gains_db) {
    if (!std::isfinite(g)) throw DomainError("band gains must be finite");
  }
  FrequencyResponse r;
  r.sample_rate_hz = sample_rate_hz;
  r.anchor_hz = config.centers_hz();
  r.anchor_db.assign(band_gains_db.begin(), band_gains_db.end());
  if (r.anchor_hz.back() >= 0.5 * sample_rate_hz) {
    throw DomainError("band centres must lie below Nyquist");
  }
  const double nyquist = 0.5 * sample_rate_hz;
  r.grid_hz.resize(static_cast<std::size_t>(grid_points));
  r.gain_db.resize(static_cast<std::size_t>(grid_points));
  for (int k = 0; k < grid_points; ++k) {
    const double hz = nyquist * k / (grid_points - 1);
    r.grid_hz[static_cast<std::size_t>(k)] = hz;
    r.gain_db[static_cast<std::size_t>(k)] = cosine_interpolate(r.anchor_hz, r.anchor_db, hz);
  }
  return r;
}

double filter_gain_db(const FirFilter& filter, double hz) {
  const double w = 2.0 * kPi * hz / filter.sample_rate_hz;
  std::complex<double> acc = 0.0;
  for (std::size_t n = 0; n < filter.coefficients.size(); ++n) {
    acc += filter.coefficients[n] * std::polar(1.0, -w * static_cast<double>(n));
  }
  return 20.0 * std::log10(std::abs(acc));
}

std::vector<double> magnitude_response_db(const FirFilter& filter, int n_fft) {
  std::vector<double> out(static_cast<std::size_t>(n_fft / 2 + 1));
  for (std::size_t k = 0; k < out.size(); ++k) {
    out[k] = filter_gain_db(filter, static_cast<double>(k) * filter.sample_rate_hz / n_fft);
  }
  return out;
}

FirFilter design_fir(const FrequencyResponse& response, const FirDesignOptions& options) {
  if (options.taps < 2 || options.taps % 2 != 0) {
    throw DomainError("tap count must be even and at least 2");
  }
  if (options.fft_size < 2 * options.taps || options.fft_size % 2 != 0) {
    throw DomainError("fft_size must be even and at least twice the tap count");
  }
  if (response.grid_hz.size() < 2 || response.grid_hz.size() != response.gain_db.size()) {
    throw DomainError("frequency response grid is malformed");
  }

  FirFilter filter;
  filter.sample_rate_hz = response.sample_rate_hz;

  const SamplingBasis basis(options.taps, options.fft_size);
  if (response.anchor_hz.empty()) {
    filter.coefficients = basis.design(resample_db(response, options.fft_size));
    return filter;
  }

  // Window smoothing pulls neighbouring bands together; pre-correct the
  // anchor gains so the realised response hits each anchor.
  std::vector<double> anchors = response.anchor_db;
  const int bins = options.fft_size / 2 + 1;
  const double nyquist = 0.5 * response.sample_rate_hz;
  std::vector<double> target(static_cast<std::size_t>(bins));
  double worst = std::numeric_limits<double>::infinity();
  for (int iter = 0; iter <= options.max_corrections; ++iter) {
    for (int k = 0; k < bins; ++k) {
      target[static_cast<std::size_t>(k)] =
          cosine_interpolate(response.anchor_hz, anchors, nyquist * k / (bins - 1));
    }
    filter.coefficients = basis.design(target);
    worst = 0.0;
    std::vector<double> error(anchors.size());
    for (std::size_t a = 0; a < anchors.size(); ++a) {
      error[a] = response.anchor_db[a] - filter_gain_db(filter, response.anchor_hz[a]);
      worst = std::max(worst, std::abs(error[a]));
    }
    if (worst <= options.correction_stop_db) break;
    for (std::size_t a = 0; a < anchors.size(); ++a) anchors[a] += error[a];
  }
  if (!(worst <= options.tolerance_db)) {
    throw DesignError("FIR design misses an anchor by " + std::to_string(worst) + " dB",
                      worst);
  }
  return filter;
}

std::vector<double> convolve(std::span<const double> x, std::span<const double> h) {
  std::vector<double> y(x.size(), 0.0);
  for (std::size_t n = 0; n < x.size(); ++n) {
    const std::size_t kmax = std::min(h.size(), n + 1);
    double acc = 0.0;
    for (std::size_t k = 0; k < kmax; ++k) acc += h[k] * x[n - k];
    y[n] = acc;
  }
  return y;
}

double rms(std::span<const double> x) {
  if (x.empty()) return 0.0;
  double acc = 0.0;
  for (double v : x) acc += v * v;
  return std::sqrt(acc / static_cast<double>(x.size()));
}

double peak(std::span<const double> x) {
  double p = 0.0;
  for (double v : x) p = std::max(p, std::abs(v));
  return p;
}

void apply_clip_guard(AudioClip& clip) {
  const double p = peak(clip.samples);
  if (p <= 1.0) return;
  const double g = 1.0 / p;
  for (auto& v : clip.samples) v *= g;
  clip.guard_gain *= g;
}

FirFilter design_gain_filter(std::span<const double> gains_db, const BandConfig& config,
                             int sample_rate_hz, const FirDesignOptions& options) {
  return design_fir(interpolate_response(gains_db, config, sample_rate_hz), options);
}

AudioClip apply_gains_db(const AudioClip& clip, std::span<const double> gains_db,
                         const BandConfig& config, const FirDesignOptions& options) {
  if (clip.samples.empty()) throw DomainError("audio clip is empty");
  const FirFilter filter = design_gain_filter(gains_db, config, clip.sample_rate_hz, options);
  AudioClip out;
  out.sample_rate_hz = clip.sample_rate_hz;
  out.guard_gain = clip.guard_gain;
  out.samples = convolve(clip.samples, filter.coefficients);
  apply_clip_guard(out);
  return out;
}

AudioClip apply_gain_set(const AudioClip& clip, const GainSet& gain_set,
                         std::span<const double> prescription_db,
                         const BandConfig& config, const FirDesignOptions& options) {
  if (gain_set.bands() != config.bands() ||
      static_cast<int>(prescription_db.size()) != config.bands()) {
    throw DomainError("gain set / prescription length does not match the band count");
  }
  std::vector<double> gains(prescription_db.begin(), prescription_db.end());
  for (std::size_t b = 0; b < gains.size(); ++b) gains[b] += config.db(gain_set.levels[b]);
  return apply_gains_db(clip, gains, config, options);
}

std::vector<double> noise_segment(const AudioClip& noise, std::size_t length,
                                  std::uint64_t seed) {
  if (noise.samples.empty()) throw DomainError("noise clip is empty");
  Rng rng(seed);
  const std::size_t n = noise.samples.size();
  std::vector<double> seg(length);
  if (n >= length) {
    const auto offset = static_cast<std::size_t>(uniform_index(rng, n - length + 1));
    std::copy_n(noise.samples.begin() + static_cast<std::ptrdiff_t>(offset), length,
                seg.begin());
  } else {
    const auto offset = static_cast<std::size_t>(uniform_index(rng, n));
    for (std::size_t i = 0; i < length; ++i) seg[i] = noise.samples[(offset + i) % n];
  }
  return seg;
}

AudioClip mix_noise(const AudioClip& clean, const AudioClip& noise, double snr_db,
                    std::uint64_t seed) {
  if (clean.samples.empty()) throw DomainError("clean clip is empty");
  if (clean.sample_rate_hz != noise.sample_rate_hz) {
    throw DomainError("clean and noise sample rates differ");
  }
  if (std::isnan(snr_db)) throw DomainError("SNR is NaN");
  const double clean_rms = rms(clean.samples);
  if (clean_rms == 0.0) throw DomainError("clean clip has zero power");
  AudioClip out = clean;
  if (snr_db == std::numeric_limits<double>::infinity()) return out;

  const auto seg = noise_segment(noise, clean.samples.size(), seed);
  const double noise_rms = rms(seg);
  if (noise_rms == 0.0) throw DomainError("noise has zero power");
  const double gain = clean_rms / (noise_rms * std::pow(10.0, snr_db / 20.0));
  for (std::size_t i = 0; i < out.samples.size(); ++i) out.samples[i] += gain * seg[i];
  apply_clip_guard(out);
  return out;
}

AudioClip fit_length(const AudioClip& clip, double seconds) {
  AudioClip out = clip;
  out.samples.resize(static_cast<std::size_t>(std::llround(seconds * clip.sample_rate_hz)),
                     0.0);
  return out;
}

AudioClip synthetic_speech(std::uint64_t seed, double seconds, int sample_rate_hz) {
  Rng rng(seed);
  const auto n = static_cast<std::size_t>(std::llround(seconds * sample_rate_hz));
  const double f0 = 95.0 + 130.0 * uniform01(rng);
  const double vibrato = 0.05 + 0.1 * uniform01(rng);
  const double syllable_hz = 3.0 + 2.0 * uniform01(rng);
  const double phase0 = 2.0 * kPi * uniform01(rng);
  const double nyquist = 0.5 * sample_rate_hz;
  const double top = std::min(6000.0, 0.9 * nyquist);
  const int harmonics = static_cast<int>(top / (f0 * (1.0 + vibrato)));

  AudioClip clip;
  clip.sample_rate_hz = sample_rate_hz;
  clip.samples.assign(n, 0.0);
  double phase = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double t = static_cast<double>(i) / sample_rate_hz;
    const double inst_f0 = f0 * (1.0 + vibrato * std::sin(2.0 * kPi * 0.7 * t + phase0));
    phase += 2.0 * kPi * inst_f0 / sample_rate_hz;
    double s = 0.0;
    for (int h = 1; h <= harmonics; ++h) s += std::sin(h * phase) / h;
    const double env = std::pow(std::sin(kPi * syllable_hz * t + phase0), 2);
    clip.samples[i] = env * s;
  }
  const double p = peak(clip.samples);
  if (p > 0.0) {
    for (auto& v : clip.samples) v *= 0.5 / p;
  }
  return clip;
}

AudioClip synthetic_babble(std::uint64_t seed, double seconds, int sample_rate_hz,
                           int talkers) {
  AudioClip mix;
  mix.sample_rate_hz = sample_rate_hz;
  mix.samples.assign(static_cast<std::size_t>(std::llround(seconds * sample_rate_hz)), 0.0);
  Rng rng(seed);
  for (int k = 0; k < talkers; ++k) {
    const auto talker = synthetic_speech(rng(), seconds, sample_rate_hz);
    for (std::size_t i = 0; i < mix.samples.size(); ++i) mix.samples[i] += talker.samples[i];
  }
  const double p = peak(mix.samples);
  if (p > 0.0) {
    for (auto& v : mix.samples) v *= 0.5 / p;
  }
  return mix;
}

}  // namespace bandfit::dsp
