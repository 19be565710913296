#pragma once

// Gain set -> audible stimulus: dB mapping, raised-cosine interpolation of
// band gains on a log-frequency axis, linear-phase FIR realisation, filtering
// and SNR-controlled noise mixing.

#include <cstdint>
#include <span>
#include <vector>

#include "bandfit/band_config.hpp"

namespace bandfit::dsp {

inline constexpr int kDefaultSampleRate = 16000;
inline constexpr int kDefaultTaps = 64;

struct AudioClip {
  std::vector<double> samples;
  int sample_rate_hz = kDefaultSampleRate;
  // Product of every peak-normalisation factor applied so far (1 = none).
  double guard_gain = 1.0;
};

struct FrequencyResponse {
  std::vector<double> grid_hz;  // ascending, 0 .. Nyquist
  std::vector<double> gain_db;
  // Interpolation anchors; when present design_fir verifies them.
  std::vector<double> anchor_hz;
  std::vector<double> anchor_db;
  int sample_rate_hz = kDefaultSampleRate;
};

struct FirFilter {
  std::vector<double> coefficients;
  int sample_rate_hz = kDefaultSampleRate;
};

struct FirDesignOptions {
  int taps = kDefaultTaps;
  int fft_size = 1024;          // frequency-sampling density
  double tolerance_db = 1.0;    // accepted anchor deviation
  double correction_stop_db = 0.01;
  int max_corrections = 50;
};

double level_to_db(const BandConfig& config, int level);

// Raised-cosine crossfade between adjacent anchors in log frequency,
// constant outside the anchor span.
double cosine_interpolate(std::span<const double> anchor_hz,
                          std::span<const double> anchor_db, double hz);

// Anchors at the band centres of `config`; grid of `grid_points` uniformly
// spaced frequencies from 0 to Nyquist.
FrequencyResponse interpolate_response(std::span<const double> band_gains_db,
                                       const BandConfig& config,
                                       int sample_rate_hz = kDefaultSampleRate,
                                       int grid_points = 513);

// Frequency sampling of the target magnitude with linear phase, inverse
// transform, Hann window. When the response carries anchors the anchor gains
// are iteratively pre-corrected until the measured response at each anchor
// matches; DesignError if the worst deviation exceeds tolerance_db.
FirFilter design_fir(const FrequencyResponse& response,
                     const FirDesignOptions& options = {});

// |H(f)| in dB by direct evaluation of the transfer function.
double filter_gain_db(const FirFilter& filter, double hz);

// Magnitude at the n_fft/2 + 1 bins of an n_fft-point transform.
std::vector<double> magnitude_response_db(const FirFilter& filter, int n_fft = 4096);

// Causal convolution truncated to the input length.
std::vector<double> convolve(std::span<const double> x, std::span<const double> h);

double rms(std::span<const double> x);
double peak(std::span<const double> x);

// Scales the clip down if any |sample| > 1 and records the factor.
void apply_clip_guard(AudioClip& clip);

FirFilter design_gain_filter(std::span<const double> gains_db, const BandConfig& config,
                             int sample_rate_hz, const FirDesignOptions& options = {});

AudioClip apply_gains_db(const AudioClip& clip, std::span<const double> gains_db,
                         const BandConfig& config, const FirDesignOptions& options = {});

// gains = prescription + level offsets.
AudioClip apply_gain_set(const AudioClip& clip, const GainSet& gain_set,
                         std::span<const double> prescription_db,
                         const BandConfig& config, const FirDesignOptions& options = {});

// Noise is looped from a seeded offset when shorter than the clean clip
// (or cut from a seeded offset when longer) and scaled so the RMS power ratio
// equals snr_db. snr_db = +infinity returns the clean clip.
AudioClip mix_noise(const AudioClip& clean, const AudioClip& noise, double snr_db,
                    std::uint64_t seed = 0);

// The noise segment mix_noise would use, before scaling.
std::vector<double> noise_segment(const AudioClip& noise, std::size_t length,
                                  std::uint64_t seed);

// Trim or zero-pad to the given duration.
AudioClip fit_length(const AudioClip& clip, double seconds);

// Seeded voiced-speech-like harmonic complex with syllabic envelope.
AudioClip synthetic_speech(std::uint64_t seed, double seconds,
                           int sample_rate_hz = kDefaultSampleRate);

// Sum of several synthetic talkers.
AudioClip synthetic_babble(std::uint64_t seed, double seconds,
                           int sample_rate_hz = kDefaultSampleRate, int talkers = 6);

}  // namespace bandfit::dsp
