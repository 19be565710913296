#include <cmath>
#include <limits>

#include "bandfit/dsp.hpp"
#include "bandfit/errors.hpp"
#include "bandfit/random.hpp"
#include "doctest.h"
#include "oracles/fft.hpp"

using namespace bandfit;
using namespace bandfit::dsp;

namespace {

const BandConfig kConfig;

AudioClip white_noise(std::uint64_t seed, std::size_t n, double scale) {
  Rng rng(seed);
  AudioClip c;
  c.samples.resize(n);
  for (auto& v : c.samples) v = scale * standard_normal(rng);
  return c;
}

// Band-centre gains measured on a 4096-point FFT (bins land exactly on the
// default centres at 16 kHz).
std::vector<double> measured_centres(const FirFilter& f) {
  const auto mag = oracle::fft_magnitude_db(f.coefficients, 4096);
  std::vector<double> out;
  for (double hz : kConfig.centers_hz()) {
    out.push_back(mag[static_cast<std::size_t>(std::lround(hz * 4096.0 / f.sample_rate_hz))]);
  }
  return out;
}

double snr_of(const AudioClip& clean, const AudioClip& mixed) {
  // Undo the clip guard before separating the noise component.
  const double g = mixed.guard_gain / clean.guard_gain;
  std::vector<double> noise(clean.samples.size());
  for (std::size_t i = 0; i < noise.size(); ++i) {
    noise[i] = mixed.samples[i] / g - clean.samples[i];
  }
  return 20.0 * std::log10(rms(clean.samples) / rms(noise));
}

}  // namespace

TEST_CASE("level map") {
  CHECK(level_to_db(kConfig, 1) == 12.0);
  CHECK(level_to_db(kConfig, 5) == 0.0);
  CHECK(level_to_db(kConfig, 8) == -9.0);
  CHECK_THROWS_AS(level_to_db(kConfig, 0), DomainError);
  CHECK_THROWS_AS(level_to_db(kConfig, 9), DomainError);
}

TEST_CASE("cosine interpolation") {
  const auto centres = kConfig.centers_hz();
  CHECK(centres == std::vector<double>{250, 750, 1500, 3000, 5000});

  const FrequencyResponse flat = interpolate_response(std::vector<double>(5, 7.5), kConfig);
  CHECK(flat.grid_hz.front() == 0.0);
  CHECK(flat.grid_hz.back() == 8000.0);
  for (double g : flat.gain_db) CHECK(g == doctest::Approx(7.5).epsilon(1e-14));

  const std::vector<double> gains{6, 3, 9, -9, -6};
  for (std::size_t a = 0; a < 5; ++a) {
    CHECK(cosine_interpolate(centres, gains, centres[a]) == doctest::Approx(gains[a]));
  }
  for (std::size_t a = 0; a + 1 < 5; ++a) {
    const double mid = std::sqrt(centres[a] * centres[a + 1]);
    CHECK(cosine_interpolate(centres, gains, mid) ==
          doctest::Approx(0.5 * (gains[a] + gains[a + 1])).epsilon(1e-12));
  }
  CHECK(cosine_interpolate(centres, gains, 10.0) == 6.0);
  CHECK(cosine_interpolate(centres, gains, 7900.0) == -6.0);

  // Monotone between anchors.
  double prev = cosine_interpolate(centres, gains, 1500.0);
  for (double hz = 1510.0; hz < 3000.0; hz += 10.0) {
    const double v = cosine_interpolate(centres, gains, hz);
    CHECK(v <= prev + 1e-12);
    prev = v;
  }

  CHECK_THROWS_AS(interpolate_response(std::vector<double>(4, 0.0), kConfig), DomainError);
  // Top band centre at 5 kHz is above Nyquist for 8 kHz sampling.
  CHECK_THROWS_AS(interpolate_response(std::vector<double>(5, 0.0), kConfig, 8000),
                  DomainError);
}

TEST_CASE("flat filters") {
  const FirFilter zero = design_gain_filter(std::vector<double>(5, 0.0), kConfig, 16000);
  REQUIRE(zero.coefficients.size() == 64);
  const auto mag = oracle::fft_magnitude_db(zero.coefficients, 4096);
  double worst = 0.0;
  for (std::size_t k = 0; k < mag.size(); ++k) {
    const double hz = 16000.0 * static_cast<double>(k) / 4096.0;
    if (hz >= 100.0 && hz <= 6000.0) worst = std::max(worst, std::abs(mag[k]));
  }
  CHECK(worst <= 0.1);

  for (std::size_t n = 0; n < 32; ++n) {
    CHECK(std::abs(zero.coefficients[n] - zero.coefficients[63 - n]) <= 1e-12);
  }

  const FirFilter six = design_gain_filter(std::vector<double>(5, 6.0), kConfig, 16000);
  const double scale = std::pow(10.0, 6.0 / 20.0);
  for (std::size_t n = 0; n < 64; ++n) {
    CHECK(six.coefficients[n] == doctest::Approx(scale * zero.coefficients[n]).epsilon(1e-9));
  }
}

TEST_CASE("band-centre accuracy") {
  // Standard and personalised gains of the first fixture subject.
  const std::vector<double> standard{4, 2, 12, 30, 28};
  const std::vector<double> personal{10, 5, 21, 21, 22};
  for (const auto& g : {standard, personal}) {
    const FirFilter f = design_gain_filter(g, kConfig, 16000);
    const auto m = measured_centres(f);
    for (std::size_t b = 0; b < 5; ++b) CHECK(std::abs(m[b] - g[b]) <= 1.0);
    // The library's own evaluator agrees with the FFT measurement.
    for (std::size_t b = 0; b < 5; ++b) {
      CHECK(filter_gain_db(f, kConfig.centers_hz()[b]) == doctest::Approx(m[b]).epsilon(1e-9));
    }
  }

  Rng rng(3);
  for (int t = 0; t < 50; ++t) {
    std::vector<double> g;
    for (int b = 0; b < 5; ++b) g.push_back(kConfig.db(1 + static_cast<int>(uniform_index(rng, 8))));
    const auto m = measured_centres(design_gain_filter(g, kConfig, 16000));
    for (std::size_t b = 0; b < 5; ++b) CHECK(std::abs(m[b] - g[b]) <= 1.0);
  }
}

TEST_CASE("design errors") {
  FirDesignOptions tight;
  tight.taps = 8;
  tight.max_corrections = 0;
  tight.tolerance_db = 1e-6;
  try {
    design_gain_filter(std::vector<double>{12, -9, 12, -9, 12}, kConfig, 16000, tight);
    FAIL("expected DesignError");
  } catch (const DesignError& e) {
    CHECK(e.worst_deviation_db() > 1e-6);
  }
  FirDesignOptions odd;
  odd.taps = 63;
  CHECK_THROWS_AS(design_gain_filter(std::vector<double>(5, 0.0), kConfig, 16000, odd),
                  DomainError);
}

TEST_CASE("gain chain") {
  const AudioClip noise = white_noise(1, 32000, 0.05);
  const std::vector<double> zero(5, 0.0);

  const AudioClip same = apply_gain_set(noise, GainSet{{5, 5, 5, 5, 5}}, zero, kConfig);
  REQUIRE(same.samples.size() == noise.samples.size());
  CHECK(same.guard_gain == 1.0);

  const AudioClip up = apply_gains_db(noise, std::vector<double>(5, 6.0), kConfig);
  CHECK(rms(up.samples) / rms(noise.samples) ==
        doctest::Approx(std::pow(10.0, 6.0 / 20.0)).epsilon(0.02));

  AudioClip silence;
  silence.samples.assign(16000, 0.0);
  const AudioClip quiet = apply_gain_set(silence, GainSet{{1, 2, 3, 4, 5}}, zero, kConfig);
  CHECK(peak(quiet.samples) == 0.0);

  // Linearity below the guard.
  const AudioClip soft = white_noise(9, 16000, 0.001);
  AudioClip half = soft;
  for (auto& v : half.samples) v *= 0.5;
  const GainSet g{{2, 7, 1, 4, 8}};
  const std::vector<double> rx{4, 2, 12, 30, 28};
  const AudioClip full_out = apply_gain_set(soft, g, rx, kConfig);
  const AudioClip half_out = apply_gain_set(half, g, rx, kConfig);
  REQUIRE(full_out.guard_gain == 1.0);
  for (std::size_t i = 0; i < soft.samples.size(); i += 97) {
    CHECK(half_out.samples[i] == doctest::Approx(0.5 * full_out.samples[i]).epsilon(1e-12));
  }

  CHECK(apply_gain_set(soft, g, rx, kConfig).samples == full_out.samples);
  CHECK_THROWS_AS(apply_gain_set(noise, GainSet{{1, 2}}, rx, kConfig), DomainError);
}

TEST_CASE("clip guard") {
  AudioClip loud;
  loud.samples = {0.5, -2.0, 1.0};
  apply_clip_guard(loud);
  CHECK(loud.guard_gain == 0.5);
  CHECK(peak(loud.samples) == 1.0);
  CHECK(loud.samples[0] == 0.25);

  const AudioClip hot = white_noise(2, 8000, 0.4);
  const AudioClip boosted = apply_gains_db(hot, std::vector<double>(5, 12.0), kConfig);
  CHECK(boosted.guard_gain < 1.0);
  CHECK(peak(boosted.samples) <= 1.0);
}

TEST_CASE("noise mixing") {
  const AudioClip clean = synthetic_speech(4, 2.5);
  const AudioClip babble = synthetic_babble(5, 1.3);
  REQUIRE(babble.samples.size() < clean.samples.size());

  for (double snr : {-10.0, -3.5, 0.0, 5.0, 12.0, 20.0}) {
    const AudioClip mixed = mix_noise(clean, babble, snr, 77);
    CHECK(std::abs(snr_of(clean, mixed) - snr) <= 0.01);
  }

  const AudioClip mixed = mix_noise(clean, babble, 5.0, 77);
  CHECK(mix_noise(clean, babble, 5.0, 77).samples == mixed.samples);
  CHECK(mix_noise(clean, babble, 5.0, 78).samples != mixed.samples);

  // A looped segment repeats with the noise period.
  const auto seg = noise_segment(babble, 3 * babble.samples.size(), 9);
  CHECK(seg[10] == seg[10 + babble.samples.size()]);
  const AudioClip long_noise = synthetic_babble(6, 5.0);
  const auto cut = noise_segment(long_noise, 100, 9);
  CHECK(cut.size() == 100);

  const AudioClip inf = mix_noise(clean, babble, std::numeric_limits<double>::infinity());
  CHECK(inf.samples == clean.samples);

  AudioClip silent = clean;
  std::fill(silent.samples.begin(), silent.samples.end(), 0.0);
  CHECK_THROWS_AS(mix_noise(silent, babble, 5.0), DomainError);
  CHECK_THROWS_AS(mix_noise(clean, silent, 5.0), DomainError);
  AudioClip other_rate = babble;
  other_rate.sample_rate_hz = 8000;
  CHECK_THROWS_AS(mix_noise(clean, other_rate, 5.0), DomainError);

  // Loud mixtures are guarded but keep the component ratio.
  AudioClip loud = clean;
  for (auto& v : loud.samples) v *= 3.0;
  const AudioClip guarded = mix_noise(loud, babble, -10.0, 1);
  CHECK(guarded.guard_gain < 1.0);
  CHECK(std::abs(snr_of(loud, guarded) + 10.0) <= 0.01);
}

TEST_CASE("stimulus generators") {
  const AudioClip s = synthetic_speech(1, 2.5);
  CHECK(s.samples.size() == 40000);
  CHECK(peak(s.samples) <= 1.0);
  CHECK(rms(s.samples) > 0.01);
  CHECK(synthetic_speech(1, 2.5).samples == s.samples);
  CHECK(synthetic_speech(2, 2.5).samples != s.samples);

  const AudioClip shorter = fit_length(s, 1.0);
  CHECK(shorter.samples.size() == 16000);
  const AudioClip longer = fit_length(s, 3.0);
  CHECK(longer.samples.size() == 48000);
  CHECK(longer.samples.back() == 0.0);
}
