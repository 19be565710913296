#pragma once

// 16-bit PCM WAV input/output. Multi-channel input is averaged to mono;
// output is always mono. Samples are scaled by 1/32768.

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "bandfit/dsp.hpp"

namespace bandfit::wav {

// Throws FormatError for anything but integer PCM with 16 bits per sample.
dsp::AudioClip decode(std::span<const std::uint8_t> bytes);
dsp::AudioClip read(const std::filesystem::path& path);

// Canonical 44-byte-header PCM16 mono. Samples are clamped to [-1, 1).
std::vector<std::uint8_t> encode(const dsp::AudioClip& clip);
void write(const dsp::AudioClip& clip, const std::filesystem::path& path);

}  // namespace bandfit::wav
