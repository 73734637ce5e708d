#pragma once

#include <filesystem>
#include <span>
#include <string_view>
#include <vector>

namespace earcanal::wav {

/// Mono PCM audio with samples scaled to [-1, 1).
struct PcmAudio {
    double sample_rate{44100.0};
    std::vector<double> samples;
};

/// Parses a RIFF/WAVE file holding 16-bit PCM mono (plain PCM or WAVE_FORMAT_EXTENSIBLE).
/// Throws ParseError for other encodings, channel counts or truncated chunks.
PcmAudio parse_wav(std::string_view bytes);
PcmAudio read_wav(const std::filesystem::path& path);

/// 16-bit PCM mono. Samples are multiplied by 32767, rounded and saturated.
std::string to_wav(std::span<const double> samples, double sample_rate);
void write_wav(const std::filesystem::path& path, std::span<const double> samples, double sample_rate);

}  // namespace earcanal::wav
