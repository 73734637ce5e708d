#pragma once

#include <cstddef>
#include <filesystem>
#include <string>
#include <vector>

#include <json.hpp>

#include "earcanal/butterworth.hpp"
#include "earcanal/signal.hpp"
#include "earcanal/similarity_matrix.hpp"

namespace earcanal::acoustics {

/// Drops every sample before the first one reaching threshold_fraction * max|x|.
ImpulseResponse trim_pre_rise(const ImpulseResponse& ir, double threshold_fraction = 0.05);

/// Magnitude bins below this fraction of the peak are clamped before taking the log.
inline constexpr double kSpectralFloor = 1e-10;

/// Minimum-phase sequence with the same magnitude spectrum, via real-cepstrum folding.
/// The output has the input's length.
ImpulseResponse minimum_phase(const ImpulseResponse& ir);

/// Initial FFT length used by minimum_phase for an input of n samples.
std::size_t minimum_phase_fft_length(std::size_t n);

/// minimum_phase doubles its FFT length until the energy past the input length, relative to
/// the total, is at most kMinimumPhaseResidue, or the length reaches kMaxMinimumPhaseFft.
inline constexpr double kMinimumPhaseResidue = 1e-20;
inline constexpr std::size_t kMaxMinimumPhaseFft = std::size_t{1} << 22;

ImpulseResponse butterworth_bandpass(const ImpulseResponse& ir, double low_hz, double high_hz, int filter_order = 4);

/// The normalized, unit-power feature f[n] of one take.
struct AcousticFeature {
    std::vector<double> samples;
    double sample_rate{kPipelineSampleRate};
    std::string subject_id;
    int take_index{0};
    std::vector<std::string> history;

    std::size_t size() const { return samples.size(); }
};

AcousticFeature normalize_power(const ImpulseResponse& ir, std::string subject_id = {}, int take_index = 0);

enum class SimilarityMode {
    /// Time-aligned cosine of the whole sequences.
    vector,
    /// Mean per-sample sign agreement, skipping samples where either operand is zero.
    per_sample,
};

SimilarityMode parse_similarity_mode(const std::string& name);
std::string to_string(SimilarityMode mode);

/// Cosine similarity after truncating both features to the shorter length.
double acoustic_similarity(const AcousticFeature& a, const AcousticFeature& b,
                           SimilarityMode mode = SimilarityMode::vector);

struct AcousticSimilarity {
    double mean{0.0};
    /// Population standard deviation over all cross-subject take pairs.
    double std{0.0};
    std::pair<std::string, std::string> subject_pair;
    std::pair<int, int> takes{0, 0};
};

/// Per unordered subject pair, mean and population deviation over every cross-subject take
/// pair. Subjects are ordered by first appearance in `features`.
SimilarityMatrix acoustic_similarity_matrix(const std::vector<AcousticFeature>& features,
                                            SimilarityMode mode = SimilarityMode::vector,
                                            std::vector<AcousticSimilarity>* details = nullptr);

struct FeatureChainConfig {
    double trim_threshold{0.05};
    double low_hz{100.0};
    double high_hz{22000.0};
    int filter_order{4};
    /// Common length applied after trimming.
    std::size_t feature_length{2048};
};

/// raw IR -> trim -> common length -> minimum phase -> band-pass -> unit power.
AcousticFeature extract_feature(const ImpulseResponse& raw, const FeatureChainConfig& config,
                                std::string subject_id = {}, int take_index = 0);

/// Little-endian float32 samples with a JSON sidecar next to them (same stem, .json).
void write_feature(const std::filesystem::path& f32_path, const AcousticFeature& feature,
                   const nlohmann::json& parameters);
AcousticFeature read_feature(const std::filesystem::path& f32_path);

}  // namespace earcanal::acoustics
