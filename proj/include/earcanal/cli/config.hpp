#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include <json.hpp>

#include "earcanal/acoustics.hpp"
#include "earcanal/shape.hpp"

namespace earcanal::cli {

struct AcousticConfig {
    int mls_order{16};
    int repeats{5};
    double trim_threshold{0.05};
    double low_hz{100.0};
    double high_hz{22000.0};
    int filter_order{4};
    std::size_t feature_length{2048};
    acoustics::SimilarityMode similarity_mode{acoustics::SimilarityMode::vector};
    /// Additive noise of simulated takes, in units of the +/-1 excitation.
    double noise_rms{0.05};

    acoustics::FeatureChainConfig feature_chain() const;
};

struct SynthConfig {
    double perturbation{0.02};
    int independents{2};
    int takes{10};
    /// When non-empty, one corpus per perturbation level in its own subdirectory.
    std::vector<double> sweep;
    /// Render takes as PCM16 WAV recordings instead of plant references.
    bool render_wav{false};
};

struct PipelineConfig {
    std::uint64_t seed{20220509};
    shape::ShapeConfig shape;
    AcousticConfig acoustic;
    SynthConfig synth;
    /// Input manifest as given on the command line or in the file.
    std::string manifest;

    void validate() const;
};

inline constexpr int kConfigVersion = 1;

nlohmann::json to_json(const PipelineConfig& config);
/// Missing keys keep their defaults; unknown keys are rejected. Throws ConfigError.
PipelineConfig config_from_json(const nlohmann::json& j, PipelineConfig base = {});
PipelineConfig load_config(const std::filesystem::path& path);
void save_config(const std::filesystem::path& path, const PipelineConfig& config);

/// Seed of take `take` of subject number `subject`, derived from the run seed.
std::uint64_t take_seed(std::uint64_t seed, std::size_t subject, int take);

}  // namespace earcanal::cli
