#pragma once

#include <string>
#include <string_view>
#include <vector>

namespace earcanal::acoustics {

/// Sample rate of the recorded pipeline data.
inline constexpr double kPipelineSampleRate = 44100.0;

/// Processing stage of an impulse response; transitions only move forward.
enum class Stage { raw = 0, trimmed = 1, min_phase = 2, bandpassed = 3, normalized = 4 };

std::string_view to_string(Stage stage);

struct ImpulseResponse {
    std::vector<double> samples;
    double sample_rate{kPipelineSampleRate};
    Stage stage{Stage::raw};
    /// One line per applied stage with its parameters, oldest first.
    std::vector<std::string> history;

    std::size_t size() const { return samples.size(); }
};

}  // namespace earcanal::acoustics
