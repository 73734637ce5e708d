#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "earcanal/signal.hpp"

namespace earcanal::acoustics {

/// One period of a maximum length sequence, values +1/-1.
struct ExcitationSignal {
    std::vector<double> samples;
    int order{0};
    double sample_rate{kPipelineSampleRate};

    std::size_t length() const { return samples.size(); }
};

inline constexpr int kMinMlsOrder = 2;
inline constexpr int kMaxMlsOrder = 24;

/// Feedback tap positions (exponents of a primitive polynomial) for the given order.
std::vector<int> mls_taps(int order);

/// LFSR sequence of length 2^order - 1 with bits {0, 1} mapped to {+1, -1}.
/// Throws std::invalid_argument for orders outside [2, 24].
ExcitationSignal generate_mls(int order, double sample_rate = kPipelineSampleRate);

/// Plays the periodic excitation through `plant` (circular convolution) for repeats + 1
/// periods and adds white Gaussian noise of RMS `noise_rms` drawn from `seed`.
std::vector<double> simulate_measurement(const ExcitationSignal& excitation, const ImpulseResponse& plant,
                                         int repeats, double noise_rms, std::uint64_t seed);

/// Discards the first period, averages the next `repeats` periods and cross-correlates the
/// average with the excitation. The result has one excitation period of samples.
ImpulseResponse recover_impulse_response(std::span<const double> recorded,
                                         const ExcitationSignal& excitation, int repeats);

}  // namespace earcanal::acoustics
