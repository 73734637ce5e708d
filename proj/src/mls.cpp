#include "earcanal/mls.hpp"

#include <bit>
#include <complex>
#include <random>
#include <stdexcept>
#include <string>

#include "earcanal/error.hpp"
#include "earcanal/fft.hpp"

namespace earcanal::acoustics {

std::vector<int> mls_taps(int order) {
    // Primitive polynomials x^m + sum x^t + 1 (XAPP052 maximal-length tap table).
    switch (order) {
        case 2: return {2, 1};
        case 3: return {3, 2};
        case 4: return {4, 3};
        case 5: return {5, 3};
        case 6: return {6, 5};
        case 7: return {7, 6};
        case 8: return {8, 6, 5, 4};
        case 9: return {9, 5};
        case 10: return {10, 7};
        case 11: return {11, 9};
        case 12: return {12, 6, 4, 1};
        case 13: return {13, 4, 3, 1};
        case 14: return {14, 5, 3, 1};
        case 15: return {15, 14};
        case 16: return {16, 15, 13, 4};
        case 17: return {17, 14};
        case 18: return {18, 11};
        case 19: return {19, 6, 2, 1};
        case 20: return {20, 17};
        case 21: return {21, 19};
        case 22: return {22, 21};
        case 23: return {23, 18};
        case 24: return {24, 23, 22, 17};
        default: throw std::invalid_argument("unsupported MLS order " + std::to_string(order));
    }
}

ExcitationSignal generate_mls(int order, double sample_rate) {
    if (order < kMinMlsOrder || order > kMaxMlsOrder) {
        throw std::invalid_argument("unsupported MLS order " + std::to_string(order));
    }
    if (!(sample_rate > 0.0)) throw std::invalid_argument("sample rate must be positive");

    // State bit j holds a[k + j]; the recurrence a[k + m] = a[k] + sum a[k + t] follows the
    // characteristic polynomial x^m + sum x^t + 1.
    std::uint32_t mask = 1u;
    for (int t : mls_taps(order)) {
        if (t < order) mask |= 1u << t;
    }
    const std::size_t length = (std::size_t{1} << order) - 1;
    ExcitationSignal sig;
    sig.order = order;
    sig.sample_rate = sample_rate;
    sig.samples.resize(length);
    std::uint32_t state = 1u;
    for (std::size_t i = 0; i < length; ++i) {
        sig.samples[i] = (state & 1u) ? -1.0 : 1.0;
        const std::uint32_t feedback = static_cast<std::uint32_t>(std::popcount(state & mask)) & 1u;
        state = (state >> 1) | (feedback << (order - 1));
    }
    return sig;
}

std::vector<double> simulate_measurement(const ExcitationSignal& excitation, const ImpulseResponse& plant,
                                         int repeats, double noise_rms, std::uint64_t seed) {
    if (repeats < 1) throw std::invalid_argument("simulate_measurement: repeats must be at least 1");
    if (!(noise_rms >= 0.0)) throw std::invalid_argument("simulate_measurement: negative noise RMS");
    const std::size_t period = excitation.length();
    if (plant.samples.empty()) throw std::invalid_argument("simulate_measurement: empty plant");
    if (plant.samples.size() >= period) {
        throw std::invalid_argument("simulate_measurement: plant (" + std::to_string(plant.size()) +
                                    " taps) is not shorter than the excitation period (" +
                                    std::to_string(period) + ")");
    }

    // Steady-state period, computed directly in the time domain.
    std::vector<double> steady(period, 0.0);
    const auto& s = excitation.samples;
    for (std::size_t k = 0; k < plant.samples.size(); ++k) {
        const double h = plant.samples[k];
        if (h == 0.0) continue;
        for (std::size_t n = 0; n < k; ++n) steady[n] += h * s[n + period - k];
        for (std::size_t n = k; n < period; ++n) steady[n] += h * s[n - k];
    }

    const auto periods = static_cast<std::size_t>(repeats) + 1;
    std::vector<double> recorded;
    recorded.reserve(periods * period);
    for (std::size_t p = 0; p < periods; ++p) recorded.insert(recorded.end(), steady.begin(), steady.end());
    if (noise_rms > 0.0) {
        std::mt19937_64 rng(seed);
        std::normal_distribution<double> noise(0.0, noise_rms);
        for (auto& v : recorded) v += noise(rng);
    }
    return recorded;
}

ImpulseResponse recover_impulse_response(std::span<const double> recorded, const ExcitationSignal& excitation,
                                         int repeats) {
    if (repeats < 1) throw std::invalid_argument("recover_impulse_response: repeats must be at least 1");
    const std::size_t period = excitation.length();
    if (period == 0) throw std::invalid_argument("recover_impulse_response: empty excitation");
    const std::size_t needed = period * (static_cast<std::size_t>(repeats) + 1);
    if (recorded.size() < needed) {
        throw ComputeError("recording too short: " + std::to_string(recorded.size()) + " samples, need " +
                           std::to_string(needed) + " for " + std::to_string(repeats) +
                           " averaged periods plus warm-up");
    }

    std::vector<double> average(period, 0.0);
    for (int p = 1; p <= repeats; ++p) {
        const auto offset = static_cast<std::size_t>(p) * period;
        for (std::size_t n = 0; n < period; ++n) average[n] += recorded[offset + n];
    }
    for (auto& v : average) v /= static_cast<double>(repeats);

    // c[k] = sum_n y[n] s[n - k] = (L + 1) h[k] - sum h, and sum_k c[k] = sum h.
    const auto ys = fft::rfft(average, period);
    const auto ss = fft::rfft(excitation.samples, period);
    std::vector<std::complex<double>> cross(ys.size());
    for (std::size_t k = 0; k < ys.size(); ++k) cross[k] = ys[k] * std::conj(ss[k]);
    std::vector<double> corr = fft::irfft(cross, period);

    double total = 0.0;
    for (double v : corr) total += v;
    const double scale = 1.0 / static_cast<double>(period + 1);

    ImpulseResponse ir;
    ir.sample_rate = excitation.sample_rate;
    ir.stage = Stage::raw;
    ir.samples.resize(period);
    for (std::size_t k = 0; k < period; ++k) ir.samples[k] = (corr[k] + total) * scale;
    ir.history.push_back("raw: MLS order " + std::to_string(excitation.order) + ", " +
                         std::to_string(repeats) + " synchronous additions");
    return ir;
}

}  // namespace earcanal::acoustics
