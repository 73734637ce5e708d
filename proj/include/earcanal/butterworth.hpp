#pragma once

#include <array>
#include <complex>
#include <span>
#include <vector>

namespace earcanal::acoustics {

/// Second-order section b0 + b1 z^-1 + b2 z^-2 over 1 + a1 z^-1 + a2 z^-2.
struct Biquad {
    std::array<double, 3> b{};
    std::array<double, 2> a{};
};

struct BandpassDesign {
    std::vector<Biquad> sections;
    double sample_rate{0.0};
    double low_hz{0.0};
    /// Upper edge actually used by the design.
    double high_hz{0.0};
    /// Upper edge as requested, before clamping.
    double requested_high_hz{0.0};
    bool high_clamped{false};
    int order{0};

    /// Complex response at frequency `hz`.
    std::complex<double> response(double hz) const;
    /// Filters `x` forward once from zero initial state.
    std::vector<double> apply(std::span<const double> x) const;
};

/// Fraction of Nyquist above which the upper band edge is clamped.
inline constexpr double kHighEdgeClampFraction = 0.99;

/// Digital Butterworth band-pass of even total order via the analog low-pass prototype,
/// low-pass to band-pass transform and bilinear transform with pre-warped edges.
/// Edges in (0.99 Nyquist, Nyquist) are clamped to 0.99 Nyquist.
/// Throws std::invalid_argument for odd or non-positive orders and edges out of range.
BandpassDesign design_butterworth_bandpass(double low_hz, double high_hz, int order, double sample_rate);

}  // namespace earcanal::acoustics
