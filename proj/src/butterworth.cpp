#include "earcanal/butterworth.hpp"

#include <cmath>
#include <numbers>
#include <stdexcept>
#include <string>

namespace earcanal::acoustics {
namespace {

using cplx = std::complex<double>;

cplx bilinear(cplx s, double fs) { return (1.0 + s / (2.0 * fs)) / (1.0 - s / (2.0 * fs)); }

// Band-pass poles produced by one low-pass prototype pole. The small root comes from the
// product of roots (w0^2) to avoid cancellation when the band is wide.
std::array<cplx, 2> bandpass_poles(cplx p, double bandwidth, double w0) {
    const cplx half = p * bandwidth / 2.0;
    cplx disc = std::sqrt(half * half - w0 * w0);
    if (std::abs(half + disc) < std::abs(half - disc)) disc = -disc;
    const cplx large = half + disc;
    return {large, w0 * w0 / large};
}

Biquad section_from_pole(cplx z) {
    Biquad q;
    q.b = {1.0, 0.0, -1.0};  // zeros at z = 1 and z = -1
    q.a = {-2.0 * z.real(), std::norm(z)};
    return q;
}

Biquad section_from_real_poles(double z1, double z2) {
    Biquad q;
    q.b = {1.0, 0.0, -1.0};
    q.a = {-(z1 + z2), z1 * z2};
    return q;
}

}  // namespace

std::complex<double> BandpassDesign::response(double hz) const {
    const cplx zinv = std::polar(1.0, -2.0 * std::numbers::pi * hz / sample_rate);
    cplx h = 1.0;
    for (const auto& s : sections) {
        const cplx num = s.b[0] + zinv * (s.b[1] + zinv * s.b[2]);
        const cplx den = 1.0 + zinv * (s.a[0] + zinv * s.a[1]);
        h *= num / den;
    }
    return h;
}

std::vector<double> BandpassDesign::apply(std::span<const double> x) const {
    std::vector<double> y(x.begin(), x.end());
    for (const auto& s : sections) {
        double w1 = 0.0, w2 = 0.0;  // transposed direct form II state
        for (auto& v : y) {
            const double in = v;
            const double out = s.b[0] * in + w1;
            w1 = s.b[1] * in - s.a[0] * out + w2;
            w2 = s.b[2] * in - s.a[1] * out;
            v = out;
        }
    }
    return y;
}

BandpassDesign design_butterworth_bandpass(double low_hz, double high_hz, int order, double sample_rate) {
    if (order <= 0 || order % 2 != 0) {
        throw std::invalid_argument("band-pass order must be a positive even number, got " + std::to_string(order));
    }
    if (!(sample_rate > 0.0)) throw std::invalid_argument("sample rate must be positive");
    const double nyquist = sample_rate / 2.0;
    if (!(low_hz > 0.0) || !(low_hz < high_hz)) {
        throw std::invalid_argument("band edges must satisfy 0 < low < high");
    }
    if (!(high_hz < nyquist)) {
        throw std::invalid_argument("upper band edge " + std::to_string(high_hz) + " Hz is at or above Nyquist (" +
                                    std::to_string(nyquist) + " Hz)");
    }

    BandpassDesign d;
    d.sample_rate = sample_rate;
    d.low_hz = low_hz;
    d.requested_high_hz = high_hz;
    d.order = order;
    d.high_hz = high_hz;
    if (high_hz > kHighEdgeClampFraction * nyquist) {
        d.high_hz = kHighEdgeClampFraction * nyquist;
        d.high_clamped = true;
    }
    if (!(low_hz < d.high_hz)) throw std::invalid_argument("lower band edge is above the clamped upper edge");

    const double fs = sample_rate;
    const double wl = 2.0 * fs * std::tan(std::numbers::pi * low_hz / fs);
    const double wh = 2.0 * fs * std::tan(std::numbers::pi * d.high_hz / fs);
    const double w0 = std::sqrt(wl * wh);
    const double bw = wh - wl;

    const int proto = order / 2;
    for (int k = 0; k < proto; ++k) {
        const cplx p = std::polar(1.0, std::numbers::pi * (2.0 * k + proto + 1.0) / (2.0 * proto));
        if (p.imag() < -1e-12) continue;  // handled with its conjugate
        const auto [s1, s2] = bandpass_poles(p, bw, w0);
        if (std::abs(p.imag()) <= 1e-12) {
            // Real prototype pole: its two band-pass poles form one section.
            const cplx z1 = bilinear(s1, fs);
            const cplx z2 = bilinear(s2, fs);
            if (std::abs(z1.imag()) > 1e-12) {
                d.sections.push_back(section_from_pole(z1));
            } else {
                d.sections.push_back(section_from_real_poles(z1.real(), z2.real()));
            }
        } else {
            d.sections.push_back(section_from_pole(bilinear(s1, fs)));
            d.sections.push_back(section_from_pole(bilinear(s2, fs)));
        }
    }

    // Unit gain at the digital image of the analog center frequency.
    const double center_hz = fs / std::numbers::pi * std::atan(w0 / (2.0 * fs));
    const double gain = std::abs(d.response(center_hz));
    for (auto& v : d.sections.front().b) v /= gain;
    return d;
}

}  // namespace earcanal::acoustics
