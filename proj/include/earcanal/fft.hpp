#pragma once

#include <complex>
#include <cstddef>
#include <span>
#include <vector>

namespace earcanal::fft {

/// Real-to-complex transform of `x` zero-padded (or truncated) to length n. Returns n/2 + 1 bins.
std::vector<std::complex<double>> rfft(std::span<const double> x, std::size_t n);

/// Inverse of rfft for a length-n real signal, including the 1/n scaling.
std::vector<double> irfft(std::span<const std::complex<double>> bins, std::size_t n);

std::size_t next_power_of_two(std::size_t n);

}  // namespace earcanal::fft
