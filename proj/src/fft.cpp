#include "earcanal/fft.hpp"

#include <algorithm>
#include <memory>
#include <mutex>
#include <stdexcept>

#include <fftw3.h>

namespace earcanal::fft {
namespace {

// FFTW planning touches global state; execution on distinct buffers does not.
std::mutex& planner_mutex() {
    static std::mutex m;
    return m;
}

struct FftwFree {
    void operator()(void* p) const { fftw_free(p); }
};

template <typename T>
using FftwBuffer = std::unique_ptr<T[], FftwFree>;

template <typename T>
FftwBuffer<T> allocate(std::size_t n) {
    auto* p = static_cast<T*>(fftw_malloc(sizeof(T) * std::max<std::size_t>(n, 1)));
    if (!p) throw std::bad_alloc();
    return FftwBuffer<T>(p);
}

class Plan {
public:
    explicit Plan(fftw_plan p) : plan_(p) {
        if (!plan_) throw std::runtime_error("FFTW failed to create a plan");
    }
    ~Plan() {
        std::lock_guard lock(planner_mutex());
        fftw_destroy_plan(plan_);
    }
    Plan(const Plan&) = delete;
    Plan& operator=(const Plan&) = delete;

    void execute() const { fftw_execute(plan_); }

private:
    fftw_plan plan_;
};

}  // namespace

std::vector<std::complex<double>> rfft(std::span<const double> x, std::size_t n) {
    if (n == 0) throw std::invalid_argument("rfft: zero length");
    const std::size_t bins = n / 2 + 1;
    auto in = allocate<double>(n);
    auto out = allocate<fftw_complex>(bins);
    std::unique_ptr<Plan> plan;
    {
        std::lock_guard lock(planner_mutex());
        plan = std::make_unique<Plan>(
            fftw_plan_dft_r2c_1d(static_cast<int>(n), in.get(), out.get(), FFTW_ESTIMATE));
    }
    const std::size_t copied = std::min(n, x.size());
    std::copy_n(x.begin(), copied, in.get());
    std::fill(in.get() + copied, in.get() + n, 0.0);
    plan->execute();

    std::vector<std::complex<double>> result(bins);
    for (std::size_t k = 0; k < bins; ++k) result[k] = {out[k][0], out[k][1]};
    return result;
}

std::vector<double> irfft(std::span<const std::complex<double>> bins, std::size_t n) {
    if (n == 0) throw std::invalid_argument("irfft: zero length");
    const std::size_t nb = n / 2 + 1;
    if (bins.size() != nb) throw std::invalid_argument("irfft: expected n/2 + 1 bins");
    auto in = allocate<fftw_complex>(nb);
    auto out = allocate<double>(n);
    std::unique_ptr<Plan> plan;
    {
        std::lock_guard lock(planner_mutex());
        plan = std::make_unique<Plan>(
            fftw_plan_dft_c2r_1d(static_cast<int>(n), in.get(), out.get(), FFTW_ESTIMATE));
    }
    for (std::size_t k = 0; k < nb; ++k) {
        in[k][0] = bins[k].real();
        in[k][1] = bins[k].imag();
    }
    plan->execute();

    std::vector<double> result(out.get(), out.get() + n);
    const double scale = 1.0 / static_cast<double>(n);
    for (auto& v : result) v *= scale;
    return result;
}

std::size_t next_power_of_two(std::size_t n) {
    std::size_t p = 1;
    while (p < n) p <<= 1;
    return p;
}

}  // namespace earcanal::fft
