#include "earcanal/analysis.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "earcanal/error.hpp"

namespace earcanal::analysis {

std::vector<SimilarityPair> shape_acoustic_pairs(const SimilarityMatrix& shape, const SimilarityMatrix& acoustic,
                                                 std::size_t n) {
    if (shape.subject_ids() != acoustic.subject_ids()) {
        throw std::invalid_argument("shape and acoustic matrices list different subjects");
    }
    const std::size_t m = shape.size();
    if (m < 3) {
        throw std::invalid_argument("regression needs at least 3 subjects (2 comparison points per subject)");
    }
    if (n >= m) throw std::out_of_range("subject index out of range");
    std::vector<SimilarityPair> pairs;
    pairs.reserve(m - 1);
    for (std::size_t k = 0; k < m; ++k) {
        if (k == n) continue;
        pairs.push_back({shape.value(n, k), acoustic.value(n, k), shape.subject_ids()[k]});
    }
    return pairs;
}

RegressionResult linear_regression(std::span<const SimilarityPair> pairs) {
    if (pairs.size() < 2) throw std::invalid_argument("linear regression needs at least 2 points");
    const auto count = static_cast<double>(pairs.size());
    double mx = 0.0, my = 0.0;
    for (const auto& p : pairs) {
        mx += p.shape;
        my += p.acoustic;
    }
    mx /= count;
    my /= count;
    double sxx = 0.0, syy = 0.0, sxy = 0.0;
    for (const auto& p : pairs) {
        const double dx = p.shape - mx;
        const double dy = p.acoustic - my;
        sxx += dx * dx;
        syy += dy * dy;
        sxy += dx * dy;
    }
    if (sxx == 0.0) throw ComputeError("linear regression: shape values have zero variance, slope undefined");

    RegressionResult res;
    res.pairs.assign(pairs.begin(), pairs.end());
    res.slope = sxy / sxx;
    res.intercept = my - res.slope * mx;
    if (syy == 0.0) {
        res.degenerate = true;
        return res;
    }
    res.r = std::clamp(sxy / std::sqrt(sxx * syy), -1.0, 1.0);
    double ss_res = 0.0;
    for (const auto& p : pairs) {
        const double e = p.acoustic - (res.slope * p.shape + res.intercept);
        ss_res += e * e;
    }
    res.r_squared = std::clamp(1.0 - ss_res / syy, 0.0, 1.0);
    return res;
}

std::vector<RegressionResult> regress_all(const SimilarityMatrix& shape, const SimilarityMatrix& acoustic) {
    std::vector<RegressionResult> out;
    for (std::size_t n = 0; n < shape.size(); ++n) {
        const auto pairs = shape_acoustic_pairs(shape, acoustic, n);
        const bool flat_x = std::all_of(pairs.begin(), pairs.end(),
                                        [&](const SimilarityPair& p) { return p.shape == pairs.front().shape; });
        RegressionResult r;
        if (flat_x) {
            // No slope is defined; report the relation as absent rather than aborting the batch.
            r.pairs = pairs;
            for (const auto& p : pairs) r.intercept += p.acoustic / static_cast<double>(pairs.size());
            r.degenerate = true;
        } else {
            r = linear_regression(pairs);
        }
        r.subject_id = shape.subject_ids()[n];
        out.push_back(std::move(r));
    }
    return out;
}

MatrixStatistics matrix_statistics(const SimilarityMatrix& m, std::size_t i, std::size_t j) {
    if (m.size() < 2 || !m.complete()) throw std::invalid_argument("matrix_statistics: incomplete matrix");
    double sum = 0.0;
    std::size_t count = 0;
    for (std::size_t a = 0; a < m.size(); ++a) {
        for (std::size_t b = a + 1; b < m.size(); ++b) {
            sum += m.value(a, b);
            ++count;
        }
    }
    MatrixStatistics s;
    s.overall_mean = sum / static_cast<double>(count);
    s.designated_pair_value = m.value(i, j);
    s.percent_excess = 100.0 * (s.designated_pair_value / s.overall_mean - 1.0);
    return s;
}

}  // namespace earcanal::analysis
