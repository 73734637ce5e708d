#pragma once

#include <cstddef>
#include <filesystem>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "earcanal/similarity_matrix.hpp"

namespace earcanal::analysis {

/// One comparison point (shape similarity, acoustic similarity).
struct SimilarityPair {
    double shape{0.0};
    double acoustic{0.0};
    std::string other_id;
};

struct RegressionResult {
    std::string subject_id;
    std::vector<SimilarityPair> pairs;
    double r{0.0};
    double r_squared{0.0};
    double slope{0.0};
    double intercept{0.0};
    /// Set when either variable has zero variance; r and R^2 are reported as 0.
    bool degenerate{false};
};

/// The (shape, acoustic) values of subject `n` against every other subject, in subject order.
/// Throws std::invalid_argument when the subject sets differ or fewer than 3 subjects exist.
std::vector<SimilarityPair> shape_acoustic_pairs(const SimilarityMatrix& shape, const SimilarityMatrix& acoustic,
                                                 std::size_t n);

/// Ordinary least squares acoustic = slope * shape + intercept with Pearson r and
/// R^2 = 1 - SS_res / SS_tot. Throws ComputeError when the shape values have zero variance.
RegressionResult linear_regression(std::span<const SimilarityPair> pairs);

/// Regression for every subject of the matrices. Subjects whose shape values are all equal get
/// a degenerate result (r = 0, slope = 0, intercept = mean acoustic) instead of an error.
std::vector<RegressionResult> regress_all(const SimilarityMatrix& shape, const SimilarityMatrix& acoustic);

struct MatrixStatistics {
    double overall_mean{0.0};
    double designated_pair_value{0.0};
    /// 100 * (pair / overall - 1).
    double percent_excess{0.0};
};

/// Mean over the M(M-1)/2 unordered pairs and the excess of cell (i, j) over it.
/// Throws std::invalid_argument for an incomplete matrix.
MatrixStatistics matrix_statistics(const SimilarityMatrix& m, std::size_t i = 0, std::size_t j = 1);

struct ReportInputs {
    SimilarityMatrix shape;
    SimilarityMatrix acoustic;
    std::vector<RegressionResult> regressions;
    std::pair<std::size_t, std::size_t> designated_pair{0, 1};
    /// Embedded verbatim in the summary.
    nlohmann::json config;
};

inline constexpr const char* kReportSchema = "earcanal.report/1";

nlohmann::json summary_json(const ReportInputs& inputs);
std::string regression_svg(const RegressionResult& result);
std::string summary_csv(const std::vector<RegressionResult>& results);

/// Writes matrices, per-subject regression JSON and SVG, summary CSV and summary JSON into
/// `out_dir` (created on demand). Returns the written paths. Throws IoError when unwritable.
std::vector<std::filesystem::path> emit_report(const ReportInputs& inputs, const std::filesystem::path& out_dir);

}  // namespace earcanal::analysis
