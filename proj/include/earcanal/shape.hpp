#pragma once

#include <cstddef>
#include <filesystem>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "earcanal/geometry.hpp"
#include "earcanal/mesh.hpp"
#include "earcanal/similarity_matrix.hpp"

namespace earcanal::shape {

struct ShapeConfig {
    /// Slice width in mm.
    double delta_z{0.1};
    /// Uniform grid size over [0, 2*pi) for the rotation search.
    int theta_samples{3600};
    /// Depth of the ear entrance; the lowest centroid when unset.
    std::optional<double> z_origin;

    void validate() const;
};

/// Ellipse-center trajectory along the canal depth, shifted so that entry 0 is the origin.
struct ShapeCenterFunction {
    std::vector<Point2> entries;
    double delta_z{0.1};
    /// Uncorrected slice centers (cx_n, cy_n).
    std::vector<Point2> raw_centers;
    /// Slice indices whose center was interpolated from neighbours because the fit failed.
    std::vector<int> interpolated;
    /// Slices after the last fittable one that were dropped.
    int truncated_tail{0};

    std::size_t size() const { return entries.size(); }
};

struct ShapeSimilarity {
    double value{0.0};
    /// Orientation of B relative to A in [0, 2*pi): the objective compares R(theta)*A with B.
    double best_theta{0.0};
    std::pair<std::string, std::string> subject_pair;
};

/// Fits an ellipse per slice and subtracts the entrance center. Interior slices that cannot be
/// fitted are linearly interpolated; trailing ones are dropped. Throws ComputeError when slice 0
/// cannot be fitted or fewer than two usable slices remain.
ShapeCenterFunction shape_center_function(const mesh::SliceSet& slices);

ShapeCenterFunction rotate_center_function(const ShapeCenterFunction& ec, double theta);

/// Mean over n >= 1 of the cosine between Ec_A[n] rotated by theta and Ec_B[n]. Entries with
/// zero magnitude are skipped. Both functions are truncated to the shorter length.
double similarity_objective(const ShapeCenterFunction& a, const ShapeCenterFunction& b, double theta);

/// Rotation-maximized shape similarity over the uniform theta grid.
ShapeSimilarity shape_similarity(const ShapeCenterFunction& a, const ShapeCenterFunction& b,
                                 const ShapeConfig& config);

struct Subject {
    std::string id;
    ShapeCenterFunction ec;
};

/// All pairwise similarities; each unordered pair is evaluated once.
SimilarityMatrix shape_similarity_matrix(const std::vector<Subject>& subjects,
                                         const ShapeConfig& config,
                                         std::vector<ShapeSimilarity>* details = nullptr);

/// Convenience chain: centroids, slicing and center function for one mesh.
ShapeCenterFunction center_function_from_mesh(const mesh::TriangleMesh& mesh, const ShapeConfig& config);

/// Columns n, x_n, y_n.
std::string to_csv(const ShapeCenterFunction& ec);
void write_csv(const std::filesystem::path& path, const ShapeCenterFunction& ec);
nlohmann::json to_json(const ShapeCenterFunction& ec);
ShapeCenterFunction center_function_from_json(const nlohmann::json& j);

}  // namespace earcanal::shape
