#pragma once

#include <array>
#include <cstddef>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "earcanal/geometry.hpp"

namespace earcanal::mesh {

enum class StlFormat { binary, ascii };

struct Triangle {
    std::array<Vec3, 3> vertices;
    /// Read from the file but never used in computation.
    Vec3 normal;
};

/// Triangulated surface in millimetres, as read from an STL file.
struct TriangleMesh {
    std::vector<Triangle> triangles;
    StlFormat source_format{StlFormat::binary};

    std::size_t size() const { return triangles.size(); }
};

/// Parses binary or ASCII STL; the format is detected from the header and payload length.
/// Throws ParseError on truncated payloads, count/length disagreement or non-numeric tokens.
TriangleMesh parse_stl(std::string_view bytes);
TriangleMesh read_stl(const std::filesystem::path& path);

std::string to_binary_stl(const TriangleMesh& mesh);
std::string to_ascii_stl(const TriangleMesh& mesh, std::string_view solid_name = "earcanal");
void write_binary_stl(const std::filesystem::path& path, const TriangleMesh& mesh);

/// Unit normal of a triangle from its winding, or zero for degenerate triangles.
Vec3 facet_normal(const std::array<Vec3, 3>& vertices);

/// Centers of gravity (x_i, y_i, z_i) of the mesh triangles, one per triangle.
struct CentroidCloud {
    std::vector<Vec3> points;

    std::size_t count() const { return points.size(); }
};

CentroidCloud triangle_centroids(const TriangleMesh& mesh);

/// Centroids whose depth satisfies n*dz < z - z_origin <= (n+1)*dz, projected onto the slice plane.
struct SliceBin {
    int n{0};
    std::vector<Point2> points;
};

struct SliceSet {
    double delta_z{0.1};
    double z_origin{0.0};
    /// Contiguous bins n = 0..n_max; empty bins are kept.
    std::vector<SliceBin> bins;

    int n_max() const { return static_cast<int>(bins.size()) - 1; }
};

/// Bins centroids along z starting from the ear-entrance end. A point exactly at z_origin goes
/// to bin 0. `z_origin` defaults to the minimum z of the cloud.
SliceSet slice_centroids(const CentroidCloud& cloud, double delta_z,
                         std::optional<double> z_origin = std::nullopt);

/// Slice index for a depth offset d = z - z_origin >= 0 under the upper-inclusive rule.
int slice_index(double depth, double delta_z);

nlohmann::json to_json(const CentroidCloud& cloud);
nlohmann::json to_json(const SliceSet& slices);
CentroidCloud centroid_cloud_from_json(const nlohmann::json& j);
SliceSet slice_set_from_json(const nlohmann::json& j);

}  // namespace earcanal::mesh
