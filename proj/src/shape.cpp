#include "earcanal/shape.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <numbers>
#include <sstream>
#include <stdexcept>

#include "earcanal/ellipse.hpp"
#include "earcanal/error.hpp"

namespace earcanal::shape {
namespace {

constexpr double kTwoPi = 2.0 * std::numbers::pi;

struct Terms {
    // Sums of cos and sin of the per-entry angle from A to B, and the number of terms.
    double cos_sum{0.0};
    double sin_sum{0.0};
    std::size_t count{0};
};

// cos(angle(R(theta) a, b)) = cos(delta - theta) with delta the angle from a to b, so the
// mean over n collapses to (C cos(theta) + S sin(theta)) / K.
Terms accumulate(const ShapeCenterFunction& a, const ShapeCenterFunction& b) {
    const std::size_t common = std::min(a.size(), b.size());
    Terms t;
    for (std::size_t n = 1; n < common; ++n) {
        const Point2& pa = a.entries[n];
        const Point2& pb = b.entries[n];
        const double na = norm(pa);
        const double nb = norm(pb);
        if (na == 0.0 || nb == 0.0) continue;
        const double dot = (pa.x * pb.x + pa.y * pb.y) / (na * nb);
        const double crs = (pa.x * pb.y - pa.y * pb.x) / (na * nb);
        t.cos_sum += dot;
        t.sin_sum += crs;
        ++t.count;
    }
    return t;
}

double objective(const Terms& t, double theta) {
    return (t.cos_sum * std::cos(theta) + t.sin_sum * std::sin(theta)) / static_cast<double>(t.count);
}

std::string fmt(double v) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.9f", v);
    return buf;
}

}  // namespace

void ShapeConfig::validate() const {
    if (!(delta_z > 0.0) || !std::isfinite(delta_z)) throw std::invalid_argument("delta_z must be positive");
    if (theta_samples < 4) throw std::invalid_argument("theta_samples must be at least 4");
}

ShapeCenterFunction shape_center_function(const mesh::SliceSet& slices) {
    if (slices.bins.empty()) throw ComputeError("shape center function: no slices");

    std::vector<std::optional<Point2>> centers(slices.bins.size());
    for (std::size_t n = 0; n < slices.bins.size(); ++n) {
        try {
            centers[n] = ellipse::fit_ellipse_direct(slices.bins[n].points).center;
        } catch (const ellipse::FitError&) {
            centers[n].reset();
        }
    }
    if (!centers.front()) {
        throw ComputeError("shape center function: slice 0 cannot be fitted, origin correction impossible");
    }
    std::size_t last = centers.size() - 1;
    while (!centers[last]) --last;
    if (last == 0) throw ComputeError("shape center function: all slices beyond the entrance are unfittable");

    ShapeCenterFunction ec;
    ec.delta_z = slices.delta_z;
    ec.truncated_tail = static_cast<int>(centers.size() - 1 - last);
    ec.raw_centers.resize(last + 1);
    std::size_t prev = 0;
    for (std::size_t n = 0; n <= last; ++n) {
        if (centers[n]) {
            ec.raw_centers[n] = *centers[n];
            prev = n;
            continue;
        }
        std::size_t next = n + 1;
        while (!centers[next]) ++next;
        const double w = static_cast<double>(n - prev) / static_cast<double>(next - prev);
        ec.raw_centers[n] = (1.0 - w) * *centers[prev] + w * *centers[next];
        ec.interpolated.push_back(static_cast<int>(n));
    }

    const Point2 origin = ec.raw_centers.front();
    ec.entries.reserve(ec.raw_centers.size());
    for (const auto& c : ec.raw_centers) ec.entries.push_back(c - origin);
    ec.entries.front() = {0.0, 0.0};
    return ec;
}

ShapeCenterFunction rotate_center_function(const ShapeCenterFunction& ec, double theta) {
    ShapeCenterFunction out = ec;
    for (auto& p : out.entries) p = rotate(p, theta);
    out.entries.front() = {0.0, 0.0};
    return out;
}

double similarity_objective(const ShapeCenterFunction& a, const ShapeCenterFunction& b, double theta) {
    const Terms t = accumulate(a, b);
    if (t.count == 0) throw ComputeError("degenerate shape function");
    return objective(t, theta);
}

ShapeSimilarity shape_similarity(const ShapeCenterFunction& a, const ShapeCenterFunction& b,
                                 const ShapeConfig& config) {
    config.validate();
    if (std::min(a.size(), b.size()) < 2) {
        throw std::invalid_argument("shape similarity needs at least two entries per function");
    }
    const Terms t = accumulate(a, b);
    if (t.count == 0) throw ComputeError("degenerate shape function");

    ShapeSimilarity best;
    best.value = -std::numeric_limits<double>::infinity();
    for (int k = 0; k < config.theta_samples; ++k) {
        const double theta = kTwoPi * static_cast<double>(k) / static_cast<double>(config.theta_samples);
        const double v = objective(t, theta);
        if (v > best.value) {
            best.value = v;
            best.best_theta = theta;
        }
    }
    best.value = std::clamp(best.value, -1.0, 1.0);
    return best;
}

SimilarityMatrix shape_similarity_matrix(const std::vector<Subject>& subjects, const ShapeConfig& config,
                                         std::vector<ShapeSimilarity>* details) {
    if (subjects.size() < 2) throw std::invalid_argument("shape similarity matrix needs at least two subjects");
    std::vector<std::string> ids;
    for (const auto& s : subjects) ids.push_back(s.id);
    SimilarityMatrix m(ids, MatrixKind::shape);
    for (std::size_t i = 0; i < subjects.size(); ++i) {
        for (std::size_t j = i + 1; j < subjects.size(); ++j) {
            ShapeSimilarity s = shape_similarity(subjects[i].ec, subjects[j].ec, config);
            s.subject_pair = {subjects[i].id, subjects[j].id};
            m.set(i, j, s.value);
            if (details) details->push_back(std::move(s));
        }
    }
    return m;
}

ShapeCenterFunction center_function_from_mesh(const mesh::TriangleMesh& mesh, const ShapeConfig& config) {
    config.validate();
    const auto cloud = mesh::triangle_centroids(mesh);
    const auto slices = mesh::slice_centroids(cloud, config.delta_z, config.z_origin);
    return shape_center_function(slices);
}

std::string to_csv(const ShapeCenterFunction& ec) {
    std::ostringstream os;
    os << "n,x_n,y_n\n";
    for (std::size_t n = 0; n < ec.entries.size(); ++n) {
        os << n << ',' << fmt(ec.entries[n].x) << ',' << fmt(ec.entries[n].y) << '\n';
    }
    return os.str();
}

void write_csv(const std::filesystem::path& path, const ShapeCenterFunction& ec) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot write center function CSV: " + path.string());
    out << to_csv(ec);
    if (!out) throw IoError("failed writing center function CSV: " + path.string());
}

nlohmann::json to_json(const ShapeCenterFunction& ec) {
    nlohmann::json entries = nlohmann::json::array();
    for (const auto& p : ec.entries) entries.push_back({p.x, p.y});
    nlohmann::json raw = nlohmann::json::array();
    for (const auto& p : ec.raw_centers) raw.push_back({p.x, p.y});
    return {{"delta_z", ec.delta_z},
            {"entries", std::move(entries)},
            {"raw_centers", std::move(raw)},
            {"interpolated", ec.interpolated},
            {"truncated_tail", ec.truncated_tail}};
}

ShapeCenterFunction center_function_from_json(const nlohmann::json& j) {
    try {
        ShapeCenterFunction ec;
        ec.delta_z = j.at("delta_z").get<double>();
        for (const auto& p : j.at("entries")) ec.entries.push_back({p.at(0).get<double>(), p.at(1).get<double>()});
        for (const auto& p : j.at("raw_centers")) {
            ec.raw_centers.push_back({p.at(0).get<double>(), p.at(1).get<double>()});
        }
        ec.interpolated = j.value("interpolated", std::vector<int>{});
        ec.truncated_tail = j.value("truncated_tail", 0);
        return ec;
    } catch (const nlohmann::json::exception& e) {
        throw ParseError(std::string("invalid center function JSON: ") + e.what());
    }
}

}  // namespace earcanal::shape
