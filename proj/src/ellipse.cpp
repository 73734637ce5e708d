#include "earcanal/ellipse.hpp"

#include <cmath>
#include <limits>
#include <numbers>

#include <Eigen/Dense>

namespace earcanal::ellipse {
namespace {

constexpr double kRankTolerance = 1e-10;

double wrap_half_turn(double angle) {
    double r = std::fmod(angle, std::numbers::pi);
    if (r < 0.0) r += std::numbers::pi;
    if (r >= std::numbers::pi) r = 0.0;
    return r;
}

// Conic in normalized coordinates u = (x - mx)/s, v = (y - my)/s, rewritten in x and y.
Conic denormalize(const Conic& q, double mx, double my, double s) {
    const auto [a, b, c, d, e, f] = q;
    const double s2 = s * s;
    Conic out{};
    out[0] = a / s2;
    out[1] = b / s2;
    out[2] = c / s2;
    out[3] = (-2.0 * a * mx - b * my) / s2 + d / s;
    out[4] = (-2.0 * c * my - b * mx) / s2 + e / s;
    out[5] = (a * mx * mx + b * mx * my + c * my * my) / s2 - (d * mx + e * my) / s + f;
    return out;
}

Conic unit_constraint(Conic q) {
    const double k = 4.0 * q[0] * q[2] - q[1] * q[1];
    const double scale = 1.0 / std::sqrt(k);
    for (auto& v : q) v *= scale;
    return q;
}

}  // namespace

double evaluate(const Conic& q, const Point2& p) {
    return q[0] * p.x * p.x + q[1] * p.x * p.y + q[2] * p.y * p.y + q[3] * p.x + q[4] * p.y + q[5];
}

Point2 point_at(const GeometricEllipse& e, double t) {
    return e.center + rotate({e.semi_major * std::cos(t), e.semi_minor * std::sin(t)}, e.rotation);
}

GeometricEllipse conic_to_geometric(const Conic& conic) {
    auto [a, b, c, d, e, f] = conic;
    const double det = 4.0 * a * c - b * b;
    if (!(det > 0.0)) throw FitError("conic is not an ellipse (B^2 - 4AC >= 0)");
    if (a < 0.0) {
        a = -a, b = -b, c = -c, d = -d, e = -e, f = -f;
    }

    GeometricEllipse g;
    g.center.x = (b * e - 2.0 * c * d) / det;
    g.center.y = (b * d - 2.0 * a * e) / det;
    const double f0 = f + 0.5 * (d * g.center.x + e * g.center.y);

    const double mean = 0.5 * (a + c);
    const double radius = std::hypot(0.5 * (a - c), 0.5 * b);
    const double lambda_small = mean - radius;
    const double lambda_large = mean + radius;
    if (!(lambda_small > 0.0) || !(f0 < 0.0)) throw FitError("conic describes an imaginary ellipse");

    g.semi_major = std::sqrt(-f0 / lambda_small);
    g.semi_minor = std::sqrt(-f0 / lambda_large);
    g.rotation = radius == 0.0 ? 0.0 : wrap_half_turn(0.5 * std::atan2(-b, c - a));
    return g;
}

Ellipse fit_ellipse_direct(std::span<const Point2> points) {
    const auto n = static_cast<Eigen::Index>(points.size());
    if (n < 5) {
        throw FitError("insufficient points: ellipse fit needs at least 5, got " +
                       std::to_string(points.size()));
    }

    double mx = 0.0, my = 0.0;
    for (const auto& p : points) {
        mx += p.x;
        my += p.y;
    }
    mx /= static_cast<double>(n);
    my /= static_cast<double>(n);
    double ms = 0.0;
    for (const auto& p : points) ms += (p.x - mx) * (p.x - mx) + (p.y - my) * (p.y - my);
    const double scale = std::sqrt(ms / static_cast<double>(n));
    if (!(scale > 0.0) || !std::isfinite(scale)) throw FitError("rank-deficient scatter: coincident points");

    Eigen::MatrixXd quad(n, 3), lin(n, 3);
    for (Eigen::Index i = 0; i < n; ++i) {
        const double u = (points[static_cast<std::size_t>(i)].x - mx) / scale;
        const double v = (points[static_cast<std::size_t>(i)].y - my) / scale;
        quad.row(i) << u * u, u * v, v * v;
        lin.row(i) << u, v, 1.0;
    }

    Eigen::MatrixXd design(n, 6);
    design << quad, lin;
    const Eigen::JacobiSVD<Eigen::MatrixXd> svd(design);
    const auto& sv = svd.singularValues();
    if (sv(4) <= kRankTolerance * sv(0)) {
        throw FitError("rank-deficient scatter: points are collinear or coincident");
    }

    const Eigen::Matrix3d s1 = quad.transpose() * quad;
    const Eigen::Matrix3d s2 = quad.transpose() * lin;
    const Eigen::Matrix3d s3 = lin.transpose() * lin;
    const Eigen::FullPivLU<Eigen::Matrix3d> s3_lu(s3);
    if (!s3_lu.isInvertible()) throw FitError("rank-deficient scatter: points are collinear");
    const Eigen::Matrix3d t = -s3_lu.solve(s2.transpose());
    const Eigen::Matrix3d reduced = s1 + s2 * t;

    // Premultiply by the inverse of the 3x3 constraint block [[0,0,2],[0,-1,0],[2,0,0]].
    Eigen::Matrix3d m;
    m.row(0) = reduced.row(2) / 2.0;
    m.row(1) = -reduced.row(1);
    m.row(2) = reduced.row(0) / 2.0;

    const Eigen::EigenSolver<Eigen::Matrix3d> eig(m);
    if (eig.info() != Eigen::Success) throw FitError("ellipse eigen-solve did not converge");

    int best = -1;
    double best_lambda = std::numeric_limits<double>::infinity();
    Eigen::Vector3d a1 = Eigen::Vector3d::Zero();
    for (int k = 0; k < 3; ++k) {
        const Eigen::Vector3d v = eig.eigenvectors().col(k).real();
        const double constraint = 4.0 * v(0) * v(2) - v(1) * v(1);
        const double lambda = std::abs(eig.eigenvalues()(k));
        if (constraint > 0.0 && lambda < best_lambda) {
            best = k;
            best_lambda = lambda;
            a1 = v;
        }
    }
    if (best < 0) throw FitError("no eigenvector satisfies the ellipse constraint");
    const Eigen::Vector3d a2 = t * a1;

    const Conic normalized{a1(0), a1(1), a1(2), a2(0), a2(1), a2(2)};
    const GeometricEllipse g = conic_to_geometric(normalized);

    Ellipse out;
    out.center = {mx + scale * g.center.x, my + scale * g.center.y};
    out.semi_major = scale * g.semi_major;
    out.semi_minor = scale * g.semi_minor;
    out.rotation = g.rotation;
    out.conic = unit_constraint(denormalize(normalized, mx, my, scale));
    return out;
}

nlohmann::json to_json(const Ellipse& e) {
    return {{"center", {e.center.x, e.center.y}},
            {"semi_axes", {e.semi_major, e.semi_minor}},
            {"rotation", e.rotation},
            {"conic", e.conic}};
}

}  // namespace earcanal::ellipse
