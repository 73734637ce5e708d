#pragma once

#include <array>
#include <span>

#include <json.hpp>

#include "earcanal/error.hpp"
#include "earcanal/geometry.hpp"

namespace earcanal::ellipse {

/// Coefficients (A, B, C, D, E, F) of A x^2 + B xy + C y^2 + D x + E y + F = 0.
using Conic = std::array<double, 6>;

struct GeometricEllipse {
    Point2 center;
    double semi_major{0.0};
    double semi_minor{0.0};
    /// Angle of the major axis, radians in [0, pi).
    double rotation{0.0};
};

struct Ellipse {
    Point2 center;
    double semi_major{0.0};
    double semi_minor{0.0};
    double rotation{0.0};
    /// Scaled so that 4AC - B^2 = 1.
    Conic conic{};
};

/// Raised when a point set cannot produce an ellipse.
class FitError : public ComputeError {
public:
    using ComputeError::ComputeError;
};

/// Direct least-squares ellipse fit: minimizes the algebraic distance subject to
/// 4AC - B^2 = 1 using the partitioned 3x3 eigenproblem on normalized coordinates.
/// Throws FitError for fewer than 5 points, rank-deficient scatter (collinear or
/// coincident points), or when no eigenvector satisfies the ellipse constraint.
Ellipse fit_ellipse_direct(std::span<const Point2> points);

/// Center, semi-axes and major-axis angle of an elliptical conic.
/// Throws FitError when B^2 - 4AC >= 0 or the ellipse is imaginary.
GeometricEllipse conic_to_geometric(const Conic& conic);

/// Value of the conic polynomial at p.
double evaluate(const Conic& conic, const Point2& p);

/// Point on the ellipse at parameter t (radians along the parametric curve).
Point2 point_at(const GeometricEllipse& e, double t);

nlohmann::json to_json(const Ellipse& e);

}  // namespace earcanal::ellipse
