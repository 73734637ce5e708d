#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <numbers>
#include <random>

#include "earcanal/error.hpp"
#include "earcanal/mesh.hpp"
#include "earcanal/shape.hpp"
#include "earcanal/synth.hpp"

using namespace earcanal;
using namespace earcanal::shape;
using std::numbers::pi;

namespace {

ShapeCenterFunction from_entries(std::vector<Point2> entries) {
    ShapeCenterFunction ec;
    ec.entries = entries;
    ec.raw_centers = std::move(entries);
    return ec;
}

ShapeCenterFunction random_walk(std::uint64_t seed, int count) {
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> step(0.0, 0.05);
    std::vector<Point2> e{{0, 0}};
    for (int i = 1; i < count; ++i) e.push_back(e.back() + Point2{step(rng) + 0.01, step(rng)});
    return from_entries(e);
}

// Independent evaluation of the objective from polar angles.
double objective_oracle(const ShapeCenterFunction& a, const ShapeCenterFunction& b, double theta) {
    const std::size_t n = std::min(a.size(), b.size());
    double sum = 0.0;
    int used = 0;
    for (std::size_t k = 1; k < n; ++k) {
        const auto& p = a.entries[k];
        const auto& q = b.entries[k];
        if (norm(p) == 0.0 || norm(q) == 0.0) continue;
        sum += std::cos(std::atan2(p.y, p.x) + theta - std::atan2(q.y, q.x));
        ++used;
    }
    return sum / used;
}

double dense_max(const ShapeCenterFunction& a, const ShapeCenterFunction& b, int samples) {
    double best = -2.0;
    for (int i = 0; i < samples; ++i) best = std::max(best, objective_oracle(a, b, 2 * pi * i / samples));
    return best;
}

ShapeConfig at_entrance() {
    ShapeConfig c;
    c.z_origin = 0.0;
    return c;
}

synth::CanalGenerator tube() {
    synth::CanalGenerator g;
    g.radius_profile = {3.0};
    g.ellipticity = 0.15;
    g.section_angle = 0.3;
    return g;
}

// Depth of the centroids in slice n of a generated tube sliced from z = 0.
double centroid_depth(const synth::CanalGenerator& g, int n) {
    const double h = g.length / g.rings;
    const int band = n / 2;
    return band * h + (n % 2 ? 2.0 : 1.0) * h / 3.0;
}

}  // namespace

TEST_CASE("straight tube gives a zero center function") {
    auto g = tube();
    g.section_angle_rate = 0.2;  // twisting cross-sections do not move the center
    const auto ec = center_function_from_mesh(synth::generate_canal_mesh(g), at_entrance());
    CHECK(ec.size() == 100);
    CHECK(ec.interpolated.empty());
    for (const auto& p : ec.entries) CHECK(norm(p) < 1e-6);
    CHECK(ec.entries[0] == Point2{0, 0});
}

TEST_CASE("linear drift of the axis is traced") {
    auto g = tube();
    g.centerline.coeff_x = {0.0, 0.2};
    const auto ec = center_function_from_mesh(synth::generate_canal_mesh(g), at_entrance());
    for (std::size_t n = 0; n < ec.size(); ++n) {
        const double expect = 0.2 * (centroid_depth(g, static_cast<int>(n)) - centroid_depth(g, 0));
        CHECK(std::abs(ec.entries[n].x - expect) < 1e-6);
        CHECK(std::abs(ec.entries[n].y) < 1e-6);
    }
    // Within fit tolerance of the nominal slice spacing as well.
    CHECK(std::abs(ec.entries[50].x - 0.2 * 50 * 0.1) < 0.01);
}

TEST_CASE("helical canal follows the generating centerline") {
    auto g = tube();
    g.centerline.kind = synth::Centerline::Kind::helix;
    g.centerline.radius = 1.5;
    g.centerline.wavenumber = 0.6;
    g.centerline.phase = 0.4;
    const auto ec = center_function_from_mesh(synth::generate_canal_mesh(g), at_entrance());
    const Point2 c0 = g.centerline.at(centroid_depth(g, 0));
    double worst = 0.0;
    for (std::size_t n = 0; n < ec.size(); ++n) {
        const Point2 expect = g.centerline.at(centroid_depth(g, static_cast<int>(n))) - c0;
        worst = std::max(worst, norm(ec.entries[n] - expect));
    }
    CHECK(worst < 0.01);
}

TEST_CASE("unfittable slices: interior interpolation, tail truncation, entrance failure") {
    auto ring = [](Point2 c, int count) {
        mesh::SliceBin b;
        for (int i = 0; i < count; ++i) {
            const double t = 2 * pi * i / count;
            b.points.push_back(c + Point2{2 * std::cos(t), std::sin(t)});
        }
        return b;
    };
    mesh::SliceSet s;
    s.bins = {ring({0, 0}, 12), ring({1, 0}, 12), ring({0, 0}, 3), ring({3, 3}, 12), ring({0, 0}, 0), ring({0, 0}, 2)};
    for (int n = 0; n < 6; ++n) s.bins[n].n = n;

    const auto ec = shape_center_function(s);
    CHECK(ec.size() == 4);
    CHECK(ec.truncated_tail == 2);
    REQUIRE(ec.interpolated == std::vector<int>{2});
    CHECK(ec.entries[2].x == doctest::Approx(2.0));
    CHECK(ec.entries[2].y == doctest::Approx(1.5));
    CHECK(ec.entries[3].x == doctest::Approx(3.0));

    auto bad = s;
    bad.bins[0] = ring({0, 0}, 4);
    CHECK_THROWS_AS(shape_center_function(bad), ComputeError);

    mesh::SliceSet lonely;
    lonely.bins = {ring({0, 0}, 10), ring({0, 0}, 1)};
    CHECK_THROWS_AS(shape_center_function(lonely), ComputeError);
}

TEST_CASE("rotate_center_function") {
    const auto ec = from_entries({{0, 0}, {1, 0}, {0.5, -2}});
    CHECK(rotate_center_function(ec, 0.0).entries == ec.entries);
    const auto q = rotate_center_function(ec, pi / 2);
    CHECK(q.entries[1].x == doctest::Approx(0.0));
    CHECK(q.entries[1].y == doctest::Approx(1.0));
    CHECK(q.entries[0] == Point2{0, 0});
    const auto twice = rotate_center_function(rotate_center_function(ec, pi), pi);
    for (std::size_t n = 0; n < ec.size(); ++n) CHECK(norm(twice.entries[n] - ec.entries[n]) < 1e-12);
}

TEST_CASE("self-similarity is 1 at theta 0") {
    const auto a = random_walk(1, 100);
    const auto s = shape_similarity(a, a, {});
    CHECK(std::abs(s.value - 1.0) < 1e-12);
    CHECK(s.best_theta == 0.0);
}

TEST_CASE("a grid-aligned rotation is undone exactly") {
    const auto a = random_walk(2, 100);
    ShapeConfig cfg;
    for (int k : {1, 450, 1800, 2999, 3599}) {
        const double theta0 = 2 * pi * k / cfg.theta_samples;
        const auto s = shape_similarity(a, rotate_center_function(a, theta0), cfg);
        CHECK(std::abs(s.value - 1.0) < 1e-12);
        CHECK(s.best_theta == doctest::Approx(theta0).epsilon(1e-12));
    }
}

TEST_CASE("grid search agrees with a 10x dense scan") {
    for (std::uint64_t seed = 10; seed < 20; ++seed) {
        const auto a = random_walk(seed, 100);
        const auto b = random_walk(seed + 100, 100);
        ShapeConfig cfg;
        const auto s = shape_similarity(a, b, cfg);
        CHECK(std::abs(s.value - dense_max(a, b, 10 * cfg.theta_samples)) < 1e-3);
        CHECK(s.value == doctest::Approx(objective_oracle(a, b, s.best_theta)).epsilon(1e-12));
        CHECK(s.value == doctest::Approx(similarity_objective(a, b, s.best_theta)).epsilon(1e-12));
        // value dominates every grid sample
        for (int i = 0; i < cfg.theta_samples; i += 37) {
            CHECK(similarity_objective(a, b, 2 * pi * i / cfg.theta_samples) <= s.value + 1e-15);
        }
    }
}

TEST_CASE("similarity properties: symmetry, bounds, scale and rotation invariance") {
    const auto a = random_walk(31, 80);
    const auto b = random_walk(32, 80);
    ShapeConfig cfg;
    const auto ab = shape_similarity(a, b, cfg);
    const auto ba = shape_similarity(b, a, cfg);
    CHECK(ab.value == doctest::Approx(ba.value).epsilon(1e-9));
    CHECK(ab.value <= 1.0);
    CHECK(ab.value >= -1.0);
    CHECK(ab.best_theta >= 0.0);
    CHECK(ab.best_theta < 2 * pi);

    auto scaled = b;
    for (auto& p : scaled.entries) p = 3.7 * p;
    CHECK(shape_similarity(a, scaled, cfg).value == doctest::Approx(ab.value).epsilon(1e-12));

    const double alpha = 2 * pi * 123 / cfg.theta_samples;
    CHECK(shape_similarity(a, rotate_center_function(b, alpha), cfg).value ==
          doctest::Approx(ab.value).epsilon(1e-12));
    // Off-grid rotation: within the dense-scan tolerance.
    CHECK(std::abs(shape_similarity(a, rotate_center_function(b, 0.123456), cfg).value - ab.value) < 1e-3);
}

TEST_CASE("unequal lengths are truncated to the shorter function") {
    const auto a = random_walk(40, 120);
    auto b = random_walk(41, 60);
    auto a_short = a;
    a_short.entries.resize(60);
    CHECK(shape_similarity(a, b, {}).value == doctest::Approx(shape_similarity(a_short, b, {}).value).epsilon(1e-14));
}

TEST_CASE("zero entries are skipped; all-zero is degenerate") {
    auto a = from_entries({{0, 0}, {1, 0}, {0, 0}, {0, 1}});
    auto b = from_entries({{0, 0}, {1, 0}, {5, 5}, {0, 1}});
    CHECK(similarity_objective(a, b, 0.0) == doctest::Approx(1.0));
    const auto zero = from_entries({{0, 0}, {0, 0}, {0, 0}});
    CHECK_THROWS_WITH_AS(shape_similarity(zero, b, {}), "degenerate shape function", ComputeError);
    CHECK_THROWS_AS(shape_similarity(from_entries({{0, 0}}), b, {}), std::invalid_argument);
}

TEST_CASE("config validation") {
    ShapeConfig c;
    c.theta_samples = 3;
    CHECK_THROWS_AS(c.validate(), std::invalid_argument);
    c = {};
    c.delta_z = 0.0;
    CHECK_THROWS_AS(c.validate(), std::invalid_argument);
}

TEST_CASE("matrix: identical pair and shared-generator pair") {
    const auto a = random_walk(50, 60);
    std::vector<Subject> two{{"A", a}, {"B", a}};
    const auto m2 = shape_similarity_matrix(two, {});
    CHECK(m2.value(0, 1) == doctest::Approx(1.0).epsilon(1e-12));
    CHECK_FALSE(m2.has(0, 0));

    // Subjects 1 and 2 are small perturbations of one walk.
    auto base = random_walk(60, 60);
    auto near = base;
    std::mt19937_64 rng(61);
    std::normal_distribution<double> nz(0.0, 0.005);
    for (std::size_t i = 1; i < near.size(); ++i) near.entries[i] = near.entries[i] + Point2{nz(rng), nz(rng)};
    std::vector<Subject> four{{"S0", random_walk(70, 60)}, {"S1", base}, {"S2", near}, {"S3", random_walk(71, 60)}};
    std::vector<ShapeSimilarity> details;
    const auto m = shape_similarity_matrix(four, {}, &details);
    CHECK(details.size() == 6);
    for (std::size_t i = 0; i < 4; ++i) {
        for (std::size_t j = i + 1; j < 4; ++j) {
            CHECK(m.value(i, j) == m.value(j, i));
            if (!(i == 1 && j == 2)) CHECK(m.value(1, 2) > m.value(i, j));
        }
    }
    CHECK_THROWS_AS(shape_similarity_matrix({{"A", a}}, {}), std::invalid_argument);
}

TEST_CASE("grid doubling changes the synthetic corpus by less than 1e-4") {
    const auto family = synth::make_subject_family(7, 0.02);
    std::vector<Subject> subjects;
    for (const auto& s : family) {
        subjects.push_back({s.id, center_function_from_mesh(synth::generate_canal_mesh(s.canal), at_entrance())});
    }
    ShapeConfig fine = at_entrance();
    fine.theta_samples *= 2;
    const auto coarse_m = shape_similarity_matrix(subjects, at_entrance());
    const auto fine_m = shape_similarity_matrix(subjects, fine);
    for (std::size_t i = 0; i < subjects.size(); ++i)
        for (std::size_t j = i + 1; j < subjects.size(); ++j)
            CHECK(std::abs(coarse_m.value(i, j) - fine_m.value(i, j)) < 1e-4);
}

TEST_CASE("center function CSV and JSON") {
    auto ec = random_walk(80, 5);
    ec.interpolated = {2};
    const auto csv = to_csv(ec);
    CHECK(csv.rfind("n,x_n,y_n\n0,0.000000000,0.000000000\n", 0) == 0);
    const auto back = center_function_from_json(nlohmann::json::parse(to_json(ec).dump()));
    CHECK(back.entries == ec.entries);
    CHECK(back.raw_centers == ec.raw_centers);
    CHECK(back.interpolated == ec.interpolated);
    CHECK(back.delta_z == ec.delta_z);
}
