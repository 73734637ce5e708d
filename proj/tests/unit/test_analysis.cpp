#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <random>
#include <sstream>

#include <Eigen/Dense>

#include "earcanal/analysis.hpp"
#include "earcanal/error.hpp"
#include "earcanal/similarity_matrix.hpp"
#include "support.hpp"

using namespace earcanal;
using namespace earcanal::analysis;

namespace {

const std::filesystem::path kData = EARCANAL_DATA_DIR;

SimilarityMatrix constant(double c, std::size_t m, MatrixKind kind = MatrixKind::shape) {
    std::vector<std::string> ids;
    for (std::size_t i = 0; i < m; ++i) ids.push_back("S" + std::to_string(i));
    SimilarityMatrix s(ids, kind);
    for (std::size_t i = 0; i < m; ++i)
        for (std::size_t j = i + 1; j < m; ++j) s.set(i, j, c);
    return s;
}

std::string slurp(const std::filesystem::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::ostringstream os;
    os << in.rdbuf();
    return os.str();
}

std::vector<SimilarityPair> points(const std::vector<std::pair<double, double>>& xy) {
    std::vector<SimilarityPair> out;
    for (auto [x, y] : xy) out.push_back({x, y, ""});
    return out;
}

}  // namespace

TEST_CASE("published fixtures parse") {
    const auto shape = read_csv(kData / "table1_shape.csv");
    const auto acoustic = read_csv(kData / "table2_acoustic.csv");
    CHECK(shape.subject_ids() == std::vector<std::string>{"TwinsA", "TwinsB", "UserC", "UserD"});
    CHECK(shape.kind() == MatrixKind::shape);
    CHECK(acoustic.kind() == MatrixKind::acoustic);
    CHECK(shape.value(0, 1) == 0.947);
    CHECK(acoustic.value(1, 2) == 0.478);
    CHECK(acoustic.stddev(1, 2) == 0.003);
}

TEST_CASE("matrix statistics of the fixtures") {
    const auto s = matrix_statistics(read_csv(kData / "table1_shape.csv"));
    CHECK(std::abs(s.overall_mean - 0.851) <= 0.001);
    CHECK(s.designated_pair_value == 0.947);
    CHECK(std::abs(s.percent_excess - 11.2) <= 0.2);

    const auto a = matrix_statistics(read_csv(kData / "table2_acoustic.csv"));
    CHECK(std::abs(a.overall_mean - 0.399) <= 0.001);
    CHECK(a.designated_pair_value == 0.514);
    CHECK(std::abs(a.percent_excess - 28.8) <= 0.3);

    const auto c = matrix_statistics(constant(0.6, 4));
    CHECK(c.overall_mean == doctest::Approx(0.6));
    CHECK(c.percent_excess == doctest::Approx(0.0));

    SimilarityMatrix partial({"A", "B", "C"}, MatrixKind::shape);
    partial.set(0, 1, 0.5);
    CHECK_THROWS_AS(matrix_statistics(partial), std::invalid_argument);
}

TEST_CASE("matrix statistics mean lies within the cell range") {
    std::mt19937_64 rng(1);
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    for (int trial = 0; trial < 20; ++trial) {
        auto m = constant(0.0, 5);
        double lo = 2, hi = -2;
        for (std::size_t i = 0; i < 5; ++i)
            for (std::size_t j = i + 1; j < 5; ++j) {
                const double v = u(rng);
                m.set(i, j, v);
                lo = std::min(lo, v);
                hi = std::max(hi, v);
            }
        const auto s = matrix_statistics(m);
        CHECK(s.overall_mean >= lo);
        CHECK(s.overall_mean <= hi);
    }
}

TEST_CASE("shape-acoustic pairs for TwinsA") {
    const auto pairs =
        shape_acoustic_pairs(read_csv(kData / "table1_shape.csv"), read_csv(kData / "table2_acoustic.csv"), 0);
    REQUIRE(pairs.size() == 3);
    CHECK(pairs[0].shape == 0.947);
    CHECK(pairs[0].acoustic == 0.514);
    CHECK(pairs[1].shape == 0.870);
    CHECK(pairs[1].acoustic == 0.402);
    CHECK(pairs[2].shape == 0.871);
    CHECK(pairs[2].acoustic == 0.343);
    CHECK(pairs[2].other_id == "UserD");

    CHECK_THROWS_AS(shape_acoustic_pairs(constant(0.5, 2), constant(0.5, 2), 0), std::invalid_argument);
    const auto same = shape_acoustic_pairs(constant(0.3, 4), constant(0.3, 4), 2);
    for (const auto& p : same) {
        CHECK(p.shape == 0.3);
        CHECK(p.acoustic == 0.3);
    }
    SimilarityMatrix other({"X", "Y", "Z"}, MatrixKind::acoustic);
    CHECK_THROWS_AS(shape_acoustic_pairs(constant(0.3, 3), other, 0), std::invalid_argument);
}

TEST_CASE("regression on an exact line") {
    const auto r = linear_regression(points({{0, 1}, {1, 3}, {2, 5}, {-1, -1}}));
    CHECK(r.r == doctest::Approx(1.0));
    CHECK(r.r_squared == doctest::Approx(1.0));
    CHECK(r.slope == doctest::Approx(2.0));
    CHECK(r.intercept == doctest::Approx(1.0));
    CHECK_FALSE(r.degenerate);
}

TEST_CASE("regression matches a normal-equations oracle") {
    std::mt19937_64 rng(77);
    std::normal_distribution<double> g(0.0, 1.0);
    for (int trial = 0; trial < 20; ++trial) {
        std::vector<std::pair<double, double>> xy;
        for (int i = 0; i < 20; ++i) {
            const double x = g(rng);
            xy.push_back({x, 0.7 * x + 0.3 + g(rng)});
        }
        const auto r = linear_regression(points(xy));

        Eigen::MatrixXd X(20, 2);
        Eigen::VectorXd y(20);
        for (int i = 0; i < 20; ++i) {
            X(i, 0) = 1.0;
            X(i, 1) = xy[i].first;
            y(i) = xy[i].second;
        }
        const Eigen::Vector2d beta = (X.transpose() * X).ldlt().solve(X.transpose() * y);
        const Eigen::VectorXd resid = y - X * beta;
        const double ss_tot = (y.array() - y.mean()).square().sum();
        const double r2 = 1.0 - resid.squaredNorm() / ss_tot;
        const Eigen::ArrayXd dx = X.col(1).array() - X.col(1).mean();
        const Eigen::ArrayXd dy = y.array() - y.mean();
        const double pearson = (dx * dy).sum() / std::sqrt(dx.square().sum() * dy.square().sum());

        CHECK(std::abs(r.slope - beta(1)) < 1e-12);
        CHECK(std::abs(r.intercept - beta(0)) < 1e-12);
        CHECK(std::abs(r.r_squared - r2) < 1e-12);
        CHECK(std::abs(r.r - pearson) < 1e-12);
        CHECK(std::abs(r.r_squared - r.r * r.r) < 1e-12);
    }
}

TEST_CASE("regression invariances") {
    std::mt19937_64 rng(4);
    std::normal_distribution<double> g(0.0, 1.0);
    std::vector<std::pair<double, double>> xy;
    for (int i = 0; i < 12; ++i) xy.push_back({g(rng), g(rng)});
    const auto base = linear_regression(points(xy));

    auto affine = xy;
    for (auto& p : affine) p.second = 2.5 * p.second - 4.0;
    const auto t = linear_regression(points(affine));
    CHECK(t.r == doctest::Approx(base.r).epsilon(1e-12));
    CHECK(t.slope == doctest::Approx(2.5 * base.slope).epsilon(1e-12));
    CHECK(t.intercept == doctest::Approx(2.5 * base.intercept - 4.0).epsilon(1e-12));

    auto shuffled = xy;
    std::shuffle(shuffled.begin(), shuffled.end(), rng);
    const auto s = linear_regression(points(shuffled));
    CHECK(s.r == doctest::Approx(base.r).epsilon(1e-12));
    CHECK(s.slope == doctest::Approx(base.slope).epsilon(1e-12));
    CHECK(s.r_squared == doctest::Approx(base.r_squared).epsilon(1e-12));
}

TEST_CASE("degenerate regressions") {
    const auto flat_y = linear_regression(points({{0, 2}, {1, 2}, {3, 2}}));
    CHECK(flat_y.degenerate);
    CHECK(flat_y.r == 0.0);
    CHECK(flat_y.r_squared == 0.0);
    CHECK_THROWS_AS(linear_regression(points({{1, 0}, {1, 2}})), ComputeError);
    CHECK_THROWS_AS(linear_regression(points({{1, 0}})), std::invalid_argument);

    const auto all = regress_all(constant(0.4, 4), constant(0.2, 4, MatrixKind::acoustic));
    REQUIRE(all.size() == 4);
    for (const auto& r : all) {
        CHECK(r.degenerate);
        CHECK(r.r == 0.0);
        CHECK(r.slope == 0.0);
        CHECK(r.intercept == doctest::Approx(0.2));
    }
}

TEST_CASE("regression over the fixtures: r > 0.7 and R^2 > 0.5 for every subject") {
    const auto results = regress_all(read_csv(kData / "table1_shape.csv"), read_csv(kData / "table2_acoustic.csv"));
    REQUIRE(results.size() == 4);
    for (const auto& r : results) {
        CHECK_MESSAGE(r.r > 0.7, r.subject_id);
        CHECK_MESSAGE(r.r_squared > 0.5, r.subject_id);
        CHECK(r.slope > 0.0);
    }
}

TEST_CASE("matrix CSV layout") {
    SimilarityMatrix a({"A", "B", "C"}, MatrixKind::acoustic);
    a.set(0, 1, 0.5, 0.01);
    a.set(0, 2, -0.25, 0.0);
    a.set(1, 2, 1.0, 0.125);
    const auto text = to_csv(a);
    CHECK(text == ",A,B,C\nA,,0.500000±0.010000,-0.250000±0.000000\nB,0.500000±0.010000,,1.000000±0.125000\n"
                  "C,-0.250000±0.000000,1.000000±0.125000,\n");
    const auto back = parse_csv(text);
    CHECK(back.value(1, 2) == 1.0);
    CHECK(back.stddev(1, 2) == 0.125);
    CHECK(to_csv(back) == text);

    CHECK(parse_csv(",A,B\nA,-,0.5+-0.1\nB,0.5+-0.1,-\n").stddev(0, 1) == 0.1);
    CHECK_THROWS_AS(parse_csv(",A,B\nA,,0.5\nB,0.4,\n"), ParseError);
    CHECK_THROWS_AS(parse_csv(",A,B\nA,,0.5\n"), ParseError);
    CHECK_THROWS_AS(parse_csv(",A,B\nA,,0.5\nC,0.5,\n"), ParseError);
    CHECK_THROWS_AS(parse_csv(",A,B\nA,,x\nB,x,\n"), ParseError);
    CHECK_THROWS_AS(parse_csv(",A,B\nA,1,0.5\nB,0.5,\n"), ParseError);
    CHECK_THROWS_AS(a.set(0, 0, 0.5), std::invalid_argument);
    CHECK_THROWS_AS(a.set(0, 1, 1.5), std::invalid_argument);
}

TEST_CASE("report bundle: files, schema and determinism") {
    testing::TempDir dir("report");
    ReportInputs in;
    in.shape = read_csv(kData / "table1_shape.csv");
    in.acoustic = read_csv(kData / "table2_acoustic.csv");
    in.regressions = regress_all(in.shape, in.acoustic);
    in.config = {{"origin", "fixtures"}};

    const auto out = dir / "nested" / "report";
    const auto written = emit_report(in, out);
    CHECK(written.size() == 12);
    for (const auto& p : written) CHECK(std::filesystem::exists(p));

    const auto summary = nlohmann::json::parse(slurp(out / "summary.json"));
    CHECK(summary.at("schema") == kReportSchema);
    CHECK(summary.at("regressions").size() == 4);
    CHECK(summary.at("config").at("origin") == "fixtures");
    CHECK(summary.at("shape_statistics").at("overall_mean").get<double>() == doctest::Approx(0.8516667));

    std::istringstream rows(slurp(out / "summary.csv"));
    std::string line;
    int count = -1;
    while (std::getline(rows, line)) ++count;
    CHECK(count == 4);

    const auto svg = slurp(out / "regression" / "TwinsA.svg");
    CHECK(svg.rfind("<svg", 0) == 0);
    CHECK(svg.find("<circle") != std::string::npos);

    const auto again = dir / "again";
    emit_report(in, again);
    for (const char* name : {"summary.json", "summary.csv", "shape_matrix.csv", "acoustic_matrix.csv"}) {
        CHECK(slurp(out / name) == slurp(again / name));
    }
    CHECK(slurp(out / "regression" / "UserC.json") == slurp(again / "regression" / "UserC.json"));
}

TEST_CASE("report into an unwritable location") {
    testing::TempDir dir("report_bad");
    std::ofstream(dir / "file") << "x";
    ReportInputs in;
    in.shape = constant(0.5, 3);
    in.acoustic = constant(0.5, 3, MatrixKind::acoustic);
    CHECK_THROWS_AS(emit_report(in, dir / "file" / "sub"), IoError);
}
