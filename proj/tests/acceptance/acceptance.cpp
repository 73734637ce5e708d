// Acceptance run: one PASS/FAIL line per criterion, nonzero exit if any fails.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <functional>
#include <iostream>
#include <map>
#include <numbers>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "../unit/support.hpp"
#include "earcanal/acoustics.hpp"
#include "earcanal/analysis.hpp"
#include "earcanal/cli/commands.hpp"
#include "earcanal/ellipse.hpp"
#include "earcanal/fft.hpp"
#include "earcanal/mls.hpp"
#include "earcanal/shape.hpp"
#include "earcanal/similarity_matrix.hpp"
#include "earcanal/synth.hpp"

using namespace earcanal;
namespace fs = std::filesystem;

namespace {

const fs::path kData = EARCANAL_DATA_DIR;
constexpr double kTwoPi = 2.0 * std::numbers::pi;

struct Outcome {
    bool ok{true};
    std::string detail;

    void require(bool cond, const std::string& what) {
        if (!cond && ok) detail = what;
        ok = ok && cond;
    }
};

std::string fmt(const char* f, double v) {
    char buf[64];
    std::snprintf(buf, sizeof buf, f, v);
    return buf;
}

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::ostringstream os;
    os << in.rdbuf();
    return os.str();
}

int cli(std::vector<std::string> args) {
    args.insert(args.begin(), "earcanal");
    std::vector<const char*> argv;
    for (const auto& a : args) argv.push_back(a.c_str());
    std::ostringstream out, err;
    const int code = cli::run_cli(static_cast<int>(argv.size()), argv.data(), out, err);
    if (code != 0) std::cerr << err.str();
    return code;
}

// synth -> shape -> acoustic -> correlate with default settings.
bool run_chain(const fs::path& root) {
    const auto corpus = root / "corpus";
    const auto cfg = (corpus / "config.json").string();
    const auto manifest = (corpus / "manifest.json").string();
    return cli({"synth", "--out", corpus.string()}) == 0 &&
           cli({"shape", "--config", cfg, "--manifest", manifest, "--out", (root / "shape").string()}) == 0 &&
           cli({"acoustic", "--config", cfg, "--manifest", manifest, "--out", (root / "acoustic").string()}) == 0 &&
           cli({"correlate", "--config", cfg, "--shape-csv", (root / "shape" / "shape_matrix.csv").string(),
                "--acoustic-csv", (root / "acoustic" / "acoustic_matrix.csv").string(), "--out",
                (root / "report").string()}) == 0;
}

bool twins_maximal(const SimilarityMatrix& m) {
    for (std::size_t i = 0; i < m.size(); ++i)
        for (std::size_t j = i + 1; j < m.size(); ++j)
            if (!(i == 0 && j == 1) && m.value(i, j) >= m.value(0, 1)) return false;
    return true;
}

Outcome table_statistics() {
    Outcome o;
    const auto s = analysis::matrix_statistics(read_csv(kData / "table1_shape.csv"));
    const auto a = analysis::matrix_statistics(read_csv(kData / "table2_acoustic.csv"));
    o.require(std::abs(s.overall_mean - 0.851) <= 0.001, "shape mean " + fmt("%.6f", s.overall_mean));
    o.require(std::abs(s.percent_excess - 11.2) <= 0.2, "shape excess " + fmt("%.4f", s.percent_excess));
    o.require(std::abs(a.overall_mean - 0.399) <= 0.001, "acoustic mean " + fmt("%.6f", a.overall_mean));
    o.require(std::abs(a.percent_excess - 28.8) <= 0.3, "acoustic excess " + fmt("%.4f", a.percent_excess));
    if (o.ok) {
        o.detail = "shape " + fmt("%.4f", s.overall_mean) + " / " + fmt("%.2f%%", s.percent_excess) + ", acoustic " +
                   fmt("%.4f", a.overall_mean) + " / " + fmt("%.2f%%", a.percent_excess);
    }
    return o;
}

Outcome regression() {
    Outcome o;
    const auto results =
        analysis::regress_all(read_csv(kData / "table1_shape.csv"), read_csv(kData / "table2_acoustic.csv"));
    o.require(results.size() == 4, "expected four subjects");
    double min_r = 1.0, min_r2 = 1.0;
    for (const auto& r : results) {
        o.require(r.r > 0.7 && r.r_squared > 0.5, r.subject_id + " r " + fmt("%.4f", r.r));
        min_r = std::min(min_r, r.r);
        min_r2 = std::min(min_r2, r.r_squared);
    }
    if (o.ok) o.detail = "min r " + fmt("%.4f", min_r) + ", min R^2 " + fmt("%.4f", min_r2);
    return o;
}

Outcome ellipse_exactness() {
    Outcome o;
    std::mt19937_64 rng(3);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    double worst_center = 0.0, worst_axis = 0.0;
    for (int trial = 0; trial < 100; ++trial) {
        ellipse::GeometricEllipse e;
        e.semi_major = 0.5 + 10.0 * u(rng);
        const double ecc = 0.97 * u(rng);
        e.semi_minor = e.semi_major * std::sqrt(1.0 - ecc * ecc);
        e.center = {20.0 * u(rng) - 10.0, 20.0 * u(rng) - 10.0};
        e.rotation = std::numbers::pi * u(rng);
        std::vector<Point2> pts;
        const int n = 8 + static_cast<int>(40 * u(rng));
        for (int k = 0; k < n; ++k) pts.push_back(ellipse::point_at(e, kTwoPi * u(rng)));
        const auto fit = ellipse::fit_ellipse_direct(pts);
        const double dc = std::hypot(fit.center.x - e.center.x, fit.center.y - e.center.y) / e.semi_major;
        const double da = std::max(std::abs(fit.semi_major - e.semi_major) / e.semi_major,
                                    std::abs(fit.semi_minor - e.semi_minor) / e.semi_minor);
        worst_center = std::max(worst_center, dc);
        worst_axis = std::max(worst_axis, da);
    }
    o.require(worst_center < 1e-6, "center error " + fmt("%.3g", worst_center));
    o.require(worst_axis < 1e-6, "axis error " + fmt("%.3g", worst_axis));
    if (o.ok) o.detail = "worst center " + fmt("%.2g", worst_center) + ", axis " + fmt("%.2g", worst_axis);
    return o;
}

double rms_error(const std::vector<double>& got, const std::vector<double>& want) {
    double e = 0.0;
    for (std::size_t i = 0; i < got.size(); ++i) {
        const double w = i < want.size() ? want[i] : 0.0;
        e += (got[i] - w) * (got[i] - w);
    }
    return std::sqrt(e / static_cast<double>(got.size()));
}

Outcome mls_round_trip() {
    Outcome o;
    std::mt19937_64 rng(4);
    std::normal_distribution<double> g(0.0, 1.0);
    std::uniform_int_distribution<int> taps(1, 256);
    auto random_plant = [&]() {
        acoustics::ImpulseResponse p;
        const int n = taps(rng);
        for (int i = 0; i < n; ++i) p.samples.push_back(g(rng) * std::exp(-4.0 * i / n));
        return p;
    };
    double worst = 0.0;
    for (int m = 8; m <= 16; ++m) {
        const auto s = acoustics::generate_mls(m);
        for (int k = 0; k < 50; ++k) {
            const auto plant = random_plant();
            const auto rec = acoustics::simulate_measurement(s, plant, 1, 0.0, 0);
            worst = std::max(worst, rms_error(acoustics::recover_impulse_response(rec, s, 1).samples, plant.samples));
        }
    }
    o.require(worst < 1e-9, "noise-free RMS " + fmt("%.3g", worst));

    const auto s = acoustics::generate_mls(12);
    const auto plant = random_plant();
    double e1 = 0.0, e5 = 0.0;
    for (std::uint64_t seed = 0; seed < 50; ++seed) {
        e1 += rms_error(
            acoustics::recover_impulse_response(acoustics::simulate_measurement(s, plant, 1, 0.5, seed), s, 1).samples,
            plant.samples);
        e5 += rms_error(acoustics::recover_impulse_response(
                            acoustics::simulate_measurement(s, plant, 5, 0.5, seed + 1000), s, 5)
                            .samples,
                        plant.samples);
    }
    const double ratio = e5 / e1;
    o.require(ratio > 0.35 && ratio < 0.55, "averaging ratio " + fmt("%.4f", ratio));
    if (o.ok) o.detail = "worst RMS " + fmt("%.2g", worst) + ", 5-average ratio " + fmt("%.4f", ratio);
    return o;
}

acoustics::ImpulseResponse raw(std::vector<double> x) {
    acoustics::ImpulseResponse ir;
    ir.samples = std::move(x);
    ir.stage = acoustics::Stage::trimmed;
    return ir;
}

Outcome minimum_phase_contract() {
    Outcome o;
    std::mt19937_64 rng(5);
    std::normal_distribution<double> g(0.0, 1.0);
    std::uniform_int_distribution<int> len(16, 2048);
    std::uniform_real_distribution<double> decay(1.0, 12.0);
    double worst_gap = 0.0, worst_prefix = 0.0;
    for (int trial = 0; trial < 100; ++trial) {
        const int n = len(rng);
        const double k = decay(rng);
        std::vector<double> x;
        for (int i = 0; i < n; ++i) x.push_back(g(rng) * std::exp(-k * i / n));
        const auto y = acoustics::minimum_phase(raw(x)).samples;
        if (y.size() != x.size()) {
            o.require(false, "length changed");
            break;
        }
        const std::size_t nfft = fft::next_power_of_two(8 * x.size());
        const auto X = fft::rfft(x, nfft);
        const auto Y = fft::rfft(y, nfft);
        double peak = 0.0, gap = 0.0;
        for (std::size_t b = 0; b < X.size(); ++b) {
            peak = std::max(peak, std::abs(X[b]));
            gap = std::max(gap, std::abs(std::abs(X[b]) - std::abs(Y[b])));
        }
        worst_gap = std::max(worst_gap, gap / peak);
        double ex = 0.0, ey = 0.0, total = 0.0;
        for (double v : x) total += v * v;
        for (int i = 0; i < n; ++i) {
            ex += x[i] * x[i];
            ey += y[i] * y[i];
            worst_prefix = std::max(worst_prefix, (ex - ey) / total);
        }
    }
    o.require(worst_gap < 1e-6, "magnitude error " + fmt("%.3g", worst_gap));
    // Dominance is exact in theory; allow rounding in the cumulative sums, far below the
    // magnitude tolerance.
    o.require(worst_prefix <= 1e-9, "prefix deficit " + fmt("%.3g", worst_prefix));

    const auto flipped = acoustics::minimum_phase(raw({0.5, 1.0})).samples;
    const double two_tap = std::max(std::abs(flipped[0] - 1.0), std::abs(flipped[1] - 0.5));
    o.require(flipped.size() == 2 && two_tap < 1e-12, "2-tap oracle off by " + fmt("%.3g", two_tap));
    if (o.ok) {
        o.detail = "magnitude " + fmt("%.2g", worst_gap) + ", prefix deficit " + fmt("%.2g", worst_prefix) +
                   ", 2-tap " + fmt("%.2g", two_tap);
    }
    return o;
}

Outcome shape_identities() {
    Outcome o;
    shape::ShapeConfig cfg;
    cfg.z_origin = 0.0;
    const auto family = synth::make_subject_family(cli::PipelineConfig{}.seed, 0.02);
    std::vector<shape::Subject> subjects;
    for (const auto& s : family)
        subjects.push_back({s.id, shape::center_function_from_mesh(synth::generate_canal_mesh(s.canal), cfg)});

    double self_err = 0.0, rot_err = 0.0, theta_err = 0.0;
    for (const auto& s : subjects) {
        self_err = std::max(self_err, std::abs(shape::shape_similarity(s.ec, s.ec, cfg).value - 1.0));
        for (int k : {1, 450, 1799, 2700, 3599}) {
            const double theta0 = kTwoPi * k / cfg.theta_samples;
            const auto r = shape::shape_similarity(s.ec, shape::rotate_center_function(s.ec, theta0), cfg);
            rot_err = std::max(rot_err, std::abs(r.value - 1.0));
            theta_err = std::max(theta_err, std::abs(r.best_theta - theta0));
        }
    }
    o.require(self_err < 1e-12, "self similarity off by " + fmt("%.3g", self_err));
    o.require(rot_err < 1e-12, "rotated similarity off by " + fmt("%.3g", rot_err));
    o.require(theta_err < 1e-12, "best_theta off by " + fmt("%.3g", theta_err));

    auto fine = cfg;
    fine.theta_samples *= 2;
    const auto coarse_m = shape::shape_similarity_matrix(subjects, cfg);
    const auto fine_m = shape::shape_similarity_matrix(subjects, fine);
    double change = 0.0;
    for (std::size_t i = 0; i < subjects.size(); ++i)
        for (std::size_t j = i + 1; j < subjects.size(); ++j)
            change = std::max(change, std::abs(coarse_m.value(i, j) - fine_m.value(i, j)));
    o.require(change < 1e-4, "grid doubling changed " + fmt("%.3g", change));
    if (o.ok) {
        o.detail = "self " + fmt("%.2g", self_err) + ", rotation " + fmt("%.2g", rot_err) + ", grid doubling " +
                   fmt("%.2g", change);
    }
    return o;
}

Outcome cohort_ordering() {
    Outcome o;
    testing::TempDir dir("acceptance_chain");
    if (!run_chain(dir.path())) {
        o.require(false, "pipeline command failed");
        return o;
    }
    const auto shape = read_csv(dir / "shape" / "shape_matrix.csv");
    const auto acoustic = read_csv(dir / "acoustic" / "acoustic_matrix.csv");
    o.require(shape.subject_ids().size() == 4 && shape.subject_ids()[0] == "TwinsA", "unexpected subjects");
    o.require(twins_maximal(shape), "twins not maximal in the shape matrix");
    o.require(twins_maximal(acoustic), "twins not maximal in the acoustic matrix");
    const auto summary = nlohmann::json::parse(slurp(dir / "report" / "summary.json"));
    double min_slope = 1e300;
    for (const auto& r : summary.at("regressions")) {
        const double slope = r.at("slope").get<double>();
        min_slope = std::min(min_slope, slope);
        o.require(slope > 0.0, r.at("subject_id").get<std::string>() + " slope " + fmt("%.4f", slope));
    }
    if (o.ok) {
        o.detail = "twins shape " + fmt("%.4f", shape.value(0, 1)) + ", acoustic " + fmt("%.4f", acoustic.value(0, 1)) +
                   ", min slope " + fmt("%.4f", min_slope);
    }
    return o;
}

// Every file under `root`, keyed by relative path.
std::map<std::string, std::string> snapshot(const fs::path& root) {
    std::map<std::string, std::string> files;
    for (const auto& e : fs::recursive_directory_iterator(root))
        if (e.is_regular_file()) files[fs::relative(e.path(), root).string()] = slurp(e.path());
    return files;
}

// Both runs use the same paths, since the written configs record them.
Outcome determinism() {
    Outcome o;
    testing::TempDir dir("acceptance_det");
    const auto root = dir / "run";
    if (!run_chain(root)) {
        o.require(false, "first run failed");
        return o;
    }
    const auto first = snapshot(root);
    fs::remove_all(root);
    if (!run_chain(root)) {
        o.require(false, "second run failed");
        return o;
    }
    const auto second = snapshot(root);
    o.require(first.size() == second.size(), "file sets differ");
    for (const auto& [name, bytes] : first) {
        const auto it = second.find(name);
        o.require(it != second.end() && it->second == bytes, name + " differs");
    }
    if (o.ok) o.detail = std::to_string(first.size()) + " files identical across two runs";
    return o;
}

}  // namespace

int main() {
    struct Criterion {
        const char* name;
        std::function<Outcome()> run;
        double limit_s;
    };
    const std::vector<Criterion> criteria = {
        {"table statistics", table_statistics, 1.0},
        {"regression", regression, 1.0},
        {"ellipse exactness", ellipse_exactness, 5.0},
        {"MLS round trip", mls_round_trip, 30.0},
        {"minimum phase", minimum_phase_contract, 0.0},
        {"shape identities", shape_identities, 0.0},
        {"cohort ordering", cohort_ordering, 120.0},
        {"determinism", determinism, 0.0},
    };

    int failures = 0;
    for (std::size_t i = 0; i < criteria.size(); ++i) {
        const auto& c = criteria[i];
        const auto start = std::chrono::steady_clock::now();
        Outcome o;
        try {
            o = c.run();
        } catch (const std::exception& e) {
            o.ok = false;
            o.detail = std::string("exception: ") + e.what();
        }
        const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
        if (c.limit_s > 0.0 && secs >= c.limit_s) {
            o.ok = false;
            o.detail += " (over the " + fmt("%.0f", c.limit_s) + " s limit)";
        }
        failures += !o.ok;
        std::cout << (o.ok ? "PASS" : "FAIL") << " criterion " << i + 1 << " (" << c.name << "): " << o.detail << " ["
                  << fmt("%.2f", secs) << " s]\n";
    }
    return failures == 0 ? 0 : 1;
}
