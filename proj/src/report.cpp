#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "earcanal/analysis.hpp"
#include "earcanal/error.hpp"

namespace earcanal::analysis {
namespace {

std::string fmt(double v, int precision = 6) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.*f", precision, v);
    return buf;
}

nlohmann::json statistics_json(const SimilarityMatrix& m, std::pair<std::size_t, std::size_t> pair) {
    if (!m.complete() || m.size() < 2) return nullptr;
    const MatrixStatistics s = matrix_statistics(m, pair.first, pair.second);
    return {{"overall_mean", s.overall_mean},
            {"designated_pair", {m.subject_ids()[pair.first], m.subject_ids()[pair.second]}},
            {"designated_pair_value", s.designated_pair_value},
            {"percent_excess", s.percent_excess}};
}

nlohmann::json regression_json(const RegressionResult& r) {
    nlohmann::json pairs = nlohmann::json::array();
    for (const auto& p : r.pairs) {
        pairs.push_back({{"other", p.other_id}, {"shape", p.shape}, {"acoustic", p.acoustic}});
    }
    return {{"subject_id", r.subject_id},
            {"pairs", std::move(pairs)},
            {"r", r.r},
            {"r_squared", r.r_squared},
            {"slope", r.slope},
            {"intercept", r.intercept},
            {"degenerate", r.degenerate}};
}

void write_text(const std::filesystem::path& path, const std::string& text, std::vector<std::filesystem::path>& written) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot write report file: " + path.string());
    out << text;
    if (!out) throw IoError("failed writing report file: " + path.string());
    written.push_back(path);
}

std::string xml_escape(const std::string& s) {
    std::string out;
    for (char c : s) {
        switch (c) {
            case '&': out += "&amp;"; break;
            case '<': out += "&lt;"; break;
            case '>': out += "&gt;"; break;
            case '"': out += "&quot;"; break;
            default: out += c;
        }
    }
    return out;
}

}  // namespace

nlohmann::json summary_json(const ReportInputs& inputs) {
    nlohmann::json subjects = nlohmann::json::array();
    for (const auto& r : inputs.regressions) subjects.push_back(regression_json(r));
    return {{"schema", kReportSchema},
            {"subjects", inputs.shape.subject_ids()},
            {"regressions", std::move(subjects)},
            {"shape_statistics", statistics_json(inputs.shape, inputs.designated_pair)},
            {"acoustic_statistics", statistics_json(inputs.acoustic, inputs.designated_pair)},
            {"config", inputs.config}};
}

std::string summary_csv(const std::vector<RegressionResult>& results) {
    std::ostringstream os;
    os << "subject,r,r_squared,slope,intercept,degenerate\n";
    for (const auto& r : results) {
        os << r.subject_id << ',' << fmt(r.r) << ',' << fmt(r.r_squared) << ',' << fmt(r.slope) << ','
           << fmt(r.intercept) << ',' << (r.degenerate ? "true" : "false") << '\n';
    }
    return os.str();
}

std::string regression_svg(const RegressionResult& result) {
    constexpr double width = 480.0, height = 360.0, margin = 56.0;
    double x_lo = 1.0, x_hi = -1.0, y_lo = 1.0, y_hi = -1.0;
    for (const auto& p : result.pairs) {
        x_lo = std::min(x_lo, p.shape);
        x_hi = std::max(x_hi, p.shape);
        y_lo = std::min(y_lo, p.acoustic);
        y_hi = std::max(y_hi, p.acoustic);
    }
    auto pad = [](double& lo, double& hi) {
        const double span = std::max(hi - lo, 1e-3);
        lo -= 0.1 * span;
        hi += 0.1 * span;
    };
    pad(x_lo, x_hi);
    pad(y_lo, y_hi);
    auto px = [&](double x) { return margin + (x - x_lo) / (x_hi - x_lo) * (width - 2 * margin); };
    auto py = [&](double y) { return height - margin - (y - y_lo) / (y_hi - y_lo) * (height - 2 * margin); };

    std::ostringstream os;
    os << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << width << "\" height=\"" << height
       << "\" viewBox=\"0 0 " << width << ' ' << height << "\">\n";
    os << "  <rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
    os << "  <line x1=\"" << margin << "\" y1=\"" << height - margin << "\" x2=\"" << width - margin << "\" y2=\""
       << height - margin << "\" stroke=\"black\"/>\n";
    os << "  <line x1=\"" << margin << "\" y1=\"" << margin << "\" x2=\"" << margin << "\" y2=\"" << height - margin
       << "\" stroke=\"black\"/>\n";
    os << "  <text x=\"" << width / 2 << "\" y=\"" << height - 16 << "\" text-anchor=\"middle\" font-size=\"13\">"
       << "shape similarity</text>\n";
    os << "  <text x=\"16\" y=\"" << height / 2 << "\" text-anchor=\"middle\" font-size=\"13\" transform=\"rotate(-90 16 "
       << height / 2 << ")\">acoustic similarity</text>\n";
    os << "  <text x=\"" << width / 2 << "\" y=\"28\" text-anchor=\"middle\" font-size=\"14\">"
       << xml_escape(result.subject_id) << ": r = " << fmt(result.r, 3) << ", R² = " << fmt(result.r_squared, 3)
       << "</text>\n";
    for (double t : {x_lo, x_hi}) {
        os << "  <text x=\"" << fmt(px(t), 2) << "\" y=\"" << height - margin + 16
           << "\" text-anchor=\"middle\" font-size=\"10\">" << fmt(t, 3) << "</text>\n";
    }
    for (double t : {y_lo, y_hi}) {
        os << "  <text x=\"" << margin - 6 << "\" y=\"" << fmt(py(t), 2) << "\" text-anchor=\"end\" font-size=\"10\">"
           << fmt(t, 3) << "</text>\n";
    }
    os << "  <line x1=\"" << fmt(px(x_lo), 2) << "\" y1=\"" << fmt(py(result.slope * x_lo + result.intercept), 2)
       << "\" x2=\"" << fmt(px(x_hi), 2) << "\" y2=\"" << fmt(py(result.slope * x_hi + result.intercept), 2)
       << "\" stroke=\"steelblue\" stroke-width=\"1.5\"/>\n";
    for (const auto& p : result.pairs) {
        os << "  <circle cx=\"" << fmt(px(p.shape), 2) << "\" cy=\"" << fmt(py(p.acoustic), 2)
           << "\" r=\"4\" fill=\"firebrick\"><title>" << xml_escape(p.other_id) << "</title></circle>\n";
    }
    os << "</svg>\n";
    return os.str();
}

std::vector<std::filesystem::path> emit_report(const ReportInputs& inputs, const std::filesystem::path& out_dir) {
    std::error_code ec;
    std::filesystem::create_directories(out_dir / "regression", ec);
    if (ec) throw IoError("cannot create report directory " + out_dir.string() + ": " + ec.message());

    std::vector<std::filesystem::path> written;
    write_text(out_dir / "shape_matrix.csv", to_csv(inputs.shape), written);
    write_text(out_dir / "acoustic_matrix.csv", to_csv(inputs.acoustic), written);
    for (const auto& r : inputs.regressions) {
        write_text(out_dir / "regression" / (r.subject_id + ".json"), regression_json(r).dump(2) + "\n", written);
        write_text(out_dir / "regression" / (r.subject_id + ".svg"), regression_svg(r), written);
    }
    write_text(out_dir / "summary.csv", summary_csv(inputs.regressions), written);
    write_text(out_dir / "summary.json", summary_json(inputs).dump(2) + "\n", written);
    return written;
}

}  // namespace earcanal::analysis
