#include "earcanal/similarity_matrix.hpp"

#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <iterator>
#include <sstream>
#include <stdexcept>

#include "earcanal/error.hpp"

namespace earcanal {
namespace {

constexpr std::string_view kPlusMinus = "\xC2\xB1";  // U+00B1 in UTF-8
constexpr double kSymmetryTolerance = 1e-9;

std::string_view trim(std::string_view s) {
    while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
    while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
    return s;
}

std::vector<std::string_view> split(std::string_view line) {
    std::vector<std::string_view> out;
    std::size_t start = 0;
    while (true) {
        const auto comma = line.find(',', start);
        out.push_back(trim(line.substr(start, comma - start)));
        if (comma == std::string_view::npos) break;
        start = comma + 1;
    }
    return out;
}

double parse_number(std::string_view s) {
    s = trim(s);
    double v = 0.0;
    const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (s.empty() || ec != std::errc{} || ptr != s.data() + s.size()) {
        throw ParseError("non-numeric matrix cell '" + std::string(s) + "'");
    }
    return v;
}

struct Cell {
    double value;
    std::optional<double> stddev;
};

Cell parse_cell(std::string_view s) {
    for (const std::string_view sep : {kPlusMinus, std::string_view("+-")}) {
        if (const auto pos = s.find(sep); pos != std::string_view::npos) {
            return {parse_number(s.substr(0, pos)), parse_number(s.substr(pos + sep.size()))};
        }
    }
    return {parse_number(s), std::nullopt};
}

std::string format_fixed(double v, int precision) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.*f", precision, v);
    return buf;
}

}  // namespace

SimilarityMatrix::SimilarityMatrix(std::vector<std::string> subject_ids, MatrixKind kind)
    : ids_(std::move(subject_ids)),
      kind_(kind),
      values_(ids_.size() * ids_.size()),
      stddevs_(ids_.size() * ids_.size(), 0.0) {
    for (std::size_t i = 0; i < ids_.size(); ++i) {
        for (std::size_t j = i + 1; j < ids_.size(); ++j) {
            if (ids_[i] == ids_[j]) throw std::invalid_argument("duplicate subject id " + ids_[i]);
        }
    }
}

std::size_t SimilarityMatrix::flat(std::size_t i, std::size_t j) const {
    if (i >= ids_.size() || j >= ids_.size()) throw std::out_of_range("matrix index out of range");
    return i * ids_.size() + j;
}

void SimilarityMatrix::set(std::size_t i, std::size_t j, double value, double stddev) {
    if (i == j) throw std::invalid_argument("similarity matrix diagonal is undefined");
    if (!(value >= -1.0 - 1e-12 && value <= 1.0 + 1e-12)) {
        throw std::invalid_argument("similarity value outside [-1, 1]");
    }
    if (!(stddev >= 0.0)) throw std::invalid_argument("negative standard deviation");
    values_[flat(i, j)] = value;
    values_[flat(j, i)] = value;
    stddevs_[flat(i, j)] = stddev;
    stddevs_[flat(j, i)] = stddev;
}

bool SimilarityMatrix::has(std::size_t i, std::size_t j) const {
    return i != j && values_[flat(i, j)].has_value();
}

double SimilarityMatrix::value(std::size_t i, std::size_t j) const {
    if (!has(i, j)) {
        throw std::out_of_range("similarity cell (" + std::to_string(i) + ", " +
                                std::to_string(j) + ") is undefined");
    }
    return *values_[flat(i, j)];
}

double SimilarityMatrix::stddev(std::size_t i, std::size_t j) const {
    if (!has(i, j)) throw std::out_of_range("similarity cell is undefined");
    return stddevs_[flat(i, j)];
}

std::optional<std::size_t> SimilarityMatrix::index_of(std::string_view id) const {
    for (std::size_t i = 0; i < ids_.size(); ++i) {
        if (ids_[i] == id) return i;
    }
    return std::nullopt;
}

std::size_t SimilarityMatrix::require_index(std::string_view id) const {
    if (auto i = index_of(id)) return *i;
    throw std::out_of_range("unknown subject id " + std::string(id));
}

bool SimilarityMatrix::complete() const {
    for (std::size_t i = 0; i < ids_.size(); ++i) {
        for (std::size_t j = 0; j < ids_.size(); ++j) {
            if (i != j && !has(i, j)) return false;
        }
    }
    return true;
}

std::string to_csv(const SimilarityMatrix& m, int precision) {
    std::ostringstream os;
    for (const auto& id : m.subject_ids()) os << ',' << id;
    os << '\n';
    for (std::size_t i = 0; i < m.size(); ++i) {
        os << m.subject_ids()[i];
        for (std::size_t j = 0; j < m.size(); ++j) {
            os << ',';
            if (!m.has(i, j)) continue;
            os << format_fixed(m.value(i, j), precision);
            if (m.kind() == MatrixKind::acoustic) {
                os << kPlusMinus << format_fixed(m.stddev(i, j), precision);
            }
        }
        os << '\n';
    }
    return os.str();
}

void write_csv(const std::filesystem::path& path, const SimilarityMatrix& m, int precision) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot write matrix CSV: " + path.string());
    out << to_csv(m, precision);
    if (!out) throw IoError("failed writing matrix CSV: " + path.string());
}

SimilarityMatrix parse_csv(std::string_view text) {
    std::vector<std::vector<std::string_view>> rows;
    std::size_t start = 0;
    while (start < text.size()) {
        auto end = text.find('\n', start);
        if (end == std::string_view::npos) end = text.size();
        const auto line = trim(text.substr(start, end - start));
        start = end + 1;
        if (line.empty() || line.front() == '#') continue;
        rows.push_back(split(line));
    }
    if (rows.empty()) throw ParseError("empty similarity matrix CSV");

    const auto& header = rows.front();
    const std::size_t m = header.size() - 1;
    if (header.size() < 2 || !header.front().empty()) {
        throw ParseError("matrix CSV header must start with an empty cell followed by subject ids");
    }
    if (rows.size() != m + 1) throw ParseError("matrix CSV must have one row per subject");

    std::vector<std::string> ids;
    for (std::size_t j = 1; j < header.size(); ++j) ids.emplace_back(header[j]);

    std::vector<std::vector<std::optional<Cell>>> cells(m, std::vector<std::optional<Cell>>(m));
    bool any_std = false;
    for (std::size_t i = 0; i < m; ++i) {
        const auto& row = rows[i + 1];
        if (row.size() != m + 1) throw ParseError("ragged matrix CSV row for " + std::string(row[0]));
        if (row[0] != ids[i]) {
            throw ParseError("matrix row id '" + std::string(row[0]) + "' does not match header '" +
                             ids[i] + "'");
        }
        for (std::size_t j = 0; j < m; ++j) {
            const auto cell = row[j + 1];
            if (i == j) {
                if (!cell.empty() && cell != "-") throw ParseError("matrix diagonal must be blank");
                continue;
            }
            if (cell.empty()) continue;
            cells[i][j] = parse_cell(cell);
            any_std = any_std || cells[i][j]->stddev.has_value();
        }
    }

    SimilarityMatrix out(ids, any_std ? MatrixKind::acoustic : MatrixKind::shape);
    for (std::size_t i = 0; i < m; ++i) {
        for (std::size_t j = i + 1; j < m; ++j) {
            const auto& upper = cells[i][j];
            const auto& lower = cells[j][i];
            if (upper && lower) {
                if (std::abs(upper->value - lower->value) > kSymmetryTolerance ||
                    std::abs(upper->stddev.value_or(0.0) - lower->stddev.value_or(0.0)) >
                        kSymmetryTolerance) {
                    throw ParseError("asymmetric matrix cell (" + ids[i] + ", " + ids[j] + ")");
                }
            }
            const auto& cell = upper ? upper : lower;
            if (cell) out.set(i, j, cell->value, cell->stddev.value_or(0.0));
        }
    }
    return out;
}

SimilarityMatrix read_csv(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open matrix CSV: " + path.string());
    const std::string text((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    try {
        return parse_csv(text);
    } catch (const ParseError& e) {
        throw ParseError(path.string() + ": " + e.what());
    } catch (const std::invalid_argument& e) {
        throw ParseError(path.string() + ": " + e.what());
    }
}

}  // namespace earcanal
