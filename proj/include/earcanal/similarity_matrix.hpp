#pragma once

#include <cstddef>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace earcanal {

enum class MatrixKind { shape, acoustic };

/// Symmetric pairwise similarity between subjects. The diagonal is undefined; acoustic
/// matrices also carry the standard deviation of each cell.
class SimilarityMatrix {
public:
    SimilarityMatrix() = default;
    SimilarityMatrix(std::vector<std::string> subject_ids, MatrixKind kind);

    const std::vector<std::string>& subject_ids() const { return ids_; }
    MatrixKind kind() const { return kind_; }
    std::size_t size() const { return ids_.size(); }

    /// Sets cells (i, j) and (j, i). Throws std::invalid_argument for i == j or values
    /// outside [-1, 1].
    void set(std::size_t i, std::size_t j, double value, double stddev = 0.0);

    bool has(std::size_t i, std::size_t j) const;
    /// Throws std::out_of_range for the diagonal or an unset cell.
    double value(std::size_t i, std::size_t j) const;
    double stddev(std::size_t i, std::size_t j) const;

    std::optional<std::size_t> index_of(std::string_view id) const;
    std::size_t require_index(std::string_view id) const;

    /// True when every off-diagonal cell is set.
    bool complete() const;

private:
    std::size_t flat(std::size_t i, std::size_t j) const;

    std::vector<std::string> ids_;
    MatrixKind kind_{MatrixKind::shape};
    std::vector<std::optional<double>> values_;
    std::vector<double> stddevs_;
};

/// Table layout: a header row of subject ids, one row per subject, blank diagonal. Acoustic
/// cells are written as "mean±std". Lines starting with '#' are comments.
std::string to_csv(const SimilarityMatrix& m, int precision = 6);
void write_csv(const std::filesystem::path& path, const SimilarityMatrix& m, int precision = 6);

/// Parses the table layout. Cells may be "v", "v±s" or "v+-s"; the kind is acoustic when any
/// cell carries a deviation. Throws ParseError for ragged rows, header/row id mismatch or
/// cells whose mirror disagrees.
SimilarityMatrix parse_csv(std::string_view text);
SimilarityMatrix read_csv(const std::filesystem::path& path);

}  // namespace earcanal
