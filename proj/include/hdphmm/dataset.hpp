#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "hdphmm/hmm_model.hpp"
#include "hdphmm/matrix.hpp"

namespace hdphmm {

/// Genes x time points of (log) expression values.
struct ExpressionDataset {
    std::vector<std::string> gene_ids;
    Matrix values;                              // N x T
    std::vector<std::string> time_labels;       // T
    std::optional<std::vector<int>> truth_labels;

    std::size_t num_genes() const { return values.rows(); }
    std::size_t num_times() const { return values.cols(); }

    /// N >= 2, T >= 2, finite values, unique ids, label length. Throws
    /// ValidationError.
    void validate() const;
};

enum class TextFormat { tsv, csv };

TextFormat parse_format(const std::string& name);
char delimiter_of(TextFormat format);

/// Reads a header row, then one gene per row: id, T numeric cells and an
/// optional trailing integer column headed "label".
ExpressionDataset load_dataset(const std::string& path, TextFormat format);
ExpressionDataset parse_dataset(const std::string& text, TextFormat format);
void save_dataset(const ExpressionDataset& dataset, const std::string& path, TextFormat format);

/// Divides every row by its first value so all series start at exactly 1.
ExpressionDataset normalize_t1(const ExpressionDataset& dataset);

/// Ancestral sampling from one or more generating HMMs.
struct SyntheticSpec {
    std::size_t n_sequences = 0;
    std::size_t seq_length = 0;
    std::vector<FiniteHmmModel> models;
    // Which generating model produced each sequence; empty means model 0 for
    // all. Truth label of a sequence is its branch + 1.
    std::vector<std::size_t> branch;
    std::uint64_t seed = 0;
};

struct SyntheticData {
    ExpressionDataset dataset;
    std::vector<std::vector<int>> trajectories;  // hidden state per (sequence, t)
};

SyntheticData generate_synthetic(const SyntheticSpec& spec);

/// Row-major text, tab separated, 17 significant digits, no header. Rejects
/// matrices that are not symmetric within 1e-9.
void save_matrix(const Matrix& matrix, const std::string& path);
Matrix load_matrix(const std::string& path);

/// 17 significant digits; parses back to the identical double.
std::string format_double(double value);

}  // namespace hdphmm
