#include "hdphmm/dataset.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <string_view>
#include <unordered_set>

#include "hdphmm/errors.hpp"
#include "hdphmm/random.hpp"

namespace hdphmm {
namespace {

constexpr double kSymmetryTol = 1e-9;

std::string_view trim(std::string_view s) {
    while (!s.empty() && (s.front() == ' ' || s.front() == '\t' || s.front() == '\r')) s.remove_prefix(1);
    while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
    return s;
}

std::vector<std::string_view> split(std::string_view line, char delim) {
    std::vector<std::string_view> cells;
    std::size_t start = 0;
    while (true) {
        const std::size_t pos = line.find(delim, start);
        if (pos == std::string_view::npos) {
            cells.push_back(trim(line.substr(start)));
            break;
        }
        cells.push_back(trim(line.substr(start, pos - start)));
        start = pos + 1;
    }
    return cells;
}

bool parse_double(std::string_view cell, double& out) {
    if (cell.empty()) return false;
    if (cell.front() == '+') cell.remove_prefix(1);
    const auto [ptr, ec] = std::from_chars(cell.data(), cell.data() + cell.size(), out);
    return ec == std::errc() && ptr == cell.data() + cell.size();
}

bool parse_int(std::string_view cell, int& out) {
    if (cell.empty()) return false;
    const auto [ptr, ec] = std::from_chars(cell.data(), cell.data() + cell.size(), out);
    return ec == std::errc() && ptr == cell.data() + cell.size();
}

bool is_label_header(std::string_view s) {
    if (s.size() != 5) return false;
    constexpr std::string_view kLabel = "label";
    for (std::size_t i = 0; i < 5; ++i)
        if (static_cast<char>(std::tolower(static_cast<unsigned char>(s[i]))) != kLabel[i]) return false;
    return true;
}

std::string read_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open '" + path + "'");
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

void check_symmetric(const Matrix& m) {
    if (m.rows() != m.cols()) throw ValidationError("matrix is not square");
    for (std::size_t i = 0; i < m.rows(); ++i)
        for (std::size_t j = i + 1; j < m.cols(); ++j)
            if (!(std::abs(m(i, j) - m(j, i)) <= kSymmetryTol) &&
                !(std::isinf(m(i, j)) && m(i, j) == m(j, i)))
                throw ValidationError("matrix is not symmetric at (" + std::to_string(i) + "," +
                                      std::to_string(j) + ")");
}

}  // namespace

void ExpressionDataset::validate() const {
    const std::size_t n = num_genes();
    const std::size_t t = num_times();
    if (n < 2) throw ValidationError("dataset needs at least 2 genes, has " + std::to_string(n));
    if (t < 2) throw ValidationError("dataset needs at least 2 time points, has " + std::to_string(t));
    if (gene_ids.size() != n) throw ValidationError("gene id count does not match row count");
    if (!time_labels.empty() && time_labels.size() != t)
        throw ValidationError("time label count does not match column count");
    std::unordered_set<std::string> seen;
    for (std::size_t i = 0; i < n; ++i) {
        if (!seen.insert(gene_ids[i]).second) throw ValidationError("duplicate gene id '" + gene_ids[i] + "'");
        for (std::size_t j = 0; j < t; ++j)
            if (!std::isfinite(values(i, j)))
                throw ValidationError("non-finite value for gene '" + gene_ids[i] + "'");
    }
    if (truth_labels && truth_labels->size() != n)
        throw ValidationError("truth label count does not match gene count");
}

TextFormat parse_format(const std::string& name) {
    if (name == "tsv") return TextFormat::tsv;
    if (name == "csv") return TextFormat::csv;
    throw ArgumentError("unknown format '" + name + "' (expected tsv or csv)");
}

char delimiter_of(TextFormat format) { return format == TextFormat::csv ? ',' : '\t'; }

ExpressionDataset parse_dataset(const std::string& text, TextFormat format) {
    const char delim = delimiter_of(format);
    std::istringstream in(text);
    std::string line;
    std::size_t line_no = 0;

    std::vector<std::string_view> header;
    std::string header_line;
    while (std::getline(in, header_line)) {
        ++line_no;
        if (!trim(header_line).empty()) break;
    }
    if (trim(header_line).empty()) throw ParseError("missing header row");
    header = split(header_line, delim);
    const bool has_label = header.size() >= 2 && is_label_header(header.back());
    const std::size_t n_value_cols = header.size() - 1 - (has_label ? 1 : 0);
    if (n_value_cols == 0) throw ParseError("header has no value columns");

    ExpressionDataset ds;
    for (std::size_t c = 1; c <= n_value_cols; ++c) ds.time_labels.emplace_back(header[c]);

    std::vector<double> values;
    std::vector<int> labels;
    std::size_t row_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (trim(line).empty()) continue;
        ++row_no;
        const auto cells = split(line, delim);
        std::string where = "row " + std::to_string(row_no) + " (line " + std::to_string(line_no);
        if (!cells.empty() && !cells[0].empty()) where += ", gene '" + std::string(cells[0]) + "'";
        where += ")";
        if (cells.size() != header.size())
            throw ParseError(where + ": expected " + std::to_string(header.size()) + " columns, found " +
                             std::to_string(cells.size()));
        if (cells[0].empty()) throw ParseError(where + ": empty gene id");
        ds.gene_ids.emplace_back(cells[0]);
        for (std::size_t c = 1; c <= n_value_cols; ++c) {
            double v = 0.0;
            if (!parse_double(cells[c], v) || !std::isfinite(v))
                throw ParseError(where + ": non-numeric cell '" + std::string(cells[c]) + "' in column " +
                                 std::to_string(c + 1));
            values.push_back(v);
        }
        if (has_label) {
            int lab = 0;
            if (!parse_int(cells.back(), lab))
                throw ParseError(where + ": label '" + std::string(cells.back()) + "' is not an integer");
            labels.push_back(lab);
        }
    }

    ds.values = Matrix(ds.gene_ids.size(), n_value_cols);
    std::copy(values.begin(), values.end(), ds.values.data().begin());
    if (has_label) ds.truth_labels = std::move(labels);
    ds.validate();
    return ds;
}

ExpressionDataset load_dataset(const std::string& path, TextFormat format) {
    return parse_dataset(read_file(path), format);
}

void save_dataset(const ExpressionDataset& dataset, const std::string& path, TextFormat format) {
    const char delim = delimiter_of(format);
    std::ofstream out(path);
    if (!out) throw IoError("cannot open '" + path + "' for writing");
    out << "gene";
    for (std::size_t t = 0; t < dataset.num_times(); ++t)
        out << delim << (dataset.time_labels.empty() ? "t" + std::to_string(t + 1) : dataset.time_labels[t]);
    if (dataset.truth_labels) out << delim << "label";
    out << '\n';
    for (std::size_t i = 0; i < dataset.num_genes(); ++i) {
        out << dataset.gene_ids[i];
        for (std::size_t t = 0; t < dataset.num_times(); ++t) out << delim << format_double(dataset.values(i, t));
        if (dataset.truth_labels) out << delim << (*dataset.truth_labels)[i];
        out << '\n';
    }
    if (!out) throw IoError("failed writing '" + path + "'");
}

ExpressionDataset normalize_t1(const ExpressionDataset& dataset) {
    ExpressionDataset out = dataset;
    for (std::size_t i = 0; i < out.num_genes(); ++i) {
        const double first = out.values(i, 0);
        if (first == 0.0)
            throw NormalizationError("gene '" + out.gene_ids[i] + "' has value 0 at the first time point");
        for (double& v : out.values.row(i)) v /= first;
    }
    return out;
}

SyntheticData generate_synthetic(const SyntheticSpec& spec) {
    if (spec.n_sequences < 1 || spec.seq_length < 1)
        throw ArgumentError("synthetic spec needs at least one sequence of length >= 1");
    if (spec.models.empty()) throw ArgumentError("synthetic spec has no generating model");
    if (!spec.branch.empty() && spec.branch.size() != spec.n_sequences)
        throw ArgumentError("branch assignment length must equal n_sequences");
    for (const auto& m : spec.models) m.validate();

    Rng rng(spec.seed);
    SyntheticData out;
    auto& ds = out.dataset;
    ds.values = Matrix(spec.n_sequences, spec.seq_length);
    for (std::size_t t = 0; t < spec.seq_length; ++t) ds.time_labels.push_back("t" + std::to_string(t + 1));
    std::vector<int> labels(spec.n_sequences);
    out.trajectories.assign(spec.n_sequences, std::vector<int>(spec.seq_length));

    for (std::size_t i = 0; i < spec.n_sequences; ++i) {
        const std::size_t b = spec.branch.empty() ? 0 : spec.branch[i];
        if (b >= spec.models.size()) throw ArgumentError("branch index out of range");
        const FiniteHmmModel& m = spec.models[b];
        ds.gene_ids.push_back("seq" + std::to_string(i + 1));
        labels[i] = static_cast<int>(b) + 1;
        std::size_t state = sample_categorical(rng, m.initial);
        for (std::size_t t = 0; t < spec.seq_length; ++t) {
            if (t > 0) state = sample_categorical(rng, m.transition.row(state));
            out.trajectories[i][t] = static_cast<int>(state);
            ds.values(i, t) = sample_normal(rng, m.emission_means[state], std::sqrt(m.emission_vars[state]));
        }
    }
    ds.truth_labels = std::move(labels);
    return out;
}

std::string format_double(double value) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", value);
    return buf;
}

void save_matrix(const Matrix& matrix, const std::string& path) {
    check_symmetric(matrix);
    std::ofstream out(path);
    if (!out) throw IoError("cannot open '" + path + "' for writing");
    for (std::size_t i = 0; i < matrix.rows(); ++i) {
        for (std::size_t j = 0; j < matrix.cols(); ++j) {
            if (j) out << '\t';
            out << format_double(matrix(i, j));
        }
        out << '\n';
    }
    if (!out) throw IoError("failed writing '" + path + "'");
}

Matrix load_matrix(const std::string& path) {
    const std::string text = read_file(path);
    std::istringstream in(text);
    std::string line;
    std::vector<double> values;
    std::size_t rows = 0;
    std::size_t cols = 0;
    while (std::getline(in, line)) {
        if (trim(line).empty()) continue;
        const auto cells = split(line, '\t');
        if (rows == 0) cols = cells.size();
        if (cells.size() != cols)
            throw ParseError("matrix row " + std::to_string(rows + 1) + " has " + std::to_string(cells.size()) +
                             " cells, expected " + std::to_string(cols));
        for (auto cell : cells) {
            double v = 0.0;
            if (!parse_double(cell, v))
                throw ParseError("matrix row " + std::to_string(rows + 1) + ": bad number '" + std::string(cell) + "'");
            values.push_back(v);
        }
        ++rows;
    }
    Matrix m(rows, cols);
    std::copy(values.begin(), values.end(), m.data().begin());
    check_symmetric(m);
    return m;
}

}  // namespace hdphmm
