#include "hdphmm/hmm_model.hpp"

#include <cmath>
#include <cstdlib>
#include <fstream>
#include <istream>
#include <ostream>
#include <span>
#include <sstream>

#include "hdphmm/dataset.hpp"
#include "hdphmm/errors.hpp"

namespace hdphmm {
namespace {

constexpr double kStochasticTol = 1e-10;

void check_distribution(std::span<const double> p, const std::string& what) {
    double sum = 0.0;
    for (double v : p) {
        if (!std::isfinite(v) || v < 0.0) throw ValidationError(what + " has a negative or non-finite entry");
        sum += v;
    }
    if (std::abs(sum - 1.0) > kStochasticTol)
        throw ValidationError(what + " sums to " + format_double(sum) + ", not 1");
}

void write_row(std::ostream& out, std::span<const double> values) {
    for (std::size_t i = 0; i < values.size(); ++i) {
        if (i) out << ' ';
        out << format_double(values[i]);
    }
    out << '\n';
}

std::vector<double> read_row(std::istream& in, const std::string& label, std::size_t n) {
    std::string line;
    if (!std::getline(in, line)) throw ParseError("model: missing '" + label + "' line");
    std::istringstream ss(line);
    std::string tag;
    ss >> tag;
    if (tag != label) throw ParseError("model: expected '" + label + "', found '" + tag + "'");
    std::vector<double> out;
    std::string tok;
    while (ss >> tok) {
        char* end = nullptr;
        const double v = std::strtod(tok.c_str(), &end);
        if (end == tok.c_str() || *end != '\0') throw ParseError("model: bad number '" + tok + "' in '" + label + "'");
        out.push_back(v);
    }
    if (out.size() != n)
        throw ParseError("model: '" + label + "' has " + std::to_string(out.size()) + " values, expected " +
                         std::to_string(n));
    return out;
}

}  // namespace

void FiniteHmmModel::validate() const {
    const std::size_t n = k();
    if (n == 0) throw ValidationError("model has no states");
    if (transition.rows() != n || transition.cols() != n || emission_means.size() != n ||
        emission_vars.size() != n)
        throw ValidationError("model parameter shapes disagree with k=" + std::to_string(n));
    check_distribution(initial, "initial distribution");
    for (std::size_t i = 0; i < n; ++i)
        check_distribution(transition.row(i), "transition row " + std::to_string(i));
    for (std::size_t i = 0; i < n; ++i) {
        if (!std::isfinite(emission_means[i])) throw ValidationError("non-finite emission mean");
        if (!(emission_vars[i] >= kVarianceFloor) || !std::isfinite(emission_vars[i]))
            throw ValidationError("emission variance of state " + std::to_string(i) + " below floor");
    }
}

FiniteHmmModel FiniteHmmModel::permuted(const std::vector<std::size_t>& perm) const {
    const std::size_t n = k();
    FiniteHmmModel out;
    out.initial.resize(n);
    out.transition = Matrix(n, n);
    out.emission_means.resize(n);
    out.emission_vars.resize(n);
    for (std::size_t i = 0; i < n; ++i) {
        out.initial[i] = initial[perm[i]];
        out.emission_means[i] = emission_means[perm[i]];
        out.emission_vars[i] = emission_vars[perm[i]];
        for (std::size_t j = 0; j < n; ++j) out.transition(i, j) = transition(perm[i], perm[j]);
    }
    return out;
}

void write_model(std::ostream& out, const FiniteHmmModel& model) {
    out << "k " << model.k() << '\n';
    out << "initial ";
    write_row(out, model.initial);
    for (std::size_t i = 0; i < model.k(); ++i) {
        out << "transition ";
        write_row(out, model.transition.row(i));
    }
    out << "means ";
    write_row(out, model.emission_means);
    out << "variances ";
    write_row(out, model.emission_vars);
}

FiniteHmmModel read_model(std::istream& in) {
    std::string line;
    if (!std::getline(in, line)) throw ParseError("model: empty input");
    std::istringstream head(line);
    std::string tag;
    long long k = 0;
    if (!(head >> tag >> k) || tag != "k" || k < 1) throw ParseError("model: first line must be 'k <count>'");
    const auto n = static_cast<std::size_t>(k);
    FiniteHmmModel model;
    model.initial = read_row(in, "initial", n);
    model.transition = Matrix(n, n);
    for (std::size_t i = 0; i < n; ++i) {
        const auto row = read_row(in, "transition", n);
        for (std::size_t j = 0; j < n; ++j) model.transition(i, j) = row[j];
    }
    model.emission_means = read_row(in, "means", n);
    model.emission_vars = read_row(in, "variances", n);
    model.validate();
    return model;
}

void save_model(const FiniteHmmModel& model, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw IoError("cannot open '" + path + "' for writing");
    write_model(out, model);
    if (!out) throw IoError("failed writing '" + path + "'");
}

FiniteHmmModel load_model(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open '" + path + "'");
    return read_model(in);
}

}  // namespace hdphmm
