#pragma once

#include <cstddef>
#include <iosfwd>
#include <string>
#include <vector>

#include "hdphmm/matrix.hpp"

namespace hdphmm {

/// Emission variances are never allowed below this (normalized-data units).
inline constexpr double kVarianceFloor = 1e-6;

/// k-state HMM with one univariate Gaussian emission per state.
struct FiniteHmmModel {
    std::vector<double> initial;          // length k
    Matrix transition;                    // k x k, row-stochastic
    std::vector<double> emission_means;   // length k
    std::vector<double> emission_vars;    // length k, >= kVarianceFloor

    std::size_t k() const { return initial.size(); }

    /// Throws ValidationError describing the first violated invariant.
    void validate() const;

    /// Same model with states reordered: new state i is old state perm[i].
    FiniteHmmModel permuted(const std::vector<std::size_t>& perm) const;
};

/// Text form: labelled lines for k, initial, transition rows, means,
/// variances; numbers written with 17 significant digits.
void write_model(std::ostream& out, const FiniteHmmModel& model);
FiniteHmmModel read_model(std::istream& in);
void save_model(const FiniteHmmModel& model, const std::string& path);
FiniteHmmModel load_model(const std::string& path);

}  // namespace hdphmm
