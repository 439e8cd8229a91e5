#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "hdphmm/dataset.hpp"
#include "hdphmm/hmm_model.hpp"
#include "hdphmm/matrix.hpp"

namespace hdphmm {

/// Posterior state marginals p(v_t = r | y_{1:T}) for one sequence.
struct StateMarginals {
    Matrix posterior;        // T x k, rows sum to 1
    double log_likelihood = 0.0;

    std::size_t length() const { return posterior.rows(); }
    std::size_t states() const { return posterior.cols(); }
};

/// Any -log P_cd that comes out infinite is replaced by this before linkage.
inline constexpr double kDissimilarityCap = 1e9;

/// Seeded starting point for EM: means drawn from observed values (one per
/// equal-count stratum of the sorted values), all
/// variances equal to the global data variance, Dirichlet(1) initial and
/// transition rows.
FiniteHmmModel init_model(const ExpressionDataset& dataset, std::size_t k, std::uint64_t seed);

/// Log-space forward-backward. Exact marginals and log p(y_{1:T} | model).
StateMarginals forward_backward(const FiniteHmmModel& model, std::span<const double> sequence);

struct BaumWelchResult {
    FiniteHmmModel model;
    // Total log-likelihood of the dataset under each successive model; the
    // returned model scores trace.back().
    std::vector<double> log_likelihood_trace;
};

/// Multi-sequence EM with shared parameters. Stops once the total
/// log-likelihood improves by less than `tol`, or after max_iter E-steps.
BaumWelchResult baum_welch(const ExpressionDataset& dataset, std::size_t k, std::uint64_t seed,
                           double tol = 1e-6, std::size_t max_iter = 500);

/// Same, starting from a given model instead of a seeded initialization.
BaumWelchResult baum_welch_from(const ExpressionDataset& dataset, FiniteHmmModel start, double tol,
                                std::size_t max_iter);

/// log P_cd = sum_t log sum_r p_c(t, r) p_d(t, r). Returns -infinity when the
/// overlap vanishes at some t.
double log_similarity(const StateMarginals& c, const StateMarginals& d);

/// N x N matrix of -log P_cd. The diagonal holds -log P_cc (not forced to 0);
/// infinite entries are capped at kDissimilarityCap.
Matrix dissimilarity_matrix(const FiniteHmmModel& model, const ExpressionDataset& dataset);

/// Fraction of entries strictly above `threshold`.
double nonzero_fraction(const Matrix& matrix, double threshold);

}  // namespace hdphmm
