#pragma once

// Countably infinite HMM under a hierarchical Dirichlet process prior,
// sampled with direct-assignment auxiliary-variable Gibbs. Emission
// parameters are collapsed under a conjugate normal-inverse-gamma base
// measure, so a chain carries only trajectories, the shared stick weights,
// sufficient statistics and the two concentrations.

#include <cstdint>
#include <functional>
#include <iosfwd>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "hdphmm/dataset.hpp"
#include "hdphmm/matrix.hpp"
#include "hdphmm/random.hpp"

namespace hdphmm {

/// Normal-inverse-gamma base measure: sigma^2 ~ IG(shape, scale),
/// mu | sigma^2 ~ N(mean, sigma^2 / strength).
struct NigPrior {
    double mean = 0.0;
    double strength = 0.1;
    double shape = 1.0;
    double scale = 1.0;
};

struct HdpHyperParams {
    double a_alpha0 = 1.0;  // Gamma shape / rate for alpha0
    double b_alpha0 = 1.0;
    double a_gamma = 1.0;   // Gamma shape / rate for gamma
    double b_gamma = 1.0;
    NigPrior emission_base;
    // Auxiliary-variable passes per concentration update.
    std::size_t concentration_iters = 5;

    void validate() const;

    /// Shapes and alpha0 rate of 1; base measure centred on the data mean
    /// with scale equal to the data variance.
    static HdpHyperParams defaults_for(const ExpressionDataset& dataset, double b_gamma);
};

struct EmissionStats {
    std::int64_t count = 0;
    double sum = 0.0;
    double sum_sq = 0.0;

    void add(double y) {
        ++count;
        sum += y;
        sum_sq += y * y;
    }
    void remove(double y) {
        --count;
        sum -= y;
        sum_sq -= y * y;
    }
};

/// Log Student-t posterior predictive of y given the stats of one state.
double log_predictive(const NigPrior& prior, const EmissionStats& stats, double y);

/// Posterior mean of the emission mean given the stats.
double posterior_mean(const NigPrior& prior, const EmissionStats& stats);

struct StickWeights {
    std::vector<double> weights;
    double remainder = 1.0;
};

/// beta_k = f_k prod_{l<k} (1 - f_l); the remainder is the running product
/// of (1 - f_l), so weights plus remainder telescope to 1.
StickWeights stick_breaking_from_fractions(std::span<const double> fractions);

/// Fractions drawn i.i.d. Beta(1, gamma).
StickWeights stick_breaking_draw(double gamma, std::size_t truncation, Rng& rng);

/// Number of occupied tables when `customers` sit down in a Chinese
/// restaurant with concentration `weight` (Antoniak distribution).
std::int64_t sample_table_count(std::int64_t customers, double weight, Rng& rng);

/// Auxiliary-variable update of a DP concentration shared by several groups
/// (Escobar-West with one beta/Bernoulli pair per non-empty group).
double resample_dp_concentration(double current, std::span<const std::int64_t> group_sizes,
                                 std::int64_t total_tables, double shape, double rate, Rng& rng,
                                 std::size_t iters);

/// Update of the top-level concentration given `num_dishes` represented
/// states and `total_tables`.
double resample_top_concentration(double current, std::size_t num_dishes, std::int64_t total_tables,
                                  double shape, double rate, Rng& rng, std::size_t iters);

struct HdpChainState {
    // Per gene, state index in [0, K) at each time step.
    std::vector<std::vector<int>> assignments;
    // K + 1 entries; the last one is the unrepresented stick remainder.
    std::vector<double> beta;
    // (K + 1) x K. Row 0 is the distinguished initial state, row k + 1 is
    // state k.
    std::vector<std::vector<std::int64_t>> transition_counts;
    std::vector<std::int64_t> row_totals;  // K + 1
    std::vector<EmissionStats> emission_stats;  // K
    // Auxiliary table counts, same shape as transition_counts. Valid only
    // while tables_fresh is set.
    std::vector<std::vector<std::int64_t>> table_counts;
    bool tables_fresh = false;
    double alpha0 = 1.0;
    double gamma = 1.0;
    Rng rng;

    std::size_t num_states() const { return emission_stats.size(); }
    std::int64_t total_tables() const;
};

struct HdpSnapshot {
    std::size_t num_states = 0;
    std::vector<double> beta;
    double alpha0 = 0.0;
    double gamma = 0.0;
    std::vector<double> state_means;  // posterior mean emission per state
    std::vector<std::vector<int>> trajectories;
};

class HdpChain {
public:
    /// Picks the outcome of one categorical draw from its unnormalized
    /// weights (last entry = brand-new state). Test hook.
    using Chooser = std::function<std::size_t(std::span<const double>)>;

    HdpChain(Matrix observations, HdpHyperParams hypers, HdpChainState state);

    /// Chain with the given trajectories and weights; counts and statistics
    /// are rebuilt from the assignments. States must be 0..K-1 with none
    /// empty, and beta must have K + 1 entries.
    static HdpChain from_assignments(Matrix observations, HdpHyperParams hypers,
                                     std::vector<std::vector<int>> assignments, std::vector<double> beta,
                                     double alpha0, double gamma, std::uint64_t seed);

    void resample_assignment(std::size_t gene, std::size_t t, const Chooser* chooser = nullptr);
    /// Auxiliary table counts, then beta ~ Dirichlet(m_.1, ..., m_.K, gamma).
    void resample_beta();
    void sample_tables();
    void resample_concentrations();
    /// Assignments in scan order, then tables, concentrations and beta.
    void gibbs_sweep();

    /// Replaces the data (same shape) and rebuilds emission statistics.
    void set_observations(Matrix observations);
    /// Recomputes emission statistics from scratch in scan order.
    void refresh_emission_stats();

    /// Empty string when every invariant holds, else a description. Integer
    /// counts must match a recount exactly; emission sums within
    /// `stat_tol` relative.
    std::string consistency_error(double stat_tol = 0.0) const;

    HdpSnapshot snapshot() const;

    const HdpChainState& state() const { return state_; }
    HdpChainState& mutable_state() { return state_; }
    const Matrix& observations() const { return obs_; }
    const HdpHyperParams& hypers() const { return hypers_; }

private:
    void remove_state(std::size_t k);
    void add_state();
    void rebuild_counts();

    Matrix obs_;
    HdpHyperParams hypers_;
    HdpChainState state_;
    std::vector<double> weights_;  // scratch
};

/// Sequential initialization: each v_t is drawn from its prior predictive
/// given the transitions placed before it (data ignored); alpha0 and gamma
/// come from their priors.
HdpChain init_chain(const ExpressionDataset& dataset, const HdpHyperParams& hypers, std::uint64_t seed);

/// Over-segmented start: every observation goes to one of `n_states` bins
/// by its rank among all observed values (equal values share a bin; empty
/// bins are dropped). alpha0 and gamma come from their priors and beta from
/// its conditional given the bin counts. Single-site moves merge surplus
/// states easily but rarely split a state that mixes two clusters, so this
/// start recovers separated clusters far more reliably than init_chain.
HdpChain init_chain_quantile(const ExpressionDataset& dataset, const HdpHyperParams& hypers, std::uint64_t seed,
                             std::size_t n_states);

/// Draws (alpha0, gamma, beta, trajectories) and then data from the model
/// prior. Used for joint-distribution checks of the sampler.
HdpChain sample_prior_chain(std::size_t n_sequences, std::size_t length, const HdpHyperParams& hypers,
                            std::uint64_t seed);

/// Redraws every observation from p(y | trajectories), i.e. fresh emission
/// parameters from the base measure and data given them.
void resample_observations_given_states(HdpChain& chain);

struct SampleSchedule {
    std::size_t burn_in = 0;
    std::size_t n_samples = 1;
    std::size_t spacing = 0;
};

struct PosteriorSampleSet {
    std::vector<HdpSnapshot> samples;
    SampleSchedule schedule;
};

struct ChainInit {
    enum class Kind { sequential, quantile };
    Kind kind = Kind::quantile;
    std::size_t states = 10;  // quantile bins
};

using SweepObserver = std::function<void(const HdpChain&, std::size_t sweep)>;

/// burn_in sweeps, then n_samples snapshots taken spacing sweeps apart (at
/// least one sweep between consecutive snapshots).
PosteriorSampleSet run_chain(const ExpressionDataset& dataset, const HdpHyperParams& hypers, std::uint64_t seed,
                             const SampleSchedule& schedule, const ChainInit& init = {},
                             const SweepObserver& observer = {});

/// -sum_t log p_t where p_t is the fraction of snapshots in which genes c and
/// d occupy the same state at t, floored at 1/(S + 1). Diagonal is 0.
Matrix empirical_dissimilarity(const PosteriorSampleSet& samples);

/// Number of snapshots with each K.
std::map<std::size_t, std::size_t> represented_state_histogram(const PosteriorSampleSet& samples);

struct EmpiricalTransitions {
    Matrix probabilities;  // row-normalized pooled counts
    Matrix thresholded;    // entries <= threshold set to 0
    double nonzero_fraction = 0.0;
};

/// States are aligned to the first snapshot by greedy matching on posterior
/// emission means (unmatched states appended), then transitions are pooled
/// over genes and snapshots.
EmpiricalTransitions empirical_transition_matrix(const PosteriorSampleSet& samples, double threshold = 1e-3);

void write_snapshots(std::ostream& out, const PosteriorSampleSet& samples);
PosteriorSampleSet read_snapshots(std::istream& in);

}  // namespace hdphmm
