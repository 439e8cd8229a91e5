#include "hdphmm/hdp_hmm.hpp"

#include <algorithm>
#include <cmath>
#include <istream>
#include <limits>
#include <numbers>
#include <numeric>
#include <ostream>
#include <sstream>
#include <tuple>

#include "hdphmm/errors.hpp"
#include "hdphmm/kernels.hpp"

namespace hdphmm {
namespace {

constexpr double kBetaSumTol = 1e-10;

bool positive_finite(double v) { return v > 0.0 && std::isfinite(v); }

}  // namespace

// ---------------------------------------------------------------------------
// Hyperparameters and the collapsed emission model

void HdpHyperParams::validate() const {
    if (!positive_finite(a_alpha0) || !positive_finite(b_alpha0) || !positive_finite(a_gamma) ||
        !positive_finite(b_gamma))
        throw ValidationError("gamma hyperprior shapes and rates must be positive");
    if (!std::isfinite(emission_base.mean) || !positive_finite(emission_base.strength) ||
        !positive_finite(emission_base.shape) || !positive_finite(emission_base.scale))
        throw ValidationError("emission base measure parameters must be positive");
    if (concentration_iters < 1) throw ValidationError("concentration_iters must be >= 1");
}

HdpHyperParams HdpHyperParams::defaults_for(const ExpressionDataset& dataset, double b_gamma) {
    HdpHyperParams h;
    h.b_gamma = b_gamma;
    const auto all = dataset.values.data();
    const double n = static_cast<double>(all.size());
    const double mean = std::accumulate(all.begin(), all.end(), 0.0) / n;
    double ss = 0.0;
    for (double v : all) ss += (v - mean) * (v - mean);
    h.emission_base.mean = mean;
    h.emission_base.strength = 0.1;
    h.emission_base.shape = 1.0;
    h.emission_base.scale = std::max(ss / n, kVarianceFloor);
    return h;
}

double log_predictive(const NigPrior& prior, const EmissionStats& stats, double y) {
    const double n = static_cast<double>(stats.count);
    const double kn = prior.strength + n;
    const double mn = (prior.strength * prior.mean + stats.sum) / kn;
    const double an = prior.shape + 0.5 * n;
    double bn = prior.scale;
    if (stats.count > 0) {
        const double xbar = stats.sum / n;
        const double ss = std::max(stats.sum_sq - stats.sum * xbar, 0.0);
        const double dm = xbar - prior.mean;
        bn += 0.5 * ss + prior.strength * n * dm * dm / (2.0 * kn);
    }
    const double nu = 2.0 * an;
    const double s2 = bn * (kn + 1.0) / (an * kn);
    const double z = y - mn;
    return std::lgamma(0.5 * (nu + 1.0)) - std::lgamma(0.5 * nu) - 0.5 * std::log(nu * std::numbers::pi * s2) -
           0.5 * (nu + 1.0) * std::log1p(z * z / (nu * s2));
}

double posterior_mean(const NigPrior& prior, const EmissionStats& stats) {
    return (prior.strength * prior.mean + stats.sum) / (prior.strength + static_cast<double>(stats.count));
}

// ---------------------------------------------------------------------------
// Stick breaking and auxiliary-variable updates

StickWeights stick_breaking_from_fractions(std::span<const double> fractions) {
    StickWeights out;
    out.weights.reserve(fractions.size());
    double rest = 1.0;
    for (double f : fractions) {
        out.weights.push_back(f * rest);
        rest *= (1.0 - f);
    }
    out.remainder = rest;
    return out;
}

StickWeights stick_breaking_draw(double gamma, std::size_t truncation, Rng& rng) {
    if (!positive_finite(gamma)) throw ArgumentError("stick_breaking_draw: gamma must be > 0");
    if (truncation < 1) throw ArgumentError("stick_breaking_draw: truncation must be >= 1");
    std::vector<double> fractions(truncation);
    for (double& f : fractions) f = sample_beta(rng, 1.0, gamma);
    return stick_breaking_from_fractions(fractions);
}

std::int64_t sample_table_count(std::int64_t customers, double weight, Rng& rng) {
    std::int64_t tables = 0;
    for (std::int64_t i = 0; i < customers; ++i)
        if (sample_uniform(rng) * (weight + static_cast<double>(i)) < weight) ++tables;
    return tables;
}

double resample_dp_concentration(double current, std::span<const std::int64_t> group_sizes,
                                 std::int64_t total_tables, double shape, double rate, Rng& rng,
                                 std::size_t iters) {
    double alpha = current;
    for (std::size_t it = 0; it < iters; ++it) {
        double sum_log_w = 0.0;
        double sum_s = 0.0;
        for (std::int64_t n : group_sizes) {
            if (n <= 0) continue;
            const double nj = static_cast<double>(n);
            sum_log_w += std::log(sample_beta(rng, alpha + 1.0, nj));
            if (sample_bernoulli(rng, nj / (nj + alpha))) sum_s += 1.0;
        }
        alpha = sample_gamma(rng, shape + static_cast<double>(total_tables) - sum_s, rate - sum_log_w);
        // A gamma draw can underflow to exactly 0 for tiny shapes.
        alpha = std::max(alpha, std::numeric_limits<double>::min());
    }
    return alpha;
}

double resample_top_concentration(double current, std::size_t num_dishes, std::int64_t total_tables,
                                  double shape, double rate, Rng& rng, std::size_t iters) {
    if (total_tables <= 0) return std::max(sample_gamma(rng, shape, rate), std::numeric_limits<double>::min());
    double g = current;
    const double m = static_cast<double>(total_tables);
    const double K = static_cast<double>(num_dishes);
    for (std::size_t it = 0; it < iters; ++it) {
        const double eta = sample_beta(rng, g + 1.0, m);
        const double r = rate - std::log(eta);
        const double odds = (shape + K - 1.0) / (m * r);
        const bool upper = sample_uniform(rng) * (1.0 + odds) < odds;
        g = sample_gamma(rng, upper ? shape + K : shape + K - 1.0, r);
        g = std::max(g, std::numeric_limits<double>::min());
    }
    return g;
}

std::int64_t HdpChainState::total_tables() const {
    std::int64_t m = 0;
    for (const auto& row : table_counts)
        for (std::int64_t v : row) m += v;
    return m;
}

// ---------------------------------------------------------------------------
// HdpChain

HdpChain::HdpChain(Matrix observations, HdpHyperParams hypers, HdpChainState state)
    : obs_(std::move(observations)), hypers_(hypers), state_(std::move(state)) {
    hypers_.validate();
}

HdpChain HdpChain::from_assignments(Matrix observations, HdpHyperParams hypers,
                                    std::vector<std::vector<int>> assignments, std::vector<double> beta,
                                    double alpha0, double gamma, std::uint64_t seed) {
    if (assignments.size() != observations.rows()) throw ArgumentError("assignments do not match observation rows");
    int max_state = -1;
    for (const auto& row : assignments) {
        if (row.size() != observations.cols()) throw ArgumentError("trajectory length does not match observations");
        for (int v : row) {
            if (v < 0) throw ArgumentError("negative state index");
            max_state = std::max(max_state, v);
        }
    }
    const auto K = static_cast<std::size_t>(max_state + 1);
    if (beta.size() != K + 1) throw ArgumentError("beta must have K + 1 entries");
    HdpChainState st;
    st.assignments = std::move(assignments);
    st.beta = std::move(beta);
    st.alpha0 = alpha0;
    st.gamma = gamma;
    st.rng.seed(seed);
    st.emission_stats.assign(K, EmissionStats{});
    HdpChain chain(std::move(observations), hypers, std::move(st));
    chain.rebuild_counts();
    for (std::size_t k = 0; k < K; ++k)
        if (chain.state_.emission_stats[k].count == 0)
            throw ArgumentError("state " + std::to_string(k) + " is not used by any assignment");
    return chain;
}

void HdpChain::rebuild_counts() {
    const std::size_t K = state_.emission_stats.size();
    state_.transition_counts.assign(K + 1, std::vector<std::int64_t>(K, 0));
    state_.row_totals.assign(K + 1, 0);
    for (const auto& row : state_.assignments) {
        std::size_t prev = 0;
        for (int v : row) {
            ++state_.transition_counts[prev][v];
            ++state_.row_totals[prev];
            prev = static_cast<std::size_t>(v) + 1;
        }
    }
    state_.tables_fresh = false;
    refresh_emission_stats();
}

void HdpChain::refresh_emission_stats() {
    for (auto& s : state_.emission_stats) s = EmissionStats{};
    for (std::size_t g = 0; g < state_.assignments.size(); ++g)
        for (std::size_t t = 0; t < state_.assignments[g].size(); ++t)
            state_.emission_stats[state_.assignments[g][t]].add(obs_(g, t));
}

void HdpChain::set_observations(Matrix observations) {
    if (observations.rows() != obs_.rows() || observations.cols() != obs_.cols())
        throw ArgumentError("set_observations: shape mismatch");
    obs_ = std::move(observations);
    refresh_emission_stats();
}

void HdpChain::remove_state(std::size_t k) {
    auto& st = state_;
    st.beta.back() += st.beta[k];
    st.beta.erase(st.beta.begin() + static_cast<std::ptrdiff_t>(k));
    for (auto& row : st.transition_counts) row.erase(row.begin() + static_cast<std::ptrdiff_t>(k));
    st.transition_counts.erase(st.transition_counts.begin() + static_cast<std::ptrdiff_t>(k + 1));
    st.row_totals.erase(st.row_totals.begin() + static_cast<std::ptrdiff_t>(k + 1));
    st.emission_stats.erase(st.emission_stats.begin() + static_cast<std::ptrdiff_t>(k));
    const int ki = static_cast<int>(k);
    for (auto& row : st.assignments)
        for (int& v : row)
            if (v > ki) --v;
    st.tables_fresh = false;
}

void HdpChain::add_state() {
    auto& st = state_;
    const double split = sample_beta(st.rng, 1.0, st.gamma);
    const double rest = st.beta.back();
    st.beta.back() = (1.0 - split) * rest;
    st.beta.insert(st.beta.end() - 1, split * rest);
    for (auto& row : st.transition_counts) row.push_back(0);
    st.transition_counts.emplace_back(st.emission_stats.size() + 1, 0);
    st.row_totals.push_back(0);
    st.emission_stats.emplace_back();
    st.tables_fresh = false;
}

void HdpChain::resample_assignment(std::size_t gene, std::size_t t, const Chooser* chooser) {
    auto& st = state_;
    if (gene >= st.assignments.size() || t >= st.assignments[gene].size())
        throw ArgumentError("resample_assignment: index out of range");
    auto& traj = st.assignments[gene];
    const std::size_t T = traj.size();
    const double y = obs_(gene, t);
    const bool has_next = t + 1 < T;

    // Remove v_t: its incoming transition, outgoing transition and datum.
    const auto old = static_cast<std::size_t>(traj[t]);
    std::size_t prev_row = t == 0 ? 0 : static_cast<std::size_t>(traj[t - 1]) + 1;
    --st.transition_counts[prev_row][old];
    --st.row_totals[prev_row];
    if (has_next) {
        --st.transition_counts[old + 1][traj[t + 1]];
        --st.row_totals[old + 1];
    }
    st.emission_stats[old].remove(y);
    st.tables_fresh = false;
    if (st.emission_stats[old].count == 0) {
        traj[t] = -1;
        remove_state(old);
        if (t > 0) prev_row = static_cast<std::size_t>(traj[t - 1]) + 1;
    }

    const std::size_t K = st.num_states();
    const std::size_t next = has_next ? static_cast<std::size_t>(traj[t + 1]) : 0;
    const double a0 = st.alpha0;
    const NigPrior& prior = hypers_.emission_base;

    weights_.resize(K + 1);
    double max_log = -std::numeric_limits<double>::infinity();
    std::vector<double>& logp = weights_;
    for (std::size_t r = 0; r < K; ++r) logp[r] = log_predictive(prior, st.emission_stats[r], y);
    logp[K] = log_predictive(prior, EmissionStats{}, y);
    for (double v : logp) max_log = std::max(max_log, v);

    for (std::size_t r = 0; r < K; ++r) {
        double w = static_cast<double>(st.transition_counts[prev_row][r]) + a0 * st.beta[r];
        if (has_next) {
            // v_{t-1} = r = v_{t+1}: the incoming transition just placed is
            // also an outgoing transition of r.
            const double self_in = (prev_row == r + 1) ? 1.0 : 0.0;
            const double self_out = (prev_row == r + 1 && r == next) ? 1.0 : 0.0;
            w *= (static_cast<double>(st.transition_counts[r + 1][next]) + a0 * st.beta[next] + self_out) /
                 (static_cast<double>(st.row_totals[r + 1]) + a0 + self_in);
        }
        logp[r] = w * std::exp(logp[r] - max_log);
    }
    {
        double w = a0 * st.beta[K];
        if (has_next) w *= st.beta[next];
        logp[K] = w * std::exp(logp[K] - max_log);
    }

    std::size_t pick = chooser != nullptr ? (*chooser)(weights_) : sample_categorical(st.rng, weights_);
    if (pick > K) throw ArgumentError("resample_assignment: chooser returned an out-of-range index");
    if (pick == K) add_state();

    traj[t] = static_cast<int>(pick);
    ++st.transition_counts[prev_row][pick];
    ++st.row_totals[prev_row];
    if (has_next) {
        ++st.transition_counts[pick + 1][next];
        ++st.row_totals[pick + 1];
    }
    st.emission_stats[pick].add(y);
}

void HdpChain::sample_tables() {
    auto& st = state_;
    const std::size_t K = st.num_states();
    st.table_counts.assign(K + 1, std::vector<std::int64_t>(K, 0));
    for (std::size_t j = 0; j <= K; ++j)
        for (std::size_t k = 0; k < K; ++k) {
            const std::int64_t n = st.transition_counts[j][k];
            if (n > 0) st.table_counts[j][k] = sample_table_count(n, st.alpha0 * st.beta[k], st.rng);
        }
    st.tables_fresh = true;
}

void HdpChain::resample_beta() {
    sample_tables();
    auto& st = state_;
    const std::size_t K = st.num_states();
    std::vector<double> conc(K + 1, 0.0);
    for (const auto& row : st.table_counts)
        for (std::size_t k = 0; k < K; ++k) conc[k] += static_cast<double>(row[k]);
    conc[K] = st.gamma;
    st.beta = sample_dirichlet(st.rng, conc);
}

void HdpChain::resample_concentrations() {
    auto& st = state_;
    if (!st.tables_fresh) sample_tables();
    const std::int64_t m = st.total_tables();
    st.alpha0 = resample_dp_concentration(st.alpha0, st.row_totals, m, hypers_.a_alpha0, hypers_.b_alpha0, st.rng,
                                          hypers_.concentration_iters);
    st.gamma = resample_top_concentration(st.gamma, st.num_states(), m, hypers_.a_gamma, hypers_.b_gamma, st.rng,
                                          hypers_.concentration_iters);
}

void HdpChain::gibbs_sweep() {
    for (std::size_t g = 0; g < state_.assignments.size(); ++g)
        for (std::size_t t = 0; t < state_.assignments[g].size(); ++t) resample_assignment(g, t);
    refresh_emission_stats();
    // Tables, then (alpha0, gamma) given tables, then beta given tables and
    // the new gamma: gamma's update integrates beta out, so beta must follow.
    sample_tables();
    resample_concentrations();
    auto& st = state_;
    const std::size_t K = st.num_states();
    std::vector<double> conc(K + 1, 0.0);
    for (const auto& row : st.table_counts)
        for (std::size_t k = 0; k < K; ++k) conc[k] += static_cast<double>(row[k]);
    conc[K] = st.gamma;
    st.beta = sample_dirichlet(st.rng, conc);
}

std::string HdpChain::consistency_error(double stat_tol) const {
    const auto& st = state_;
    const std::size_t K = st.num_states();
    std::ostringstream why;
    if (st.beta.size() != K + 1) return "beta has wrong length";
    double bsum = 0.0;
    for (double b : st.beta) {
        if (!(b >= 0.0)) return "negative beta entry";
        bsum += b;
    }
    if (std::abs(bsum - 1.0) > kBetaSumTol) {
        why << "beta sums to " << bsum;
        return why.str();
    }
    if (!positive_finite(st.alpha0) || !positive_finite(st.gamma)) return "concentration not positive and finite";
    if (st.transition_counts.size() != K + 1 || st.row_totals.size() != K + 1) return "count table has wrong shape";

    std::vector<std::vector<std::int64_t>> counts(K + 1, std::vector<std::int64_t>(K, 0));
    std::vector<EmissionStats> stats(K);
    for (std::size_t g = 0; g < st.assignments.size(); ++g) {
        std::size_t prev = 0;
        for (std::size_t t = 0; t < st.assignments[g].size(); ++t) {
            const int v = st.assignments[g][t];
            if (v < 0 || static_cast<std::size_t>(v) >= K) return "assignment outside 0..K-1";
            ++counts[prev][v];
            prev = static_cast<std::size_t>(v) + 1;
            stats[v].add(obs_(g, t));
        }
    }
    for (std::size_t j = 0; j <= K; ++j) {
        if (st.transition_counts[j].size() != K) return "count row has wrong length";
        std::int64_t tot = 0;
        for (std::size_t k = 0; k < K; ++k) {
            if (st.transition_counts[j][k] != counts[j][k]) {
                why << "transition count (" << j << "," << k << ") is " << st.transition_counts[j][k]
                    << ", recount gives " << counts[j][k];
                return why.str();
            }
            tot += counts[j][k];
        }
        if (st.row_totals[j] != tot) return "row total disagrees with recount";
    }
    auto close = [&](double a, double b) { return std::abs(a - b) <= stat_tol * std::max(1.0, std::abs(b)); };
    for (std::size_t k = 0; k < K; ++k) {
        if (stats[k].count == 0) return "represented state " + std::to_string(k) + " is empty";
        const auto& s = st.emission_stats[k];
        if (s.count != stats[k].count) return "emission count disagrees with recount";
        if (!close(s.sum, stats[k].sum) || !close(s.sum_sq, stats[k].sum_sq))
            return "emission sums disagree with recount for state " + std::to_string(k);
    }
    if (st.tables_fresh) {
        if (st.table_counts.size() != K + 1) return "table counts have wrong shape";
        for (std::size_t j = 0; j <= K; ++j)
            for (std::size_t k = 0; k < K; ++k) {
                const auto m = st.table_counts[j][k];
                const auto n = counts[j][k];
                if (m < 0 || m > n || ((m > 0) != (n > 0))) return "table counts inconsistent with customers";
            }
    }
    return {};
}

HdpSnapshot HdpChain::snapshot() const {
    HdpSnapshot s;
    s.num_states = state_.num_states();
    s.beta = state_.beta;
    s.alpha0 = state_.alpha0;
    s.gamma = state_.gamma;
    for (const auto& st : state_.emission_stats) s.state_means.push_back(posterior_mean(hypers_.emission_base, st));
    s.trajectories = state_.assignments;
    return s;
}

// ---------------------------------------------------------------------------
// Initialization and forward simulation

namespace {

// Same stick split as a birth inside the sampler.
void split_stick_and_append(HdpChain& chain) {
    auto& st = chain.mutable_state();
    const double split = sample_beta(st.rng, 1.0, st.gamma);
    const double rest = st.beta.back();
    st.beta.back() = (1.0 - split) * rest;
    st.beta.insert(st.beta.end() - 1, split * rest);
    for (auto& row : st.transition_counts) row.push_back(0);
    st.transition_counts.emplace_back(st.emission_stats.size() + 1, 0);
    st.row_totals.push_back(0);
    st.emission_stats.emplace_back();
    st.tables_fresh = false;
}

// Places every v_t in scan order from its prior predictive given the
// transitions placed before it.
void sequential_fill(HdpChain& chain, std::size_t N, std::size_t T) {
    auto& st = chain.mutable_state();
    st.assignments.assign(N, std::vector<int>(T, -1));
    std::vector<double> w;
    for (std::size_t g = 0; g < N; ++g) {
        std::size_t prev_row = 0;
        for (std::size_t t = 0; t < T; ++t) {
            const std::size_t K = st.num_states();
            w.resize(K + 1);
            for (std::size_t r = 0; r < K; ++r)
                w[r] = static_cast<double>(st.transition_counts[prev_row][r]) + st.alpha0 * st.beta[r];
            w[K] = st.alpha0 * st.beta[K];
            const std::size_t pick = sample_categorical(st.rng, w);
            if (pick == K) split_stick_and_append(chain);
            st.assignments[g][t] = static_cast<int>(pick);
            ++st.transition_counts[prev_row][pick];
            ++st.row_totals[prev_row];
            st.emission_stats[pick].add(chain.observations()(g, t));
            prev_row = pick + 1;
        }
    }
}

HdpChainState empty_state(std::uint64_t seed, const HdpHyperParams& hypers) {
    HdpChainState st;
    st.rng.seed(seed);
    st.alpha0 = std::max(sample_gamma(st.rng, hypers.a_alpha0, hypers.b_alpha0), std::numeric_limits<double>::min());
    st.gamma = std::max(sample_gamma(st.rng, hypers.a_gamma, hypers.b_gamma), std::numeric_limits<double>::min());
    st.beta = {1.0};
    st.transition_counts.assign(1, {});
    st.row_totals.assign(1, 0);
    return st;
}

}  // namespace

HdpChain init_chain(const ExpressionDataset& dataset, const HdpHyperParams& hypers, std::uint64_t seed) {
    hypers.validate();
    const std::size_t N = dataset.num_genes();
    const std::size_t T = dataset.num_times();
    if (N < 1 || T < 1) throw ArgumentError("init_chain: empty dataset");
    HdpChain chain(dataset.values, hypers, empty_state(seed, hypers));
    sequential_fill(chain, N, T);
    chain.refresh_emission_stats();
    return chain;
}

HdpChain init_chain_quantile(const ExpressionDataset& dataset, const HdpHyperParams& hypers, std::uint64_t seed,
                             std::size_t n_states) {
    hypers.validate();
    const std::size_t N = dataset.num_genes();
    const std::size_t T = dataset.num_times();
    if (N < 1 || T < 1) throw ArgumentError("init_chain_quantile: empty dataset");
    if (n_states < 1) throw ArgumentError("init_chain_quantile: need at least one state");
    const auto values = dataset.values.data();
    std::vector<double> sorted(values.begin(), values.end());
    std::sort(sorted.begin(), sorted.end());
    std::vector<std::vector<int>> bins(N, std::vector<int>(T));
    std::vector<int> used(n_states, 0);
    for (std::size_t g = 0; g < N; ++g)
        for (std::size_t t = 0; t < T; ++t) {
            const auto rank = static_cast<std::size_t>(
                std::lower_bound(sorted.begin(), sorted.end(), dataset.values(g, t)) - sorted.begin());
            bins[g][t] = static_cast<int>(rank * n_states / sorted.size());
            used[bins[g][t]] = 1;
        }
    std::vector<int> relabel(n_states, -1);
    int K = 0;
    for (std::size_t b = 0; b < n_states; ++b)
        if (used[b]) relabel[b] = K++;
    for (auto& row : bins)
        for (int& v : row) v = relabel[v];

    HdpChainState prior = empty_state(seed, hypers);
    HdpChain chain = HdpChain::from_assignments(dataset.values, hypers, std::move(bins),
                                                std::vector<double>(K + 1, 1.0 / (K + 1)), prior.alpha0,
                                                prior.gamma, 0);
    chain.mutable_state().rng = prior.rng;
    chain.resample_beta();
    return chain;
}

HdpChain sample_prior_chain(std::size_t n_sequences, std::size_t length, const HdpHyperParams& hypers,
                            std::uint64_t seed) {
    hypers.validate();
    if (n_sequences < 1 || length < 1) throw ArgumentError("sample_prior_chain: empty shape");
    HdpChain chain(Matrix(n_sequences, length), hypers, empty_state(seed, hypers));
    sequential_fill(chain, n_sequences, length);
    resample_observations_given_states(chain);
    return chain;
}

void resample_observations_given_states(HdpChain& chain) {
    auto& st = chain.mutable_state();
    const NigPrior& p = chain.hypers().emission_base;
    const std::size_t K = st.num_states();
    std::vector<double> mu(K), sd(K);
    for (std::size_t k = 0; k < K; ++k) {
        const double var = 1.0 / sample_gamma(st.rng, p.shape, p.scale);
        mu[k] = sample_normal(st.rng, p.mean, std::sqrt(var / p.strength));
        sd[k] = std::sqrt(var);
    }
    Matrix y(chain.observations().rows(), chain.observations().cols());
    for (std::size_t g = 0; g < y.rows(); ++g)
        for (std::size_t t = 0; t < y.cols(); ++t) {
            const int v = st.assignments[g][t];
            y(g, t) = sample_normal(st.rng, mu[v], sd[v]);
        }
    chain.set_observations(std::move(y));
}

PosteriorSampleSet run_chain(const ExpressionDataset& dataset, const HdpHyperParams& hypers, std::uint64_t seed,
                             const SampleSchedule& schedule, const ChainInit& init, const SweepObserver& observer) {
    if (schedule.n_samples < 1) throw ArgumentError("run_chain: n_samples must be >= 1");
    HdpChain chain = init.kind == ChainInit::Kind::quantile ? init_chain_quantile(dataset, hypers, seed, init.states)
                                                            : init_chain(dataset, hypers, seed);
    std::size_t sweep = 0;
    auto step = [&] {
        chain.gibbs_sweep();
        ++sweep;
        if (observer) observer(chain, sweep);
    };
    for (std::size_t i = 0; i < schedule.burn_in; ++i) step();
    PosteriorSampleSet out;
    out.schedule = schedule;
    out.samples.reserve(schedule.n_samples);
    out.samples.push_back(chain.snapshot());
    const std::size_t gap = std::max<std::size_t>(schedule.spacing, 1);
    for (std::size_t s = 1; s < schedule.n_samples; ++s) {
        for (std::size_t i = 0; i < gap; ++i) step();
        out.samples.push_back(chain.snapshot());
    }
    return out;
}

// ---------------------------------------------------------------------------
// Posterior summaries

Matrix empirical_dissimilarity(const PosteriorSampleSet& samples) {
    const std::size_t S = samples.samples.size();
    if (S == 0) throw ArgumentError("empirical_dissimilarity: no samples");
    const std::size_t N = samples.samples.front().trajectories.size();
    const std::size_t T = N > 0 ? samples.samples.front().trajectories.front().size() : 0;
    for (const auto& s : samples.samples) {
        if (s.trajectories.size() != N) throw ArgumentError("snapshots disagree on gene count");
        for (const auto& row : s.trajectories)
            if (row.size() != T) throw ArgumentError("snapshots disagree on sequence length");
    }
    // Per gene, a samples x T block of states.
    std::vector<std::vector<std::int32_t>> blocks(N, std::vector<std::int32_t>(S * T));
    for (std::size_t s = 0; s < S; ++s)
        for (std::size_t g = 0; g < N; ++g)
            std::copy(samples.samples[s].trajectories[g].begin(), samples.samples[s].trajectories[g].end(),
                      blocks[g].begin() + static_cast<std::ptrdiff_t>(s * T));

    const double floor_p = 1.0 / static_cast<double>(S + 1);
    const double inv_s = 1.0 / static_cast<double>(S);
    const auto& kern = kernels::active();
    Matrix D(N, N, 0.0);
    std::vector<std::int64_t> counts(T);
    for (std::size_t c = 0; c < N; ++c)
        for (std::size_t d = c + 1; d < N; ++d) {
            std::fill(counts.begin(), counts.end(), 0);
            kern.count_matches(blocks[c].data(), blocks[d].data(), S, T, counts.data());
            double total = 0.0;
            for (std::size_t t = 0; t < T; ++t) {
                const double p = counts[t] == static_cast<std::int64_t>(S)
                                     ? 1.0
                                     : std::max(static_cast<double>(counts[t]) * inv_s, floor_p);
                total -= std::log(p);
            }
            D(c, d) = total + 0.0;
            D(d, c) = D(c, d);
        }
    return D;
}

std::map<std::size_t, std::size_t> represented_state_histogram(const PosteriorSampleSet& samples) {
    if (samples.samples.empty()) throw ArgumentError("represented_state_histogram: no samples");
    std::map<std::size_t, std::size_t> hist;
    for (const auto& s : samples.samples) ++hist[s.num_states];
    return hist;
}

EmpiricalTransitions empirical_transition_matrix(const PosteriorSampleSet& samples, double threshold) {
    if (samples.samples.empty()) throw ArgumentError("empirical_transition_matrix: no samples");
    if (!(threshold >= 0.0 && threshold <= 1.0)) throw ArgumentError("threshold must lie in [0, 1]");

    std::vector<double> ref = samples.samples.front().state_means;
    std::vector<std::vector<std::size_t>> maps;
    maps.reserve(samples.samples.size());
    for (const auto& snap : samples.samples) {
        const std::size_t K = snap.num_states;
        std::vector<std::size_t> map(K, std::numeric_limits<std::size_t>::max());
        std::vector<std::tuple<double, std::size_t, std::size_t>> pairs;
        for (std::size_t k = 0; k < K; ++k)
            for (std::size_t j = 0; j < ref.size(); ++j)
                pairs.emplace_back(std::abs(snap.state_means[k] - ref[j]), k, j);
        std::sort(pairs.begin(), pairs.end());
        std::vector<bool> ref_used(ref.size(), false);
        for (const auto& [cost, k, j] : pairs) {
            if (map[k] != std::numeric_limits<std::size_t>::max() || ref_used[j]) continue;
            map[k] = j;
            ref_used[j] = true;
        }
        for (std::size_t k = 0; k < K; ++k)
            if (map[k] == std::numeric_limits<std::size_t>::max()) {
                map[k] = ref.size();
                ref.push_back(snap.state_means[k]);
            }
        maps.push_back(std::move(map));
    }

    const std::size_t M = ref.size();
    Matrix counts(M, M, 0.0);
    for (std::size_t s = 0; s < samples.samples.size(); ++s)
        for (const auto& traj : samples.samples[s].trajectories)
            for (std::size_t t = 1; t < traj.size(); ++t) counts(maps[s][traj[t - 1]], maps[s][traj[t]]) += 1.0;

    EmpiricalTransitions out{Matrix(M, M, 0.0), Matrix(M, M, 0.0), 0.0};
    for (std::size_t i = 0; i < M; ++i) {
        const auto row = counts.row(i);
        const double tot = std::accumulate(row.begin(), row.end(), 0.0);
        if (tot == 0.0) continue;
        for (std::size_t j = 0; j < M; ++j) {
            out.probabilities(i, j) = row[j] / tot;
            out.thresholded(i, j) = out.probabilities(i, j) > threshold ? out.probabilities(i, j) : 0.0;
        }
    }
    std::size_t nz = 0;
    for (double v : out.thresholded.data()) nz += v > 0.0 ? 1 : 0;
    out.nonzero_fraction = M == 0 ? 0.0 : static_cast<double>(nz) / static_cast<double>(M * M);
    return out;
}

// ---------------------------------------------------------------------------
// Persistence

void write_snapshots(std::ostream& out, const PosteriorSampleSet& samples) {
    const auto& sch = samples.schedule;
    out << "snapshots " << samples.samples.size() << " burn_in " << sch.burn_in << " n_samples " << sch.n_samples
        << " spacing " << sch.spacing << '\n';
    for (std::size_t i = 0; i < samples.samples.size(); ++i) {
        const auto& s = samples.samples[i];
        const std::size_t N = s.trajectories.size();
        const std::size_t T = N ? s.trajectories.front().size() : 0;
        out << "snapshot " << i << " K " << s.num_states << " alpha0 " << format_double(s.alpha0) << " gamma "
            << format_double(s.gamma) << " genes " << N << " length " << T << '\n';
        out << "beta";
        for (double b : s.beta) out << ' ' << format_double(b);
        out << "\nmeans";
        for (double m : s.state_means) out << ' ' << format_double(m);
        out << '\n';
        for (const auto& row : s.trajectories) {
            for (std::size_t t = 0; t < row.size(); ++t) out << (t ? " " : "") << row[t];
            out << '\n';
        }
    }
}

PosteriorSampleSet read_snapshots(std::istream& in) {
    PosteriorSampleSet out;
    std::string tag;
    std::size_t count = 0;
    auto expect = [&](const char* word) {
        if (!(in >> tag) || tag != word) throw ParseError(std::string("snapshots: expected '") + word + "'");
    };
    expect("snapshots");
    in >> count;
    expect("burn_in");
    in >> out.schedule.burn_in;
    expect("n_samples");
    in >> out.schedule.n_samples;
    expect("spacing");
    in >> out.schedule.spacing;
    if (!in) throw ParseError("snapshots: malformed header");
    for (std::size_t i = 0; i < count; ++i) {
        HdpSnapshot s;
        std::size_t idx = 0, N = 0, T = 0;
        expect("snapshot");
        in >> idx;
        expect("K");
        in >> s.num_states;
        expect("alpha0");
        in >> s.alpha0;
        expect("gamma");
        in >> s.gamma;
        expect("genes");
        in >> N;
        expect("length");
        in >> T;
        expect("beta");
        s.beta.resize(s.num_states + 1);
        for (double& b : s.beta) in >> b;
        expect("means");
        s.state_means.resize(s.num_states);
        for (double& m : s.state_means) in >> m;
        s.trajectories.assign(N, std::vector<int>(T));
        for (auto& row : s.trajectories)
            for (int& v : row) {
                in >> v;
                if (v < 0 || static_cast<std::size_t>(v) >= s.num_states) throw ParseError("snapshots: state out of range");
            }
        if (!in) throw ParseError("snapshots: truncated snapshot " + std::to_string(i));
        out.samples.push_back(std::move(s));
    }
    return out;
}

}  // namespace hdphmm
