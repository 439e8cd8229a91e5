#include "hdphmm/finite_hmm.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <numeric>

#include "hdphmm/errors.hpp"
#include "hdphmm/kernels.hpp"
#include "hdphmm/random.hpp"

namespace hdphmm {
namespace {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();

double log_normal_pdf(double y, double mean, double var) {
    const double d = y - mean;
    return -0.5 * (std::log(2.0 * std::numbers::pi * var) + d * d / var);
}

double log_sum_exp(std::span<const double> v) {
    const double m = *std::max_element(v.begin(), v.end());
    if (m == kNegInf) return kNegInf;
    double s = 0.0;
    for (double x : v) s += std::exp(x - m);
    return m + std::log(s);
}

// Everything one forward-backward pass produces, in log space.
struct Lattice {
    Matrix log_emission;  // T x k
    Matrix log_alpha;     // T x k
    Matrix log_beta;      // T x k
    double log_likelihood = 0.0;
};

Lattice run_lattice(const FiniteHmmModel& model, const Matrix& transition_t, std::span<const double> y) {
    const std::size_t T = y.size();
    const std::size_t k = model.k();
    const auto& kern = kernels::active();

    Lattice lat{Matrix(T, k), Matrix(T, k), Matrix(T, k), 0.0};
    for (std::size_t t = 0; t < T; ++t)
        for (std::size_t j = 0; j < k; ++j)
            lat.log_emission(t, j) = log_normal_pdf(y[t], model.emission_means[j], model.emission_vars[j]);

    std::vector<double> w(k), s(k);

    for (std::size_t j = 0; j < k; ++j)
        lat.log_alpha(0, j) = std::log(model.initial[j]) + lat.log_emission(0, j);
    for (std::size_t t = 1; t < T; ++t) {
        const auto prev = lat.log_alpha.row(t - 1);
        const double m = *std::max_element(prev.begin(), prev.end());
        for (std::size_t i = 0; i < k; ++i) w[i] = std::exp(prev[i] - m);
        // s[j] = sum_i w[i] A[i][j]
        kern.vecmat(w.data(), model.transition.data().data(), k, k, s.data());
        for (std::size_t j = 0; j < k; ++j) lat.log_alpha(t, j) = m + std::log(s[j]) + lat.log_emission(t, j);
    }
    lat.log_likelihood = log_sum_exp(lat.log_alpha.row(T - 1));

    for (std::size_t j = 0; j < k; ++j) lat.log_beta(T - 1, j) = 0.0;
    for (std::size_t t = T - 1; t-- > 0;) {
        double m = kNegInf;
        for (std::size_t j = 0; j < k; ++j) {
            w[j] = lat.log_beta(t + 1, j) + lat.log_emission(t + 1, j);
            m = std::max(m, w[j]);
        }
        for (std::size_t j = 0; j < k; ++j) w[j] = std::exp(w[j] - m);
        // s[i] = sum_j A[i][j] w[j], via the transposed matrix
        kern.vecmat(w.data(), transition_t.data().data(), k, k, s.data());
        for (std::size_t i = 0; i < k; ++i) lat.log_beta(t, i) = m + std::log(s[i]);
    }
    return lat;
}

void check_sequence(std::span<const double> y) {
    if (y.empty()) throw ArgumentError("forward_backward: empty sequence");
    for (double v : y)
        if (!std::isfinite(v)) throw ArgumentError("forward_backward: non-finite observation");
}

Matrix marginals_from(const Lattice& lat) {
    const std::size_t T = lat.log_alpha.rows();
    const std::size_t k = lat.log_alpha.cols();
    Matrix post(T, k);
    for (std::size_t t = 0; t < T; ++t) {
        double sum = 0.0;
        for (std::size_t j = 0; j < k; ++j) {
            post(t, j) = std::exp(lat.log_alpha(t, j) + lat.log_beta(t, j) - lat.log_likelihood);
            sum += post(t, j);
        }
        for (std::size_t j = 0; j < k; ++j) post(t, j) /= sum;
    }
    return post;
}

double global_variance(const Matrix& values, double& mean_out) {
    const auto all = values.data();
    const double n = static_cast<double>(all.size());
    const double mean = std::accumulate(all.begin(), all.end(), 0.0) / n;
    double ss = 0.0;
    for (double v : all) ss += (v - mean) * (v - mean);
    mean_out = mean;
    return ss / n;
}

// State-major copy of a T x k posterior, the layout overlap_per_time expects.
std::vector<double> state_major(const Matrix& posterior) {
    const std::size_t T = posterior.rows();
    const std::size_t k = posterior.cols();
    std::vector<double> out(T * k);
    for (std::size_t t = 0; t < T; ++t)
        for (std::size_t r = 0; r < k; ++r) out[r * T + t] = posterior(t, r);
    return out;
}

double log_overlap(const double* a, const double* b, std::size_t k, std::size_t T, std::vector<double>& scratch) {
    scratch.resize(T);
    kernels::active().overlap_per_time(a, b, k, T, scratch.data());
    double total = 0.0;
    for (std::size_t t = 0; t < T; ++t) {
        if (!(scratch[t] > 0.0)) return kNegInf;
        total += std::log(scratch[t]);
    }
    return total;
}

}  // namespace

FiniteHmmModel init_model(const ExpressionDataset& dataset, std::size_t k, std::uint64_t seed) {
    if (k < 1) throw ArgumentError("init_model: k must be >= 1");
    Rng rng(seed);
    const auto values = dataset.values.data();
    if (values.empty()) throw ArgumentError("init_model: empty dataset");

    FiniteHmmModel model;
    model.emission_means.resize(k);
    // One draw from each of k equal-count strata of the sorted values, so
    // the starting means spread over the data range.
    std::vector<double> sorted(values.begin(), values.end());
    std::sort(sorted.begin(), sorted.end());
    const std::size_t n = sorted.size();
    for (std::size_t r = 0; r < k; ++r) {
        const std::size_t lo = r * n / k;
        const std::size_t hi = std::max(lo + 1, (r + 1) * n / k);
        std::uniform_int_distribution<std::size_t> pick(lo, std::min(hi, n) - 1);
        model.emission_means[r] = sorted[pick(rng)];
    }
    double mean = 0.0;
    const double var = std::max(global_variance(dataset.values, mean), kVarianceFloor);
    model.emission_vars.assign(k, var);

    const std::vector<double> ones(k, 1.0);
    model.initial = sample_dirichlet(rng, ones);
    model.transition = Matrix(k, k);
    for (std::size_t i = 0; i < k; ++i) {
        const auto row = sample_dirichlet(rng, ones);
        std::copy(row.begin(), row.end(), model.transition.row(i).begin());
    }
    return model;
}

StateMarginals forward_backward(const FiniteHmmModel& model, std::span<const double> sequence) {
    check_sequence(sequence);
    const Lattice lat = run_lattice(model, model.transition.transposed(), sequence);
    return {marginals_from(lat), lat.log_likelihood};
}

BaumWelchResult baum_welch(const ExpressionDataset& dataset, std::size_t k, std::uint64_t seed, double tol,
                           std::size_t max_iter) {
    return baum_welch_from(dataset, init_model(dataset, k, seed), tol, max_iter);
}

BaumWelchResult baum_welch_from(const ExpressionDataset& dataset, FiniteHmmModel model, double tol,
                                std::size_t max_iter) {
    if (!(tol > 0.0)) throw ArgumentError("baum_welch: tol must be > 0");
    if (max_iter < 1) throw ArgumentError("baum_welch: max_iter must be >= 1");
    const std::size_t k = model.k();
    if (k < 1) throw ArgumentError("baum_welch: k must be >= 1");
    const std::size_t N = dataset.num_genes();
    const std::size_t T = dataset.num_times();
    for (std::size_t g = 0; g < N; ++g) check_sequence(dataset.values.row(g));

    BaumWelchResult result;
    std::vector<Matrix> posts(N);
    for (std::size_t iter = 0; iter < max_iter; ++iter) {
        // E step
        const Matrix at = model.transition.transposed();
        std::vector<double> init_acc(k, 0.0);
        Matrix xi_acc(k, k, 0.0);
        double total_ll = 0.0;
        for (std::size_t g = 0; g < N; ++g) {
            const auto y = dataset.values.row(g);
            const Lattice lat = run_lattice(model, at, y);
            total_ll += lat.log_likelihood;
            posts[g] = marginals_from(lat);
            for (std::size_t r = 0; r < k; ++r) init_acc[r] += posts[g](0, r);
            for (std::size_t t = 0; t + 1 < T; ++t)
                for (std::size_t i = 0; i < k; ++i) {
                    const double a = lat.log_alpha(t, i) - lat.log_likelihood;
                    if (a == kNegInf) continue;
                    for (std::size_t j = 0; j < k; ++j) {
                        const double aij = model.transition(i, j);
                        if (aij == 0.0) continue;
                        xi_acc(i, j) +=
                            std::exp(a + lat.log_emission(t + 1, j) + lat.log_beta(t + 1, j)) * aij;
                    }
                }
        }
        result.log_likelihood_trace.push_back(total_ll);
        const std::size_t n = result.log_likelihood_trace.size();
        if (n >= 2 && total_ll - result.log_likelihood_trace[n - 2] < tol) break;
        if (iter + 1 == max_iter) break;

        // M step
        const double init_total = std::accumulate(init_acc.begin(), init_acc.end(), 0.0);
        for (std::size_t r = 0; r < k; ++r) model.initial[r] = init_acc[r] / init_total;
        for (std::size_t i = 0; i < k; ++i) {
            const auto row = xi_acc.row(i);
            const double tot = std::accumulate(row.begin(), row.end(), 0.0);
            if (tot > 0.0)
                for (std::size_t j = 0; j < k; ++j) model.transition(i, j) = row[j] / tot;
        }
        for (std::size_t r = 0; r < k; ++r) {
            double w = 0.0, wy = 0.0;
            for (std::size_t g = 0; g < N; ++g)
                for (std::size_t t = 0; t < T; ++t) {
                    w += posts[g](t, r);
                    wy += posts[g](t, r) * dataset.values(g, t);
                }
            if (!(w > 0.0)) continue;  // unused state: Q does not depend on it
            const double mu = wy / w;
            double wss = 0.0;
            for (std::size_t g = 0; g < N; ++g)
                for (std::size_t t = 0; t < T; ++t) {
                    const double d = dataset.values(g, t) - mu;
                    wss += posts[g](t, r) * d * d;
                }
            model.emission_means[r] = mu;
            model.emission_vars[r] = std::max(wss / w, kVarianceFloor);
        }
    }
    result.model = std::move(model);
    return result;
}

double log_similarity(const StateMarginals& c, const StateMarginals& d) {
    if (c.length() != d.length() || c.states() != d.states())
        throw ArgumentError("log_similarity: marginals have different shapes");
    // Products commute and the per-t sum runs in state order for both
    // argument orders, so s(c,d) == s(d,c) bit for bit.
    const auto a = state_major(c.posterior);
    const auto b = state_major(d.posterior);
    std::vector<double> scratch;
    return log_overlap(a.data(), b.data(), c.states(), c.length(), scratch);
}

Matrix dissimilarity_matrix(const FiniteHmmModel& model, const ExpressionDataset& dataset) {
    const std::size_t N = dataset.num_genes();
    const std::size_t T = dataset.num_times();
    const std::size_t k = model.k();
    const Matrix at = model.transition.transposed();
    std::vector<std::vector<double>> marg(N);
    for (std::size_t g = 0; g < N; ++g) {
        const auto y = dataset.values.row(g);
        check_sequence(y);
        marg[g] = state_major(marginals_from(run_lattice(model, at, y)));
    }
    Matrix D(N, N);
    std::vector<double> scratch;
    for (std::size_t c = 0; c < N; ++c)
        for (std::size_t d = c; d < N; ++d) {
            const double s = log_overlap(marg[c].data(), marg[d].data(), k, T, scratch);
            // Overlaps can exceed 1 by an ulp; keep the matrix non-negative.
            const double v = s == kNegInf ? kDissimilarityCap : std::clamp(-s, 0.0, kDissimilarityCap) + 0.0;
            D(c, d) = v;
            D(d, c) = v;
        }
    return D;
}

double nonzero_fraction(const Matrix& matrix, double threshold) {
    const auto data = matrix.data();
    if (data.empty()) return 0.0;
    const auto hits = std::count_if(data.begin(), data.end(), [&](double v) { return v > threshold; });
    return static_cast<double>(hits) / static_cast<double>(data.size());
}

}  // namespace hdphmm
