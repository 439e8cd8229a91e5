#include <algorithm>
#include <cmath>
#include <numbers>
#include <sstream>

#include "doctest.h"
#include "hdphmm/errors.hpp"
#include "hdphmm/finite_hmm.hpp"
#include "hdphmm/random.hpp"
#include "oracles.hpp"

using namespace hdphmm;

namespace {

std::vector<double> random_simplex(Rng& rng, std::size_t k) {
    std::vector<double> ones(k, 1.0);
    return sample_dirichlet(rng, ones);
}

FiniteHmmModel random_model(Rng& rng, std::size_t k) {
    FiniteHmmModel m;
    m.initial = random_simplex(rng, k);
    m.transition = Matrix(k, k);
    for (std::size_t i = 0; i < k; ++i) {
        auto row = random_simplex(rng, k);
        for (std::size_t j = 0; j < k; ++j) m.transition(i, j) = row[j];
    }
    for (std::size_t i = 0; i < k; ++i) {
        m.emission_means.push_back(sample_normal(rng, 0, 2));
        m.emission_vars.push_back(0.2 + 2 * sample_uniform(rng));
    }
    return m;
}

ExpressionDataset random_dataset(Rng& rng, std::size_t n, std::size_t T) {
    ExpressionDataset ds;
    ds.values = Matrix(n, T);
    for (std::size_t i = 0; i < n; ++i) {
        ds.gene_ids.push_back("g" + std::to_string(i));
        for (std::size_t t = 0; t < T; ++t) ds.values(i, t) = sample_normal(rng, 0, 2);
    }
    for (std::size_t t = 0; t < T; ++t) ds.time_labels.push_back("t" + std::to_string(t));
    return ds;
}

StateMarginals marginals_from(const Matrix& p) { return {p, 0.0}; }

}  // namespace

TEST_CASE("init_model is deterministic and valid") {
    Rng rng(1);
    const auto ds = random_dataset(rng, 10, 6);
    const auto a = init_model(ds, 3, 5), b = init_model(ds, 3, 5);
    CHECK(a.transition == b.transition);
    CHECK(a.emission_means == b.emission_means);
    for (std::uint64_t seed = 0; seed < 100; ++seed) CHECK_NOTHROW(init_model(ds, 3, seed).validate());
    const auto one = init_model(ds, 1, 9);
    CHECK(one.initial == std::vector<double>{1.0});
    CHECK(one.transition(0, 0) == 1.0);
    CHECK_THROWS_AS(init_model(ds, 0, 1), ArgumentError);
}

TEST_CASE("model validation and text round trip") {
    Rng rng(2);
    auto m = random_model(rng, 3);
    std::stringstream ss;
    write_model(ss, m);
    const auto back = read_model(ss);
    CHECK(back.initial == m.initial);
    CHECK(back.transition == m.transition);
    CHECK(back.emission_means == m.emission_means);
    CHECK(back.emission_vars == m.emission_vars);

    auto bad = m;
    bad.initial[0] += 0.1;
    CHECK_THROWS_AS(bad.validate(), ValidationError);
    bad = m;
    bad.emission_vars[1] = kVarianceFloor / 2;
    CHECK_THROWS_AS(bad.validate(), ValidationError);
}

TEST_CASE("forward_backward degenerate cases") {
    FiniteHmmModel one{{1.0}, Matrix(1, 1, 1.0), {0.5}, {2.0}};
    const std::vector<double> y{0.1, -1.0, 3.0};
    const auto r = forward_backward(one, y);
    double ll = 0.0;
    for (double v : y) ll += -0.5 * std::log(2 * std::numbers::pi * 2.0) - 0.5 * (v - 0.5) * (v - 0.5) / 2.0;
    CHECK(r.log_likelihood == doctest::Approx(ll).epsilon(1e-13));
    for (std::size_t t = 0; t < 3; ++t) CHECK(r.posterior(t, 0) == 1.0);

    FiniteHmmModel twin{{0.5, 0.5}, Matrix(2, 2, 0.5), {1.0, 1.0}, {1.0, 1.0}};
    const auto h = forward_backward(twin, y);
    for (std::size_t t = 0; t < 3; ++t) CHECK(h.posterior(t, 1) == doctest::Approx(0.5).epsilon(1e-15));

    CHECK_THROWS_AS(forward_backward(one, std::vector<double>{1.0, NAN}), ArgumentError);
}

TEST_CASE("forward_backward equals path enumeration") {
    Rng rng(10);
    for (int rep = 0; rep < 60; ++rep) {
        const std::size_t k = 1 + rep % 3, T = 1 + rep % 6;
        const auto m = random_model(rng, k);
        std::vector<double> y(T);
        for (auto& v : y) v = sample_normal(rng, 0, 2);
        const auto fb = forward_backward(m, y);
        const auto ex = oracle::enumerate_paths(m, y);
        CHECK(std::abs(fb.log_likelihood - ex.log_likelihood) < 1e-10);
        for (std::size_t t = 0; t < T; ++t) {
            double sum = 0.0;
            for (std::size_t r = 0; r < k; ++r) {
                CHECK(std::abs(fb.posterior(t, r) - ex.marginals(t, r)) < 1e-10);
                sum += fb.posterior(t, r);
            }
            CHECK(std::abs(sum - 1.0) < 1e-8);
        }
    }
}

TEST_CASE("forward_backward does not underflow on long sequences") {
    Rng rng(11);
    const auto m = random_model(rng, 3);
    std::vector<double> y(500);
    for (auto& v : y) v = sample_normal(rng, 0, 5);
    const auto fb = forward_backward(m, y);
    CHECK(std::isfinite(fb.log_likelihood));
    for (std::size_t t = 0; t < 500; ++t) {
        double s = 0;
        for (std::size_t r = 0; r < 3; ++r) s += fb.posterior(t, r);
        CHECK(std::abs(s - 1) < 1e-8);
    }
}

TEST_CASE("baum_welch with k=1 reaches the closed form") {
    Rng rng(12);
    const auto ds = random_dataset(rng, 6, 5);
    const auto fit = baum_welch(ds, 1, 1);
    double mean = 0, var = 0;
    for (double v : ds.values.data()) mean += v;
    mean /= 30;
    for (double v : ds.values.data()) var += (v - mean) * (v - mean);
    var /= 30;
    CHECK(fit.model.emission_means[0] == doctest::Approx(mean).epsilon(1e-12));
    CHECK(fit.model.emission_vars[0] == doctest::Approx(var).epsilon(1e-12));
}

TEST_CASE("baum_welch traces never decrease") {
    Rng rng(13);
    for (int rep = 0; rep < 8; ++rep) {
        const auto ds = random_dataset(rng, 5 + rep, 6);
        const auto fit = baum_welch(ds, 1 + rep % 5, 100 + rep, 1e-9, 200);
        for (std::size_t i = 1; i < fit.log_likelihood_trace.size(); ++i)
            CHECK(fit.log_likelihood_trace[i] >= fit.log_likelihood_trace[i - 1] - 1e-8);
        CHECK_NOTHROW(fit.model.validate());
    }
}

TEST_CASE("baum_welch recovers well separated means") {
    FiniteHmmModel truth{{1.0 / 3, 1.0 / 3, 1.0 / 3}, Matrix(3, 3, 0.1), {-5, 0, 5}, {0.25, 0.25, 0.25}};
    for (std::size_t i = 0; i < 3; ++i) truth.transition(i, i) = 0.8;
    SyntheticSpec spec{40, 12, {truth}, {}, 21};
    const auto ds = generate_synthetic(spec).dataset;
    double best = -INFINITY;
    FiniteHmmModel fit;
    for (std::uint64_t seed = 1; seed <= 7; ++seed) {
        auto r = baum_welch(ds, 3, seed);
        if (r.log_likelihood_trace.back() > best) best = r.log_likelihood_trace.back(), fit = r.model;
    }
    auto means = fit.emission_means;
    std::sort(means.begin(), means.end());
    CHECK(std::abs(means[0] + 5) < 0.3);
    CHECK(std::abs(means[1]) < 0.3);
    CHECK(std::abs(means[2] - 5) < 0.3);
}

TEST_CASE("log_similarity properties") {
    Matrix onehot(4, 3, 0.0);
    for (std::size_t t = 0; t < 4; ++t) onehot(t, t % 3) = 1.0;
    CHECK(log_similarity(marginals_from(onehot), marginals_from(onehot)) == 0.0);

    Matrix uni(5, 4, 0.25);
    CHECK(std::abs(log_similarity(marginals_from(uni), marginals_from(uni)) + 5 * std::log(4.0)) < 1e-12);

    Rng rng(14);
    for (int rep = 0; rep < 50; ++rep) {
        Matrix a(3, 4), b(3, 4);
        for (std::size_t t = 0; t < 3; ++t) {
            auto ra = random_simplex(rng, 4), rb = random_simplex(rng, 4);
            for (std::size_t r = 0; r < 4; ++r) a(t, r) = ra[r], b(t, r) = rb[r];
        }
        double direct = 0.0;
        for (std::size_t t = 0; t < 3; ++t) {
            double s = 0.0;
            for (std::size_t r = 0; r < 4; ++r) s += a(t, r) * b(t, r);
            direct += std::log(s);
        }
        const double ab = log_similarity(marginals_from(a), marginals_from(b));
        CHECK(ab == log_similarity(marginals_from(b), marginals_from(a)));
        CHECK(std::abs(ab - direct) < 1e-12);
        CHECK(ab <= 0.0);
    }

    Matrix c(2, 2, 0.0), d(2, 2, 0.0);
    c(0, 0) = c(1, 0) = 1;
    d(0, 1) = d(1, 1) = 1;
    CHECK(log_similarity(marginals_from(c), marginals_from(d)) == -INFINITY);
    CHECK_THROWS_AS(log_similarity(marginals_from(c), marginals_from(uni)), ArgumentError);
}

TEST_CASE("dissimilarity_matrix") {
    Rng rng(15);
    const auto ds = random_dataset(rng, 5, 4);
    FiniteHmmModel one{{1.0}, Matrix(1, 1, 1.0), {0.0}, {1.0}};
    const auto z = dissimilarity_matrix(one, ds);
    for (double v : z.data()) CHECK(v == 0.0);

    const auto m = random_model(rng, 3);
    const auto d = dissimilarity_matrix(m, ds);
    for (std::size_t c = 0; c < 5; ++c)
        for (std::size_t e = 0; e < 5; ++e) {
            const auto mc = forward_backward(m, ds.values.row(c));
            const auto me = forward_backward(m, ds.values.row(e));
            CHECK(std::abs(d(c, e) + log_similarity(mc, me)) < 1e-12);
            CHECK(d(c, e) == d(e, c));
        }

    auto twin = ds;
    for (std::size_t t = 0; t < 4; ++t) twin.values(1, t) = twin.values(0, t);
    const auto dt = dissimilarity_matrix(m, twin);
    CHECK(dt(0, 1) == dt(0, 0));

    // Relabeling hidden states does not change the matrix.
    const auto p = m.permuted({2, 0, 1});
    const auto dp = dissimilarity_matrix(p, ds);
    for (std::size_t i = 0; i < 25; ++i) CHECK(std::abs(dp.data()[i] - d.data()[i]) < 1e-9);
}

TEST_CASE("nonzero_fraction counts strictly larger entries") {
    Matrix m(2, 2, 0.0);
    m(0, 1) = 1.0;
    m(1, 1) = 1e-3;
    CHECK(nonzero_fraction(m, 0.0) == 0.5);
    CHECK(nonzero_fraction(m, 1e-3) == 0.25);
}
