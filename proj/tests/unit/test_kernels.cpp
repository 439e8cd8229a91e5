#include <cmath>
#include <cstring>
#include <vector>

#include "doctest.h"
#include "hdphmm/errors.hpp"
#include "hdphmm/finite_hmm.hpp"
#include "hdphmm/hdp_hmm.hpp"
#include "hdphmm/kernels.hpp"
#include "hdphmm/random.hpp"

using namespace hdphmm;
namespace kn = hdphmm::kernels;

namespace {

std::vector<const kn::KernelTable*> vector_tables() {
    std::vector<const kn::KernelTable*> out;
    if (kn::avx2_table()) out.push_back(kn::avx2_table());
    if (kn::neon_table()) out.push_back(kn::neon_table());
    return out;
}

std::vector<double> random_vec(Rng& rng, std::size_t n) {
    std::vector<double> v(n);
    for (auto& x : v) x = sample_normal(rng, 0, 1) * std::exp(sample_normal(rng, 0, 3));
    return v;
}

bool same_bits(const std::vector<double>& a, const std::vector<double>& b) {
    return a.size() == b.size() && std::memcmp(a.data(), b.data(), a.size() * sizeof(double)) == 0;
}

// RAII pin of the dispatch table.
struct PinIsa {
    explicit PinIsa(kn::Isa isa) { kn::force_isa(isa); }
    ~PinIsa() { kn::reset_isa(); }
};

}  // namespace

TEST_CASE("scalar kernels match their definitions") {
    const auto& s = kn::scalar_table();
    const double w[2] = {2, 3};
    const double m[6] = {1, 2, 3, 4, 5, 6};
    double out[3];
    s.vecmat(w, m, 2, 3, out);
    CHECK(out[0] == 14);
    CHECK(out[1] == 19);
    CHECK(out[2] == 24);

    const double a[4] = {0.5, 0.5, 1, 0};
    const double b[4] = {0.5, 0.5, 0, 1};
    double ov[2];
    s.overlap_per_time(a, b, 2, 2, ov);
    CHECK(ov[0] == 0.25);
    CHECK(ov[1] == 0.25);

    const std::int32_t x[6] = {1, 2, 3, 1, 1, 1};
    const std::int32_t y[6] = {1, 0, 3, 1, 1, 0};
    std::int64_t counts[3] = {0, 0, 0};
    s.count_matches(x, y, 2, 3, counts);
    CHECK(counts[0] == 2);
    CHECK(counts[1] == 1);
    CHECK(counts[2] == 1);

    CHECK(s.dot(m, m, 6) == 91);
}

TEST_CASE("vector kernels are bit-identical to scalar where promised") {
    Rng rng(42);
    const auto& s = kn::scalar_table();
    for (const auto* v : vector_tables()) {
        CAPTURE(kn::isa_name(v->isa));
        for (std::size_t rows = 1; rows <= 9; ++rows)
            for (std::size_t cols = 1; cols <= 11; ++cols) {
                const auto w = random_vec(rng, rows);
                const auto m = random_vec(rng, rows * cols);
                std::vector<double> o1(cols), o2(cols);
                s.vecmat(w.data(), m.data(), rows, cols, o1.data());
                v->vecmat(w.data(), m.data(), rows, cols, o2.data());
                CHECK(same_bits(o1, o2));

                const auto a = random_vec(rng, rows * cols);
                s.overlap_per_time(a.data(), m.data(), rows, cols, o1.data());
                v->overlap_per_time(a.data(), m.data(), rows, cols, o2.data());
                CHECK(same_bits(o1, o2));

                std::vector<std::int32_t> ia(rows * cols), ib(rows * cols);
                for (std::size_t i = 0; i < ia.size(); ++i) {
                    ia[i] = static_cast<std::int32_t>(sample_uniform(rng) * 3);
                    ib[i] = static_cast<std::int32_t>(sample_uniform(rng) * 3);
                }
                std::vector<std::int64_t> c1(cols, 5), c2(cols, 5);
                s.count_matches(ia.data(), ib.data(), rows, cols, c1.data());
                v->count_matches(ia.data(), ib.data(), rows, cols, c2.data());
                CHECK(c1 == c2);
            }
    }
}

TEST_CASE("vector dot agrees with scalar to rounding") {
    Rng rng(7);
    const auto& s = kn::scalar_table();
    for (const auto* v : vector_tables()) {
        for (std::size_t n = 0; n <= 67; ++n) {
            auto a = random_vec(rng, n), b = random_vec(rng, n);
            double mag = 0.0;
            for (std::size_t i = 0; i < n; ++i) mag += std::abs(a[i] * b[i]);
            CHECK(std::abs(s.dot(a.data(), b.data(), n) - v->dot(a.data(), b.data(), n)) <= 1e-14 * mag + 1e-300);
        }
    }
}

TEST_CASE("dispatch can be forced and reset") {
    CHECK(kn::available(kn::Isa::scalar));
    {
        PinIsa pin(kn::Isa::scalar);
        CHECK(kn::active().isa == kn::Isa::scalar);
    }
    CHECK(kn::parse_isa("scalar") == kn::Isa::scalar);
    CHECK(kn::parse_isa("avx2") == kn::Isa::avx2);
    CHECK_THROWS_AS(kn::parse_isa("sse9"), ArgumentError);
    for (auto isa : {kn::Isa::avx2, kn::Isa::neon})
        if (!kn::available(isa)) CHECK_THROWS_AS(kn::force_isa(isa), ArgumentError);
    kn::reset_isa();
}

TEST_CASE("forward-backward and empirical dissimilarity are identical across ISAs") {
    FiniteHmmModel m;
    m.initial = {0.2, 0.3, 0.5};
    m.transition = Matrix(3, 3, 0.1);
    for (std::size_t i = 0; i < 3; ++i) m.transition(i, i) = 0.8;
    m.emission_means = {-1, 0, 2};
    m.emission_vars = {0.5, 1, 0.7};
    SyntheticSpec spec{8, 9, {m}, {}, 3};
    const auto data = generate_synthetic(spec).dataset;

    Matrix ref_fin, ref_emp;
    {
        PinIsa pin(kn::Isa::scalar);
        ref_fin = dissimilarity_matrix(m, data);
        auto hy = HdpHyperParams::defaults_for(data, 1.0);
        ref_emp = empirical_dissimilarity(run_chain(data, hy, 4, {5, 7, 2}));
    }
    for (auto isa : {kn::Isa::avx2, kn::Isa::neon}) {
        if (!kn::available(isa)) continue;
        PinIsa pin(isa);
        CHECK(dissimilarity_matrix(m, data) == ref_fin);
        auto hy = HdpHyperParams::defaults_for(data, 1.0);
        CHECK(empirical_dissimilarity(run_chain(data, hy, 4, {5, 7, 2})) == ref_emp);
    }
}
