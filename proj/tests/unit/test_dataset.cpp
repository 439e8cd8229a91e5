#include <cmath>
#include <fstream>

#include "doctest.h"
#include "hdphmm/dataset.hpp"
#include "hdphmm/errors.hpp"
#include "hdphmm/random.hpp"
#include "temp_dir.hpp"

using namespace hdphmm;

namespace {

FiniteHmmModel single_state(double mean, double var) {
    FiniteHmmModel m;
    m.initial = {1.0};
    m.transition = Matrix(1, 1, 1.0);
    m.emission_means = {mean};
    m.emission_vars = {var};
    return m;
}

}  // namespace

TEST_CASE("parse_dataset reads ids, values and labels") {
    const auto ds = parse_dataset("id\tt1\tt2\tt3\tt4\ng1\t1\t2\t3\t4\ng2\t5\t6\t7\t8\ng3\t0\t0\t1\t-1\n",
                                  TextFormat::tsv);
    CHECK(ds.num_genes() == 3);
    CHECK(ds.num_times() == 4);
    CHECK(ds.gene_ids == std::vector<std::string>{"g1", "g2", "g3"});
    CHECK(ds.values(1, 2) == 7.0);
    CHECK_FALSE(ds.truth_labels.has_value());

    const auto lab = parse_dataset("id,a,b,label\ng1,1,2,1\ng2,3,4,1\ng3,5,6,2\n", TextFormat::csv);
    REQUIRE(lab.truth_labels.has_value());
    CHECK(*lab.truth_labels == std::vector<int>{1, 1, 2});
    CHECK(lab.num_times() == 2);
}

TEST_CASE("parse_dataset rejects malformed input") {
    CHECK_THROWS_AS(parse_dataset("id,a,b\ng1,1,2\ng1,3,4\n", TextFormat::csv), ValidationError);
    CHECK_THROWS_AS(parse_dataset("id,a,b\ng1,1,2\ng2,3\n", TextFormat::csv), ParseError);
    CHECK_THROWS_AS(parse_dataset("id,a,b\ng1,1,2\ng2,3,x\n", TextFormat::csv), ParseError);
    try {
        parse_dataset("id,a,b\ng1,1,2\ng2,3,x\n", TextFormat::csv);
    } catch (const ParseError& e) {
        CHECK(std::string(e.what()).find("g2") != std::string::npos);
    }
}

TEST_CASE("load_dataset and save_dataset round trip") {
    TempDir dir;
    ExpressionDataset ds;
    ds.gene_ids = {"a", "b"};
    ds.time_labels = {"t1", "t2", "t3"};
    ds.values = Matrix(2, 3);
    ds.values(0, 0) = 0.1;
    ds.values(0, 1) = 1.0 / 3.0;
    ds.values(0, 2) = -2.5e-7;
    ds.values(1, 0) = 4;
    ds.values(1, 1) = 5;
    ds.values(1, 2) = 6;
    ds.truth_labels = std::vector<int>{1, -1};
    save_dataset(ds, dir.file("d.csv"), TextFormat::csv);
    const auto back = load_dataset(dir.file("d.csv"), TextFormat::csv);
    CHECK(back.values == ds.values);
    CHECK(back.gene_ids == ds.gene_ids);
    CHECK(*back.truth_labels == *ds.truth_labels);
    CHECK_THROWS_AS(load_dataset(dir.file("missing.tsv"), TextFormat::tsv), IoError);
}

TEST_CASE("normalize_t1 scales each row by its first value") {
    auto ds = parse_dataset("id\ta\tb\tc\ng1\t2\t4\t6\ng2\t1\t5\t-2\n", TextFormat::tsv);
    const auto n = normalize_t1(ds);
    CHECK(n.values(0, 0) == 1.0);
    CHECK(n.values(0, 1) == 2.0);
    CHECK(n.values(0, 2) == 3.0);
    CHECK(n.values(1, 1) == 5.0);
    CHECK(n.values(1, 2) == -2.0);
    CHECK(normalize_t1(n).values == n.values);
    CHECK(n.gene_ids == ds.gene_ids);

    auto bad = parse_dataset("id\ta\tb\tc\ng1\t2\t4\t6\nzero\t0\t3\t3\n", TextFormat::tsv);
    try {
        normalize_t1(bad);
        FAIL("expected NormalizationError");
    } catch (const NormalizationError& e) {
        CHECK(std::string(e.what()).find("zero") != std::string::npos);
    }
}

TEST_CASE("normalize_t1 is idempotent on random data") {
    Rng rng(3);
    ExpressionDataset ds;
    ds.values = Matrix(20, 6);
    for (std::size_t i = 0; i < 20; ++i) {
        ds.gene_ids.push_back("g" + std::to_string(i));
        for (std::size_t t = 0; t < 6; ++t) ds.values(i, t) = 0.5 + sample_uniform(rng) * 3;
    }
    for (std::size_t t = 0; t < 6; ++t) ds.time_labels.push_back("t" + std::to_string(t));
    const auto once = normalize_t1(ds);
    const auto twice = normalize_t1(once);
    for (std::size_t i = 0; i < 20; ++i) {
        CHECK(once.values(i, 0) == 1.0);
        for (std::size_t t = 0; t < 6; ++t) CHECK(twice.values(i, t) == doctest::Approx(once.values(i, t)).epsilon(1e-15));
    }
}

TEST_CASE("generate_synthetic is deterministic and follows the model") {
    SyntheticSpec spec;
    spec.n_sequences = 2;
    spec.seq_length = 3;
    spec.models = {single_state(0.0, 1.0)};
    spec.seed = 7;
    const auto a = generate_synthetic(spec);
    const auto b = generate_synthetic(spec);
    CHECK(a.dataset.values == b.dataset.values);
    CHECK(a.dataset.num_genes() == 2);
    CHECK(a.dataset.num_times() == 3);

    spec.models = {single_state(5.0, kVarianceFloor)};
    const auto c = generate_synthetic(spec);
    for (double v : c.dataset.values.data()) CHECK(std::abs(v - 5.0) < 0.01);
}

TEST_CASE("generate_synthetic per-state means match the generating model") {
    FiniteHmmModel m;
    m.initial = {1.0 / 3, 1.0 / 3, 1.0 / 3};
    m.transition = Matrix(3, 3, 0.05);
    for (std::size_t i = 0; i < 3; ++i) m.transition(i, i) = 0.9;
    m.emission_means = {-5, 0, 5};
    m.emission_vars = {0.1, 0.1, 0.1};
    SyntheticSpec spec{30, 12, {m}, {}, 11};
    const auto s = generate_synthetic(spec);
    double sum[3] = {0, 0, 0}, cnt[3] = {0, 0, 0};
    for (std::size_t i = 0; i < 30; ++i)
        for (std::size_t t = 0; t < 12; ++t) {
            const int st = s.trajectories[i][t];
            sum[st] += s.dataset.values(i, t);
            cnt[st] += 1;
        }
    for (int k = 0; k < 3; ++k) {
        REQUIRE(cnt[k] > 0);
        CHECK(std::abs(sum[k] / cnt[k] - m.emission_means[static_cast<std::size_t>(k)]) < 0.2);
    }
    REQUIRE(s.dataset.truth_labels.has_value());
    for (int l : *s.dataset.truth_labels) CHECK(l == 1);
}

TEST_CASE("matrix persistence round trips exactly") {
    TempDir dir;
    Matrix m(2, 2, 0.0);
    m(0, 1) = m(1, 0) = 1.0;
    save_matrix(m, dir.file("m.tsv"));
    CHECK(load_matrix(dir.file("m.tsv")) == m);

    Matrix bad(2, 2, 0.0);
    bad(0, 1) = 1;
    bad(1, 0) = 2;
    CHECK_THROWS_AS(save_matrix(bad, dir.file("bad.tsv")), ValidationError);

    Rng rng(5);
    for (int rep = 0; rep < 20; ++rep) {
        Matrix r(5, 5);
        for (std::size_t i = 0; i < 5; ++i)
            for (std::size_t j = i; j < 5; ++j) r(i, j) = r(j, i) = sample_normal(rng, 0, 1e3) * sample_uniform(rng);
        save_matrix(r, dir.file("r.tsv"));
        CHECK(load_matrix(dir.file("r.tsv")) == r);
    }
    CHECK_THROWS_AS(save_matrix(m, (dir.path() / "no" / "such" / "dir.tsv").string()), IoError);
}

TEST_CASE("format_double parses back to the same value") {
    Rng rng(9);
    for (int i = 0; i < 1000; ++i) {
        const double v = sample_normal(rng, 0, 1) * std::pow(10.0, sample_normal(rng, 0, 5));
        CHECK(std::stod(format_double(v)) == v);
    }
}
