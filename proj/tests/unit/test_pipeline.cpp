#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "doctest.h"
#include "hdphmm/errors.hpp"
#include "hdphmm/pipeline.hpp"
#include "hdphmm/random.hpp"
#include "temp_dir.hpp"

using namespace hdphmm;

namespace {

std::string slurp(const std::string& path) {
    std::ifstream in(path);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

ExpressionDataset small_labelled(std::uint64_t seed) {
    Rng rng(seed);
    ExpressionDataset ds;
    ds.values = Matrix(9, 5);
    std::vector<int> labels;
    for (std::size_t i = 0; i < 9; ++i) {
        ds.gene_ids.push_back("g" + std::to_string(i));
        labels.push_back(static_cast<int>(i % 3) + 1);
        for (std::size_t t = 0; t < 5; ++t)
            ds.values(i, t) = 1.0 + 3.0 * static_cast<double>(i % 3) * (t % 2 ? 1 : -1) + sample_normal(rng, 0, 0.2);
    }
    for (std::size_t t = 0; t < 5; ++t) ds.time_labels.push_back("t" + std::to_string(t));
    ds.truth_labels = labels;
    return ds;
}

double pearson(std::span<const double> a, std::span<const double> b) {
    const double n = static_cast<double>(a.size());
    double sa = 0, sb = 0, saa = 0, sbb = 0, sab = 0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        sa += a[i];
        sb += b[i];
        saa += a[i] * a[i];
        sbb += b[i] * b[i];
        sab += a[i] * b[i];
    }
    return (sab - sa * sb / n) / std::sqrt((saa - sa * sa / n) * (sbb - sb * sb / n));
}

}  // namespace

TEST_CASE("config text") {
    RunConfig c;
    apply_config_text(c, "# comment\ninput = data.tsv\nmethods = eisen, finite\nk = 1..3, 5\nseeds = 1..7\n"
                         "b_gamma = 0.25,1\nburn_in = 10 # trailing\nsamples = 4\nspacing = 2\ncut_c = 2,3\n"
                         "normalize = true\nhdp_init = sequential\nout = somewhere\n");
    CHECK(c.input == "data.tsv");
    CHECK(c.methods == std::vector<std::string>{"eisen", "finite"});
    CHECK(c.k_values == std::vector<std::size_t>{1, 2, 3, 5});
    CHECK(c.seeds.size() == 7);
    CHECK(c.b_gamma == std::vector<double>{0.25, 1.0});
    CHECK(c.schedule.burn_in == 10);
    CHECK(c.schedule.n_samples == 4);
    CHECK(c.normalize);
    CHECK(c.hdp_init.kind == ChainInit::Kind::sequential);
    CHECK(c.out_dir == "somewhere");
    CHECK_NOTHROW(c.validate());

    CHECK_THROWS_AS(apply_config_text(c, "colour = blue\n"), ParseError);
    CHECK_THROWS_AS(apply_config_text(c, "k = 5..2\n"), ParseError);
    CHECK_THROWS_AS(apply_config_text(c, "no equals sign\n"), ParseError);
    CHECK_THROWS_AS(apply_config_text(c, "samples = many\n"), ParseError);
    RunConfig bad;
    bad.methods = {"kmeans"};
    CHECK_THROWS_AS(bad.validate(), ArgumentError);
    bad.methods = {};
    CHECK_THROWS_AS(bad.validate(), ArgumentError);
}

TEST_CASE("Eisen dissimilarity is one minus Pearson correlation") {
    const auto ds = small_labelled(1);
    const auto d = eisen_dissimilarity(ds);
    for (std::size_t i = 0; i < 9; ++i) {
        CHECK(d(i, i) == 0.0);
        for (std::size_t j = i + 1; j < 9; ++j) {
            CHECK(std::abs(d(i, j) - (1 - pearson(ds.values.row(i), ds.values.row(j)))) < 1e-12);
            CHECK(d(i, j) == d(j, i));
        }
    }
    auto flat = ds;
    for (std::size_t t = 0; t < 5; ++t) flat.values(2, t) = 4.0;
    std::vector<std::string> warnings;
    const auto df = eisen_dissimilarity(flat, &warnings);
    CHECK(df(2, 0) == 2.0);
    REQUIRE(warnings.size() == 1);
    CHECK(warnings[0].find("g2") != std::string::npos);
}

TEST_CASE("pipeline writes every artifact and is deterministic") {
    TempDir dir;
    RunConfig c;
    c.methods = {"eisen", "finite", "hdp"};
    c.k_values = {1, 2};
    c.seeds = {1, 2};
    c.b_gamma = {1.0};
    c.schedule = {10, 3, 2};
    c.cut_c = {1, 3};
    c.out_dir = dir.file("a");
    const auto ds = small_labelled(2);
    const auto res = run_pipeline(c, ds);
    // eisen 2 + finite (2 k x 2 seeds x 2 C + 2 k x 2 C means) + hdp 2
    CHECK(res.reports.size() == 2 + 8 + 4 + 2);
    for (const char* name : {"report.csv", "records.jsonl", "warnings.txt", "sparsity.csv", "states_hist.csv",
                             "transition.csv", "eisen.dissim.tsv", "eisen.dendrogram.txt", "eisen.C3.partition.csv",
                             "finite_k2_seed1.model", "finite_k2_seed2.dissim.tsv", "hdp_bg1.snapshots",
                             "hdp_bg1.C1.partition.csv"})
        CHECK_MESSAGE(std::filesystem::exists(dir.path() / "a" / name), name);

    // k = 1 yields an all-zero matrix.
    const auto k1 = load_matrix(dir.file("a/finite_k1_seed1.dissim.tsv"));
    for (double v : k1.data()) CHECK(v == 0.0);

    // The mean row averages the two seeds.
    const IndexReport* s1 = nullptr;
    const IndexReport* s2 = nullptr;
    const IndexReport* mean = nullptr;
    for (const auto& r : res.reports)
        if (r.method == "finite" && r.param == "k=2" && r.C == 3) {
            if (r.seed == "1") s1 = &r;
            if (r.seed == "2") s2 = &r;
            if (r.seed == "mean") mean = &r;
        }
    REQUIRE(s1);
    REQUIRE(s2);
    REQUIRE(mean);
    CHECK(mean->external->crand == doctest::Approx((s1->external->crand + s2->external->crand) / 2));

    c.out_dir = dir.file("b");
    run_pipeline(c, ds);
    CHECK(slurp(dir.file("a/report.csv")) == slurp(dir.file("b/report.csv")));
    CHECK(slurp(dir.file("a/hdp_bg1.snapshots")) == slurp(dir.file("b/hdp_bg1.snapshots")));
}

TEST_CASE("pipeline stage errors") {
    TempDir dir;
    RunConfig c;
    c.methods = {"eisen"};
    c.input = dir.file("missing.tsv");
    c.out_dir = dir.file("out");
    try {
        run_pipeline(c);
        FAIL("expected StageError");
    } catch (const StageError& e) {
        CHECK(e.stage() == "ingest");
    }

    c.cut_c = {50};
    try {
        run_pipeline(c, small_labelled(3));
        FAIL("expected StageError");
    } catch (const StageError& e) {
        CHECK(e.stage() == "config");
    }

    c.cut_c = {2};
    c.normalize = true;
    auto zero = small_labelled(3);
    zero.values(4, 0) = 0.0;
    try {
        run_pipeline(c, zero);
        FAIL("expected StageError");
    } catch (const StageError& e) {
        CHECK(e.stage() == "normalize");
    }
}

TEST_CASE("pipeline without labels reports NA") {
    TempDir dir;
    RunConfig c;
    c.methods = {"eisen"};
    c.cut_c = {2};
    c.out_dir = dir.file("o");
    auto ds = small_labelled(4);
    ds.truth_labels.reset();
    const auto res = run_pipeline(c, ds);
    CHECK_FALSE(res.reports[0].external.has_value());
    CHECK(slurp(dir.file("o/report.csv")).find("NA") != std::string::npos);
}
