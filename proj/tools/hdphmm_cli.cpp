// Command-line front end: one subcommand per pipeline stage plus the
// end-to-end `pipeline`.

#include <CLI11.hpp>

#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <map>
#include <set>
#include <sstream>

#include "hdphmm/clustering.hpp"
#include "hdphmm/dataset.hpp"
#include "hdphmm/errors.hpp"
#include "hdphmm/finite_hmm.hpp"
#include "hdphmm/hdp_hmm.hpp"
#include "hdphmm/hmm_model.hpp"
#include "hdphmm/kernels.hpp"
#include "hdphmm/pipeline.hpp"
#include "hdphmm/validation.hpp"

namespace fs = std::filesystem;
using namespace hdphmm;

namespace {

struct DataOpts {
    std::string input;
    std::string format = "tsv";
    bool normalize = false;

    void add(CLI::App* app, bool required = true) {
        auto* opt = app->add_option("--input", input, "Expression table (gene id, values..., optional label)");
        if (required) opt->required();
        app->add_option("--format", format, "tsv or csv")->check(CLI::IsMember({"tsv", "csv"}));
        app->add_flag("--normalize", normalize, "Divide every series by its first value");
    }

    ExpressionDataset load() const {
        ExpressionDataset ds = load_dataset(input, parse_format(format));
        return normalize ? normalize_t1(ds) : ds;
    }
};

std::ofstream open_out(const fs::path& path) {
    if (path.has_parent_path()) fs::create_directories(path.parent_path());
    std::ofstream out(path);
    if (!out) throw IoError("cannot open '" + path.string() + "' for writing");
    return out;
}

std::vector<int> read_partition(const std::string& path, const ExpressionDataset* ds) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open partition '" + path + "'");
    std::vector<std::string> ids;
    std::vector<int> labels;
    std::string line;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        const auto comma = line.rfind(',');
        if (comma == std::string::npos) throw ParseError("partition line '" + line + "' lacks a comma");
        ids.push_back(line.substr(0, comma));
        labels.push_back(std::stoi(line.substr(comma + 1)));
    }
    if (ds && ids != ds->gene_ids) throw ValidationError("partition ids do not match the dataset's gene order");
    return labels;
}

void print_csv_table(std::istream& in, std::ostream& out, const std::string& only_c) {
    std::vector<std::vector<std::string>> rows;
    std::string line;
    while (std::getline(in, line)) {
        std::vector<std::string> cells;
        std::stringstream ss(line);
        std::string cell;
        while (std::getline(ss, cell, ',')) cells.push_back(cell);
        if (line.back() == ',') cells.emplace_back();
        if (!rows.empty() && !only_c.empty() && cells.size() > 2 && cells[2] != only_c) continue;
        rows.push_back(std::move(cells));
    }
    std::vector<std::size_t> width;
    for (const auto& r : rows)
        for (std::size_t i = 0; i < r.size(); ++i) {
            if (width.size() <= i) width.push_back(0);
            width[i] = std::max(width[i], r[i].size());
        }
    for (const auto& r : rows) {
        for (std::size_t i = 0; i < r.size(); ++i) out << std::left << std::setw(static_cast<int>(width[i] + 2)) << r[i];
        out << '\n';
    }
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"HDP-HMM and finite-HMM clustering of time-course expression data"};
    app.require_subcommand(1);
    std::string isa;
    app.add_option("--isa", isa, "Force a kernel instruction set (scalar, avx2, neon)");

    // ingest
    DataOpts ingest_data;
    std::string ingest_out;
    auto* ingest = app.add_subcommand("ingest", "Validate (and optionally normalize) a dataset");
    ingest_data.add(ingest);
    ingest->add_option("--out", ingest_out, "Write the validated dataset here (tsv)");

    // fit-finite
    DataOpts ff_data;
    std::string ff_k = "3", ff_seeds = "1", ff_out = "out";
    double ff_tol = 1e-6;
    std::size_t ff_iter = 500;
    auto* fit_finite = app.add_subcommand("fit-finite", "Baum-Welch fits and their trajectory-overlap matrices");
    ff_data.add(fit_finite);
    fit_finite->add_option("--k", ff_k, "State counts, e.g. 3 or 1..40 or 2,4");
    fit_finite->add_option("--seeds", ff_seeds, "Initialization seeds");
    fit_finite->add_option("--tol", ff_tol, "EM stopping tolerance");
    fit_finite->add_option("--max-iter", ff_iter, "EM iteration cap");
    fit_finite->add_option("--out", ff_out, "Output directory");

    // fit-hdp
    DataOpts fh_data;
    std::string fh_bg = "1", fh_out = "out";
    SampleSchedule fh_sched{2000, 50, 20};
    std::uint64_t fh_seed = 1;
    double fh_threshold = 1e-3;
    auto* fit_hdp = app.add_subcommand("fit-hdp", "Gibbs-sample the HDP-HMM and summarize the snapshots");
    fh_data.add(fit_hdp);
    fit_hdp->add_option("--b-gamma", fh_bg, "Rate(s) of the gamma prior on the top-level concentration");
    fit_hdp->add_option("--burn-in", fh_sched.burn_in, "Sweeps before the first snapshot");
    fit_hdp->add_option("--samples", fh_sched.n_samples, "Snapshots to keep")->check(CLI::PositiveNumber);
    fit_hdp->add_option("--spacing", fh_sched.spacing, "Sweeps between snapshots (at least 1 is used)");
    fit_hdp->add_option("--seed", fh_seed, "Chain seed");
    ChainInit fh_init;
    std::string fh_init_kind = "quantile";
    fit_hdp->add_option("--init", fh_init_kind, "Chain start: quantile (over-segmented by value) or sequential")
        ->check(CLI::IsMember({"quantile", "sequential"}));
    fit_hdp->add_option("--init-states", fh_init.states, "Bins for the quantile start")->check(CLI::PositiveNumber);
    fit_hdp->add_option("--threshold", fh_threshold, "Transition probabilities at or below this count as zero");
    fit_hdp->add_option("--out", fh_out, "Output directory");

    // similarity
    DataOpts sim_data;
    std::string sim_method = "eisen", sim_model, sim_snapshots, sim_out;
    auto* similarity = app.add_subcommand("similarity", "Dissimilarity matrix from data, a fitted model or snapshots");
    sim_data.add(similarity);
    similarity->add_option("--method", sim_method, "eisen, finite or hdp")
        ->check(CLI::IsMember({"eisen", "finite", "hdp"}));
    similarity->add_option("--model", sim_model, "Finite model file (method finite)");
    similarity->add_option("--snapshots", sim_snapshots, "Snapshot file (method hdp)");
    similarity->add_option("--out", sim_out, "Matrix output path")->required();

    // cluster
    std::string cl_matrix, cl_cut = "3", cl_out = "out";
    DataOpts cl_data;
    auto* cluster = app.add_subcommand("cluster", "Average-linkage dendrogram and flat cuts");
    cluster->add_option("--matrix", cl_matrix, "Dissimilarity matrix (tab separated)")->required();
    cluster->add_option("--cut-c", cl_cut, "Cluster counts to cut at");
    cl_data.add(cluster, false);
    cluster->add_option("--out", cl_out, "Output directory");

    // validate
    std::string va_matrix, va_partition, va_out;
    DataOpts va_data;
    auto* validate = app.add_subcommand("validate", "Internal and (with labels) external indices of a partition");
    validate->add_option("--matrix", va_matrix, "Dissimilarity matrix")->required();
    validate->add_option("--partition", va_partition, "id,label file")->required();
    va_data.add(validate, false);
    validate->add_option("--out", va_out, "Append the JSON record to this file");

    // report
    std::string rp_out = "out", rp_c;
    auto* report = app.add_subcommand("report", "Print the report table of a finished run");
    report->add_option("--out", rp_out, "Run directory");
    report->add_option("--cut-c", rp_c, "Show only this C");

    // pipeline
    RunConfig cfg;
    std::string pl_config;
    std::map<std::string, std::string> overrides;
    auto* pipeline = app.add_subcommand("pipeline", "End-to-end run over every configured method");
    pipeline->add_option("--config", pl_config, "key = value config file")->check(CLI::ExistingFile);
    const std::vector<std::pair<std::string, std::string>> flag_keys = {
        {"input", "input"},     {"format", "format"},   {"out", "out"},         {"k", "k"},
        {"seeds", "seeds"},     {"b-gamma", "b_gamma"}, {"burn-in", "burn_in"}, {"samples", "samples"},
        {"spacing", "spacing"}, {"cut-c", "cut_c"},     {"threshold", "threshold"}, {"methods", "methods"},
        {"normalize", "normalize"}, {"hdp-seed", "hdp_seed"}, {"hdp-init", "hdp_init"},
        {"hdp-init-states", "hdp_init_states"}, {"tol", "tol"}, {"max-iter", "max_iter"}};
    for (const auto& [flag, key] : flag_keys)
        pipeline->add_option("--" + flag, overrides[key], "Overrides config key '" + key + "'");

    CLI11_PARSE(app, argc, argv);

    try {
        if (!isa.empty()) kernels::force_isa(kernels::parse_isa(isa));

        if (ingest->parsed()) {
            const ExpressionDataset ds = ingest_data.load();
            std::cout << ds.num_genes() << " genes x " << ds.num_times() << " time points"
                      << (ds.truth_labels ? ", with labels" : "") << '\n';
            if (!ingest_out.empty()) save_dataset(ds, ingest_out, TextFormat::tsv);
        } else if (fit_finite->parsed()) {
            const ExpressionDataset ds = ff_data.load();
            fs::create_directories(ff_out);
            for (std::size_t k : parse_size_list(ff_k))
                for (std::size_t seed : parse_size_list(ff_seeds)) {
                    const std::string tag = "finite_k" + std::to_string(k) + "_seed" + std::to_string(seed);
                    const auto fit = baum_welch(ds, k, seed, ff_tol, ff_iter);
                    save_model(fit.model, (fs::path(ff_out) / (tag + ".model")).string());
                    save_matrix(dissimilarity_matrix(fit.model, ds), (fs::path(ff_out) / (tag + ".dissim.tsv")).string());
                    std::cout << tag << " log-likelihood " << format_double(fit.log_likelihood_trace.back()) << " after "
                              << fit.log_likelihood_trace.size() << " E-steps\n";
                }
        } else if (fit_hdp->parsed()) {
            const ExpressionDataset ds = fh_data.load();
            fs::create_directories(fh_out);
            auto hist = open_out(fs::path(fh_out) / "states_hist.csv");
            auto trans = open_out(fs::path(fh_out) / "transition.csv");
            hist << "b_gamma,K,count\n";
            trans << "b_gamma,from,to,probability,kept\n";
            for (double bg : parse_double_list(fh_bg)) {
                std::ostringstream name;
                name << "hdp_bg" << bg;
                fh_init.kind = fh_init_kind == "sequential" ? ChainInit::Kind::sequential : ChainInit::Kind::quantile;
                const auto samples = run_chain(ds, HdpHyperParams::defaults_for(ds, bg), fh_seed, fh_sched, fh_init);
                auto snap = open_out(fs::path(fh_out) / (name.str() + ".snapshots"));
                write_snapshots(snap, samples);
                save_matrix(empirical_dissimilarity(samples), (fs::path(fh_out) / (name.str() + ".dissim.tsv")).string());
                for (const auto& [K, count] : represented_state_histogram(samples)) hist << bg << ',' << K << ',' << count << '\n';
                const auto tm = empirical_transition_matrix(samples, fh_threshold);
                for (std::size_t i = 0; i < tm.probabilities.rows(); ++i)
                    for (std::size_t j = 0; j < tm.probabilities.cols(); ++j)
                        trans << bg << ',' << i << ',' << j << ',' << format_index(tm.probabilities(i, j)) << ','
                              << (tm.thresholded(i, j) > 0.0 ? 1 : 0) << '\n';
                std::cout << name.str() << " final K " << samples.samples.back().num_states << ", nonzero transitions "
                          << format_index(tm.nonzero_fraction) << '\n';
            }
        } else if (similarity->parsed()) {
            const ExpressionDataset ds = sim_data.load();
            Matrix d;
            if (sim_method == "eisen") {
                std::vector<std::string> warnings;
                d = eisen_dissimilarity(ds, &warnings);
                for (const auto& w : warnings) std::cerr << "warning: " << w << '\n';
            } else if (sim_method == "finite") {
                if (sim_model.empty()) throw ArgumentError("--model is required for method finite");
                d = dissimilarity_matrix(load_model(sim_model), ds);
            } else {
                if (sim_snapshots.empty()) throw ArgumentError("--snapshots is required for method hdp");
                std::ifstream in(sim_snapshots);
                if (!in) throw IoError("cannot open '" + sim_snapshots + "'");
                d = empirical_dissimilarity(read_snapshots(in));
            }
            save_matrix(d, sim_out);
        } else if (cluster->parsed()) {
            const Matrix d = load_matrix(cl_matrix);
            std::vector<std::string> ids;
            if (!cl_data.input.empty()) ids = cl_data.load().gene_ids;
            else
                for (std::size_t i = 0; i < d.rows(); ++i) ids.push_back(std::to_string(i));
            const Dendrogram tree = average_linkage(d);
            fs::create_directories(cl_out);
            auto out = open_out(fs::path(cl_out) / "dendrogram.txt");
            write_dendrogram(out, tree);
            for (std::size_t C : parse_size_list(cl_cut)) {
                auto pout = open_out(fs::path(cl_out) / ("partition_C" + std::to_string(C) + ".csv"));
                write_partition(pout, ids, cut_tree(tree, C));
            }
        } else if (validate->parsed()) {
            const Matrix d = load_matrix(va_matrix);
            ExpressionDataset ds;
            const bool with_data = !va_data.input.empty();
            if (with_data) ds = va_data.load();
            const auto labels = read_partition(va_partition, with_data ? &ds : nullptr);
            IndexReport r;
            r.method = "given";
            r.C = std::set<int>(labels.begin(), labels.end()).size();
            r.seed = "-";
            r.internal = internal_indices(d, labels);
            if (with_data && ds.truth_labels) r.external = external_indices(labels, *ds.truth_labels);
            write_report_jsonl(std::cout, {r});
            if (!va_out.empty()) {
                std::ofstream out(va_out, std::ios::app);
                write_report_jsonl(out, {r});
            }
        } else if (report->parsed()) {
            std::ifstream in(fs::path(rp_out) / "report.csv");
            if (!in) throw IoError("no report.csv in '" + rp_out + "'");
            print_csv_table(in, std::cout, rp_c);
        } else if (pipeline->parsed()) {
            if (!pl_config.empty()) apply_config_file(cfg, pl_config);
            for (const auto& [key, value] : overrides)
                if (!value.empty()) apply_config_value(cfg, key, value);
            const PipelineResult res = run_pipeline(cfg);
            for (const auto& w : res.warnings) std::cerr << "warning: " << w << '\n';
            std::cout << res.reports.size() << " report rows written to " << (fs::path(cfg.out_dir) / "report.csv").string()
                      << '\n';
        }
    } catch (const StageError& e) {
        std::cerr << "error in stage " << e.what() << '\n';
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 1;
    }
    return 0;
}
