#include "hdphmm/pipeline.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <sstream>

#include "hdphmm/clustering.hpp"
#include "hdphmm/errors.hpp"
#include "hdphmm/finite_hmm.hpp"
#include "hdphmm/hmm_model.hpp"
#include "hdphmm/kernels.hpp"

namespace hdphmm {
namespace {

std::string trim(const std::string& s) {
    const auto b = s.find_first_not_of(" \t\r");
    if (b == std::string::npos) return {};
    const auto e = s.find_last_not_of(" \t\r");
    return s.substr(b, e - b + 1);
}

std::vector<std::string> split_list(const std::string& text) {
    std::vector<std::string> out;
    std::stringstream ss(text);
    std::string item;
    while (std::getline(ss, item, ',')) {
        item = trim(item);
        if (!item.empty()) out.push_back(item);
    }
    if (out.empty()) throw ArgumentError("empty list '" + text + "'");
    return out;
}

template <typename T>
T parse_number(const std::string& s) {
    T v{};
    const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc() || ptr != s.data() + s.size()) throw ArgumentError("'" + s + "' is not a valid number");
    return v;
}

bool parse_bool(const std::string& s) {
    if (s == "1" || s == "true" || s == "yes" || s == "on") return true;
    if (s == "0" || s == "false" || s == "no" || s == "off") return false;
    throw ArgumentError("'" + s + "' is not a boolean");
}

std::string short_double(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%g", v);
    return buf;
}

std::filesystem::path out_path(const RunConfig& config, const std::string& name) {
    return std::filesystem::path(config.out_dir) / name;
}

std::ofstream open_out(const std::filesystem::path& path) {
    std::ofstream out(path);
    if (!out) throw IoError("cannot open '" + path.string() + "' for writing");
    return out;
}

// Runs fn, rethrowing anything it throws as a StageError for `stage`.
template <typename Fn>
auto stage(const std::string& name, Fn&& fn) -> decltype(fn()) {
    try {
        return fn();
    } catch (const StageError&) {
        throw;
    } catch (const std::exception& e) {
        throw StageError(name, e.what());
    }
}

// Matrix, dendrogram and one partition file per C, then the index rows.
std::vector<IndexReport> persist_and_score(const RunConfig& config, const ExpressionDataset& ds, const Matrix& d,
                                           const std::string& tag, const std::string& method,
                                           const std::string& param, const std::string& seed) {
    stage("write " + tag, [&] { save_matrix(d, out_path(config, tag + ".dissim.tsv").string()); });
    const Dendrogram tree = stage("cluster " + tag, [&] { return average_linkage(d); });
    stage("write " + tag, [&] {
        auto out = open_out(out_path(config, tag + ".dendrogram.txt"));
        write_dendrogram(out, tree);
        for (std::size_t C : config.cut_c) {
            auto pout = open_out(out_path(config, tag + ".C" + std::to_string(C) + ".partition.csv"));
            write_partition(pout, ds.gene_ids, cut_tree(tree, C));
        }
    });
    return stage("validate " + tag, [&] { return score_cuts(d, ds, config.cut_c, method, param, seed); });
}

}  // namespace

void RunConfig::validate() const {
    if (methods.empty()) throw ArgumentError("no method configured (expected some of eisen, finite, hdp)");
    for (const auto& m : methods)
        if (m != "eisen" && m != "finite" && m != "hdp") throw ArgumentError("unknown method '" + m + "'");
    if (k_values.empty() || seeds.empty() || b_gamma.empty() || cut_c.empty())
        throw ArgumentError("k, seeds, b_gamma and cut_c lists must be non-empty");
    for (std::size_t k : k_values)
        if (k < 1) throw ArgumentError("k values must be >= 1");
    for (double b : b_gamma)
        if (!(b > 0.0) || !std::isfinite(b)) throw ArgumentError("b_gamma values must be positive");
    for (std::size_t C : cut_c)
        if (C < 1) throw ArgumentError("cut_c values must be >= 1");
    if (!(tol >= 0.0)) throw ArgumentError("tol must be >= 0");
    if (schedule.n_samples < 1) throw ArgumentError("samples must be >= 1");
    if (hdp_init.states < 1) throw ArgumentError("hdp_init_states must be >= 1");
    if (!(threshold >= 0.0 && threshold <= 1.0)) throw ArgumentError("threshold must lie in [0, 1]");
    if (out_dir.empty()) throw ArgumentError("output directory is empty");
}

std::vector<std::size_t> parse_size_list(const std::string& text) {
    std::vector<std::size_t> out;
    for (const auto& item : split_list(text)) {
        const auto dots = item.find("..");
        if (dots == std::string::npos) {
            out.push_back(parse_number<std::size_t>(item));
            continue;
        }
        const auto lo = parse_number<std::size_t>(trim(item.substr(0, dots)));
        const auto hi = parse_number<std::size_t>(trim(item.substr(dots + 2)));
        if (hi < lo) throw ArgumentError("descending range '" + item + "'");
        for (std::size_t v = lo; v <= hi; ++v) out.push_back(v);
    }
    return out;
}

std::vector<double> parse_double_list(const std::string& text) {
    std::vector<double> out;
    for (const auto& item : split_list(text)) out.push_back(parse_number<double>(item));
    return out;
}

void apply_config_value(RunConfig& c, const std::string& key, const std::string& raw) {
    const std::string v = trim(raw);
    if (key == "input") c.input = v;
    else if (key == "format") c.format = parse_format(v);
    else if (key == "normalize") c.normalize = parse_bool(v);
    else if (key == "methods" || key == "method") c.methods = split_list(v);
    else if (key == "k") c.k_values = parse_size_list(v);
    else if (key == "seeds") {
        c.seeds.clear();
        for (std::size_t s : parse_size_list(v)) c.seeds.push_back(s);
    }
    else if (key == "tol") c.tol = parse_number<double>(v);
    else if (key == "max_iter") c.max_iter = parse_number<std::size_t>(v);
    else if (key == "b_gamma") c.b_gamma = parse_double_list(v);
    else if (key == "burn_in") c.schedule.burn_in = parse_number<std::size_t>(v);
    else if (key == "samples") c.schedule.n_samples = parse_number<std::size_t>(v);
    else if (key == "spacing") c.schedule.spacing = parse_number<std::size_t>(v);
    else if (key == "hdp_seed") c.hdp_seed = parse_number<std::uint64_t>(v);
    else if (key == "hdp_init") {
        if (v == "quantile") c.hdp_init.kind = ChainInit::Kind::quantile;
        else if (v == "sequential") c.hdp_init.kind = ChainInit::Kind::sequential;
        else throw ArgumentError("hdp_init must be quantile or sequential, got '" + v + "'");
    }
    else if (key == "hdp_init_states") c.hdp_init.states = parse_number<std::size_t>(v);
    else if (key == "threshold") c.threshold = parse_number<double>(v);
    else if (key == "cut_c") c.cut_c = parse_size_list(v);
    else if (key == "out") c.out_dir = v;
    else throw ArgumentError("unknown config key '" + key + "'");
}

void apply_config_text(RunConfig& config, const std::string& text) {
    std::istringstream in(text);
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (const auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
        line = trim(line);
        if (line.empty()) continue;
        const auto eq = line.find('=');
        if (eq == std::string::npos) throw ParseError("config line " + std::to_string(line_no) + ": expected key = value");
        try {
            apply_config_value(config, trim(line.substr(0, eq)), line.substr(eq + 1));
        } catch (const ArgumentError& e) {
            throw ParseError("config line " + std::to_string(line_no) + ": " + e.what());
        }
    }
}

void apply_config_file(RunConfig& config, const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open config '" + path + "'");
    std::stringstream ss;
    ss << in.rdbuf();
    apply_config_text(config, ss.str());
}

Matrix eisen_dissimilarity(const ExpressionDataset& dataset, std::vector<std::string>* warnings) {
    const std::size_t n = dataset.num_genes();
    const std::size_t T = dataset.num_times();
    if (T < 2) throw ArgumentError("Eisen dissimilarity needs at least 2 time points");
    const auto& kern = kernels::active();
    Matrix centered(n, T);
    std::vector<double> norm(n);
    for (std::size_t i = 0; i < n; ++i) {
        const auto row = dataset.values.row(i);
        double mean = 0.0;
        for (double v : row) mean += v;
        mean /= static_cast<double>(T);
        for (std::size_t t = 0; t < T; ++t) centered(i, t) = row[t] - mean;
        norm[i] = std::sqrt(kern.dot(centered.row(i).data(), centered.row(i).data(), T));
        if (norm[i] == 0.0 && warnings)
            warnings->push_back("gene '" + dataset.gene_ids[i] +
                                "' has zero variance; its correlation distances are set to 2");
    }
    Matrix d(n, n, 0.0);
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = i + 1; j < n; ++j) {
            double v = 2.0;
            if (norm[i] > 0.0 && norm[j] > 0.0) {
                const double r = kern.dot(centered.row(i).data(), centered.row(j).data(), T) / (norm[i] * norm[j]);
                v = std::clamp(1.0 - r, 0.0, 2.0);
            }
            d(i, j) = v;
            d(j, i) = v;
        }
    return d;
}

std::vector<IndexReport> score_cuts(const Matrix& dissimilarity, const ExpressionDataset& dataset,
                                    const std::vector<std::size_t>& cut_c, const std::string& method,
                                    const std::string& param, const std::string& seed) {
    const Dendrogram tree = average_linkage(dissimilarity);
    std::vector<IndexReport> out;
    for (std::size_t C : cut_c) {
        const Partition labels = cut_tree(tree, C);
        IndexReport r;
        r.method = method;
        r.param = param;
        r.C = C;
        r.seed = seed;
        if (dataset.truth_labels) r.external = external_indices(labels, *dataset.truth_labels);
        r.internal = internal_indices(dissimilarity, labels);
        out.push_back(std::move(r));
    }
    return out;
}

PipelineResult run_pipeline(const RunConfig& config) {
    const ExpressionDataset ds = stage("ingest", [&] {
        config.validate();
        return load_dataset(config.input, config.format);
    });
    return run_pipeline(config, ds);
}

PipelineResult run_pipeline(const RunConfig& config, const ExpressionDataset& raw) {
    stage("config", [&] {
        config.validate();
        for (std::size_t C : config.cut_c)
            if (C > raw.num_genes())
                throw ArgumentError("cut_c " + std::to_string(C) + " exceeds the " +
                                    std::to_string(raw.num_genes()) + " genes");
        std::filesystem::create_directories(config.out_dir);
    });
    const ExpressionDataset ds = stage("normalize", [&] { return config.normalize ? normalize_t1(raw) : raw; });
    auto has = [&](const char* m) { return std::find(config.methods.begin(), config.methods.end(), m) != config.methods.end(); };

    PipelineResult result;
    auto add = [&](std::vector<IndexReport> rows) {
        for (auto& r : rows) result.reports.push_back(std::move(r));
    };
    std::ostringstream sparsity;
    sparsity << "method,param,states,nonzero_fraction\n";

    if (has("eisen")) {
        const Matrix d = stage("similarity eisen", [&] { return eisen_dissimilarity(ds, &result.warnings); });
        add(persist_and_score(config, ds, d, "eisen", "eisen", "", "-"));
    }

    if (has("finite")) {
        for (std::size_t k : config.k_values) {
            const std::string param = "k=" + std::to_string(k);
            std::vector<IndexReport> per_seed;
            double nonzero_sum = 0.0;
            for (std::uint64_t seed : config.seeds) {
                const std::string tag = "finite_k" + std::to_string(k) + "_seed" + std::to_string(seed);
                const BaumWelchResult fit = stage("fit " + tag, [&] {
                    return baum_welch(ds, k, seed, config.tol, config.max_iter);
                });
                stage("write " + tag, [&] { save_model(fit.model, out_path(config, tag + ".model").string()); });
                nonzero_sum += nonzero_fraction(fit.model.transition, config.threshold);
                const Matrix d = stage("similarity " + tag, [&] { return dissimilarity_matrix(fit.model, ds); });
                auto rows = persist_and_score(config, ds, d, tag, "finite", param, std::to_string(seed));
                per_seed.insert(per_seed.end(), rows.begin(), rows.end());
            }
            add(per_seed);
            for (std::size_t C : config.cut_c) {
                std::vector<IndexReport> same_c;
                for (const auto& r : per_seed)
                    if (r.C == C) same_c.push_back(r);
                result.reports.push_back(mean_report(same_c));
            }
            sparsity << "finite," << param << ',' << k << ','
                     << format_index(nonzero_sum / static_cast<double>(config.seeds.size())) << '\n';
        }
    }

    if (has("hdp")) {
        std::ostringstream hist, trans;
        hist << "b_gamma,K,count\n";
        trans << "b_gamma,from,to,probability,kept\n";
        for (double bg : config.b_gamma) {
            const std::string param = "b_gamma=" + short_double(bg);
            const std::string tag = "hdp_bg" + short_double(bg);
            const PosteriorSampleSet samples = stage("fit " + tag, [&] {
                return run_chain(ds, HdpHyperParams::defaults_for(ds, bg), config.hdp_seed, config.schedule,
                                 config.hdp_init);
            });
            stage("write " + tag, [&] {
                auto out = open_out(out_path(config, tag + ".snapshots"));
                write_snapshots(out, samples);
            });
            const Matrix d = stage("similarity " + tag, [&] { return empirical_dissimilarity(samples); });
            add(persist_and_score(config, ds, d, tag, "hdp", param, std::to_string(config.hdp_seed)));
            for (const auto& [K, count] : represented_state_histogram(samples))
                hist << short_double(bg) << ',' << K << ',' << count << '\n';
            const EmpiricalTransitions tm = empirical_transition_matrix(samples, config.threshold);
            for (std::size_t i = 0; i < tm.probabilities.rows(); ++i)
                for (std::size_t j = 0; j < tm.probabilities.cols(); ++j)
                    trans << short_double(bg) << ',' << i << ',' << j << ',' << format_index(tm.probabilities(i, j))
                          << ',' << (tm.thresholded(i, j) > 0.0 ? 1 : 0) << '\n';
            sparsity << "hdp," << param << ',' << tm.probabilities.rows() << ',' << format_index(tm.nonzero_fraction)
                     << '\n';
        }
        stage("write hdp summaries", [&] {
            open_out(out_path(config, "states_hist.csv")) << hist.str();
            open_out(out_path(config, "transition.csv")) << trans.str();
        });
    }

    stage("report", [&] {
        if (has("finite") || has("hdp")) open_out(out_path(config, "sparsity.csv")) << sparsity.str();
        auto csv = open_out(out_path(config, "report.csv"));
        write_report_csv(csv, result.reports);
        auto jsonl = open_out(out_path(config, "records.jsonl"));
        write_report_jsonl(jsonl, result.reports);
        auto warn = open_out(out_path(config, "warnings.txt"));
        for (const auto& w : result.warnings) warn << w << '\n';
    });
    return result;
}

}  // namespace hdphmm
