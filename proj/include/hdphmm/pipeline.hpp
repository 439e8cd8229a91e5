#pragma once

// End-to-end runs: ingest, fit, dissimilarity, dendrogram, cuts and index
// reports, with every intermediate artifact written under one directory.

#include <cstdint>
#include <map>
#include <stdexcept>
#include <string>
#include <vector>

#include "hdphmm/dataset.hpp"
#include "hdphmm/hdp_hmm.hpp"
#include "hdphmm/matrix.hpp"
#include "hdphmm/validation.hpp"

namespace hdphmm {

/// A pipeline failure; what() starts with the stage name.
class StageError : public std::runtime_error {
public:
    StageError(const std::string& stage, const std::string& message)
        : std::runtime_error(stage + ": " + message), stage_(stage) {}
    const std::string& stage() const { return stage_; }

private:
    std::string stage_;
};

struct RunConfig {
    std::string input;
    TextFormat format = TextFormat::tsv;
    bool normalize = false;  // divide each series by its first value
    std::vector<std::string> methods;  // eisen, finite, hdp

    std::vector<std::size_t> k_values{3};
    std::vector<std::uint64_t> seeds{1};
    double tol = 1e-6;
    std::size_t max_iter = 500;

    std::vector<double> b_gamma{1.0};
    SampleSchedule schedule{2000, 50, 20};
    std::uint64_t hdp_seed = 1;
    ChainInit hdp_init;
    double threshold = 1e-3;

    std::vector<std::size_t> cut_c{3};
    std::string out_dir = "out";

    void validate() const;
};

/// Flat "key = value" lines; '#' starts a comment; lists are comma
/// separated and integer lists accept "a..b" ranges. Unknown keys throw.
void apply_config_text(RunConfig& config, const std::string& text);
void apply_config_file(RunConfig& config, const std::string& path);
/// Sets one key as if it came from a config file.
void apply_config_value(RunConfig& config, const std::string& key, const std::string& value);

std::vector<std::size_t> parse_size_list(const std::string& text);
std::vector<double> parse_double_list(const std::string& text);

/// 1 - Pearson correlation of the two rows. A zero-variance row gets
/// distance 2 to every other row and a message in `warnings`.
Matrix eisen_dissimilarity(const ExpressionDataset& dataset, std::vector<std::string>* warnings = nullptr);

struct PipelineResult {
    std::vector<IndexReport> reports;  // per-seed rows followed by means
    std::vector<std::string> warnings;
};

/// Runs every configured method and writes report.csv, records.jsonl and
/// the per-run matrices, dendrograms, partitions and HDP summaries into
/// config.out_dir. Throws StageError; files already written are kept.
PipelineResult run_pipeline(const RunConfig& config);

/// Same, on an already loaded dataset (config.input is ignored).
PipelineResult run_pipeline(const RunConfig& config, const ExpressionDataset& dataset);

/// Index reports for every C of one dissimilarity matrix.
std::vector<IndexReport> score_cuts(const Matrix& dissimilarity, const ExpressionDataset& dataset,
                                    const std::vector<std::size_t>& cut_c, const std::string& method,
                                    const std::string& param, const std::string& seed);

}  // namespace hdphmm
