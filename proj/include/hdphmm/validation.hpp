#pragma once

// External indices compare a candidate partition with truth labels through
// pair counts; internal indices read only the dissimilarity matrix. Labels
// may be any integers (truth sets use -1 for outliers).

#include <cstdint>
#include <iosfwd>
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include "hdphmm/matrix.hpp"

namespace hdphmm {

/// Stands in for +infinity where an index is unbounded (Dunn with zero
/// diameters, global silhouette of a single cluster).
inline constexpr double kInfiniteIndex = std::numeric_limits<double>::infinity();

/// Pairs of items: SS together in both, DD apart in both, SD together only
/// in the candidate, DS together only in the truth.
struct PairCounts {
    std::int64_t ss = 0;
    std::int64_t sd = 0;
    std::int64_t ds = 0;
    std::int64_t dd = 0;

    std::int64_t total() const { return ss + sd + ds + dd; }
    friend bool operator==(const PairCounts&, const PairCounts&) = default;
};

PairCounts pair_counts(const std::vector<int>& candidate, const std::vector<int>& truth);

double rand_index(const PairCounts& pc);
/// 1.0 when no pair is together in either partition.
double jaccard_index(const PairCounts& pc);
/// Adjusted Rand from the contingency table. When the chance-corrected
/// denominator vanishes: 1.0 for identical partitions, else 0.0.
double crand_index(const std::vector<int>& candidate, const std::vector<int>& truth);

/// Fraction of truth-together pairs the candidate keeps together,
/// SS / (SS + DS). A one-cluster candidate scores 1. 1.0 when the truth has
/// no together pairs.
double sensitivity(const PairCounts& pc);
/// Fraction of candidate-together pairs that are together in the truth,
/// SS / (SS + SD). 1.0 when the candidate has no together pairs.
double specificity(const PairCounts& pc);
/// The two ratios under the opposite naming: SS / (SS + SD) and
/// SS / (SS + DS).
double printed_sensitivity(const PairCounts& pc);
double printed_specificity(const PairCounts& pc);

/// Majority-label purity: (1/n) sum over candidate clusters of the largest
/// truth-label count inside.
double purity(const std::vector<int>& candidate, const std::vector<int>& truth);

struct Silhouette {
    std::vector<double> per_item;
    std::vector<double> per_cluster;  // in increasing label order
    double global = 0.0;              // mean of per_cluster
};

/// Singletons get s(i) = 0. With a single cluster every s(i) is 0 and the
/// global value is kInfiniteIndex.
Silhouette silhouette(const Matrix& d, const std::vector<int>& labels);

/// Minimum between-cluster distance over maximum cluster diameter.
/// kInfiniteIndex when every cluster has zero diameter. Needs C >= 2.
double dunn_index(const Matrix& d, const std::vector<int>& labels);

/// Medoid form: scatter is the mean member-to-medoid distance, separation
/// the medoid-to-medoid distance. Needs C >= 2.
double davies_bouldin(const Matrix& d, const std::vector<int>& labels);

struct ExternalIndices {
    double rand = 0.0, crand = 0.0, jaccard = 0.0, sensitivity = 0.0, specificity = 0.0, purity = 0.0;
};

struct InternalIndices {
    double silhouette = 0.0, dunn = 0.0, davies_bouldin = 0.0;
};

ExternalIndices external_indices(const std::vector<int>& candidate, const std::vector<int>& truth);

/// With one cluster: silhouette and Dunn are kInfiniteIndex and
/// Davies-Bouldin is 0.
InternalIndices internal_indices(const Matrix& d, const std::vector<int>& labels);

struct IndexReport {
    std::string method;  // eisen, finite or hdp
    std::string param;   // e.g. "k=3" or "b_gamma=1"; empty for eisen
    std::size_t C = 0;
    std::string seed;    // seed value, or "mean" for a seed average
    std::optional<ExternalIndices> external;
    InternalIndices internal;
};

/// Arithmetic mean of reports sharing method, param and C.
IndexReport mean_report(const std::vector<IndexReport>& reports);

/// Header: method,param,C,seed,rand,crand,jacc,sens,spec,sil,dunn,DB,puri.
void write_report_csv(std::ostream& out, const std::vector<IndexReport>& reports);
/// One JSON object per line.
void write_report_jsonl(std::ostream& out, const std::vector<IndexReport>& reports);

/// Fixed six-decimal rendering; "inf" / "-inf" / "nan" for non-finite.
std::string format_index(double value);

}  // namespace hdphmm
