#include "hdphmm/validation.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <map>
#include <ostream>
#include <string_view>

#include <json.hpp>

#include "hdphmm/errors.hpp"

namespace hdphmm {
namespace {

// Maps arbitrary label values to 0..C-1 in increasing value order.
std::vector<std::size_t> dense_labels(const std::vector<int>& labels, std::size_t& n_clusters) {
    std::vector<int> values(labels);
    std::sort(values.begin(), values.end());
    values.erase(std::unique(values.begin(), values.end()), values.end());
    n_clusters = values.size();
    std::vector<std::size_t> out(labels.size());
    for (std::size_t i = 0; i < labels.size(); ++i)
        out[i] = static_cast<std::size_t>(std::lower_bound(values.begin(), values.end(), labels[i]) - values.begin());
    return out;
}

struct Contingency {
    std::vector<std::vector<std::int64_t>> table;  // candidate x truth
    std::vector<std::int64_t> rows, cols;
};

Contingency contingency(const std::vector<int>& candidate, const std::vector<int>& truth) {
    if (candidate.size() != truth.size())
        throw ArgumentError("partitions differ in length (" + std::to_string(candidate.size()) + " vs " +
                            std::to_string(truth.size()) + ")");
    std::size_t nc = 0, nt = 0;
    const auto a = dense_labels(candidate, nc);
    const auto b = dense_labels(truth, nt);
    Contingency c{std::vector<std::vector<std::int64_t>>(nc, std::vector<std::int64_t>(nt, 0)),
                  std::vector<std::int64_t>(nc, 0), std::vector<std::int64_t>(nt, 0)};
    for (std::size_t i = 0; i < a.size(); ++i) {
        ++c.table[a[i]][b[i]];
        ++c.rows[a[i]];
        ++c.cols[b[i]];
    }
    return c;
}

std::int64_t choose2(std::int64_t n) { return n * (n - 1) / 2; }

double ratio_or_one(std::int64_t num, std::int64_t den) {
    return den == 0 ? 1.0 : static_cast<double>(num) / static_cast<double>(den);
}

struct Clusters {
    std::size_t count = 0;
    std::vector<std::size_t> of;                    // cluster of each item
    std::vector<std::vector<std::size_t>> members;  // items per cluster
};

Clusters group(const Matrix& d, const std::vector<int>& labels) {
    if (d.rows() != d.cols()) throw ArgumentError("dissimilarity matrix is not square");
    if (labels.size() != d.rows())
        throw ArgumentError("label count " + std::to_string(labels.size()) + " does not match matrix size " +
                            std::to_string(d.rows()));
    if (labels.empty()) throw ArgumentError("no items to score");
    Clusters c;
    c.of = dense_labels(labels, c.count);
    c.members.resize(c.count);
    for (std::size_t i = 0; i < labels.size(); ++i) c.members[c.of[i]].push_back(i);
    return c;
}

}  // namespace

PairCounts pair_counts(const std::vector<int>& candidate, const std::vector<int>& truth) {
    const auto c = contingency(candidate, truth);
    std::int64_t ss = 0, cand = 0, tr = 0;
    for (const auto& row : c.table)
        for (std::int64_t v : row) ss += choose2(v);
    for (std::int64_t v : c.rows) cand += choose2(v);
    for (std::int64_t v : c.cols) tr += choose2(v);
    PairCounts pc;
    pc.ss = ss;
    pc.sd = cand - ss;
    pc.ds = tr - ss;
    pc.dd = choose2(static_cast<std::int64_t>(candidate.size())) - ss - pc.sd - pc.ds;
    return pc;
}

double rand_index(const PairCounts& pc) { return ratio_or_one(pc.ss + pc.dd, pc.total()); }

double jaccard_index(const PairCounts& pc) { return ratio_or_one(pc.ss, pc.ss + pc.sd + pc.ds); }

double crand_index(const std::vector<int>& candidate, const std::vector<int>& truth) {
    const auto c = contingency(candidate, truth);
    double index = 0.0, a = 0.0, b = 0.0;
    for (const auto& row : c.table)
        for (std::int64_t v : row) index += static_cast<double>(choose2(v));
    for (std::int64_t v : c.rows) a += static_cast<double>(choose2(v));
    for (std::int64_t v : c.cols) b += static_cast<double>(choose2(v));
    const double pairs = static_cast<double>(choose2(static_cast<std::int64_t>(candidate.size())));
    const double expected = pairs > 0.0 ? a * b / pairs : 0.0;
    const double denom = 0.5 * (a + b) - expected;
    if (denom == 0.0) {
        const PairCounts pc = pair_counts(candidate, truth);
        return pc.sd == 0 && pc.ds == 0 ? 1.0 : 0.0;
    }
    return (index - expected) / denom;
}

double sensitivity(const PairCounts& pc) { return ratio_or_one(pc.ss, pc.ss + pc.ds); }
double specificity(const PairCounts& pc) { return ratio_or_one(pc.ss, pc.ss + pc.sd); }
double printed_sensitivity(const PairCounts& pc) { return ratio_or_one(pc.ss, pc.ss + pc.sd); }
double printed_specificity(const PairCounts& pc) { return ratio_or_one(pc.ss, pc.ss + pc.ds); }

double purity(const std::vector<int>& candidate, const std::vector<int>& truth) {
    const auto c = contingency(candidate, truth);
    if (candidate.empty()) return 1.0;
    std::int64_t hit = 0;
    for (const auto& row : c.table) hit += *std::max_element(row.begin(), row.end());
    return static_cast<double>(hit) / static_cast<double>(candidate.size());
}

Silhouette silhouette(const Matrix& d, const std::vector<int>& labels) {
    const Clusters cl = group(d, labels);
    const std::size_t n = labels.size();
    Silhouette out;
    out.per_item.assign(n, 0.0);
    out.per_cluster.assign(cl.count, 0.0);
    if (cl.count == 1) {
        out.global = kInfiniteIndex;
        return out;
    }
    std::vector<double> sums(cl.count);
    for (std::size_t i = 0; i < n; ++i) {
        const std::size_t own = cl.of[i];
        if (cl.members[own].size() == 1) continue;
        std::fill(sums.begin(), sums.end(), 0.0);
        for (std::size_t j = 0; j < n; ++j)
            if (j != i) sums[cl.of[j]] += d(i, j);
        const double a = sums[own] / static_cast<double>(cl.members[own].size() - 1);
        double b = kInfiniteIndex;
        for (std::size_t k = 0; k < cl.count; ++k)
            if (k != own) b = std::min(b, sums[k] / static_cast<double>(cl.members[k].size()));
        const double m = std::max(a, b);
        out.per_item[i] = m > 0.0 ? (b - a) / m : 0.0;
    }
    double total = 0.0;
    for (std::size_t k = 0; k < cl.count; ++k) {
        double s = 0.0;
        for (std::size_t i : cl.members[k]) s += out.per_item[i];
        out.per_cluster[k] = s / static_cast<double>(cl.members[k].size());
        total += out.per_cluster[k];
    }
    out.global = total / static_cast<double>(cl.count);
    return out;
}

double dunn_index(const Matrix& d, const std::vector<int>& labels) {
    const Clusters cl = group(d, labels);
    if (cl.count < 2) throw ArgumentError("Dunn index needs at least 2 clusters");
    const std::size_t n = labels.size();
    double diameter = 0.0;
    double separation = kInfiniteIndex;
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = i + 1; j < n; ++j) {
            if (cl.of[i] == cl.of[j])
                diameter = std::max(diameter, d(i, j));
            else
                separation = std::min(separation, d(i, j));
        }
    if (diameter == 0.0) return kInfiniteIndex;
    return separation / diameter;
}

double davies_bouldin(const Matrix& d, const std::vector<int>& labels) {
    const Clusters cl = group(d, labels);
    if (cl.count < 2) throw ArgumentError("Davies-Bouldin index needs at least 2 clusters");
    std::vector<std::size_t> medoid(cl.count);
    std::vector<double> scatter(cl.count);
    for (std::size_t k = 0; k < cl.count; ++k) {
        double best = kInfiniteIndex;
        for (std::size_t i : cl.members[k]) {
            double s = 0.0;
            for (std::size_t j : cl.members[k])
                if (j != i) s += d(i, j);
            if (s < best) {  // members are in increasing index order
                best = s;
                medoid[k] = i;
            }
        }
        scatter[k] = best / static_cast<double>(cl.members[k].size());
    }
    double total = 0.0;
    for (std::size_t i = 0; i < cl.count; ++i) {
        double worst = 0.0;
        for (std::size_t j = 0; j < cl.count; ++j) {
            if (j == i) continue;
            const double spread = scatter[i] + scatter[j];
            const double sep = d(medoid[i], medoid[j]);
            double r = 0.0;
            if (sep > 0.0)
                r = spread / sep;
            else if (spread > 0.0)
                r = kInfiniteIndex;
            worst = std::max(worst, r);
        }
        total += worst;
    }
    return total / static_cast<double>(cl.count);
}

ExternalIndices external_indices(const std::vector<int>& candidate, const std::vector<int>& truth) {
    const PairCounts pc = pair_counts(candidate, truth);
    ExternalIndices e;
    e.rand = rand_index(pc);
    e.crand = crand_index(candidate, truth);
    e.jaccard = jaccard_index(pc);
    e.sensitivity = sensitivity(pc);
    e.specificity = specificity(pc);
    e.purity = purity(candidate, truth);
    return e;
}

InternalIndices internal_indices(const Matrix& d, const std::vector<int>& labels) {
    InternalIndices in;
    const Clusters cl = group(d, labels);
    in.silhouette = silhouette(d, labels).global;
    if (cl.count < 2) {
        in.dunn = kInfiniteIndex;
        in.davies_bouldin = 0.0;
    } else {
        in.dunn = dunn_index(d, labels);
        in.davies_bouldin = davies_bouldin(d, labels);
    }
    return in;
}

IndexReport mean_report(const std::vector<IndexReport>& reports) {
    if (reports.empty()) throw ArgumentError("mean_report: nothing to average");
    IndexReport out = reports.front();
    out.seed = "mean";
    const double n = static_cast<double>(reports.size());
    InternalIndices in{};
    std::optional<ExternalIndices> ex;
    if (out.external) ex = ExternalIndices{};
    for (const auto& r : reports) {
        if (r.method != out.method || r.param != out.param || r.C != out.C)
            throw ArgumentError("mean_report: reports do not share method, parameter and C");
        in.silhouette += r.internal.silhouette / n;
        in.dunn += r.internal.dunn / n;
        in.davies_bouldin += r.internal.davies_bouldin / n;
        if (ex) {
            if (!r.external) throw ArgumentError("mean_report: external indices missing from some reports");
            ex->rand += r.external->rand / n;
            ex->crand += r.external->crand / n;
            ex->jaccard += r.external->jaccard / n;
            ex->sensitivity += r.external->sensitivity / n;
            ex->specificity += r.external->specificity / n;
            ex->purity += r.external->purity / n;
        }
    }
    out.internal = in;
    out.external = ex;
    return out;
}

std::string format_index(double value) {
    if (std::isnan(value)) return "nan";
    if (std::isinf(value)) return value > 0 ? "inf" : "-inf";
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.6f", value);
    // Avoid "-0.000000".
    if (std::string_view(buf) == "-0.000000") return "0.000000";
    return buf;
}

void write_report_csv(std::ostream& out, const std::vector<IndexReport>& reports) {
    out << "method,param,C,seed,rand,crand,jacc,sens,spec,sil,dunn,DB,puri\n";
    for (const auto& r : reports) {
        out << r.method << ',' << r.param << ',' << r.C << ',' << r.seed;
        if (r.external) {
            const auto& e = *r.external;
            out << ',' << format_index(e.rand) << ',' << format_index(e.crand) << ',' << format_index(e.jaccard) << ','
                << format_index(e.sensitivity) << ',' << format_index(e.specificity);
        } else {
            out << ",NA,NA,NA,NA,NA";
        }
        out << ',' << format_index(r.internal.silhouette) << ',' << format_index(r.internal.dunn) << ','
            << format_index(r.internal.davies_bouldin) << ',' << (r.external ? format_index(r.external->purity) : "NA")
            << '\n';
    }
}

void write_report_jsonl(std::ostream& out, const std::vector<IndexReport>& reports) {
    auto num = [](double v) -> nlohmann::json {
        if (std::isfinite(v)) return v;
        return format_index(v);
    };
    for (const auto& r : reports) {
        nlohmann::json j;
        j["method"] = r.method;
        j["param"] = r.param;
        j["C"] = r.C;
        j["seed"] = r.seed;
        if (r.external) {
            j["rand"] = num(r.external->rand);
            j["crand"] = num(r.external->crand);
            j["jaccard"] = num(r.external->jaccard);
            j["sensitivity"] = num(r.external->sensitivity);
            j["specificity"] = num(r.external->specificity);
            j["purity"] = num(r.external->purity);
        }
        j["silhouette"] = num(r.internal.silhouette);
        j["dunn"] = num(r.internal.dunn);
        j["davies_bouldin"] = num(r.internal.davies_bouldin);
        out << j.dump() << '\n';
    }
}

}  // namespace hdphmm
