#include "hdphmm/clustering.hpp"

#include <algorithm>
#include <cmath>
#include <istream>
#include <limits>
#include <numeric>
#include <ostream>

#include "hdphmm/dataset.hpp"
#include "hdphmm/errors.hpp"

namespace hdphmm {

Dendrogram average_linkage(const Matrix& d) {
    const std::size_t n = d.rows();
    if (n < 2) throw ArgumentError("average_linkage needs at least 2 items, got " + std::to_string(n));
    if (d.cols() != n) throw ArgumentError("average_linkage: matrix is not square");
    for (double v : d.data())
        if (!std::isfinite(v)) throw ArgumentError("average_linkage: non-finite dissimilarity");

    // Working distances between active clusters, indexed by slot. Slot i
    // holds node ids[i]; a merged cluster takes over the lower slot.
    Matrix w = d;
    std::vector<std::size_t> ids(n), sizes(n, 1);
    std::iota(ids.begin(), ids.end(), std::size_t{0});
    std::vector<bool> active(n, true);

    Dendrogram out;
    out.n_leaves = n;
    out.merges.reserve(n - 1);
    double last = -std::numeric_limits<double>::infinity();
    for (std::size_t step = 0; step + 1 < n; ++step) {
        std::size_t bi = 0, bj = 0;
        double best = std::numeric_limits<double>::infinity();
        std::size_t best_lo = 0, best_hi = 0;
        for (std::size_t i = 0; i < n; ++i) {
            if (!active[i]) continue;
            for (std::size_t j = i + 1; j < n; ++j) {
                if (!active[j]) continue;
                const double v = w(i, j);
                const std::size_t lo = std::min(ids[i], ids[j]), hi = std::max(ids[i], ids[j]);
                if (v < best || (v == best && (lo < best_lo || (lo == best_lo && hi < best_hi)))) {
                    best = v;
                    bi = i;
                    bj = j;
                    best_lo = lo;
                    best_hi = hi;
                }
            }
        }
        const std::size_t na = sizes[bi], nb = sizes[bj];
        for (std::size_t x = 0; x < n; ++x) {
            if (!active[x] || x == bi || x == bj) continue;
            const double v = (static_cast<double>(na) * w(bi, x) + static_cast<double>(nb) * w(bj, x)) /
                             static_cast<double>(na + nb);
            w(bi, x) = v;
            w(x, bi) = v;
        }
        // UPGMA is reducible, so heights only drop below the previous one by
        // rounding in the Lance-Williams update.
        last = std::max(last, best);
        out.merges.push_back({best_lo, best_hi, last, na + nb});
        ids[bi] = n + step;
        sizes[bi] = na + nb;
        active[bj] = false;
    }
    return out;
}

Partition cut_tree(const Dendrogram& dendrogram, std::size_t C) {
    const std::size_t n = dendrogram.n_leaves;
    if (C < 1 || C > n)
        throw ArgumentError("cut_tree: C must lie in 1.." + std::to_string(n) + ", got " + std::to_string(C));
    if (dendrogram.merges.size() + 1 != n) throw ArgumentError("cut_tree: dendrogram is incomplete");

    // Union-find over node ids; apply the first n - C merges.
    std::vector<std::size_t> parent(2 * n - 1);
    std::iota(parent.begin(), parent.end(), std::size_t{0});
    auto find = [&](std::size_t x) {
        while (parent[x] != x) x = parent[x] = parent[parent[x]];
        return x;
    };
    for (std::size_t i = 0; i < n - C; ++i) {
        const auto& m = dendrogram.merges[i];
        parent[find(m.left)] = n + i;
        parent[find(m.right)] = n + i;
    }
    Partition labels(n, 0);
    std::vector<int> label_of_root(2 * n - 1, 0);
    int next = 0;
    for (std::size_t leaf = 0; leaf < n; ++leaf) {
        int& lab = label_of_root[find(leaf)];
        if (lab == 0) lab = ++next;
        labels[leaf] = lab;
    }
    return labels;
}

void write_dendrogram(std::ostream& out, const Dendrogram& dendrogram) {
    for (const auto& m : dendrogram.merges)
        out << m.left << ' ' << m.right << ' ' << format_double(m.height) << ' ' << m.size << '\n';
}

Dendrogram read_dendrogram(std::istream& in, std::size_t n_leaves) {
    Dendrogram d;
    d.n_leaves = n_leaves;
    Merge m;
    while (in >> m.left >> m.right >> m.height >> m.size) {
        const std::size_t limit = n_leaves + d.merges.size();
        if (m.left >= limit || m.right >= limit) throw ParseError("dendrogram references a node not yet created");
        d.merges.push_back(m);
    }
    if (!in.eof()) throw ParseError("dendrogram: malformed merge line " + std::to_string(d.merges.size() + 1));
    if (d.merges.size() + 1 != n_leaves)
        throw ParseError("dendrogram has " + std::to_string(d.merges.size()) + " merges for " +
                         std::to_string(n_leaves) + " leaves");
    return d;
}

void write_partition(std::ostream& out, const std::vector<std::string>& ids, const Partition& labels) {
    if (ids.size() != labels.size()) throw ArgumentError("write_partition: id and label counts differ");
    for (std::size_t i = 0; i < ids.size(); ++i) out << ids[i] << ',' << labels[i] << '\n';
}

}  // namespace hdphmm
