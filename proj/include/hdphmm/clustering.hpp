#pragma once

#include <cstddef>
#include <iosfwd>
#include <string>
#include <vector>

#include "hdphmm/matrix.hpp"

namespace hdphmm {

struct Merge {
    std::size_t left = 0;   // smaller node id
    std::size_t right = 0;
    double height = 0.0;
    std::size_t size = 0;   // leaves under the new node

    friend bool operator==(const Merge&, const Merge&) = default;
};

/// Leaves are 0..n-1; the node created by merges[i] has id n + i.
struct Dendrogram {
    std::size_t n_leaves = 0;
    std::vector<Merge> merges;
};

/// Labels in 1..C.
using Partition = std::vector<int>;

/// Unweighted average linkage (UPGMA). Off-diagonal entries only; ties go to
/// the lexicographically smallest (left id, right id) pair.
Dendrogram average_linkage(const Matrix& dissimilarity);

/// Undoes the last C - 1 merges. Clusters are numbered 1..C in order of
/// their smallest leaf.
Partition cut_tree(const Dendrogram& dendrogram, std::size_t C);

/// One "left right height size" line per merge.
void write_dendrogram(std::ostream& out, const Dendrogram& dendrogram);
Dendrogram read_dendrogram(std::istream& in, std::size_t n_leaves);

/// "id,label" lines, no header.
void write_partition(std::ostream& out, const std::vector<std::string>& ids, const Partition& labels);

}  // namespace hdphmm
