#pragma once

#include "llfl/data.hpp"
#include "llfl/fact.hpp"
#include "llfl/rng.hpp"

#include <cstdint>
#include <vector>

namespace llfl {

// One agglomeration step.  Cluster ids: leaves are 0..n-1, the merge at
// position t creates id n+t.  left < right.
struct Merge {
    std::size_t left = 0;
    std::size_t right = 0;
    double height = 0.0;
    std::size_t size = 0;  // leaves under the new cluster
};

struct Dendrogram {
    std::size_t n_leaves = 0;
    std::vector<Merge> merges;  // n_leaves - 1 entries, non-decreasing height
};

// Single-linkage agglomerative clustering over a condensed distance matrix
// (see condensed_index).  Ties pick the smallest (left, right) pair.  The
// distance need not satisfy the triangle inequality; single linkage only
// needs pairwise minima.  NaN distances are an error.
Dendrogram agglomerate(const std::vector<double>& condensed, std::size_t n);

// Undo all merges with height > threshold; label clusters 0,1,... in order
// of their smallest member leaf.  Returns one label per leaf.
std::vector<int> cut_dendrogram(const Dendrogram& dendro, double threshold);

struct SemanticSplit {
    Benchmark benchmark;
    Dendrogram dendrogram;
    double threshold = 0.0;           // cut height actually used
    std::vector<int> cluster_of_fact; // final cluster label per fact position
};

// Embed facts, cluster them, and cut so that exactly n_tasks clusters
// remain.  When height ties make an exact cut impossible, cut at the
// smallest achievable count above n_tasks and fold the smallest clusters
// into their single-link nearest neighbor until n_tasks remain.  Tasks are
// ordered by descending train-example count.
SemanticSplit semantic_split(const Dataset& data, const EmbeddingTable& table,
                             std::size_t n_tasks, std::uint64_t seed);

// Deal facts into n_tasks near-equal groups (sizes differ by at most one);
// across `trials` shuffles keep the one minimizing the ratio of the largest
// to the smallest per-task train-example count (earliest trial wins ties).
Benchmark random_split(const Dataset& data, std::size_t n_tasks, std::size_t trials,
                       std::uint64_t seed);

// Cosine similarity of the mean fact vectors of two fact groups.
double task_similarity_w2v(const std::vector<const Fact*>& a, const std::vector<const Fact*>& b,
                           const EmbeddingTable& table);

// Geometric mean of per-slot Jaccard ratios between the subject, predicate
// and object value sets of two fact groups.  An empty union counts as 0.
double task_overlap_spo(const std::vector<const Fact*>& a, const std::vector<const Fact*>& b);

// Full task-by-task matrices for a benchmark.
std::vector<std::vector<double>> similarity_matrix_w2v(const Benchmark& b, const Dataset& data,
                                                       const EmbeddingTable& table);
std::vector<std::vector<double>> similarity_matrix_spo(const Benchmark& b, const Dataset& data);

} // namespace llfl
