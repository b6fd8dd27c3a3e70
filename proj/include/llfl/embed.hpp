#pragma once

#include "llfl/data.hpp"
#include "llfl/fact.hpp"
#include "llfl/graph.hpp"
#include "llfl/rng.hpp"

#include <cstdint>
#include <unordered_map>
#include <vector>

namespace llfl {

// Visual branch: feature_dim -> hidden (tanh) -> 3d, then each d-block is
// l2-normalized so it can be compared against label blocks.
struct ModelArch {
    std::size_t feature_dim = 0;
    std::size_t hidden = 64;
    std::size_t d = 0;
};

struct EmbedModel {
    ModelArch arch;
    ParamSet params;  // W1 (F x H), b1 (H), W2 (H x 3d), b2 (3d)
};

// Weights uniform in ±1/sqrt(fan_in), biases zero.  Draw order is fixed
// (W1 row-major, then W2), so one stream gives one reproducible init.
ParamSet init_embed_params(const ModelArch& arch, Rng& rng);

// Graph with input "x" (batch x F) and outputs "embed" (normalized) and
// "pre" (pre-normalization activations).
Graph visual_graph(const ModelArch& arch, std::size_t batch);

// Forward only; returns the normalized (batch x 3d) embedding.
Tensor visual_embed_batch(const EmbedModel& model, const Tensor& features);
std::vector<double> visual_embed(const EmbedModel& model, const std::vector<double>& features);

// Mean over the label's defined slots of the cosine between the matching
// blocks.  The label's defined blocks are unit-norm by invariant; the
// visual block is normalized by its true length (a zero block scores 0).
double score(const std::vector<double>& visual, const FactVector& label);

// Candidate labels with their vectors precomputed, sorted by fact id.
// `rows` holds, per fact, the 3-block label vector divided by the number
// of defined slots, so dot(normalized visual, row) equals score().
struct LabelBank {
    std::size_t d = 0;
    std::vector<std::int64_t> fact_ids;
    std::vector<double> rows;                 // n x 3d
    std::vector<FactVector> label_vectors;    // raw unit-block vectors
    std::unordered_map<std::int64_t, std::size_t> index_of;

    std::size_t size() const { return fact_ids.size(); }
    const double* row(std::size_t i) const { return rows.data() + i * 3 * d; }
};

LabelBank build_label_bank(const EmbeddingTable& table, const Dataset& data,
                           std::vector<std::int64_t> fact_ids);

// In place: rescale each of the three d-blocks to exact unit length
// (zero blocks stay zero).
void normalize_blocks_exact(double* row, std::size_t d);

// One row per (example, sampled negative), example-major.  Negatives are
// drawn uniformly from the bank excluding the example's gold fact.
struct RankingBatch {
    Tensor x;    // R x F
    Tensor pos;  // R x 3d, gold label rows
    Tensor neg;  // R x 3d
    std::size_t rows = 0;
};

RankingBatch make_ranking_batch(const Dataset& data, const LabelBank& bank,
                                const std::vector<std::int64_t>& example_ids,
                                std::size_t k_neg, Rng& rng);

// Margin ranking loss over a prepared batch: output "loss" is the mean of
// max(0, margin - s_pos + s_neg) over all rows.  Inputs: "x", "pos", "neg".
// Gradients flow through the visual branch only; labels are constants.
Graph ranking_loss_graph(const ModelArch& arch, std::size_t rows, double margin);

// Convenience wrapper: forward value of the loss for a batch.
double ranking_loss_value(const EmbedModel& model, const RankingBatch& batch, double margin);

struct ScoredCandidates {
    std::vector<std::int64_t> fact_ids;  // descending score, ties by ascending id
    std::vector<double> scores;
};

// Rank `candidates` (indices into the bank) for one feature vector and
// truncate to K.
ScoredCandidates predict_topk(const EmbedModel& model, const std::vector<double>& features,
                              const LabelBank& bank, const std::vector<std::size_t>& candidates,
                              std::size_t K);

} // namespace llfl
