#pragma once

#include "llfl/data.hpp"
#include "llfl/embed.hpp"
#include "llfl/lll.hpp"

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

namespace llfl {

enum class Metric { Standard, Generalized };

// A model under evaluation, reduced to the one thing the metrics need:
// normalized visual embeddings (B x 3d) for a feature batch (B x F).
using EmbedFn = std::function<Tensor(const Tensor&)>;

EmbedFn make_embed_fn(EmbedModel model);
// Routes each row through gate_select and the matching expert (first
// n_experts of the gate if truncated).
EmbedFn make_gate_embed_fn(GateModel gate, std::size_t n_experts);

// Shared evaluation context: the full label space plus per-task candidate
// subsets (bank indices, ascending fact id).
struct EvalContext {
    const Dataset* data = nullptr;
    const Benchmark* benchmark = nullptr;
    LabelBank bank;
    std::vector<std::size_t> all_candidates;
    std::vector<std::vector<std::size_t>> task_candidates;  // by task position
};

EvalContext make_eval_context(const Dataset& data, const Benchmark& benchmark,
                              const EmbeddingTable& table);

// Ranking core shared by model evaluation and the property sweeps: the
// gold candidate is a top-K hit when fewer than K candidates beat it
// (higher score wins, score ties broken by ascending fact id).
bool topk_hit_from_scores(const std::vector<double>& scores,
                          const std::vector<std::int64_t>& cand_ids, std::int64_t gold_id,
                          std::size_t K);

// Per-example hit flags over one candidate set; errors if any example's
// gold fact is outside the candidates.
std::vector<std::uint8_t> topk_hits(const EmbedFn& model, const EvalContext& ctx,
                                    const std::vector<std::int64_t>& example_ids,
                                    const std::vector<std::size_t>& candidates, std::size_t K);

// Candidates restricted to the task's own facts.
double standard_accuracy(const EmbedFn& model, const EvalContext& ctx, const Task& task,
                         std::size_t K);
// Candidates are the entire label space.
double generalized_accuracy(const EmbedFn& model, const EvalContext& ctx, const Task& task,
                            std::size_t K);

// (unweighted mean, example-weighted mean).
std::pair<double, double> summarize(const std::vector<double>& accs,
                                    const std::vector<std::size_t>& test_sizes);

struct TransferMatrix {
    std::vector<std::vector<double>> R;  // R[j][n]: task j+1 after training task n+1
    std::vector<double> baseline;        // untrained-model accuracy per task
};

// models[n] is the model after training task n+1; needs one per task.
TransferMatrix build_R(const std::vector<EmbedFn>& models, const EmbedFn& init_model,
                       const EvalContext& ctx, std::size_t K, Metric metric);

// BWT = mean_n (R[n][N-1] - R[n][n]) for n < N-1;
// FWT = mean_n (R[n][n-1] - baseline[n]) for n >= 1.  Needs N >= 2.
std::pair<double, double> transfer_metrics(const TransferMatrix& t);

// Mean over the whole test set after each task: column means of R weighted
// by per-task test sizes.
std::vector<double> gained_knowledge(const TransferMatrix& t,
                                     const std::vector<std::size_t>& test_sizes);

// Long-tail slice.  Edges are the inclusive lower bounds of each bin and
// must start at 1 and increase; the last bin is open-ended.
std::vector<std::size_t> default_bin_edges();  // {1, 2, 6, 11, 51, 101, 501}

struct BinRow {
    std::size_t lo = 0;
    std::size_t hi = 0;  // inclusive; SIZE_MAX for the open last bin
    std::size_t support = 0;
    double accuracy = 0.0;
};

std::vector<BinRow> longtail_bins(const EmbedFn& model, const EvalContext& ctx,
                                  const std::vector<std::size_t>& edges, std::size_t K,
                                  Metric metric);

struct FewshotRow {
    int task_index = 0;
    std::size_t support = 0;
    double accuracy = 0.0;
};

// Accuracy over test examples whose gold fact has at most max_count train
// examples; tasks with no such examples are omitted.
std::vector<FewshotRow> fewshot_accuracy(const EmbedFn& model, const EvalContext& ctx,
                                         std::size_t max_count, std::size_t K, Metric metric);

struct FactTypeRow {
    FactType type = FactType::S;
    std::size_t support = 0;
    double accuracy = 0.0;
};

// Test examples of one task grouped by gold-fact shape; absent shapes are
// omitted.
std::vector<FactTypeRow> fact_type_breakdown(const EmbedFn& model, const EvalContext& ctx,
                                             const Task& task, std::size_t K, Metric metric);

struct SpoCell {
    std::string condition;
    std::size_t n_facts = 0;
    std::size_t n_examples = 0;
    double accuracy = 0.0;  // meaningful only when n_examples > 0
};

// Rare SPO facts (at most rare_max train examples) bucketed by which of
// their parts are frequent in training (count >= th).  Part counts match
// sub-patterns against training gold facts only.  Generalized metric.
// Cells: SP,O | P,SO | PO,S | SP,PO,SO | SP,PO | SP,SO | PO,SO.
std::vector<SpoCell> spo_generalization(const EmbedFn& model, const EvalContext& ctx,
                                        std::size_t rare_max, std::size_t th, std::size_t K);

} // namespace llfl
