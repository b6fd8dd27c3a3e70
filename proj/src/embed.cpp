#include "llfl/embed.hpp"

#include "llfl/error.hpp"
#include "llfl/kernels.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace llfl {

ParamSet init_embed_params(const ModelArch& arch, Rng& rng) {
    require(arch.feature_dim > 0 && arch.hidden > 0 && arch.d > 0,
            "init_embed_params: arch dimensions must be positive");
    auto uniform_tensor = [&](std::vector<std::size_t> shape, std::size_t fan_in) {
        Tensor t = Tensor::zeros(std::move(shape));
        const double s = 1.0 / std::sqrt(static_cast<double>(fan_in));
        for (auto& v : t.data) v = rng.uniform(-s, s);
        return t;
    };
    ParamSet p;
    p.insert("W1", uniform_tensor({arch.feature_dim, arch.hidden}, arch.feature_dim));
    p.insert("b1", Tensor::zeros({arch.hidden}));
    p.insert("W2", uniform_tensor({arch.hidden, 3 * arch.d}, arch.hidden));
    p.insert("b2", Tensor::zeros({3 * arch.d}));
    return p;
}

Graph visual_graph(const ModelArch& arch, std::size_t batch) {
    require(batch > 0, "visual_graph: batch must be positive");
    Graph g;
    const NodeId x = g.input("x", {batch, arch.feature_dim});
    const NodeId w1 = g.param("W1", {arch.feature_dim, arch.hidden});
    const NodeId b1 = g.param("b1", {arch.hidden});
    const NodeId w2 = g.param("W2", {arch.hidden, 3 * arch.d});
    const NodeId b2 = g.param("b2", {3 * arch.d});
    const NodeId h = g.tanh(g.add_bias(g.matmul(x, w1), b1));
    const NodeId pre = g.add_bias(g.matmul(h, w2), b2);
    const NodeId out = g.l2_normalize_blocks(pre, arch.d);
    g.mark_output("pre", pre);
    g.mark_output("embed", out);
    return g;
}

Tensor visual_embed_batch(const EmbedModel& model, const Tensor& features) {
    require(features.cols() == model.arch.feature_dim, "visual_embed: feature length ",
            features.cols(), " does not match input_dim ", model.arch.feature_dim);
    const std::size_t batch = features.rows();
    const Graph g = visual_graph(model.arch, batch);
    Bindings in;
    in.emplace("x", features.rank() == 2
                        ? features
                        : Tensor::row_major(1, features.numel(), features.data));
    auto out = forward(g, model.params, in);
    return out.at("embed");
}

std::vector<double> visual_embed(const EmbedModel& model, const std::vector<double>& features) {
    Tensor x = Tensor::row_major(1, features.size(), features);
    return visual_embed_batch(model, x).data;
}

double score(const std::vector<double>& visual, const FactVector& label) {
    require(visual.size() == 3 * label.d, "score: visual has ", visual.size(),
            " values, label expects ", 3 * label.d);
    std::size_t defined = 0;
    double total = 0.0;
    for (std::size_t slot = 0; slot < 3; ++slot) {
        if (!label.mask[slot]) continue;
        ++defined;
        const double* v = visual.data() + slot * label.d;
        const double* l = label.data.data() + slot * label.d;
        const double nv = std::sqrt(kernels::sqnorm(v, label.d));
        const double nl = std::sqrt(kernels::sqnorm(l, label.d));
        if (nv > 0.0) total += kernels::dot(v, l, label.d) / (nv * nl);
    }
    require(defined > 0, "score: label has no defined slots");
    return total / static_cast<double>(defined);
}

LabelBank build_label_bank(const EmbeddingTable& table, const Dataset& data,
                           std::vector<std::int64_t> fact_ids) {
    require(!fact_ids.empty(), "build_label_bank: no facts");
    std::sort(fact_ids.begin(), fact_ids.end());
    LabelBank bank;
    bank.d = table.dim;
    bank.fact_ids = std::move(fact_ids);
    bank.rows.assign(bank.fact_ids.size() * 3 * table.dim, 0.0);
    bank.label_vectors.reserve(bank.fact_ids.size());
    for (std::size_t i = 0; i < bank.fact_ids.size(); ++i) {
        require(bank.index_of.emplace(bank.fact_ids[i], i).second,
                "build_label_bank: duplicate fact id ", bank.fact_ids[i]);
        FactVector v = embed_fact(table, data.fact_by_id(bank.fact_ids[i]));
        const double count = static_cast<double>(v.mask[0]) + v.mask[1] + v.mask[2];
        double* row = bank.rows.data() + i * 3 * table.dim;
        for (std::size_t j = 0; j < v.data.size(); ++j) row[j] = v.data[j] / count;
        bank.label_vectors.push_back(std::move(v));
    }
    return bank;
}

void normalize_blocks_exact(double* row, std::size_t d) {
    for (std::size_t slot = 0; slot < 3; ++slot) {
        double* blk = row + slot * d;
        const double nrm = std::sqrt(kernels::sqnorm(blk, d));
        if (nrm > 0.0) kernels::scal(1.0 / nrm, blk, d);
    }
}

RankingBatch make_ranking_batch(const Dataset& data, const LabelBank& bank,
                                const std::vector<std::int64_t>& example_ids,
                                std::size_t k_neg, Rng& rng) {
    require(!example_ids.empty(), "make_ranking_batch: no examples");
    require(k_neg >= 1, "make_ranking_batch: k_neg must be >= 1");
    require(bank.size() >= 2, "make_ranking_batch: negative set is empty (bank has ",
            bank.size(), " label(s))");

    const std::size_t F = data.feature_dim;
    const std::size_t width = 3 * bank.d;
    const std::size_t rows = example_ids.size() * k_neg;
    RankingBatch batch;
    batch.rows = rows;
    batch.x = Tensor::zeros({rows, F});
    batch.pos = Tensor::zeros({rows, width});
    batch.neg = Tensor::zeros({rows, width});

    std::size_t r = 0;
    for (const auto id : example_ids) {
        const Example& e = data.example_by_id(id);
        auto it = bank.index_of.find(e.fact_id);
        require(it != bank.index_of.end(), "make_ranking_batch: example ", id, " gold fact ",
                e.fact_id, " not in the label bank");
        const std::size_t gold = it->second;
        for (std::size_t t = 0; t < k_neg; ++t, ++r) {
            std::copy(e.features.begin(), e.features.end(), batch.x.ptr() + r * F);
            std::copy(bank.row(gold), bank.row(gold) + width, batch.pos.ptr() + r * width);
            std::size_t j = static_cast<std::size_t>(rng.below(bank.size() - 1));
            if (j >= gold) ++j;
            std::copy(bank.row(j), bank.row(j) + width, batch.neg.ptr() + r * width);
        }
    }
    return batch;
}

Graph ranking_loss_graph(const ModelArch& arch, std::size_t rows, double margin) {
    require(rows > 0, "ranking_loss_graph: rows must be positive");
    Graph g;
    const NodeId x = g.input("x", {rows, arch.feature_dim});
    const NodeId pos = g.input("pos", {rows, 3 * arch.d});
    const NodeId neg = g.input("neg", {rows, 3 * arch.d});
    const NodeId w1 = g.param("W1", {arch.feature_dim, arch.hidden});
    const NodeId b1 = g.param("b1", {arch.hidden});
    const NodeId w2 = g.param("W2", {arch.hidden, 3 * arch.d});
    const NodeId b2 = g.param("b2", {3 * arch.d});

    const NodeId h = g.tanh(g.add_bias(g.matmul(x, w1), b1));
    const NodeId out = g.l2_normalize_blocks(g.add_bias(g.matmul(h, w2), b2), arch.d);
    const NodeId s_pos = g.row_sum(g.mul(out, pos));
    const NodeId s_neg = g.row_sum(g.mul(out, neg));
    const NodeId hinge = g.relu(g.affine(g.sub(s_neg, s_pos), 1.0, margin));
    const NodeId loss = g.affine(g.sum_all(hinge), 1.0 / static_cast<double>(rows), 0.0);
    g.mark_output("loss", loss);
    return g;
}

double ranking_loss_value(const EmbedModel& model, const RankingBatch& batch, double margin) {
    const Graph g = ranking_loss_graph(model.arch, batch.rows, margin);
    Bindings in;
    in.emplace("x", batch.x);
    in.emplace("pos", batch.pos);
    in.emplace("neg", batch.neg);
    return forward(g, model.params, in).at("loss").data[0];
}

ScoredCandidates predict_topk(const EmbedModel& model, const std::vector<double>& features,
                              const LabelBank& bank, const std::vector<std::size_t>& candidates,
                              std::size_t K) {
    require(K >= 1, "predict_topk: K must be >= 1");
    require(!candidates.empty(), "predict_topk: empty candidate set");
    std::vector<double> visual = visual_embed(model, features);
    normalize_blocks_exact(visual.data(), bank.d);

    struct Entry {
        double score;
        std::int64_t fact_id;
    };
    std::vector<Entry> entries;
    entries.reserve(candidates.size());
    for (const auto c : candidates) {
        require(c < bank.size(), "predict_topk: candidate index ", c, " out of range");
        entries.push_back(
            {kernels::dot(visual.data(), bank.row(c), 3 * bank.d), bank.fact_ids[c]});
    }
    std::sort(entries.begin(), entries.end(), [](const Entry& a, const Entry& b) {
        if (a.score != b.score) return a.score > b.score;
        return a.fact_id < b.fact_id;
    });

    ScoredCandidates out;
    const std::size_t take = std::min(K, entries.size());
    out.fact_ids.reserve(take);
    out.scores.reserve(take);
    for (std::size_t i = 0; i < take; ++i) {
        out.fact_ids.push_back(entries[i].fact_id);
        out.scores.push_back(entries[i].score);
    }
    return out;
}

} // namespace llfl
