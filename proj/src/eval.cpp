#include "llfl/eval.hpp"

#include "llfl/error.hpp"
#include "llfl/kernels.hpp"
#include "llfl/parallel.hpp"

#include <algorithm>
#include <functional>
#include <map>
#include <unordered_map>

namespace llfl {

EmbedFn make_embed_fn(EmbedModel model) {
    return [model = std::move(model)](const Tensor& features) {
        return visual_embed_batch(model, features);
    };
}

EmbedFn make_gate_embed_fn(GateModel gate, std::size_t n_experts) {
    require(n_experts >= 1 && n_experts <= gate.experts.size(),
            "make_gate_embed_fn: bad expert count ", n_experts);
    gate.experts.resize(n_experts);
    gate.autoencoders.resize(n_experts);
    return [gate = std::move(gate)](const Tensor& features) {
        const std::size_t B = features.rows();
        const std::size_t F = features.cols();
        Tensor out = Tensor::zeros({B, 3 * gate.arch.d});
        for (std::size_t r = 0; r < B; ++r) {
            std::vector<double> row(features.ptr() + r * F, features.ptr() + (r + 1) * F);
            const std::size_t expert = gate_select(gate, row);
            const EmbedModel m{gate.arch, gate.experts[expert]};
            const std::vector<double> v = visual_embed(m, row);
            std::copy(v.begin(), v.end(), out.ptr() + r * out.cols());
        }
        return out;
    };
}

EvalContext make_eval_context(const Dataset& data, const Benchmark& benchmark,
                              const EmbeddingTable& table) {
    validate_benchmark(benchmark, data);
    EvalContext ctx;
    ctx.data = &data;
    ctx.benchmark = &benchmark;

    std::vector<std::int64_t> all_ids;
    all_ids.reserve(data.facts.size());
    for (const Fact& f : data.facts) all_ids.push_back(f.id);
    ctx.bank = build_label_bank(table, data, std::move(all_ids));

    ctx.all_candidates.resize(ctx.bank.size());
    for (std::size_t i = 0; i < ctx.bank.size(); ++i) ctx.all_candidates[i] = i;

    ctx.task_candidates.reserve(benchmark.tasks.size());
    for (const Task& t : benchmark.tasks) {
        std::vector<std::size_t> cands;
        cands.reserve(t.fact_ids.size());
        for (const auto id : t.fact_ids) cands.push_back(ctx.bank.index_of.at(id));
        std::sort(cands.begin(), cands.end());
        ctx.task_candidates.push_back(std::move(cands));
    }
    return ctx;
}

bool topk_hit_from_scores(const std::vector<double>& scores,
                          const std::vector<std::int64_t>& cand_ids, std::int64_t gold_id,
                          std::size_t K) {
    require(K >= 1, "topk_hit: K must be >= 1");
    require(scores.size() == cand_ids.size(), "topk_hit: ", scores.size(), " scores for ",
            cand_ids.size(), " candidates");
    std::size_t gold_pos = cand_ids.size();
    for (std::size_t c = 0; c < cand_ids.size(); ++c) {
        if (cand_ids[c] == gold_id) {
            gold_pos = c;
            break;
        }
    }
    require(gold_pos < cand_ids.size(), "topk_hit: gold fact ", gold_id,
            " is not among the candidates");
    const double g = scores[gold_pos];
    std::size_t worse = 0;
    for (std::size_t c = 0; c < cand_ids.size(); ++c) {
        if (c == gold_pos) continue;
        if (scores[c] > g || (scores[c] == g && cand_ids[c] < gold_id)) ++worse;
    }
    return worse < K;
}

std::vector<std::uint8_t> topk_hits(const EmbedFn& model, const EvalContext& ctx,
                                    const std::vector<std::int64_t>& example_ids,
                                    const std::vector<std::size_t>& candidates, std::size_t K) {
    require(K >= 1, "topk_hits: K must be >= 1");
    require(!candidates.empty(), "topk_hits: empty candidate set");
    const std::size_t B = example_ids.size();
    if (B == 0) return {};

    const Dataset& data = *ctx.data;
    const std::size_t F = data.feature_dim;
    const std::size_t width = 3 * ctx.bank.d;

    Tensor X = Tensor::zeros({B, F});
    std::vector<std::size_t> gold_pos(B);
    for (std::size_t r = 0; r < B; ++r) {
        const Example& e = data.example_by_id(example_ids[r]);
        std::copy(e.features.begin(), e.features.end(), X.ptr() + r * F);
        const std::size_t gold_bank = ctx.bank.index_of.at(e.fact_id);
        const auto it = std::lower_bound(candidates.begin(), candidates.end(), gold_bank);
        require(it != candidates.end() && *it == gold_bank, "topk_hits: example ",
                example_ids[r], " gold fact ", e.fact_id, " is not among the candidates");
        gold_pos[r] = static_cast<std::size_t>(it - candidates.begin());
    }

    Tensor V = model(X);
    require(V.rows() == B && V.cols() == width, "topk_hits: embedder returned ", V.shape_str(),
            ", expected (", B, ", ", width, ")");
    for (std::size_t r = 0; r < B; ++r) normalize_blocks_exact(V.ptr() + r * width, ctx.bank.d);

    const std::size_t C = candidates.size();
    std::vector<double> cand_rows(C * width);
    for (std::size_t c = 0; c < C; ++c) {
        std::copy(ctx.bank.row(candidates[c]), ctx.bank.row(candidates[c]) + width,
                  cand_rows.data() + c * width);
    }
    Tensor scores = Tensor::zeros({B, C});
    kernels::matmul_nt(V.ptr(), cand_rows.data(), scores.ptr(), B, width, C, false);

    // Each flag is written independently; thread chunking cannot change it.
    std::vector<std::uint8_t> hits(B, 0);
    parallel_for(B, [&](std::size_t begin, std::size_t end) {
        for (std::size_t r = begin; r < end; ++r) {
            const double* s = scores.ptr() + r * C;
            const double g = s[gold_pos[r]];
            std::size_t worse = 0;
            for (std::size_t c = 0; c < C; ++c) {
                if (c == gold_pos[r]) continue;
                if (s[c] > g || (s[c] == g && c < gold_pos[r])) ++worse;
            }
            hits[r] = worse < K ? 1 : 0;
        }
    });
    return hits;
}

namespace {

double hit_rate(const std::vector<std::uint8_t>& hits) {
    std::size_t count = 0;
    for (const auto h : hits) count += h;
    return static_cast<double>(count) / static_cast<double>(hits.size());
}

const std::vector<std::size_t>& candidates_for(const EvalContext& ctx, const Task& task,
                                               Metric metric) {
    if (metric == Metric::Standard) {
        const std::size_t pos = static_cast<std::size_t>(task.index) - 1;
        require(pos < ctx.task_candidates.size(), "eval: task index ", task.index,
                " outside the benchmark");
        return ctx.task_candidates[pos];
    }
    return ctx.all_candidates;
}

} // namespace

double standard_accuracy(const EmbedFn& model, const EvalContext& ctx, const Task& task,
                         std::size_t K) {
    require(!task.test_example_ids.empty(), "standard_accuracy: task ", task.index,
            " has an empty test set");
    return hit_rate(topk_hits(model, ctx, task.test_example_ids,
                              candidates_for(ctx, task, Metric::Standard), K));
}

double generalized_accuracy(const EmbedFn& model, const EvalContext& ctx, const Task& task,
                            std::size_t K) {
    require(!task.test_example_ids.empty(), "generalized_accuracy: task ", task.index,
            " has an empty test set");
    return hit_rate(topk_hits(model, ctx, task.test_example_ids, ctx.all_candidates, K));
}

std::pair<double, double> summarize(const std::vector<double>& accs,
                                    const std::vector<std::size_t>& test_sizes) {
    require(!accs.empty(), "summarize: no accuracies");
    require(accs.size() == test_sizes.size(), "summarize: ", accs.size(), " accuracies vs ",
            test_sizes.size(), " sizes");
    double mean = 0.0, weighted = 0.0;
    std::size_t total = 0;
    for (std::size_t i = 0; i < accs.size(); ++i) {
        mean += accs[i];
        weighted += accs[i] * static_cast<double>(test_sizes[i]);
        total += test_sizes[i];
    }
    require(total > 0, "summarize: all test sets empty");
    return {mean / static_cast<double>(accs.size()), weighted / static_cast<double>(total)};
}

TransferMatrix build_R(const std::vector<EmbedFn>& models, const EmbedFn& init_model,
                       const EvalContext& ctx, std::size_t K, Metric metric) {
    const std::size_t N = ctx.benchmark->tasks.size();
    require(models.size() == N, "build_R: ", models.size(), " checkpoints for ", N, " tasks");

    TransferMatrix t;
    t.R.assign(N, std::vector<double>(N, 0.0));
    t.baseline.assign(N, 0.0);
    for (std::size_t j = 0; j < N; ++j) {
        const Task& task = ctx.benchmark->tasks[j];
        const auto& cands = candidates_for(ctx, task, metric);
        for (std::size_t n = 0; n < N; ++n) {
            t.R[j][n] = hit_rate(topk_hits(models[n], ctx, task.test_example_ids, cands, K));
        }
        t.baseline[j] = hit_rate(topk_hits(init_model, ctx, task.test_example_ids, cands, K));
    }
    return t;
}

std::pair<double, double> transfer_metrics(const TransferMatrix& t) {
    const std::size_t N = t.R.size();
    require(N >= 2, "transfer_metrics: need at least 2 tasks, got ", N);
    require(t.baseline.size() == N, "transfer_metrics: baseline size mismatch");
    double bwt = 0.0, fwt = 0.0;
    for (std::size_t n = 0; n + 1 < N; ++n) bwt += t.R[n][N - 1] - t.R[n][n];
    for (std::size_t n = 1; n < N; ++n) fwt += t.R[n][n - 1] - t.baseline[n];
    const double denom = static_cast<double>(N - 1);
    return {bwt / denom, fwt / denom};
}

std::vector<double> gained_knowledge(const TransferMatrix& t,
                                     const std::vector<std::size_t>& test_sizes) {
    const std::size_t N = t.R.size();
    require(test_sizes.size() == N, "gained_knowledge: ", test_sizes.size(), " sizes for ", N,
            " tasks");
    std::size_t total = 0;
    for (const auto s : test_sizes) total += s;
    require(total > 0, "gained_knowledge: all test sets empty");
    std::vector<double> out(N, 0.0);
    for (std::size_t n = 0; n < N; ++n) {
        double sum = 0.0;
        for (std::size_t j = 0; j < N; ++j) {
            sum += t.R[j][n] * static_cast<double>(test_sizes[j]);
        }
        out[n] = sum / static_cast<double>(total);
    }
    return out;
}

std::vector<std::size_t> default_bin_edges() {
    return {1, 2, 6, 11, 51, 101, 501};
}

std::vector<BinRow> longtail_bins(const EmbedFn& model, const EvalContext& ctx,
                                  const std::vector<std::size_t>& edges, std::size_t K,
                                  Metric metric) {
    require(!edges.empty(), "longtail_bins: no bin edges");
    require(edges.front() == 1, "longtail_bins: first bin must start at 1, got ", edges.front());
    for (std::size_t i = 1; i < edges.size(); ++i) {
        require(edges[i] > edges[i - 1], "longtail_bins: edges must be strictly increasing");
    }

    std::vector<BinRow> bins(edges.size());
    for (std::size_t i = 0; i < edges.size(); ++i) {
        bins[i].lo = edges[i];
        bins[i].hi = i + 1 < edges.size() ? edges[i + 1] - 1 : SIZE_MAX;
    }
    auto bin_of = [&](std::size_t count) {
        require(count >= 1, "longtail_bins: train count ", count,
                " is outside the covered range [1, inf)");
        std::size_t b = 0;
        while (b + 1 < edges.size() && count >= edges[b + 1]) ++b;
        return b;
    };

    std::vector<std::size_t> hits_per_bin(bins.size(), 0);
    for (const Task& task : ctx.benchmark->tasks) {
        if (task.test_example_ids.empty()) continue;
        const auto hits = topk_hits(model, ctx, task.test_example_ids,
                                    candidates_for(ctx, task, metric), K);
        for (std::size_t r = 0; r < hits.size(); ++r) {
            const Example& e = ctx.data->example_by_id(task.test_example_ids[r]);
            const std::size_t b = bin_of(ctx.data->train_count(e.fact_id));
            ++bins[b].support;
            hits_per_bin[b] += hits[r];
        }
    }
    for (std::size_t b = 0; b < bins.size(); ++b) {
        bins[b].accuracy = bins[b].support == 0
                               ? 0.0
                               : static_cast<double>(hits_per_bin[b]) /
                                     static_cast<double>(bins[b].support);
    }
    return bins;
}

std::vector<FewshotRow> fewshot_accuracy(const EmbedFn& model, const EvalContext& ctx,
                                         std::size_t max_count, std::size_t K, Metric metric) {
    std::vector<FewshotRow> rows;
    for (const Task& task : ctx.benchmark->tasks) {
        std::vector<std::int64_t> subset;
        for (const auto id : task.test_example_ids) {
            const Example& e = ctx.data->example_by_id(id);
            if (ctx.data->train_count(e.fact_id) <= max_count) subset.push_back(id);
        }
        if (subset.empty()) continue;
        const auto hits = topk_hits(model, ctx, subset, candidates_for(ctx, task, metric), K);
        rows.push_back({task.index, subset.size(), hit_rate(hits)});
    }
    return rows;
}

std::vector<FactTypeRow> fact_type_breakdown(const EmbedFn& model, const EvalContext& ctx,
                                             const Task& task, std::size_t K, Metric metric) {
    std::vector<FactTypeRow> rows;
    for (const FactType type : {FactType::S, FactType::SP, FactType::SPO}) {
        std::vector<std::int64_t> subset;
        for (const auto id : task.test_example_ids) {
            const Example& e = ctx.data->example_by_id(id);
            if (fact_type(ctx.data->fact_by_id(e.fact_id)) == type) subset.push_back(id);
        }
        if (subset.empty()) continue;
        const auto hits = topk_hits(model, ctx, subset, candidates_for(ctx, task, metric), K);
        rows.push_back({type, subset.size(), hit_rate(hits)});
    }
    return rows;
}

std::vector<SpoCell> spo_generalization(const EmbedFn& model, const EvalContext& ctx,
                                        std::size_t rare_max, std::size_t th, std::size_t K) {
    require(th >= 1, "spo_generalization: threshold must be >= 1, got ", th);
    require(rare_max >= 1, "spo_generalization: rare cap must be >= 1, got ", rare_max);
    const Dataset& data = *ctx.data;

    // Sub-pattern frequencies over training examples only.
    constexpr char kSep = '\x1f';
    std::map<std::string, std::size_t> count;
    for (const Example& e : data.examples) {
        if (!e.is_train) continue;
        const Fact& f = data.fact_by_id(e.fact_id);
        const std::string s = lowercase(f.subject);
        ++count["S" + std::string(1, kSep) + s];
        if (f.predicate) {
            const std::string p = lowercase(*f.predicate);
            ++count["P" + std::string(1, kSep) + p];
            ++count["SP" + std::string(1, kSep) + s + kSep + p];
            if (f.object) {
                const std::string o = lowercase(*f.object);
                ++count["O" + std::string(1, kSep) + o];
                ++count["PO" + std::string(1, kSep) + p + kSep + o];
                ++count["SO" + std::string(1, kSep) + s + kSep + o];
            }
        }
    }
    auto freq = [&](const std::string& key) {
        const auto it = count.find(key);
        return it == count.end() ? std::size_t{0} : it->second;
    };

    struct FactFlags {
        bool sp, po, so, s, p, o;
    };
    std::vector<std::pair<std::int64_t, FactFlags>> rare;
    for (const Fact& f : data.facts) {
        if (fact_type(f) != FactType::SPO) continue;
        if (data.train_count(f.id) > rare_max) continue;
        const std::string s = lowercase(f.subject);
        const std::string p = lowercase(*f.predicate);
        const std::string o = lowercase(*f.object);
        FactFlags flags{};
        flags.sp = freq("SP" + std::string(1, kSep) + s + kSep + p) >= th;
        flags.po = freq("PO" + std::string(1, kSep) + p + kSep + o) >= th;
        flags.so = freq("SO" + std::string(1, kSep) + s + kSep + o) >= th;
        flags.s = freq("S" + std::string(1, kSep) + s) >= th;
        flags.p = freq("P" + std::string(1, kSep) + p) >= th;
        flags.o = freq("O" + std::string(1, kSep) + o) >= th;
        rare.emplace_back(f.id, flags);
    }

    const std::vector<std::pair<std::string, std::function<bool(const FactFlags&)>>> conditions =
        {
            {"SP,O", [](const FactFlags& f) { return f.sp && f.o; }},
            {"P,SO", [](const FactFlags& f) { return f.p && f.so; }},
            {"PO,S", [](const FactFlags& f) { return f.po && f.s; }},
            {"SP,PO,SO", [](const FactFlags& f) { return f.sp && f.po && f.so; }},
            {"SP,PO", [](const FactFlags& f) { return f.sp && f.po; }},
            {"SP,SO", [](const FactFlags& f) { return f.sp && f.so; }},
            {"PO,SO", [](const FactFlags& f) { return f.po && f.so; }},
        };

    // Test examples per fact id, in benchmark order.
    std::unordered_map<std::int64_t, std::vector<std::int64_t>> test_of_fact;
    for (const Task& task : ctx.benchmark->tasks) {
        for (const auto id : task.test_example_ids) {
            test_of_fact[data.example_by_id(id).fact_id].push_back(id);
        }
    }

    std::vector<SpoCell> cells;
    cells.reserve(conditions.size());
    for (const auto& [name, pred] : conditions) {
        SpoCell cell;
        cell.condition = name;
        std::vector<std::int64_t> subset;
        for (const auto& [fact_id, flags] : rare) {
            if (!pred(flags)) continue;
            ++cell.n_facts;
            const auto it = test_of_fact.find(fact_id);
            if (it != test_of_fact.end()) {
                subset.insert(subset.end(), it->second.begin(), it->second.end());
            }
        }
        cell.n_examples = subset.size();
        if (!subset.empty()) {
            cell.accuracy = hit_rate(topk_hits(model, ctx, subset, ctx.all_candidates, K));
        }
        cells.push_back(std::move(cell));
    }
    return cells;
}

} // namespace llfl
