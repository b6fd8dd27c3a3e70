// Release gate: every property the library promises, one line per check.
// Each criterion prints exactly one [PASS]/[FAIL] line; any failure turns
// the exit code nonzero.  Tolerances are pinned here, not configurable.

#include "llfl/data.hpp"
#include "llfl/embed.hpp"
#include "llfl/eval.hpp"
#include "llfl/fact.hpp"
#include "llfl/graph.hpp"
#include "llfl/io.hpp"
#include "llfl/lll.hpp"
#include "llfl/rng.hpp"
#include "llfl/splitter.hpp"

#include "testutil.hpp"

#include <chrono>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include <sys/wait.h>

using namespace llfl;
namespace fs = std::filesystem;

namespace {

constexpr double kGradTol = 1e-4;         // worst relative error, AD vs FD
constexpr double kHandTransferTol = 1e-15;  // hand R-matrix arithmetic
constexpr double kMergeLimitTol = 1e-6;   // mode merge: fixed point + precision limit
constexpr double kRecombineTol = 1e-12;   // slice recombination to parent
constexpr double kMinForgetDrop = 0.20;   // naive forgetting on clustered tasks
constexpr double kMinGateAccuracy = 0.90; // expert routing on held-out inputs
constexpr std::size_t kTopK = 5;

void check(bool ok, const std::string& why) {
    if (!ok) throw std::runtime_error(why);
}

std::string fmt(double x) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.6g", x);
    return buf;
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

// ---------------------------------------------------------------- 1

void criterion_gradients() {
    Rng rng(4001);
    double worst = 0.0;
    for (int trial = 0; trial < 100; ++trial) {
        testutil::NetCase c = testutil::make_everything_net(rng);
        worst = std::max(worst, testutil::max_fd_error(c.g, c.params, c.inputs, "y"));
    }
    check(worst < kGradTol, "worst relative error " + fmt(worst) + " >= " + fmt(kGradTol));
}

// ---------------------------------------------------------------- 2

struct FactWorld {
    EmbeddingTable table;
    std::vector<std::string> tokens;
};

FactWorld make_fact_world(Rng& rng) {
    FactWorld w;
    w.table.dim = 6;
    for (int i = 0; i < 24; ++i) {
        std::string tok = "tok" + std::to_string(i);
        std::vector<double> v(w.table.dim);
        double sq = 0.0;
        for (double& x : v) {
            x = rng.normal();
            sq += x * x;
        }
        for (double& x : v) x /= std::sqrt(sq);
        w.table.vectors[tok] = v;
        w.tokens.push_back(std::move(tok));
    }
    return w;
}

Fact random_fact(const FactWorld& w, Rng& rng) {
    Fact f;
    f.subject = w.tokens[rng.below(w.tokens.size())];
    const std::size_t shape = rng.below(3);  // S, SP, SPO
    if (shape >= 1) f.predicate = w.tokens[rng.below(w.tokens.size())];
    if (shape >= 2) f.object = w.tokens[rng.below(w.tokens.size())];
    return f;
}

// Fresh tokens in every slot `f` defines but `other` does not.  Shared
// slots keep their content, so the masked distance must not move.
Fact scramble_unshared(const Fact& f, const Fact& other, const FactWorld& w, Rng& rng) {
    Fact out = f;
    if (f.predicate && !other.predicate) out.predicate = w.tokens[rng.below(w.tokens.size())];
    if (f.object && !other.object) out.object = w.tokens[rng.below(w.tokens.size())];
    return out;
}

void criterion_distance_axioms() {
    Rng rng(4002);
    const FactWorld w = make_fact_world(rng);
    for (int pair = 0; pair < 1000; ++pair) {
        const Fact fa = random_fact(w, rng);
        const Fact fb = random_fact(w, rng);
        const FactVector va = embed_fact(w.table, fa);
        const FactVector vb = embed_fact(w.table, fb);
        const double d = fact_distance(va, vb);
        check(d == fact_distance(vb, va), "asymmetric distance at pair " + std::to_string(pair));
        check(fact_distance(va, va) == 0.0 && fact_distance(vb, vb) == 0.0,
              "nonzero self distance at pair " + std::to_string(pair));
        check(d >= 0.0 && d <= 4.0, "distance " + fmt(d) + " outside [0, 4]");
        const FactVector va2 = embed_fact(w.table, scramble_unshared(fa, fb, w, rng));
        const FactVector vb2 = embed_fact(w.table, scramble_unshared(fb, fa, w, rng));
        check(fact_distance(va2, vb2) == d,
              "distance moved when an unshared slot changed at pair " + std::to_string(pair));
    }

    // Worked case: one extra defined slot on one side must not register.
    EmbeddingTable t2;
    t2.dim = 3;
    t2.vectors["person"] = {0.6, 0.8, 0.0};
    t2.vectors["jumping"] = {0.0, 0.0, 1.0};
    Fact person{1, "person", std::nullopt, std::nullopt};
    Fact person_jumping{2, "person", std::string("jumping"), std::nullopt};
    const double d0 = fact_distance(embed_fact(t2, person), embed_fact(t2, person_jumping));
    check(d0 == 0.0, "subject-only overlap gave " + fmt(d0) + " instead of 0");
}

// ---------------------------------------------------------------- 3

void criterion_clustering_oracle() {
    Rng rng(4003);
    for (int trial = 0; trial < 50; ++trial) {
        const std::size_t n = 2 + rng.below(63);  // up to 64 leaves
        const auto condensed = testutil::random_condensed(n, rng, /*distinct=*/true);
        const Dendrogram fast = agglomerate(condensed, n);
        const Dendrogram slow = testutil::brute_force_single_linkage(condensed, n);
        check(fast.merges.size() == slow.merges.size(),
              "merge count mismatch at trial " + std::to_string(trial));
        for (std::size_t i = 0; i < fast.merges.size(); ++i) {
            const Merge& a = fast.merges[i];
            const Merge& b = slow.merges[i];
            check(a.left == b.left && a.right == b.right && a.height == b.height &&
                      a.size == b.size,
                  "merge " + std::to_string(i) + " differs at trial " + std::to_string(trial));
        }
    }
}

// ---------------------------------------------------------------- 4

void criterion_metric_dominance() {
    Rng rng(4004);
    std::size_t violations = 0;
    std::size_t comparisons = 0;
    for (int cfg = 0; cfg < 1000; ++cfg) {
        const std::size_t m = 2 + rng.below(11);
        std::vector<std::int64_t> ids(m);
        std::vector<double> scores(m);
        const bool coarse = cfg % 2 == 0;  // force ties half the time
        for (std::size_t i = 0; i < m; ++i) {
            ids[i] = static_cast<std::int64_t>(3 * i + 1);
            scores[i] = coarse ? 0.25 * static_cast<double>(rng.below(5))
                               : rng.uniform(0.0, 1.0);
        }
        // Deal the label space into 1..4 nonempty tasks.
        const std::size_t n_tasks = 1 + rng.below(std::min<std::size_t>(4, m));
        std::vector<std::vector<std::size_t>> tasks(n_tasks);
        std::vector<std::size_t> order(m);
        for (std::size_t i = 0; i < m; ++i) order[i] = i;
        rng.shuffle(order);
        for (std::size_t i = 0; i < m; ++i) tasks[i % n_tasks].push_back(order[i]);

        for (const auto& task : tasks) {
            std::vector<std::int64_t> sub_ids;
            std::vector<double> sub_scores;
            for (std::size_t i : task) {
                sub_ids.push_back(ids[i]);
                sub_scores.push_back(scores[i]);
            }
            for (std::size_t gold : task) {
                for (std::size_t K : {std::size_t{1}, std::size_t{2}, std::size_t{5}, m}) {
                    const bool general = topk_hit_from_scores(scores, ids, ids[gold], K);
                    const bool standard = topk_hit_from_scores(sub_scores, sub_ids, ids[gold], K);
                    ++comparisons;
                    if (general && !standard) ++violations;
                }
            }
        }
    }
    check(comparisons > 0, "no comparisons ran");
    check(violations == 0, std::to_string(violations) + " of " + std::to_string(comparisons) +
                               " score configurations broke the dominance");

    // Same property through the full accuracy path on a live model.
    testutil::SyntheticSpec spec;
    spec.clusters = 2;
    spec.facts_per_cluster = 5;
    spec.train_per_fact = 4;
    spec.test_per_fact = 3;
    spec.seed = 44;
    const testutil::Synthetic s = testutil::make_synthetic(spec);
    const Benchmark bench = random_split(s.data, 2, 10, 44);
    const EvalContext ctx = make_eval_context(s.data, bench, s.table);
    const ModelArch arch{s.data.feature_dim, 16, s.table.dim};
    Hyper h;
    h.epochs = 3;
    h.seed = 44;
    LLLState state = init_state(arch, Method::Finetune, h);
    std::vector<EmbedFn> models = {make_embed_fn(EmbedModel{arch, state.theta_init})};
    for (const Task& task : bench.tasks) {
        state = train_task(state, s.data, s.table, task);
        models.push_back(make_embed_fn(EmbedModel{arch, state.theta}));
    }
    for (const EmbedFn& model : models) {
        for (const Task& task : bench.tasks) {
            for (std::size_t K : {std::size_t{1}, std::size_t{3}, std::size_t{5}}) {
                const double gen = generalized_accuracy(model, ctx, task, K);
                const double std_acc = standard_accuracy(model, ctx, task, K);
                check(gen <= std_acc, "model-level violation: generalized " + fmt(gen) +
                                          " > standard " + fmt(std_acc));
            }
        }
    }
}

// ---------------------------------------------------------------- 5

void criterion_transfer_identities() {
    // A model that never moves cannot transfer in either direction.
    testutil::SyntheticSpec spec;
    spec.clusters = 2;
    spec.facts_per_cluster = 5;
    spec.train_per_fact = 4;
    spec.test_per_fact = 2;
    spec.seed = 45;
    const testutil::Synthetic s = testutil::make_synthetic(spec);
    const Benchmark bench = random_split(s.data, 3, 10, 45);
    const EvalContext ctx = make_eval_context(s.data, bench, s.table);
    const ModelArch arch{s.data.feature_dim, 16, s.table.dim};
    Rng init_rng(45);
    const EmbedFn frozen = make_embed_fn(EmbedModel{arch, init_embed_params(arch, init_rng)});
    const std::vector<EmbedFn> frozen_models(bench.tasks.size(), frozen);
    const TransferMatrix tm = build_R(frozen_models, frozen, ctx, kTopK, Metric::Generalized);
    const auto [bwt_frozen, fwt_frozen] = transfer_metrics(tm);
    check(bwt_frozen == 0.0, "frozen model backward transfer " + fmt(bwt_frozen) + " != 0");
    check(fwt_frozen == 0.0, "frozen model forward transfer " + fmt(fwt_frozen) + " != 0");

    // Hand-checked 3-task matrix.
    TransferMatrix hand;
    hand.R = {{0.5, 0.3, 0.1}, {0.2, 0.6, 0.4}, {0.0, 0.1, 0.9}};
    hand.baseline = {0.05, 0.1, 0.2};
    const auto [bwt, fwt] = transfer_metrics(hand);
    const double bwt_want = ((0.1 - 0.5) + (0.4 - 0.6)) / 2.0;
    const double fwt_want = ((0.2 - 0.1) + (0.1 - 0.2)) / 2.0;
    check(std::fabs(bwt - bwt_want) <= kHandTransferTol,
          "backward transfer " + fmt(bwt) + " vs hand value " + fmt(bwt_want));
    check(std::fabs(fwt - fwt_want) <= kHandTransferTol,
          "forward transfer " + fmt(fwt) + " vs hand value " + fmt(fwt_want));
}

// ---------------------------------------------------------------- 6

struct SequenceResult {
    double first = 0.0;  // task-1 generalized accuracy right after task 1
    double last = 0.0;   // same quantity after the final task
    double drop() const { return first - last; }
};

SequenceResult run_sequence(const testutil::Synthetic& s, const Benchmark& bench, Method method,
                            double lambda, std::uint64_t seed) {
    const ModelArch arch{s.data.feature_dim, 64, s.table.dim};
    Hyper h;
    h.lambda = lambda;
    h.epochs = 20;
    h.lr = 0.1;
    h.batch = 32;
    h.seed = seed;
    const EvalContext ctx = make_eval_context(s.data, bench, s.table);
    LLLState state = init_state(arch, method, h);
    SequenceResult r;
    for (const Task& task : bench.tasks) {
        state = train_task(state, s.data, s.table, task);
        const EmbedFn model = make_embed_fn(EmbedModel{arch, state.theta});
        const double acc = generalized_accuracy(model, ctx, bench.tasks.front(), kTopK);
        if (task.index == 1) r.first = acc;
        r.last = acc;
    }
    return r;
}

void criterion_forgetting_direction() {
    const std::vector<double> lambdas = {0.1, 1.0, 10.0};
    const std::size_t n_methods = 1 + lambdas.size();  // naive + one per lambda
    std::vector<double> sem_drop(n_methods, 0.0), rand_drop(n_methods, 0.0);
    std::vector<double> sem_last(n_methods, 0.0);
    const int n_seeds = 5;

    for (std::uint64_t seed = 1; seed <= n_seeds; ++seed) {
        testutil::SyntheticSpec spec;  // 4 clusters x 10 facts, 20 features, 10 train / 5 test
        spec.seed = seed;
        spec.po_scatter = true;  // discriminable labels inside each cluster
        const testutil::Synthetic s = testutil::make_synthetic(spec);
        const Benchmark semantic = semantic_split(s.data, s.table, 4, seed).benchmark;
        const Benchmark random = random_split(s.data, 4, 100, seed);
        for (std::size_t m = 0; m < n_methods; ++m) {
            const Method method = m == 0 ? Method::Finetune : Method::MAS;
            const double lambda = m == 0 ? 0.0 : lambdas[m - 1];
            const SequenceResult on_sem = run_sequence(s, semantic, method, lambda, seed);
            const SequenceResult on_rand = run_sequence(s, random, method, lambda, seed);
            sem_drop[m] += on_sem.drop() / n_seeds;
            rand_drop[m] += on_rand.drop() / n_seeds;
            sem_last[m] += on_sem.last / n_seeds;
        }
    }

    check(sem_drop[0] >= kMinForgetDrop,
          "naive training forgot only " + fmt(100.0 * sem_drop[0]) + " points on clustered tasks");
    double best_reg_last = sem_last[1];
    for (std::size_t m = 2; m < n_methods; ++m) best_reg_last = std::max(best_reg_last, sem_last[m]);
    check(best_reg_last >= sem_last[0],
          "best importance-weighted retention " + fmt(best_reg_last) +
              " below naive retention " + fmt(sem_last[0]));
    for (std::size_t m = 0; m < n_methods; ++m) {
        check(rand_drop[m] <= sem_drop[m],
              "method " + std::to_string(m) + " forgot more on mixed tasks (" +
                  fmt(rand_drop[m]) + ") than on clustered ones (" + fmt(sem_drop[m]) + ")");
    }
}

// ---------------------------------------------------------------- 7

void criterion_merge_identities() {
    const ModelArch arch{6, 5, 3};
    Rng rng(4007);

    // Equal power-of-two weights: the merge must equal the plain average
    // bit for bit (scaling by 0.25 commutes with every rounding step).
    std::vector<Checkpoint> cps(4);
    for (std::size_t n = 0; n < cps.size(); ++n) {
        cps[n].task_index = static_cast<int>(n + 1);
        cps[n].params = init_embed_params(arch, rng);
    }
    const ParamSet merged = imm_merge_mean(cps, {0.25, 0.25, 0.25, 0.25});
    for (const auto& name : cps[0].params.names()) {
        const Tensor& got = merged.get(name);
        Tensor want = cps[0].params.get(name);
        for (std::size_t n = 1; n < cps.size(); ++n) {
            const Tensor& tn = cps[n].params.get(name);
            for (std::size_t i = 0; i < want.data.size(); ++i) want.data[i] += tn.data[i];
        }
        for (std::size_t i = 0; i < want.data.size(); ++i) {
            check(got.data[i] == 0.25 * want.data[i],
                  "mean merge differs from the average at " + name + "[" + std::to_string(i) + "]");
        }
    }

    const auto filled_like = [](const ParamSet& params, const std::function<double()>& draw) {
        ParamSet f;
        for (const auto& name : params.names()) {
            Tensor t = Tensor::zeros(params.get(name).shape);
            for (double& x : t.data) x = draw();
            f.insert(name, std::move(t));
        }
        return f;
    };

    // Identical checkpoints are a fixed point of the precision-weighted merge.
    std::vector<Checkpoint> same(3);
    const ParamSet theta = init_embed_params(arch, rng);
    const ParamSet fisher = filled_like(theta, [&] { return rng.uniform(0.5, 2.0); });
    for (auto& cp : same) {
        cp.params = theta;
        cp.fisher = fisher;
        cp.has_fisher = true;
    }
    const ParamSet fixed = imm_merge_mode(same, {0.25, 0.5, 0.25});
    for (const auto& name : theta.names()) {
        const Tensor& got = fixed.get(name);
        const Tensor& want = theta.get(name);
        for (std::size_t i = 0; i < want.data.size(); ++i) {
            check(std::fabs(got.data[i] - want.data[i]) <= kMergeLimitTol,
                  "mode merge moved off the shared checkpoint at " + name);
        }
    }

    // Overwhelming precision on one side pins the merge to that side.
    std::vector<Checkpoint> two(2);
    two[0].params = init_embed_params(arch, rng);
    two[1].params = init_embed_params(arch, rng);
    two[0].fisher = filled_like(two[0].params, [] { return 1e12; });
    two[1].fisher = filled_like(two[1].params, [] { return 1.0; });
    for (auto& cp : two) cp.has_fisher = true;
    const ParamSet pinned = imm_merge_mode(two, {0.5, 0.5});
    for (const auto& name : theta.names()) {
        const Tensor& got = pinned.get(name);
        const Tensor& want = two[0].params.get(name);
        for (std::size_t i = 0; i < want.data.size(); ++i) {
            check(std::fabs(got.data[i] - want.data[i]) <= kMergeLimitTol,
                  "precision-weighted limit missed at " + name);
        }
    }
}

// ---------------------------------------------------------------- 8

void criterion_expert_gate() {
    testutil::SyntheticSpec spec;
    spec.clusters = 2;
    spec.seed = 8;
    const testutil::Synthetic s = testutil::make_synthetic(spec);
    const SemanticSplit split = semantic_split(s.data, s.table, 2, 8);
    const ModelArch arch{s.data.feature_dim, 64, s.table.dim};
    Hyper h;
    h.epochs = 10;
    h.seed = 8;
    LLLState state = init_state(arch, Method::ExpertGate, h);
    for (const Task& task : split.benchmark.tasks) {
        state = train_task(state, s.data, s.table, task);
    }
    std::size_t correct = 0, total = 0;
    for (std::size_t t = 0; t < split.benchmark.tasks.size(); ++t) {
        for (const auto eid : split.benchmark.tasks[t].test_example_ids) {
            correct += gate_select(state.gate, s.data.example_by_id(eid).features) == t ? 1 : 0;
            ++total;
        }
    }
    const double acc = static_cast<double>(correct) / static_cast<double>(total);
    check(acc >= kMinGateAccuracy, "routing accuracy " + fmt(acc) + " below " +
                                       fmt(kMinGateAccuracy) + " on held-out inputs");
}

// ---------------------------------------------------------------- 9

double hits_mean(const EmbedFn& model, const EvalContext& ctx,
                 const std::vector<std::int64_t>& ids,
                 const std::vector<std::size_t>& candidates) {
    if (ids.empty()) return 0.0;
    const auto flags = topk_hits(model, ctx, ids, candidates, kTopK);
    double sum = 0.0;
    for (auto f : flags) sum += f;
    return sum / static_cast<double>(flags.size());
}

void criterion_slice_identities() {
    testutil::SyntheticSpec spec;
    spec.clusters = 2;
    spec.facts_per_cluster = 10;
    spec.seed = 9;
    spec.train_counts = {1, 1, 2, 3, 5, 6, 8, 12, 20, 30, 1, 2, 4, 5, 7, 10, 15, 25, 40, 60};
    const testutil::Synthetic s = testutil::make_synthetic(spec);
    const Benchmark bench = random_split(s.data, 3, 20, 9);
    const EvalContext ctx = make_eval_context(s.data, bench, s.table);
    const ModelArch arch{s.data.feature_dim, 32, s.table.dim};
    Hyper h;
    h.epochs = 3;
    h.seed = 9;
    LLLState state = init_state(arch, Method::Finetune, h);
    for (const Task& task : bench.tasks) state = train_task(state, s.data, s.table, task);
    const EmbedFn model = make_embed_fn(EmbedModel{arch, state.theta});

    std::vector<std::int64_t> all_test;
    std::size_t n_test = 0;
    for (const Task& task : bench.tasks) {
        all_test.insert(all_test.end(), task.test_example_ids.begin(),
                        task.test_example_ids.end());
        n_test += task.test_example_ids.size();
    }

    for (const Metric metric : {Metric::Generalized, Metric::Standard}) {
        // Frequency bins tile the test set and average back to the whole.
        const auto bins = longtail_bins(model, ctx, default_bin_edges(), kTopK, metric);
        std::size_t support = 0;
        double weighted = 0.0;
        for (const BinRow& b : bins) {
            support += b.support;
            weighted += static_cast<double>(b.support) * b.accuracy;
        }
        check(support == n_test, "bin supports cover " + std::to_string(support) + " of " +
                                     std::to_string(n_test) + " test examples");
        double parent = 0.0;
        if (metric == Metric::Generalized) {
            parent = hits_mean(model, ctx, all_test, ctx.all_candidates) *
                     static_cast<double>(n_test);
        } else {
            for (std::size_t t = 0; t < bench.tasks.size(); ++t) {
                const auto& ids = bench.tasks[t].test_example_ids;
                parent += hits_mean(model, ctx, ids, ctx.task_candidates[t]) *
                          static_cast<double>(ids.size());
            }
        }
        check(std::fabs(weighted - parent) <= kRecombineTol * static_cast<double>(n_test),
              "bin accuracies do not recombine to the whole-set accuracy");

        // Per-shape cells tile each task and average back to its accuracy.
        for (std::size_t t = 0; t < bench.tasks.size(); ++t) {
            const Task& task = bench.tasks[t];
            const auto rows = fact_type_breakdown(model, ctx, task, kTopK, metric);
            std::size_t cell_support = 0;
            double cell_weighted = 0.0;
            for (const FactTypeRow& r : rows) {
                cell_support += r.support;
                cell_weighted += static_cast<double>(r.support) * r.accuracy;
            }
            check(cell_support == task.test_example_ids.size(),
                  "shape cells cover only part of task " + std::to_string(task.index));
            const double task_acc = metric == Metric::Generalized
                                        ? generalized_accuracy(model, ctx, task, kTopK)
                                        : standard_accuracy(model, ctx, task, kTopK);
            check(std::fabs(cell_weighted - task_acc *
                                                static_cast<double>(cell_support)) <=
                      kRecombineTol * static_cast<double>(std::max<std::size_t>(cell_support, 1)),
                  "shape cells do not recombine to task " + std::to_string(task.index));
        }
    }

    // The few-shot filter agrees with filtering by hand.
    for (const std::size_t max_count : {std::size_t{1}, std::size_t{5}, std::size_t{12}}) {
        const auto rows = fewshot_accuracy(model, ctx, max_count, kTopK, Metric::Generalized);
        std::size_t cursor = 0;
        for (std::size_t t = 0; t < bench.tasks.size(); ++t) {
            std::vector<std::int64_t> kept;
            for (const auto eid : bench.tasks[t].test_example_ids) {
                const Example& e = s.data.example_by_id(eid);
                if (s.data.train_count(e.fact_id) <= max_count) kept.push_back(eid);
            }
            if (kept.empty()) continue;
            check(cursor < rows.size(), "few-shot rows end early at task " + std::to_string(t + 1));
            const FewshotRow& r = rows[cursor++];
            check(r.task_index == static_cast<int>(t + 1) && r.support == kept.size(),
                  "few-shot row shape differs from the hand filter at task " +
                      std::to_string(t + 1));
            const double want = hits_mean(model, ctx, kept, ctx.all_candidates);
            check(std::fabs(r.accuracy - want) <= kRecombineTol,
                  "few-shot accuracy differs from the hand filter at task " + std::to_string(t + 1));
        }
        check(cursor == rows.size(), "few-shot reported rows the hand filter does not");
    }
}

// ---------------------------------------------------------------- 10

int run_checked(const std::string& cmd) {
    const int rc = std::system(cmd.c_str());
    if (rc == -1 || !WIFEXITED(rc)) return -1;
    return WEXITSTATUS(rc);
}

std::map<std::string, std::string> snapshot_dir(const fs::path& dir) {
    std::map<std::string, std::string> files;
    for (const auto& entry : fs::recursive_directory_iterator(dir)) {
        if (!entry.is_regular_file()) continue;
        std::ifstream in(entry.path(), std::ios::binary);
        std::ostringstream body;
        body << in.rdbuf();
        files[fs::relative(entry.path(), dir).string()] = body.str();
    }
    return files;
}

void criterion_pipeline_determinism(std::chrono::steady_clock::time_point suite_start) {
    const char* bin = std::getenv("LLFL_BIN");
    check(bin != nullptr && *bin != '\0', "LLFL_BIN is not set");

    testutil::SyntheticSpec spec;
    spec.clusters = 3;
    spec.facts_per_cluster = 4;
    spec.feature_dim = 12;
    spec.train_per_fact = 6;
    spec.test_per_fact = 3;
    spec.d = 6;
    spec.seed = 10;
    const testutil::Synthetic s = testutil::make_synthetic(spec);
    const std::string dir = testutil::scratch_dir("llfl_acceptance_pipeline");
    const testutil::SyntheticFiles files = testutil::write_synthetic(s, dir);
    const std::string out = dir + "/out";
    const std::string data_flags = " --facts " + files.facts + " --embeddings " +
                                   files.embeddings + " --examples " + files.examples;

    const auto run_pipeline = [&]() {
        fs::remove_all(out);
        const std::vector<std::string> cmds = {
            std::string(bin) + " split" + data_flags +
                " --mode semantic --tasks 3 --seed 7 --out " + out,
            std::string(bin) + " train" + data_flags + " --benchmark " + out +
                "/benchmark.json --method mas --lambda 1 --epochs 3 --lr 0.1 --seed 7 --out " +
                out,
            std::string(bin) + " eval" + data_flags + " --benchmark " + out +
                "/benchmark.json --topk 1,5 --out " + out,
            std::string(bin) + " analyze --out " + out,
        };
        for (const std::string& cmd : cmds) {
            check(run_checked(cmd + " > " + dir + "/cmd.log 2>&1") == 0,
                  "pipeline step failed: " + cmd);
        }
        return snapshot_dir(out);
    };

    const auto first = run_pipeline();
    const auto second = run_pipeline();
    check(!first.empty(), "pipeline produced no files");
    check(first.size() == second.size(), "runs produced different file sets");
    for (const auto& [name, body] : first) {
        const auto it = second.find(name);
        check(it != second.end(), "second run is missing " + name);
        check(it->second == body, name + " differs between identical runs");
    }

    const double total = seconds_since(suite_start);
    check(total < 300.0, "whole suite took " + fmt(total) + " s (limit 300)");
}

// ---------------------------------------------------------------- runner

struct Criterion {
    int id = 0;
    const char* label = "";
    double time_limit_s = 0.0;  // 0 means no per-criterion limit
    std::function<void()> run;
};

} // namespace

int main() {
    const auto suite_start = std::chrono::steady_clock::now();
    const std::vector<Criterion> criteria = {
        {1, "backward pass matches central finite differences on 100 random nets", 10.0,
         criterion_gradients},
        {2, "fact distance is symmetric, zero on self, mask-blind, and within [0, 4]", 0.0,
         criterion_distance_axioms},
        {3, "single-linkage merges match the brute-force oracle on 50 instances", 30.0,
         criterion_clustering_oracle},
        {4, "union-label accuracy never beats own-task accuracy", 0.0,
         criterion_metric_dominance},
        {5, "transfer metrics: frozen model scores zero, hand matrix matches arithmetic", 0.0,
         criterion_transfer_identities},
        {6, "clustered tasks cause forgetting, importance weights and mixing reduce it", 180.0,
         criterion_forgetting_direction},
        {7, "checkpoint merges: exact average, fixed point, precision-weighted limit", 0.0,
         criterion_merge_identities},
        {8, "autoencoder gate routes held-out inputs to the owning expert", 0.0,
         criterion_expert_gate},
        {9, "frequency, shape, and few-shot slices recombine to their parent scores", 0.0,
         criterion_slice_identities},
        {10, "the split/train/eval/analyze pipeline is byte-identical across runs", 0.0,
         [suite_start] { criterion_pipeline_determinism(suite_start); }},
    };

    bool all_ok = true;
    for (const Criterion& c : criteria) {
        const auto t0 = std::chrono::steady_clock::now();
        std::string failure;
        try {
            c.run();
            const double dt = seconds_since(t0);
            if (c.time_limit_s > 0.0 && dt >= c.time_limit_s) {
                failure = "took " + fmt(dt) + " s (limit " + fmt(c.time_limit_s) + ")";
            }
        } catch (const std::exception& e) {
            failure = e.what();
        }
        if (failure.empty()) {
            std::printf("[PASS] criterion %d: %s (%.2f s)\n", c.id, c.label, seconds_since(t0));
        } else {
            all_ok = false;
            std::printf("[FAIL] criterion %d: %s (%s)\n", c.id, c.label, failure.c_str());
        }
        std::fflush(stdout);
    }
    return all_ok ? 0 : 1;
}
