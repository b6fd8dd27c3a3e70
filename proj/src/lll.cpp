#include "llfl/lll.hpp"

#include "llfl/error.hpp"
#include "llfl/kernels.hpp"

#include <algorithm>
#include <cmath>

namespace llfl {

Method parse_method(const std::string& name) {
    if (name == "finetune") return Method::Finetune;
    if (name == "si") return Method::SI;
    if (name == "mas") return Method::MAS;
    if (name == "imm-mean") return Method::IMMMean;
    if (name == "imm-mode") return Method::IMMMode;
    if (name == "expertgate") return Method::ExpertGate;
    if (name == "joint") return Method::Joint;
    fail("unknown method '", name,
         "'; valid methods: finetune, si, mas, imm-mean, imm-mode, expertgate, joint");
}

const char* method_name(Method m) {
    switch (m) {
        case Method::Finetune: return "finetune";
        case Method::SI: return "si";
        case Method::MAS: return "mas";
        case Method::IMMMean: return "imm-mean";
        case Method::IMMMode: return "imm-mode";
        case Method::ExpertGate: return "expertgate";
        case Method::Joint: return "joint";
    }
    return "?";
}

ParamSet zeros_like(const ParamSet& p) {
    ParamSet out;
    for (const auto& name : p.names()) out.insert(name, Tensor::zeros(p.get(name).shape));
    return out;
}

ParamSet add_params(const ParamSet& a, const ParamSet& b) {
    ParamSet out;
    for (const auto& name : a.names()) {
        const Tensor& ta = a.get(name);
        const Tensor& tb = b.get(name);
        require(ta.shape == tb.shape, "add_params: shape mismatch for '", name, "'");
        Tensor t = Tensor::zeros(ta.shape);
        kernels::add(ta.ptr(), tb.ptr(), t.ptr(), t.numel());
        out.insert(name, std::move(t));
    }
    return out;
}

namespace {

ParamSet sub_params(const ParamSet& a, const ParamSet& b) {
    ParamSet out;
    for (const auto& name : a.names()) {
        const Tensor& ta = a.get(name);
        const Tensor& tb = b.get(name);
        require(ta.shape == tb.shape, "sub_params: shape mismatch for '", name, "'");
        Tensor t = Tensor::zeros(ta.shape);
        kernels::sub(ta.ptr(), tb.ptr(), t.ptr(), t.numel());
        out.insert(name, std::move(t));
    }
    return out;
}

} // namespace

void require_non_negative(const ParamSet& p, const char* what) {
    for (const auto& name : p.names()) {
        for (double v : p.get(name).data) {
            require(v >= 0.0, what, ": negative importance in '", name, "'");
        }
    }
}

NodeId append_reg_penalty(Graph& g, const std::vector<std::string>& param_names, double lambda) {
    require(lambda >= 0.0, "reg_penalty: lambda must be >= 0, got ", lambda);
    require(!param_names.empty(), "reg_penalty: no parameters");
    NodeId total = 0;
    bool first = true;
    for (const auto& name : param_names) {
        NodeId theta = SIZE_MAX;
        for (NodeId id = 0; id < g.nodes().size(); ++id) {
            if (g.nodes()[id].kind == OpKind::Param && g.nodes()[id].name == name) {
                theta = id;
                break;
            }
        }
        require(theta != SIZE_MAX, "reg_penalty: graph has no param '", name, "'");
        const auto shape = g.shape_of(theta);
        const NodeId anchor = g.input("anchor:" + name, shape);
        const NodeId omega = g.input("omega:" + name, shape);
        const NodeId diff = g.sub(theta, anchor);
        const NodeId term = g.sum_all(g.mul(omega, g.mul(diff, diff)));
        total = first ? term : g.add(total, term);
        first = false;
    }
    return g.affine(total, lambda / 2.0, 0.0);
}

void bind_penalty_inputs(Bindings& in, const ParamSet& anchor, const ParamSet& omega) {
    require_non_negative(omega, "reg_penalty");
    for (const auto& name : anchor.names()) {
        in.emplace("anchor:" + name, anchor.get(name));
    }
    for (const auto& name : omega.names()) {
        in.emplace("omega:" + name, omega.get(name));
    }
}

double reg_penalty_value(const ParamSet& theta, const ParamSet& theta_prev, const ParamSet& omega,
                         double lambda) {
    require(theta.names() == theta_prev.names() && theta.names() == omega.names(),
            "reg_penalty: parameter sets are not aligned");
    Graph g;
    for (const auto& name : theta.names()) g.param(name, theta.get(name).shape);
    g.mark_output("penalty", append_reg_penalty(g, theta.names(), lambda));
    Bindings in;
    bind_penalty_inputs(in, theta_prev, omega);
    return forward(g, theta, in).at("penalty").data[0];
}

ParamSet si_step_accumulate(const ParamSet& w, const ParamSet& grads, const ParamSet& delta) {
    ParamSet out;
    for (const auto& name : w.names()) {
        const Tensor& tw = w.get(name);
        const Tensor& tg = grads.get(name);
        const Tensor& td = delta.get(name);
        require(tw.shape == tg.shape && tw.shape == td.shape,
                "si_step_accumulate: shape mismatch for '", name, "'");
        Tensor t = tw;
        for (std::size_t i = 0; i < t.data.size(); ++i) {
            t.data[i] += -tg.data[i] * td.data[i];
        }
        out.insert(name, std::move(t));
    }
    return out;
}

ParamSet si_consolidate(const ParamSet& omega, const ParamSet& w, const ParamSet& theta_end,
                        const ParamSet& theta_start, double xi) {
    require(xi > 0.0, "si_consolidate: xi must be positive, got ", xi);
    ParamSet out;
    for (const auto& name : omega.names()) {
        const Tensor& to = omega.get(name);
        const Tensor& tw = w.get(name);
        const Tensor& te = theta_end.get(name);
        const Tensor& ts = theta_start.get(name);
        Tensor t = to;
        for (std::size_t i = 0; i < t.data.size(); ++i) {
            const double d = te.data[i] - ts.data[i];
            t.data[i] += std::max(0.0, tw.data[i]) / (d * d + xi);
        }
        out.insert(name, std::move(t));
    }
    return out;
}

ParamSet mas_importance(const ModelArch& arch, const ParamSet& theta,
                        const std::vector<const std::vector<double>*>& features) {
    require(!features.empty(), "mas_importance: need at least one data point");
    Graph g = visual_graph(arch, 1);
    g.mark_output("half_sqnorm", g.affine(g.sum_squares(g.output_id("pre")), 0.5, 0.0));

    ParamSet acc = zeros_like(theta);
    for (const auto* f : features) {
        require(f->size() == arch.feature_dim, "mas_importance: feature length mismatch");
        Bindings in;
        in.emplace("x", Tensor::row_major(1, arch.feature_dim, *f));
        const ParamSet grads = backward(g, theta, in, "half_sqnorm");
        ParamSet next;
        for (const auto& name : acc.names()) {
            Tensor t = acc.get(name);
            const Tensor& tg = grads.get(name);
            for (std::size_t i = 0; i < t.data.size(); ++i) t.data[i] += std::abs(tg.data[i]);
            next.insert(name, std::move(t));
        }
        acc = std::move(next);
    }
    ParamSet out;
    const double inv = 1.0 / static_cast<double>(features.size());
    for (const auto& name : acc.names()) {
        Tensor t = acc.get(name);
        kernels::scal(inv, t.ptr(), t.numel());
        out.insert(name, std::move(t));
    }
    return out;
}

ParamSet estimate_fisher(const ModelArch& arch, const ParamSet& theta, const Dataset& data,
                         const LabelBank& bank, const std::vector<std::int64_t>& train_ids,
                         const Hyper& hyper, Rng& rng) {
    require(!train_ids.empty(), "estimate_fisher: no training examples");
    std::vector<std::int64_t> ids = train_ids;
    rng.shuffle(ids);
    const std::size_t take = std::min(hyper.fisher_samples, ids.size());
    ids.resize(take);

    const Graph g = ranking_loss_graph(arch, hyper.k_neg, hyper.margin);
    ParamSet acc = zeros_like(theta);
    for (const auto id : ids) {
        const RankingBatch batch = make_ranking_batch(data, bank, {id}, hyper.k_neg, rng);
        Bindings in;
        in.emplace("x", batch.x);
        in.emplace("pos", batch.pos);
        in.emplace("neg", batch.neg);
        const ParamSet grads = backward(g, theta, in, "loss");
        ParamSet next;
        for (const auto& name : acc.names()) {
            Tensor t = acc.get(name);
            const Tensor& tg = grads.get(name);
            for (std::size_t i = 0; i < t.data.size(); ++i) {
                t.data[i] += tg.data[i] * tg.data[i];
            }
            next.insert(name, std::move(t));
        }
        acc = std::move(next);
    }
    ParamSet out;
    const double inv = 1.0 / static_cast<double>(take);
    for (const auto& name : acc.names()) {
        Tensor t = acc.get(name);
        kernels::scal(inv, t.ptr(), t.numel());
        out.insert(name, std::move(t));
    }
    return out;
}

namespace {

void check_alphas(const std::vector<Checkpoint>& checkpoints, const std::vector<double>& alphas) {
    require(checkpoints.size() >= 2, "imm_merge: need at least 2 checkpoints, got ",
            checkpoints.size());
    require(alphas.size() == checkpoints.size(), "imm_merge: ", alphas.size(), " weights for ",
            checkpoints.size(), " checkpoints");
    double total = 0.0;
    for (double a : alphas) {
        require(a > 0.0, "imm_merge: weights must be positive");
        total += a;
    }
    require(std::abs(total - 1.0) <= 1e-12, "imm_merge: weights sum to ", total, ", expected 1");
}

} // namespace

ParamSet imm_merge_mean(const std::vector<Checkpoint>& checkpoints,
                        const std::vector<double>& alphas) {
    check_alphas(checkpoints, alphas);
    ParamSet out;
    for (const auto& name : checkpoints.front().params.names()) {
        Tensor t = Tensor::zeros(checkpoints.front().params.get(name).shape);
        for (std::size_t n = 0; n < checkpoints.size(); ++n) {
            const Tensor& tn = checkpoints[n].params.get(name);
            require(tn.shape == t.shape, "imm_merge: shape mismatch for '", name,
                    "' at checkpoint ", n);
            kernels::axpy(alphas[n], tn.ptr(), t.ptr(), t.numel());
        }
        out.insert(name, std::move(t));
    }
    return out;
}

ParamSet imm_merge_mode(const std::vector<Checkpoint>& checkpoints,
                        const std::vector<double>& alphas) {
    check_alphas(checkpoints, alphas);
    constexpr double kEps = 1e-8;
    for (std::size_t n = 0; n < checkpoints.size(); ++n) {
        require(checkpoints[n].has_fisher, "imm_merge: mode merge needs a Fisher on checkpoint ",
                n);
        require_non_negative(checkpoints[n].fisher, "imm_merge");
    }
    ParamSet out;
    for (const auto& name : checkpoints.front().params.names()) {
        const Tensor& first = checkpoints.front().params.get(name);
        Tensor num = Tensor::zeros(first.shape);
        Tensor den = Tensor::zeros(first.shape);
        for (std::size_t n = 0; n < checkpoints.size(); ++n) {
            const Tensor& tn = checkpoints[n].params.get(name);
            const Tensor& fn = checkpoints[n].fisher.get(name);
            require(tn.shape == first.shape && fn.shape == first.shape,
                    "imm_merge: shape mismatch for '", name, "' at checkpoint ", n);
            for (std::size_t i = 0; i < num.data.size(); ++i) {
                num.data[i] += alphas[n] * fn.data[i] * tn.data[i];
                den.data[i] += alphas[n] * fn.data[i];
            }
        }
        Tensor t = Tensor::zeros(first.shape);
        for (std::size_t i = 0; i < t.data.size(); ++i) {
            t.data[i] = num.data[i] / (den.data[i] + kEps);
        }
        out.insert(name, std::move(t));
    }
    return out;
}

Graph autoencoder_graph(std::size_t feature_dim, std::size_t hidden, std::size_t batch) {
    require(feature_dim > 0 && hidden > 0 && batch > 0,
            "autoencoder_graph: dimensions must be positive");
    Graph g;
    const NodeId x = g.input("x", {batch, feature_dim});
    const NodeId v1 = g.param("V1", {feature_dim, hidden});
    const NodeId c1 = g.param("c1", {hidden});
    const NodeId v2 = g.param("V2", {hidden, feature_dim});
    const NodeId c2 = g.param("c2", {feature_dim});
    const NodeId h = g.sigmoid(g.add_bias(g.matmul(x, v1), c1));
    const NodeId recon = g.add_bias(g.matmul(h, v2), c2);
    const NodeId diff = g.sub(recon, x);
    const NodeId loss =
        g.affine(g.sum_squares(diff), 0.5 / static_cast<double>(batch), 0.0);
    g.mark_output("recon", recon);
    g.mark_output("loss", loss);
    return g;
}

ParamSet init_ae_params(std::size_t feature_dim, std::size_t hidden, Rng& rng) {
    auto uniform_tensor = [&](std::vector<std::size_t> shape, std::size_t fan_in) {
        Tensor t = Tensor::zeros(std::move(shape));
        const double s = 1.0 / std::sqrt(static_cast<double>(fan_in));
        for (auto& v : t.data) v = rng.uniform(-s, s);
        return t;
    };
    ParamSet p;
    p.insert("V1", uniform_tensor({feature_dim, hidden}, feature_dim));
    p.insert("c1", Tensor::zeros({hidden}));
    p.insert("V2", uniform_tensor({hidden, feature_dim}, hidden));
    p.insert("c2", Tensor::zeros({feature_dim}));
    return p;
}

double ae_recon_error(const ParamSet& ae, std::size_t feature_dim, std::size_t hidden,
                      const std::vector<double>& features) {
    require(features.size() == feature_dim, "ae_recon_error: feature length mismatch");
    const Graph g = autoencoder_graph(feature_dim, hidden, 1);
    Bindings in;
    in.emplace("x", Tensor::row_major(1, feature_dim, features));
    const Tensor recon = forward(g, ae, in).at("recon");
    return kernels::sqdist(recon.ptr(), features.data(), feature_dim);
}

std::size_t gate_select(const GateModel& gate, const std::vector<double>& features) {
    require(!gate.autoencoders.empty(), "gate_select: no experts");
    std::size_t best = 0;
    double best_err = ae_recon_error(gate.autoencoders[0], gate.arch.feature_dim, gate.ae_hidden,
                                     features);
    for (std::size_t n = 1; n < gate.autoencoders.size(); ++n) {
        const double err =
            ae_recon_error(gate.autoencoders[n], gate.arch.feature_dim, gate.ae_hidden, features);
        if (err < best_err) {
            best_err = err;
            best = n;
        }
    }
    return best;
}

namespace {

// Shared SGD loop.  Stream keys depend only on (purpose, task slot, epoch),
// so every method sees identical shuffles and negatives for the same task.
ParamSet run_sgd(const ModelArch& arch, ParamSet theta, const Dataset& data,
                 const LabelBank& bank, const std::vector<std::int64_t>& example_ids,
                 const Hyper& hyper, const RngHub& hub, std::uint64_t stream_task,
                 const ParamSet* anchor, const ParamSet* omega, ParamSet* si_w) {
    require(!example_ids.empty(), "train: no training examples");
    const bool penalize = anchor != nullptr && omega != nullptr && hyper.lambda > 0.0;

    std::vector<std::int64_t> ids = example_ids;
    for (std::size_t epoch = 0; epoch < hyper.epochs; ++epoch) {
        Rng shuffle_rng = hub.stream("shuffle", stream_task, epoch);
        shuffle_rng.shuffle(ids);
        Rng neg_rng = hub.stream("negatives", stream_task, epoch);

        for (std::size_t at = 0; at < ids.size(); at += hyper.batch) {
            const std::size_t take = std::min(hyper.batch, ids.size() - at);
            const std::vector<std::int64_t> chunk(ids.begin() + at, ids.begin() + at + take);
            const RankingBatch batch =
                make_ranking_batch(data, bank, chunk, hyper.k_neg, neg_rng);

            Graph g = ranking_loss_graph(arch, batch.rows, hyper.margin);
            std::string target = "loss";
            if (penalize) {
                const NodeId pen = append_reg_penalty(g, theta.names(), hyper.lambda);
                g.mark_output("objective", g.add(g.output_id("loss"), pen));
                target = "objective";
            }
            Bindings in;
            in.emplace("x", batch.x);
            in.emplace("pos", batch.pos);
            in.emplace("neg", batch.neg);
            if (penalize) bind_penalty_inputs(in, *anchor, *omega);

            const ParamSet grads = backward(g, theta, in, target);
            ParamSet next = sgd_step(theta, grads, hyper.lr);
            if (si_w) *si_w = si_step_accumulate(*si_w, grads, sub_params(next, theta));
            theta = std::move(next);
        }
    }
    return theta;
}

ParamSet train_autoencoder(const Dataset& data, const std::vector<std::int64_t>& example_ids,
                           std::size_t hidden, const Hyper& hyper, const RngHub& hub,
                           std::uint64_t task_index) {
    const std::size_t F = data.feature_dim;
    Rng init_rng = hub.stream("gate-init", task_index);
    ParamSet ae = init_ae_params(F, hidden, init_rng);

    std::vector<std::int64_t> ids = example_ids;
    for (std::size_t epoch = 0; epoch < hyper.ae_epochs; ++epoch) {
        Rng shuffle_rng = hub.stream("gate-shuffle", task_index, epoch);
        shuffle_rng.shuffle(ids);
        for (std::size_t at = 0; at < ids.size(); at += hyper.batch) {
            const std::size_t take = std::min(hyper.batch, ids.size() - at);
            const Graph g = autoencoder_graph(F, hidden, take);
            Tensor x = Tensor::zeros({take, F});
            for (std::size_t r = 0; r < take; ++r) {
                const Example& e = data.example_by_id(ids[at + r]);
                std::copy(e.features.begin(), e.features.end(), x.ptr() + r * F);
            }
            Bindings in;
            in.emplace("x", std::move(x));
            const ParamSet grads = backward(g, ae, in, "loss");
            ae = sgd_step(ae, grads, hyper.ae_lr);
        }
    }
    return ae;
}

} // namespace

LLLState init_state(const ModelArch& arch, Method method, const Hyper& hyper) {
    require(method != Method::Joint, "init_state: joint training uses train_joint");
    const RngHub hub(hyper.seed);
    Rng init_rng = hub.stream("init");
    LLLState state;
    state.arch = arch;
    state.method = method;
    state.hyper = hyper;
    state.theta = init_embed_params(arch, init_rng);
    state.theta_init = state.theta;
    state.anchor = state.theta;
    state.omega = zeros_like(state.theta);
    state.gate.arch = arch;
    state.gate.ae_hidden = std::max<std::size_t>(1, arch.feature_dim / 2);
    return state;
}

LLLState train_task(const LLLState& state, const Dataset& data, const EmbeddingTable& table,
                    const Task& task) {
    require(task.index == static_cast<int>(state.cursor) + 1, "train_task: task ", task.index,
            " out of order; expected ", state.cursor + 1);
    require(!task.train_example_ids.empty(), "train_task: task ", task.index,
            " has no training examples");
    const Hyper& hyper = state.hyper;
    const RngHub hub(hyper.seed);
    const LabelBank bank = build_label_bank(table, data, task.fact_ids);
    const auto stream_task = static_cast<std::uint64_t>(task.index);

    LLLState next = state;

    if (state.method == Method::ExpertGate) {
        // Every expert starts from the shared initialization; the anchor
        // penalty never applies.
        ParamSet expert = run_sgd(state.arch, state.theta_init, data, bank,
                                  task.train_example_ids, hyper, hub, stream_task, nullptr,
                                  nullptr, nullptr);
        ParamSet ae = train_autoencoder(data, task.train_example_ids, state.gate.ae_hidden, hyper,
                                        hub, stream_task);
        next.gate.experts.push_back(expert);
        next.gate.autoencoders.push_back(std::move(ae));
        next.theta = std::move(expert);
    } else {
        const bool uses_penalty =
            (state.method == Method::SI || state.method == Method::MAS) && state.cursor > 0;
        ParamSet si_w = zeros_like(state.theta);
        ParamSet theta = run_sgd(state.arch, state.theta, data, bank, task.train_example_ids,
                                 hyper, hub, stream_task,
                                 uses_penalty ? &state.anchor : nullptr,
                                 uses_penalty ? &state.omega : nullptr,
                                 state.method == Method::SI ? &si_w : nullptr);

        if (state.method == Method::SI) {
            next.omega = si_consolidate(state.omega, si_w, theta, state.theta, hyper.si_xi);
        } else if (state.method == Method::MAS) {
            std::vector<const std::vector<double>*> feats;
            feats.reserve(task.train_example_ids.size());
            for (const auto id : task.train_example_ids) {
                feats.push_back(&data.example_by_id(id).features);
            }
            next.omega = add_params(state.omega, mas_importance(state.arch, theta, feats));
        }
        require_non_negative(next.omega, "train_task");
        next.theta = std::move(theta);
    }

    next.anchor = next.theta;
    Checkpoint ck;
    ck.task_index = task.index;
    ck.params = next.theta;
    if (state.method == Method::IMMMode) {
        Rng fisher_rng = hub.stream("fisher", stream_task);
        ck.fisher = estimate_fisher(state.arch, next.theta, data, bank, task.train_example_ids,
                                    hyper, fisher_rng);
        ck.has_fisher = true;
    }
    next.checkpoints.push_back(std::move(ck));
    next.cursor = static_cast<std::size_t>(task.index);
    return next;
}

EmbedModel train_joint(const ModelArch& arch, const Hyper& hyper, const Dataset& data,
                       const EmbeddingTable& table, const Benchmark& benchmark) {
    std::vector<std::int64_t> ids;
    std::vector<std::int64_t> fact_ids;
    for (const Task& t : benchmark.tasks) {
        ids.insert(ids.end(), t.train_example_ids.begin(), t.train_example_ids.end());
        fact_ids.insert(fact_ids.end(), t.fact_ids.begin(), t.fact_ids.end());
    }
    const LabelBank bank = build_label_bank(table, data, std::move(fact_ids));

    const RngHub hub(hyper.seed);
    Rng init_rng = hub.stream("init");
    ParamSet theta = init_embed_params(arch, init_rng);
    // Stream slot 1 so a single-task benchmark reproduces the Finetune
    // trajectory bitwise.
    theta = run_sgd(arch, std::move(theta), data, bank, ids, hyper, hub, 1, nullptr, nullptr,
                    nullptr);
    return EmbedModel{arch, std::move(theta)};
}

} // namespace llfl
