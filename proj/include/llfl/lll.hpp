#pragma once

#include "llfl/data.hpp"
#include "llfl/embed.hpp"
#include "llfl/graph.hpp"
#include "llfl/rng.hpp"

#include <cstdint>
#include <string>
#include <vector>

namespace llfl {

enum class Method { Finetune, SI, MAS, IMMMean, IMMMode, ExpertGate, Joint };

// Parses the CLI spelling; unknown names raise an error listing the valid
// ones.
Method parse_method(const std::string& name);
const char* method_name(Method m);

struct Hyper {
    double lambda = 1.0;
    std::size_t epochs = 10;
    double lr = 0.1;
    std::size_t batch = 32;
    double margin = 0.1;
    std::size_t k_neg = 5;
    std::uint64_t seed = 0;
    double si_xi = 0.1;               // SI damping
    std::size_t fisher_samples = 1024;  // cap on Fisher sample count
    std::size_t ae_epochs = 20;
    double ae_lr = 0.1;
};

struct Checkpoint {
    int task_index = 0;
    ParamSet params;
    ParamSet fisher;  // diagonal, non-negative; empty unless has_fisher
    bool has_fisher = false;
};

// Per-task experts plus the autoencoders that route inputs to them.
struct GateModel {
    ModelArch arch;
    std::size_t ae_hidden = 0;
    std::vector<ParamSet> experts;
    std::vector<ParamSet> autoencoders;
};

// Everything a sequential run carries between tasks.
struct LLLState {
    ModelArch arch;
    Method method = Method::Finetune;
    Hyper hyper;
    std::size_t cursor = 0;   // completed tasks
    ParamSet theta;
    ParamSet theta_init;      // untrained snapshot (baseline + expert init)
    ParamSet anchor;          // theta after the previous task
    ParamSet omega;           // importance weights, >= 0
    std::vector<Checkpoint> checkpoints;
    GateModel gate;           // populated by ExpertGate only
};

// ParamSet arithmetic used by the strategies.
ParamSet zeros_like(const ParamSet& p);
ParamSet add_params(const ParamSet& a, const ParamSet& b);
// Elementwise check used on every importance update.
void require_non_negative(const ParamSet& p, const char* what);

// Quadratic anchor penalty (lambda/2) * sum_i omega_i (theta_i - prev_i)^2.
// Appends nodes to a graph that already holds the theta params; the anchor
// and omega values bind as inputs named "anchor:<p>" and "omega:<p>".
NodeId append_reg_penalty(Graph& g, const std::vector<std::string>& param_names, double lambda);
void bind_penalty_inputs(Bindings& in, const ParamSet& anchor, const ParamSet& omega);
// Standalone value, for tests and diagnostics.
double reg_penalty_value(const ParamSet& theta, const ParamSet& theta_prev, const ParamSet& omega,
                         double lambda);

// SI running sum: w_i += -g_i * dtheta_i, once per SGD step.
ParamSet si_step_accumulate(const ParamSet& w, const ParamSet& grads, const ParamSet& delta);
// omega_i += max(0, w_i) / ((end_i - start_i)^2 + xi).
ParamSet si_consolidate(const ParamSet& omega, const ParamSet& w, const ParamSet& theta_end,
                        const ParamSet& theta_start, double xi);

// Mean over the given feature vectors of |d(0.5*||pre-normalization
// embedding||^2)/dtheta|, one backward pass per data point.
ParamSet mas_importance(const ModelArch& arch, const ParamSet& theta,
                        const std::vector<const std::vector<double>*>& features);

// Diagonal empirical Fisher: mean squared ranking-loss gradient over at
// most hyper.fisher_samples sampled train examples.
ParamSet estimate_fisher(const ModelArch& arch, const ParamSet& theta, const Dataset& data,
                         const LabelBank& bank, const std::vector<std::int64_t>& train_ids,
                         const Hyper& hyper, Rng& rng);

// Weight-space merges.  alphas must be positive and sum to 1; mode-merge
// needs a Fisher on every checkpoint and regularizes the denominator by
// 1e-8.
ParamSet imm_merge_mean(const std::vector<Checkpoint>& checkpoints,
                        const std::vector<double>& alphas);
ParamSet imm_merge_mode(const std::vector<Checkpoint>& checkpoints,
                        const std::vector<double>& alphas);

// Undercomplete autoencoder (sigmoid hidden at half input width, linear
// output) used for gating.
Graph autoencoder_graph(std::size_t feature_dim, std::size_t hidden, std::size_t batch);
ParamSet init_ae_params(std::size_t feature_dim, std::size_t hidden, Rng& rng);
double ae_recon_error(const ParamSet& ae, std::size_t feature_dim, std::size_t hidden,
                      const std::vector<double>& features);
// Argmin reconstruction error; ties pick the lowest task index.
std::size_t gate_select(const GateModel& gate, const std::vector<double>& features);

// Fresh state with theta drawn from the run's "init" stream.
LLLState init_state(const ModelArch& arch, Method method, const Hyper& hyper);

// One sequential step: SGD on ranking loss (+ anchor penalty for SI/MAS
// after the first task), then the method's post-task hook.  Returns the
// successor state; `task.index` must be exactly `state.cursor + 1`.
LLLState train_task(const LLLState& state, const Dataset& data, const EmbeddingTable& table,
                    const Task& task);

// Upper bound: one model trained on the union of every task's train set.
EmbedModel train_joint(const ModelArch& arch, const Hyper& hyper, const Dataset& data,
                       const EmbeddingTable& table, const Benchmark& benchmark);

} // namespace llfl
