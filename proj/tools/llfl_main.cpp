// llfl: build fact benchmarks, train sequentially, evaluate and slice.
//
// Subcommands: split, train, eval, analyze.  Every command drops a
// manifest (config snapshot, input digests, artifact list) next to its
// outputs, so a run can be audited and re-run byte-for-byte.

#include "llfl/data.hpp"
#include "llfl/error.hpp"
#include "llfl/eval.hpp"
#include "llfl/fact.hpp"
#include "llfl/io.hpp"
#include "llfl/kernels.hpp"
#include "llfl/lll.hpp"
#include "llfl/splitter.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <cstdio>
#include <filesystem>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

namespace fs = std::filesystem;
using namespace llfl;

namespace {

constexpr const char* kToolVersion = "llfl 1.0.0";

// Slice/transfer constants surfaced in the report metadata.
constexpr std::size_t kFewshotMax = 10;
constexpr std::size_t kSpoRareMax = 5;
constexpr std::size_t kSpoThreshold = 10;

std::string task_file(const char* stem, std::size_t task) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%s_task%03zu.bin", stem, task);
    return buf;
}

struct InputFile {
    std::string label;
    std::string path;
};

// Option values as given (or defaulted), in registration order.
JsonValue config_snapshot(const CLI::App* sub) {
    JsonValue config = JsonValue::object();
    for (const CLI::Option* opt : sub->get_options()) {
        const std::string name = opt->get_single_name();
        if (name == "help" || name == "config") continue;
        std::string value;
        if (opt->count() > 0) {
            const auto& results = opt->results();
            for (std::size_t i = 0; i < results.size(); ++i) {
                if (i) value += ',';
                value += results[i];
            }
        } else {
            value = opt->get_default_str();
        }
        config.set(name, JsonValue::of(value));
    }
    return config;
}

void write_manifest(const fs::path& out_dir, const std::string& command, const CLI::App* sub,
                    std::uint64_t seed, const std::vector<InputFile>& inputs,
                    const std::vector<std::string>& artifacts) {
    JsonValue root = JsonValue::object();
    root.set("tool", JsonValue::of(kToolVersion));
    root.set("command", JsonValue::of(command));
    root.set("isa", JsonValue::of(kernels::isa_name(kernels::active())));
    root.set("seed", JsonValue::of(static_cast<std::int64_t>(seed)));
    root.set("config", config_snapshot(sub));
    JsonValue in = JsonValue::object();
    for (const InputFile& f : inputs) {
        JsonValue entry = JsonValue::object();
        entry.set("path", JsonValue::of(f.path));
        entry.set("digest", JsonValue::of(file_digest_hex(f.path)));
        in.set(f.label, std::move(entry));
    }
    root.set("inputs", std::move(in));
    JsonValue arts = JsonValue::array();
    for (const std::string& a : artifacts) arts.push(JsonValue::of(a));
    root.set("artifacts", std::move(arts));
    write_text_file((out_dir / ("manifest_" + command + ".json")).string(), json_to_string(root));
}

Dataset load_dataset(const std::string& facts_path, const std::string& examples_path) {
    return Dataset::build(load_facts(facts_path), load_examples(examples_path));
}

// Fills every option the command line left untouched from a flat
// key=value file.  Unknown keys are errors so typos cannot silently
// vanish; explicitly passed flags always win.
void apply_config(CLI::App* sub, const std::string& path) {
    if (path.empty()) return;
    for (const auto& [key, value] : load_config(path)) {
        CLI::Option* opt =
            key == "config" || key == "help" ? nullptr : sub->get_option_no_throw("--" + key);
        require(opt != nullptr, path, ": unknown config key '", key, "'");
        if (opt->count() > 0) continue;
        opt->add_result(value);
        opt->run_callback();
    }
}

void require_present(const char* flag, const std::string& value) {
    require(!value.empty(), flag, " is required (flag or config file)");
}

// ---- split ----

struct SplitArgs {
    std::string facts, embeddings, examples, out;
    std::string config;
    std::string mode = "semantic";
    std::size_t tasks = 4;
    std::size_t trials = 100;
    std::uint64_t seed = 0;
};

void cmd_split(const SplitArgs& a, const CLI::App* sub) {
    require_present("--facts", a.facts);
    require_present("--embeddings", a.embeddings);
    require_present("--examples", a.examples);
    require_present("--out", a.out);
    require(a.mode == "semantic" || a.mode == "random", "--mode must be 'semantic' or 'random', got '",
            a.mode, "'");
    const Dataset data = load_dataset(a.facts, a.examples);
    const EmbeddingTable table = load_embeddings(a.embeddings);
    fs::create_directories(a.out);
    const fs::path out_dir(a.out);

    Benchmark benchmark;
    std::vector<std::string> artifacts;
    if (a.mode == "semantic") {
        SemanticSplit split = semantic_split(data, table, a.tasks, a.seed);
        benchmark = std::move(split.benchmark);
        write_dendrogram((out_dir / "dendrogram.json").string(), split.dendrogram);
        artifacts.push_back("dendrogram.json");
    } else {
        benchmark = random_split(data, a.tasks, a.trials, a.seed);
    }
    write_benchmark((out_dir / "benchmark.json").string(), benchmark);
    artifacts.insert(artifacts.begin(), "benchmark.json");

    write_similarity((out_dir / "similarity.json").string(),
                     similarity_matrix_w2v(benchmark, data, table),
                     similarity_matrix_spo(benchmark, data));
    artifacts.push_back("similarity.json");

    write_manifest(out_dir, "split", sub, a.seed,
                   {{"facts", a.facts}, {"embeddings", a.embeddings}, {"examples", a.examples}},
                   artifacts);
}

// ---- train ----

struct TrainArgs {
    std::string facts, embeddings, examples, benchmark, out;
    std::string config;
    std::string method = "finetune";
    double lambda = 1.0;
    std::size_t epochs = 10;
    double lr = 0.1;
    std::uint64_t seed = 0;
    std::size_t resume = 0;  // 0 = fresh run, n = continue at task n
};

// Rebuild the sequential state from the artifacts of tasks 1..resume-1.
LLLState resume_state(LLLState state, const fs::path& out_dir, std::size_t resume) {
    const fs::path init_path = out_dir / "model_init.bin";
    require(fs::exists(init_path), "cannot resume at task ", resume, ": missing ",
            init_path.string());
    state.theta_init = read_checkpoint(init_path.string());

    for (std::size_t m = 1; m < resume; ++m) {
        const fs::path ckpt = out_dir / task_file("ckpt", m);
        require(fs::exists(ckpt), "cannot resume at task ", resume,
                ": missing checkpoint for task ", m, " (", ckpt.string(), ")");
        Checkpoint c;
        c.task_index = static_cast<int>(m);
        c.params = read_checkpoint(ckpt.string());
        if (state.method == Method::IMMMode) {
            const fs::path fisher = out_dir / task_file("fisher", m);
            require(fs::exists(fisher), "cannot resume at task ", resume,
                    ": missing Fisher for task ", m, " (", fisher.string(), ")");
            c.fisher = read_checkpoint(fisher.string());
            c.has_fisher = true;
        }
        state.checkpoints.push_back(std::move(c));
        if (state.method == Method::ExpertGate) {
            state.gate.experts.push_back(
                read_checkpoint((out_dir / task_file("expert", m)).string()));
            state.gate.autoencoders.push_back(
                read_checkpoint((out_dir / task_file("ae", m)).string()));
        }
    }
    state.theta = state.method == Method::ExpertGate || state.checkpoints.empty()
                      ? state.theta_init
                      : state.checkpoints.back().params;
    state.anchor = state.theta;
    if ((state.method == Method::SI || state.method == Method::MAS) && resume > 1) {
        state.omega = read_checkpoint((out_dir / task_file("omega", resume - 1)).string());
    }
    state.cursor = resume - 1;
    return state;
}

void cmd_train(const TrainArgs& a, const CLI::App* sub) {
    require_present("--facts", a.facts);
    require_present("--embeddings", a.embeddings);
    require_present("--examples", a.examples);
    require_present("--benchmark", a.benchmark);
    require_present("--out", a.out);
    const Dataset data = load_dataset(a.facts, a.examples);
    const EmbeddingTable table = load_embeddings(a.embeddings);
    Benchmark benchmark = load_benchmark(a.benchmark);
    validate_benchmark(benchmark, data);
    const Method method = parse_method(a.method);

    Hyper hyper;
    hyper.lambda = a.lambda;
    hyper.epochs = a.epochs;
    hyper.lr = a.lr;
    hyper.seed = a.seed;
    const ModelArch arch{data.feature_dim, 64, table.dim};

    fs::create_directories(a.out);
    const fs::path out_dir(a.out);
    const std::size_t n_tasks = benchmark.tasks.size();
    std::vector<std::string> artifacts;

    if (method == Method::Joint) {
        require(a.resume == 0, "--resume does not apply to the joint method");
        const EmbedModel model = train_joint(arch, hyper, data, table, benchmark);
        write_checkpoint((out_dir / "model_final.bin").string(), model.params);
        artifacts.push_back("model_final.bin");
    } else {
        LLLState state = init_state(arch, method, hyper);
        std::size_t start_task = 1;
        if (a.resume == 0) {
            write_checkpoint((out_dir / "model_init.bin").string(), state.theta_init);
        } else {
            require(a.resume >= 1 && a.resume <= n_tasks, "--resume must be in [1, ", n_tasks,
                    "], got ", a.resume);
            state = resume_state(std::move(state), out_dir, a.resume);
            start_task = a.resume;
        }
        artifacts.push_back("model_init.bin");

        for (std::size_t t = start_task; t <= n_tasks; ++t) {
            state = train_task(state, data, table, benchmark.tasks[t - 1]);
            write_checkpoint((out_dir / task_file("ckpt", t)).string(),
                             state.checkpoints.back().params);
            if (method == Method::SI || method == Method::MAS) {
                write_checkpoint((out_dir / task_file("omega", t)).string(), state.omega);
            }
            if (method == Method::IMMMode) {
                write_checkpoint((out_dir / task_file("fisher", t)).string(),
                                 state.checkpoints.back().fisher);
            }
            if (method == Method::ExpertGate) {
                write_checkpoint((out_dir / task_file("expert", t)).string(),
                                 state.gate.experts.back());
                write_checkpoint((out_dir / task_file("ae", t)).string(),
                                 state.gate.autoencoders.back());
            }
        }
        for (std::size_t t = 1; t <= n_tasks; ++t) {
            artifacts.push_back(task_file("ckpt", t));
            if (method == Method::SI || method == Method::MAS)
                artifacts.push_back(task_file("omega", t));
            if (method == Method::IMMMode) artifacts.push_back(task_file("fisher", t));
            if (method == Method::ExpertGate) {
                artifacts.push_back(task_file("expert", t));
                artifacts.push_back(task_file("ae", t));
            }
        }

        if (method == Method::IMMMean || method == Method::IMMMode) {
            const std::vector<double> alphas(state.checkpoints.size(),
                                             1.0 / static_cast<double>(state.checkpoints.size()));
            const ParamSet merged =
                state.checkpoints.size() == 1 ? state.checkpoints.front().params
                : method == Method::IMMMean   ? imm_merge_mean(state.checkpoints, alphas)
                                              : imm_merge_mode(state.checkpoints, alphas);
            write_checkpoint((out_dir / "merged.bin").string(), merged);
            write_checkpoint((out_dir / "model_final.bin").string(), merged);
            artifacts.push_back("merged.bin");
            artifacts.push_back("model_final.bin");
        } else if (method != Method::ExpertGate) {
            write_checkpoint((out_dir / "model_final.bin").string(), state.theta);
            artifacts.push_back("model_final.bin");
        }
    }

    write_manifest(out_dir, "train", sub, a.seed,
                   {{"facts", a.facts},
                    {"embeddings", a.embeddings},
                    {"examples", a.examples},
                    {"benchmark", a.benchmark}},
                   artifacts);
}

// ---- eval ----

struct EvalArgs {
    std::string facts, embeddings, examples, benchmark, out;
    std::string config;
    std::vector<std::size_t> topk = {1, 5, 10};
};

struct LoadedModels {
    EmbedFn init;                  // untrained baseline
    std::vector<EmbedFn> columns;  // model after task n+1
    EmbedFn final_model;
    bool sequential = true;
};

LoadedModels load_models(const fs::path& out_dir, Method method, const ModelArch& arch,
                         std::size_t n_tasks) {
    LoadedModels models;
    if (method == Method::Joint) {
        models.sequential = false;
        models.final_model =
            make_embed_fn({arch, read_checkpoint((out_dir / "model_final.bin").string())});
        return models;
    }
    models.init = make_embed_fn({arch, read_checkpoint((out_dir / "model_init.bin").string())});

    if (method == Method::ExpertGate) {
        GateModel gate;
        gate.arch = arch;
        gate.ae_hidden = std::max<std::size_t>(1, arch.feature_dim / 2);
        for (std::size_t t = 1; t <= n_tasks; ++t) {
            gate.experts.push_back(read_checkpoint((out_dir / task_file("expert", t)).string()));
            gate.autoencoders.push_back(read_checkpoint((out_dir / task_file("ae", t)).string()));
        }
        for (std::size_t t = 1; t <= n_tasks; ++t) {
            models.columns.push_back(make_gate_embed_fn(gate, t));
        }
    } else {
        std::vector<Checkpoint> ckpts;
        for (std::size_t t = 1; t <= n_tasks; ++t) {
            Checkpoint c;
            c.task_index = static_cast<int>(t);
            c.params = read_checkpoint((out_dir / task_file("ckpt", t)).string());
            if (method == Method::IMMMode) {
                c.fisher = read_checkpoint((out_dir / task_file("fisher", t)).string());
                c.has_fisher = true;
            }
            ckpts.push_back(std::move(c));
        }
        for (std::size_t t = 1; t <= n_tasks; ++t) {
            ParamSet params;
            if ((method == Method::IMMMean || method == Method::IMMMode) && t > 1) {
                const std::vector<Checkpoint> prefix(ckpts.begin(),
                                                     ckpts.begin() + static_cast<long>(t));
                const std::vector<double> alphas(t, 1.0 / static_cast<double>(t));
                params = method == Method::IMMMean ? imm_merge_mean(prefix, alphas)
                                                   : imm_merge_mode(prefix, alphas);
            } else {
                params = ckpts[t - 1].params;
            }
            models.columns.push_back(make_embed_fn({arch, std::move(params)}));
        }
    }
    models.final_model = models.columns.back();
    return models;
}

JsonValue double_matrix(const std::vector<std::vector<double>>& m) {
    JsonValue rows = JsonValue::array();
    for (const auto& row : m) {
        JsonValue r = JsonValue::array();
        for (const double x : row) r.push(JsonValue::of(x));
        rows.push(std::move(r));
    }
    return rows;
}

JsonValue double_array(const std::vector<double>& v) {
    JsonValue arr = JsonValue::array();
    for (const double x : v) arr.push(JsonValue::of(x));
    return arr;
}

void cmd_eval(const EvalArgs& a, const CLI::App* sub) {
    require_present("--facts", a.facts);
    require_present("--embeddings", a.embeddings);
    require_present("--examples", a.examples);
    require_present("--benchmark", a.benchmark);
    require_present("--out", a.out);
    require(!a.topk.empty(), "--topk needs at least one value");
    const Dataset data = load_dataset(a.facts, a.examples);
    const EmbeddingTable table = load_embeddings(a.embeddings);
    const Benchmark benchmark = load_benchmark(a.benchmark);
    const EvalContext ctx = make_eval_context(data, benchmark, table);
    const fs::path out_dir(a.out);

    // The training manifest names the method the checkpoints belong to.
    const fs::path train_manifest = out_dir / "manifest_train.json";
    require(fs::exists(train_manifest), a.out, ": no manifest_train.json; train first");
    Method method = Method::Finetune;
    try {
        const auto j = nlohmann::json::parse(read_text_file(train_manifest.string()));
        method = parse_method(j.at("config").at("method").get<std::string>());
    } catch (const nlohmann::json::exception& e) {
        fail(train_manifest.string(), ": cannot read the training method: ", e.what());
    }

    const ModelArch arch{data.feature_dim, 64, table.dim};
    const std::size_t n_tasks = benchmark.tasks.size();
    const LoadedModels models = load_models(out_dir, method, arch, n_tasks);

    const std::size_t slice_k =
        std::find(a.topk.begin(), a.topk.end(), 5) != a.topk.end() ? 5 : a.topk.front();
    std::vector<std::size_t> test_sizes;
    for (const Task& t : benchmark.tasks) test_sizes.push_back(t.test_example_ids.size());

    JsonValue report = JsonValue::object();
    JsonValue meta = JsonValue::object();
    meta.set("tool", JsonValue::of(kToolVersion));
    meta.set("method", JsonValue::of(method_name(method)));
    meta.set("split_type", JsonValue::of(benchmark.split_type));
    meta.set("seed", JsonValue::of(static_cast<std::int64_t>(benchmark.seed)));
    meta.set("n_tasks", JsonValue::of(n_tasks));
    JsonValue topk_json = JsonValue::array();
    for (const auto k : a.topk) topk_json.push(JsonValue::of(k));
    meta.set("topk", std::move(topk_json));
    meta.set("slice_topk", JsonValue::of(slice_k));
    meta.set("fewshot_max", JsonValue::of(kFewshotMax));
    meta.set("spo_rare_max", JsonValue::of(kSpoRareMax));
    meta.set("spo_threshold", JsonValue::of(kSpoThreshold));
    report.set("meta", std::move(meta));

    // Final-model accuracy, both metrics, each requested K.
    std::ostringstream accuracy_csv;
    accuracy_csv << "K,task,standard,generalized\n";
    JsonValue table_json = JsonValue::array();
    for (const std::size_t K : a.topk) {
        std::vector<double> std_accs, gen_accs;
        for (const Task& task : benchmark.tasks) {
            std_accs.push_back(standard_accuracy(models.final_model, ctx, task, K));
            gen_accs.push_back(generalized_accuracy(models.final_model, ctx, task, K));
            accuracy_csv << K << ',' << task.index << ',' << format_double(std_accs.back())
                         << ',' << format_double(gen_accs.back()) << '\n';
        }
        const auto [std_mean, std_wmean] = summarize(std_accs, test_sizes);
        const auto [gen_mean, gen_wmean] = summarize(gen_accs, test_sizes);
        JsonValue entry = JsonValue::object();
        entry.set("K", JsonValue::of(K));
        entry.set("standard", double_array(std_accs));
        entry.set("generalized", double_array(gen_accs));
        entry.set("standard_mean", JsonValue::of(std_mean));
        entry.set("standard_mean_over_examples", JsonValue::of(std_wmean));
        entry.set("generalized_mean", JsonValue::of(gen_mean));
        entry.set("generalized_mean_over_examples", JsonValue::of(gen_wmean));
        table_json.push(std::move(entry));
    }
    report.set("accuracy_table", std::move(table_json));

    // Transfer block (sequential methods only), generalized metric.
    std::vector<std::string> artifacts = {"report.json", "accuracy.csv"};
    if (models.sequential) {
        const TransferMatrix tm =
            build_R(models.columns, models.init, ctx, slice_k, Metric::Generalized);
        report.set("R", double_matrix(tm.R));
        report.set("baseline", double_array(tm.baseline));
        if (n_tasks >= 2) {
            const auto [bwt, fwt] = transfer_metrics(tm);
            report.set("bwt", JsonValue::of(bwt));
            report.set("fwt", JsonValue::of(fwt));
        } else {
            report.set("bwt", JsonValue::null());
            report.set("fwt", JsonValue::null());
        }
        report.set("gained", double_array(gained_knowledge(tm, test_sizes)));

        std::ostringstream transfer_csv;
        transfer_csv << "task,baseline";
        for (std::size_t n = 1; n <= n_tasks; ++n) transfer_csv << ",after_" << n;
        transfer_csv << '\n';
        for (std::size_t j = 0; j < n_tasks; ++j) {
            transfer_csv << (j + 1) << ',' << format_double(tm.baseline[j]);
            for (std::size_t n = 0; n < n_tasks; ++n)
                transfer_csv << ',' << format_double(tm.R[j][n]);
            transfer_csv << '\n';
        }
        write_text_file((out_dir / "transfer.csv").string(), transfer_csv.str());
        artifacts.push_back("transfer.csv");
    } else {
        report.set("R", JsonValue::null());
        report.set("baseline", JsonValue::null());
        report.set("bwt", JsonValue::null());
        report.set("fwt", JsonValue::null());
        report.set("gained", JsonValue::null());
    }

    // Slices of the final model, generalized metric at slice_topk.
    JsonValue bins_json = JsonValue::array();
    for (const BinRow& b :
         longtail_bins(models.final_model, ctx, default_bin_edges(), slice_k,
                       Metric::Generalized)) {
        JsonValue row = JsonValue::object();
        row.set("lo", JsonValue::of(b.lo));
        row.set("hi", b.hi == SIZE_MAX ? JsonValue::null() : JsonValue::of(b.hi));
        row.set("support", JsonValue::of(b.support));
        row.set("accuracy", JsonValue::of(b.accuracy));
        bins_json.push(std::move(row));
    }
    report.set("bins", std::move(bins_json));

    JsonValue fewshot_json = JsonValue::array();
    for (const FewshotRow& r :
         fewshot_accuracy(models.final_model, ctx, kFewshotMax, slice_k, Metric::Generalized)) {
        JsonValue row = JsonValue::object();
        row.set("task", JsonValue::of(r.task_index));
        row.set("support", JsonValue::of(r.support));
        row.set("accuracy", JsonValue::of(r.accuracy));
        fewshot_json.push(std::move(row));
    }
    report.set("fewshot", std::move(fewshot_json));

    JsonValue types_json = JsonValue::array();
    for (const Task& task : benchmark.tasks) {
        JsonValue cells = JsonValue::array();
        for (const FactTypeRow& r : fact_type_breakdown(models.final_model, ctx, task, slice_k,
                                                        Metric::Generalized)) {
            JsonValue cell = JsonValue::object();
            cell.set("type", JsonValue::of(fact_type_name(r.type)));
            cell.set("support", JsonValue::of(r.support));
            cell.set("accuracy", JsonValue::of(r.accuracy));
            cells.push(std::move(cell));
        }
        JsonValue row = JsonValue::object();
        row.set("task", JsonValue::of(task.index));
        row.set("cells", std::move(cells));
        types_json.push(std::move(row));
    }
    report.set("fact_types", std::move(types_json));

    JsonValue spo_json = JsonValue::array();
    for (const SpoCell& c :
         spo_generalization(models.final_model, ctx, kSpoRareMax, kSpoThreshold, slice_k)) {
        JsonValue cell = JsonValue::object();
        cell.set("condition", JsonValue::of(c.condition));
        cell.set("n_facts", JsonValue::of(c.n_facts));
        cell.set("n_examples", JsonValue::of(c.n_examples));
        cell.set("accuracy", c.n_examples == 0 ? JsonValue::null() : JsonValue::of(c.accuracy));
        spo_json.push(std::move(cell));
    }
    report.set("spo_generalization", std::move(spo_json));

    JsonValue sim = JsonValue::object();
    sim.set("w2v", double_matrix(similarity_matrix_w2v(benchmark, data, table)));
    sim.set("spo_overlap", double_matrix(similarity_matrix_spo(benchmark, data)));
    report.set("task_similarity", std::move(sim));

    JsonValue sizes = JsonValue::array();
    for (const auto s : test_sizes) sizes.push(JsonValue::of(s));
    report.set("test_sizes", std::move(sizes));

    write_text_file((out_dir / "report.json").string(), json_to_string(report));
    write_text_file((out_dir / "accuracy.csv").string(), accuracy_csv.str());

    write_manifest(out_dir, "eval", sub, benchmark.seed,
                   {{"facts", a.facts},
                    {"embeddings", a.embeddings},
                    {"examples", a.examples},
                    {"benchmark", a.benchmark}},
                   artifacts);
}

// ---- analyze ----

struct AnalyzeArgs {
    std::string out;
    std::string config;
};

void cmd_analyze(const AnalyzeArgs& a, const CLI::App* sub) {
    require_present("--out", a.out);
    const fs::path out_dir(a.out);
    const fs::path report_path = out_dir / "report.json";
    require(fs::exists(report_path), a.out, ": no report.json; eval first");
    nlohmann::json report;
    try {
        report = nlohmann::json::parse(read_text_file(report_path.string()));
    } catch (const nlohmann::json::exception& e) {
        fail(report_path.string(), ": invalid JSON: ", e.what());
    }

    const auto num = [](const nlohmann::json& j) { return format_double(j.get<double>()); };

    try {
        std::ostringstream bins;
        bins << "lo,hi,support,accuracy\n";
        for (const auto& b : report.at("bins")) {
            bins << b.at("lo").get<std::int64_t>() << ',';
            if (b.at("hi").is_null()) {
                bins << "inf";
            } else {
                bins << b.at("hi").get<std::int64_t>();
            }
            bins << ',' << b.at("support").get<std::int64_t>() << ',' << num(b.at("accuracy"))
                 << '\n';
        }
        write_text_file((out_dir / "bins.csv").string(), bins.str());

        std::ostringstream fewshot;
        fewshot << "task,support,accuracy\n";
        for (const auto& r : report.at("fewshot")) {
            fewshot << r.at("task").get<std::int64_t>() << ','
                    << r.at("support").get<std::int64_t>() << ',' << num(r.at("accuracy"))
                    << '\n';
        }
        write_text_file((out_dir / "fewshot.csv").string(), fewshot.str());

        std::ostringstream types;
        types << "task,type,support,accuracy\n";
        for (const auto& row : report.at("fact_types")) {
            for (const auto& cell : row.at("cells")) {
                types << row.at("task").get<std::int64_t>() << ','
                      << cell.at("type").get<std::string>() << ','
                      << cell.at("support").get<std::int64_t>() << ','
                      << num(cell.at("accuracy")) << '\n';
            }
        }
        write_text_file((out_dir / "fact_types.csv").string(), types.str());

        std::ostringstream spo;
        spo << "condition,n_facts,n_examples,accuracy\n";
        for (const auto& cell : report.at("spo_generalization")) {
            spo << cell.at("condition").get<std::string>() << ','
                << cell.at("n_facts").get<std::int64_t>() << ','
                << cell.at("n_examples").get<std::int64_t>() << ',';
            if (!cell.at("accuracy").is_null()) spo << num(cell.at("accuracy"));
            spo << '\n';
        }
        write_text_file((out_dir / "spo_generalization.csv").string(), spo.str());

        std::ostringstream gained;
        gained << "after_task,accuracy\n";
        if (!report.at("gained").is_null()) {
            std::size_t n = 1;
            for (const auto& g : report.at("gained")) gained << n++ << ',' << num(g) << '\n';
        }
        write_text_file((out_dir / "gained.csv").string(), gained.str());
    } catch (const nlohmann::json::exception& e) {
        fail(report_path.string(), ": not an eval report: ", e.what());
    }

    const std::uint64_t seed = report.contains("meta") && report["meta"].contains("seed")
                                   ? report["meta"]["seed"].get<std::uint64_t>()
                                   : 0;
    write_manifest(out_dir, "analyze", sub, seed, {{"report", report_path.string()}},
                   {"bins.csv", "fewshot.csv", "fact_types.csv", "spo_generalization.csv",
                    "gained.csv"});
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"Lifelong fact-learning laboratory"};
    app.require_subcommand(1);

    SplitArgs split_args;
    CLI::App* split = app.add_subcommand("split", "Partition facts into a task benchmark");
    split->add_option("--facts", split_args.facts, "Fact TSV")->capture_default_str();
    split->add_option("--embeddings", split_args.embeddings, "Word-embedding text file")
        ->capture_default_str();
    split->add_option("--examples", split_args.examples, "Example CSV")
        ->capture_default_str();
    split->add_option("--mode", split_args.mode, "semantic or random")->capture_default_str();
    split->add_option("--tasks", split_args.tasks, "Number of tasks")
        ->check(CLI::PositiveNumber)
        ->capture_default_str();
    split->add_option("--trials", split_args.trials, "Shuffles tried by the random split")
        ->check(CLI::PositiveNumber)
        ->capture_default_str();
    split->add_option("--seed", split_args.seed, "Run seed")->capture_default_str();
    split->add_option("--out", split_args.out, "Output directory")
        ->capture_default_str();
    split->add_option("--config", split_args.config,
                      "Flat key=value defaults; explicit flags win");

    TrainArgs train_args;
    CLI::App* train = app.add_subcommand("train", "Train a method over the task sequence");
    train->add_option("--facts", train_args.facts, "Fact TSV")->capture_default_str();
    train->add_option("--embeddings", train_args.embeddings, "Word-embedding text file")
        ->capture_default_str();
    train->add_option("--examples", train_args.examples, "Example CSV")
        ->capture_default_str();
    train->add_option("--benchmark", train_args.benchmark, "Benchmark JSON from split")
        ->capture_default_str();
    train->add_option("--method", train_args.method,
                      "finetune|si|mas|imm-mean|imm-mode|expertgate|joint")
        ->capture_default_str();
    train->add_option("--lambda", train_args.lambda, "Anchor-penalty strength")
        ->capture_default_str();
    train->add_option("--epochs", train_args.epochs, "SGD epochs per task")
        ->check(CLI::PositiveNumber)
        ->capture_default_str();
    train->add_option("--lr", train_args.lr, "SGD learning rate")->capture_default_str();
    train->add_option("--seed", train_args.seed, "Run seed")->capture_default_str();
    train->add_option("--resume", train_args.resume,
                      "Continue an interrupted run at this task index")
        ->capture_default_str();
    train->add_option("--out", train_args.out, "Output directory")
        ->capture_default_str();
    train->add_option("--config", train_args.config,
                      "Flat key=value defaults; explicit flags win");

    EvalArgs eval_args;
    CLI::App* eval = app.add_subcommand("eval", "Score checkpoints and write the report");
    eval->add_option("--facts", eval_args.facts, "Fact TSV")->capture_default_str();
    eval->add_option("--embeddings", eval_args.embeddings, "Word-embedding text file")
        ->capture_default_str();
    eval->add_option("--examples", eval_args.examples, "Example CSV")
        ->capture_default_str();
    eval->add_option("--benchmark", eval_args.benchmark, "Benchmark JSON from split")
        ->capture_default_str();
    eval->add_option("--topk", eval_args.topk, "Top-K cutoffs (e.g. 1,5,10)")
        ->delimiter(',')
        ->check(CLI::PositiveNumber)
        ->capture_default_str();
    eval->add_option("--out", eval_args.out, "Directory holding the trained checkpoints")
        ->capture_default_str();
    eval->add_option("--config", eval_args.config,
                     "Flat key=value defaults; explicit flags win");

    AnalyzeArgs analyze_args;
    CLI::App* analyze = app.add_subcommand("analyze", "Expand a report into slice CSVs");
    analyze->add_option("--out", analyze_args.out, "Directory holding report.json")
        ->capture_default_str();
    analyze->add_option("--config", analyze_args.config,
                        "Flat key=value defaults; explicit flags win");

    CLI11_PARSE(app, argc, argv);

    try {
        if (split->parsed()) {
            apply_config(split, split_args.config);
            cmd_split(split_args, split);
        }
        if (train->parsed()) {
            apply_config(train, train_args.config);
            cmd_train(train_args, train);
        }
        if (eval->parsed()) {
            apply_config(eval, eval_args.config);
            cmd_eval(eval_args, eval);
        }
        if (analyze->parsed()) {
            apply_config(analyze, analyze_args.config);
            cmd_analyze(analyze_args, analyze);
        }
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 1;
    }
    return 0;
}
