#include "llfl/data.hpp"

#include "llfl/error.hpp"

#include <algorithm>
#include <cmath>
#include <set>

namespace llfl {

Dataset Dataset::build(std::vector<Fact> facts, std::vector<Example> examples) {
    Dataset d;
    d.facts = std::move(facts);
    d.examples = std::move(examples);
    require(!d.facts.empty(), "Dataset: no facts");

    for (std::size_t i = 0; i < d.facts.size(); ++i) {
        const Fact& f = d.facts[i];
        require(!f.subject.empty(), "Dataset: fact ", f.id, " has an empty subject");
        require(f.predicate || !f.object, "Dataset: fact ", f.id,
                " has an object but no predicate");
        require(d.fact_pos.emplace(f.id, i).second, "Dataset: duplicate fact id ", f.id);
    }
    if (!d.examples.empty()) d.feature_dim = d.examples.front().features.size();
    for (std::size_t i = 0; i < d.examples.size(); ++i) {
        const Example& e = d.examples[i];
        require(d.example_pos.emplace(e.id, i).second, "Dataset: duplicate example id ", e.id);
        require(d.fact_pos.count(e.fact_id), "Dataset: example ", e.id, " references unknown fact ",
                e.fact_id);
        require(e.features.size() == d.feature_dim, "Dataset: example ", e.id, " has ",
                e.features.size(), " features, expected ", d.feature_dim);
        for (double v : e.features) {
            require(std::isfinite(v), "Dataset: example ", e.id, " has a non-finite feature");
        }
        if (e.is_train) ++d.train_counts_[e.fact_id];
    }
    return d;
}

const Fact& Dataset::fact_by_id(std::int64_t id) const {
    auto it = fact_pos.find(id);
    if (it == fact_pos.end()) fail("Dataset: unknown fact id ", id);
    return facts[it->second];
}

const Example& Dataset::example_by_id(std::int64_t id) const {
    auto it = example_pos.find(id);
    if (it == example_pos.end()) fail("Dataset: unknown example id ", id);
    return examples[it->second];
}

std::size_t Dataset::train_count(std::int64_t fact_id) const {
    auto it = train_counts_.find(fact_id);
    return it == train_counts_.end() ? 0 : it->second;
}

void validate_benchmark(const Benchmark& b, const Dataset& data) {
    require(!b.tasks.empty(), "Benchmark: no tasks");
    require(b.split_type == "semantic" || b.split_type == "random",
            "Benchmark: unknown split type '", b.split_type, "'");

    std::set<std::int64_t> seen_facts;
    std::set<std::int64_t> seen_examples;
    std::unordered_map<std::int64_t, int> task_of_fact;
    for (std::size_t t = 0; t < b.tasks.size(); ++t) {
        const Task& task = b.tasks[t];
        require(task.index == static_cast<int>(t) + 1, "Benchmark: task at position ", t,
                " has index ", task.index);
        require(!task.fact_ids.empty(), "Benchmark: task ", task.index, " has no facts");
        for (auto id : task.fact_ids) {
            require(data.fact_pos.count(id), "Benchmark: task ", task.index,
                    " lists unknown fact ", id);
            require(seen_facts.insert(id).second, "Benchmark: fact ", id,
                    " appears in more than one task");
            task_of_fact[id] = task.index;
        }
        for (auto id : task.train_example_ids) {
            const Example& e = data.example_by_id(id);
            require(e.is_train, "Benchmark: example ", id, " listed as train but marked test");
            require(seen_examples.insert(id).second, "Benchmark: example ", id,
                    " appears more than once");
            require(task_of_fact.count(e.fact_id) && task_of_fact[e.fact_id] == task.index,
                    "Benchmark: example ", id, " routed to task ", task.index,
                    " but its fact belongs elsewhere");
        }
        for (auto id : task.test_example_ids) {
            const Example& e = data.example_by_id(id);
            require(!e.is_train, "Benchmark: example ", id, " listed as test but marked train");
            require(seen_examples.insert(id).second, "Benchmark: example ", id,
                    " appears more than once");
            require(task_of_fact.count(e.fact_id) && task_of_fact[e.fact_id] == task.index,
                    "Benchmark: example ", id, " routed to task ", task.index,
                    " but its fact belongs elsewhere");
        }
    }
    require(seen_facts.size() == data.facts.size(), "Benchmark: tasks cover ", seen_facts.size(),
            " facts, dataset has ", data.facts.size());
    require(seen_examples.size() == data.examples.size(), "Benchmark: tasks cover ",
            seen_examples.size(), " examples, dataset has ", data.examples.size());
}

} // namespace llfl
