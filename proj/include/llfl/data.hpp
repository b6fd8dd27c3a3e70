#pragma once

#include "llfl/fact.hpp"

#include <cstdint>
#include <string>
#include <unordered_map>
#include <vector>

namespace llfl {

// One labeled image: a feature vector plus the id of its gold fact.
struct Example {
    std::int64_t id = 0;
    std::int64_t fact_id = 0;
    bool is_train = true;
    std::vector<double> features;
};

// Facts plus examples with the id indexes needed everywhere else.
struct Dataset {
    std::vector<Fact> facts;
    std::vector<Example> examples;
    std::size_t feature_dim = 0;
    std::unordered_map<std::int64_t, std::size_t> fact_pos;
    std::unordered_map<std::int64_t, std::size_t> example_pos;

    // Validates: unique ids, known gold facts, uniform finite features,
    // object-implies-predicate structure.
    static Dataset build(std::vector<Fact> facts, std::vector<Example> examples);

    const Fact& fact_by_id(std::int64_t id) const;
    const Example& example_by_id(std::int64_t id) const;
    // Number of train examples whose gold fact is `fact_id`.
    std::size_t train_count(std::int64_t fact_id) const;

private:
    std::unordered_map<std::int64_t, std::size_t> train_counts_;
};

struct Task {
    int index = 0;  // 1-based position in the training sequence
    std::vector<std::int64_t> fact_ids;
    std::vector<std::int64_t> train_example_ids;
    std::vector<std::int64_t> test_example_ids;
};

struct Benchmark {
    std::vector<Task> tasks;
    std::uint64_t seed = 0;
    std::string split_type;  // "semantic" or "random"
};

// Structural checks: indices are 1..N in order, tasks partition the fact
// set, every example is listed exactly once under its gold fact's task
// with the right train/test side.
void validate_benchmark(const Benchmark& b, const Dataset& data);

} // namespace llfl
