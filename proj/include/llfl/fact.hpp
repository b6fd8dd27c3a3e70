#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <string>
#include <unordered_map>
#include <vector>

namespace llfl {

// Structured fact: subject always present, predicate and object optional.
// An absent predicate with a present object is invalid.
struct Fact {
    std::int64_t id = 0;
    std::string subject;
    std::optional<std::string> predicate;
    std::optional<std::string> object;
};

enum class FactType { S, SP, SPO };

FactType fact_type(const Fact& f);
const char* fact_type_name(FactType t);

// Pretrained word vectors, keyed by lowercase token.
struct EmbeddingTable {
    std::size_t dim = 0;
    std::unordered_map<std::string, std::vector<double>> vectors;
};

// Concatenation of three d-blocks (subject, predicate, object).  Defined
// blocks have unit norm; undefined ones are all zero with mask false.
struct FactVector {
    std::size_t d = 0;
    std::vector<double> data;      // 3 * d
    std::array<bool, 3> mask = {false, false, false};
};

// ASCII lowercase copy.
std::string lowercase(std::string s);
// Whitespace-split tokens, empty pieces dropped.
std::vector<std::string> split_tokens(const std::string& phrase);

// Mean of the phrase's token vectors, rescaled to unit norm.  Errors list
// every token missing from the table; an empty phrase or a zero-norm mean
// is an error too.
std::vector<double> embed_phrase(const EmbeddingTable& table, const std::string& phrase);

// Build the 3-block vector for a fact.
FactVector embed_fact(const EmbeddingTable& table, const Fact& fact);

// Throws unless the mask/zero-block/unit-norm structure holds (norm
// tolerance 1e-9) and the subject block is defined.
void validate_fact_vector(const FactVector& v);

// Distance when no slot is shared by both masks; exceeds every reachable
// masked distance (those are bounded by 4).
inline constexpr double kNoSharedSlotDistance = 4.0;

// Mean squared block distance over slots defined in both operands.
double fact_distance(const FactVector& a, const FactVector& b);

// Condensed upper-triangular index of pair (i, j), i < j.
std::size_t condensed_index(std::size_t i, std::size_t j, std::size_t n);

// All pairwise distances in condensed order; needs at least two vectors.
std::vector<double> pairwise_distances(const std::vector<FactVector>& vecs);

} // namespace llfl
