#pragma once

#include "llfl/data.hpp"
#include "llfl/fact.hpp"
#include "llfl/graph.hpp"
#include "llfl/splitter.hpp"

#include <cstdint>
#include <map>
#include <string>
#include <utility>
#include <vector>

namespace llfl {

// ---- numbers as text ----

// 17 significant digits: enough to round-trip any double exactly.
std::string format_double(double v);
double parse_double(const std::string& text, const std::string& context);
std::int64_t parse_int(const std::string& text, const std::string& context);

// ---- whole files ----

std::string read_text_file(const std::string& path);
void write_text_file(const std::string& path, const std::string& content);
// FNV-1a 64 over the raw bytes, as 16 lowercase hex digits.
std::string file_digest_hex(const std::string& path);

// ---- dataset inputs ----

// Plain text: header "V D", then V lines "token f1 ... fD".  Tokens are
// lowercased on load; duplicates (after lowercasing) are an error.
EmbeddingTable load_embeddings(const std::string& path);
void write_embeddings(const std::string& path, const EmbeddingTable& table,
                      const std::vector<std::string>& token_order);

// TSV with header "id<TAB>subject<TAB>predicate<TAB>object"; "*" marks an
// undefined slot.
std::vector<Fact> load_facts(const std::string& path);
void write_facts(const std::string& path, const std::vector<Fact>& facts);

// CSV with header "example_id,fact_id,split,f1,...,fF"; split is "train"
// or "test".
std::vector<Example> load_examples(const std::string& path);
void write_examples(const std::string& path, const std::vector<Example>& examples);

// ---- ordered JSON emission ----

// Emitted JSON keeps insertion order and prints doubles with 17
// significant digits, so identical values give identical bytes.
struct JsonValue {
    enum class Kind { Null, Bool, Int, Num, Str, Arr, Obj };
    Kind kind = Kind::Null;
    bool boolean = false;
    std::int64_t integer = 0;
    double number = 0.0;
    std::string text;
    std::vector<JsonValue> items;
    std::vector<std::pair<std::string, JsonValue>> fields;

    static JsonValue null();
    static JsonValue of(bool v);
    static JsonValue of(std::int64_t v);
    static JsonValue of(std::size_t v);
    static JsonValue of(int v);
    static JsonValue of(double v);
    static JsonValue of(std::string v);
    static JsonValue of(const char* v);
    static JsonValue array();
    static JsonValue object();

    JsonValue& push(JsonValue v);                    // array append
    JsonValue& set(std::string key, JsonValue v);    // object append
};

std::string json_to_string(const JsonValue& v);

// ---- artifact files ----

void write_benchmark(const std::string& path, const Benchmark& b);
Benchmark load_benchmark(const std::string& path);

void write_dendrogram(const std::string& path, const Dendrogram& d);

void write_similarity(const std::string& path, const std::vector<std::vector<double>>& w2v,
                      const std::vector<std::vector<double>>& spo);

// Binary little-endian: magic "LLFLCKPT", version u32, then per tensor
// (name length u32, name bytes, rank u32, dims u32[rank], f64 data).
inline constexpr std::uint32_t kCheckpointVersion = 1;
void write_checkpoint(const std::string& path, const ParamSet& params);
ParamSet read_checkpoint(const std::string& path);

// Flat "key = value" lines; '#' starts a whole-line comment; duplicate
// keys error.
std::map<std::string, std::string> load_config(const std::string& path);

} // namespace llfl
