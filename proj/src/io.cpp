#include "llfl/io.hpp"

#include "llfl/error.hpp"
#include "llfl/rng.hpp"

#include <json.hpp>

#include <algorithm>
#include <charconv>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <sstream>

namespace llfl {

namespace {

std::string trim(const std::string& s) {
    std::size_t b = 0, e = s.size();
    while (b < e && (s[b] == ' ' || s[b] == '\t' || s[b] == '\r' || s[b] == '\n')) ++b;
    while (e > b && (s[e - 1] == ' ' || s[e - 1] == '\t' || s[e - 1] == '\r' || s[e - 1] == '\n'))
        --e;
    return s.substr(b, e - b);
}

std::vector<std::string> split_on(const std::string& line, char sep) {
    std::vector<std::string> out;
    std::size_t start = 0;
    while (true) {
        const std::size_t pos = line.find(sep, start);
        if (pos == std::string::npos) {
            out.push_back(line.substr(start));
            return out;
        }
        out.push_back(line.substr(start, pos - start));
        start = pos + 1;
    }
}

// Reads lines with the trailing \r of CRLF files stripped.
std::vector<std::string> read_lines(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    require(in.good(), "cannot open ", path);
    std::vector<std::string> lines;
    std::string line;
    while (std::getline(in, line)) {
        if (!line.empty() && line.back() == '\r') line.pop_back();
        lines.push_back(line);
    }
    return lines;
}

std::string loc(const std::string& path, std::size_t line_no) {
    return path + ":" + std::to_string(line_no);
}

} // namespace

std::string format_double(double v) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

double parse_double(const std::string& text, const std::string& context) {
    const std::string t = trim(text);
    double v = 0.0;
    const auto [ptr, ec] = std::from_chars(t.data(), t.data() + t.size(), v);
    require(ec == std::errc{} && ptr == t.data() + t.size() && !t.empty(), context,
            ": cannot parse '", text, "' as a number");
    return v;
}

std::int64_t parse_int(const std::string& text, const std::string& context) {
    const std::string t = trim(text);
    std::int64_t v = 0;
    const auto [ptr, ec] = std::from_chars(t.data(), t.data() + t.size(), v);
    require(ec == std::errc{} && ptr == t.data() + t.size() && !t.empty(), context,
            ": cannot parse '", text, "' as an integer");
    return v;
}

std::string read_text_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    require(in.good(), "cannot open ", path);
    std::ostringstream out;
    out << in.rdbuf();
    return out.str();
}

void write_text_file(const std::string& path, const std::string& content) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    require(out.good(), "cannot open ", path, " for writing");
    out.write(content.data(), static_cast<std::streamsize>(content.size()));
    out.flush();
    require(out.good(), "failed writing ", path);
}

std::string file_digest_hex(const std::string& path) {
    const std::string bytes = read_text_file(path);
    const std::uint64_t h = fnv1a64(bytes.data(), bytes.size());
    char buf[17];
    std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(h));
    return buf;
}

EmbeddingTable load_embeddings(const std::string& path) {
    const auto lines = read_lines(path);
    require(!lines.empty(), path, ": empty embedding file");
    const auto header = split_tokens(lines[0]);
    require(header.size() == 2, loc(path, 1), ": header must be 'V D', got '", lines[0], "'");
    const std::int64_t v = parse_int(header[0], loc(path, 1));
    const std::int64_t d = parse_int(header[1], loc(path, 1));
    require(v >= 1 && d >= 1, loc(path, 1), ": vocab and dimension must be positive");

    EmbeddingTable table;
    table.dim = static_cast<std::size_t>(d);
    std::size_t seen = 0;
    for (std::size_t i = 1; i < lines.size(); ++i) {
        if (trim(lines[i]).empty()) {
            require(i + 1 == lines.size(), loc(path, i + 1), ": blank line inside embeddings");
            continue;
        }
        require(seen < static_cast<std::size_t>(v), loc(path, i + 1),
                ": more rows than the declared vocab size ", v);
        const auto parts = split_tokens(lines[i]);
        require(parts.size() == table.dim + 1, loc(path, i + 1), ": expected token plus ",
                table.dim, " values, got ", parts.size(), " fields");
        const std::string token = lowercase(parts[0]);
        require(!table.vectors.count(token), loc(path, i + 1), ": duplicate token '", token,
                "'");
        std::vector<double> vec(table.dim);
        for (std::size_t k = 0; k < table.dim; ++k) {
            vec[k] = parse_double(parts[k + 1], loc(path, i + 1));
        }
        table.vectors.emplace(token, std::move(vec));
        ++seen;
    }
    require(seen == static_cast<std::size_t>(v), path, ": declared ", v, " tokens but found ",
            seen);
    return table;
}

void write_embeddings(const std::string& path, const EmbeddingTable& table,
                      const std::vector<std::string>& token_order) {
    require(token_order.size() == table.vectors.size(), "write_embeddings: order lists ",
            token_order.size(), " tokens, table has ", table.vectors.size());
    std::ostringstream out;
    out << token_order.size() << ' ' << table.dim << '\n';
    for (const std::string& token : token_order) {
        const auto it = table.vectors.find(token);
        require(it != table.vectors.end(), "write_embeddings: unknown token '", token, "'");
        out << token;
        for (const double x : it->second) out << ' ' << format_double(x);
        out << '\n';
    }
    write_text_file(path, out.str());
}

std::vector<Fact> load_facts(const std::string& path) {
    const auto lines = read_lines(path);
    require(!lines.empty(), path, ": empty fact file");
    require(lines[0] == "id\tsubject\tpredicate\tobject", loc(path, 1),
            ": header must be 'id<TAB>subject<TAB>predicate<TAB>object'");
    std::vector<Fact> facts;
    for (std::size_t i = 1; i < lines.size(); ++i) {
        if (trim(lines[i]).empty()) continue;
        const auto parts = split_on(lines[i], '\t');
        require(parts.size() == 4, loc(path, i + 1), ": expected 4 tab-separated fields, got ",
                parts.size());
        Fact f;
        f.id = parse_int(parts[0], loc(path, i + 1));
        f.subject = trim(parts[1]);
        require(!f.subject.empty() && f.subject != "*", loc(path, i + 1),
                ": subject must be defined");
        const std::string pred = trim(parts[2]);
        const std::string obj = trim(parts[3]);
        require(!pred.empty() && !obj.empty(), loc(path, i + 1),
                ": empty field (use '*' for an undefined slot)");
        if (pred != "*") f.predicate = pred;
        if (obj != "*") f.object = obj;
        require(!(f.object && !f.predicate), loc(path, i + 1),
                ": object defined without a predicate");
        facts.push_back(std::move(f));
    }
    return facts;
}

void write_facts(const std::string& path, const std::vector<Fact>& facts) {
    std::ostringstream out;
    out << "id\tsubject\tpredicate\tobject\n";
    for (const Fact& f : facts) {
        out << f.id << '\t' << f.subject << '\t' << (f.predicate ? *f.predicate : "*") << '\t'
            << (f.object ? *f.object : "*") << '\n';
    }
    write_text_file(path, out.str());
}

std::vector<Example> load_examples(const std::string& path) {
    const auto lines = read_lines(path);
    require(!lines.empty(), path, ": empty example file");
    const auto header = split_on(lines[0], ',');
    require(header.size() >= 4 && header[0] == "example_id" && header[1] == "fact_id" &&
                header[2] == "split",
            loc(path, 1), ": header must be 'example_id,fact_id,split,f1,...,fF'");
    const std::size_t feature_dim = header.size() - 3;
    for (std::size_t k = 0; k < feature_dim; ++k) {
        require(header[k + 3] == "f" + std::to_string(k + 1), loc(path, 1),
                ": feature column ", k + 4, " must be named f", k + 1);
    }

    std::vector<Example> examples;
    for (std::size_t i = 1; i < lines.size(); ++i) {
        if (trim(lines[i]).empty()) continue;
        const auto parts = split_on(lines[i], ',');
        require(parts.size() == header.size(), loc(path, i + 1), ": expected ", header.size(),
                " fields, got ", parts.size());
        Example e;
        e.id = parse_int(parts[0], loc(path, i + 1));
        e.fact_id = parse_int(parts[1], loc(path, i + 1));
        const std::string split = trim(parts[2]);
        require(split == "train" || split == "test", loc(path, i + 1),
                ": split must be 'train' or 'test', got '", split, "'");
        e.is_train = split == "train";
        e.features.resize(feature_dim);
        for (std::size_t k = 0; k < feature_dim; ++k) {
            e.features[k] = parse_double(parts[k + 3], loc(path, i + 1));
        }
        examples.push_back(std::move(e));
    }
    return examples;
}

void write_examples(const std::string& path, const std::vector<Example>& examples) {
    require(!examples.empty(), "write_examples: no examples");
    const std::size_t feature_dim = examples.front().features.size();
    std::ostringstream out;
    out << "example_id,fact_id,split";
    for (std::size_t k = 1; k <= feature_dim; ++k) out << ",f" << k;
    out << '\n';
    for (const Example& e : examples) {
        require(e.features.size() == feature_dim, "write_examples: example ", e.id, " has ",
                e.features.size(), " features, expected ", feature_dim);
        out << e.id << ',' << e.fact_id << ',' << (e.is_train ? "train" : "test");
        for (const double x : e.features) out << ',' << format_double(x);
        out << '\n';
    }
    write_text_file(path, out.str());
}

JsonValue JsonValue::null() { return {}; }
JsonValue JsonValue::of(bool v) {
    JsonValue j;
    j.kind = Kind::Bool;
    j.boolean = v;
    return j;
}
JsonValue JsonValue::of(std::int64_t v) {
    JsonValue j;
    j.kind = Kind::Int;
    j.integer = v;
    return j;
}
JsonValue JsonValue::of(std::size_t v) { return of(static_cast<std::int64_t>(v)); }
JsonValue JsonValue::of(int v) { return of(static_cast<std::int64_t>(v)); }
JsonValue JsonValue::of(double v) {
    JsonValue j;
    j.kind = Kind::Num;
    j.number = v;
    return j;
}
JsonValue JsonValue::of(std::string v) {
    JsonValue j;
    j.kind = Kind::Str;
    j.text = std::move(v);
    return j;
}
JsonValue JsonValue::of(const char* v) { return of(std::string(v)); }
JsonValue JsonValue::array() {
    JsonValue j;
    j.kind = Kind::Arr;
    return j;
}
JsonValue JsonValue::object() {
    JsonValue j;
    j.kind = Kind::Obj;
    return j;
}

JsonValue& JsonValue::push(JsonValue v) {
    require(kind == Kind::Arr, "JsonValue::push on a non-array");
    items.push_back(std::move(v));
    return *this;
}

JsonValue& JsonValue::set(std::string key, JsonValue v) {
    require(kind == Kind::Obj, "JsonValue::set on a non-object");
    fields.emplace_back(std::move(key), std::move(v));
    return *this;
}

namespace {

void json_escape(const std::string& s, std::ostringstream& out) {
    out << '"';
    for (const char c : s) {
        switch (c) {
            case '"': out << "\\\""; break;
            case '\\': out << "\\\\"; break;
            case '\n': out << "\\n"; break;
            case '\t': out << "\\t"; break;
            case '\r': out << "\\r"; break;
            default:
                if (static_cast<unsigned char>(c) < 0x20) {
                    char buf[8];
                    std::snprintf(buf, sizeof(buf), "\\u%04x", c);
                    out << buf;
                } else {
                    out << c;
                }
        }
    }
    out << '"';
}

void json_emit(const JsonValue& v, std::ostringstream& out, int depth) {
    const std::string pad(static_cast<std::size_t>(depth) * 2, ' ');
    const std::string pad_in(static_cast<std::size_t>(depth + 1) * 2, ' ');
    switch (v.kind) {
        case JsonValue::Kind::Null: out << "null"; return;
        case JsonValue::Kind::Bool: out << (v.boolean ? "true" : "false"); return;
        case JsonValue::Kind::Int: out << v.integer; return;
        case JsonValue::Kind::Num: out << format_double(v.number); return;
        case JsonValue::Kind::Str: json_escape(v.text, out); return;
        case JsonValue::Kind::Arr: {
            if (v.items.empty()) {
                out << "[]";
                return;
            }
            // Scalar-only arrays stay on one line; keeps matrices readable.
            const bool flat = std::all_of(v.items.begin(), v.items.end(), [](const JsonValue& x) {
                return x.kind != JsonValue::Kind::Arr && x.kind != JsonValue::Kind::Obj;
            });
            out << '[';
            for (std::size_t i = 0; i < v.items.size(); ++i) {
                if (i) out << (flat ? ", " : ",");
                if (!flat) out << '\n' << pad_in;
                json_emit(v.items[i], out, depth + 1);
            }
            if (!flat) out << '\n' << pad;
            out << ']';
            return;
        }
        case JsonValue::Kind::Obj: {
            if (v.fields.empty()) {
                out << "{}";
                return;
            }
            out << '{';
            for (std::size_t i = 0; i < v.fields.size(); ++i) {
                if (i) out << ',';
                out << '\n' << pad_in;
                json_escape(v.fields[i].first, out);
                out << ": ";
                json_emit(v.fields[i].second, out, depth + 1);
            }
            out << '\n' << pad << '}';
            return;
        }
    }
}

} // namespace

std::string json_to_string(const JsonValue& v) {
    std::ostringstream out;
    json_emit(v, out, 0);
    out << '\n';
    return out.str();
}

namespace {

JsonValue id_array(const std::vector<std::int64_t>& ids) {
    JsonValue arr = JsonValue::array();
    for (const auto id : ids) arr.push(JsonValue::of(id));
    return arr;
}

} // namespace

void write_benchmark(const std::string& path, const Benchmark& b) {
    JsonValue root = JsonValue::object();
    JsonValue tasks = JsonValue::array();
    for (const Task& t : b.tasks) {
        JsonValue task = JsonValue::object();
        task.set("index", JsonValue::of(t.index));
        task.set("fact_ids", id_array(t.fact_ids));
        task.set("train_example_ids", id_array(t.train_example_ids));
        task.set("test_example_ids", id_array(t.test_example_ids));
        tasks.push(std::move(task));
    }
    root.set("tasks", std::move(tasks));
    root.set("seed", JsonValue::of(static_cast<std::int64_t>(b.seed)));
    root.set("split_type", JsonValue::of(b.split_type));
    write_text_file(path, json_to_string(root));
}

Benchmark load_benchmark(const std::string& path) {
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(read_text_file(path));
    } catch (const nlohmann::json::exception& e) {
        fail(path, ": invalid JSON: ", e.what());
    }
    try {
        Benchmark b;
        b.seed = static_cast<std::uint64_t>(j.at("seed").get<std::int64_t>());
        b.split_type = j.at("split_type").get<std::string>();
        for (const auto& jt : j.at("tasks")) {
            Task t;
            t.index = jt.at("index").get<int>();
            t.fact_ids = jt.at("fact_ids").get<std::vector<std::int64_t>>();
            t.train_example_ids = jt.at("train_example_ids").get<std::vector<std::int64_t>>();
            t.test_example_ids = jt.at("test_example_ids").get<std::vector<std::int64_t>>();
            b.tasks.push_back(std::move(t));
        }
        return b;
    } catch (const nlohmann::json::exception& e) {
        fail(path, ": not a benchmark file: ", e.what());
    }
}

void write_dendrogram(const std::string& path, const Dendrogram& d) {
    JsonValue arr = JsonValue::array();
    for (const Merge& m : d.merges) {
        JsonValue merge = JsonValue::object();
        merge.set("left", JsonValue::of(static_cast<std::int64_t>(m.left)));
        merge.set("right", JsonValue::of(static_cast<std::int64_t>(m.right)));
        merge.set("height", JsonValue::of(m.height));
        merge.set("size", JsonValue::of(static_cast<std::int64_t>(m.size)));
        arr.push(std::move(merge));
    }
    write_text_file(path, json_to_string(arr));
}

namespace {

JsonValue matrix_json(const std::vector<std::vector<double>>& m) {
    JsonValue rows = JsonValue::array();
    for (const auto& row : m) {
        JsonValue r = JsonValue::array();
        for (const double x : row) r.push(JsonValue::of(x));
        rows.push(std::move(r));
    }
    return rows;
}

} // namespace

void write_similarity(const std::string& path, const std::vector<std::vector<double>>& w2v,
                      const std::vector<std::vector<double>>& spo) {
    JsonValue root = JsonValue::object();
    root.set("w2v", matrix_json(w2v));
    root.set("spo_overlap", matrix_json(spo));
    write_text_file(path, json_to_string(root));
}

namespace {

constexpr char kCheckpointMagic[8] = {'L', 'L', 'F', 'L', 'C', 'K', 'P', 'T'};

void put_u32(std::string& out, std::uint32_t v) {
    for (int i = 0; i < 4; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}

void put_f64(std::string& out, double v) {
    std::uint64_t bits;
    std::memcpy(&bits, &v, 8);
    for (int i = 0; i < 8; ++i) out.push_back(static_cast<char>((bits >> (8 * i)) & 0xff));
}

struct ByteReader {
    const std::string& bytes;
    const std::string& path;
    std::size_t pos = 0;

    void need(std::size_t n, const char* what) {
        require(pos + n <= bytes.size(), path, ": truncated checkpoint (reading ", what, ")");
    }
    std::uint32_t u32(const char* what) {
        need(4, what);
        std::uint32_t v = 0;
        for (int i = 0; i < 4; ++i) {
            v |= static_cast<std::uint32_t>(static_cast<unsigned char>(bytes[pos + i]))
                 << (8 * i);
        }
        pos += 4;
        return v;
    }
    double f64(const char* what) {
        need(8, what);
        std::uint64_t bits = 0;
        for (int i = 0; i < 8; ++i) {
            bits |= static_cast<std::uint64_t>(static_cast<unsigned char>(bytes[pos + i]))
                    << (8 * i);
        }
        pos += 8;
        double v;
        std::memcpy(&v, &bits, 8);
        return v;
    }
    std::string str(std::size_t n, const char* what) {
        need(n, what);
        std::string s = bytes.substr(pos, n);
        pos += n;
        return s;
    }
};

} // namespace

void write_checkpoint(const std::string& path, const ParamSet& params) {
    std::string out;
    out.append(kCheckpointMagic, sizeof(kCheckpointMagic));
    put_u32(out, kCheckpointVersion);
    for (const std::string& name : params.names()) {
        const Tensor& t = params.get(name);
        put_u32(out, static_cast<std::uint32_t>(name.size()));
        out.append(name);
        put_u32(out, static_cast<std::uint32_t>(t.shape.size()));
        for (const std::size_t dim : t.shape) put_u32(out, static_cast<std::uint32_t>(dim));
        for (const double x : t.data) put_f64(out, x);
    }
    write_text_file(path, out);
}

ParamSet read_checkpoint(const std::string& path) {
    const std::string bytes = read_text_file(path);
    ByteReader r{bytes, path};
    const std::string magic = r.str(sizeof(kCheckpointMagic), "magic");
    require(std::memcmp(magic.data(), kCheckpointMagic, sizeof(kCheckpointMagic)) == 0, path,
            ": not a checkpoint file (bad magic)");
    const std::uint32_t version = r.u32("version");
    require(version == kCheckpointVersion, path, ": unsupported checkpoint version ", version);

    ParamSet params;
    while (r.pos < bytes.size()) {
        const std::uint32_t name_len = r.u32("name length");
        const std::string name = r.str(name_len, "name");
        const std::uint32_t rank = r.u32("rank");
        require(rank >= 1 && rank <= 2, path, ": tensor '", name, "' has rank ", rank);
        std::vector<std::size_t> shape;
        std::size_t numel = 1;
        for (std::uint32_t i = 0; i < rank; ++i) {
            const std::uint32_t dim = r.u32("dimension");
            shape.push_back(dim);
            numel *= dim;
        }
        std::vector<double> data(numel);
        for (std::size_t i = 0; i < numel; ++i) data[i] = r.f64("tensor data");
        params.insert(name, Tensor{std::move(shape), std::move(data)});
    }
    require(params.size() > 0, path, ": checkpoint holds no tensors");
    return params;
}

std::map<std::string, std::string> load_config(const std::string& path) {
    const auto lines = read_lines(path);
    std::map<std::string, std::string> config;
    for (std::size_t i = 0; i < lines.size(); ++i) {
        const std::string line = trim(lines[i]);
        if (line.empty() || line[0] == '#') continue;
        const std::size_t eq = line.find('=');
        require(eq != std::string::npos, loc(path, i + 1), ": expected 'key = value', got '",
                line, "'");
        const std::string key = trim(line.substr(0, eq));
        const std::string value = trim(line.substr(eq + 1));
        require(!key.empty(), loc(path, i + 1), ": empty key");
        require(!config.count(key), loc(path, i + 1), ": duplicate key '", key, "'");
        config.emplace(key, value);
    }
    return config;
}

} // namespace llfl
