#include "llfl/fact.hpp"

#include "llfl/error.hpp"
#include "llfl/kernels.hpp"
#include "llfl/parallel.hpp"

#include <cctype>
#include <cmath>

namespace llfl {

FactType fact_type(const Fact& f) {
    if (f.object) return FactType::SPO;
    if (f.predicate) return FactType::SP;
    return FactType::S;
}

const char* fact_type_name(FactType t) {
    switch (t) {
        case FactType::S: return "S";
        case FactType::SP: return "SP";
        case FactType::SPO: return "SPO";
    }
    return "?";
}

std::string lowercase(std::string s) {
    for (auto& c : s) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
    return s;
}

std::vector<std::string> split_tokens(const std::string& phrase) {
    std::vector<std::string> out;
    std::string cur;
    for (char c : phrase) {
        if (std::isspace(static_cast<unsigned char>(c))) {
            if (!cur.empty()) {
                out.push_back(cur);
                cur.clear();
            }
        } else {
            cur.push_back(c);
        }
    }
    if (!cur.empty()) out.push_back(cur);
    return out;
}

std::vector<double> embed_phrase(const EmbeddingTable& table, const std::string& phrase) {
    require(table.dim > 0, "embed_phrase: embedding table is empty");
    const auto tokens = split_tokens(lowercase(phrase));
    require(!tokens.empty(), "embed_phrase: phrase '", phrase, "' has no tokens");

    std::vector<double> mean(table.dim, 0.0);
    std::string missing;
    for (const auto& tok : tokens) {
        auto it = table.vectors.find(tok);
        if (it == table.vectors.end()) {
            if (!missing.empty()) missing += ", ";
            missing += "'" + tok + "'";
            continue;
        }
        kernels::axpy(1.0, it->second.data(), mean.data(), table.dim);
    }
    require(missing.empty(), "embed_phrase: token(s) not in embedding table: ", missing);
    kernels::scal(1.0 / static_cast<double>(tokens.size()), mean.data(), table.dim);

    const double nrm = std::sqrt(kernels::sqnorm(mean.data(), table.dim));
    require(nrm > 0.0, "embed_phrase: phrase '", phrase, "' has zero-norm mean vector");
    kernels::scal(1.0 / nrm, mean.data(), table.dim);
    return mean;
}

FactVector embed_fact(const EmbeddingTable& table, const Fact& fact) {
    require(fact.predicate || !fact.object, "embed_fact: fact ", fact.id,
            " has an object but no predicate");
    FactVector v;
    v.d = table.dim;
    v.data.assign(3 * table.dim, 0.0);

    auto fill = [&](std::size_t slot, const std::string& phrase) {
        const auto e = embed_phrase(table, phrase);
        std::copy(e.begin(), e.end(), v.data.begin() + slot * table.dim);
        v.mask[slot] = true;
    };
    fill(0, fact.subject);
    if (fact.predicate) fill(1, *fact.predicate);
    if (fact.object) fill(2, *fact.object);
    validate_fact_vector(v);
    return v;
}

void validate_fact_vector(const FactVector& v) {
    require(v.d > 0, "FactVector: block width is zero");
    require(v.data.size() == 3 * v.d, "FactVector: expected ", 3 * v.d, " values, got ",
            v.data.size());
    require(v.mask[0], "FactVector: subject block must be defined");
    require(!(v.mask[2] && !v.mask[1]), "FactVector: object defined without predicate");
    for (std::size_t slot = 0; slot < 3; ++slot) {
        const double* blk = v.data.data() + slot * v.d;
        const double nrm = std::sqrt(kernels::sqnorm(blk, v.d));
        if (v.mask[slot]) {
            require(std::abs(nrm - 1.0) <= 1e-9, "FactVector: defined block ", slot,
                    " has norm ", nrm);
        } else {
            require(nrm == 0.0, "FactVector: undefined block ", slot, " is nonzero");
        }
    }
}

double fact_distance(const FactVector& a, const FactVector& b) {
    require(a.d == b.d, "fact_distance: block widths differ (", a.d, " vs ", b.d, ")");
    double total = 0.0;
    std::size_t shared = 0;
    for (std::size_t slot = 0; slot < 3; ++slot) {
        if (a.mask[slot] && b.mask[slot]) {
            total += kernels::sqdist(a.data.data() + slot * a.d, b.data.data() + slot * a.d, a.d);
            ++shared;
        }
    }
    if (shared == 0) return kNoSharedSlotDistance;
    return total / static_cast<double>(shared);
}

std::size_t condensed_index(std::size_t i, std::size_t j, std::size_t n) {
    require(i < j && j < n, "condensed_index: need i < j < n");
    return n * i - i * (i + 1) / 2 + (j - i - 1);
}

std::vector<double> pairwise_distances(const std::vector<FactVector>& vecs) {
    const std::size_t n = vecs.size();
    require(n >= 2, "pairwise_distances: need at least 2 vectors, got ", n);
    std::vector<double> out(n * (n - 1) / 2);
    // Each condensed entry is written exactly once, so chunked threads
    // cannot change the result.
    parallel_for(out.size(), [&](std::size_t begin, std::size_t end) {
        // Recover (i, j) from the first linear index, then walk forward.
        std::size_t i = 0;
        std::size_t row_start = 0;
        while (row_start + (n - 1 - i) <= begin) {
            row_start += n - 1 - i;
            ++i;
        }
        std::size_t j = i + 1 + (begin - row_start);
        for (std::size_t k = begin; k < end; ++k) {
            out[k] = fact_distance(vecs[i], vecs[j]);
            if (++j == n) {
                ++i;
                j = i + 1;
            }
        }
    });
    return out;
}

} // namespace llfl
