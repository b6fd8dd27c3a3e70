#include "llfl/fact.hpp"

#include "llfl/error.hpp"
#include "llfl/kernels.hpp"
#include "llfl/rng.hpp"

#include <doctest.h>

#include <cmath>
#include <string>
#include <vector>

using namespace llfl;

namespace {

EmbeddingTable tiny_table() {
    EmbeddingTable t;
    t.dim = 3;
    t.vectors["person"] = {1.0, 0.0, 0.0};
    t.vectors["jumping"] = {0.0, 1.0, 0.0};
    t.vectors["horse"] = {0.0, 0.0, 1.0};
    t.vectors["tall"] = {0.6, 0.8, 0.0};
    t.vectors["very"] = {0.0, 0.6, 0.8};
    return t;
}

FactVector random_fact_vector(std::size_t d, Rng& rng) {
    FactVector v;
    v.d = d;
    v.data.assign(3 * d, 0.0);
    v.mask[0] = true;  // subject always defined
    v.mask[1] = rng.below(2) == 1;
    v.mask[2] = v.mask[1] && rng.below(2) == 1;
    for (std::size_t s = 0; s < 3; ++s) {
        if (!v.mask[s]) continue;
        double norm = 0.0;
        while (norm == 0.0) {
            for (std::size_t i = 0; i < d; ++i) v.data[s * d + i] = rng.normal();
            norm = std::sqrt(kernels::sqnorm(v.data.data() + s * d, d));
        }
        kernels::scal(1.0 / norm, v.data.data() + s * d, d);
    }
    return v;
}

} // namespace

TEST_CASE("fact_type follows the defined slots") {
    CHECK(fact_type({1, "person", std::nullopt, std::nullopt}) == FactType::S);
    CHECK(fact_type({1, "person", "jumping", std::nullopt}) == FactType::SP);
    CHECK(fact_type({1, "person", "riding", "horse"}) == FactType::SPO);
    CHECK(std::string(fact_type_name(FactType::SP)) == "SP");
}

TEST_CASE("embed_phrase averages tokens and renormalizes") {
    const EmbeddingTable t = tiny_table();
    const auto v = embed_phrase(t, "person");
    CHECK(v == std::vector<double>{1.0, 0.0, 0.0});

    // Mean of (1,0,0) and (0,1,0) is (.5,.5,0); normalized to 1/sqrt(2) each.
    const auto m = embed_phrase(t, "Person Jumping");
    CHECK(m[0] == doctest::Approx(1.0 / std::sqrt(2.0)));
    CHECK(m[1] == doctest::Approx(1.0 / std::sqrt(2.0)));
    CHECK(m[2] == doctest::Approx(0.0));
    CHECK(kernels::sqnorm(m.data(), 3) == doctest::Approx(1.0));
}

TEST_CASE("embed_phrase lists every missing token in one error") {
    const EmbeddingTable t = tiny_table();
    CHECK_THROWS_WITH_AS(static_cast<void>(embed_phrase(t, "blue wild horse")),
                         doctest::Contains("blue"), Error);
    try {
        static_cast<void>(embed_phrase(t, "blue wild horse"));
    } catch (const Error& e) {
        const std::string msg = e.what();
        CHECK(msg.find("blue") != std::string::npos);
        CHECK(msg.find("wild") != std::string::npos);
        CHECK(msg.find("horse") == std::string::npos);
    }
    CHECK_THROWS_AS(static_cast<void>(embed_phrase(t, "   ")), Error);
}

TEST_CASE("embed_fact fills masks and zero blocks") {
    const EmbeddingTable t = tiny_table();
    const FactVector v = embed_fact(t, {7, "person", "jumping", std::nullopt});
    CHECK(v.d == 3);
    CHECK(v.mask == std::array<bool, 3>{true, true, false});
    CHECK(v.data[0] == 1.0);
    CHECK(v.data[4] == 1.0);
    for (std::size_t i = 6; i < 9; ++i) CHECK(v.data[i] == 0.0);
    validate_fact_vector(v);

    FactVector bad = v;
    bad.data[6] = 0.5;  // undefined slot must stay zero
    CHECK_THROWS_AS(validate_fact_vector(bad), Error);
    FactVector off = v;
    off.data[0] = 1.5;  // defined slot must be unit norm
    CHECK_THROWS_AS(validate_fact_vector(off), Error);
}

TEST_CASE("distance ignores slots undefined on either side") {
    const EmbeddingTable t = tiny_table();
    // The worked case: adding a predicate to a bare subject keeps D = 0.
    const FactVector a = embed_fact(t, {1, "person", std::nullopt, std::nullopt});
    const FactVector b = embed_fact(t, {2, "person", "jumping", std::nullopt});
    CHECK(fact_distance(a, b) == 0.0);

    // Perturbing a masked block never changes the distance.
    Rng rng(21);
    for (int i = 0; i < 200; ++i) {
        const FactVector u = random_fact_vector(4, rng);
        FactVector w = random_fact_vector(4, rng);
        const double base = fact_distance(u, w);
        for (std::size_t s = 0; s < 3; ++s) {
            if (u.mask[s] && w.mask[s]) continue;
            FactVector w2 = w;
            for (std::size_t k = 0; k < 4; ++k) w2.data[s * 4 + k] = rng.normal();
            w2.mask[s] = w.mask[s];
            CHECK(fact_distance(u, w2) == base);
        }
    }
}

TEST_CASE("distance axioms on random unit-block pairs") {
    Rng rng(22);
    for (int i = 0; i < 1000; ++i) {
        const FactVector a = random_fact_vector(5, rng);
        const FactVector b = random_fact_vector(5, rng);
        const double d_ab = fact_distance(a, b);
        CHECK(d_ab == fact_distance(b, a));
        CHECK(d_ab >= 0.0);
        CHECK(d_ab <= 4.0);
        CHECK(fact_distance(a, a) == 0.0);
    }
}

TEST_CASE("no shared defined slot yields the maximum distance") {
    FactVector a, b;
    a.d = b.d = 2;
    a.data.assign(6, 0.0);
    b.data.assign(6, 0.0);
    a.mask = {true, false, false};
    a.data[0] = 1.0;
    b.mask = {false, true, false};
    b.data[2] = 1.0;
    CHECK(fact_distance(a, b) == kNoSharedSlotDistance);
}

TEST_CASE("mean over shared slots uses only mutually defined blocks") {
    FactVector a, b;
    a.d = b.d = 2;
    a.data = {1, 0, 0, 1, 0, 0};
    b.data = {0, 1, 0, 1, 1, 0};
    a.mask = {true, true, false};
    b.mask = {true, true, true};
    // Subject blocks are orthogonal units (sqdist 2), predicates equal (0);
    // the object slot is masked out by a.  Mean over 2 shared slots = 1.
    CHECK(fact_distance(a, b) == doctest::Approx(1.0));
}

TEST_CASE("pairwise_distances matches direct per-pair calls") {
    const EmbeddingTable t = tiny_table();
    std::vector<FactVector> vs = {
        embed_fact(t, {1, "person", std::nullopt, std::nullopt}),
        embed_fact(t, {2, "person", "jumping", std::nullopt}),
        embed_fact(t, {3, "horse", "very tall", "person"}),
        embed_fact(t, {4, "tall", std::nullopt, std::nullopt}),
    };
    const auto condensed = pairwise_distances(vs);
    REQUIRE(condensed.size() == 6);
    for (std::size_t i = 0; i < vs.size(); ++i) {
        for (std::size_t j = i + 1; j < vs.size(); ++j) {
            CHECK(condensed[condensed_index(i, j, vs.size())] ==
                  fact_distance(vs[i], vs[j]));
        }
    }
}
