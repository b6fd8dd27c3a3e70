#include "llfl/embed.hpp"

#include "llfl/error.hpp"
#include "llfl/kernels.hpp"
#include "llfl/rng.hpp"
#include "testutil.hpp"

#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <set>
#include <vector>

using namespace llfl;

namespace {

testutil::Synthetic small_world() {
    testutil::SyntheticSpec spec;
    spec.clusters = 2;
    spec.facts_per_cluster = 5;
    spec.feature_dim = 8;
    spec.train_per_fact = 3;
    spec.test_per_fact = 1;
    spec.d = 4;
    spec.seed = 3;
    return testutil::make_synthetic(spec);
}

} // namespace

TEST_CASE("init_embed_params is reproducible and bounded by fan-in") {
    const ModelArch arch{6, 5, 3};
    Rng r1(50), r2(50);
    const ParamSet p1 = init_embed_params(arch, r1);
    const ParamSet p2 = init_embed_params(arch, r2);
    CHECK(p1.names() == std::vector<std::string>{"W1", "b1", "W2", "b2"});
    for (const auto& name : p1.names()) CHECK(p1.get(name).data == p2.get(name).data);

    const double w1_bound = 1.0 / std::sqrt(6.0);
    for (const double v : p1.get("W1").data) CHECK(std::fabs(v) <= w1_bound);
    const double w2_bound = 1.0 / std::sqrt(5.0);
    for (const double v : p1.get("W2").data) CHECK(std::fabs(v) <= w2_bound);
    for (const double v : p1.get("b1").data) CHECK(v == 0.0);
    for (const double v : p1.get("b2").data) CHECK(v == 0.0);
}

TEST_CASE("visual_embed emits unit blocks") {
    const ModelArch arch{8, 6, 4};
    Rng rng(51);
    const EmbedModel model{arch, init_embed_params(arch, rng)};
    std::vector<double> x(arch.feature_dim);
    for (double& v : x) v = rng.uniform(-1.0, 1.0);
    const auto e = visual_embed(model, x);
    REQUIRE(e.size() == 12);
    for (std::size_t s = 0; s < 3; ++s) {
        CHECK(kernels::sqnorm(e.data() + s * 4, 4) == doctest::Approx(1.0).epsilon(1e-9));
    }
    // Batch path gives the same rows.
    Tensor batch = Tensor::zeros({2, arch.feature_dim});
    std::copy(x.begin(), x.end(), batch.ptr());
    std::copy(x.begin(), x.end(), batch.ptr() + arch.feature_dim);
    const Tensor be = visual_embed_batch(model, batch);
    for (std::size_t i = 0; i < 12; ++i) {
        CHECK(be.data[i] == doctest::Approx(e[i]).epsilon(1e-12));
        CHECK(be.data[12 + i] == doctest::Approx(e[i]).epsilon(1e-12));
    }
}

TEST_CASE("score: mean cosine over the label's defined slots") {
    FactVector label;
    label.d = 2;
    label.mask = {true, true, false};
    label.data = {1, 0, 0, 1, 0, 0};

    // Visual: subject block aligned, predicate block orthogonal.
    const std::vector<double> visual = {1, 0, 1, 0, 5, 5};
    CHECK(score(visual, label) == doctest::Approx(0.5));  // (1 + 0) / 2

    // A zero visual block contributes a zero cosine, not NaN.
    const std::vector<double> zeroed = {1, 0, 0, 0, 0, 0};
    CHECK(score(zeroed, label) == doctest::Approx(0.5));

    FactVector none;
    none.d = 2;
    none.mask = {false, false, false};
    none.data.assign(6, 0.0);
    CHECK_THROWS_AS(score(visual, none), Error);
}

TEST_CASE("label bank rows reproduce score() through a plain dot product") {
    const testutil::Synthetic s = small_world();
    std::vector<std::int64_t> ids;
    for (const Fact& f : s.data.facts) ids.push_back(f.id);
    const LabelBank bank = build_label_bank(s.table, s.data, ids);
    REQUIRE(bank.size() == s.data.facts.size());
    CHECK(std::is_sorted(bank.fact_ids.begin(), bank.fact_ids.end()));

    const ModelArch arch{s.data.feature_dim, 6, s.table.dim};
    Rng rng(52);
    const EmbedModel model{arch, init_embed_params(arch, rng)};
    const std::vector<double>& x = s.data.examples[0].features;
    std::vector<double> e = visual_embed(model, x);
    std::vector<double> normed = e;
    normalize_blocks_exact(normed.data(), bank.d);
    for (std::size_t i = 0; i < bank.size(); ++i) {
        const double via_dot = kernels::dot(normed.data(), bank.row(i), 3 * bank.d);
        const double direct = score(e, bank.label_vectors[i]);
        CHECK(via_dot == doctest::Approx(direct).epsilon(1e-9));
    }
}

TEST_CASE("ranking batch draws negatives uniformly, never the gold label") {
    const testutil::Synthetic s = small_world();
    std::vector<std::int64_t> ids;
    for (const Fact& f : s.data.facts) ids.push_back(f.id);
    const LabelBank bank = build_label_bank(s.table, s.data, ids);

    std::vector<std::int64_t> train_ids;
    for (const Example& e : s.data.examples) {
        if (e.is_train) train_ids.push_back(e.id);
    }
    Rng rng(53);
    const std::size_t k_neg = 5;
    const RankingBatch batch = make_ranking_batch(s.data, bank, train_ids, k_neg, rng);
    CHECK(batch.rows == train_ids.size() * k_neg);
    CHECK(batch.x.rows() == batch.rows);
    CHECK(batch.pos.rows() == batch.rows);

    // Row r belongs to example r / k_neg; its negative must differ from the
    // gold row and be drawn from the bank.
    for (std::size_t r = 0; r < batch.rows; ++r) {
        const Example& ex = s.data.example_by_id(train_ids[r / k_neg]);
        const std::size_t gold = bank.index_of.at(ex.fact_id);
        const double* pos_row = batch.pos.ptr() + r * 3 * bank.d;
        const double* neg_row = batch.neg.ptr() + r * 3 * bank.d;
        CHECK(std::equal(pos_row, pos_row + 3 * bank.d, bank.row(gold)));
        CHECK(!std::equal(neg_row, neg_row + 3 * bank.d, bank.row(gold)));
    }
}

TEST_CASE("ranking loss equals the hand formula on a controlled setup") {
    // One example, one negative; engineer scores via a bank of two labels.
    const ModelArch arch{3, 4, 2};
    Rng rng(54);
    const EmbedModel model{arch, init_embed_params(arch, rng)};

    EmbeddingTable table;
    table.dim = 2;
    table.vectors["p"] = {1.0, 0.0};
    table.vectors["q"] = {0.0, 1.0};
    std::vector<Fact> facts = {{1, "p", std::nullopt, std::nullopt},
                               {2, "q", std::nullopt, std::nullopt}};
    std::vector<Example> examples = {{1, 1, true, {0.5, -0.25, 1.0}}};
    const Dataset data = Dataset::build(std::move(facts), std::move(examples));
    std::vector<std::int64_t> ids = {1, 2};
    const LabelBank bank = build_label_bank(table, data, ids);

    Rng neg_rng(1);  // only one possible negative: the other label
    const RankingBatch batch = make_ranking_batch(data, bank, {1}, 1, neg_rng);
    const double margin = 0.1;
    const double loss = ranking_loss_value(model, batch, margin);

    const auto e = visual_embed(model, data.examples[0].features);
    const double s_pos = score(e, bank.label_vectors[0]);
    const double s_neg = score(e, bank.label_vectors[1]);
    const double expected = std::max(0.0, margin - s_pos + s_neg);
    CHECK(loss == doctest::Approx(expected).epsilon(1e-9));
}

TEST_CASE("predict_topk sorts by score then ascending fact id and truncates") {
    const testutil::Synthetic s = small_world();
    std::vector<std::int64_t> ids;
    for (const Fact& f : s.data.facts) ids.push_back(f.id);
    const LabelBank bank = build_label_bank(s.table, s.data, ids);
    const ModelArch arch{s.data.feature_dim, 6, s.table.dim};
    Rng rng(55);
    const EmbedModel model{arch, init_embed_params(arch, rng)};

    std::vector<std::size_t> all(bank.size());
    for (std::size_t i = 0; i < all.size(); ++i) all[i] = i;
    const ScoredCandidates top = predict_topk(model, s.data.examples[0].features, bank, all, 4);
    REQUIRE(top.fact_ids.size() == 4);
    for (std::size_t i = 1; i < top.scores.size(); ++i) {
        const bool ordered = top.scores[i - 1] > top.scores[i] ||
                             (top.scores[i - 1] == top.scores[i] &&
                              top.fact_ids[i - 1] < top.fact_ids[i]);
        CHECK(ordered);
    }
    // K larger than the candidate set returns everything.
    const ScoredCandidates all_of_them =
        predict_topk(model, s.data.examples[0].features, bank, all, 100);
    CHECK(all_of_them.fact_ids.size() == bank.size());
}
