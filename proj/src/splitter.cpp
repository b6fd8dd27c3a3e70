#include "llfl/splitter.hpp"

#include "llfl/error.hpp"
#include "llfl/kernels.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <set>

namespace llfl {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

} // namespace

Dendrogram agglomerate(const std::vector<double>& condensed, std::size_t n) {
    require(n >= 2, "agglomerate: need at least 2 points, got ", n);
    require(condensed.size() == n * (n - 1) / 2, "agglomerate: condensed matrix has ",
            condensed.size(), " entries, expected ", n * (n - 1) / 2);
    for (std::size_t i = 0; i < condensed.size(); ++i) {
        require(!std::isnan(condensed[i]), "agglomerate: NaN distance at condensed index ", i);
    }

    // Full working matrix indexed by slot; a merged cluster reuses the
    // lower slot, the other is retired.
    std::vector<double> D(n * n, 0.0);
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = i + 1; j < n; ++j) {
            const double d = condensed[condensed_index(i, j, n)];
            D[i * n + j] = d;
            D[j * n + i] = d;
        }
    }
    std::vector<std::size_t> cluster_id(n);
    std::iota(cluster_id.begin(), cluster_id.end(), std::size_t{0});
    std::vector<std::size_t> size(n, 1);
    std::vector<bool> active(n, true);

    Dendrogram out;
    out.n_leaves = n;
    out.merges.reserve(n - 1);
    double prev_height = -kInf;

    for (std::size_t step = 0; step < n - 1; ++step) {
        double best_d = kInf;
        std::size_t best_left = 0, best_right = 0;
        std::size_t slot_a = 0, slot_b = 0;
        bool found = false;
        for (std::size_t si = 0; si < n; ++si) {
            if (!active[si]) continue;
            for (std::size_t sj = si + 1; sj < n; ++sj) {
                if (!active[sj]) continue;
                const double d = D[si * n + sj];
                const std::size_t left = std::min(cluster_id[si], cluster_id[sj]);
                const std::size_t right = std::max(cluster_id[si], cluster_id[sj]);
                if (!found || d < best_d ||
                    (d == best_d &&
                     (left < best_left || (left == best_left && right < best_right)))) {
                    found = true;
                    best_d = d;
                    best_left = left;
                    best_right = right;
                    slot_a = si;
                    slot_b = sj;
                }
            }
        }
        // Single linkage cannot lower the merge height: the new cluster's
        // distances are minima of distances that were already >= best_d.
        require(best_d >= prev_height, "agglomerate: internal error, heights decreased");
        prev_height = best_d;

        out.merges.push_back({best_left, best_right, best_d, size[slot_a] + size[slot_b]});

        for (std::size_t sk = 0; sk < n; ++sk) {
            if (!active[sk] || sk == slot_a || sk == slot_b) continue;
            const double d = std::min(D[slot_a * n + sk], D[slot_b * n + sk]);
            D[slot_a * n + sk] = d;
            D[sk * n + slot_a] = d;
        }
        cluster_id[slot_a] = n + step;
        size[slot_a] += size[slot_b];
        active[slot_b] = false;
    }
    return out;
}

std::vector<int> cut_dendrogram(const Dendrogram& dendro, double threshold) {
    const std::size_t n = dendro.n_leaves;
    require(n >= 1, "cut_dendrogram: empty dendrogram");
    require(dendro.merges.size() == n - 1, "cut_dendrogram: expected ", n - 1, " merges, got ",
            dendro.merges.size());
    for (std::size_t t = 1; t < dendro.merges.size(); ++t) {
        require(dendro.merges[t].height >= dendro.merges[t - 1].height,
                "cut_dendrogram: merge heights decrease at step ", t);
    }

    // Heights are non-decreasing, so the kept merges form a prefix.
    std::size_t applied = 0;
    while (applied < dendro.merges.size() && dendro.merges[applied].height <= threshold) {
        ++applied;
    }

    std::vector<std::size_t> parent(n + applied);
    std::iota(parent.begin(), parent.end(), std::size_t{0});
    for (std::size_t t = 0; t < applied; ++t) {
        const Merge& m = dendro.merges[t];
        require(m.left < n + t && m.right < n + t && m.left < m.right,
                "cut_dendrogram: malformed merge at step ", t);
        parent[m.left] = n + t;
        parent[m.right] = n + t;
    }
    auto find_root = [&](std::size_t x) {
        while (parent[x] != x) x = parent[x];
        return x;
    };

    std::vector<int> labels(n, -1);
    std::unordered_map<std::size_t, int> label_of_root;
    int next = 0;
    for (std::size_t leaf = 0; leaf < n; ++leaf) {
        const std::size_t root = find_root(leaf);
        auto it = label_of_root.find(root);
        if (it == label_of_root.end()) {
            it = label_of_root.emplace(root, next++).first;
        }
        labels[leaf] = it->second;
    }
    return labels;
}

namespace {

// Fact groups (by position) -> tasks ordered by descending train count,
// stable on the incoming group order; ids inside each list sorted.
std::vector<Task> make_tasks(const Dataset& data,
                             const std::vector<std::vector<std::size_t>>& groups) {
    struct Draft {
        std::vector<std::int64_t> facts, train, test;
        std::size_t train_count = 0;
    };
    std::vector<Draft> drafts(groups.size());
    std::unordered_map<std::int64_t, std::size_t> group_of_fact;
    for (std::size_t g = 0; g < groups.size(); ++g) {
        for (auto pos : groups[g]) {
            const Fact& f = data.facts[pos];
            drafts[g].facts.push_back(f.id);
            group_of_fact[f.id] = g;
        }
    }
    for (const Example& e : data.examples) {
        Draft& d = drafts[group_of_fact.at(e.fact_id)];
        if (e.is_train) {
            d.train.push_back(e.id);
            ++d.train_count;
        } else {
            d.test.push_back(e.id);
        }
    }

    std::vector<std::size_t> order(groups.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        return drafts[a].train_count > drafts[b].train_count;
    });

    std::vector<Task> tasks;
    tasks.reserve(groups.size());
    for (std::size_t i = 0; i < order.size(); ++i) {
        Draft& d = drafts[order[i]];
        std::sort(d.facts.begin(), d.facts.end());
        std::sort(d.train.begin(), d.train.end());
        std::sort(d.test.begin(), d.test.end());
        Task t;
        t.index = static_cast<int>(i) + 1;
        t.fact_ids = std::move(d.facts);
        t.train_example_ids = std::move(d.train);
        t.test_example_ids = std::move(d.test);
        tasks.push_back(std::move(t));
    }
    return tasks;
}

std::vector<std::vector<std::size_t>> groups_from_labels(const std::vector<int>& labels) {
    int k = 0;
    for (int l : labels) k = std::max(k, l + 1);
    std::vector<std::vector<std::size_t>> groups(static_cast<std::size_t>(k));
    for (std::size_t i = 0; i < labels.size(); ++i) {
        groups[static_cast<std::size_t>(labels[i])].push_back(i);
    }
    return groups;
}

// Relabel so that cluster 0 holds the smallest member position, etc.
std::vector<int> canonicalize_labels(const std::vector<int>& labels) {
    std::unordered_map<int, int> remap;
    std::vector<int> out(labels.size());
    int next = 0;
    for (std::size_t i = 0; i < labels.size(); ++i) {
        auto it = remap.find(labels[i]);
        if (it == remap.end()) it = remap.emplace(labels[i], next++).first;
        out[i] = it->second;
    }
    return out;
}

double single_link_between(const std::vector<std::size_t>& a, const std::vector<std::size_t>& b,
                           const std::vector<double>& condensed, std::size_t n) {
    double best = kInf;
    for (auto i : a) {
        for (auto j : b) {
            const double d =
                condensed[condensed_index(std::min(i, j), std::max(i, j), n)];
            best = std::min(best, d);
        }
    }
    return best;
}

} // namespace

SemanticSplit semantic_split(const Dataset& data, const EmbeddingTable& table,
                             std::size_t n_tasks, std::uint64_t seed) {
    const std::size_t n = data.facts.size();
    require(n_tasks >= 2, "semantic_split: need at least 2 tasks, got ", n_tasks);
    require(n_tasks <= n, "semantic_split: ", n_tasks, " tasks but only ", n, " facts");

    std::vector<FactVector> vecs;
    vecs.reserve(n);
    for (const Fact& f : data.facts) vecs.push_back(embed_fact(table, f));
    const std::vector<double> condensed = pairwise_distances(vecs);

    SemanticSplit result;
    result.dendrogram = agglomerate(condensed, n);
    const auto& merges = result.dendrogram.merges;

    // Cutting at threshold t keeps merges with height <= t; the cluster
    // count is n minus that prefix length.  Counts are non-increasing in t,
    // so binary search over merge heights finds the best cut.
    auto count_at = [&](double t) {
        std::size_t applied = static_cast<std::size_t>(
            std::upper_bound(merges.begin(), merges.end(), t,
                             [](double v, const Merge& m) { return v < m.height; }) -
            merges.begin());
        return n - applied;
    };

    double threshold = -1.0;  // below every height: every fact its own task
    if (n_tasks < n) {
        // Largest height index whose cut still has >= n_tasks clusters.
        std::size_t lo = 0, hi = merges.size() - 1;
        if (count_at(merges[0].height) >= n_tasks) {
            while (lo < hi) {
                const std::size_t mid = (lo + hi + 1) / 2;
                if (count_at(merges[mid].height) >= n_tasks) {
                    lo = mid;
                } else {
                    hi = mid - 1;
                }
            }
            threshold = merges[lo].height;
        }
    }
    result.threshold = threshold;

    std::vector<int> labels = cut_dendrogram(result.dendrogram, threshold);
    auto groups = groups_from_labels(labels);

    // Height ties can overshoot the requested count; fold the smallest
    // cluster into its single-link nearest neighbor until it fits.
    while (groups.size() > n_tasks) {
        std::size_t smallest = 0;
        for (std::size_t g = 1; g < groups.size(); ++g) {
            if (groups[g].size() < groups[smallest].size()) smallest = g;
        }
        std::size_t nearest = smallest == 0 ? 1 : 0;
        double best = kInf;
        for (std::size_t g = 0; g < groups.size(); ++g) {
            if (g == smallest) continue;
            const double d = single_link_between(groups[smallest], groups[g], condensed, n);
            if (d < best) {
                best = d;
                nearest = g;
            }
        }
        for (auto pos : groups[smallest]) labels[pos] = static_cast<int>(nearest);
        labels = canonicalize_labels(labels);
        groups = groups_from_labels(labels);
    }

    result.cluster_of_fact = labels;
    result.benchmark.tasks = make_tasks(data, groups);
    result.benchmark.seed = seed;
    result.benchmark.split_type = "semantic";
    validate_benchmark(result.benchmark, data);
    return result;
}

Benchmark random_split(const Dataset& data, std::size_t n_tasks, std::size_t trials,
                       std::uint64_t seed) {
    const std::size_t n = data.facts.size();
    require(n_tasks >= 2, "random_split: need at least 2 tasks, got ", n_tasks);
    require(n_tasks <= n, "random_split: ", n_tasks, " tasks but only ", n, " facts");
    require(trials >= 1, "random_split: need at least 1 trial");

    const RngHub hub(seed);
    std::vector<std::vector<std::size_t>> best_groups;
    double best_ratio = kInf;

    for (std::size_t trial = 0; trial < trials; ++trial) {
        Rng rng = hub.stream("trials", trial);
        std::vector<std::size_t> perm(n);
        std::iota(perm.begin(), perm.end(), std::size_t{0});
        rng.shuffle(perm);

        // Near-equal fact counts: sizes differ by at most one.
        std::vector<std::vector<std::size_t>> groups(n_tasks);
        const std::size_t base = n / n_tasks;
        const std::size_t rem = n % n_tasks;
        std::size_t at = 0;
        for (std::size_t g = 0; g < n_tasks; ++g) {
            const std::size_t sz = base + (g < rem ? 1 : 0);
            for (std::size_t i = 0; i < sz; ++i) groups[g].push_back(perm[at++]);
        }

        std::size_t lo = SIZE_MAX, hi = 0;
        for (const auto& group : groups) {
            std::size_t cnt = 0;
            for (auto pos : group) cnt += data.train_count(data.facts[pos].id);
            lo = std::min(lo, cnt);
            hi = std::max(hi, cnt);
        }
        const double ratio =
            lo == 0 ? kInf : static_cast<double>(hi) / static_cast<double>(lo);
        if (best_groups.empty() || ratio < best_ratio) {
            best_ratio = ratio;
            best_groups = std::move(groups);
        }
    }

    Benchmark b;
    b.tasks = make_tasks(data, best_groups);
    b.seed = seed;
    b.split_type = "random";
    validate_benchmark(b, data);
    return b;
}

double task_similarity_w2v(const std::vector<const Fact*>& a, const std::vector<const Fact*>& b,
                           const EmbeddingTable& table) {
    require(!a.empty() && !b.empty(), "task_similarity_w2v: empty fact group");
    auto mean_vec = [&](const std::vector<const Fact*>& group) {
        std::vector<double> mean(3 * table.dim, 0.0);
        for (const Fact* f : group) {
            const FactVector v = embed_fact(table, *f);
            kernels::axpy(1.0, v.data.data(), mean.data(), mean.size());
        }
        kernels::scal(1.0 / static_cast<double>(group.size()), mean.data(), mean.size());
        return mean;
    };
    const auto ma = mean_vec(a);
    const auto mb = mean_vec(b);
    const double na = std::sqrt(kernels::sqnorm(ma.data(), ma.size()));
    const double nb = std::sqrt(kernels::sqnorm(mb.data(), mb.size()));
    require(na > 0.0 && nb > 0.0, "task_similarity_w2v: zero-norm mean vector");
    return kernels::dot(ma.data(), mb.data(), ma.size()) / (na * nb);
}

double task_overlap_spo(const std::vector<const Fact*>& a, const std::vector<const Fact*>& b) {
    require(!a.empty() && !b.empty(), "task_overlap_spo: empty fact group");
    auto slot_sets = [](const std::vector<const Fact*>& group) {
        std::array<std::set<std::string>, 3> sets;
        for (const Fact* f : group) {
            sets[0].insert(lowercase(f->subject));
            if (f->predicate) sets[1].insert(lowercase(*f->predicate));
            if (f->object) sets[2].insert(lowercase(*f->object));
        }
        return sets;
    };
    const auto sa = slot_sets(a);
    const auto sb = slot_sets(b);
    double product = 1.0;
    for (std::size_t slot = 0; slot < 3; ++slot) {
        std::size_t inter = 0;
        for (const auto& v : sa[slot]) inter += sb[slot].count(v);
        const std::size_t uni = sa[slot].size() + sb[slot].size() - inter;
        const double ratio =
            uni == 0 ? 0.0 : static_cast<double>(inter) / static_cast<double>(uni);
        product *= ratio;
    }
    return std::cbrt(product);
}

namespace {

std::vector<std::vector<const Fact*>> task_fact_groups(const Benchmark& b, const Dataset& data) {
    std::vector<std::vector<const Fact*>> groups;
    groups.reserve(b.tasks.size());
    for (const Task& t : b.tasks) {
        std::vector<const Fact*> g;
        g.reserve(t.fact_ids.size());
        for (auto id : t.fact_ids) g.push_back(&data.fact_by_id(id));
        groups.push_back(std::move(g));
    }
    return groups;
}

} // namespace

std::vector<std::vector<double>> similarity_matrix_w2v(const Benchmark& b, const Dataset& data,
                                                       const EmbeddingTable& table) {
    const auto groups = task_fact_groups(b, data);
    const std::size_t k = groups.size();
    std::vector<std::vector<double>> m(k, std::vector<double>(k, 0.0));
    for (std::size_t i = 0; i < k; ++i) {
        for (std::size_t j = i; j < k; ++j) {
            const double s = task_similarity_w2v(groups[i], groups[j], table);
            m[i][j] = s;
            m[j][i] = s;
        }
    }
    return m;
}

std::vector<std::vector<double>> similarity_matrix_spo(const Benchmark& b, const Dataset& data) {
    const auto groups = task_fact_groups(b, data);
    const std::size_t k = groups.size();
    std::vector<std::vector<double>> m(k, std::vector<double>(k, 0.0));
    for (std::size_t i = 0; i < k; ++i) {
        for (std::size_t j = i; j < k; ++j) {
            const double s = task_overlap_spo(groups[i], groups[j]);
            m[i][j] = s;
            m[j][i] = s;
        }
    }
    return m;
}

} // namespace llfl
