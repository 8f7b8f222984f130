#include "stagedcausal/learning.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <unordered_map>

namespace stagedcausal {

namespace {

constexpr std::uint64_t kMaxClusterContexts = 4096;

/// Sum over levels of n_k log(n_k / n_total), with 0 log 0 = 0.
double ll_term(std::span<const std::uint64_t> counts) {
    std::uint64_t total = 0;
    for (auto c : counts) total += c;
    if (total == 0) return 0.0;
    double ll = 0.0;
    const double log_total = std::log(static_cast<double>(total));
    for (auto c : counts) {
        if (c > 0)
            ll += static_cast<double>(c) * (std::log(static_cast<double>(c)) - log_total);
    }
    return ll;
}

std::vector<std::uint64_t> add_counts(std::span<const std::uint64_t> a,
                                      std::span<const std::uint64_t> b) {
    std::vector<std::uint64_t> out(a.size());
    for (std::size_t k = 0; k < a.size(); ++k) out[k] = a[k] + b[k];
    return out;
}

/// Per variable: context rank -> raw level counts (alpha = 0).
std::vector<std::unordered_map<std::uint64_t, std::vector<std::uint64_t>>>
context_counts(const EventTree& tree, const Dataset& data) {
    const int p = tree.num_variables();
    std::vector<std::unordered_map<std::uint64_t, std::vector<std::uint64_t>>> counts(p);
    for (int i = 0; i < p; ++i) {
        const int arity = tree.variable(i).arity();
        for (std::uint64_t r : tree.context_ranks(i))
            counts[i].try_emplace(r, std::vector<std::uint64_t>(arity, 0));
    }
    for (const auto& row : data.rows()) {
        for (int i = 0; i < p; ++i) {
            const std::uint64_t rank = tree.rank_of(i, std::span<const int>(row.data(), i));
            counts[i].at(rank)[row[i]] += 1;
        }
    }
    return counts;
}

ScoredStaging score(const EventTree& tree, Staging staging, const Dataset& data,
                    std::vector<std::string> notes = {}) {
    if (data.size() == 0) throw DataError("cannot score on an empty dataset");
    ScoredStaging out;
    out.log_likelihood = log_likelihood(tree, staging, data);
    for (int i = 0; i < tree.num_variables(); ++i)
        out.n_free_params +=
            staging.num_stages(i) * static_cast<std::uint64_t>(tree.variable(i).arity() - 1);
    out.bic = out.log_likelihood - 0.5 * static_cast<double>(out.n_free_params) *
                                       std::log(static_cast<double>(data.size()));
    out.staging = std::move(staging);
    out.notes = std::move(notes);
    return out;
}

}  // namespace

double tv_distance(std::span<const double> p, std::span<const double> q) {
    if (p.size() != q.size()) throw ModelError("tv_distance: length mismatch");
    double s = 0.0;
    for (std::size_t k = 0; k < p.size(); ++k) s += std::abs(p[k] - q[k]);
    return 0.5 * s;
}

double log_likelihood(const EventTree& tree, const Staging& staging, const Dataset& data) {
    StagedTreeModel fitted = fit_mle(tree, staging, data, 0.0);
    double ll = 0.0;
    for (int i = 0; i < tree.num_variables(); ++i) {
        for (const auto& [stage, counts] : fitted.fit_metadata().counts[i])
            ll += ll_term(counts);
    }
    return ll;
}

ScoredStaging bic_score(const EventTree& tree, const Staging& staging, const Dataset& data) {
    return score(tree, staging, data);
}

ScoredStaging learn_bhc(const EventTree& tree, const Dataset& data,
                        const std::optional<Staging>& init) {
    if (data.size() == 0) throw DataError("cannot learn from an empty dataset");
    Staging staging = init ? *init : saturated_staging(tree);
    const int p = tree.num_variables();
    const double log_n = std::log(static_cast<double>(data.size()));

    // Pooled counts per stage, kept up to date as merges are applied.
    StagedTreeModel fitted = fit_mle(tree, staging, data, 0.0);
    auto counts = fitted.fit_metadata().counts;  // per var: stage -> counts

    while (true) {
        double best_delta = 0.0;
        int best_var = -1;
        std::string best_a, best_b;
        for (int i = 0; i < p; ++i) {
            const double param_gain = 0.5 * (tree.variable(i).arity() - 1) * log_n;
            const auto& stage_counts = counts[i];
            for (auto it_a = stage_counts.begin(); it_a != stage_counts.end(); ++it_a) {
                const double ll_a = ll_term(it_a->second);
                for (auto it_b = std::next(it_a); it_b != stage_counts.end(); ++it_b) {
                    const auto merged = add_counts(it_a->second, it_b->second);
                    const double delta =
                        ll_term(merged) - ll_a - ll_term(it_b->second) + param_gain;
                    if (delta > best_delta) {
                        best_delta = delta;
                        best_var = i;
                        best_a = it_a->first;
                        best_b = it_b->first;
                    }
                }
            }
        }
        if (best_var < 0) break;
        // Merge best_b into best_a (best_a sorts first within the variable).
        counts[best_var][best_a] =
            add_counts(counts[best_var][best_a], counts[best_var][best_b]);
        counts[best_var].erase(best_b);
        for (const auto& [rank, stage] : staging.contexts(best_var)) {
            if (stage == best_b) staging.assign(best_var, rank, best_a);
        }
    }
    return score(tree, std::move(staging), data);
}

ScoredStaging learn_hclust(const EventTree& tree, const Dataset& data) {
    if (data.size() == 0) throw DataError("cannot learn from an empty dataset");
    const int p = tree.num_variables();
    const double log_n = std::log(static_cast<double>(data.size()));
    auto counts = context_counts(tree, data);

    Staging staging(p);
    std::vector<std::string> notes;
    for (int i = 0; i < p; ++i) {
        const int arity = tree.variable(i).arity();
        std::vector<std::uint64_t> ranks = tree.context_ranks(i);
        const std::size_t m = ranks.size();
        if (m > kMaxClusterContexts)
            throw ModelError("variable '" + tree.variable(i).name +
                             "' has too many contexts for hierarchical clustering");

        // Empirical conditional distribution per context; zero-count
        // contexts get the uniform vector and a note.
        std::vector<std::vector<double>> dist(m, std::vector<double>(arity));
        std::vector<std::vector<std::uint64_t>> ccounts(m);
        for (std::size_t c = 0; c < m; ++c) {
            ccounts[c] = counts[i].at(ranks[c]);
            std::uint64_t total = std::accumulate(ccounts[c].begin(), ccounts[c].end(),
                                                  std::uint64_t{0});
            if (total == 0) {
                for (int k = 0; k < arity; ++k) dist[c][k] = 1.0 / arity;
                notes.push_back("zero-count context " + std::to_string(ranks[c]) +
                                " of variable '" + tree.variable(i).name +
                                "' clustered with a uniform placeholder");
            } else {
                for (int k = 0; k < arity; ++k)
                    dist[c][k] = static_cast<double>(ccounts[c][k]) / total;
            }
        }

        // UPGMA agglomeration; slot of a merged cluster is the smaller index.
        std::vector<std::vector<double>> d(m, std::vector<double>(m, 0.0));
        for (std::size_t a = 0; a < m; ++a)
            for (std::size_t b = a + 1; b < m; ++b)
                d[a][b] = d[b][a] = tv_distance(dist[a], dist[b]);
        std::vector<bool> active(m, true);
        std::vector<std::size_t> csize(m, 1);
        std::vector<std::vector<std::uint64_t>> pooled = ccounts;
        std::vector<std::pair<std::size_t, std::size_t>> merges;

        double ll = 0.0;
        for (std::size_t c = 0; c < m; ++c) ll += ll_term(ccounts[c]);
        double best_bic = ll - 0.5 * static_cast<double>(m) * (arity - 1) * log_n;
        std::size_t best_level = 0;  // number of merges applied

        for (std::size_t step = 0; step + 1 < m; ++step) {
            double dmin = std::numeric_limits<double>::infinity();
            std::size_t ma = 0, mb = 0;
            for (std::size_t a = 0; a < m; ++a) {
                if (!active[a]) continue;
                for (std::size_t b = a + 1; b < m; ++b) {
                    if (!active[b]) continue;
                    if (d[a][b] < dmin) {
                        dmin = d[a][b];
                        ma = a;
                        mb = b;
                    }
                }
            }
            // Lance-Williams update for average linkage.
            for (std::size_t c = 0; c < m; ++c) {
                if (!active[c] || c == ma || c == mb) continue;
                const double nd = (csize[ma] * d[ma][c] + csize[mb] * d[mb][c]) /
                                  static_cast<double>(csize[ma] + csize[mb]);
                d[ma][c] = d[c][ma] = nd;
            }
            ll += ll_term(add_counts(pooled[ma], pooled[mb])) - ll_term(pooled[ma]) -
                  ll_term(pooled[mb]);
            pooled[ma] = add_counts(pooled[ma], pooled[mb]);
            csize[ma] += csize[mb];
            active[mb] = false;
            merges.emplace_back(ma, mb);
            const std::size_t k = m - (step + 1);
            const double bic = ll - 0.5 * static_cast<double>(k) * (arity - 1) * log_n;
            if (bic >= best_bic) {  // prefer fewer stages on ties
                best_bic = bic;
                best_level = step + 1;
            }
        }

        // Replay merges up to the chosen level; union-find by slot.
        std::vector<std::size_t> parent(m);
        std::iota(parent.begin(), parent.end(), 0);
        auto find = [&](std::size_t x) {
            while (parent[x] != x) x = parent[x] = parent[parent[x]];
            return x;
        };
        for (std::size_t step = 0; step < best_level; ++step)
            parent[find(merges[step].second)] = find(merges[step].first);
        for (std::size_t c = 0; c < m; ++c)
            staging.assign(i, ranks[c],
                           "v" + std::to_string(i) + "_h" + std::to_string(find(c)));
    }
    return score(tree, std::move(staging), data, std::move(notes));
}

}  // namespace stagedcausal
