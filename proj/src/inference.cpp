#include "stagedcausal/inference.hpp"

#include <algorithm>
#include <unordered_set>

#include "stagedcausal/rng.hpp"

namespace stagedcausal {

namespace {

std::uint64_t product_space_size(const EventTree& tree) {
    std::uint64_t n = 1;
    for (int i = 0; i < tree.num_variables(); ++i) {
        const auto a = static_cast<std::uint64_t>(tree.variable(i).arity());
        if (n > kEnumerationGuard / a + 1) return UINT64_MAX;
        n *= a;
    }
    return n;
}

void check_enumerable(const StagedTreeModel& model) {
    // Pruned trees are walked along retained paths only, so their cost is
    // bounded by the retained contexts; the guard applies to full trees.
    if (!model.tree().is_pruned() && product_space_size(model.tree()) > kEnumerationGuard)
        throw ModelError("product space too large for exact enumeration");
}

/// Depth-first walk over retained root-to-leaf paths with positive model
/// probability; calls fn(x, prob) for each.
template <typename Fn>
void walk_paths(const StagedTreeModel& model, std::vector<int>& x, int depth, double prob,
                Fn&& fn) {
    const EventTree& tree = model.tree();
    const int p = tree.num_variables();
    const std::uint64_t rank = tree.rank_of(depth, std::span<const int>(x.data(), depth));
    if (!tree.context_observed(depth, rank)) return;
    const auto& theta = model.context_distribution(depth, rank);
    for (int k = 0; k < tree.variable(depth).arity(); ++k) {
        if (theta[k] == 0.0) continue;
        x[depth] = k;
        const double q = prob * theta[k];
        if (depth + 1 == p)
            fn(std::span<const int>(x), q);
        else
            walk_paths(model, x, depth + 1, q, fn);
    }
}

template <typename Fn>
void for_each_path(const StagedTreeModel& model, Fn&& fn) {
    check_enumerable(model);
    std::vector<int> x(model.tree().num_variables(), 0);
    walk_paths(model, x, 0, 1.0, fn);
}

}  // namespace

std::size_t DistributionTable::index_of(std::span<const int> codes,
                                        const EventTree& tree) const {
    if (codes.size() != scope.size()) throw ModelError("assignment length mismatch");
    std::size_t idx = 0;
    for (std::size_t j = 0; j < scope.size(); ++j) {
        const int a = tree.variable(scope[j]).arity();
        if (codes[j] < 0 || codes[j] >= a) throw DataError("level code out of range");
        idx = idx * a + static_cast<std::size_t>(codes[j]);
    }
    return idx;
}

double DistributionTable::total() const {
    double s = 0.0;
    for (double p : probs) s += p;
    return s;
}

double joint_prob(const StagedTreeModel& model, std::span<const int> x) {
    const EventTree& tree = model.tree();
    const int p = tree.num_variables();
    if (static_cast<int>(x.size()) != p)
        throw DataError("outcome tuple has wrong length");
    double prob = 1.0;
    for (int i = 0; i < p; ++i) {
        const std::uint64_t rank = tree.rank_of(i, x.subspan(0, i));
        if (!tree.context_observed(i, rank)) return 0.0;  // pruned path
        prob *= model.context_distribution(i, rank).at(x[i]);
        if (prob == 0.0) return 0.0;
    }
    return prob;
}

DistributionTable marginal(const StagedTreeModel& model, std::vector<int> scope) {
    const EventTree& tree = model.tree();
    if (scope.empty()) throw ModelError("marginal scope must be nonempty");
    std::unordered_set<int> seen;
    for (int v : scope) {
        if (v < 0 || v >= tree.num_variables())
            throw ModelError("scope variable out of range");
        if (!seen.insert(v).second) throw ModelError("duplicate variable in scope");
    }
    std::size_t cells = 1;
    for (int v : scope) cells *= static_cast<std::size_t>(tree.variable(v).arity());
    DistributionTable table{std::move(scope), std::vector<double>(cells, 0.0)};

    std::vector<int> codes(table.scope.size());
    for_each_path(model, [&](std::span<const int> x, double p) {
        for (std::size_t j = 0; j < table.scope.size(); ++j) codes[j] = x[table.scope[j]];
        table.probs[table.index_of(codes, tree)] += p;
    });
    return table;
}

DistributionTable conditional(const StagedTreeModel& model, int target,
                              const std::map<int, int>& given) {
    const EventTree& tree = model.tree();
    if (target < 0 || target >= tree.num_variables())
        throw ModelError("target variable out of range");
    if (given.count(target)) throw ModelError("target cannot appear in the condition");
    for (const auto& [v, code] : given) {
        if (v < 0 || v >= tree.num_variables()) throw ModelError("condition variable out of range");
        if (code < 0 || code >= tree.variable(v).arity())
            throw DataError("condition level code out of range");
    }
    const int arity = tree.variable(target).arity();
    std::vector<double> num(arity, 0.0);
    double denom = 0.0;
    for_each_path(model, [&](std::span<const int> x, double p) {
        for (const auto& [v, code] : given)
            if (x[v] != code) return;
        denom += p;
        num[x[target]] += p;
    });
    if (denom <= 0.0) {
        std::string event;
        for (const auto& [v, code] : given) {
            if (!event.empty()) event += ", ";
            event += tree.variable(v).name + "=" + tree.variable(v).levels.at(code);
        }
        throw ModelError("conditioning event {" + event + "} has probability zero");
    }
    for (double& q : num) q /= denom;
    return DistributionTable{{target}, std::move(num)};
}

StagedTreeModel intervene(const StagedTreeModel& model, const InterventionSpec& spec) {
    const EventTree& tree = model.tree();
    const int p = tree.num_variables();
    for (const auto& [var, level] : spec.assignments) {
        if (var < 0 || var >= p) throw ModelError("intervention target out of range");
        if (level < 0 || level >= tree.variable(var).arity())
            throw DataError("intervention level out of range");
        if (tree.is_pruned() && var + 1 < p) {
            // The forced value must lead somewhere in the retained tree.
            bool supported = false;
            for (std::uint64_t r : tree.context_ranks(var + 1)) {
                if (tree.prefix_of(var + 1, r).back() == level) {
                    supported = true;
                    break;
                }
            }
            if (!supported)
                throw ModelError("intervention on '" + tree.variable(var).name +
                                 "' = '" + tree.variable(var).levels.at(level) +
                                 "' has empty support in the pruned tree");
        }
    }

    Staging staging = model.staging();
    auto params = model.parameters();
    FitMetadata meta = model.fit_metadata();
    for (const auto& [var, level] : spec.assignments) {
        const std::string stage = "v" + std::to_string(var) + "_do";
        for (std::uint64_t r : tree.context_ranks(var)) staging.assign(var, r, stage);
        StagedTreeModel::ParamMap fresh;
        std::vector<double> theta(tree.variable(var).arity(), 0.0);
        theta[level] = 1.0;
        fresh.emplace(stage, std::move(theta));
        params[var] = std::move(fresh);
        meta.counts[var].clear();
        meta.undefined_stages[var].clear();
    }
    return StagedTreeModel(tree, std::move(staging), std::move(params), std::move(meta));
}

Dataset sample(const StagedTreeModel& model, std::uint64_t n, std::uint64_t seed,
               bool allow_undefined) {
    if (n < 1) throw DataError("sample size must be >= 1");
    if (model.has_undefined() && !allow_undefined)
        throw ModelError("model has undefined stages; pass allow_undefined to sample anyway");
    const EventTree& tree = model.tree();
    const int p = tree.num_variables();
    std::mt19937_64 rng(seed);
    std::vector<std::vector<int>> rows;
    rows.reserve(n);
    for (std::uint64_t i = 0; i < n; ++i) {
        std::vector<int> row(p);
        for (int j = 0; j < p; ++j) {
            const std::uint64_t rank = tree.rank_of(j, std::span<const int>(row.data(), j));
            const auto& theta = model.context_distribution(j, rank);
            row[j] = categorical(rng, theta);
        }
        rows.push_back(std::move(row));
    }
    return Dataset(tree.variables(), std::move(rows));
}

}  // namespace stagedcausal
