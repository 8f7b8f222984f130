#include "stagedcausal/model.hpp"

#include <cmath>
#include <unordered_set>

namespace stagedcausal {

StagedTreeModel::StagedTreeModel(EventTree tree, Staging staging,
                                 std::vector<ParamMap> params, FitMetadata meta)
    : tree_(std::move(tree)),
      staging_(std::move(staging)),
      params_(std::move(params)),
      meta_(std::move(meta)) {
    if (static_cast<int>(params_.size()) != tree_.num_variables())
        throw ModelError("parameter maps must cover every variable");
    if (meta_.undefined_stages.empty())
        meta_.undefined_stages.resize(tree_.num_variables());
    if (meta_.counts.empty()) meta_.counts.resize(tree_.num_variables());
}

const std::vector<double>& StagedTreeModel::stage_distribution(
    int var, const std::string& stage) const {
    auto it = params_.at(var).find(stage);
    if (it == params_.at(var).end())
        throw ModelError("no parameters for stage '" + stage + "' of variable " +
                         std::to_string(var));
    return it->second;
}

const std::vector<double>& StagedTreeModel::context_distribution(
    int var, std::uint64_t rank) const {
    return stage_distribution(var, staging_.stage_of(var, rank));
}

bool StagedTreeModel::stage_undefined(int var, const std::string& stage) const {
    return meta_.undefined_stages.at(var).count(stage) > 0;
}

bool StagedTreeModel::has_undefined() const {
    for (const auto& s : meta_.undefined_stages)
        if (!s.empty()) return true;
    return false;
}

std::vector<std::string> StagedTreeModel::undefined_stage_ids() const {
    std::vector<std::string> out;
    for (const auto& s : meta_.undefined_stages) out.insert(out.end(), s.begin(), s.end());
    return out;
}

void StagedTreeModel::validate(double tol) const {
    auto issues = validate_staging(tree_, staging_);
    for (const auto& issue : issues) {
        if (issue.kind != StagingIssue::Kind::CrossVariableStage)
            throw ModelError("invalid staging: " + issue.detail);
    }
    for (int i = 0; i < tree_.num_variables(); ++i) {
        const int arity = tree_.variable(i).arity();
        std::unordered_set<std::string> needed;
        for (const auto& [rank, stage] : staging_.contexts(i)) needed.insert(stage);
        for (const auto& stage : needed) {
            const auto& theta = stage_distribution(i, stage);
            if (static_cast<int>(theta.size()) != arity)
                throw ModelError("stage '" + stage + "' has wrong vector length");
            double sum = 0.0;
            for (double t : theta) {
                if (t < 0.0 || t > 1.0 || !std::isfinite(t))
                    throw ModelError("stage '" + stage + "' has entry outside [0,1]");
                sum += t;
            }
            if (std::abs(sum - 1.0) > tol)
                throw ModelError("stage '" + stage + "' probabilities sum to " +
                                 std::to_string(sum));
        }
    }
}

StagedTreeModel fit_mle(const EventTree& tree, const Staging& staging, const Dataset& data,
                        double alpha) {
    if (!data.schema_matches(tree)) throw DataError("data schema does not match tree");
    if (alpha < 0.0) throw DataError("smoothing constant must be >= 0");
    {
        auto issues = validate_staging(tree, staging);
        for (const auto& issue : issues) {
            if (issue.kind != StagingIssue::Kind::CrossVariableStage)
                throw ModelError("invalid staging: " + issue.detail);
        }
    }
    const int p = tree.num_variables();

    FitMetadata meta;
    meta.n = data.size();
    meta.alpha = alpha;
    meta.counts.resize(p);
    meta.undefined_stages.resize(p);

    for (int i = 0; i < p; ++i) {
        const int arity = tree.variable(i).arity();
        for (const auto& [rank, stage] : staging.contexts(i))
            meta.counts[i].try_emplace(stage, std::vector<std::uint64_t>(arity, 0));
    }
    for (const auto& row : data.rows()) {
        for (int i = 0; i < p; ++i) {
            const std::uint64_t rank =
                tree.rank_of(i, std::span<const int>(row.data(), i));
            meta.counts[i].at(staging.stage_of(i, rank))[row[i]] += 1;
        }
    }

    std::vector<StagedTreeModel::ParamMap> params(p);
    for (int i = 0; i < p; ++i) {
        const int arity = tree.variable(i).arity();
        for (const auto& [stage, counts] : meta.counts[i]) {
            std::uint64_t total = 0;
            for (auto c : counts) total += c;
            std::vector<double> theta(arity);
            if (total == 0 && alpha == 0.0) {
                for (int k = 0; k < arity; ++k) theta[k] = 1.0 / arity;
                meta.undefined_stages[i].insert(stage);
            } else {
                const double denom = static_cast<double>(total) + alpha * arity;
                for (int k = 0; k < arity; ++k)
                    theta[k] = (static_cast<double>(counts[k]) + alpha) / denom;
            }
            params[i].emplace(stage, std::move(theta));
        }
    }
    return StagedTreeModel(tree, staging, std::move(params), std::move(meta));
}

EventTree prune_unobserved(const EventTree& tree, const Dataset& data) {
    if (!data.schema_matches(tree)) throw DataError("data schema does not match tree");
    if (data.size() == 0) throw DataError("cannot prune from an empty dataset");
    const int p = tree.num_variables();
    std::vector<std::unordered_set<std::uint64_t>> observed(p);
    for (const auto& row : data.rows()) {
        for (int i = 0; i < p; ++i)
            observed[i].insert(tree.rank_of(i, std::span<const int>(row.data(), i)));
    }
    return tree.with_observed(std::move(observed));
}

}  // namespace stagedcausal
