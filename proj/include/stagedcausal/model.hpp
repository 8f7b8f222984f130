#pragma once

#include <map>
#include <set>
#include <string>
#include <vector>

#include "stagedcausal/staging.hpp"
#include "stagedcausal/types.hpp"

namespace stagedcausal {

struct FitMetadata {
    std::uint64_t n = 0;
    double alpha = 0.0;
    /// Per variable: stage id -> raw level counts pooled over the stage.
    std::vector<std::map<std::string, std::vector<std::uint64_t>>> counts;
    /// Stages that had zero total count under alpha = 0 and were given a
    /// uniform placeholder vector.
    std::vector<std::set<std::string>> undefined_stages;
};

/// A fitted (or constructed) staged tree model: tree + staging + one
/// conditional probability vector per stage.
class StagedTreeModel {
public:
    using ParamMap = std::map<std::string, std::vector<double>>;

    StagedTreeModel(EventTree tree, Staging staging, std::vector<ParamMap> params,
                    FitMetadata meta = {});

    const EventTree& tree() const { return tree_; }
    const Staging& staging() const { return staging_; }
    const std::vector<ParamMap>& parameters() const { return params_; }
    const FitMetadata& fit_metadata() const { return meta_; }

    const std::vector<double>& stage_distribution(int var, const std::string& stage) const;
    const std::vector<double>& context_distribution(int var, std::uint64_t rank) const;

    bool stage_undefined(int var, const std::string& stage) const;
    bool has_undefined() const;
    std::vector<std::string> undefined_stage_ids() const;

    /// Checks probability vectors (length, range, sum to 1 within tol) and
    /// staging/parameter agreement; throws ModelError on violation.
    void validate(double tol = 1e-12) const;

private:
    EventTree tree_;
    Staging staging_;
    std::vector<ParamMap> params_;
    FitMetadata meta_;
};

StagedTreeModel fit_mle(const EventTree& tree, const Staging& staging, const Dataset& data,
                        double alpha = 0.0);

/// Restricts the tree to contexts with at least one supporting row.
EventTree prune_unobserved(const EventTree& tree, const Dataset& data);

}  // namespace stagedcausal
