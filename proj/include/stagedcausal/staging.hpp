#pragma once

#include <map>
#include <string>
#include <vector>

#include "stagedcausal/types.hpp"

namespace stagedcausal {

/// Per-variable partition of contexts into stages. Stage ids are scoped per
/// variable; the builders in this library prefix ids with the variable index
/// so ids are also globally unique.
class Staging {
public:
    using StageMap = std::map<std::uint64_t, std::string>;  // context rank -> stage id

    Staging() = default;
    explicit Staging(int num_variables) : maps_(num_variables) {}

    int num_variables() const { return static_cast<int>(maps_.size()); }
    void assign(int var, std::uint64_t rank, std::string stage);
    const std::string& stage_of(int var, std::uint64_t rank) const;
    bool has_context(int var, std::uint64_t rank) const;
    const StageMap& contexts(int var) const { return maps_.at(var); }

    /// Stage id -> member context ranks (ascending), for one variable.
    std::map<std::string, std::vector<std::uint64_t>> groups(int var) const;
    std::uint64_t num_stages(int var) const;
    std::uint64_t num_stages() const;

    bool operator==(const Staging&) const = default;

private:
    std::vector<StageMap> maps_;
};

Staging saturated_staging(const EventTree& tree);
Staging independence_staging(const EventTree& tree);

struct StagingIssue {
    enum class Kind { MissingContext, UnknownContext, CrossVariableStage };
    Kind kind;
    int variable = 0;
    std::string detail;
};

std::vector<StagingIssue> validate_staging(const EventTree& tree, const Staging& staging);

}  // namespace stagedcausal
