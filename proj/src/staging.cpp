#include "stagedcausal/staging.hpp"

#include <unordered_map>
#include <unordered_set>

namespace stagedcausal {

void Staging::assign(int var, std::uint64_t rank, std::string stage) {
    maps_.at(var)[rank] = std::move(stage);
}

const std::string& Staging::stage_of(int var, std::uint64_t rank) const {
    auto it = maps_.at(var).find(rank);
    if (it == maps_.at(var).end())
        throw ModelError("no stage assigned to context " + std::to_string(rank) +
                         " of variable " + std::to_string(var));
    return it->second;
}

bool Staging::has_context(int var, std::uint64_t rank) const {
    return maps_.at(var).count(rank) > 0;
}

std::map<std::string, std::vector<std::uint64_t>> Staging::groups(int var) const {
    std::map<std::string, std::vector<std::uint64_t>> g;
    for (const auto& [rank, stage] : maps_.at(var)) g[stage].push_back(rank);
    return g;
}

std::uint64_t Staging::num_stages(int var) const {
    std::unordered_set<std::string> ids;
    for (const auto& [rank, stage] : maps_.at(var)) ids.insert(stage);
    return ids.size();
}

std::uint64_t Staging::num_stages() const {
    std::uint64_t total = 0;
    for (int i = 0; i < num_variables(); ++i) total += num_stages(i);
    return total;
}

Staging saturated_staging(const EventTree& tree) {
    Staging s(tree.num_variables());
    for (int i = 0; i < tree.num_variables(); ++i) {
        for (std::uint64_t r : tree.context_ranks(i))
            s.assign(i, r, "v" + std::to_string(i) + "_c" + std::to_string(r));
    }
    return s;
}

Staging independence_staging(const EventTree& tree) {
    Staging s(tree.num_variables());
    for (int i = 0; i < tree.num_variables(); ++i) {
        for (std::uint64_t r : tree.context_ranks(i))
            s.assign(i, r, "v" + std::to_string(i) + "_all");
    }
    return s;
}

std::vector<StagingIssue> validate_staging(const EventTree& tree, const Staging& staging) {
    std::vector<StagingIssue> issues;
    if (staging.num_variables() != tree.num_variables()) {
        issues.push_back({StagingIssue::Kind::MissingContext, 0,
                          "staging covers " + std::to_string(staging.num_variables()) +
                              " variables, tree has " + std::to_string(tree.num_variables())});
        return issues;
    }
    std::unordered_map<std::string, int> stage_owner;
    std::unordered_set<std::string> reported;
    for (int i = 0; i < tree.num_variables(); ++i) {
        for (std::uint64_t r : tree.context_ranks(i)) {
            if (!staging.has_context(i, r))
                issues.push_back({StagingIssue::Kind::MissingContext, i,
                                  "context " + std::to_string(r) + " of variable '" +
                                      tree.variable(i).name + "' has no stage"});
        }
        for (const auto& [rank, stage] : staging.contexts(i)) {
            if (!tree.context_observed(i, rank))
                issues.push_back({StagingIssue::Kind::UnknownContext, i,
                                  "context " + std::to_string(rank) +
                                      " is not part of the tree for variable '" +
                                      tree.variable(i).name + "'"});
            auto [it, inserted] = stage_owner.emplace(stage, i);
            if (!inserted && it->second != i && !reported.count(stage + "#" + std::to_string(i)))
            {
                reported.insert(stage + "#" + std::to_string(i));
                issues.push_back({StagingIssue::Kind::CrossVariableStage, i,
                                  "stage id '" + stage + "' used by variables " +
                                      std::to_string(it->second) + " and " + std::to_string(i)});
            }
        }
    }
    return issues;
}

}  // namespace stagedcausal
