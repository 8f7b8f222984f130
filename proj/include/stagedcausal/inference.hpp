#pragma once

#include <map>
#include <span>
#include <vector>

#include "stagedcausal/model.hpp"

namespace stagedcausal {

/// Exact enumeration is refused beyond this many cells.
inline constexpr std::uint64_t kEnumerationGuard = 1ULL << 24;

struct InterventionSpec {
    /// variable index -> forced level code
    std::map<int, int> assignments;
};

/// Dense probability table over the product space of `scope`, stored in
/// lexicographic (row-major) order of the scope's level codes.
struct DistributionTable {
    std::vector<int> scope;
    std::vector<double> probs;

    std::size_t index_of(std::span<const int> codes, const EventTree& tree) const;
    double total() const;
};

double joint_prob(const StagedTreeModel& model, std::span<const int> x);

DistributionTable marginal(const StagedTreeModel& model, std::vector<int> scope);

/// P(target | given); `given` maps variable index -> level code.
DistributionTable conditional(const StagedTreeModel& model, int target,
                              const std::map<int, int>& given);

/// Structural do-intervention: each intervened variable gets a single stage
/// carrying a point mass at its forced level.
StagedTreeModel intervene(const StagedTreeModel& model, const InterventionSpec& spec);

Dataset sample(const StagedTreeModel& model, std::uint64_t n, std::uint64_t seed,
               bool allow_undefined = false);

}  // namespace stagedcausal
