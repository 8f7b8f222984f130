#pragma once

#include <optional>
#include <span>
#include <string>
#include <vector>

#include "stagedcausal/model.hpp"

namespace stagedcausal {

/// Half the L1 distance between two probability vectors.
double tv_distance(std::span<const double> p, std::span<const double> q);

struct ScoredStaging {
    Staging staging;
    double log_likelihood = 0.0;
    std::uint64_t n_free_params = 0;  // d = sum over stages of (arity - 1)
    double bic = 0.0;                 // log_likelihood - (d/2) log N, maximized
    std::vector<std::string> notes;
};

/// Multinomial log-likelihood of the data under the MLE for the staging
/// (alpha = 0 counts, 0 log 0 = 0).
double log_likelihood(const EventTree& tree, const Staging& staging, const Dataset& data);

ScoredStaging bic_score(const EventTree& tree, const Staging& staging, const Dataset& data);

/// Backward hill climbing over within-variable stage merges, greedy on the
/// BIC increase. Stops when no merge improves the score.
ScoredStaging learn_bhc(const EventTree& tree, const Dataset& data,
                        const std::optional<Staging>& init = std::nullopt);

/// Per variable: average-linkage agglomeration of empirical conditional
/// distributions under TV distance, then the BIC-best dendrogram cut.
ScoredStaging learn_hclust(const EventTree& tree, const Dataset& data);

}  // namespace stagedcausal
