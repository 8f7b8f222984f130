#pragma once

#include <optional>
#include <span>
#include <string>
#include <vector>

#include "stagedcausal/inference.hpp"
#include "stagedcausal/model.hpp"

namespace stagedcausal {

/// Binary treatment / binary outcome frame over a causal variable order:
/// covariates are every variable preceding the treatment, the outcome must
/// be the last variable.
struct CausalFrame {
    int treatment = 0;
    int outcome = 0;
    int treated_level = 1;
    int positive_outcome_level = 1;

    int control_level() const { return treated_level == 0 ? 1 : 0; }
    int negative_outcome_level() const { return positive_outcome_level == 0 ? 1 : 0; }
    void validate(const EventTree& tree) const;
};

struct StratumEffect {
    std::string id;
    double weight = 0.0;  // renormalized over included strata; 0 when excluded
    double effect = 0.0;
    std::uint64_t n_treated = 0;
    std::uint64_t n_control = 0;
    bool excluded = false;
};

struct AteEstimate {
    double ate = 0.0;
    std::vector<StratumEffect> per_stratum;
    std::optional<double> ci_lower;
    std::optional<double> ci_upper;
    double ci_level = 0.0;
    int n_bootstrap = 0;
    std::vector<double> replicates;
    std::vector<std::string> diagnostics;
    bool flagged = false;
};

/// Merges every treatment context into one stage with an exogenous
/// assignment distribution (default Bernoulli(0.5) over the levels).
StagedTreeModel randomize_treatment(const StagedTreeModel& model, const CausalFrame& frame,
                                    std::optional<std::vector<double>> assignment = std::nullopt);

/// ATE on the randomized tree by exact enumeration; equals standardization
/// over the covariate distribution.
AteEstimate ate_randomized(const StagedTreeModel& model, const CausalFrame& frame);

/// Regenerates the outcome staging from the treatment stages: two outcome
/// contexts share a stage iff their parents share a treatment stage and the
/// observed treatment value coincides. Outcome parameters are refit.
StagedTreeModel ps_stratify(const StagedTreeModel& model, const CausalFrame& frame,
                            const Dataset& data);

AteEstimate ate_ps_stratified(const StagedTreeModel& ps_model, const Dataset& data,
                              const CausalFrame& frame);

/// P(Y=y+ | R=treated, Z=z) - P(Y=y+ | R=control, Z=z) for a full covariate
/// assignment z.
double cate(const StagedTreeModel& model, const CausalFrame& frame, std::span<const int> z);

struct BootstrapConfig {
    enum class Learner { Bhc, Hclust };
    enum class Estimator { Randomized, PsStratified };
    Learner learner = Learner::Hclust;
    Estimator estimator = Estimator::Randomized;
    int n_replicates = 200;
    std::uint64_t seed = 1;
    double ci_level = 0.95;
    double alpha = 0.0;
};

/// Nonparametric bootstrap: per replicate resample rows, learn the staging,
/// fit, transform, estimate. Reports the replicate mean and percentile CI.
AteEstimate bootstrap_ate(const Dataset& data, const CausalFrame& frame,
                          const BootstrapConfig& config);

struct PositivityEntry {
    enum class Flag { Ok, OneSidedTreated, OneSidedControl, Unobserved };
    std::string label;  // covariate context or treatment stage
    std::uint64_t n_treated = 0;
    std::uint64_t n_control = 0;
    Flag flag = Flag::Ok;
};

struct PositivityReport {
    std::vector<PositivityEntry> contexts;
    std::vector<PositivityEntry> strata;  // present when a staging is supplied
    bool any_flagged = false;
};

PositivityReport positivity_report(const Dataset& data, const CausalFrame& frame,
                                   const std::optional<Staging>& staging = std::nullopt);

/// Complete stratification over the covariate contexts, from raw counts.
AteEstimate baseline_full_stratification(const Dataset& data, const CausalFrame& frame);

/// Logistic outcome regression (main effects of treatment and covariates),
/// standardized over the empirical covariate distribution.
AteEstimate baseline_outcome_regression(const Dataset& data, const CausalFrame& frame);

/// Hajek-normalized inverse probability weighting with a main-effects
/// logistic propensity; propensities clipped to [0.01, 0.99].
AteEstimate baseline_ipw(const Dataset& data, const CausalFrame& frame);

struct AipwOptions {
    bool constant_propensity = false;
    bool constant_outcome = false;
};

AteEstimate baseline_aipw(const Dataset& data, const CausalFrame& frame,
                          const AipwOptions& options = {});

}  // namespace stagedcausal
