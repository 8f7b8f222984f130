#pragma once

#include <iosfwd>
#include <string>
#include <vector>

#include "stagedcausal/causal.hpp"
#include "stagedcausal/model.hpp"

namespace stagedcausal {

enum class ParamDist { Exp, Unif };
enum class GeneratorKind { Sevt, Dag };

struct SimConfig {
    int p = 8;  // total binary variables: p-2 covariates + treatment + outcome
    GeneratorKind generator = GeneratorKind::Sevt;
    std::vector<double> join_probs{0.0, 0.5, 0.8};
    double dag_edge_prob = 0.3;
    std::vector<ParamDist> param_dists{ParamDist::Exp, ParamDist::Unif};
    std::vector<std::uint64_t> sample_sizes{100, 500, 1000, 10000};
    int repetitions = 20;
    std::uint64_t seed = 1;
    std::vector<std::string> estimators{"bhc",    "hclust", "full", "oracle",
                                        "q.model", "ipw",    "aipw"};
};

/// Random staged tree over p binary variables: contexts visited in canonical
/// order join a uniformly chosen existing stage with probability join_prob,
/// else open a new one. Stage vectors are drawn i.i.d. per entry from the
/// given distribution and normalized.
StagedTreeModel random_staged_tree(int p, double join_prob, ParamDist dist,
                                   std::uint64_t seed);

/// Staged tree induced by a random DAG over the fixed order: contexts of a
/// variable share a stage iff they agree on the variable's parents.
StagedTreeModel random_dag_model(int p, double edge_prob, ParamDist dist,
                                 std::uint64_t seed);

/// Exact ATE of a generator model via randomization, by enumeration.
double true_ate(const StagedTreeModel& model, const CausalFrame& frame);

struct SimRecord {
    std::string generator;
    double join_prob = 0.0;
    std::string param_dist;
    std::uint64_t n = 0;
    int repetition = 0;
    std::string estimator;
    bool ok = false;
    double estimate = 0.0;
    double truth = 0.0;
    double abs_error = 0.0;
    double runtime_ms = 0.0;
    std::string note;
};

struct SimSummaryRow {
    std::string generator;
    double join_prob = 0.0;
    std::string param_dist;
    std::uint64_t n = 0;
    std::string estimator;
    double median_abs_error = 0.0;
};

struct SimResults {
    std::vector<SimRecord> records;
    std::vector<SimSummaryRow> summary;
};

SimResults run_experiment(const SimConfig& config);

/// Long-format CSV: generator,pi,dist,n,rep,estimator,abs_error,runtime_ms.
void write_records_csv(std::ostream& out, const std::vector<SimRecord>& records);

}  // namespace stagedcausal
