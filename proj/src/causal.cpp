#include "stagedcausal/causal.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <map>
#include <unordered_map>

#include "stagedcausal/learning.hpp"
#include "stagedcausal/rng.hpp"
#include "stagedcausal/util.hpp"

namespace stagedcausal {

namespace {

std::uint64_t covariate_rank(const EventTree& tree, const CausalFrame& frame,
                             const std::vector<int>& row) {
    return tree.rank_of(frame.treatment,
                        std::span<const int>(row.data(), frame.treatment));
}

std::string context_label(const EventTree& tree, int var, std::uint64_t rank) {
    const auto prefix = tree.prefix_of(var, rank);
    std::string label;
    for (int j = 0; j < var; ++j) {
        if (j > 0) label += "|";
        label += tree.variable(j).levels.at(prefix[j]);
    }
    return label;
}

double quantile(std::vector<double> sorted, double q) {
    if (sorted.empty()) return 0.0;
    const double pos = q * static_cast<double>(sorted.size() - 1);
    const auto lo = static_cast<std::size_t>(std::floor(pos));
    const auto hi = static_cast<std::size_t>(std::ceil(pos));
    const double frac = pos - static_cast<double>(lo);
    return sorted[lo] * (1.0 - frac) + sorted[hi] * frac;
}

struct IrlsFit {
    Eigen::VectorXd beta;
    bool converged = false;
    bool separation = false;
    int iterations = 0;
};

constexpr int kIrlsMaxIter = 50;
constexpr double kIrlsTol = 1e-8;
constexpr double kIrlsRidge = 1e-8;
constexpr double kPropensityClip = 0.01;

double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }

IrlsFit irls_logistic(const Eigen::MatrixXd& X, const Eigen::VectorXd& y) {
    IrlsFit fit;
    const auto d = X.cols();
    fit.beta = Eigen::VectorXd::Zero(d);
    for (int it = 0; it < kIrlsMaxIter; ++it) {
        fit.iterations = it + 1;
        Eigen::VectorXd eta = X * fit.beta;
        Eigen::VectorXd mu = eta.unaryExpr([](double e) { return sigmoid(e); });
        Eigen::VectorXd w = mu.array() * (1.0 - mu.array());
        w = w.cwiseMax(1e-10);
        Eigen::MatrixXd h = X.transpose() * w.asDiagonal() * X;
        h.diagonal().array() += kIrlsRidge;
        Eigen::VectorXd step = h.ldlt().solve(X.transpose() * (y - mu));
        fit.beta += step;
        if (step.cwiseAbs().maxCoeff() < kIrlsTol) {
            fit.converged = true;
            break;
        }
    }
    fit.separation = fit.beta.cwiseAbs().maxCoeff() > 15.0;
    return fit;
}

/// Intercept + dummy-coded covariates (variables before the treatment),
/// optionally followed by the treatment indicator.
Eigen::MatrixXd design_matrix(const Dataset& data, const CausalFrame& frame,
                              bool include_treatment) {
    const auto& schema = data.schema();
    Eigen::Index cols = 1;
    for (int v = 0; v < frame.treatment; ++v) cols += schema[v].arity() - 1;
    if (include_treatment) cols += 1;
    Eigen::MatrixXd X(static_cast<Eigen::Index>(data.size()), cols);
    for (Eigen::Index i = 0; i < X.rows(); ++i) {
        const auto& row = data.row(static_cast<std::size_t>(i));
        Eigen::Index c = 0;
        X(i, c++) = 1.0;
        for (int v = 0; v < frame.treatment; ++v) {
            for (int k = 1; k < schema[v].arity(); ++k)
                X(i, c++) = row[v] == k ? 1.0 : 0.0;
        }
        if (include_treatment)
            X(i, c++) = row[frame.treatment] == frame.treated_level ? 1.0 : 0.0;
    }
    return X;
}

Eigen::VectorXd indicator(const Dataset& data, int var, int level) {
    Eigen::VectorXd y(static_cast<Eigen::Index>(data.size()));
    for (Eigen::Index i = 0; i < y.size(); ++i)
        y(i) = data.row(static_cast<std::size_t>(i))[var] == level ? 1.0 : 0.0;
    return y;
}

void flag_undefined(const StagedTreeModel& model, AteEstimate& est) {
    if (!model.has_undefined()) return;
    est.flagged = true;
    for (const auto& id : model.undefined_stage_ids())
        est.diagnostics.push_back("stage '" + id + "' has no supporting observations");
}

}  // namespace

void CausalFrame::validate(const EventTree& tree) const {
    const int p = tree.num_variables();
    if (treatment < 0 || treatment >= p || outcome < 0 || outcome >= p)
        throw ModelError("treatment/outcome index out of range");
    if (outcome != p - 1) throw ModelError("outcome must be the last variable");
    if (treatment >= outcome) throw ModelError("treatment must precede the outcome");
    if (tree.variable(treatment).arity() != 2)
        throw ModelError("treatment variable must be binary");
    if (tree.variable(outcome).arity() != 2)
        throw ModelError("outcome variable must be binary");
    if (treated_level < 0 || treated_level > 1 || positive_outcome_level < 0 ||
        positive_outcome_level > 1)
        throw ModelError("treated/positive levels must be 0 or 1");
}

StagedTreeModel randomize_treatment(const StagedTreeModel& model, const CausalFrame& frame,
                                    std::optional<std::vector<double>> assignment) {
    const EventTree& tree = model.tree();
    frame.validate(tree);
    const int arity = tree.variable(frame.treatment).arity();
    std::vector<double> dist =
        assignment.value_or(std::vector<double>(arity, 1.0 / arity));
    if (static_cast<int>(dist.size()) != arity)
        throw ModelError("assignment distribution has wrong length");
    double sum = 0.0;
    for (double q : dist) sum += q;
    if (std::abs(sum - 1.0) > 1e-9)
        throw ModelError("assignment distribution must sum to 1");

    Staging staging = model.staging();
    auto params = model.parameters();
    FitMetadata meta = model.fit_metadata();
    const std::string stage = "v" + std::to_string(frame.treatment) + "_rand";
    for (std::uint64_t r : tree.context_ranks(frame.treatment))
        staging.assign(frame.treatment, r, stage);
    params[frame.treatment] = StagedTreeModel::ParamMap{{stage, std::move(dist)}};
    meta.counts[frame.treatment].clear();
    meta.undefined_stages[frame.treatment].clear();
    return StagedTreeModel(tree, std::move(staging), std::move(params), std::move(meta));
}

AteEstimate ate_randomized(const StagedTreeModel& model, const CausalFrame& frame) {
    const StagedTreeModel randomized = randomize_treatment(model, frame);
    AteEstimate est;
    const auto p1 =
        conditional(randomized, frame.outcome, {{frame.treatment, frame.treated_level}});
    const auto p0 =
        conditional(randomized, frame.outcome, {{frame.treatment, frame.control_level()}});
    est.ate = p1.probs.at(frame.positive_outcome_level) -
              p0.probs.at(frame.positive_outcome_level);
    flag_undefined(model, est);
    return est;
}

StagedTreeModel ps_stratify(const StagedTreeModel& model, const CausalFrame& frame,
                            const Dataset& data) {
    const EventTree& tree = model.tree();
    frame.validate(tree);
    if (frame.outcome != frame.treatment + 1)
        throw ModelError("ps-stratification requires the outcome directly after the treatment");
    if (!data.schema_matches(tree)) throw DataError("data schema does not match tree");
    const int yvar = frame.outcome;
    const auto treat_arity = static_cast<std::uint64_t>(tree.variable(frame.treatment).arity());

    Staging staging = model.staging();
    for (std::uint64_t yrank : tree.context_ranks(yvar)) {
        const std::uint64_t zrank = yrank / treat_arity;
        const auto r = yrank % treat_arity;
        const std::string& tstage = model.staging().stage_of(frame.treatment, zrank);
        staging.assign(yvar, yrank,
                       "v" + std::to_string(yvar) + "_ps[" + tstage + ":" +
                           std::to_string(r) + "]");
    }

    // Refit outcome parameters only; everything else is copied.
    const double alpha = model.fit_metadata().alpha;
    const int arity = tree.variable(yvar).arity();
    std::map<std::string, std::vector<std::uint64_t>> counts;
    for (const auto& [rank, stage] : staging.contexts(yvar))
        counts.try_emplace(stage, std::vector<std::uint64_t>(arity, 0));
    for (const auto& row : data.rows()) {
        const std::uint64_t yrank =
            tree.rank_of(yvar, std::span<const int>(row.data(), yvar));
        counts.at(staging.stage_of(yvar, yrank))[row[yvar]] += 1;
    }

    auto params = model.parameters();
    FitMetadata meta = model.fit_metadata();
    params[yvar].clear();
    meta.counts[yvar] = counts;
    meta.undefined_stages[yvar].clear();
    for (const auto& [stage, c] : counts) {
        std::uint64_t total = 0;
        for (auto n : c) total += n;
        std::vector<double> theta(arity);
        if (total == 0 && alpha == 0.0) {
            for (int k = 0; k < arity; ++k) theta[k] = 1.0 / arity;
            meta.undefined_stages[yvar].insert(stage);
        } else {
            const double denom = static_cast<double>(total) + alpha * arity;
            for (int k = 0; k < arity; ++k)
                theta[k] = (static_cast<double>(c[k]) + alpha) / denom;
        }
        params[yvar].emplace(stage, std::move(theta));
    }
    return StagedTreeModel(tree, std::move(staging), std::move(params), std::move(meta));
}

AteEstimate ate_ps_stratified(const StagedTreeModel& ps_model, const Dataset& data,
                              const CausalFrame& frame) {
    const EventTree& tree = ps_model.tree();
    frame.validate(tree);
    if (frame.outcome != frame.treatment + 1)
        throw ModelError("ps-stratification requires the outcome directly after the treatment");
    if (!data.schema_matches(tree)) throw DataError("data schema does not match tree");
    if (data.size() == 0) throw DataError("empty dataset");
    const auto treat_arity = static_cast<std::uint64_t>(tree.variable(frame.treatment).arity());

    struct Tally {
        std::uint64_t rows = 0, treated = 0, control = 0;
        std::uint64_t any_zrank = 0;
    };
    std::map<std::string, Tally> strata;
    for (const auto& row : data.rows()) {
        const std::uint64_t zrank = covariate_rank(tree, frame, row);
        const std::string& stage = ps_model.staging().stage_of(frame.treatment, zrank);
        auto& t = strata[stage];
        t.rows += 1;
        t.any_zrank = zrank;
        if (row[frame.treatment] == frame.treated_level)
            t.treated += 1;
        else
            t.control += 1;
    }

    AteEstimate est;
    double included_weight = 0.0;
    for (auto& [stage, t] : strata) {
        StratumEffect s;
        s.id = stage;
        s.n_treated = t.treated;
        s.n_control = t.control;
        const double raw_weight = static_cast<double>(t.rows) / data.size();
        if (t.treated == 0 || t.control == 0) {
            s.excluded = true;
            est.flagged = true;
            est.diagnostics.push_back(
                "stratum '" + stage + "' violates positivity (" +
                std::to_string(t.treated) + " treated, " + std::to_string(t.control) +
                " control rows); excluded and weights renormalized");
        } else {
            const std::uint64_t y1rank = t.any_zrank * treat_arity +
                                         static_cast<std::uint64_t>(frame.treated_level);
            const std::uint64_t y0rank = t.any_zrank * treat_arity +
                                         static_cast<std::uint64_t>(frame.control_level());
            s.effect = ps_model.context_distribution(frame.outcome, y1rank)
                           .at(frame.positive_outcome_level) -
                       ps_model.context_distribution(frame.outcome, y0rank)
                           .at(frame.positive_outcome_level);
            s.weight = raw_weight;
            included_weight += raw_weight;
        }
        est.per_stratum.push_back(std::move(s));
    }
    if (included_weight <= 0.0)
        throw ModelError("every stratum violates positivity; no estimate possible");
    double ate = 0.0;
    for (auto& s : est.per_stratum) {
        if (s.excluded) continue;
        s.weight /= included_weight;
        ate += s.weight * s.effect;
    }
    est.ate = ate;
    flag_undefined(ps_model, est);
    return est;
}

double cate(const StagedTreeModel& model, const CausalFrame& frame, std::span<const int> z) {
    const EventTree& tree = model.tree();
    frame.validate(tree);
    if (static_cast<int>(z.size()) != frame.treatment)
        throw DataError("covariate assignment must cover every variable before the treatment");
    std::map<int, int> given;
    for (int v = 0; v < frame.treatment; ++v) given[v] = z[v];
    given[frame.treatment] = frame.treated_level;
    const auto p1 = conditional(model, frame.outcome, given);
    given[frame.treatment] = frame.control_level();
    const auto p0 = conditional(model, frame.outcome, given);
    return p1.probs.at(frame.positive_outcome_level) -
           p0.probs.at(frame.positive_outcome_level);
}

PositivityReport positivity_report(const Dataset& data, const CausalFrame& frame,
                                   const std::optional<Staging>& staging) {
    const EventTree tree = build_event_tree(data.schema());
    frame.validate(tree);
    PositivityReport report;

    std::map<std::uint64_t, std::pair<std::uint64_t, std::uint64_t>> counts;
    for (const auto& row : data.rows()) {
        auto& c = counts[covariate_rank(tree, frame, row)];
        if (row[frame.treatment] == frame.treated_level)
            c.first += 1;
        else
            c.second += 1;
    }
    // Unobserved contexts are listed only when the full space is enumerable.
    if (tree.full_context_count(frame.treatment) <= (1ULL << 20)) {
        for (std::uint64_t r : tree.context_ranks(frame.treatment)) counts.try_emplace(r);
    }
    for (const auto& [rank, c] : counts) {
        PositivityEntry e;
        e.label = context_label(tree, frame.treatment, rank);
        e.n_treated = c.first;
        e.n_control = c.second;
        if (c.first == 0 && c.second == 0)
            e.flag = PositivityEntry::Flag::Unobserved;
        else if (c.second == 0)
            e.flag = PositivityEntry::Flag::OneSidedTreated;
        else if (c.first == 0)
            e.flag = PositivityEntry::Flag::OneSidedControl;
        if (e.flag != PositivityEntry::Flag::Ok) report.any_flagged = true;
        report.contexts.push_back(std::move(e));
    }

    if (staging) {
        std::map<std::string, std::pair<std::uint64_t, std::uint64_t>> by_stage;
        for (const auto& row : data.rows()) {
            const std::uint64_t zrank = covariate_rank(tree, frame, row);
            auto& c = by_stage[staging->stage_of(frame.treatment, zrank)];
            if (row[frame.treatment] == frame.treated_level)
                c.first += 1;
            else
                c.second += 1;
        }
        for (const auto& [rank, stage] : staging->contexts(frame.treatment))
            by_stage.try_emplace(stage);
        for (const auto& [stage, c] : by_stage) {
            PositivityEntry e;
            e.label = stage;
            e.n_treated = c.first;
            e.n_control = c.second;
            if (c.first == 0 && c.second == 0)
                e.flag = PositivityEntry::Flag::Unobserved;
            else if (c.second == 0)
                e.flag = PositivityEntry::Flag::OneSidedTreated;
            else if (c.first == 0)
                e.flag = PositivityEntry::Flag::OneSidedControl;
            if (e.flag != PositivityEntry::Flag::Ok) report.any_flagged = true;
            report.strata.push_back(std::move(e));
        }
    }
    return report;
}

AteEstimate baseline_full_stratification(const Dataset& data, const CausalFrame& frame) {
    const EventTree tree = build_event_tree(data.schema());
    frame.validate(tree);
    if (data.size() == 0) throw DataError("empty dataset");

    struct Cell {
        std::uint64_t n = 0;
        std::uint64_t treated = 0, treated_pos = 0;
        std::uint64_t control = 0, control_pos = 0;
    };
    std::map<std::uint64_t, Cell> cells;
    for (const auto& row : data.rows()) {
        auto& c = cells[covariate_rank(tree, frame, row)];
        c.n += 1;
        const bool pos = row[frame.outcome] == frame.positive_outcome_level;
        if (row[frame.treatment] == frame.treated_level) {
            c.treated += 1;
            if (pos) c.treated_pos += 1;
        } else {
            c.control += 1;
            if (pos) c.control_pos += 1;
        }
    }

    AteEstimate est;
    double included_weight = 0.0;
    for (const auto& [rank, c] : cells) {
        StratumEffect s;
        s.id = context_label(tree, frame.treatment, rank);
        s.n_treated = c.treated;
        s.n_control = c.control;
        if (c.treated == 0 || c.control == 0) {
            s.excluded = true;
            est.flagged = true;
            est.diagnostics.push_back("covariate context '" + s.id +
                                      "' has a one-sided treatment cell; excluded");
        } else {
            s.effect = static_cast<double>(c.treated_pos) / c.treated -
                       static_cast<double>(c.control_pos) / c.control;
            s.weight = static_cast<double>(c.n) / data.size();
            included_weight += s.weight;
        }
        est.per_stratum.push_back(std::move(s));
    }
    if (included_weight <= 0.0)
        throw ModelError("every covariate context is one-sided; no estimate possible");
    double ate = 0.0;
    for (auto& s : est.per_stratum) {
        if (s.excluded) continue;
        s.weight /= included_weight;
        ate += s.weight * s.effect;
    }
    est.ate = ate;
    return est;
}

AteEstimate baseline_outcome_regression(const Dataset& data, const CausalFrame& frame) {
    const EventTree tree = build_event_tree(data.schema());
    frame.validate(tree);
    if (data.size() == 0) throw DataError("empty dataset");
    AteEstimate est;

    const Eigen::VectorXd y = indicator(data, frame.outcome, frame.positive_outcome_level);
    if (y.minCoeff() == y.maxCoeff()) {
        est.ate = 0.0;
        est.flagged = true;
        est.diagnostics.push_back("constant outcome; degenerate regression fit");
        return est;
    }
    const Eigen::MatrixXd X = design_matrix(data, frame, /*include_treatment=*/true);
    const IrlsFit fit = irls_logistic(X, y);
    if (fit.separation) {
        est.flagged = true;
        est.diagnostics.push_back("possible separation in the outcome regression");
    } else if (!fit.converged) {
        throw ModelError("outcome regression did not converge after " +
                         std::to_string(fit.iterations) + " iterations");
    }

    const Eigen::Index treat_col = X.cols() - 1;
    double total = 0.0;
    for (Eigen::Index i = 0; i < X.rows(); ++i) {
        Eigen::RowVectorXd x = X.row(i);
        x(treat_col) = 1.0;
        const double m1 = sigmoid(x.dot(fit.beta));
        x(treat_col) = 0.0;
        const double m0 = sigmoid(x.dot(fit.beta));
        total += m1 - m0;
    }
    est.ate = total / static_cast<double>(X.rows());
    return est;
}

AteEstimate baseline_ipw(const Dataset& data, const CausalFrame& frame) {
    const EventTree tree = build_event_tree(data.schema());
    frame.validate(tree);
    if (data.size() == 0) throw DataError("empty dataset");

    const Eigen::VectorXd r = indicator(data, frame.treatment, frame.treated_level);
    if (r.minCoeff() == r.maxCoeff())
        throw DataError("propensity is degenerate: every row has the same treatment");
    const Eigen::VectorXd y = indicator(data, frame.outcome, frame.positive_outcome_level);
    const Eigen::MatrixXd X = design_matrix(data, frame, /*include_treatment=*/false);
    const IrlsFit fit = irls_logistic(X, r);

    AteEstimate est;
    if (fit.separation) {
        est.flagged = true;
        est.diagnostics.push_back("possible separation in the propensity model");
    } else if (!fit.converged) {
        throw ModelError("propensity model did not converge");
    }

    int clipped = 0;
    double w1_sum = 0.0, w1y_sum = 0.0, w0_sum = 0.0, w0y_sum = 0.0;
    for (Eigen::Index i = 0; i < X.rows(); ++i) {
        double e = sigmoid(X.row(i).dot(fit.beta));
        if (e < kPropensityClip || e > 1.0 - kPropensityClip) {
            e = std::clamp(e, kPropensityClip, 1.0 - kPropensityClip);
            ++clipped;
        }
        if (r(i) > 0.5) {
            w1_sum += 1.0 / e;
            w1y_sum += y(i) / e;
        } else {
            w0_sum += 1.0 / (1.0 - e);
            w0y_sum += y(i) / (1.0 - e);
        }
    }
    if (clipped > 0) {
        est.flagged = true;
        est.diagnostics.push_back(std::to_string(clipped) +
                                  " propensities clipped to [0.01, 0.99]");
    }
    est.ate = w1y_sum / w1_sum - w0y_sum / w0_sum;
    return est;
}

AteEstimate baseline_aipw(const Dataset& data, const CausalFrame& frame,
                          const AipwOptions& options) {
    const EventTree tree = build_event_tree(data.schema());
    frame.validate(tree);
    if (data.size() == 0) throw DataError("empty dataset");
    const auto n = static_cast<Eigen::Index>(data.size());

    const Eigen::VectorXd r = indicator(data, frame.treatment, frame.treated_level);
    const Eigen::VectorXd y = indicator(data, frame.outcome, frame.positive_outcome_level);
    if (r.minCoeff() == r.maxCoeff())
        throw DataError("propensity is degenerate: every row has the same treatment");

    AteEstimate est;

    Eigen::VectorXd e(n);
    if (options.constant_propensity) {
        const double p = std::clamp(r.mean(), kPropensityClip, 1.0 - kPropensityClip);
        e.setConstant(p);
    } else {
        const Eigen::MatrixXd Xp = design_matrix(data, frame, false);
        const IrlsFit fit = irls_logistic(Xp, r);
        if (fit.separation) {
            est.flagged = true;
            est.diagnostics.push_back("possible separation in the propensity model");
        } else if (!fit.converged) {
            throw ModelError("propensity model did not converge");
        }
        for (Eigen::Index i = 0; i < n; ++i)
            e(i) = std::clamp(sigmoid(Xp.row(i).dot(fit.beta)), kPropensityClip,
                              1.0 - kPropensityClip);
    }

    Eigen::VectorXd m1(n), m0(n);
    if (options.constant_outcome || y.minCoeff() == y.maxCoeff()) {
        const double treated = r.sum();
        const double mean1 = treated > 0 ? y.dot(r) / treated : 0.0;
        const double mean0 =
            n - treated > 0 ? (y.sum() - y.dot(r)) / (n - treated) : 0.0;
        m1.setConstant(mean1);
        m0.setConstant(mean0);
        if (!options.constant_outcome) {
            est.flagged = true;
            est.diagnostics.push_back("constant outcome; arm means used as outcome model");
        }
    } else {
        const Eigen::MatrixXd Xo = design_matrix(data, frame, true);
        const IrlsFit fit = irls_logistic(Xo, y);
        if (fit.separation) {
            est.flagged = true;
            est.diagnostics.push_back("possible separation in the outcome regression");
        } else if (!fit.converged) {
            throw ModelError("outcome regression did not converge");
        }
        const Eigen::Index treat_col = Xo.cols() - 1;
        for (Eigen::Index i = 0; i < n; ++i) {
            Eigen::RowVectorXd x = Xo.row(i);
            x(treat_col) = 1.0;
            m1(i) = sigmoid(x.dot(fit.beta));
            x(treat_col) = 0.0;
            m0(i) = sigmoid(x.dot(fit.beta));
        }
    }

    double total = 0.0;
    for (Eigen::Index i = 0; i < n; ++i) {
        total += m1(i) - m0(i) + r(i) * (y(i) - m1(i)) / e(i) -
                 (1.0 - r(i)) * (y(i) - m0(i)) / (1.0 - e(i));
    }
    est.ate = total / static_cast<double>(n);
    return est;
}

AteEstimate bootstrap_ate(const Dataset& data, const CausalFrame& frame,
                          const BootstrapConfig& config) {
    if (config.n_replicates < 2) throw DataError("bootstrap needs at least 2 replicates");
    if (data.size() == 0) throw DataError("empty dataset");
    const EventTree tree = build_event_tree(data.schema());
    frame.validate(tree);
    const std::uint64_t n = data.size();
    const auto b_total = static_cast<std::size_t>(config.n_replicates);

    std::vector<std::optional<double>> values(b_total);
    std::vector<std::string> failures(b_total);
    parallel_for(b_total, [&](std::size_t b) {
        try {
            std::mt19937_64 rng(derive_seed(config.seed, b));
            std::vector<std::vector<int>> rows;
            rows.reserve(n);
            for (std::uint64_t i = 0; i < n; ++i)
                rows.push_back(data.row(uniform_index(rng, n)));
            Dataset resample(data.schema(), std::move(rows));
            const EventTree pruned = prune_unobserved(tree, resample);
            const ScoredStaging learned = config.learner == BootstrapConfig::Learner::Bhc
                                              ? learn_bhc(pruned, resample)
                                              : learn_hclust(pruned, resample);
            const StagedTreeModel model =
                fit_mle(pruned, learned.staging, resample, config.alpha);
            if (config.estimator == BootstrapConfig::Estimator::Randomized) {
                values[b] = ate_randomized(model, frame).ate;
            } else {
                const StagedTreeModel ps = ps_stratify(model, frame, resample);
                values[b] = ate_ps_stratified(ps, resample, frame).ate;
            }
        } catch (const std::exception& e) {
            failures[b] = e.what();
        }
    });

    AteEstimate est;
    for (std::size_t b = 0; b < b_total; ++b) {
        if (values[b])
            est.replicates.push_back(*values[b]);
        else
            est.diagnostics.push_back("replicate " + std::to_string(b) +
                                      " failed: " + failures[b]);
    }
    const std::size_t failed = b_total - est.replicates.size();
    if (failed * 5 > b_total)
        throw ModelError("more than 20% of bootstrap replicates failed (" +
                         std::to_string(failed) + " of " + std::to_string(b_total) + ")");
    if (failed > 0) est.flagged = true;

    double mean = 0.0;
    for (double v : est.replicates) mean += v;
    est.ate = mean / static_cast<double>(est.replicates.size());
    est.n_bootstrap = static_cast<int>(est.replicates.size());
    est.ci_level = config.ci_level;
    std::vector<double> sorted = est.replicates;
    std::sort(sorted.begin(), sorted.end());
    const double tail = (1.0 - config.ci_level) / 2.0;
    est.ci_lower = quantile(sorted, tail);
    est.ci_upper = quantile(std::move(sorted), 1.0 - tail);
    return est;
}

}  // namespace stagedcausal
