#include "stagedcausal/simulation.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <ostream>

#include "stagedcausal/learning.hpp"
#include "stagedcausal/rng.hpp"
#include "stagedcausal/util.hpp"

namespace stagedcausal {

namespace {

std::vector<Variable> binary_schema(int p) {
    if (p < 1) throw SchemaError("need at least one variable");
    std::vector<Variable> schema;
    for (int i = 0; i < p; ++i) {
        std::string name;
        if (p >= 3 && i == p - 2)
            name = "R";
        else if (p >= 2 && i == p - 1)
            name = "Y";
        else
            name = "Z" + std::to_string(i + 1);
        schema.push_back({name, {"0", "1"}});
    }
    return schema;
}

std::vector<double> draw_distribution(std::mt19937_64& rng, int arity, ParamDist dist) {
    std::vector<double> theta(arity);
    double sum = 0.0;
    for (int k = 0; k < arity; ++k) {
        theta[k] = dist == ParamDist::Exp ? exponential1(rng) : uniform01(rng);
        sum += theta[k];
    }
    if (sum <= 0.0) return std::vector<double>(arity, 1.0 / arity);
    for (double& t : theta) t /= sum;
    return theta;
}

StagedTreeModel assemble(EventTree tree, Staging staging, ParamDist dist,
                         std::mt19937_64& rng) {
    const int p = tree.num_variables();
    std::vector<StagedTreeModel::ParamMap> params(p);
    for (int i = 0; i < p; ++i) {
        const int arity = tree.variable(i).arity();
        for (const auto& [stage, ranks] : staging.groups(i))
            params[i].emplace(stage, draw_distribution(rng, arity, dist));
    }
    return StagedTreeModel(std::move(tree), std::move(staging), std::move(params));
}

double median(std::vector<double> values) {
    std::sort(values.begin(), values.end());
    const std::size_t n = values.size();
    if (n == 0) return std::numeric_limits<double>::quiet_NaN();
    return n % 2 == 1 ? values[n / 2] : 0.5 * (values[n / 2 - 1] + values[n / 2]);
}

}  // namespace

StagedTreeModel random_staged_tree(int p, double join_prob, ParamDist dist,
                                   std::uint64_t seed) {
    if (join_prob < 0.0 || join_prob > 1.0)
        throw DataError("join probability must be in [0,1]");
    EventTree tree = build_event_tree(binary_schema(p));
    std::mt19937_64 rng(seed);
    Staging staging(p);
    for (int i = 0; i < p; ++i) {
        std::uint64_t n_stages = 0;
        for (std::uint64_t rank : tree.context_ranks(i)) {
            std::uint64_t stage;
            if (n_stages > 0 && uniform01(rng) < join_prob)
                stage = uniform_index(rng, n_stages);
            else
                stage = n_stages++;
            staging.assign(i, rank, "v" + std::to_string(i) + "_s" + std::to_string(stage));
        }
    }
    return assemble(std::move(tree), std::move(staging), dist, rng);
}

StagedTreeModel random_dag_model(int p, double edge_prob, ParamDist dist,
                                 std::uint64_t seed) {
    if (edge_prob < 0.0 || edge_prob > 1.0)
        throw DataError("edge probability must be in [0,1]");
    EventTree tree = build_event_tree(binary_schema(p));
    std::mt19937_64 rng(seed);
    std::vector<std::vector<int>> parents(p);
    for (int i = 0; i < p; ++i) {
        for (int j = 0; j < i; ++j) {
            if (uniform01(rng) < edge_prob) parents[i].push_back(j);
        }
    }
    Staging staging(p);
    for (int i = 0; i < p; ++i) {
        for (std::uint64_t rank : tree.context_ranks(i)) {
            const auto prefix = tree.prefix_of(i, rank);
            std::uint64_t pa_rank = 0;
            for (int j : parents[i])
                pa_rank = pa_rank * tree.variable(j).arity() + prefix[j];
            staging.assign(i, rank, "v" + std::to_string(i) + "_pa" + std::to_string(pa_rank));
        }
    }
    return assemble(std::move(tree), std::move(staging), dist, rng);
}

double true_ate(const StagedTreeModel& model, const CausalFrame& frame) {
    return ate_randomized(model, frame).ate;
}

SimResults run_experiment(const SimConfig& config) {
    if (config.p < 3) throw DataError("need at least 3 variables (covariate, R, Y)");
    if (config.repetitions < 1) throw DataError("repetitions must be >= 1");
    const CausalFrame frame{config.p - 2, config.p - 1, 1, 1};

    struct Task {
        double join_prob;
        ParamDist dist;
        int rep;
        std::uint64_t seed_index;
    };
    std::vector<Task> tasks;
    std::uint64_t seed_index = 0;
    for (double pi : config.join_probs) {
        for (ParamDist dist : config.param_dists) {
            for (int rep = 0; rep < config.repetitions; ++rep)
                tasks.push_back({pi, dist, rep, seed_index++});
        }
    }

    const std::string gen_name = config.generator == GeneratorKind::Sevt ? "sevt" : "dag";
    std::vector<std::vector<SimRecord>> per_task(tasks.size());
    parallel_for(tasks.size(), [&](std::size_t t) {
        const Task& task = tasks[t];
        const std::string dist_name = task.dist == ParamDist::Exp ? "exp" : "unif";
        const std::uint64_t gen_seed = derive_seed(config.seed, task.seed_index * 1000);
        const StagedTreeModel generator =
            config.generator == GeneratorKind::Sevt
                ? random_staged_tree(config.p, task.join_prob, task.dist, gen_seed)
                : random_dag_model(config.p, config.dag_edge_prob, task.dist, gen_seed);
        const double truth = true_ate(generator, frame);
        const EventTree& tree = generator.tree();

        for (std::size_t ni = 0; ni < config.sample_sizes.size(); ++ni) {
            const std::uint64_t n = config.sample_sizes[ni];
            const Dataset data =
                sample(generator, n, derive_seed(config.seed, task.seed_index * 1000 + ni + 1));
            for (const std::string& name : config.estimators) {
                SimRecord rec;
                rec.generator = gen_name;
                rec.join_prob = task.join_prob;
                rec.param_dist = dist_name;
                rec.n = n;
                rec.repetition = task.rep;
                rec.estimator = name;
                rec.truth = truth;
                const auto start = std::chrono::steady_clock::now();
                try {
                    if (name == "bhc") {
                        const auto learned = learn_bhc(tree, data);
                        rec.estimate =
                            ate_randomized(fit_mle(tree, learned.staging, data), frame).ate;
                    } else if (name == "hclust") {
                        const auto learned = learn_hclust(tree, data);
                        rec.estimate =
                            ate_randomized(fit_mle(tree, learned.staging, data), frame).ate;
                    } else if (name == "full") {
                        rec.estimate = baseline_full_stratification(data, frame).ate;
                    } else if (name == "oracle") {
                        rec.estimate =
                            ate_randomized(fit_mle(tree, generator.staging(), data), frame)
                                .ate;
                    } else if (name == "q.model") {
                        rec.estimate = baseline_outcome_regression(data, frame).ate;
                    } else if (name == "ipw") {
                        rec.estimate = baseline_ipw(data, frame).ate;
                    } else if (name == "aipw") {
                        rec.estimate = baseline_aipw(data, frame).ate;
                    } else {
                        throw DataError("unknown estimator '" + name + "'");
                    }
                    rec.ok = true;
                    rec.abs_error = std::abs(rec.estimate - truth);
                } catch (const std::exception& e) {
                    rec.ok = false;
                    rec.note = e.what();
                }
                rec.runtime_ms = std::chrono::duration<double, std::milli>(
                                     std::chrono::steady_clock::now() - start)
                                     .count();
                per_task[t].push_back(std::move(rec));
            }
        }
    });

    SimResults results;
    for (auto& block : per_task)
        for (auto& rec : block) results.records.push_back(std::move(rec));

    // Median abs error per (generator, pi, dist, n, estimator) cell.
    std::map<std::tuple<double, std::string, std::uint64_t, std::string>,
             std::vector<double>>
        cells;
    for (const auto& rec : results.records) {
        if (rec.ok)
            cells[{rec.join_prob, rec.param_dist, rec.n, rec.estimator}].push_back(
                rec.abs_error);
    }
    for (const auto& [key, errors] : cells) {
        results.summary.push_back({gen_name, std::get<0>(key), std::get<1>(key),
                                   std::get<2>(key), std::get<3>(key), median(errors)});
    }
    return results;
}

void write_records_csv(std::ostream& out, const std::vector<SimRecord>& records) {
    out << "generator,pi,dist,n,rep,estimator,abs_error,runtime_ms\n";
    char buf[64];
    for (const auto& rec : records) {
        out << rec.generator << ',' << rec.join_prob << ',' << rec.param_dist << ','
            << rec.n << ',' << rec.repetition << ',' << rec.estimator << ',';
        if (rec.ok) {
            std::snprintf(buf, sizeof(buf), "%.17g", rec.abs_error);
            out << buf;
        } else {
            out << "NA";
        }
        std::snprintf(buf, sizeof(buf), "%.3f", rec.runtime_ms);
        out << ',' << buf << '\n';
    }
}

}  // namespace stagedcausal
