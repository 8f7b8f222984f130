#include <doctest.h>

#include <cmath>
#include <random>

#include "stagedcausal/inference.hpp"
#include "stagedcausal/learning.hpp"
#include "stagedcausal/rng.hpp"
#include "stagedcausal/simulation.hpp"

using namespace stagedcausal;

namespace {

std::vector<Variable> binary_zry() {
    return {{"Z", {"0", "1"}}, {"R", {"0", "1"}}, {"Y", {"0", "1"}}};
}

Dataset four_rows() {
    return Dataset(binary_zry(), {{0, 0, 0}, {0, 1, 1}, {1, 0, 0}, {1, 1, 1}});
}

StagedTreeModel uniform_independent_model() {
    const EventTree t = build_event_tree(binary_zry());
    const Staging ind = independence_staging(t);
    std::vector<StagedTreeModel::ParamMap> params(3);
    for (int i = 0; i < 3; ++i)
        params[i].emplace(ind.stage_of(i, 0), std::vector<double>{0.5, 0.5});
    return StagedTreeModel(t, ind, params);
}

/// Direct evaluation of the interventional ratio: joint / product of the
/// intervened variables' conditional factors on agreeing points, else 0.
double intervention_oracle(const StagedTreeModel& model, const InterventionSpec& spec,
                           std::span<const int> x) {
    for (const auto& [var, level] : spec.assignments) {
        if (x[var] != level) return 0.0;
    }
    const double joint = joint_prob(model, x);
    if (joint == 0.0) return 0.0;
    double denom = 1.0;
    for (const auto& [var, level] : spec.assignments) {
        const auto rank =
            model.tree().rank_of(var, std::span<const int>(x.data(), var));
        denom *= model.context_distribution(var, rank).at(level);
    }
    return joint / denom;
}

template <typename Fn>
void for_each_tuple(const EventTree& tree, Fn&& fn) {
    std::vector<int> x(tree.num_variables(), 0);
    while (true) {
        fn(std::span<const int>(x));
        int i = tree.num_variables() - 1;
        while (i >= 0) {
            if (++x[i] < tree.variable(i).arity()) break;
            x[i] = 0;
            --i;
        }
        if (i < 0) return;
    }
}

}  // namespace

TEST_CASE("joint_prob on uniform independent model") {
    const auto model = uniform_independent_model();
    for_each_tuple(model.tree(), [&](std::span<const int> x) {
        CHECK(joint_prob(model, x) == doctest::Approx(0.125));
    });
}

TEST_CASE("joint_prob matches empirical frequency of a saturated fit") {
    const EventTree t = build_event_tree(binary_zry());
    const auto model = fit_mle(t, saturated_staging(t), four_rows(), 0.0);
    CHECK(joint_prob(model, std::vector<int>{0, 1, 1}) == doctest::Approx(0.25));
}

TEST_CASE("joint sums to one over all tuples") {
    for (std::uint64_t seed : {1ULL, 2ULL, 3ULL}) {
        const auto model = random_staged_tree(4, 0.5, ParamDist::Exp, seed);
        double total = 0.0;
        for_each_tuple(model.tree(),
                       [&](std::span<const int> x) { total += joint_prob(model, x); });
        CHECK(total == doctest::Approx(1.0).epsilon(1e-12));
    }
}

TEST_CASE("marginal over all variables equals the joint table") {
    const auto model = random_staged_tree(3, 0.5, ParamDist::Unif, 9);
    const auto table = marginal(model, {0, 1, 2});
    for_each_tuple(model.tree(), [&](std::span<const int> x) {
        std::vector<int> codes(x.begin(), x.end());
        CHECK(table.probs[table.index_of(codes, model.tree())] ==
              doctest::Approx(joint_prob(model, x)).epsilon(1e-12));
    });
    CHECK(table.total() == doctest::Approx(1.0));
}

TEST_CASE("independence staging factorizes marginals") {
    const auto model = random_staged_tree(3, 1.0, ParamDist::Exp, 11);  // one stage per var
    const auto zr = marginal(model, {0, 1});
    const auto z = marginal(model, {0});
    const auto r = marginal(model, {1});
    for (int a = 0; a < 2; ++a)
        for (int b = 0; b < 2; ++b)
            CHECK(zr.probs[a * 2 + b] ==
                  doctest::Approx(z.probs[a] * r.probs[b]).epsilon(1e-12));
    CHECK(marginal(model, {2}).total() == doctest::Approx(1.0));
    CHECK_THROWS_AS(marginal(model, {}), ModelError);
}

TEST_CASE("conditional on a full prefix equals the stage parameters") {
    const auto model = random_staged_tree(3, 0.5, ParamDist::Unif, 21);
    const auto& tree = model.tree();
    const auto table = conditional(model, 2, {{0, 1}, {1, 0}});
    const auto& theta =
        model.context_distribution(2, tree.rank_of(2, std::vector<int>{1, 0}));
    CHECK(table.probs[0] == doctest::Approx(theta[0]).epsilon(1e-12));
    CHECK(table.probs[1] == doctest::Approx(theta[1]).epsilon(1e-12));
}

TEST_CASE("stage equality makes conditionals coincide") {
    // Two ENSO levels share an IOD stage: equal conditional distributions.
    const std::vector<Variable> schema{{"ENSO", {"Nina", "neut", "Nino"}},
                                       {"IOD", {"neg", "zero", "pos"}},
                                       {"AU", {"low", "high"}}};
    const EventTree t = build_event_tree(schema);
    Staging staging = saturated_staging(t);
    staging.assign(1, 1, "v1_shared");
    staging.assign(1, 2, "v1_shared");
    std::vector<StagedTreeModel::ParamMap> params(3);
    params[0].emplace(staging.stage_of(0, 0), std::vector<double>{0.3, 0.3, 0.4});
    params[1].emplace(staging.stage_of(1, 0), std::vector<double>{0.5, 0.25, 0.25});
    params[1].emplace("v1_shared", std::vector<double>{0.1, 0.2, 0.7});
    for (auto r : t.context_ranks(2))
        params[2].emplace(staging.stage_of(2, r),
                          std::vector<double>{0.5 + 0.01 * r, 0.5 - 0.01 * r});
    const StagedTreeModel model(t, staging, params);
    const auto p_nino = conditional(model, 1, {{0, 2}});
    const auto p_neut = conditional(model, 1, {{0, 1}});
    for (int k = 0; k < 3; ++k)
        CHECK(p_nino.probs[k] == doctest::Approx(p_neut.probs[k]).epsilon(1e-12));
}

TEST_CASE("conditioning on a zero-probability event is an error") {
    const EventTree t = build_event_tree(binary_zry());
    const auto model = fit_mle(t, saturated_staging(t), four_rows(), 0.0);
    // (Z=0, R=0, Y=1) never occurs: P(Y=1, R=0) = 0.
    CHECK_THROWS_AS(conditional(model, 0, {{1, 0}, {2, 1}}), ModelError);
}

TEST_CASE("do-intervention on the 4-row saturated model") {
    const EventTree t = build_event_tree(binary_zry());
    const auto model = fit_mle(t, saturated_staging(t), four_rows(), 0.0);
    const auto intervened = intervene(model, {{{1, 1}}});
    const auto y = conditional(intervened, 2, {});
    CHECK(y.probs[1] == doctest::Approx(1.0));
}

TEST_CASE("intervention leaves other marginals unchanged under independence") {
    const auto model = random_staged_tree(4, 1.0, ParamDist::Exp, 33);
    const auto intervened = intervene(model, {{{1, 1}}});
    for (int v : {0, 2, 3}) {
        const auto before = marginal(model, {v});
        const auto after = marginal(intervened, {v});
        for (std::size_t k = 0; k < before.probs.size(); ++k)
            CHECK(after.probs[k] == doctest::Approx(before.probs[k]).epsilon(1e-12));
    }
}

TEST_CASE("structural intervention equals the ratio formula pointwise") {
    std::mt19937_64 seed_rng(5);
    for (int trial = 0; trial < 50; ++trial) {
        const int p = 2 + trial % 3;
        const auto model = random_staged_tree(p, 0.4, trial % 2 ? ParamDist::Exp
                                                                : ParamDist::Unif,
                                              seed_rng());
        for (int var = 0; var < p; ++var) {
            for (int level = 0; level < 2; ++level) {
                const InterventionSpec spec{{{var, level}}};
                const auto structural = intervene(model, spec);
                double max_diff = 0.0;
                for_each_tuple(model.tree(), [&](std::span<const int> x) {
                    const double a = joint_prob(structural, x);
                    const double b = intervention_oracle(model, spec, x);
                    max_diff = std::max(max_diff, std::abs(a - b));
                });
                CHECK(max_diff < 1e-12);
            }
        }
    }
}

TEST_CASE("intervened joint sums to one on the forced support") {
    const auto model = random_staged_tree(4, 0.3, ParamDist::Exp, 77);
    const auto intervened = intervene(model, {{{2, 0}}});
    double total = 0.0;
    for_each_tuple(model.tree(), [&](std::span<const int> x) {
        if (x[2] == 0) total += joint_prob(intervened, x);
    });
    CHECK(total == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("intervening on a pruned-only value is an error") {
    const EventTree t = build_event_tree(binary_zry());
    const Dataset data(binary_zry(), {{0, 1, 0}, {1, 1, 1}});
    const EventTree pruned = prune_unobserved(t, data);
    const auto model = fit_mle(pruned, saturated_staging(pruned), data, 0.0);
    CHECK_THROWS_AS(intervene(model, {{{1, 0}}}), ModelError);
}

TEST_CASE("sampling: point mass, determinism, frequencies") {
    const EventTree t = build_event_tree(binary_zry());
    const Staging ind = independence_staging(t);
    std::vector<StagedTreeModel::ParamMap> point(3);
    for (int i = 0; i < 3; ++i)
        point[i].emplace(ind.stage_of(i, 0), std::vector<double>{0.0, 1.0});
    const StagedTreeModel one_hot(t, ind, point);
    const Dataset constant = sample(one_hot, 50, 4);
    for (const auto& row : constant.rows()) CHECK(row == std::vector<int>{1, 1, 1});

    const auto uniform = uniform_independent_model();
    const Dataset a = sample(uniform, 1000, 99);
    const Dataset b = sample(uniform, 1000, 99);
    CHECK(a.rows() == b.rows());

    const Dataset big = sample(uniform, 100000, 7);
    std::vector<int> cell_counts(8, 0);
    for (const auto& row : big.rows())
        cell_counts[row[0] * 4 + row[1] * 2 + row[2]] += 1;
    for (int c = 0; c < 8; ++c)
        CHECK(std::abs(cell_counts[c] / 100000.0 - 0.125) < 0.01);
}

TEST_CASE("sampling an undefined model requires the override") {
    const EventTree t = build_event_tree(binary_zry());
    const Dataset data(binary_zry(), {{0, 0, 0}});
    const auto model = fit_mle(t, saturated_staging(t), data, 0.0);
    REQUIRE(model.has_undefined());
    CHECK_THROWS_AS(sample(model, 10, 1), ModelError);
    CHECK_NOTHROW(sample(model, 10, 1, /*allow_undefined=*/true));
}

TEST_CASE("sample then saturated refit recovers parameters in TV distance") {
    const auto truth = random_staged_tree(3, 0.5, ParamDist::Unif, 123);
    int passes = 0;
    for (std::uint64_t seed : {11ULL, 22ULL, 33ULL}) {
        const Dataset data = sample(truth, 100000, seed);
        const auto refit =
            fit_mle(truth.tree(), saturated_staging(truth.tree()), data, 0.0);
        double worst = 0.0;
        for (int i = 0; i < 3; ++i) {
            for (auto r : truth.tree().context_ranks(i)) {
                worst = std::max(worst, tv_distance(truth.context_distribution(i, r),
                                                    refit.context_distribution(i, r)));
            }
        }
        if (worst < 0.02) ++passes;
    }
    CHECK(passes >= 2);
}
