#include <doctest.h>

#include <random>

#include "stagedcausal/learning.hpp"
#include "stagedcausal/model.hpp"
#include "stagedcausal/rng.hpp"
#include "stagedcausal/staging.hpp"

using namespace stagedcausal;

namespace {

std::vector<Variable> binary_zry() {
    return {{"Z", {"0", "1"}}, {"R", {"0", "1"}}, {"Y", {"0", "1"}}};
}

std::vector<Variable> enso_schema() {
    return {{"ENSO", {"Nina", "neut", "Nino"}},
            {"IOD", {"neg", "zero", "pos"}},
            {"AU", {"low", "high"}}};
}

Dataset four_rows() {
    return Dataset(binary_zry(), {{0, 0, 0}, {0, 1, 1}, {1, 0, 0}, {1, 1, 1}});
}

}  // namespace

TEST_CASE("build_event_tree counts contexts and leaves") {
    const EventTree t = build_event_tree(binary_zry());
    CHECK(t.full_context_count(0) + t.full_context_count(1) + t.full_context_count(2) == 7);
    CHECK(t.leaf_count() == 8);

    const EventTree enso = build_event_tree(enso_schema());
    CHECK(enso.full_context_count(0) + enso.full_context_count(1) +
              enso.full_context_count(2) ==
          13);
    CHECK(enso.leaf_count() == 18);
}

TEST_CASE("build_event_tree rejects bad schemas") {
    CHECK_THROWS_AS(build_event_tree({{"A", {"only"}}}), SchemaError);
    CHECK_THROWS_AS(build_event_tree({{"A", {"0", "1"}}, {"A", {"0", "1"}}}), SchemaError);
    CHECK_THROWS_AS(build_event_tree({{"A", {"x", "x"}}}), SchemaError);
    CHECK_THROWS_AS(build_event_tree({}), SchemaError);
}

TEST_CASE("context rank round-trip is lexicographic") {
    const EventTree t = build_event_tree(enso_schema());
    std::uint64_t expected = 0;
    for (int a = 0; a < 3; ++a) {
        for (int b = 0; b < 3; ++b) {
            const std::vector<int> prefix{a, b};
            CHECK(t.rank_of(2, prefix) == expected);
            CHECK(t.prefix_of(2, expected) == prefix);
            ++expected;
        }
    }
}

TEST_CASE("saturated and independence stagings") {
    const EventTree t = build_event_tree(binary_zry());
    CHECK(saturated_staging(t).num_stages() == 7);
    CHECK(independence_staging(t).num_stages() == 3);

    const EventTree enso = build_event_tree(enso_schema());
    CHECK(saturated_staging(enso).num_stages() == 13);

    const EventTree single = build_event_tree({{"A", {"0", "1"}}});
    CHECK(independence_staging(single).num_stages() == 1);
}

TEST_CASE("saturated staging of a pruned tree covers retained contexts only") {
    const EventTree t = build_event_tree(binary_zry());
    const Dataset one_row(binary_zry(), {{0, 1, 0}});
    const EventTree pruned = prune_unobserved(t, one_row);
    CHECK(saturated_staging(pruned).num_stages() == 3);  // one path
    CHECK(pruned.num_contexts(2) == 1);
}

TEST_CASE("fit_mle saturated reproduces empirical conditionals") {
    const EventTree t = build_event_tree(binary_zry());
    const auto model = fit_mle(t, saturated_staging(t), four_rows(), 0.0);
    // P(Y=1 | R=1, Z=z) = 1 for both z
    CHECK(model.context_distribution(2, t.rank_of(2, std::vector<int>{0, 1}))[1] ==
          doctest::Approx(1.0));
    CHECK(model.context_distribution(2, t.rank_of(2, std::vector<int>{1, 1}))[1] ==
          doctest::Approx(1.0));
}

TEST_CASE("fit_mle independence pools counts") {
    const EventTree t = build_event_tree(binary_zry());
    const auto model = fit_mle(t, independence_staging(t), four_rows(), 0.0);
    CHECK(model.context_distribution(2, 0)[1] == doctest::Approx(0.5));
}

TEST_CASE("smoothing pulls towards uniform") {
    const EventTree t = build_event_tree(binary_zry());
    const auto raw = fit_mle(t, independence_staging(t), four_rows(), 0.0);
    const auto smooth = fit_mle(t, independence_staging(t), four_rows(), 1.0);
    const std::vector<double> uniform{0.5, 0.5};
    for (int i = 0; i < 3; ++i) {
        for (const auto& [stage, theta] : raw.parameters()[i]) {
            const auto& theta_s = smooth.stage_distribution(i, stage);
            CHECK(tv_distance(theta_s, uniform) <= tv_distance(theta, uniform) + 1e-12);
        }
    }
    // strict on a skewed stage
    const Dataset skewed(binary_zry(), {{0, 0, 0}, {0, 0, 0}, {0, 0, 0}, {1, 1, 1}});
    const auto r2 = fit_mle(t, independence_staging(t), skewed, 0.0);
    const auto s2 = fit_mle(t, independence_staging(t), skewed, 1.0);
    CHECK(tv_distance(s2.context_distribution(0, 0), uniform) <
          tv_distance(r2.context_distribution(0, 0), uniform));
}

TEST_CASE("zero-count stage gets a flagged uniform vector, never NaN") {
    const EventTree t = build_event_tree(binary_zry());
    const Dataset data(binary_zry(), {{0, 0, 0}, {0, 0, 1}});
    const auto model = fit_mle(t, saturated_staging(t), data, 0.0);
    CHECK(model.has_undefined());
    const auto rank = t.rank_of(2, std::vector<int>{1, 1});
    const auto& theta = model.context_distribution(2, rank);
    CHECK(theta[0] == doctest::Approx(0.5));
    CHECK(model.stage_undefined(2, model.staging().stage_of(2, rank)));
}

TEST_CASE("prune_unobserved keeps supported contexts") {
    const EventTree enso = build_event_tree(enso_schema());
    // No (Nino, neg) rows.
    std::vector<std::vector<int>> rows;
    for (int a = 0; a < 3; ++a)
        for (int b = 0; b < 3; ++b)
            for (int c = 0; c < 2; ++c)
                if (!(a == 2 && b == 0)) rows.push_back({a, b, c});
    const Dataset data(enso_schema(), rows);
    const EventTree pruned = prune_unobserved(enso, data);
    CHECK(pruned.num_contexts(1) == 3);
    CHECK(pruned.num_contexts(2) == 8);
    CHECK_FALSE(pruned.context_observed(2, enso.rank_of(2, std::vector<int>{2, 0})));

    // Full coverage leaves the tree unchanged.
    std::vector<std::vector<int>> all;
    for (int a = 0; a < 3; ++a)
        for (int b = 0; b < 3; ++b)
            for (int c = 0; c < 2; ++c) all.push_back({a, b, c});
    const EventTree full = prune_unobserved(enso, Dataset(enso_schema(), all));
    CHECK(full.num_contexts(2) == 9);

    CHECK_THROWS_AS(prune_unobserved(enso, Dataset(enso_schema(), {})), DataError);
}

TEST_CASE("validate_staging reports problems") {
    const EventTree t = build_event_tree(binary_zry());
    Staging good = saturated_staging(t);
    CHECK(validate_staging(t, good).empty());

    Staging missing = good;
    missing = Staging(3);
    for (int i = 0; i < 3; ++i)
        for (auto r : t.context_ranks(i))
            if (!(i == 2 && r == 3)) missing.assign(i, r, good.stage_of(i, r));
    const auto report = validate_staging(t, missing);
    REQUIRE(report.size() == 1);
    CHECK(report[0].kind == StagingIssue::Kind::MissingContext);

    Staging reused = good;
    reused.assign(0, 0, "shared");
    reused.assign(1, 0, "shared");
    bool found = false;
    for (const auto& issue : validate_staging(t, reused))
        if (issue.kind == StagingIssue::Kind::CrossVariableStage) found = true;
    CHECK(found);
}

TEST_CASE("pooling property: merged stage equals count-weighted average") {
    const EventTree t = build_event_tree(binary_zry());
    std::mt19937_64 rng(7);
    std::vector<std::vector<int>> rows;
    for (int i = 0; i < 200; ++i)
        rows.push_back({static_cast<int>(rng() % 2), static_cast<int>(rng() % 2),
                        static_cast<int>(rng() % 2)});
    const Dataset data(binary_zry(), rows);
    const Staging sat = saturated_staging(t);
    const auto fitted = fit_mle(t, sat, data, 0.0);

    Staging merged = sat;
    const std::string a = sat.stage_of(2, 0), b = sat.stage_of(2, 3);
    merged.assign(2, 3, a);
    const auto refit = fit_mle(t, merged, data, 0.0);

    const auto& ca = fitted.fit_metadata().counts[2].at(a);
    const auto& cb = fitted.fit_metadata().counts[2].at(b);
    const double na = ca[0] + ca[1], nb = cb[0] + cb[1];
    REQUIRE(na > 0);
    REQUIRE(nb > 0);
    for (int k = 0; k < 2; ++k) {
        const double expected = (na * fitted.stage_distribution(2, a)[k] +
                                 nb * fitted.stage_distribution(2, b)[k]) /
                                (na + nb);
        CHECK(refit.stage_distribution(2, a)[k] == doctest::Approx(expected).epsilon(1e-12));
    }
}

TEST_CASE("parameter vectors sum to one for random stagings") {
    const EventTree t = build_event_tree(enso_schema());
    std::mt19937_64 rng(42);
    for (int trial = 0; trial < 20; ++trial) {
        std::vector<std::vector<int>> rows;
        const int n = 1 + static_cast<int>(rng() % 50);
        for (int i = 0; i < n; ++i)
            rows.push_back({static_cast<int>(rng() % 3), static_cast<int>(rng() % 3),
                            static_cast<int>(rng() % 2)});
        Staging staging(3);
        for (int i = 0; i < 3; ++i) {
            const int groups = 1 + static_cast<int>(rng() % 3);
            for (auto r : t.context_ranks(i))
                staging.assign(i, r, "v" + std::to_string(i) + "_g" +
                                         std::to_string(rng() % groups));
        }
        const auto model = fit_mle(t, staging, Dataset(enso_schema(), rows),
                                   trial % 2 == 0 ? 0.0 : 0.5);
        CHECK_NOTHROW(model.validate(1e-12));
    }
}

TEST_CASE("prune then saturated fit has no undefined stages") {
    const EventTree t = build_event_tree(binary_zry());
    const Dataset data(binary_zry(), {{0, 0, 0}, {1, 1, 1}, {0, 1, 1}});
    const EventTree pruned = prune_unobserved(t, data);
    const auto model = fit_mle(pruned, saturated_staging(pruned), data, 0.0);
    CHECK_FALSE(model.has_undefined());
}
