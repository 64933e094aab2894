#include <catch2/catch_amalgamated.hpp>

#include <algorithm>
#include <numeric>
#include <random>
#include <string>
#include <vector>

#include <sqlo1/pruning.hpp>

using namespace sqlo1;

namespace {

PruningConfig config(double lambda = 0.9, int t0 = 4, bool enabled = true) {
    PruningConfig cfg;
    cfg.lambda = lambda;
    cfg.t0 = t0;
    cfg.enabled = enabled;
    return cfg;
}

} // namespace

TEST_CASE("threshold is lambda times the mean in the soft phase") {
    StepScores step{1, {10.0, 20.0, 30.0}};
    CHECK(pruning_threshold(step, config(0.9)) == Catch::Approx(18.0));
    CHECK(pruning_threshold(step, config(0.5)) == Catch::Approx(10.0));
    CHECK(pruning_threshold(step, config(0.0)) == Catch::Approx(0.0));
    CHECK(pruning_threshold(step, config(1.0)) == Catch::Approx(20.0));

    // Every step up to and including t0 stays soft.
    StepScores at_t0{4, {10.0, 20.0, 30.0}};
    CHECK(pruning_threshold(at_t0, config(0.9, 4)) == Catch::Approx(18.0));
}

TEST_CASE("threshold is the maximum after the soft phase") {
    StepScores step{5, {10.0, 20.0, 30.0}};
    CHECK(pruning_threshold(step, config(0.9, 4)) == Catch::Approx(30.0));
    // Lambda no longer participates.
    CHECK(pruning_threshold(step, config(0.1, 4)) == Catch::Approx(30.0));
    // A larger t0 keeps the same step soft.
    CHECK(pruning_threshold(step, config(0.9, 5)) == Catch::Approx(18.0));
}

TEST_CASE("threshold validates its inputs") {
    StepScores empty{1, {}};
    CHECK_THROWS_AS(pruning_threshold(empty, config()), EmptyCandidateSetError);
    CHECK_THROWS_AS(retained_indices(empty, config()), EmptyCandidateSetError);

    StepScores step{1, {1.0}};
    CHECK_THROWS_AS(pruning_threshold(step, config(1.5)), ConfigError);
    CHECK_THROWS_AS(pruning_threshold(step, config(-0.1)), ConfigError);
    CHECK_THROWS_AS(pruning_threshold(step, config(0.9, 0)), ConfigError);
}

TEST_CASE("soft phase keeps everything at or above the cut") {
    // All scores are exactly representable and sum to 90, so the mean
    // is exactly 18 and the lambda = 1 comparison below has no slack.
    StepScores step{2, {18.0, 17.5, 18.5, 30.0, 6.0}};
    std::vector<std::size_t> kept = retained_indices(step, config(0.9));
    CHECK(kept == std::vector<std::size_t>{0, 1, 2, 3});

    // lambda = 1.0 cuts at the mean itself.
    kept = retained_indices(step, config(1.0));
    CHECK(kept == std::vector<std::size_t>{0, 2, 3});

    // lambda = 0 keeps everything (scores here are all positive).
    kept = retained_indices(step, config(0.0));
    CHECK(kept.size() == 5);
}

TEST_CASE("hard phase keeps exactly the maximal tie class") {
    StepScores step{9, {3.0, 7.0, 7.0, 1.0, 7.0}};
    std::vector<std::size_t> kept = retained_indices(step, config(0.9, 4));
    CHECK(kept == std::vector<std::size_t>{1, 2, 4});

    StepScores single{6, {5.0, 4.0}};
    CHECK(retained_indices(single, config(0.9, 4)) == std::vector<std::size_t>{0});
}

TEST_CASE("pruning never empties the candidate set") {
    // All-negative scores with a positive threshold: mean < 0, lambda*mean
    // is above every score when lambda < 1 flips the sign relation.
    StepScores step{1, {-10.0, -20.0, -30.0}};
    // mean = -20, tau = -18 with lambda 0.9: only -10 survives.
    std::vector<std::size_t> kept = retained_indices(step, config(0.9));
    CHECK(kept == std::vector<std::size_t>{0});

    // lambda = 0 gives tau = 0, above all: fall back to the max tie class.
    kept = retained_indices(step, config(0.0));
    CHECK(kept == std::vector<std::size_t>{0});

    StepScores tied{1, {-5.0, -5.0, -9.0}};
    kept = retained_indices(tied, config(0.0));
    CHECK(kept == std::vector<std::size_t>{0, 1});

    std::mt19937 rng(991);
    std::uniform_real_distribution<double> score(-100.0, 100.0);
    std::uniform_int_distribution<int> size(1, 8);
    std::uniform_int_distribution<int> depth(1, 10);
    std::uniform_real_distribution<double> lambda(0.0, 1.0);
    for (int round = 0; round < 2000; ++round) {
        StepScores s;
        s.step = depth(rng);
        int n = size(rng);
        for (int i = 0; i < n; ++i) s.scores.push_back(score(rng));
        std::vector<std::size_t> r = retained_indices(s, config(lambda(rng), 5));
        REQUIRE(!r.empty());
        // Survivors arrive in original order.
        CHECK(std::is_sorted(r.begin(), r.end()));
    }
}

TEST_CASE("disabled pruning keeps every candidate") {
    StepScores step{9, {1.0, 2.0, 3.0}};
    std::vector<std::size_t> kept = retained_indices(step, config(0.9, 4, false));
    CHECK(kept == std::vector<std::size_t>{0, 1, 2});
}

TEST_CASE("retention bound for the soft phase") {
    // With n candidates and threshold lambda * mean, a candidate whose
    // score is at least lambda*(n-1)/(n-lambda) times the mean of the
    // other n-1 scores always survives. For lambda 0.9, n 5 the factor
    // is 3.6/4.1.
    const double lambda = 0.9;
    const double bound = (lambda * 4.0) / (5.0 - lambda); // = 3.6/4.1

    std::mt19937 rng(20240817);
    std::uniform_real_distribution<double> score(0.0, 100.0);
    for (int round = 0; round < 5000; ++round) {
        StepScores step;
        step.step = 1;
        for (int i = 0; i < 5; ++i) step.scores.push_back(score(rng));
        std::vector<std::size_t> kept = retained_indices(step, config(lambda, 4));
        for (std::size_t i = 0; i < 5; ++i) {
            double others = 0.0;
            for (std::size_t j = 0; j < 5; ++j) {
                if (j != i) others += step.scores[j];
            }
            double rbar = others / 4.0;
            bool guaranteed = step.scores[i] >= bound * rbar + 1e-9;
            if (guaranteed) {
                CHECK(std::find(kept.begin(), kept.end(), i) != kept.end());
            }
        }
    }

    // Boundary algebra: when the other four scores are all 1, the bound
    // equals the threshold (mean = (bound+4)/5, tau = 0.9*mean = bound for
    // bound = 3.6/4.1). A candidate a hair above the bound must survive.
    StepScores exact{1, {bound + 1e-12, 1.0, 1.0, 1.0, 1.0}};
    double tau = pruning_threshold(exact, config(lambda, 4));
    CHECK(tau == Catch::Approx(bound));
    std::vector<std::size_t> kept = retained_indices(exact, config(lambda, 4));
    CHECK(std::find(kept.begin(), kept.end(), std::size_t{0}) != kept.end());
}

TEST_CASE("filter maps retained indices onto a parallel candidate list") {
    StepScores step{9, {1.0, 3.0, 3.0, 2.0}};
    std::vector<std::string> items{"a", "b", "c", "d"};
    std::vector<std::string> kept = filter_candidates(items, step, config(0.9, 4));
    CHECK(kept == std::vector<std::string>{"b", "c"});

    std::vector<std::string> mismatched{"a", "b"};
    CHECK_THROWS_AS(filter_candidates(mismatched, step, config()), Error);

    std::vector<std::string> all = filter_candidates(items, step, config(0.9, 4, false));
    CHECK(all == items);
}

TEST_CASE("soft cut agrees with a direct recomputation") {
    std::mt19937 rng(55);
    std::uniform_real_distribution<double> score(50.0, 100.0);
    std::uniform_int_distribution<int> size(2, 7);
    for (int round = 0; round < 3000; ++round) {
        StepScores step;
        step.step = 1 + (round % 4);
        int n = size(rng);
        for (int i = 0; i < n; ++i) step.scores.push_back(score(rng));
        double mean = std::accumulate(step.scores.begin(), step.scores.end(), 0.0) /
                      static_cast<double>(n);
        double tau = 0.9 * mean;
        std::vector<std::size_t> expect;
        for (std::size_t i = 0; i < step.scores.size(); ++i) {
            if (step.scores[i] >= tau) expect.push_back(i);
        }
        // Positive scores guarantee a nonempty survivor set here.
        REQUIRE(!expect.empty());
        CHECK(retained_indices(step, config(0.9, 4)) == expect);
    }
}
