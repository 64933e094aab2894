#pragma once

#include <algorithm>
#include <cstddef>
#include <numeric>
#include <vector>

#include "sqlo1/errors.hpp"

namespace sqlo1 {

/// Depth-dependent candidate pruning. Early steps (t <= t0) apply a
/// soft cut at lambda times the mean candidate score; later steps keep
/// only the maximum-score tie class.
struct PruningConfig {
    double lambda = 0.9;
    int t0 = 4;          // last step of the soft phase
    bool enabled = true;

    void validate() const {
        if (!(lambda >= 0.0 && lambda <= 1.0)) {
            throw ConfigError("lambda must lie in [0, 1]");
        }
        if (t0 < 1) throw ConfigError("t0 must be >= 1");
    }
};

/// Scores of the candidate set produced at one expansion step.
struct StepScores {
    int step = 1;                // 1-based depth of the new children
    std::vector<double> scores;
};

/// The pruning threshold for one step. Soft phase: lambda * mean of
/// the scores. Hard phase: the maximum score.
inline double pruning_threshold(const StepScores& step, const PruningConfig& cfg) {
    cfg.validate();
    if (step.scores.empty()) throw EmptyCandidateSetError();
    if (step.step <= cfg.t0) {
        double mean = std::accumulate(step.scores.begin(), step.scores.end(), 0.0) /
                      static_cast<double>(step.scores.size());
        return cfg.lambda * mean;
    }
    return *std::max_element(step.scores.begin(), step.scores.end());
}

/// Indices of the candidates that survive the threshold, in their
/// original order. Never empty: if the soft cut would remove every
/// candidate, the maximum-score tie class is kept instead.
inline std::vector<std::size_t> retained_indices(const StepScores& step,
                                                 const PruningConfig& cfg) {
    if (step.scores.empty()) throw EmptyCandidateSetError();
    std::vector<std::size_t> kept;
    if (!cfg.enabled) {
        kept.resize(step.scores.size());
        std::iota(kept.begin(), kept.end(), 0);
        return kept;
    }
    double tau = pruning_threshold(step, cfg);
    for (std::size_t i = 0; i < step.scores.size(); ++i) {
        if (step.scores[i] >= tau) kept.push_back(i);
    }
    if (kept.empty()) {
        double best = *std::max_element(step.scores.begin(), step.scores.end());
        for (std::size_t i = 0; i < step.scores.size(); ++i) {
            if (step.scores[i] == best) kept.push_back(i);
        }
    }
    return kept;
}

/// Filters a parallel vector of candidates down to the retained ones.
template <class T>
std::vector<T> filter_candidates(const std::vector<T>& items, const StepScores& step,
                                 const PruningConfig& cfg) {
    if (items.size() != step.scores.size()) {
        throw Error("candidate list and score list differ in length");
    }
    std::vector<T> out;
    for (std::size_t i : retained_indices(step, cfg)) out.push_back(items[i]);
    return out;
}

} // namespace sqlo1
