#pragma once

#include <atomic>
#include <chrono>
#include <cmath>
#include <map>
#include <optional>
#include <string>
#include <thread>
#include <vector>

#include <nlohmann/json.hpp>

#include "sqlo1/errors.hpp"
#include "sqlo1/execution.hpp"
#include "sqlo1/policy.hpp"
#include "sqlo1/schema.hpp"
#include "sqlo1/search.hpp"
#include "sqlo1/tasks.hpp"

namespace sqlo1 {

struct InferenceOptions {
    std::string db_root;
    int workers = 1;
    int timeout_ms = 30000;
    int samples_per_column = 3;
    SearchConfig search;
    PolicyConfig policy;
    PruningConfig pruning;

    void validate() const {
        if (workers < 1) throw ConfigError("workers must be >= 1");
        search.validate();
        policy.validate();
        pruning.validate();
    }
};

namespace detail {

inline TaskResult run_one_task(const QueryTask& task, Policy& policy,
                               const InferenceOptions& opts) {
    TaskResult r;
    r.id = task.id;
    r.db_id = task.db_id;

    std::optional<std::string> db = resolve_db_path(opts.db_root, task.db_id);
    if (!db) {
        r.error = "database not found: " + task.db_id;
        return r;
    }
    try {
        DatabaseSchema schema = introspect_schema(*db, opts.samples_per_column);
        ExecutionEnv env{*db, opts.timeout_ms};
        SearchResult search = run_mcts(task, schema, policy, env, opts.search,
                                       opts.policy, opts.pruning);
        r.predicted_sql = search.final_sql;
        r.leaf_q = search.reward.blended_q;
        r.exec_reward = search.reward.exec_reward;
        r.rollouts_used = search.stats.rollouts_used;
        r.nodes_created = search.stats.nodes_created;
        r.elapsed_ms = search.stats.elapsed_ms;
        r.early_stopped = search.stats.early_stopped;
        r.fallback = search.stats.fallback;
        r.candidates_considered = search.stats.candidates_considered;
        r.candidates_pruned = search.stats.candidates_pruned;
    } catch (const Error& e) {
        r.error = e.what();
    }
    return r;
}

} // namespace detail

/// Runs the search over every task with a pool of workers. Results
/// keep task order, one record per task; a task that fails outright
/// becomes an error record instead of being dropped. The policy is
/// shared across workers, so it must tolerate concurrent calls.
inline std::vector<TaskResult> run_inference(const std::vector<QueryTask>& tasks,
                                             Policy& policy,
                                             const InferenceOptions& opts) {
    opts.validate();
    std::vector<TaskResult> results(tasks.size());
    if (tasks.empty()) return results;

    int workers = std::min<int>(opts.workers, static_cast<int>(tasks.size()));
    std::atomic<std::size_t> next{0};
    auto worker = [&]() {
        while (true) {
            std::size_t i = next.fetch_add(1);
            if (i >= tasks.size()) break;
            results[i] = detail::run_one_task(tasks[i], policy, opts);
        }
    };
    if (workers == 1) {
        worker();
    } else {
        std::vector<std::thread> pool;
        pool.reserve(static_cast<std::size_t>(workers));
        for (int w = 0; w < workers; ++w) pool.emplace_back(worker);
        for (std::thread& t : pool) t.join();
    }
    return results;
}

struct EvalReport {
    int total = 0;
    int ex_correct = 0;
    double ex = 0.0; // execution accuracy, rounded to 4 decimals
    int errors = 0;  // error records plus predictions that failed to execute
    double wall_time_sec = 0.0;
    double throughput_per_min = 0.0;

    struct PerTask {
        std::string id;
        bool correct = false;
        std::string note;
    };
    std::vector<PerTask> per_task;
};

inline void to_json(nlohmann::json& j, const EvalReport& r) {
    nlohmann::json per = nlohmann::json::array();
    for (const EvalReport::PerTask& t : r.per_task) {
        nlohmann::json rec = {{"id", t.id}, {"correct", t.correct}};
        if (!t.note.empty()) rec["note"] = t.note;
        per.push_back(rec);
    }
    j = {{"total", r.total},
         {"ex_correct", r.ex_correct},
         {"ex", r.ex},
         {"errors", r.errors},
         {"wall_time_sec", r.wall_time_sec},
         {"throughput_per_min", r.throughput_per_min},
         {"ts", nullptr}, // reserved for test-suite accuracy
         {"per_task", per}};
}

/// Scores predictions by execution accuracy: a prediction is correct
/// when its rows match the gold rows (order-sensitive only when the
/// gold query orders its output). Error records and unexecutable
/// predictions count as wrong. Every scored task must carry gold.
inline EvalReport score_ex(const std::vector<QueryTask>& tasks,
                           const std::vector<TaskResult>& results,
                           const std::string& db_root, int timeout_ms = 30000) {
    std::map<std::string, const QueryTask*> by_id;
    for (const QueryTask& t : tasks) by_id[t.id] = &t;

    EvalReport report;
    report.total = static_cast<int>(results.size());
    for (const TaskResult& r : results) {
        auto it = by_id.find(r.id);
        if (it == by_id.end()) throw UnknownTaskIdError(r.id);
        const QueryTask& task = *it->second;
        if (!task.gold_sql) throw MissingGoldError(task.id);

        EvalReport::PerTask per;
        per.id = r.id;
        if (r.failed()) {
            ++report.errors;
            per.note = r.error;
            report.per_task.push_back(std::move(per));
            continue;
        }
        std::optional<std::string> db = resolve_db_path(db_root, task.db_id);
        if (!db) {
            ++report.errors;
            per.note = "database not found: " + task.db_id;
            report.per_task.push_back(std::move(per));
            continue;
        }
        ExecutionOutcome pred = execute_sql(*db, r.predicted_sql, timeout_ms);
        if (pred.status == ExecStatus::Error) {
            ++report.errors;
            per.note = "prediction fails to execute: " + pred.error_message;
            report.per_task.push_back(std::move(per));
            continue;
        }
        ExecutionOutcome gold = execute_sql(*db, *task.gold_sql, timeout_ms);
        if (gold.status == ExecStatus::Error) {
            ++report.errors;
            per.note = "gold fails to execute: " + gold.error_message;
            report.per_task.push_back(std::move(per));
            continue;
        }
        bool order_sensitive = has_top_level_order_by(*task.gold_sql);
        per.correct = compare_results(pred, gold, order_sensitive);
        if (per.correct) ++report.ex_correct;
        report.per_task.push_back(std::move(per));
    }
    if (report.total > 0) {
        double raw = static_cast<double>(report.ex_correct) / report.total;
        report.ex = std::round(raw * 1e4) / 1e4;
    }
    return report;
}

/// One row of a pruning-strength sweep.
struct SweepPoint {
    double lambda = 0.0;
    double ex = 0.0;
    double mean_elapsed_ms = 0.0;
    long nodes_created = 0;
    long candidates_considered = 0;
    long candidates_pruned = 0;
    double prune_rate = 0.0;
};

inline void to_json(nlohmann::json& j, const SweepPoint& p) {
    j = {{"lambda", p.lambda},
         {"ex", p.ex},
         {"mean_elapsed_ms", p.mean_elapsed_ms},
         {"nodes_created", p.nodes_created},
         {"candidates_considered", p.candidates_considered},
         {"candidates_pruned", p.candidates_pruned},
         {"prune_rate", p.prune_rate}};
}

/// Reruns inference at each pruning strength and reports accuracy,
/// node counts and the share of candidates pruned. Early stopping is
/// disabled so node counts reflect the pruning threshold alone.
inline std::vector<SweepPoint> run_lambda_sweep(const std::vector<QueryTask>& tasks,
                                                Policy& policy,
                                                const InferenceOptions& base,
                                                const std::vector<double>& lambdas) {
    std::vector<SweepPoint> points;
    for (double lambda : lambdas) {
        InferenceOptions opts = base;
        opts.pruning.lambda = lambda;
        opts.pruning.enabled = true;
        opts.search.early_stop = false;

        std::vector<TaskResult> results = run_inference(tasks, policy, opts);
        EvalReport report = score_ex(tasks, results, opts.db_root, opts.timeout_ms);

        SweepPoint p;
        p.lambda = lambda;
        p.ex = report.ex;
        double total_ms = 0.0;
        for (const TaskResult& r : results) {
            total_ms += r.elapsed_ms;
            p.nodes_created += r.nodes_created;
            p.candidates_considered += r.candidates_considered;
            p.candidates_pruned += r.candidates_pruned;
        }
        if (!results.empty()) p.mean_elapsed_ms = total_ms / static_cast<double>(results.size());
        if (p.candidates_considered > 0) {
            p.prune_rate = static_cast<double>(p.candidates_pruned) /
                           static_cast<double>(p.candidates_considered);
        }
        points.push_back(p);
    }
    return points;
}

} // namespace sqlo1
