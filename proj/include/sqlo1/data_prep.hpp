#pragma once

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "sqlo1/errors.hpp"
#include "sqlo1/execution.hpp"
#include "sqlo1/fragmenter.hpp"
#include "sqlo1/schema.hpp"
#include "sqlo1/search.hpp"
#include "sqlo1/tasks.hpp"

namespace sqlo1 {

/// One supervised tuning record: full prompt in, gold query out.
struct SftRecord {
    std::string task_id;
    std::string prompt;
    std::string completion;
};

/// One progressive generation record: the prompt carries a gold prefix
/// cut at a clause boundary and the completion is the remainder.
struct PsgRecord {
    std::string task_id;
    std::string prompt;
    std::string completion;
    std::size_t cut_index = 0;
};

struct PrepOptions {
    int samples_per_column = 3;
    int splits_per_query = 3;   // PSG records kept per failed query
    double psg_ratio = 0.227;   // share of PSG records in the mixed corpus
    int timeout_ms = 30000;

    void validate() const {
        if (samples_per_column < 0) throw ConfigError("samples_per_column must be >= 0");
        if (splits_per_query < 1) throw ConfigError("splits_per_query must be >= 1");
        if (!(psg_ratio >= 0.0 && psg_ratio < 1.0)) {
            throw ConfigError("psg_ratio must lie in [0, 1)");
        }
    }
};

struct PrepNotes {
    std::vector<std::string> skipped; // human-readable skip reasons
};

namespace detail {

inline std::vector<QueryTask> sorted_by_id(std::vector<QueryTask> tasks) {
    std::stable_sort(tasks.begin(), tasks.end(),
                     [](const QueryTask& a, const QueryTask& b) { return a.id < b.id; });
    return tasks;
}

inline std::optional<std::string> task_prompt(const QueryTask& task,
                                              const std::string& db_root,
                                              const PrepOptions& opts, PrepNotes* notes) {
    std::optional<std::string> db = resolve_db_path(db_root, task.db_id);
    if (!db) {
        if (notes) notes->skipped.push_back(task.id + ": database not found");
        return std::nullopt;
    }
    DatabaseSchema schema = introspect_schema(*db, opts.samples_per_column);
    return serialize_context(schema, task.question, task.evidence);
}

} // namespace detail

/// Builds the supervised corpus: one record per task with a gold query
/// that actually executes. Records come out sorted by task id; tasks
/// with a broken gold or a missing database are skipped and noted.
inline std::vector<SftRecord> build_sft_corpus(const std::vector<QueryTask>& tasks,
                                               const std::string& db_root,
                                               const PrepOptions& opts = {},
                                               PrepNotes* notes = nullptr) {
    opts.validate();
    std::vector<SftRecord> out;
    for (const QueryTask& task : detail::sorted_by_id(tasks)) {
        if (!task.gold_sql) {
            if (notes) notes->skipped.push_back(task.id + ": no gold query");
            continue;
        }
        std::optional<std::string> db = resolve_db_path(db_root, task.db_id);
        if (!db) {
            if (notes) notes->skipped.push_back(task.id + ": database not found");
            continue;
        }
        ExecutionOutcome gold = execute_sql(*db, *task.gold_sql, opts.timeout_ms);
        if (gold.status == ExecStatus::Error) {
            if (notes) {
                notes->skipped.push_back(task.id + ": gold fails to execute (" +
                                         gold.error_message + ")");
            }
            continue;
        }
        std::optional<std::string> prompt = detail::task_prompt(task, db_root, opts, notes);
        if (!prompt) continue;
        out.push_back({task.id, *prompt, *task.gold_sql});
    }
    return out;
}

/// Picks out the tasks whose recorded prediction does not match gold.
/// A result that names an unknown task id is a caller bug and throws;
/// tasks without a prediction are not failures.
inline std::vector<QueryTask> collect_failures(const std::vector<QueryTask>& tasks,
                                               const std::vector<TaskResult>& results,
                                               const std::string& db_root,
                                               const PrepOptions& opts = {},
                                               PrepNotes* notes = nullptr) {
    std::map<std::string, const QueryTask*> by_id;
    for (const QueryTask& t : tasks) by_id[t.id] = &t;

    std::vector<QueryTask> failures;
    for (const TaskResult& r : results) {
        auto it = by_id.find(r.id);
        if (it == by_id.end()) throw UnknownTaskIdError(r.id);
        const QueryTask& task = *it->second;
        if (!task.gold_sql) {
            if (notes) notes->skipped.push_back(task.id + ": no gold query");
            continue;
        }
        if (r.failed()) {
            failures.push_back(task);
            continue;
        }
        std::optional<std::string> db = resolve_db_path(db_root, task.db_id);
        if (!db) {
            if (notes) notes->skipped.push_back(task.id + ": database not found");
            continue;
        }
        int reward = execution_reward(*db, r.predicted_sql, task.gold_sql,
                                      RewardMode::Oracle, opts.timeout_ms);
        if (reward < 1) failures.push_back(task);
    }
    return detail::sorted_by_id(std::move(failures));
}

/// Builds the progressive corpus from failed tasks. Each gold query is
/// split at every clause boundary; the longest prefixes are kept, up
/// to splits_per_query, and emitted in ascending cut order. Prefix
/// plus completion always reassembles the gold query exactly.
inline std::vector<PsgRecord> build_psg_corpus(const std::vector<QueryTask>& failures,
                                               const std::string& db_root,
                                               const PrepOptions& opts = {},
                                               PrepNotes* notes = nullptr) {
    opts.validate();
    std::vector<PsgRecord> out;
    for (const QueryTask& task : detail::sorted_by_id(failures)) {
        if (!task.gold_sql) {
            if (notes) notes->skipped.push_back(task.id + ": no gold query");
            continue;
        }
        std::vector<PsgSplit> splits;
        try {
            splits = truncate_for_psg(*task.gold_sql);
        } catch (const TokenizeError& e) {
            if (notes) notes->skipped.push_back(task.id + ": gold does not tokenize (" +
                                                e.what() + ")");
            continue;
        }
        if (splits.empty()) {
            if (notes) notes->skipped.push_back(task.id + ": gold has no clause boundary");
            continue;
        }
        std::optional<std::string> prompt = detail::task_prompt(task, db_root, opts, notes);
        if (!prompt) continue;

        if (splits.size() > static_cast<std::size_t>(opts.splits_per_query)) {
            splits.erase(splits.begin(),
                         splits.end() - static_cast<std::ptrdiff_t>(opts.splits_per_query));
        }
        for (const PsgSplit& split : splits) {
            if (split.prefix + split.remainder != *task.gold_sql) {
                throw Error("psg split does not reassemble gold for task " + task.id);
            }
            out.push_back({task.id, *prompt + split.prefix, split.remainder, split.cut});
        }
    }
    return out;
}

inline nlohmann::json sft_record_json(const SftRecord& r) {
    return {{"source_task_id", r.task_id},
            {"prompt", r.prompt},
            {"completion", r.completion},
            {"source", "sft"}};
}

inline nlohmann::json psg_record_json(const PsgRecord& r) {
    return {{"source_task_id", r.task_id},
            {"prompt", r.prompt},
            {"completion", r.completion},
            {"cut_index", r.cut_index},
            {"source", "psg"}};
}

/// Mixes the two corpora: all supervised records, then the first k
/// progressive records where k makes the progressive share equal the
/// configured ratio (k = ratio * S / (1 - ratio), capped by what is
/// available).
inline std::vector<nlohmann::json> mix_corpora(const std::vector<SftRecord>& sft,
                                               const std::vector<PsgRecord>& psg,
                                               double psg_ratio) {
    if (!(psg_ratio >= 0.0 && psg_ratio < 1.0)) {
        throw ConfigError("psg_ratio must lie in [0, 1)");
    }
    double want = psg_ratio * static_cast<double>(sft.size()) / (1.0 - psg_ratio);
    std::size_t k = std::min(psg.size(), static_cast<std::size_t>(std::llround(want)));
    std::vector<nlohmann::json> mixed;
    mixed.reserve(sft.size() + k);
    for (const SftRecord& r : sft) mixed.push_back(sft_record_json(r));
    for (std::size_t i = 0; i < k; ++i) mixed.push_back(psg_record_json(psg[i]));
    return mixed;
}

/// Writes records as JSON lines. Identical input always produces
/// byte-identical output.
inline void write_jsonl(const std::string& path, const std::vector<nlohmann::json>& records) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw Error("cannot write " + path);
    for (const nlohmann::json& rec : records) out << rec.dump() << "\n";
}

} // namespace sqlo1
