#pragma once

#include <filesystem>
#include <fstream>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "sqlo1/errors.hpp"

namespace sqlo1 {

/// One benchmark question bound to a database.
struct QueryTask {
    std::string id;
    std::string question;
    std::string db_id;
    std::optional<std::string> gold_sql;
    std::optional<std::string> evidence;
};

namespace detail {

inline std::string json_id(const nlohmann::json& v) {
    if (v.is_string()) return v.get<std::string>();
    if (v.is_number_integer()) return std::to_string(v.get<long long>());
    if (v.is_number_unsigned()) return std::to_string(v.get<unsigned long long>());
    throw Error("task id must be a string or integer");
}

} // namespace detail

inline QueryTask task_from_json(const nlohmann::json& j) {
    QueryTask t;
    if (!j.contains("id")) throw Error("task record lacks an id");
    t.id = detail::json_id(j.at("id"));
    if (!j.contains("question") || !j.at("question").is_string()) {
        throw Error("task " + t.id + " lacks a question");
    }
    t.question = j.at("question").get<std::string>();
    if (!j.contains("db_id") || !j.at("db_id").is_string()) {
        throw Error("task " + t.id + " lacks a db_id");
    }
    t.db_id = j.at("db_id").get<std::string>();
    if (j.contains("query") && j.at("query").is_string() &&
        !j.at("query").get<std::string>().empty()) {
        t.gold_sql = j.at("query").get<std::string>();
    }
    if (j.contains("evidence") && j.at("evidence").is_string() &&
        !j.at("evidence").get<std::string>().empty()) {
        t.evidence = j.at("evidence").get<std::string>();
    }
    return t;
}

inline nlohmann::json task_to_json(const QueryTask& t) {
    nlohmann::json j = {{"id", t.id}, {"question", t.question}, {"db_id", t.db_id}};
    if (t.gold_sql) j["query"] = *t.gold_sql;
    if (t.evidence) j["evidence"] = *t.evidence;
    return j;
}

/// Loads a JSON array of task records from disk.
inline std::vector<QueryTask> load_tasks(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw FileNotFoundError(path);
    nlohmann::json doc;
    try {
        in >> doc;
    } catch (const nlohmann::json::exception& e) {
        throw Error("cannot parse task file " + path + ": " + e.what());
    }
    if (!doc.is_array()) throw Error("task file must hold a JSON array: " + path);
    std::vector<QueryTask> tasks;
    tasks.reserve(doc.size());
    for (const nlohmann::json& rec : doc) tasks.push_back(task_from_json(rec));
    return tasks;
}

/// Maps a db_id to its file under the database root. Both the flat
/// layout <root>/<db_id>.sqlite and the nested benchmark layout
/// <root>/<db_id>/<db_id>.sqlite are recognized.
inline std::optional<std::string> resolve_db_path(const std::string& db_root,
                                                  const std::string& db_id) {
    namespace fs = std::filesystem;
    const char* exts[] = {".sqlite", ".db", ".sqlite3"};
    for (const char* ext : exts) {
        fs::path flat = fs::path(db_root) / (db_id + ext);
        if (fs::exists(flat)) return flat.string();
        fs::path nested = fs::path(db_root) / db_id / (db_id + ext);
        if (fs::exists(nested)) return nested.string();
    }
    return std::nullopt;
}

} // namespace sqlo1
