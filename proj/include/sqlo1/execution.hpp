#pragma once

#include <sqlite3.h>

#include <algorithm>
#include <chrono>
#include <compare>
#include <optional>
#include <string>
#include <vector>

#include "sqlo1/errors.hpp"
#include "sqlo1/fragmenter.hpp"
#include "sqlo1/schema.hpp"
#include "sqlo1/sqlite.hpp"

namespace sqlo1 {

enum class CellKind { Null, Number, Text, Blob };

/// One result cell in canonical form. Integer and real values share
/// the Number kind with a common text rendering, so 5 and 5.0 compare
/// equal while the string '5' stays distinct from the number 5.
struct CellValue {
    CellKind kind = CellKind::Null;
    std::string text;

    auto operator<=>(const CellValue&) const = default;
};

using ResultRow = std::vector<CellValue>;

enum class ExecStatus { Error, Empty, Rows };

struct ExecutionOutcome {
    ExecStatus status = ExecStatus::Error;
    std::vector<ResultRow> rows;
    double elapsed_ms = 0.0;
    std::string error_message;
};

enum class RewardMode { Oracle, Blind };

namespace detail {

struct ProgressDeadline {
    std::chrono::steady_clock::time_point deadline;

    static int callback(void* self) {
        auto* d = static_cast<ProgressDeadline*>(self);
        return std::chrono::steady_clock::now() > d->deadline ? 1 : 0;
    }
};

inline CellValue normalize_cell(sqlite3_stmt* stmt, int col) {
    switch (sqlite3_column_type(stmt, col)) {
        case SQLITE_INTEGER:
            return {CellKind::Number, std::to_string(sqlite3_column_int64(stmt, col))};
        case SQLITE_FLOAT:
            return {CellKind::Number, canonical_real(sqlite3_column_double(stmt, col))};
        case SQLITE_TEXT: {
            const unsigned char* p = sqlite3_column_text(stmt, col);
            int n = sqlite3_column_bytes(stmt, col);
            return {CellKind::Text, std::string(reinterpret_cast<const char*>(p),
                                                static_cast<std::size_t>(n))};
        }
        case SQLITE_BLOB: {
            const void* p = sqlite3_column_blob(stmt, col);
            int n = sqlite3_column_bytes(stmt, col);
            return {CellKind::Blob, std::string(static_cast<const char*>(p ? p : ""),
                                                static_cast<std::size_t>(n))};
        }
        default:
            return {CellKind::Null, {}};
    }
}

} // namespace detail

/// Runs one statement against the database, read-only, on a fresh
/// connection. Timeouts and every engine failure come back as an
/// error outcome rather than an exception.
inline ExecutionOutcome execute_sql(const std::string& db_path, const std::string& sql,
                                    int timeout_ms = 30000) {
    ExecutionOutcome out;
    auto started = std::chrono::steady_clock::now();
    auto finish = [&](ExecutionOutcome o) {
        o.elapsed_ms = std::chrono::duration<double, std::milli>(
                           std::chrono::steady_clock::now() - started)
                           .count();
        return o;
    };

    try {
        db::Connection conn = db::Connection::open_readonly(db_path);
        detail::ProgressDeadline deadline{started + std::chrono::milliseconds(timeout_ms)};
        sqlite3_progress_handler(conn.get(), 500, detail::ProgressDeadline::callback,
                                 &deadline);

        sqlite3_stmt* raw = nullptr;
        int rc = sqlite3_prepare_v2(conn.get(), sql.c_str(), -1, &raw, nullptr);
        if (rc != SQLITE_OK || raw == nullptr) {
            std::string msg = rc == SQLITE_INTERRUPT ? "timeout" : conn.errmsg();
            if (raw) sqlite3_finalize(raw);
            if (rc == SQLITE_OK) msg = "empty statement";
            return finish({ExecStatus::Error, {}, 0.0, msg});
        }

        std::vector<ResultRow> rows;
        while (true) {
            int step = sqlite3_step(raw);
            if (step == SQLITE_ROW) {
                ResultRow row;
                int cols = sqlite3_column_count(raw);
                row.reserve(static_cast<std::size_t>(cols));
                for (int c = 0; c < cols; ++c) row.push_back(detail::normalize_cell(raw, c));
                rows.push_back(std::move(row));
                continue;
            }
            if (step == SQLITE_DONE) break;
            std::string msg = step == SQLITE_INTERRUPT ? "timeout" : conn.errmsg();
            if (msg.find("interrupt") != std::string::npos) msg = "timeout";
            sqlite3_finalize(raw);
            return finish({ExecStatus::Error, {}, 0.0, msg});
        }
        sqlite3_finalize(raw);
        ExecStatus status = rows.empty() ? ExecStatus::Empty : ExecStatus::Rows;
        return finish({status, std::move(rows), 0.0, {}});
    } catch (const Error& e) {
        return finish({ExecStatus::Error, {}, 0.0, e.what()});
    }
}

/// True when the two outcomes carry the same bag (or sequence) of rows.
/// Comparing against an errored outcome is a caller bug and throws.
inline bool compare_results(const ExecutionOutcome& a, const ExecutionOutcome& b,
                            bool order_sensitive = false) {
    if (a.status == ExecStatus::Error || b.status == ExecStatus::Error) {
        throw ComparisonOnError();
    }
    if (order_sensitive) return a.rows == b.rows;
    std::vector<ResultRow> left = a.rows;
    std::vector<ResultRow> right = b.rows;
    std::sort(left.begin(), left.end());
    std::sort(right.begin(), right.end());
    return left == right;
}

/// True when the statement carries an ORDER BY outside all parentheses.
inline bool has_top_level_order_by(const std::string& sql) {
    int depth = 0;
    for (const SqlToken& tok : tokenize_sql(sql, false)) {
        if (tok.kind == TokenKind::Punct) {
            if (tok.text == "(") ++depth;
            else if (tok.text == ")") --depth;
            continue;
        }
        if (depth == 0 && tok.kind == TokenKind::Keyword &&
            detail::to_upper(tok.text) == "ORDER") {
            return true;
        }
    }
    return false;
}

/// Execution reward of a candidate query: -1 when it fails to run,
/// 0 when it runs but returns nothing, +1 when its rows match the gold
/// rows. Row order matters only when the gold query orders its output.
/// Blind mode never compares, so the best it can say is 0.
inline int execution_reward(const std::string& db_path, const std::string& predicted_sql,
                            const std::optional<std::string>& gold_sql, RewardMode mode,
                            int timeout_ms = 30000) {
    if (mode == RewardMode::Oracle && (!gold_sql || gold_sql->empty())) {
        throw MissingGoldError("(execution_reward)");
    }
    ExecutionOutcome pred = execute_sql(db_path, predicted_sql, timeout_ms);
    if (pred.status == ExecStatus::Error) return -1;
    if (pred.status == ExecStatus::Empty) return 0;
    if (mode == RewardMode::Blind) return 0;

    ExecutionOutcome gold = execute_sql(db_path, *gold_sql, timeout_ms);
    if (gold.status == ExecStatus::Error) return 0;
    bool order_sensitive = has_top_level_order_by(*gold_sql);
    return compare_results(pred, gold, order_sensitive) ? 1 : 0;
}

} // namespace sqlo1
