#pragma once

#include <sqlite3.h>

#include <cstdint>
#include <string>
#include <string_view>
#include <utility>

#include "sqlo1/errors.hpp"

namespace sqlo1::db {

/// Thin RAII wrapper around a sqlite3 connection handle.
class Connection {
public:
    Connection() = default;

    Connection(const std::string& path, int flags) {
        int rc = sqlite3_open_v2(path.c_str(), &handle_, flags, nullptr);
        if (rc != SQLITE_OK) {
            std::string msg = handle_ ? sqlite3_errmsg(handle_) : sqlite3_errstr(rc);
            sqlite3_close_v2(handle_);
            handle_ = nullptr;
            throw Error("cannot open " + path + ": " + msg);
        }
        sqlite3_extended_result_codes(handle_, 0);
    }

    static Connection open_readonly(const std::string& path) {
        return Connection(path, SQLITE_OPEN_READONLY);
    }

    static Connection open_readwrite(const std::string& path) {
        return Connection(path, SQLITE_OPEN_READWRITE | SQLITE_OPEN_CREATE);
    }

    static Connection open_memory() {
        return Connection(":memory:", SQLITE_OPEN_READWRITE | SQLITE_OPEN_CREATE);
    }

    Connection(Connection&& other) noexcept : handle_(std::exchange(other.handle_, nullptr)) {}
    Connection& operator=(Connection&& other) noexcept {
        if (this != &other) {
            close();
            handle_ = std::exchange(other.handle_, nullptr);
        }
        return *this;
    }
    Connection(const Connection&) = delete;
    Connection& operator=(const Connection&) = delete;
    ~Connection() { close(); }

    sqlite3* get() const { return handle_; }
    explicit operator bool() const { return handle_ != nullptr; }

    std::string errmsg() const { return handle_ ? sqlite3_errmsg(handle_) : "no connection"; }
    int errcode() const { return handle_ ? sqlite3_errcode(handle_) : SQLITE_MISUSE; }

    /// Run statements that produce no rows; throws on failure.
    void exec(const std::string& sql) {
        char* err = nullptr;
        if (sqlite3_exec(handle_, sql.c_str(), nullptr, nullptr, &err) != SQLITE_OK) {
            std::string msg = err ? err : errmsg();
            sqlite3_free(err);
            throw Error("sqlite exec failed: " + msg);
        }
    }

private:
    void close() {
        if (handle_) {
            sqlite3_close_v2(handle_);
            handle_ = nullptr;
        }
    }

    sqlite3* handle_ = nullptr;
};

/// RAII wrapper around a prepared statement.
class Statement {
public:
    Statement(Connection& conn, std::string_view sql) : conn_(&conn) {
        int rc = sqlite3_prepare_v2(conn.get(), sql.data(), static_cast<int>(sql.size()),
                                    &stmt_, nullptr);
        if (rc != SQLITE_OK) {
            throw Error("sqlite prepare failed: " + conn.errmsg());
        }
    }

    Statement(Statement&& other) noexcept
        : conn_(other.conn_), stmt_(std::exchange(other.stmt_, nullptr)) {}
    Statement(const Statement&) = delete;
    Statement& operator=(const Statement&) = delete;
    Statement& operator=(Statement&&) = delete;
    ~Statement() { sqlite3_finalize(stmt_); }

    sqlite3_stmt* get() const { return stmt_; }

    /// Advances one row; true while a row is available, false at end.
    bool step() {
        int rc = sqlite3_step(stmt_);
        if (rc == SQLITE_ROW) return true;
        if (rc == SQLITE_DONE) return false;
        throw Error("sqlite step failed: " + conn_->errmsg());
    }

    int column_count() const { return sqlite3_column_count(stmt_); }
    int column_type(int i) const { return sqlite3_column_type(stmt_, i); }
    std::int64_t column_int64(int i) const { return sqlite3_column_int64(stmt_, i); }
    double column_double(int i) const { return sqlite3_column_double(stmt_, i); }

    std::string column_text(int i) const {
        const unsigned char* p = sqlite3_column_text(stmt_, i);
        if (!p) return {};
        int n = sqlite3_column_bytes(stmt_, i);
        return std::string(reinterpret_cast<const char*>(p), static_cast<std::size_t>(n));
    }

    std::string column_blob(int i) const {
        const void* p = sqlite3_column_blob(stmt_, i);
        if (!p) return {};
        int n = sqlite3_column_bytes(stmt_, i);
        return std::string(static_cast<const char*>(p), static_cast<std::size_t>(n));
    }

    bool column_is_null(int i) const { return column_type(i) == SQLITE_NULL; }

private:
    Connection* conn_;
    sqlite3_stmt* stmt_ = nullptr;
};

/// Double-quote an identifier for embedding in SQL text.
inline std::string quote_identifier(std::string_view name) {
    std::string out;
    out.reserve(name.size() + 2);
    out.push_back('"');
    for (char c : name) {
        if (c == '"') out.push_back('"');
        out.push_back(c);
    }
    out.push_back('"');
    return out;
}

/// Single-quote a text value as a SQL literal.
inline std::string quote_literal(std::string_view value) {
    std::string out;
    out.reserve(value.size() + 2);
    out.push_back('\'');
    for (char c : value) {
        if (c == '\'') out.push_back('\'');
        out.push_back(c);
    }
    out.push_back('\'');
    return out;
}

} // namespace sqlo1::db
