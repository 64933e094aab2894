#pragma once

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "sqlo1/errors.hpp"
#include "sqlo1/sqlite.hpp"

namespace sqlo1 {

enum class ColumnType { Text, Number, Date, Boolean, Other };

inline const char* column_type_name(ColumnType t) {
    switch (t) {
        case ColumnType::Text: return "TEXT";
        case ColumnType::Number: return "NUMBER";
        case ColumnType::Date: return "DATE";
        case ColumnType::Boolean: return "BOOLEAN";
        case ColumnType::Other: return "OTHER";
    }
    return "OTHER";
}

struct ColumnDef {
    std::string name;
    ColumnType type = ColumnType::Other;
    std::vector<std::string> sample_values; // rendered as SQL literals
};

struct ForeignKey {
    std::string column;
    std::string ref_table;
    std::string ref_column;
};

struct TableDef {
    std::string name;
    std::vector<ColumnDef> columns;
    std::vector<std::string> primary_key;
    std::vector<ForeignKey> foreign_keys;
};

struct DatabaseSchema {
    std::string db_id;
    std::vector<TableDef> tables;

    const TableDef* find_table(const std::string& name) const {
        auto same = [&](const TableDef& t) {
            return t.name.size() == name.size() &&
                   std::equal(t.name.begin(), t.name.end(), name.begin(),
                              [](char a, char b) {
                                  return std::tolower(static_cast<unsigned char>(a)) ==
                                         std::tolower(static_cast<unsigned char>(b));
                              });
        };
        auto it = std::find_if(tables.begin(), tables.end(), same);
        return it == tables.end() ? nullptr : &*it;
    }
};

namespace detail {

/// Maps a declared column type to the coarse bucket used in prompts.
inline ColumnType map_declared_type(std::string declared) {
    std::transform(declared.begin(), declared.end(), declared.begin(),
                   [](unsigned char c) { return static_cast<char>(std::toupper(c)); });
    auto has = [&](const char* s) { return declared.find(s) != std::string::npos; };
    if (declared.empty()) return ColumnType::Other;
    if (has("BOOL")) return ColumnType::Boolean;
    if (has("DATE") || has("TIME")) return ColumnType::Date;
    if (has("INT")) return ColumnType::Number;
    if (has("CHAR") || has("CLOB") || has("TEXT")) return ColumnType::Text;
    if (has("BLOB")) return ColumnType::Other;
    if (has("REAL") || has("FLOA") || has("DOUB") || has("NUM") || has("DEC")) {
        return ColumnType::Number;
    }
    return ColumnType::Other;
}

/// Canonical text for a REAL value: rounded to 1e-6, integral values
/// rendered without a fractional part, trailing zeros trimmed.
inline std::string canonical_real(double v) {
    if (std::isnan(v)) return "nan";
    if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
    double r = std::round(v * 1e6) / 1e6;
    if (r == 0.0) r = 0.0; // normalize -0
    if (r == std::floor(r) && std::fabs(r) < 1e15) {
        char buf[32];
        std::snprintf(buf, sizeof(buf), "%.0f", r);
        return buf;
    }
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.6f", r);
    std::string s(buf);
    while (!s.empty() && s.back() == '0') s.pop_back();
    if (!s.empty() && s.back() == '.') s.pop_back();
    return s;
}

inline std::string hex_blob(const std::string& bytes) {
    static const char* digits = "0123456789ABCDEF";
    std::string out = "X'";
    for (unsigned char b : bytes) {
        out.push_back(digits[b >> 4]);
        out.push_back(digits[b & 0x0F]);
    }
    out.push_back('\'');
    return out;
}

/// Renders a statement column as the literal a query author would type.
inline std::string render_sample(const db::Statement& stmt, int col) {
    switch (stmt.column_type(col)) {
        case SQLITE_INTEGER: return std::to_string(stmt.column_int64(col));
        case SQLITE_FLOAT: return canonical_real(stmt.column_double(col));
        case SQLITE_TEXT: return db::quote_literal(stmt.column_text(col));
        case SQLITE_BLOB: return hex_blob(stmt.column_blob(col));
        default: return "NULL";
    }
}

} // namespace detail

/// Reads the full schema of a SQLite database: tables sorted by name,
/// columns in declaration order, primary keys, foreign keys, and up to
/// samples_per_column distinct non-null sample values per column taken
/// in deterministic row order.
inline DatabaseSchema introspect_schema(const std::string& db_path,
                                        int samples_per_column = 3) {
    if (!std::filesystem::exists(db_path)) throw FileNotFoundError(db_path);
    db::Connection conn = db::Connection::open_readonly(db_path);

    DatabaseSchema schema;
    schema.db_id = std::filesystem::path(db_path).stem().string();

    std::vector<std::string> names;
    try {
        db::Statement master(conn,
                             "SELECT name FROM sqlite_master WHERE type='table' "
                             "AND name NOT LIKE 'sqlite_%' ORDER BY name");
        while (master.step()) names.push_back(master.column_text(0));
    } catch (const Error&) {
        if (conn.errcode() == SQLITE_NOTADB) throw NotADatabaseError(db_path);
        throw;
    }

    for (const std::string& name : names) {
        TableDef table;
        table.name = name;
        std::string quoted = db::quote_identifier(name);

        std::vector<std::pair<int, std::string>> pk_order;
        {
            db::Statement info(conn, "PRAGMA table_info(" + quoted + ")");
            while (info.step()) {
                ColumnDef col;
                col.name = info.column_text(1);
                col.type = detail::map_declared_type(info.column_text(2));
                int pk = static_cast<int>(info.column_int64(5));
                if (pk > 0) pk_order.emplace_back(pk, col.name);
                table.columns.push_back(std::move(col));
            }
        }
        std::sort(pk_order.begin(), pk_order.end());
        for (auto& [rank, col] : pk_order) table.primary_key.push_back(col);

        std::string order_by = "rowid";
        if (!table.primary_key.empty()) {
            order_by.clear();
            for (const std::string& pk : table.primary_key) {
                if (!order_by.empty()) order_by += ", ";
                order_by += db::quote_identifier(pk);
            }
        }

        for (ColumnDef& col : table.columns) {
            if (samples_per_column <= 0) break;
            std::string q = "SELECT " + db::quote_identifier(col.name) + " FROM " + quoted +
                            " WHERE " + db::quote_identifier(col.name) +
                            " IS NOT NULL ORDER BY " + order_by;
            db::Statement stmt(conn, q);
            while (stmt.step() &&
                   col.sample_values.size() < static_cast<std::size_t>(samples_per_column)) {
                std::string rendered = detail::render_sample(stmt, 0);
                if (std::find(col.sample_values.begin(), col.sample_values.end(), rendered) ==
                    col.sample_values.end()) {
                    col.sample_values.push_back(std::move(rendered));
                }
            }
        }

        {
            db::Statement fks(conn, "PRAGMA foreign_key_list(" + quoted + ")");
            while (fks.step()) {
                ForeignKey fk;
                fk.ref_table = fks.column_text(2);
                fk.column = fks.column_text(3);
                fk.ref_column = fks.column_is_null(4) ? std::string() : fks.column_text(4);
                table.foreign_keys.push_back(std::move(fk));
            }
        }

        schema.tables.push_back(std::move(table));
    }

    // Resolve implicit foreign-key targets and drop unresolvable edges.
    for (TableDef& table : schema.tables) {
        std::vector<ForeignKey> kept;
        for (ForeignKey& fk : table.foreign_keys) {
            const TableDef* ref = schema.find_table(fk.ref_table);
            if (!ref) continue;
            if (fk.ref_column.empty()) {
                if (ref->primary_key.empty()) continue;
                fk.ref_column = ref->primary_key.front();
            }
            kept.push_back(std::move(fk));
        }
        table.foreign_keys = std::move(kept);
    }
    return schema;
}

/// Renders the schema plus question into the fixed prompt layout that
/// seeds every search. The text always ends with the SQL cue line.
inline std::string serialize_context(const DatabaseSchema& schema,
                                     const std::string& question,
                                     const std::optional<std::string>& evidence = {}) {
    std::string out = "-- Database: " + schema.db_id + "\n";
    for (const TableDef& table : schema.tables) {
        out += "CREATE TABLE " + table.name + " (\n";
        std::vector<std::string> lines;
        for (const ColumnDef& col : table.columns) {
            lines.push_back("  " + col.name + " " + column_type_name(col.type));
        }
        if (!table.primary_key.empty()) {
            std::string pk = "  PRIMARY KEY (";
            for (std::size_t i = 0; i < table.primary_key.size(); ++i) {
                if (i) pk += ", ";
                pk += table.primary_key[i];
            }
            pk += ")";
            lines.push_back(std::move(pk));
        }
        for (const ForeignKey& fk : table.foreign_keys) {
            lines.push_back("  FOREIGN KEY (" + fk.column + ") REFERENCES " + fk.ref_table +
                            "(" + fk.ref_column + ")");
        }
        for (std::size_t i = 0; i < lines.size(); ++i) {
            out += lines[i];
            if (i + 1 < lines.size()) out += ",";
            out += "\n";
        }
        out += ");\n";
        for (const ColumnDef& col : table.columns) {
            if (col.sample_values.empty()) continue;
            out += "-- " + table.name + "." + col.name + " examples:";
            for (const std::string& v : col.sample_values) out += " " + v;
            out += "\n";
        }
        out += "\n";
    }
    if (evidence && !evidence->empty()) {
        out += "-- Evidence: " + *evidence + "\n";
    }
    out += "-- Question: " + question + "\n";
    out += "-- SQL:\n";
    return out;
}

inline void to_json(nlohmann::json& j, const ColumnDef& c) {
    j = {{"name", c.name},
         {"type", column_type_name(c.type)},
         {"sample_values", c.sample_values}};
}

inline void to_json(nlohmann::json& j, const ForeignKey& fk) {
    j = {{"column", fk.column}, {"ref_table", fk.ref_table}, {"ref_column", fk.ref_column}};
}

inline void to_json(nlohmann::json& j, const TableDef& t) {
    j = {{"name", t.name},
         {"columns", t.columns},
         {"primary_key", t.primary_key},
         {"foreign_keys", t.foreign_keys}};
}

inline void to_json(nlohmann::json& j, const DatabaseSchema& s) {
    j = {{"db_id", s.db_id}, {"tables", s.tables}};
}

} // namespace sqlo1
