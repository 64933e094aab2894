#pragma once

#include <algorithm>
#include <cctype>
#include <cstddef>
#include <set>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "sqlo1/errors.hpp"
#include "sqlo1/sqlite.hpp"

namespace sqlo1 {

// ---------------------------------------------------------------------------
// Tokenizer
// ---------------------------------------------------------------------------

enum class TokenKind { Keyword, Identifier, Literal, Operator, Punct };

struct SqlToken {
    std::string text;   // raw text as it appears in the input
    TokenKind kind;
    std::size_t offset; // byte offset of the first character
};

namespace detail {

inline const std::set<std::string>& sql_keywords() {
    static const std::set<std::string> kw = {
        "SELECT", "FROM", "WHERE", "GROUP", "BY", "HAVING", "ORDER", "LIMIT",
        "OFFSET", "UNION", "INTERSECT", "EXCEPT", "JOIN", "INNER", "LEFT",
        "RIGHT", "FULL", "OUTER", "CROSS", "NATURAL", "ON", "AND", "OR",
        "NOT", "IN", "IS", "NULL", "LIKE", "GLOB", "BETWEEN", "EXISTS",
        "CASE", "WHEN", "THEN", "ELSE", "END", "AS", "DISTINCT", "ALL",
        "ASC", "DESC", "CAST", "WITH", "RECURSIVE", "VALUES", "COLLATE",
        "ESCAPE", "USING",
    };
    return kw;
}

inline std::string to_upper(std::string_view s) {
    std::string out(s);
    std::transform(out.begin(), out.end(), out.begin(),
                   [](unsigned char c) { return static_cast<char>(std::toupper(c)); });
    return out;
}

inline bool is_word_start(char c) {
    return std::isalpha(static_cast<unsigned char>(c)) || c == '_';
}

inline bool is_word_char(char c) {
    return std::isalnum(static_cast<unsigned char>(c)) || c == '_';
}

} // namespace detail

/// Scans SQL text into tokens. In strict mode an unterminated string,
/// quoted identifier or block comment throws TokenizeError; in lenient
/// mode the open construct is consumed to end of input instead, so
/// mid-generation fragments can still be inspected.
inline std::vector<SqlToken> tokenize_sql(std::string_view sql, bool strict = true) {
    std::vector<SqlToken> tokens;
    std::size_t i = 0;
    const std::size_t n = sql.size();

    auto scan_quoted = [&](char quote, TokenKind kind, const char* label) {
        std::size_t start = i;
        ++i;
        while (i < n) {
            if (sql[i] == quote) {
                if (i + 1 < n && sql[i + 1] == quote) {
                    i += 2;
                    continue;
                }
                ++i;
                tokens.push_back({std::string(sql.substr(start, i - start)), kind, start});
                return;
            }
            ++i;
        }
        if (strict) throw TokenizeError(std::string("unterminated ") + label, start);
        tokens.push_back({std::string(sql.substr(start)), kind, start});
    };

    while (i < n) {
        char c = sql[i];
        if (std::isspace(static_cast<unsigned char>(c))) {
            ++i;
            continue;
        }
        if (c == '-' && i + 1 < n && sql[i + 1] == '-') {
            while (i < n && sql[i] != '\n') ++i;
            continue;
        }
        if (c == '/' && i + 1 < n && sql[i + 1] == '*') {
            std::size_t start = i;
            i += 2;
            while (i + 1 < n && !(sql[i] == '*' && sql[i + 1] == '/')) ++i;
            if (i + 1 >= n) {
                if (strict) throw TokenizeError("unterminated block comment", start);
                i = n;
            } else {
                i += 2;
            }
            continue;
        }
        if (c == '\'') {
            scan_quoted('\'', TokenKind::Literal, "string literal");
            continue;
        }
        if (c == '"') {
            scan_quoted('"', TokenKind::Identifier, "quoted identifier");
            continue;
        }
        if (c == '`') {
            scan_quoted('`', TokenKind::Identifier, "quoted identifier");
            continue;
        }
        if (c == '[') {
            std::size_t start = i;
            while (i < n && sql[i] != ']') ++i;
            if (i >= n) {
                if (strict) throw TokenizeError("unterminated bracket identifier", start);
            } else {
                ++i;
            }
            tokens.push_back({std::string(sql.substr(start, i - start)),
                              TokenKind::Identifier, start});
            continue;
        }
        if ((c == 'x' || c == 'X') && i + 1 < n && sql[i + 1] == '\'') {
            std::size_t start = i;
            ++i;
            scan_quoted('\'', TokenKind::Literal, "blob literal");
            tokens.back().offset = start;
            tokens.back().text = std::string(sql.substr(start, i - start));
            continue;
        }
        if (std::isdigit(static_cast<unsigned char>(c)) ||
            (c == '.' && i + 1 < n && std::isdigit(static_cast<unsigned char>(sql[i + 1])))) {
            std::size_t start = i;
            if (c == '0' && i + 1 < n && (sql[i + 1] == 'x' || sql[i + 1] == 'X')) {
                i += 2;
                while (i < n && std::isxdigit(static_cast<unsigned char>(sql[i]))) ++i;
            } else {
                while (i < n && std::isdigit(static_cast<unsigned char>(sql[i]))) ++i;
                if (i < n && sql[i] == '.') {
                    ++i;
                    while (i < n && std::isdigit(static_cast<unsigned char>(sql[i]))) ++i;
                }
                if (i < n && (sql[i] == 'e' || sql[i] == 'E')) {
                    std::size_t mark = i;
                    ++i;
                    if (i < n && (sql[i] == '+' || sql[i] == '-')) ++i;
                    if (i < n && std::isdigit(static_cast<unsigned char>(sql[i]))) {
                        while (i < n && std::isdigit(static_cast<unsigned char>(sql[i]))) ++i;
                    } else {
                        i = mark;
                    }
                }
            }
            tokens.push_back({std::string(sql.substr(start, i - start)),
                              TokenKind::Literal, start});
            continue;
        }
        if (detail::is_word_start(c)) {
            std::size_t start = i;
            while (i < n && detail::is_word_char(sql[i])) ++i;
            std::string word(sql.substr(start, i - start));
            TokenKind kind = detail::sql_keywords().count(detail::to_upper(word))
                                 ? TokenKind::Keyword
                                 : TokenKind::Identifier;
            tokens.push_back({std::move(word), kind, start});
            continue;
        }
        if (c == '(' || c == ')' || c == ',' || c == ';' || c == '.') {
            tokens.push_back({std::string(1, c), TokenKind::Punct, i});
            ++i;
            continue;
        }
        {
            std::size_t start = i;
            static const char* two_char[] = {"||", "<=", ">=", "<>", "!=", "==", "<<", ">>"};
            std::string_view rest = sql.substr(i);
            std::string op(1, c);
            for (const char* t : two_char) {
                if (rest.size() >= 2 && rest.substr(0, 2) == t) {
                    op = t;
                    break;
                }
            }
            i += op.size();
            tokens.push_back({std::move(op), TokenKind::Operator, start});
        }
    }
    return tokens;
}

// ---------------------------------------------------------------------------
// Clause boundaries
// ---------------------------------------------------------------------------

/// The keyword set that opens a new fragment.
inline const std::vector<std::string>& default_boundaries() {
    static const std::vector<std::string> b = {
        "SELECT", "FROM", "WHERE", "GROUP", "HAVING", "ORDER", "LIMIT",
        "UNION", "INTERSECT", "EXCEPT", "JOIN", "AND", "OR", "ON",
    };
    return b;
}

namespace detail {

inline bool is_boundary(const SqlToken& tok, const std::vector<std::string>& boundaries) {
    if (tok.kind != TokenKind::Keyword) return false;
    std::string up = to_upper(tok.text);
    return std::find(boundaries.begin(), boundaries.end(), up) != boundaries.end();
}

} // namespace detail

/// Byte offsets where a boundary keyword starts a new fragment, in
/// ascending order. Offset zero is never reported: the text up to the
/// first interior boundary is the first fragment. Keywords inside
/// string literals or comments never count because they are not
/// keyword tokens.
inline std::vector<std::size_t> segment_at_boundaries(
    std::string_view sql,
    const std::vector<std::string>& boundaries = default_boundaries()) {
    std::vector<std::size_t> offsets;
    for (const SqlToken& tok : tokenize_sql(sql, true)) {
        if (tok.offset != 0 && detail::is_boundary(tok, boundaries)) {
            offsets.push_back(tok.offset);
        }
    }
    return offsets;
}

/// One (prefix, remainder) split of a gold query at a clause boundary.
struct PsgSplit {
    std::string prefix;    // gold text before the boundary keyword
    std::string remainder; // gold text from the boundary keyword on
    std::size_t cut;       // byte offset of the cut
};

/// All prefix/remainder splits of a query, one per interior boundary.
/// Concatenating prefix and remainder always reproduces the input.
inline std::vector<PsgSplit> truncate_for_psg(
    std::string_view sql,
    const std::vector<std::string>& boundaries = default_boundaries()) {
    std::vector<PsgSplit> splits;
    for (std::size_t cut : segment_at_boundaries(sql, boundaries)) {
        splits.push_back({std::string(sql.substr(0, cut)), std::string(sql.substr(cut)), cut});
    }
    return splits;
}

/// Result of clipping a raw model continuation to a single fragment.
struct ClippedFragment {
    std::string text;   // at most one fragment of generated SQL
    bool ends_sequence; // true when a statement terminator was kept
};

/// Cuts raw generated text down to one fragment: everything up to the
/// second boundary keyword. A statement terminator before that point
/// is kept and flags the end of the sequence. Lenient tokenization is
/// used because generations can stop mid-string. Clipping an already
/// clipped fragment returns it unchanged.
inline ClippedFragment clip_continuation(
    std::string_view raw,
    const std::vector<std::string>& boundaries = default_boundaries()) {
    std::vector<SqlToken> tokens = tokenize_sql(raw, false);

    std::size_t boundary_count = 0;
    std::size_t second_boundary = raw.size();
    std::size_t semicolon_end = std::string_view::npos;
    for (const SqlToken& tok : tokens) {
        if (detail::is_boundary(tok, boundaries)) {
            ++boundary_count;
            if (boundary_count == 2) {
                second_boundary = tok.offset;
                break;
            }
        } else if (tok.kind == TokenKind::Punct && tok.text == ";" &&
                   semicolon_end == std::string_view::npos) {
            semicolon_end = tok.offset + 1;
        }
    }

    if (semicolon_end != std::string_view::npos && semicolon_end <= second_boundary) {
        return {std::string(raw.substr(0, semicolon_end)), true};
    }
    return {std::string(raw.substr(0, second_boundary)), false};
}

// ---------------------------------------------------------------------------
// Completeness
// ---------------------------------------------------------------------------

namespace detail {

/// Errors sqlite reports only after a statement parsed in full.
inline bool is_post_parse_error(const std::string& msg) {
    static const char* prefixes[] = {
        "no such table",
        "no such column",
        "no such function",
        "no such collation sequence",
        "ambiguous column name",
    };
    for (const char* p : prefixes) {
        if (msg.rfind(p, 0) == 0) return true;
    }
    return false;
}

} // namespace detail

/// True when the text parses as exactly one complete SELECT statement
/// (a WITH-prefixed select counts). Name-resolution failures still
/// count as complete: the shape is closed even if the tables are
/// unknown to an empty database. Never throws.
inline bool is_complete_sql(std::string_view sql) noexcept {
    try {
        std::vector<SqlToken> tokens = tokenize_sql(sql, false);
        if (tokens.empty()) return false;
        std::string first = detail::to_upper(tokens.front().text);
        if (tokens.front().kind != TokenKind::Keyword ||
            (first != "SELECT" && first != "WITH")) {
            return false;
        }

        db::Connection conn = db::Connection::open_memory();
        std::string text(sql);
        sqlite3_stmt* stmt = nullptr;
        const char* tail = nullptr;
        int rc = sqlite3_prepare_v2(conn.get(), text.c_str(), -1, &stmt, &tail);
        if (rc != SQLITE_OK) {
            bool complete = detail::is_post_parse_error(conn.errmsg());
            sqlite3_finalize(stmt);
            return complete;
        }
        bool complete = stmt != nullptr;
        sqlite3_finalize(stmt);
        if (!complete) return false;
        for (const char* p = tail; p && *p; ++p) {
            if (!std::isspace(static_cast<unsigned char>(*p))) return false;
        }
        return true;
    } catch (...) {
        return false;
    }
}

// ---------------------------------------------------------------------------
// Token-set similarity
// ---------------------------------------------------------------------------

/// Distinct, case-folded, non-punctuation token texts of a fragment.
inline std::set<std::string> fragment_token_set(std::string_view fragment) {
    std::set<std::string> out;
    for (const SqlToken& tok : tokenize_sql(fragment, false)) {
        if (tok.kind == TokenKind::Punct) continue;
        out.insert(detail::to_upper(tok.text));
    }
    return out;
}

/// Jaccard similarity of two token sets; empty-vs-empty is 1.
inline double jaccard_similarity(const std::set<std::string>& a,
                                 const std::set<std::string>& b) {
    if (a.empty() && b.empty()) return 1.0;
    std::size_t inter = 0;
    for (const std::string& t : a) inter += b.count(t);
    std::size_t uni = a.size() + b.size() - inter;
    return static_cast<double>(inter) / static_cast<double>(uni);
}

} // namespace sqlo1
