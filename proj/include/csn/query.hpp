#pragma once

// Advanced filter language over metadata fields.
//
//   query := or
//   or    := and ("OR" and)*
//   and   := term ("AND" term)*
//   term  := "(" or ")" | field op literal
//
// Keywords are uppercase only. Fields and literals are bare words or
// double-quoted strings (backslash escapes the next character). Built-in
// operators: == != > >= < <= and ~ (case-insensitive substring); more can be
// registered on an OperatorTable. Blank input is the match-all query.

#include <cstddef>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "csn/bitmask.hpp"
#include "csn/error.hpp"

namespace csn {
struct MetadataTable;
}

namespace csn::query {

enum class TokenKind { LParen, RParen, And, Or, Operator, String, Word, End };

struct Token {
    TokenKind kind;
    std::string text;
    std::size_t position;
    bool operator==(const Token&) const = default;
};

class ParseError : public Error {
public:
    ParseError(std::size_t position, std::string expected, std::string found);

    std::size_t position() const { return position_; }
    const std::string& expected() const { return expected_; }
    const std::string& found() const { return found_; }

private:
    std::size_t position_;
    std::string expected_;
    std::string found_;
};

class UnknownFieldError : public Error {
public:
    explicit UnknownFieldError(std::vector<std::string> errors);
    const std::vector<std::string>& errors() const { return errors_; }

private:
    std::vector<std::string> errors_;
};

/// Compares one metadata value against a literal.
using Predicate = std::function<bool(std::string_view value, std::string_view literal)>;

/// Registration point for comparison operators. Symbols must be made of
/// punctuation; every character used by a symbol becomes a word delimiter.
class OperatorTable {
public:
    struct Entry {
        std::string symbol;
        std::string name;
        Predicate predicate;
    };

    void add(std::string symbol, std::string name, Predicate predicate);
    const Entry* find(std::string_view symbol) const;
    /// Longest registered symbol that prefixes `text`.
    const Entry* match_prefix(std::string_view text) const;
    bool is_operator_char(char c) const;
    std::span<const Entry> entries() const { return entries_; }

    /// == != > >= < <= ~
    static const OperatorTable& builtin();

private:
    std::vector<Entry> entries_;
};

struct Comparison {
    std::string field;
    std::string op;
    std::string literal;
    bool operator==(const Comparison&) const = default;
};

struct Ast {
    enum class Kind { Or, And, Compare };
    Kind kind = Kind::Compare;
    std::vector<Ast> children;  // Or/And: at least two
    Comparison cmp;             // Compare only

    static Ast compare(std::string field, std::string op, std::string literal);
    static Ast any_of(std::vector<Ast> children);
    static Ast all_of(std::vector<Ast> children);
    bool operator==(const Ast&) const = default;
};

/// Parsed query; an empty `ast` is the match-all query.
struct Query {
    std::optional<Ast> ast;
    bool match_all() const { return !ast.has_value(); }
    bool operator==(const Query&) const = default;
};

std::vector<Token> tokenize(std::string_view text, const OperatorTable& ops = OperatorTable::builtin());
Query parse(std::span<const Token> tokens);
Query parse(std::string_view text, const OperatorTable& ops = OperatorTable::builtin());

/// Canonical text that reparses to a structurally identical tree.
std::string to_string(const Ast& ast);
std::string to_string(const Query& query);

/// One message per comparison whose field is unknown, in left-to-right order.
std::vector<std::string> validate_fields(const Ast& ast, std::span<const std::string> fields);
std::vector<std::string> validate_fields(const Query& query, std::span<const std::string> fields);

/// Throws UnknownFieldError before touching any row if a field is unknown,
/// and InvalidArgument for an operator missing from `ops`.
SelectionMask evaluate(const Query& query, const MetadataTable& table, std::size_t object_count,
                       const OperatorTable& ops = OperatorTable::builtin());

/// Drop-down selections compile to field == v1 OR field == v2 ...
Query selection_query(std::string_view field, std::span<const std::string> values);

}  // namespace csn::query
