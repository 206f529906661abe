#include "csn/query.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>

#include "csn/bundle.hpp"

namespace csn::query {

ParseError::ParseError(std::size_t position, std::string expected, std::string found)
    : Error("at offset " + std::to_string(position) + ": expected " + expected + ", found " + found),
      position_(position),
      expected_(std::move(expected)),
      found_(std::move(found)) {}

namespace {

std::string join_errors(const std::vector<std::string>& errors) {
    std::string out;
    for (const auto& e : errors) {
        if (!out.empty()) out += "; ";
        out += e;
    }
    return out;
}

std::string_view trim(std::string_view s) {
    const auto first = s.find_first_not_of(" \t\r\n");
    if (first == std::string_view::npos) return {};
    const auto last = s.find_last_not_of(" \t\r\n");
    return s.substr(first, last - first + 1);
}

std::optional<double> parse_number(std::string_view s) {
    s = trim(s);
    if (!s.empty() && s.front() == '+') s.remove_prefix(1);
    if (s.empty()) return std::nullopt;
    double v = 0.0;
    const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc() || ptr != s.data() + s.size() || !std::isfinite(v)) return std::nullopt;
    return v;
}

char ascii_lower(char c) { return (c >= 'A' && c <= 'Z') ? static_cast<char>(c - 'A' + 'a') : c; }

bool contains_ci(std::string_view haystack, std::string_view needle) {
    const auto it = std::search(haystack.begin(), haystack.end(), needle.begin(), needle.end(),
                                [](char a, char b) { return ascii_lower(a) == ascii_lower(b); });
    return it != haystack.end() || needle.empty();
}

template <typename Cmp>
Predicate numeric(Cmp cmp) {
    return [cmp](std::string_view value, std::string_view literal) {
        const auto a = parse_number(value);
        const auto b = parse_number(literal);
        return a && b && cmp(*a, *b);
    };
}

OperatorTable make_builtin() {
    OperatorTable t;
    t.add("==", "EQ", [](std::string_view v, std::string_view l) { return trim(v) == trim(l); });
    t.add("!=", "NE", [](std::string_view v, std::string_view l) {
        const auto tv = trim(v);
        return !tv.empty() && tv != trim(l);
    });
    t.add(">=", "GE", numeric(std::greater_equal<double>()));
    t.add("<=", "LE", numeric(std::less_equal<double>()));
    t.add(">", "GT", numeric(std::greater<double>()));
    t.add("<", "LT", numeric(std::less<double>()));
    t.add("~", "CONTAINS", [](std::string_view v, std::string_view l) { return contains_ci(v, l); });
    return t;
}

bool is_space(char c) { return c == ' ' || c == '\t' || c == '\r' || c == '\n'; }

}  // namespace

UnknownFieldError::UnknownFieldError(std::vector<std::string> errors)
    : Error(join_errors(errors)), errors_(std::move(errors)) {}

void OperatorTable::add(std::string symbol, std::string name, Predicate predicate) {
    if (symbol.empty()) throw InvalidArgument("operator symbol must be non-empty");
    for (char c : symbol) {
        const bool alnum = (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z') || (c >= '0' && c <= '9');
        if (alnum || is_space(c) || c == '"' || c == '(' || c == ')' || c == '\\' || c == '_')
            throw InvalidArgument("operator symbol '" + symbol + "' must consist of punctuation");
    }
    for (auto& e : entries_) {
        if (e.symbol == symbol) {
            e = {std::move(symbol), std::move(name), std::move(predicate)};
            return;
        }
    }
    entries_.push_back({std::move(symbol), std::move(name), std::move(predicate)});
}

const OperatorTable::Entry* OperatorTable::find(std::string_view symbol) const {
    for (const auto& e : entries_)
        if (e.symbol == symbol) return &e;
    return nullptr;
}

const OperatorTable::Entry* OperatorTable::match_prefix(std::string_view text) const {
    const Entry* best = nullptr;
    for (const auto& e : entries_)
        if (text.starts_with(e.symbol) && (best == nullptr || e.symbol.size() > best->symbol.size())) best = &e;
    return best;
}

bool OperatorTable::is_operator_char(char c) const {
    for (const auto& e : entries_)
        if (e.symbol.find(c) != std::string::npos) return true;
    return false;
}

const OperatorTable& OperatorTable::builtin() {
    static const OperatorTable table = make_builtin();
    return table;
}

Ast Ast::compare(std::string field, std::string op, std::string literal) {
    Ast a;
    a.kind = Kind::Compare;
    a.cmp = {std::move(field), std::move(op), std::move(literal)};
    return a;
}

Ast Ast::any_of(std::vector<Ast> children) {
    Ast a;
    a.kind = Kind::Or;
    a.children = std::move(children);
    return a;
}

Ast Ast::all_of(std::vector<Ast> children) {
    Ast a;
    a.kind = Kind::And;
    a.children = std::move(children);
    return a;
}

std::vector<Token> tokenize(std::string_view text, const OperatorTable& ops) {
    std::vector<Token> tokens;
    std::size_t i = 0;
    while (i < text.size()) {
        const char c = text[i];
        if (is_space(c)) {
            ++i;
            continue;
        }
        if (c == '(' || c == ')') {
            tokens.push_back({c == '(' ? TokenKind::LParen : TokenKind::RParen, std::string(1, c), i});
            ++i;
            continue;
        }
        if (c == '"') {
            const std::size_t start = i++;
            std::string value;
            bool closed = false;
            while (i < text.size()) {
                if (text[i] == '\\' && i + 1 < text.size()) {
                    value.push_back(text[i + 1]);
                    i += 2;
                } else if (text[i] == '"') {
                    ++i;
                    closed = true;
                    break;
                } else {
                    value.push_back(text[i++]);
                }
            }
            if (!closed) throw ParseError(start, "closing quote", "end of input");
            tokens.push_back({TokenKind::String, std::move(value), start});
            continue;
        }
        if (ops.is_operator_char(c)) {
            const auto* entry = ops.match_prefix(text.substr(i));
            if (entry == nullptr) throw ParseError(i, "operator", std::string("'") + c + "'");
            tokens.push_back({TokenKind::Operator, entry->symbol, i});
            i += entry->symbol.size();
            continue;
        }
        const std::size_t start = i;
        while (i < text.size() && !is_space(text[i]) && text[i] != '(' && text[i] != ')' && text[i] != '"' &&
               !ops.is_operator_char(text[i]))
            ++i;
        std::string word(text.substr(start, i - start));
        TokenKind kind = TokenKind::Word;
        if (word == "AND") kind = TokenKind::And;
        if (word == "OR") kind = TokenKind::Or;
        tokens.push_back({kind, std::move(word), start});
    }
    tokens.push_back({TokenKind::End, "", text.size()});
    return tokens;
}

namespace {

class Parser {
public:
    explicit Parser(std::span<const Token> tokens) : tokens_(tokens) {
        if (tokens_.empty() || tokens_.back().kind != TokenKind::End)
            throw InvalidArgument("token list must end with an End token");
    }

    Query run() {
        if (peek().kind == TokenKind::End) return {};
        Ast ast = parse_or();
        if (peek().kind != TokenKind::End) fail("AND, OR or end of input");
        return {std::move(ast)};
    }

private:
    const Token& peek() const { return tokens_[pos_]; }
    const Token& advance() { return tokens_[pos_++]; }

    [[noreturn]] void fail(const std::string& expected) const {
        const auto& t = peek();
        throw ParseError(t.position, expected, t.kind == TokenKind::End ? "end of input" : "'" + t.text + "'");
    }

    Ast parse_or() {
        std::vector<Ast> children;
        children.push_back(parse_and());
        while (peek().kind == TokenKind::Or) {
            advance();
            children.push_back(parse_and());
        }
        return children.size() == 1 ? std::move(children.front()) : Ast::any_of(std::move(children));
    }

    Ast parse_and() {
        std::vector<Ast> children;
        children.push_back(parse_term());
        while (peek().kind == TokenKind::And) {
            advance();
            children.push_back(parse_term());
        }
        return children.size() == 1 ? std::move(children.front()) : Ast::all_of(std::move(children));
    }

    Ast parse_term() {
        if (peek().kind == TokenKind::LParen) {
            advance();
            Ast inner = parse_or();
            if (peek().kind != TokenKind::RParen) fail("')'");
            advance();
            return inner;
        }
        if (peek().kind != TokenKind::Word && peek().kind != TokenKind::String) fail("field or '('");
        std::string field = advance().text;
        if (peek().kind != TokenKind::Operator) fail("operator");
        std::string op = advance().text;
        if (peek().kind != TokenKind::Word && peek().kind != TokenKind::String) fail("literal");
        std::string literal = advance().text;
        return Ast::compare(std::move(field), std::move(op), std::move(literal));
    }

    std::span<const Token> tokens_;
    std::size_t pos_ = 0;
};

std::string quote(std::string_view s) {
    std::string out = "\"";
    for (char c : s) {
        if (c == '"' || c == '\\') out.push_back('\\');
        out.push_back(c);
    }
    out.push_back('"');
    return out;
}

bool is_plain_word(std::string_view s) {
    if (s.empty() || s == "AND" || s == "OR") return false;
    const auto& ops = OperatorTable::builtin();
    return std::none_of(s.begin(), s.end(), [&](char c) {
        return is_space(c) || c == '(' || c == ')' || c == '"' || c == '\\' || ops.is_operator_char(c);
    });
}

void print(const Ast& ast, std::string& out, bool nested) {
    if (ast.kind == Ast::Kind::Compare) {
        out += is_plain_word(ast.cmp.field) ? ast.cmp.field : quote(ast.cmp.field);
        out += ' ';
        out += ast.cmp.op;
        out += ' ';
        out += quote(ast.cmp.literal);
        return;
    }
    if (nested) out += '(';
    const char* sep = ast.kind == Ast::Kind::And ? " AND " : " OR ";
    for (std::size_t i = 0; i < ast.children.size(); ++i) {
        if (i > 0) out += sep;
        print(ast.children[i], out, true);
    }
    if (nested) out += ')';
}

void collect_unknown(const Ast& ast, std::span<const std::string> fields, std::vector<std::string>& errors) {
    if (ast.kind == Ast::Kind::Compare) {
        if (std::find(fields.begin(), fields.end(), ast.cmp.field) == fields.end()) {
            std::string msg = "unknown field '" + ast.cmp.field + "' (valid fields:";
            for (std::size_t i = 0; i < fields.size(); ++i) msg += (i == 0 ? " " : ", ") + fields[i];
            errors.push_back(msg + ")");
        }
        return;
    }
    for (const auto& c : ast.children) collect_unknown(c, fields, errors);
}

struct Compiled {
    Ast::Kind kind;
    std::vector<Compiled> children;
    const std::vector<std::string>* column = nullptr;
    const Predicate* predicate = nullptr;
    std::string literal;
};

Compiled compile(const Ast& ast, const MetadataTable& table, const OperatorTable& ops) {
    Compiled c{ast.kind, {}, nullptr, nullptr, {}};
    if (ast.kind == Ast::Kind::Compare) {
        c.column = &table.columns[*table.field_index(ast.cmp.field)];
        const auto* entry = ops.find(ast.cmp.op);
        if (entry == nullptr) throw InvalidArgument("unknown operator '" + ast.cmp.op + "'");
        c.predicate = &entry->predicate;
        c.literal = ast.cmp.literal;
        return c;
    }
    for (const auto& child : ast.children) c.children.push_back(compile(child, table, ops));
    return c;
}

bool matches(const Compiled& c, std::size_t row) {
    switch (c.kind) {
        case Ast::Kind::Compare: return (*c.predicate)((*c.column)[row], c.literal);
        case Ast::Kind::And:
            for (const auto& child : c.children)
                if (!matches(child, row)) return false;
            return true;
        case Ast::Kind::Or:
            for (const auto& child : c.children)
                if (matches(child, row)) return true;
            return false;
    }
    return false;
}

}  // namespace

Query parse(std::span<const Token> tokens) { return Parser(tokens).run(); }

Query parse(std::string_view text, const OperatorTable& ops) {
    const auto tokens = tokenize(text, ops);
    return parse(tokens);
}

std::string to_string(const Ast& ast) {
    std::string out;
    print(ast, out, false);
    return out;
}

std::string to_string(const Query& query) { return query.ast ? to_string(*query.ast) : std::string(); }

std::vector<std::string> validate_fields(const Ast& ast, std::span<const std::string> fields) {
    std::vector<std::string> errors;
    collect_unknown(ast, fields, errors);
    return errors;
}

std::vector<std::string> validate_fields(const Query& query, std::span<const std::string> fields) {
    return query.ast ? validate_fields(*query.ast, fields) : std::vector<std::string>{};
}

SelectionMask evaluate(const Query& query, const MetadataTable& table, std::size_t object_count,
                       const OperatorTable& ops) {
    SelectionMask mask(object_count, true);
    if (query.match_all()) return mask;
    if (auto errors = validate_fields(query, table.fields); !errors.empty()) throw UnknownFieldError(std::move(errors));
    if (table.row_count() != object_count)
        throw InvalidArgument("metadata has " + std::to_string(table.row_count()) + " rows, expected " +
                              std::to_string(object_count));
    const auto compiled = compile(*query.ast, table, ops);
    for (std::size_t row = 0; row < object_count; ++row)
        if (!matches(compiled, row)) mask.set(row, false);
    return mask;
}

Query selection_query(std::string_view field, std::span<const std::string> values) {
    if (values.empty()) return {};
    std::vector<Ast> children;
    for (const auto& v : values) children.push_back(Ast::compare(std::string(field), "==", v));
    if (children.size() == 1) return {std::move(children.front())};
    return {Ast::any_of(std::move(children))};
}

}  // namespace csn::query
