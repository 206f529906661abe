#include <doctest.h>

#include <cctype>
#include <cmath>
#include <cstdlib>
#include <random>
#include <string>
#include <vector>

#include "csn/bundle.hpp"
#include "csn/query.hpp"
#include "oracles.hpp"

using namespace csn;
using namespace csn::query;
using namespace csn::testing::oracle;

namespace {

MetadataTable make_table(std::vector<std::string> fields, std::vector<std::vector<std::string>> columns) {
    MetadataTable t;
    t.fields = std::move(fields);
    t.columns = std::move(columns);
    return t;
}

std::vector<bool> run(const std::string& q, const MetadataTable& t) {
    return evaluate(parse(q), t, t.row_count()).to_bools();
}

ParseError parse_error(const std::string& q) {
    try {
        parse(q);
    } catch (const ParseError& e) {
        return e;
    }
    FAIL("expected a ParseError for: " << q);
    return ParseError(0, "", "");
}

}  // namespace

TEST_CASE("tokenize examples") {
    auto toks = tokenize("style == \"Cubism\"");
    REQUIRE(toks.size() == 4);
    CHECK(toks[0] == Token{TokenKind::Word, "style", 0});
    CHECK(toks[1] == Token{TokenKind::Operator, "==", 6});
    CHECK(toks[2] == Token{TokenKind::String, "Cubism", 9});
    CHECK(toks[3].kind == TokenKind::End);

    toks = tokenize("year >= 1900");
    CHECK(toks[1].text == ">=");
    CHECK(toks[2] == Token{TokenKind::Word, "1900", 8});

    toks = tokenize("a==\"x y\"ANDb==\"z\"");
    REQUIRE(toks.size() == 7);
    CHECK(toks[3] == Token{TokenKind::Word, "ANDb", 8});

    toks = tokenize("x == \"say \\\"hi\\\"\" and OR AND");
    CHECK(toks[2].text == "say \"hi\"");
    CHECK(toks[3].kind == TokenKind::Word);
    CHECK(toks[4].kind == TokenKind::Or);
    CHECK(toks[5].kind == TokenKind::And);

    toks = tokenize("a<b");
    CHECK(toks[1].text == "<");
    toks = tokenize("(a~b)");
    CHECK(toks.front().kind == TokenKind::LParen);
    CHECK(toks[2].text == "~");
    CHECK(toks[4].kind == TokenKind::RParen);
}

TEST_CASE("unterminated quote reports the opening quote") {
    const auto e = parse_error("title ~ \"abc");
    CHECK(e.position() == 8);
    CHECK_THROWS_AS(tokenize("  \"x"), ParseError);
}

TEST_CASE("AND binds tighter than OR") {
    const auto a1 = Ast::compare("a", "==", "1");
    const auto a2 = Ast::compare("a", "==", "2");
    const auto bx = Ast::compare("b", "==", "x");
    CHECK(parse("a == \"1\" OR a == \"2\" AND b == \"x\"").ast == Ast::any_of({a1, Ast::all_of({a2, bx})}));
    CHECK(parse("(a == \"1\" OR a == \"2\") AND b == \"x\"").ast == Ast::all_of({Ast::any_of({a1, a2}), bx}));
    CHECK(parse("a == 1 AND b == x AND a == 2").ast == Ast::all_of({a1, bx, a2}));
    CHECK(parse("((a == 1))").ast == a1);
}

TEST_CASE("blank input is the match-all query") {
    CHECK(parse("").match_all());
    CHECK(parse("   \t").match_all());
    const auto t = make_table({"style"}, {{"a", "b"}});
    CHECK(run("", t) == std::vector<bool>{true, true});
    CHECK(to_string(parse("")) == "");
}

TEST_CASE("malformed queries report position, expectation and found token") {
    for (const auto& c : malformed_queries()) {
        CAPTURE(c.text);
        const auto e = parse_error(c.text);
        CHECK(e.position() == c.position);
        CHECK(e.expected() == c.expected);
        CHECK(e.found() == c.found);
        CHECK(e.position() <= c.text.size() + 1);
    }
}

TEST_CASE("evaluate examples") {
    const auto styles = make_table({"style"}, {{"Cubism", "Dada", "Cubism"}});
    CHECK(run("style == \"Cubism\"", styles) == std::vector<bool>{true, false, true});
    CHECK(run("style != \"Cubism\"", styles) == std::vector<bool>{false, true, false});
    CHECK(run("style ~ \"CUB\"", styles) == std::vector<bool>{true, false, true});
    CHECK(run("style == \"cubism\"", styles) == std::vector<bool>{false, false, false});

    const auto years = make_table({"year"}, {{"1899", "1920", "n/a"}});
    CHECK(run("year >= 1900", years) == std::vector<bool>{false, true, false});
    CHECK(run("year < 1900", years) == std::vector<bool>{true, false, false});
    CHECK(run("year <= \"abc\"", years) == std::vector<bool>{false, false, false});

    const auto padded = make_table({"v"}, {{" x ", "x", "", "y"}});
    CHECK(run("v == \"x\"", padded) == std::vector<bool>{true, true, false, false});
    // Missing values never satisfy != so it is the complement of == on non-missing rows.
    CHECK(run("v != \"x\"", padded) == std::vector<bool>{false, false, false, true});
}

TEST_CASE("validate_fields reports unknown fields left to right") {
    const std::vector<std::string> fields = {"style", "year"};
    CHECK(validate_fields(parse("style == x AND year > 3"), fields).empty());
    const auto one = validate_fields(parse("genre == x"), fields);
    REQUIRE(one.size() == 1);
    CHECK(one[0].find("genre") != std::string::npos);
    const auto two = validate_fields(parse("(style == a OR zeta == b) AND (alpha == c OR year > 1)"), fields);
    REQUIRE(two.size() == 2);
    CHECK(two[0].find("zeta") != std::string::npos);
    CHECK(two[1].find("alpha") != std::string::npos);

    const auto t = make_table({"style"}, {{"a"}});
    CHECK_THROWS_AS(evaluate(parse("genre == x"), t, 1), UnknownFieldError);
    try {
        evaluate(parse("genre == x"), t, 1);
    } catch (const UnknownFieldError& e) {
        CHECK(std::string(e.what()).find("style") != std::string::npos);  // lists valid fields
    }
}

TEST_CASE("selection queries compile to OR of equalities") {
    const std::vector<std::string> picks = {"Cubism", "Pop Art"};
    const auto q = selection_query("style", picks);
    CHECK(q.ast == Ast::any_of({Ast::compare("style", "==", "Cubism"), Ast::compare("style", "==", "Pop Art")}));
    const std::vector<std::string> single = {"Dada"};
    CHECK(selection_query("style", single).ast == Ast::compare("style", "==", "Dada"));
    CHECK(selection_query("style", {}).match_all());
}

TEST_CASE("custom operators register through the operator table") {
    OperatorTable ops = OperatorTable::builtin();
    ops.add("^=", "STARTS", [](std::string_view v, std::string_view l) { return v.substr(0, l.size()) == l; });
    const auto t = make_table({"name"}, {{"alpha", "beta", "alps"}});
    CHECK(evaluate(parse("name ^= al", ops), t, 3, ops).to_bools() == std::vector<bool>{true, false, true});
    CHECK(evaluate(parse("name ^= al OR name == beta", ops), t, 3, ops).count() == 3);
    CHECK_THROWS_AS(ops.add("ab", "BAD", {}), InvalidArgument);
    CHECK_THROWS_AS(evaluate(parse("name ^= al", ops), t, 3), InvalidArgument);
}

TEST_CASE("generated queries: evaluator equals the naive interpreter") {
    std::mt19937_64 g(20240601);
    const auto table = random_table(g, 1000);
    std::size_t nontrivial = 0;
    for (int q = 0; q < 1000; ++q) {
        const auto tree = random_tree(g, 3);
        const auto text = render(tree, g);
        CAPTURE(text);
        const auto mask = evaluate(parse(text), table, table.row_count());
        std::size_t mismatches = 0;
        for (std::size_t r = 0; r < table.row_count(); ++r)
            if (mask.test(r) != naive_eval(tree, table, r)) ++mismatches;
        CHECK(mismatches == 0);
        if (mask.count() > 0 && mask.count() < table.row_count()) ++nontrivial;
    }
    CHECK(nontrivial > 300);
}

TEST_CASE("pretty-printing reparses to the same tree") {
    std::mt19937_64 g(77);
    for (int q = 0; q < 1000; ++q) {
        const auto text = render(random_tree(g, 4), g);
        const auto parsed = parse(text);
        const auto printed = to_string(parsed);
        CAPTURE(text);
        CAPTURE(printed);
        CHECK(parse(printed) == parsed);
        CHECK(to_string(parse(printed)) == printed);
    }
    CHECK(to_string(parse("a == 1 OR b == 2 AND c ~ x")) == "a == \"1\" OR (b == \"2\" AND c ~ \"x\")");
}

TEST_CASE("disjunction and precedence spot checks on masks") {
    std::mt19937_64 g(5);
    const auto t = random_table(g, 1000);
    const auto n = t.row_count();
    const std::vector<std::string> atoms = {"style == Cubism", "year >= 1900", "title ~ red", "score < 0",
                                            "note != Dada"};
    for (const auto& p : atoms)
        for (const auto& q : atoms) {
            const auto both = evaluate(parse(p + " OR " + q), t, n);
            CHECK(both == (evaluate(parse(p), t, n) | evaluate(parse(q), t, n)));
            const auto conj = evaluate(parse(p + " AND " + q), t, n);
            CHECK(conj == (evaluate(parse(p), t, n) & evaluate(parse(q), t, n)));
            for (const auto& r : atoms)
                CHECK(evaluate(parse(p + " OR " + q + " AND " + r), t, n) ==
                      evaluate(parse(p + " OR (" + q + " AND " + r + ")"), t, n));
        }
}
