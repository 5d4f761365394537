#include "qbsde/gendsl.hpp"

#include <doctest.h>

#include <cmath>
#include <random>
#include <vector>

using namespace qbsde;

namespace {

const char* const kRemark22 = "norm2(z1)*sin(log(norm(z1)+1)) + normy + sin(pow(normz,1.5)) + log(normz+1)";

Expr gen(const std::string& s, Dims dims) { return parse_expr(s, dims, ExprContext::Generator); }

double eval_at(const Expr& e, double t, std::vector<double> y, std::vector<double> z) {
    return eval_expr(e, EvalEnv{t, y, z, {}});
}

} // namespace

TEST_CASE("parse examples") {
    const Expr q = gen("0.5*norm2(z1)", {1, 2});
    CHECK(q.depth() == 3);
    CHECK(eval_at(q, 0, {0}, {3, 4}) == doctest::Approx(12.5).epsilon(1e-15));

    try {
        (void)gen("log(", {1, 1});
        FAIL("expected a parse error");
    } catch (const ParseError& e) {
        CHECK(e.position() == 4);
    }

    const Expr r = gen(kRemark22, {2, 1});
    CHECK(eval_at(r, 0, {0, 0}, {0, 0}) == 0.0);
    CHECK(eval_at(gen("log(normz+1)", {2, 1}), 0, {0, 0}, {0, 0}) == 0.0);
}

TEST_CASE("precedence: unary binds tighter than ^, ^ is right associative") {
    const Dims d{1, 1};
    CHECK(eval_at(gen("2+3*4", d), 0, {0}, {0}) == 14);
    CHECK(eval_at(gen("2^3^2", d), 0, {0}, {0}) == 512);
    CHECK(eval_at(gen("-2^2", d), 0, {0}, {0}) == 4);
    CHECK(eval_at(gen("2^-1", d), 0, {0}, {0}) == 0.5);
    CHECK(eval_at(gen("8/4/2", d), 0, {0}, {0}) == 1);
    CHECK(eval_at(gen("10-4-3", d), 0, {0}, {0}) == 3);
    CHECK(eval_at(gen("2*-3", d), 0, {0}, {0}) == -6);
}

TEST_CASE("a+b*c matches direct arithmetic on random triples") {
    std::mt19937_64 rng(12345);
    std::uniform_real_distribution<double> u(-100, 100);
    for (int i = 0; i < 100; ++i) {
        const double a = u(rng), b = u(rng), c = u(rng);
        char buf[200];
        // Literals may be negative: wrap them so the text stays well formed.
        std::snprintf(buf, sizeof buf, "(%.17g)+(%.17g)*(%.17g)", a, b, c);
        CHECK(eval_at(gen(buf, {1, 1}), 0, {0}, {0}) == a + (b * c));
    }
}

TEST_CASE("variable indices and context rules") {
    CHECK_THROWS_AS(gen("y3", {2, 1}), ParseError);
    CHECK_THROWS_AS(gen("norm(z0)", {2, 1}), ParseError);
    CHECK_THROWS_AS(gen("w1", {1, 1}), ParseError);
    CHECK_THROWS_AS(parse_expr("y1", {1, 1}, ExprContext::Terminal), ParseError);
    CHECK_THROWS_AS(parse_expr("normz", {1, 1}, ExprContext::Terminal), ParseError);
    CHECK_THROWS_AS(parse_expr("w2", {1, 1}, ExprContext::Terminal), ParseError);
    CHECK_NOTHROW(parse_expr("clamp(w1, -1, 1) + t", {1, 1}, ExprContext::Terminal));
    CHECK_THROWS_AS(gen("z1", {1, 1}), ParseError);
    CHECK_THROWS_AS(gen("foo(1)", {1, 1}), ParseError);
    CHECK_THROWS_AS(gen("1 +", {1, 1}), ParseError);
    CHECK_THROWS_AS(gen("(1", {1, 1}), ParseError);
    CHECK_THROWS_AS(gen("1 2", {1, 1}), ParseError);
    CHECK_THROWS_AS(gen("clamp(1, 2)", {1, 1}), ParseError);
}

TEST_CASE("parse errors point inside the input at the reported token") {
    const std::vector<std::string> bad{"1 + * 2", "sin(1,)", "y1 $ 2", "norm(y1)", "pow(1)", "3 + foo", ")", "1..2"};
    for (const auto& text : bad) {
        try {
            (void)gen(text, {1, 1});
            FAIL("accepted: " << text);
        } catch (const ParseError& e) {
            CHECK(e.position() <= text.size());
            if (!e.token().empty()) CHECK(text.substr(e.position(), e.token().size()) == e.token());
        }
    }
}

TEST_CASE("evaluation domain errors") {
    const Dims d{1, 1};
    CHECK_THROWS_AS(eval_at(gen("log(y1)", d), 0, {0}, {0}), EvalError);
    CHECK_THROWS_AS(eval_at(gen("1/y1", d), 0, {0}, {0}), EvalError);
    CHECK_THROWS_AS(eval_at(gen("sqrt(y1)", d), 0, {-1}, {0}), EvalError);
    CHECK_THROWS_AS(eval_at(gen("pow(y1, 0.5)", d), 0, {-1}, {0}), EvalError);
    CHECK(eval_at(gen("pow(y1, 3)", d), 0, {-2}, {0}) == -8);
    CHECK_THROWS_AS(eval_at(gen("exp(y1)", d), 0, {1000}, {0}), EvalError);
    CHECK_THROWS_AS(eval_at(gen("clamp(1, 2, 1)", d), 0, {0}, {0}), EvalError);
    try {
        (void)eval_at(gen("1 + log(y1)", d), 0, {0}, {0});
    } catch (const EvalError& e) {
        CHECK(e.position() == 4);
    }
}

TEST_CASE("sign, abs and norms") {
    const Dims d{2, 2};
    const std::vector<double> y{3, -4}, z{1, 2, 2, 0};
    CHECK(eval_at(gen("sign(y1) + sign(y2) + sign(0)", d), 0, y, z) == 0);
    CHECK(eval_at(gen("normy", d), 0, y, z) == 5);
    CHECK(eval_at(gen("normz", d), 0, y, z) == 3);
    CHECK(eval_at(gen("norm2(z1) + norm(z2)", d), 0, y, z) == 7);
    CHECK(eval_at(gen("abs(y2) * t", d), 2.0, y, z) == 8);
}

TEST_CASE("pretty printing round-trips") {
    const Dims d{2, 1};
    const std::vector<std::string> corpus{kRemark22, "0.5*norm2(z1)", "-y1^2 + 3/(1+t)", "clamp(y2, -1, 1e-3)",
                                          "2^3^2 - -y1", "exp(-abs(y1))*cos(sqrt(normy+1))", "0.1+0.2"};
    for (const auto& text : corpus) {
        const Expr e = gen(text, d);
        const Expr back = gen(e.to_string(), d);
        CHECK(e.structurally_equal(back));
        const std::vector<double> y{0.3, -0.7}, z{1.1, -0.4};
        CHECK(eval_expr(e, EvalEnv{0.25, y, z, {}}) == eval_expr(back, EvalEnv{0.25, y, z, {}}));
    }
}

TEST_CASE("catalog generators") {
    const GeneratorModel pq = catalog_generator("pure_quadratic", {{"n", 1}, {"gamma", 1}});
    CHECK(pq.g()[0].structurally_equal(gen("0.5*norm2(z1)", {1, 1})));
    CHECK_FALSE(pq.y_dependent());

    const GeneratorModel r = catalog_generator("remark22", {{"n", 2}, {"d", 1}, {"delta", 0.5}});
    CHECK(r.components() == 2);
    const std::vector<double> y{0.2, -0.1}, z{0.7, 1.3};
    const Expr ref = gen(kRemark22, {2, 1});
    CHECK(r.component(0, EvalEnv{0, y, z, {}}) == doctest::Approx(eval_expr(ref, EvalEnv{0, y, z, {}})).epsilon(1e-14));
    CHECK(r.y_dependent());

    const GeneratorModel t = catalog_generator("triangular_demo", {{"n", 2}});
    CHECK(t.kind() == GeneratorKind::Triangular);
    CHECK(t.k()[1].structurally_equal(gen("y1 + 0.5*norm2(z2)", {2, 1})));
    CHECK(check_triangular_deps(t).empty());

    CHECK_THROWS_AS(catalog_generator("nope", {{"n", 1}}), ConfigError);
    CHECK_THROWS_AS(catalog_generator("pure_quadratic", {{"n", 1}}), ConfigError);
    CHECK_THROWS_AS(catalog_generator("remark22", {{"n", 1}, {"delta", 1.0}}), ParameterRangeError);
}

TEST_CASE("triangular dependency check") {
    const Dims d{3, 1};
    const GeneratorModel bad = GeneratorModel::triangular(
        {gen("norm2(z1)", d), gen("y1 + norm(z3)", d), gen("normz + normy", d)});
    const auto v = check_triangular_deps(bad);
    REQUIRE(v.size() == 1);
    CHECK(v[0].component == 2);
    CHECK(v[0].variable == "z3");

    const GeneratorModel s = catalog_generator("pure_quadratic", {{"n", 1}, {"gamma", 1}});
    CHECK_THROWS_WITH_AS(check_triangular_deps(s), "not triangular", ConfigError);
}

TEST_CASE("structured g may read only its own row") {
    const Dims d{2, 1};
    CHECK_THROWS_AS(GeneratorModel::structured({gen("norm2(z2)", d), gen("0", d)}, {gen("0", d), gen("0", d)}),
                    ConfigError);
    CHECK_THROWS_AS(GeneratorModel::structured({gen("y1", d), gen("0", d)}, {gen("0", d), gen("0", d)}),
                    ConfigError);
}
