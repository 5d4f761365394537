#include "../tests/instances.hpp"
#include "qbsde/model.hpp"

#include <doctest.h>

#include <cmath>
#include <random>

using namespace qbsde;
using namespace qbsde::testing;

TEST_CASE("time grid derives the step") {
    CHECK(build_time_grid(1.0, 4).dt() == 0.25);
    CHECK(build_time_grid(0.0, 1).dt() == 0.0);
    const TimeGrid g = build_time_grid(2.0, 3);
    CHECK(g.time(3) == 2.0);
    CHECK(std::abs(g.steps() * g.dt() - 2.0) <= std::nextafter(2.0, 3.0) - 2.0);
    CHECK_THROWS_AS(build_time_grid(1.0, 0), ParameterRangeError);
    CHECK_THROWS_AS(build_time_grid(-1.0, 2), ParameterRangeError);
}

TEST_CASE("N times the step equals the horizon within one ulp") {
    std::mt19937_64 rng(3);
    std::uniform_real_distribution<double> T(0.0, 50.0);
    std::uniform_int_distribution<int> N(1, 5000);
    for (int i = 0; i < 1000; ++i) {
        const TimeGrid g(T(rng), N(rng));
        const double prod = g.steps() * g.dt();
        const double ulp = std::nextafter(g.horizon(), INFINITY) - g.horizon();
        CHECK(std::abs(prod - g.horizon()) <= ulp);
    }
}

TEST_CASE("coefficient functions") {
    const auto f = CoefficientFunction::parse("params.eta", "0=1; 0.25=3; 0.5=0");
    CHECK(f.value_at(0.1) == 1);
    CHECK(f.value_at(0.25) == 3);
    CHECK(f.value_at(0.9) == 0);
    CHECK(f.integral(1.0) == doctest::Approx(0.25 + 0.75).epsilon(1e-15));
    CHECK(f.integral(0.3) == doctest::Approx(0.25 + 0.15).epsilon(1e-15));
    CHECK(f.max_value() == 3);
    CHECK_THROWS_AS(CoefficientFunction::parse("k", "0.1=1"), ConfigError);
    CHECK_THROWS_AS(CoefficientFunction::parse("k", "0=1; 0=2"), ConfigError);
    CHECK_THROWS_AS(CoefficientFunction::parse("k", "0=-1"), ConfigError);
    CHECK_THROWS_AS(CoefficientFunction::parse("k", "0=1; x=2"), ConfigError);
}

TEST_CASE("piecewise-constant integral equals a 10x refined Riemann sum") {
    const auto f = CoefficientFunction::parse("k", "0=0.7; 0.3=2.5; 0.8=0.1; 1.4=4");
    for (double T : {0.5, 1.0, 2.0}) {
        // Breakpoints sit on multiples of 0.1; refine that grid 10x and sum midpoint values.
        const int cells = static_cast<int>(std::llround(T / 0.01));
        double sum = 0.0;
        for (int j = 0; j < cells; ++j) sum += f.value_at(0.01 * j + 0.005) * 0.01;
        CHECK(std::abs(sum - f.integral(T)) <= 1e-12);
    }
}

TEST_CASE("matrix norm") {
    CHECK(matrix_norm(std::vector<double>{3, 4}) == 5);
    CHECK(matrix_norm(std::vector<double>{0, 0, 0, 0}) == 0);
    CHECK(matrix_norm(std::vector<double>{1, 0, 0, 1}) == doctest::Approx(std::sqrt(2.0)).epsilon(1e-15));
    CHECK_THROWS_AS(matrix_norm(std::vector<double>{1, NAN}), NumericalError);
    CHECK(row_norm(std::vector<double>{1, 2, 3, 4}, 2, 1) == 5);

    std::mt19937_64 rng(9);
    std::normal_distribution<double> nd;
    for (int i = 0; i < 100; ++i) {
        std::vector<double> z(6), cz(6);
        const double c = nd(rng) * 10;
        for (int j = 0; j < 6; ++j) {
            z[j] = nd(rng);
            cz[j] = c * z[j];
        }
        CHECK(std::abs(matrix_norm(cz) - std::abs(c) * matrix_norm(z)) <= 1e-12 * std::abs(c) * matrix_norm(z));
    }
}

TEST_CASE("assemble a structured problem") {
    const ProblemInstance inst = instance_from(
        "problem.n = 2\nproblem.d = 1\nproblem.T = 1\ngrid.N = 10\ngenerator.kind = structured\n"
        "generator.1.g = 0.5*norm2(z1)\ngenerator.1.h = y2\ngenerator.2.g = 0\ngenerator.2.h = log(normz + 1)\n"
        "terminal.1 = clamp(w1, -1, 1)\nterminal.2 = 0\nterminal.bound = 1\n"
        "params.gamma = 1\nparams.K = 1\nparams.delta = 0\nparams.C0 = 2\n");
    CHECK(inst.n == 2);
    CHECK(inst.generator.kind() == GeneratorKind::Structured);
    CHECK(inst.generator.components() == 2);
    CHECK(inst.terminal.components.size() == 2);
    CHECK(inst.has_structured_params);
    CHECK(inst.params.eta.integral(1.0) == 0.0);
}

TEST_CASE("assembly errors are named") {
    const std::string base = remark22_config(10);
    CHECK_THROWS_AS(load_config_text(base + "params.extra = 1\n"), ConfigError);
    std::string delta1 = base;
    delta1.replace(delta1.find("params.delta = 0.5"), 18, "params.delta = 1.0");
    CHECK_THROWS_AS(instance_from(delta1), ParameterRangeError);
    std::string missing = base;
    missing.replace(missing.find("params.C0 = 3.2\n"), 16, "");
    CHECK_THROWS_AS(instance_from(missing), MissingKeyError);
    std::string bad_expr = base;
    bad_expr.replace(bad_expr.find("0.5*sin(w1)"), 11, "0.5*sin(w1");
    CHECK_THROWS_AS(instance_from(bad_expr), ParseError);
    CHECK_THROWS_AS(instance_from("problem.n = 0\n"), ParameterRangeError);
    CHECK_THROWS_AS(instance_from("problem.n = x\n"), ConfigError);
    CHECK_THROWS_AS(instance_from(""), MissingKeyError);
}

TEST_CASE("triangular dependency violation is a config error at assembly") {
    const std::string text =
        "problem.n = 3\nproblem.d = 1\nproblem.T = 1\ngrid.N = 4\ngenerator.kind = triangular\n"
        "generator.1.k = norm2(z1)\ngenerator.2.k = y1 + norm2(z3)\ngenerator.3.k = y2\n"
        "terminal.1 = 0\nterminal.2 = 0\nterminal.3 = 0\nterminal.bound = 0\n"
        "triangular.powerAlpha = 0\ntriangular.lipBeta = 1\ntriangular.C1 = 1\ntriangular.C2 = 1\ntriangular.C3 = 0\n";
    try {
        (void)instance_from(text);
        FAIL("expected a dependency error");
    } catch (const DependencyError& e) {
        REQUIRE(e.violations().size() == 1);
        CHECK(e.violations()[0].component == 2);
        CHECK(e.violations()[0].variable == "z3");
    }
}

TEST_CASE("malformed config text never escapes as an unnamed error") {
    std::mt19937_64 rng(77);
    const std::string base = remark22_config(8);
    int named = 0;
    for (int i = 0; i < 300; ++i) {
        std::string text = base;
        const int edits = 1 + static_cast<int>(rng() % 4);
        for (int e = 0; e < edits; ++e) {
            const std::size_t pos = rng() % text.size();
            const char c = " =#[]()*+-x1.\n"[rng() % 14];
            if (rng() % 2) text[pos] = c;
            else text.erase(pos, 1);
        }
        try {
            (void)instance_from(text);
        } catch (const ConfigError&) {
            ++named;
        } catch (const NumericalError&) {
            ++named;
        }
    }
    CHECK(named > 0);
}
