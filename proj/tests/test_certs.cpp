#include "instances.hpp"
#include "qbsde/certs.hpp"

#include <doctest.h>

#include <cmath>
#include <limits>

using namespace qbsde;
using namespace qbsde::testing;

TEST_CASE("log inequality residual at reference points") {
    CHECK(check_log_inequality(1, 1, 1) == doctest::Approx(0.9867597430533607).epsilon(1e-13));
    CHECK(check_log_inequality(1e-12, 1, 1) == doctest::Approx(1.0 / 3 + 0.5 * std::log(2.0)).epsilon(1e-11));
    // Interior minimiser of 2x^2 + 2x = 4 is x0 = 1.
    CHECK(log_inequality_minimizer(4.0) == doctest::Approx(1.0).epsilon(1e-15));
    CHECK(check_log_inequality(1, 1, 4) == doctest::Approx(1.779620435961753).epsilon(1e-13));
    CHECK_THROWS_AS(check_log_inequality(0, 1, 1), ParameterRangeError);
    CHECK_THROWS_AS(check_log_inequality(1, -1, 1), ParameterRangeError);
}

TEST_CASE("minimiser solves 2x^2 + 2x = k without cancellation") {
    for (double k : {1e-12, 1e-6, 0.5, 4.0, 1e3, 1e12}) {
        const double x = log_inequality_minimizer(k);
        CHECK(std::abs(2 * x * x + 2 * x - k) <= 1e-14 * std::max(1.0, k));
    }
}

TEST_CASE("log scan") {
    SUBCASE("single point matches the checker") {
        const LogGrid one{1, 1, 1};
        const LogScanResult r = scan_log_inequality(one, one, one, true);
        CHECK(r.points == 1);
        CHECK(r.min_residual == check_log_inequality(1, 1, 1));
        CHECK(r.residuals.size() == 1);
    }
    SUBCASE("(y, C) = (1, 4) slice argmin within one cell of x0 = 1") {
        const LogGrid x{1e-3, 1e3, 61}, y{1, 1, 1}, C{4, 4, 1};
        const LogScanResult r = scan_log_inequality(x, y, C);
        const double xstar = x.at(r.slices[0].argmin_x);
        CHECK(std::abs(std::log(xstar)) <= x.log_step() * (1 + 1e-12));
        CHECK(r.slices[0].within_cell);
    }
    SUBCASE("grid errors") {
        CHECK_THROWS_AS(scan_log_inequality({1, 1, 0}, {1, 1, 1}, {1, 1, 1}), ParameterRangeError);
        CHECK_THROWS_AS(scan_log_inequality({10, 1, 5}, {1, 1, 1}, {1, 1, 1}), ParameterRangeError);
        CHECK_THROWS_AS(scan_log_inequality({-1, 1, 5}, {1, 1, 1}, {1, 1, 1}), ParameterRangeError);
        CHECK_THROWS_AS(scan_log_inequality({1, 1, 5}, {1, 1, 1}, {1, 1, 1}), ParameterRangeError);
    }
    SUBCASE("serial and parallel scans agree exactly") {
        const LogGrid g{1e-4, 1e4, 25};
        const LogScanResult a = scan_log_inequality(g, g, g, true, ExecPolicy::Serial);
        const LogScanResult b = scan_log_inequality(g, g, g, true, ExecPolicy::Parallel);
        CHECK(a.residuals == b.residuals);
        CHECK(a.min_residual == b.min_residual);
        CHECK(a.slices_outside_cell == b.slices_outside_cell);
    }
}

TEST_CASE("C1 and lambda") {
    // 30-digit reference values of the closed forms.
    const C1Lambda a = compute_c1_lambda(1, 1, 1, 1);
    CHECK(a.c1 == doctest::Approx(14.3397422014115015).epsilon(1e-12));
    CHECK(a.lambda.value() == doctest::Approx(288.021421455443122).epsilon(1e-12));
    const C1Lambda b = compute_c1_lambda(2, 2, 1, 1);
    CHECK(b.c1 == doctest::Approx(26.6730755347448348).epsilon(1e-12));
    CHECK(b.lambda.value() == doctest::Approx(79511.3175542649326).epsilon(1e-12));
    const C1Lambda z = compute_c1_lambda(1, 1, 1e-300, 0);
    CHECK(z.c1 == doctest::Approx(std::log(4.0)).epsilon(1e-15));
    CHECK(z.lambda.value() == doctest::Approx(z.c1).epsilon(1e-15));
    CHECK_THROWS_AS(compute_c1_lambda(0, 1, 1, 1), ParameterRangeError);
    CHECK_THROWS_AS(compute_c1_lambda(1, 0, 1, 1), ParameterRangeError);
}

TEST_CASE("lambda switches to log space on overflow") {
    const C1Lambda big = compute_c1_lambda(3, 50, 5, 1);
    CHECK(big.lambda.log_space);
    CHECK(std::isinf(big.lambda.value()));
    CHECK(big.lambda.log_value == doctest::Approx(std::log(big.c1) + 3 * 5 * 52.0).epsilon(1e-14));
}

TEST_CASE("C1 and lambda are monotone in each argument") {
    const std::vector<int> ns{1, 2, 3};
    const std::vector<double> gs{0.5, 1, 2, 4}, cs{0.1, 0.5, 1, 2}, ts{0, 0.5, 1, 2};
    for (int n : ns)
        for (double g : gs)
            for (double c : cs)
                for (std::size_t j = 1; j < ts.size(); ++j) {
                    const auto lo = compute_c1_lambda(n, g, c, ts[j - 1]);
                    const auto hi = compute_c1_lambda(n, g, c, ts[j]);
                    CHECK(hi.c1 >= lo.c1);
                    CHECK(hi.lambda.log_value >= lo.lambda.log_value);
                }
    for (double g : gs)
        for (double t : ts)
            for (std::size_t j = 1; j < cs.size(); ++j) {
                CHECK(compute_c1_lambda(1, g, cs[j], t).lambda.log_value >=
                      compute_c1_lambda(1, g, cs[j - 1], t).lambda.log_value);
                CHECK(compute_c1_lambda(2, g, cs[j], t).c1 >= compute_c1_lambda(1, g, cs[j], t).c1);
            }
}

TEST_CASE("k_s, its integral and the H3 budget") {
    CHECK(compute_ks(0, 1, 1) == doctest::Approx(1.0 / 6).epsilon(1e-15));
    CHECK(compute_ks(1, 1, 1) == doctest::Approx(1.0 / 6 + 0.5 * (3 + std::log(2.0))).epsilon(1e-15));
    CHECK(compute_ks(1, 2, 2) == doctest::Approx(compute_ks(1, 1, 1)).epsilon(1e-15));
    const auto eta = CoefficientFunction::parse("eta", "0=1; 0.5=0");
    CHECK(compute_ks_integral(eta, 1, 1, 1) == doctest::Approx(0.5 * compute_ks(1, 1, 1) + 0.5 / 6).epsilon(1e-15));

    const CoefficientFunction zero, one = CoefficientFunction::constant(1);
    CHECK(compute_h3_budget(0.5, zero, zero, zero, 1) == 0.5);
    CHECK(compute_h3_budget(0.5, one, one, one, 1) == doctest::Approx(2.5 + std::log(2.0)).epsilon(1e-15));
    CHECK(compute_h3_budget(0, zero, zero, one, 1) == doctest::Approx(std::log(2.0)).epsilon(1e-15));
}

TEST_CASE("BMO bound in log space") {
    CHECK(compute_bmo_bound_log(1, 1, 1, 1, 288.0226) == doctest::Approx(295.4982050364618).epsilon(1e-12));
    const double small = compute_bmo_bound_log(1, 1, 1e-300, 0, std::log(4.0));
    CHECK(std::isfinite(small));
    // With C0 -> 0 and T = 0 every term but n e^{gamma C0} / gamma^2 = 1 vanishes.
    CHECK(small == doctest::Approx(std::log(4.0)).epsilon(1e-14));
    CHECK(compute_bmo_bound_log(1, 1, 1, 1, 300) > compute_bmo_bound_log(1, 1, 1, 1, 288.0226));
    // Far past double range: still finite.
    CHECK(std::isfinite(compute_bmo_bound_log(2, 3, 2, 1, 1e6)));
}

TEST_CASE("contraction horizon") {
    CHECK(contraction_horizon(2) == 0.25);
    CHECK(std::isinf(contraction_horizon(0)));
    CHECK(contraction_horizon(0.5) == 1.0);
    CHECK_THROWS_AS(contraction_horizon(-1), ParameterRangeError);
}

TEST_CASE("Young-type power bound") {
    CHECK(check_young_power(1, 0, 1, 2) == doctest::Approx(0.5).epsilon(1e-15));
    CHECK(std::abs(check_young_power(1, 0, 1, 1)) <= 1e-15);
    CHECK(check_young_power(1, 0.5, 1, 0) == doctest::Approx(0.25).epsilon(1e-15));
    CHECK_THROWS_AS(check_young_power(1, 1, 1, 1), ParameterRangeError);
    CHECK_THROWS_AS(check_young_power(0, 0, 1, 1), ParameterRangeError);
    // Equality at |z| = (L / eps)^(1/(1-alpha)) for every alpha.
    for (double a : {-0.5, 0.0, 0.25, 0.5, 0.9})
        for (double L : {0.3, 1.0, 4.0})
            for (double eps : {0.2, 1.0, 5.0}) {
                const double z = std::pow(L / eps, 1.0 / (1.0 - a));
                CHECK(std::abs(check_young_power(L, a, eps, z)) <= 1e-12 * std::max(1.0, L * std::pow(z, 1 + a)));
            }
}

TEST_CASE("John-Nirenberg moment bound") {
    CHECK(exp_moment_bound(1, 0, 1, 1).value() == doctest::Approx(2 * std::exp(0.5)).epsilon(1e-14));
    CHECK(exp_moment_bound(1e-300, 0, 1, 1).value() == doctest::Approx(2.0).epsilon(1e-15));
    CHECK(exp_moment_bound(1, 0.5, 1, 1).value() == doctest::Approx(4.650139320554242).epsilon(1e-13));
    for (double L : {0.1, 1.0, 3.0})
        for (double b : {0.5, 1.0, 2.0})
            for (double T : {0.25, 1.0}) {
                const double want = 2 * std::exp(L * L * b * b * T / 2);
                CHECK(std::abs(exp_moment_bound(L, 0, b, T).value() - want) <= 1e-12 * want);
            }
    const BoundValue huge = exp_moment_bound(100, 0.5, 10, 10);
    CHECK(huge.log_space);
    CHECK_THROWS_AS(exp_moment_bound(1, 0, 0, 1), ParameterRangeError);
}

TEST_CASE("certificate from an instance") {
    const ProblemInstance inst = instance_from(remark22_config(10));
    const Certificate c = make_certificate(inst);
    CHECK(c.has_structured);
    CHECK(c.h3_budget == doctest::Approx(2.5 + std::log(2.0)).epsilon(1e-15));
    CHECK(c.h3_satisfied);
    CHECK(c.lambda.log_value >= std::log(inst.terminal.declared_bound));
    CHECK(std::isinf(c.contraction_horizon));

    const ProblemInstance tri = instance_from(triangular_demo_config(10));
    const Certificate t = make_certificate(tri);
    CHECK_FALSE(t.has_structured);
    CHECK(t.contraction_horizon == 0.5);
}

TEST_CASE("falsifier") {
    SamplerOptions so;
    so.seed = 11;
    so.count = 10000;

    SUBCASE("remark22 instance is clean") {
        const FalsificationReport r = falsify_assumptions(instance_from(remark22_config(10)), so);
        CHECK(r.violations.empty());
        CHECK(r.domain_errors.empty());
        CHECK(r.sample_count == 10000);
    }
    SUBCASE("zero generator is clean") {
        const ProblemInstance z = instance_from(
            "problem.n = 1\nproblem.d = 2\nproblem.T = 1\ngrid.N = 2\ngenerator.kind = structured\n"
            "generator.1.g = 0\ngenerator.1.h = 0\nterminal.1 = 0\nterminal.bound = 0\n"
            "params.gamma = 1\nparams.K = 0\nparams.delta = 0\nparams.C0 = 1\n");
        CHECK(falsify_assumptions(z, so).violations.empty());
    }
    SUBCASE("gamma below the quadratic growth is caught") {
        std::string text = remark22_config(10);
        text.replace(text.find("params.gamma = 2.1"), 18, "params.gamma = 1.0");
        const ProblemInstance inst = instance_from(text);
        const FalsificationReport r = falsify_assumptions(inst, so);
        bool h1a = false;
        for (const auto& v : r.violations) {
            h1a = h1a || v.id == AssumptionId::H1a;
            const auto [lhs, rhs] = assumption_sides(inst, v.id, v.component, v.a, v.b ? &*v.b : nullptr);
            CHECK(lhs > rhs + 1e-12);
        }
        CHECK(h1a);
    }
    SUBCASE("triangular demo against its constants") {
        const ProblemInstance tri = instance_from(triangular_demo_config(10));
        CHECK(falsify_assumptions(tri, so).violations.empty());
    }
    SUBCASE("results do not depend on the execution policy") {
        SamplerOptions wide = so;
        wide.y_radius = wide.z_radius = 1e6;
        const ProblemInstance inst = instance_from(
            "problem.n = 1\nproblem.d = 1\nproblem.T = 1\ngrid.N = 2\ngenerator.kind = structured\n"
            "generator.1.g = 0\ngenerator.1.h = normz\nterminal.1 = 0\nterminal.bound = 0\n"
            "params.gamma = 1\nparams.K = 1\nparams.delta = 0\nparams.C0 = 1\nparams.eta = 0=1\n");
        const auto a = falsify_assumptions(inst, wide, ExecPolicy::Serial);
        const auto b = falsify_assumptions(inst, wide, ExecPolicy::Parallel);
        REQUIRE(a.violations.size() == b.violations.size());
        CHECK(!a.violations.empty());
        for (std::size_t i = 0; i < a.violations.size(); ++i) {
            CHECK(a.violations[i].lhs == b.violations[i].lhs);
            CHECK(a.violations[i].a.z == b.violations[i].a.z);
        }
    }
}

TEST_CASE("counter RNG streams are reproducible") {
    CounterRng a(5, 17), b(5, 17), c(5, 18);
    bool differs = false;
    for (int i = 0; i < 100; ++i) {
        const auto x = a.next();
        CHECK(x == b.next());
        differs = differs || x != c.next();
        const double u = CounterRng(1, i).uniform();
        CHECK(u >= 0.0);
        CHECK(u < 1.0);
    }
    CHECK(differs);
}
