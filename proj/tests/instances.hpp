#pragma once

// Config texts shared by the unit and acceptance tests.

#include "qbsde/cli.hpp"

#include <string>

namespace qbsde::testing {

inline std::string pure_quadratic_config(int N, double T = 1.0, double gamma = 1.0,
                                         const std::string& xi = "clamp(w1, -1, 1)") {
    return "problem.n = 1\nproblem.d = 1\nproblem.T = " + std::to_string(T) + "\ngrid.N = " + std::to_string(N) +
           "\ngenerator.catalog = pure_quadratic\ngenerator.catalog.gamma = " + std::to_string(gamma) +
           "\nterminal.1 = " + xi + "\nterminal.bound = 1\nparams.gamma = " + std::to_string(gamma) +
           "\nparams.K = 0\nparams.delta = 0\nparams.C0 = 1\n";
}

inline std::string linear_config(int N, double a, double c, const std::string& xi = "clamp(w1, -1, 1)") {
    return "problem.n = 1\nproblem.d = 1\nproblem.T = 1\ngrid.N = " + std::to_string(N) +
           "\ngenerator.catalog = linear\ngenerator.catalog.a = " + std::to_string(a) +
           "\ngenerator.catalog.c = " + std::to_string(c) + "\nterminal.1 = " + xi +
           "\nterminal.bound = 1\nparams.gamma = 1\nparams.K = 1\nparams.delta = 0\nparams.C0 = 1\n";
}

// Two-component instance with the catalog remark22 driver; gamma has a margin
// over 2 and (alpha, beta, eta) = 1 keep the budget just below C0 = 3.2.
inline std::string remark22_config(int N = 50) {
    return "problem.n = 2\nproblem.d = 1\nproblem.T = 1\ngrid.N = " + std::to_string(N) +
           "\ngenerator.catalog = remark22\ngenerator.catalog.delta = 0.5\n"
           "terminal.1 = 0.5*clamp(w1, -1, 1)\nterminal.2 = 0.5*sin(w1)\nterminal.bound = 0.5\n"
           "params.gamma = 2.1\nparams.K = 5\nparams.delta = 0.5\nparams.C0 = 3.2\n"
           "params.alpha = 0=1\nparams.beta = 0=1\nparams.eta = 0=1\n";
}

inline std::string triangular_demo_config(int N = 50, const std::string& xi1 = "clamp(w1, -1, 1)",
                                          const std::string& xi2 = "0") {
    return "problem.n = 2\nproblem.d = 1\nproblem.T = 1\ngrid.N = " + std::to_string(N) +
           "\ngenerator.catalog = triangular_demo\nterminal.1 = " + xi1 + "\nterminal.2 = " + xi2 +
           "\nterminal.bound = 1\ntriangular.powerAlpha = 0\ntriangular.lipBeta = 1\n"
           "triangular.C1 = 1\ntriangular.C2 = 1\ntriangular.C3 = 1\n";
}

inline ProblemInstance instance_from(const std::string& text) { return load_config_text(text).instance; }

} // namespace qbsde::testing
