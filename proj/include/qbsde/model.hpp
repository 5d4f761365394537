#pragma once

#include "qbsde/gendsl.hpp"
#include "qbsde/keyvalue.hpp"

#include <algorithm>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

namespace qbsde {

/// Uniform partition of [0, horizon] into `steps` intervals. The step size
/// is always derived from (horizon, steps).
class TimeGrid {
public:
    TimeGrid(double horizon, int steps);

    double horizon() const noexcept { return horizon_; }
    int steps() const noexcept { return steps_; }
    double dt() const noexcept { return horizon_ / steps_; }
    /// Time of layer k, computed as k * horizon / steps (exact at k = steps).
    double time(int k) const noexcept { return horizon_ * k / steps_; }

private:
    double horizon_;
    int steps_;
};

TimeGrid build_time_grid(double horizon, int steps);

/// Nonnegative piecewise-constant function of time. Piece j holds
/// `value[j]` on [start[j], start[j+1]); the last piece extends to +inf.
class CoefficientFunction {
public:
    CoefficientFunction() : pieces_{{0.0, 0.0}} {}
    explicit CoefficientFunction(std::vector<std::pair<double, double>> breakpoints);
    static CoefficientFunction constant(double v) { return CoefficientFunction({{0.0, v}}); }
    /// Parses "t0=v0; t1=v1; ...".
    static CoefficientFunction parse(const std::string& key, const std::string& text);

    double value_at(double t) const;
    /// Exact integral over [0, T].
    double integral(double T) const;
    /// Exact integral of phi(value) over [0, T].
    template <typename F>
    double integral_of(double T, F&& phi) const {
        double total = 0.0;
        for (std::size_t j = 0; j < pieces_.size(); ++j) {
            const double a = pieces_[j].first;
            if (a >= T) break;
            const double b = j + 1 < pieces_.size() ? std::min(pieces_[j + 1].first, T) : T;
            total += phi(pieces_[j].second) * (b - a);
        }
        return total;
    }
    double max_value() const;
    const std::vector<std::pair<double, double>>& pieces() const noexcept { return pieces_; }

private:
    std::vector<std::pair<double, double>> pieces_;
};

/// Constants of the structural assumptions. The triangular block is only
/// meaningful for triangular generators.
struct AssumptionParams {
    double gamma = 1.0;
    double lip_k = 0.0;
    double delta = 0.0;
    CoefficientFunction alpha, beta, eta;
    double c0 = 1.0;

    double power_alpha = 0.0;
    double lip_beta = 0.0;
    double a2_c = 0.0;
    double a1_c = 0.0;
    double xi_bound = 0.0;

    void validate() const;
};

struct TerminalCondition {
    std::vector<Expr> components;
    double declared_bound = 0.0;

    /// Evaluates every component at Brownian state w (time = horizon).
    void evaluate(double horizon, std::span<const double> w, std::span<double> out) const;
};

struct ProblemInstance {
    int n = 1;
    int d = 1;
    TimeGrid grid{1.0, 1};
    GeneratorModel generator;
    TerminalCondition terminal;
    AssumptionParams params;
    bool has_structured_params = false;
    bool has_triangular_params = false;

    Dims dims() const noexcept { return {n, d}; }
    void validate() const;
};

/// Builds and validates an instance from the model keys of a config
/// document (problem.*, grid.*, generator.*, terminal.*, params.*,
/// triangular.*). Keys read are marked consumed on `doc`.
ProblemInstance assemble_problem(const KeyValueDoc& doc);

/// Frobenius norm of an n x d matrix stored row-major.
double matrix_norm(std::span<const double> z);
/// Euclidean norm of row i of a row-major matrix with d columns.
double row_norm(std::span<const double> z, int d, int i);
double vector_norm(std::span<const double> v);

} // namespace qbsde
