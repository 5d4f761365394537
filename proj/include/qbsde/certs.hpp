#pragma once

#include "qbsde/exec.hpp"
#include "qbsde/model.hpp"

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

namespace qbsde {

/// Absolute slack allowed on inequality residuals.
inline constexpr double kResidualSlack = 1e-9;
/// Exponents above this are kept in log space.
inline constexpr double kLogSpaceThreshold = 700.0;

/// A positive quantity that may be too large for a double. `log_value` is
/// always valid; `value()` is +inf once the exponent passes the threshold.
struct BoundValue {
    double log_value = 0.0;
    bool log_space = false;

    static BoundValue from_log(double log_value);
    double value() const;
};

// ---- Log inequality: C log(1+x) <= x^2 y + y/3 + (C/2) log(1 + C/y) ------

/// rhs - lhs of the log inequality. Requires x, y, C > 0.
double check_log_inequality(double x, double y, double C);

/// Positive root of 2 x^2 + 2 x = k.
double log_inequality_minimizer(double k);

/// Log-spaced sample points lo * (hi/lo)^(j/(count-1)).
struct LogGrid {
    double lo = 1e-6;
    double hi = 1e6;
    int count = 60;

    void validate(const char* name) const;
    double at(int j) const;
    /// Width of one grid cell in log space (0 for a single point).
    double log_step() const;
};

struct LogScanSlice {
    int argmin_x = 0;            // grid index of the per-(y, C) minimiser
    double stationarity = 0.0;   // |2x* - k/(1+x*)|
    double cell_tolerance = 0.0; // max |F'| at the neighbouring grid points
    bool within_cell = true;     // true root lies within one cell of x*
};

struct LogScanResult {
    double min_residual = 0.0;
    double argmin[3] = {0, 0, 0}; // (x, y, C)
    std::size_t violations = 0;   // residual < -kResidualSlack
    std::size_t points = 0;
    double max_stationarity_excess = 0.0; // max over slices of stationarity - cell_tolerance
    std::size_t slices_outside_cell = 0;
    std::vector<LogScanSlice> slices;     // index y_index * C.count + C_index
    std::vector<double> residuals;        // optional, index (x * ny + y) * nC + C

    const LogScanSlice& slice(const LogGrid& c_grid, int y_index, int c_index) const {
        return slices[static_cast<std::size_t>(y_index) * c_grid.count + c_index];
    }
};

LogScanResult scan_log_inequality(const LogGrid& x, const LogGrid& y, const LogGrid& C, bool keep_residuals = false,
                                  ExecPolicy policy = ExecPolicy::Parallel);

// ---- Young-type power bound ------------------------------------------------

/// ((1+a)/2) eps z^2 + ((1-a)/2) L^(2/(1-a)) eps^(-(1+a)/(1-a)) - L z^(1+a).
double check_young_power(double L, double alpha, double eps, double z_norm);

struct YoungScanResult {
    double min_residual = 0.0;
    double argmin[4] = {0, 0, 0, 0}; // (alpha, L, eps, z)
    std::size_t violations = 0;
    std::size_t points = 0;
};

YoungScanResult scan_young_power(const std::vector<double>& alphas, const LogGrid& L, const LogGrid& eps,
                                 const LogGrid& z, ExecPolicy policy = ExecPolicy::Parallel);

/// John-Nirenberg exponential-moment bound with eps chosen so the prefactor
/// is exactly 2: eps = 1 / ((1 + alpha) bmo^2).
BoundValue exp_moment_bound(double L, double alpha, double bmo_norm, double T);

// ---- A priori constants ----------------------------------------------------

struct C1Lambda {
    double c1 = 0.0;
    BoundValue lambda;
};

C1Lambda compute_c1_lambda(int n, double gamma, double c0, double T);
double compute_ks(double eta, double gamma, int n);
/// Exact integral of k_s over [0, T] for piecewise-constant eta.
double compute_ks_integral(const CoefficientFunction& eta, double gamma, int n, double T);
double compute_h3_budget(double xi_bound, const CoefficientFunction& alpha, const CoefficientFunction& beta,
                         const CoefficientFunction& eta, double T);
/// log of the squared-BMO bound of Z, evaluated without forming exp(gamma lambda).
double compute_bmo_bound_log(int n, double gamma, double c0, double T, double lambda);
/// 1 / (2 beta); +inf for beta == 0.
double contraction_horizon(double lip_beta);

struct Certificate {
    bool has_structured = false;
    double c1 = 0.0;
    BoundValue lambda;
    double ks_integral = 0.0;
    double h3_budget = 0.0;
    bool h3_satisfied = false;
    double bmo_bound_log = 0.0;
    double contraction_horizon = 0.0;
};

Certificate make_certificate(const ProblemInstance& instance);

// ---- Sample-based falsification -------------------------------------------

enum class AssumptionId { H1a, H1b, H1c, H1d, H2, A1, A2 };
const char* assumption_name(AssumptionId id);

struct SamplePoint {
    double t = 0.0;
    std::vector<double> y;
    std::vector<double> z; // n x d row-major
};

struct Violation {
    AssumptionId id = AssumptionId::H1a;
    int component = 0; // 0-based
    SamplePoint a;
    std::optional<SamplePoint> b; // second point for Lipschitz-type checks
    double lhs = 0.0;
    double rhs = 0.0;
};

struct SampleDomainError {
    std::size_t sample = 0;
    std::string message;
};

struct FalsificationReport {
    std::vector<Violation> violations;
    std::vector<SampleDomainError> domain_errors;
    std::size_t sample_count = 0;
    std::uint64_t seed = 0;
};

struct SamplerOptions {
    std::uint64_t seed = 0;
    std::size_t count = 10000;
    double y_radius = 10.0;
    double z_radius = 10.0;
    double tolerance = 1e-12; // relative to max(1, |rhs|)
};

/// Both sides of one assumption inequality at the stored point(s). For
/// H1a/H1b only row `component` of z is used; H1c ignores y and z.
std::pair<double, double> assumption_sides(const ProblemInstance& instance, AssumptionId id, int component,
                                           const SamplePoint& a, const SamplePoint* b);

FalsificationReport falsify_assumptions(const ProblemInstance& instance, const SamplerOptions& sampler,
                                        ExecPolicy policy = ExecPolicy::Parallel);

/// Counter-based generator: the stream for (seed, index) does not depend on
/// which worker consumes it.
class CounterRng {
public:
    CounterRng(std::uint64_t seed, std::uint64_t stream) noexcept;
    std::uint64_t next() noexcept;
    double uniform() noexcept; // [0, 1)

private:
    std::uint64_t state_;
};

} // namespace qbsde
