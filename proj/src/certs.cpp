#include "qbsde/certs.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace qbsde {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

double log_sum_exp(double a, double b) {
    if (a == -kInf) return b;
    if (b == -kInf) return a;
    const double m = std::max(a, b);
    if (m == kInf) return kInf;
    return m + std::log1p(std::exp(std::min(a, b) - m));
}

} // namespace

BoundValue BoundValue::from_log(double log_value) {
    return BoundValue{log_value, log_value > kLogSpaceThreshold};
}

double BoundValue::value() const { return log_space ? kInf : std::exp(log_value); }

// ---- log inequality ---------------------------------------------------------

double check_log_inequality(double x, double y, double C) {
    if (!(x > 0) || !(y > 0) || !(C > 0)) throw ParameterRangeError("check_log_inequality: x, y, C must be > 0");
    const double rhs = x * x * y + y / 3.0 + 0.5 * C * std::log1p(C / y);
    const double lhs = C * std::log1p(x);
    return rhs - lhs;
}

double log_inequality_minimizer(double k) {
    // 2x^2 + 2x - k = 0, written to avoid cancellation for small k.
    return k / (1.0 + std::sqrt(1.0 + 2.0 * k));
}

void LogGrid::validate(const char* name) const {
    const std::string n(name);
    if (count < 1) throw ParameterRangeError(n + ": empty range");
    if (!(lo > 0) || !std::isfinite(lo) || !std::isfinite(hi)) throw ParameterRangeError(n + ": bounds must be positive");
    if (hi < lo) throw ParameterRangeError(n + ": inverted range");
    if (count > 1 && !(hi > lo)) throw ParameterRangeError(n + ": degenerate range with more than one point");
}

double LogGrid::at(int j) const {
    if (count == 1) return lo;
    if (j == count - 1) return hi;
    return lo * std::exp(log_step() * j);
}

double LogGrid::log_step() const { return count > 1 ? std::log(hi / lo) / (count - 1) : 0.0; }

LogScanResult scan_log_inequality(const LogGrid& xg, const LogGrid& yg, const LogGrid& cg, bool keep_residuals,
                                  ExecPolicy policy) {
    xg.validate("x");
    yg.validate("y");
    cg.validate("C");
    const int nx = xg.count, ny = yg.count, nc = cg.count;

    std::vector<double> xs(nx);
    for (int j = 0; j < nx; ++j) xs[j] = xg.at(j);

    LogScanResult out;
    out.points = static_cast<std::size_t>(nx) * ny * nc;
    out.slices.resize(static_cast<std::size_t>(ny) * nc);
    if (keep_residuals) out.residuals.resize(out.points);

    struct SliceMin {
        double residual;
        int x_index;
        std::size_t violations;
    };
    std::vector<SliceMin> mins(out.slices.size());

    const long long total = static_cast<long long>(ny) * nc;
    auto work = [&](long long s) {
        const int yi = static_cast<int>(s / nc);
        const int ci = static_cast<int>(s % nc);
        const double y = yg.at(yi);
        const double C = cg.at(ci);
        const double k = C / y;

        SliceMin m{kInf, 0, 0};
        int best_f = 0;
        double best_fval = kInf;
        for (int xi = 0; xi < nx; ++xi) {
            const double x = xs[xi];
            const double r = check_log_inequality(x, y, C);
            if (keep_residuals) out.residuals[(static_cast<std::size_t>(xi) * ny + yi) * nc + ci] = r;
            if (r < m.residual) {
                m.residual = r;
                m.x_index = xi;
            }
            if (r < -kResidualSlack) ++m.violations;
            // x-dependent part only; the constants would swamp it in rounding.
            const double f = x * x - k * std::log1p(x);
            if (f < best_fval) {
                best_fval = f;
                best_f = xi;
            }
        }
        mins[s] = m;

        auto dF = [&](double x) { return std::abs(2.0 * x - k / (1.0 + x)); };
        LogScanSlice sl;
        sl.argmin_x = best_f;
        const double xstar = xs[best_f];
        sl.stationarity = dF(xstar);
        double tol = 0.0;
        if (best_f > 0) tol = std::max(tol, dF(xs[best_f - 1]));
        if (best_f + 1 < nx) tol = std::max(tol, dF(xs[best_f + 1]));
        sl.cell_tolerance = tol;
        const double root = log_inequality_minimizer(k);
        const double clamped = std::clamp(root, xs.front(), xs.back());
        const bool root_inside = root >= xs.front() && root <= xs.back();
        const bool near = std::abs(std::log(xstar) - std::log(clamped)) <= xg.log_step() * (1.0 + 1e-9) + 1e-12;
        sl.within_cell = near && (!root_inside || sl.stationarity <= tol || nx == 1);
        out.slices[s] = sl;
    };

    if (policy == ExecPolicy::Parallel) {
#pragma omp parallel for schedule(static)
        for (long long s = 0; s < total; ++s) work(s);
    } else {
        for (long long s = 0; s < total; ++s) work(s);
    }

    out.min_residual = kInf;
    for (long long s = 0; s < total; ++s) {
        const auto& m = mins[s];
        out.violations += m.violations;
        if (m.residual < out.min_residual) {
            out.min_residual = m.residual;
            out.argmin[0] = xs[m.x_index];
            out.argmin[1] = yg.at(static_cast<int>(s / nc));
            out.argmin[2] = cg.at(static_cast<int>(s % nc));
        }
        const auto& sl = out.slices[s];
        if (!sl.within_cell) ++out.slices_outside_cell;
        const double root = log_inequality_minimizer(cg.at(static_cast<int>(s % nc)) / yg.at(static_cast<int>(s / nc)));
        if (root >= xs.front() && root <= xs.back())
            out.max_stationarity_excess = std::max(out.max_stationarity_excess, sl.stationarity - sl.cell_tolerance);
    }
    return out;
}

// ---- Young power bound ------------------------------------------------------

double check_young_power(double L, double alpha, double eps, double z) {
    if (!(L > 0) || !(alpha > -1 && alpha < 1) || !(eps > 0) || !(z >= 0))
        throw ParameterRangeError("check_young_power: need L > 0, alpha in (-1, 1), eps > 0, |z| >= 0");
    // Extended precision: near the equality case both sides agree to many digits.
    const long double a = alpha, l = L, e = eps, x = z;
    const long double lhs = l * std::pow(x, 1.0L + a);
    const long double rhs = 0.5L * (1.0L + a) * e * x * x +
                            0.5L * (1.0L - a) * std::pow(l, 2.0L / (1.0L - a)) * std::pow(e, -(1.0L + a) / (1.0L - a));
    return static_cast<double>(rhs - lhs);
}

YoungScanResult scan_young_power(const std::vector<double>& alphas, const LogGrid& L, const LogGrid& eps,
                                 const LogGrid& z, ExecPolicy policy) {
    L.validate("L");
    eps.validate("eps");
    z.validate("z");
    if (alphas.empty()) throw ParameterRangeError("alpha: empty list");
    const long long slices = static_cast<long long>(alphas.size()) * L.count;
    struct Best {
        double r;
        int e, zi;
        std::size_t viol;
    };
    std::vector<Best> best(slices);
    auto work = [&](long long s) {
        const double a = alphas[s / L.count];
        const double l = L.at(static_cast<int>(s % L.count));
        Best b{kInf, 0, 0, 0};
        for (int e = 0; e < eps.count; ++e)
            for (int zi = 0; zi < z.count; ++zi) {
                const double r = check_young_power(l, a, eps.at(e), z.at(zi));
                if (r < b.r) b = Best{r, e, zi, b.viol};
                if (r < -kResidualSlack) ++b.viol;
            }
        best[s] = b;
    };
    if (policy == ExecPolicy::Parallel) {
#pragma omp parallel for schedule(static)
        for (long long s = 0; s < slices; ++s) work(s);
    } else {
        for (long long s = 0; s < slices; ++s) work(s);
    }
    YoungScanResult out;
    out.points = static_cast<std::size_t>(slices) * eps.count * z.count;
    out.min_residual = kInf;
    for (long long s = 0; s < slices; ++s) {
        out.violations += best[s].viol;
        if (best[s].r < out.min_residual) {
            out.min_residual = best[s].r;
            out.argmin[0] = alphas[s / L.count];
            out.argmin[1] = L.at(static_cast<int>(s % L.count));
            out.argmin[2] = eps.at(best[s].e);
            out.argmin[3] = z.at(best[s].zi);
        }
    }
    return out;
}

BoundValue exp_moment_bound(double L, double alpha, double bmo_norm, double T) {
    if (!(L > 0) || !(alpha > -1 && alpha < 1) || !(bmo_norm > 0) || !(T >= 0))
        throw ParameterRangeError("exp_moment_bound: need L > 0, alpha in (-1, 1), bmo > 0, T >= 0");
    const double eps = 1.0 / ((1.0 + alpha) * bmo_norm * bmo_norm);
    const double p = 2.0 / (1.0 - alpha);
    const double q = (1.0 + alpha) / (1.0 - alpha);
    double exponent = 0.5 * (1.0 - alpha) * std::pow(L, p) * std::pow(eps, -q) * T;
    if (!std::isfinite(exponent)) {
        const double log_exponent = std::log(0.5 * (1.0 - alpha)) + p * std::log(L) - q * std::log(eps) + std::log(T);
        exponent = std::exp(log_exponent); // may itself be +inf
    }
    return BoundValue::from_log(std::log(2.0) + exponent);
}

// ---- a priori constants -----------------------------------------------------

C1Lambda compute_c1_lambda(int n, double gamma, double c0, double T) {
    if (n < 1 || !(gamma > 0) || !(c0 > 0) || !(T >= 0))
        throw ParameterRangeError("compute_c1_lambda: need n >= 1, gamma > 0, C0 > 0, T >= 0");
    const double nn = n;
    // log(2 e^C0 + 2) without overflow.
    const double log_term = c0 + std::log(2.0) + std::log1p(std::exp(-c0));
    C1Lambda out;
    out.c1 = nn / gamma * log_term + gamma * T / 3.0 + nn * (1.0 + 2.0 * nn / gamma) * (c0 + 2.0 * T) + 3.0 * nn * c0;
    out.lambda = BoundValue::from_log(std::log(out.c1) + nn * c0 * (gamma + 2.0));
    return out;
}

double compute_ks(double eta, double gamma, int n) {
    if (!(eta >= 0) || !(gamma > 0) || n < 1) throw ParameterRangeError("compute_ks: need eta >= 0, gamma > 0, n >= 1");
    return gamma / (6.0 * n) + 0.5 * eta * (1.0 + std::log1p(eta) + 2.0 * n / gamma);
}

double compute_ks_integral(const CoefficientFunction& eta, double gamma, int n, double T) {
    return eta.integral_of(T, [&](double v) { return compute_ks(v, gamma, n); });
}

double compute_h3_budget(double xi_bound, const CoefficientFunction& alpha, const CoefficientFunction& beta,
                         const CoefficientFunction& eta, double T) {
    if (!(xi_bound >= 0) || !(T >= 0)) throw ParameterRangeError("compute_h3_budget: need xiBound >= 0, T >= 0");
    return xi_bound + alpha.integral(T) + beta.integral(T) +
           eta.integral_of(T, [](double v) { return v * std::log1p(v); });
}

double compute_bmo_bound_log(int n, double gamma, double c0, double T, double lambda) {
    if (n < 1 || !(gamma > 0) || !(c0 > 0) || !(T >= 0) || !(lambda >= 0))
        throw ParameterRangeError("compute_bmo_bound_log: invalid parameters");
    if (!std::isfinite(lambda)) return kInf;
    const double nn = n;
    const double log_a = std::log(nn) + gamma * c0 - 2.0 * std::log(gamma);
    const double m = 1.5 * c0 + lambda * c0 * (1.0 + 0.5 * gamma) + gamma * T / (12.0 * nn) +
                     0.5 * (1.0 + 4.0 * nn / gamma) * (c0 + 2.0 * T);
    const double log_b = std::log(nn) - std::log(gamma) + gamma * lambda + std::log(m);
    return std::log(4.0) + log_sum_exp(log_a, log_b);
}

double contraction_horizon(double lip_beta) {
    if (!(lip_beta >= 0)) throw ParameterRangeError("contraction_horizon: lipBeta must be >= 0");
    if (lip_beta == 0.0) return kInf;
    return 1.0 / (2.0 * lip_beta);
}

Certificate make_certificate(const ProblemInstance& inst) {
    Certificate c;
    const auto& p = inst.params;
    const double T = inst.grid.horizon();
    c.contraction_horizon = contraction_horizon(p.lip_beta);
    if (!inst.has_structured_params) return c;
    c.has_structured = true;
    const auto cl = compute_c1_lambda(inst.n, p.gamma, p.c0, T);
    c.c1 = cl.c1;
    c.lambda = cl.lambda;
    c.ks_integral = compute_ks_integral(p.eta, p.gamma, inst.n, T);
    c.h3_budget = compute_h3_budget(inst.terminal.declared_bound, p.alpha, p.beta, p.eta, T);
    c.h3_satisfied = c.h3_budget <= p.c0;
    c.bmo_bound_log = compute_bmo_bound_log(inst.n, p.gamma, p.c0, T, cl.lambda.value());
    return c;
}

// ---- falsification ----------------------------------------------------------

const char* assumption_name(AssumptionId id) {
    switch (id) {
    case AssumptionId::H1a: return "H1a";
    case AssumptionId::H1b: return "H1b";
    case AssumptionId::H1c: return "H1c";
    case AssumptionId::H1d: return "H1d";
    case AssumptionId::H2: return "H2";
    case AssumptionId::A1: return "A1";
    case AssumptionId::A2: return "A2";
    }
    return "?";
}

CounterRng::CounterRng(std::uint64_t seed, std::uint64_t stream) noexcept
    : state_(seed * 0x9E3779B97F4A7C15ULL ^ (stream + 0x632BE59BD9B4E019ULL) * 0xD1B54A32D192ED03ULL) {}

std::uint64_t CounterRng::next() noexcept {
    // splitmix64
    std::uint64_t z = (state_ += 0x9E3779B97F4A7C15ULL);
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
}

double CounterRng::uniform() noexcept { return static_cast<double>(next() >> 11) * 0x1.0p-53; }

namespace {

double norm_of(const std::vector<double>& v) { return matrix_norm(v); }

std::vector<double> row_of(const std::vector<double>& z, int d, int i) {
    return std::vector<double>(z.begin() + static_cast<std::ptrdiff_t>(i) * d,
                               z.begin() + static_cast<std::ptrdiff_t>(i + 1) * d);
}

double row_distance(const std::vector<double>& za, const std::vector<double>& zb, int d, int i) {
    double s = 0.0;
    for (int j = 0; j < d; ++j) {
        const double diff = za[static_cast<std::size_t>(i) * d + j] - zb[static_cast<std::size_t>(i) * d + j];
        s += diff * diff;
    }
    return std::sqrt(s);
}

double distance(const std::vector<double>& a, const std::vector<double>& b) {
    double s = 0.0;
    for (std::size_t j = 0; j < a.size(); ++j) s += (a[j] - b[j]) * (a[j] - b[j]);
    return std::sqrt(s);
}

// g^i reads only row i; embed the row into an otherwise-zero matrix.
double eval_g(const ProblemInstance& inst, int i, double t, const std::vector<double>& z) {
    std::vector<double> y(inst.n, 0.0);
    std::vector<double> zz(static_cast<std::size_t>(inst.n) * inst.d, 0.0);
    for (int j = 0; j < inst.d; ++j) zz[static_cast<std::size_t>(i) * inst.d + j] = z[static_cast<std::size_t>(i) * inst.d + j];
    return eval_expr(inst.generator.g()[i], EvalEnv{t, y, zz, {}});
}

double eval_h(const ProblemInstance& inst, int i, double t, const std::vector<double>& y, const std::vector<double>& z) {
    return eval_expr(inst.generator.h()[i], EvalEnv{t, y, z, {}});
}

double eval_k(const ProblemInstance& inst, int i, double t, const std::vector<double>& y, const std::vector<double>& z) {
    return eval_expr(inst.generator.k()[i], EvalEnv{t, y, z, {}});
}

std::vector<AssumptionId> applicable(const ProblemInstance& inst) {
    if (inst.generator.kind() == GeneratorKind::Structured) {
        if (!inst.has_structured_params) return {};
        return {AssumptionId::H1a, AssumptionId::H1b, AssumptionId::H1c, AssumptionId::H1d, AssumptionId::H2};
    }
    if (!inst.has_triangular_params) return {};
    return {AssumptionId::A1, AssumptionId::A2};
}

bool needs_pair(AssumptionId id) {
    return id == AssumptionId::H1b || id == AssumptionId::H1d || id == AssumptionId::A2;
}

// Point b with component i of y and row i of z taken from `other`.
SamplePoint splice(const SamplePoint& a, const SamplePoint& other, int i, int d) {
    SamplePoint b = a;
    b.y[i] = other.y[i];
    for (int j = 0; j < d; ++j) b.z[static_cast<std::size_t>(i) * d + j] = other.z[static_cast<std::size_t>(i) * d + j];
    return b;
}

} // namespace

std::pair<double, double> assumption_sides(const ProblemInstance& inst, AssumptionId id, int i, const SamplePoint& a,
                                           const SamplePoint* b) {
    const auto& p = inst.params;
    const int d = inst.d;
    if (needs_pair(id) && b == nullptr) throw std::invalid_argument("assumption_sides: pair check needs two points");
    switch (id) {
    case AssumptionId::H1a: {
        const double zn = norm_of(row_of(a.z, d, i));
        return {std::abs(eval_g(inst, i, a.t, a.z)), 0.5 * p.gamma * zn * zn};
    }
    case AssumptionId::H1b: {
        const double lhs = std::abs(eval_g(inst, i, a.t, a.z) - eval_g(inst, i, a.t, b->z));
        const double za = norm_of(row_of(a.z, d, i));
        const double zb = norm_of(row_of(b->z, d, i));
        return {lhs, p.lip_k * (1.0 + za + zb) * row_distance(a.z, b->z, d, i)};
    }
    case AssumptionId::H1c: {
        const std::vector<double> y0(inst.n, 0.0);
        const std::vector<double> z0(static_cast<std::size_t>(inst.n) * d, 0.0);
        return {std::abs(eval_h(inst, i, a.t, y0, z0)), p.lip_k};
    }
    case AssumptionId::H1d: {
        const double lhs = std::abs(eval_h(inst, i, a.t, a.y, a.z) - eval_h(inst, i, a.t, b->y, b->z));
        const double za = norm_of(a.z);
        const double zb = norm_of(b->z);
        const double rhs = p.lip_k * distance(a.y, b->y) +
                           p.lip_k * (1.0 + std::pow(za, p.delta) + std::pow(zb, p.delta)) * distance(a.z, b->z);
        return {lhs, rhs};
    }
    case AssumptionId::H2: {
        const double yi = a.y[i];
        const double sgn = static_cast<double>((yi > 0) - (yi < 0));
        const double lhs = sgn * eval_h(inst, i, a.t, a.y, a.z);
        const double rhs = p.alpha.value_at(a.t) + p.beta.value_at(a.t) * norm_of(a.y) +
                           p.eta.value_at(a.t) * std::log(norm_of(a.z) + 1.0);
        return {lhs, rhs};
    }
    case AssumptionId::A1: {
        double s = 1.0;
        for (int j = 0; j <= i; ++j) {
            s += std::abs(a.y[j]);
            s += std::pow(norm_of(row_of(a.z, d, j)), 1.0 + p.power_alpha);
        }
        const double zi = norm_of(row_of(a.z, d, i));
        s += zi * zi;
        return {std::abs(eval_k(inst, i, a.t, a.y, a.z)), p.a1_c * s};
    }
    case AssumptionId::A2: {
        const double lhs = std::abs(eval_k(inst, i, a.t, a.y, a.z) - eval_k(inst, i, a.t, b->y, b->z));
        const double za = norm_of(row_of(a.z, d, i));
        const double zb = norm_of(row_of(b->z, d, i));
        const double rhs = p.lip_beta * std::abs(a.y[i] - b->y[i]) +
                           p.a2_c * (1.0 + za + zb) * row_distance(a.z, b->z, d, i);
        return {lhs, rhs};
    }
    }
    return {0.0, 0.0};
}

FalsificationReport falsify_assumptions(const ProblemInstance& inst, const SamplerOptions& opt, ExecPolicy policy) {
    if (!(opt.y_radius >= 0) || !(opt.z_radius >= 0)) throw ParameterRangeError("sampler radii must be >= 0");
    const auto ids = applicable(inst);
    const int n = inst.n;
    const int d = inst.d;
    const double T = inst.grid.horizon();

    struct PerSample {
        std::vector<Violation> violations;
        std::vector<SampleDomainError> errors;
    };
    std::vector<PerSample> results(opt.count);

    auto scale = [](CounterRng& rng, double radius) {
        return radius > 1.0 ? std::pow(radius, rng.uniform()) : radius;
    };
    auto draw = [&](CounterRng& rng, double t) {
        SamplePoint p;
        p.t = t;
        const double ys = scale(rng, opt.y_radius);
        const double zs = scale(rng, opt.z_radius);
        p.y.resize(n);
        p.z.resize(static_cast<std::size_t>(n) * d);
        for (auto& v : p.y) v = ys * (2.0 * rng.uniform() - 1.0);
        for (auto& v : p.z) v = zs * (2.0 * rng.uniform() - 1.0);
        return p;
    };

    auto work = [&](long long s) {
        CounterRng rng(opt.seed, static_cast<std::uint64_t>(s));
        const double t = T * rng.uniform();
        const SamplePoint a = draw(rng, t);
        const SamplePoint other = draw(rng, t);
        auto& out = results[s];
        for (int i = 0; i < n; ++i) {
            for (AssumptionId id : ids) {
                std::optional<SamplePoint> b;
                if (id == AssumptionId::A2) b = splice(a, other, i, d);
                else if (needs_pair(id)) b = other;
                try {
                    const auto [lhs, rhs] = assumption_sides(inst, id, i, a, b ? &*b : nullptr);
                    if (lhs > rhs + opt.tolerance * std::max(1.0, std::abs(rhs)))
                        out.violations.push_back(Violation{id, i, a, b, lhs, rhs});
                } catch (const NumericalError& e) {
                    out.errors.push_back(SampleDomainError{static_cast<std::size_t>(s),
                                                           std::string(assumption_name(id)) + ": " + e.what()});
                }
            }
        }
    };

    const long long count = static_cast<long long>(opt.count);
    if (policy == ExecPolicy::Parallel) {
#pragma omp parallel for schedule(dynamic, 64)
        for (long long s = 0; s < count; ++s) work(s);
    } else {
        for (long long s = 0; s < count; ++s) work(s);
    }

    FalsificationReport report;
    report.sample_count = opt.count;
    report.seed = opt.seed;
    for (auto& r : results) {
        for (auto& v : r.violations) report.violations.push_back(std::move(v));
        for (auto& e : r.errors) report.domain_errors.push_back(std::move(e));
    }
    return report;
}

} // namespace qbsde
