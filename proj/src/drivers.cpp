#include "qbsde/drivers.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

namespace qbsde {

namespace {

void reset_window(SolutionField& field, int begin, int end) {
    for (int k = begin; k < end; ++k) {
        std::fill(field.y[k].begin(), field.y[k].end(), 0.0);
        std::fill(field.z[k].begin(), field.z[k].end(), 0.0);
    }
}

int chunk_layers(const StitchOptions& opts, const LatticeModel& lattice) {
    const int N = lattice.steps();
    if (!opts.horizon) return N;
    const double h = *opts.horizon;
    const double dt = lattice.grid().dt();
    if (!(h > 0) || !std::isfinite(h)) throw ParameterRangeError("solver.horizon must be a positive number");
    if (dt == 0.0) return N;
    const double layers = h / dt;
    if (layers < 1.0 - 1e-9) throw ParameterRangeError("solver.horizon is shorter than one layer");
    if (layers >= N) return N;
    return std::max(1, static_cast<int>(std::llround(layers)));
}

std::vector<double> component_values(std::span<const double> values, int n, int i) {
    std::vector<double> out(values.size() / n);
    for (std::size_t node = 0; node < out.size(); ++node) out[node] = values[node * n + i];
    return out;
}

} // namespace

StitchResult solve_stitched(const ProblemInstance& instance, const LatticeModel& lattice, const StitchOptions& opts) {
    check_compatible(instance, lattice);
    const int N = lattice.steps();
    StitchResult r;
    r.field = SolutionField::zeros(lattice, instance.n);
    r.field.y[N] = terminal_layer(instance, lattice);
    r.plan.adaptive = !opts.horizon.has_value();
    int L = chunk_layers(opts, lattice);
    r.plan.chunk_layers = L;

    GeneratorDriver driver(instance.generator);
    std::size_t clips = 0;
    int end = N;
    while (end > 0) {
        const int begin = std::max(0, end - L);
        StitchChunk chunk;
        chunk.begin = begin;
        chunk.end = end;
        if (opts.mode == StitchMode::Direct) {
            const SweepStats s = backward_sweep(driver, lattice, r.field, begin, end, opts.backward);
            chunk.iterations = s.max_inner_iterations;
            clips += s.clips;
        } else {
            reset_window(r.field, begin, end);
            const PicardOutcome out = picard_sweep(driver, lattice, r.field, begin, end, opts.picard);
            chunk.iterations = out.iterations;
            chunk.sup_change = out.trace.empty() ? 0.0 : out.trace.back();
            chunk.status = out.status;
            clips += r.field.clip_count;
            r.field.residuals.insert(r.field.residuals.end(), out.trace.begin(), out.trace.end());
            if (out.status != PicardStatus::Converged) {
                if (r.plan.adaptive) {
                    if (L == 1)
                        throw ConvergenceError("adaptive stitching failed on a single layer ending at layer " +
                                               std::to_string(end) + " (" + picard_status_name(out.status) + ")");
                    r.plan.halvings.push_back({end, L, std::max(1, L / 2), out.status});
                    L = std::max(1, L / 2);
                    continue;
                }
                chunk.sup_norm = std::numeric_limits<double>::quiet_NaN();
                chunk.within_lambda = false;
                r.plan.chunks.push_back(chunk);
                r.plan.converged = false;
                break;
            }
        }
        chunk.sup_norm = sup_norm_y(r.field, begin, end);
        chunk.within_lambda = !opts.lambda || chunk.sup_norm <= *opts.lambda;
        r.plan.chunks.push_back(chunk);
        end = begin;
    }
    r.field.scheme = "stitched";
    r.field.clip_count = clips;
    r.field.iterations = 0;
    for (const auto& c : r.plan.chunks) r.field.iterations += c.iterations;
    return r;
}

int contraction_interval_count(double lip_beta, double horizon) {
    if (lip_beta < 0) throw ParameterRangeError("lipBeta must be nonnegative");
    if (lip_beta == 0.0 || horizon == 0.0) return 1;
    const double h = std::min(1.0 / (2.0 * lip_beta), horizon);
    return std::max(1, static_cast<int>(std::ceil(horizon / h - 1e-12)));
}

ContractionResult frozen_y_contraction(const Driver& driver, std::span<const double> terminal, double lip_beta,
                                       const LatticeModel& lattice, const ContractionOptions& opts) {
    if (driver.components() != 1) throw DimensionError("frozen_y_contraction needs a scalar driver");
    const int N = lattice.steps();
    if (terminal.size() != lattice.layer_size(N)) throw DimensionError("terminal values do not match the lattice");

    ContractionResult r;
    r.field = SolutionField::zeros(lattice, 1);
    std::copy(terminal.begin(), terminal.end(), r.field.y[N].begin());
    SolutionField frozen = SolutionField::zeros(lattice, 1);
    const FrozenYDriver frozen_driver(driver, frozen);

    const double T = lattice.grid().horizon();
    r.trace.max_length = lip_beta > 0 ? std::min(1.0 / (2.0 * lip_beta), T) : T;
    const int count = std::min(contraction_interval_count(lip_beta, T), N);

    std::size_t clips = 0;
    for (int j = count; j >= 1; --j) {
        const int end = static_cast<int>(std::llround(static_cast<double>(j) * N / count));
        const int begin = static_cast<int>(std::llround(static_cast<double>(j - 1) * N / count));
        ContractionInterval interval{begin, end, {}};
        bool done = false;
        for (int m = 0; m < opts.max_outer && !done; ++m) {
            const SweepStats s = backward_sweep(frozen_driver, lattice, r.field, begin, end, opts.backward);
            double change = 0.0;
            for (int k = begin; k < end; ++k) {
                for (std::size_t i = 0; i < r.field.y[k].size(); ++i)
                    change = std::max(change, std::abs(r.field.y[k][i] - frozen.y[k][i]));
                frozen.y[k] = r.field.y[k];
            }
            interval.changes.push_back(change);
            clips = s.clips;
            done = change <= opts.tol;
        }
        r.trace.intervals.push_back(interval);
        if (!done)
            throw ConvergenceError("frozen-y contraction on layers [" + std::to_string(begin) + ", " +
                                   std::to_string(end) + "] did not reach tolerance in " +
                                   std::to_string(opts.max_outer) + " outer iterations (last change " +
                                   std::to_string(interval.changes.back()) + ")");
    }
    r.field.scheme = "contraction";
    r.field.clip_count = clips;
    for (const auto& iv : r.trace.intervals) r.field.iterations += static_cast<int>(iv.changes.size());
    return r;
}

SubstitutedComponentDriver::SubstitutedComponentDriver(const GeneratorModel& gen, int component,
                                                       const SolutionField& solved)
    : gen_(gen), component_(component), solved_(solved) {
    const VariableUse use = gen.k()[component].variables();
    y_dependent_ = use.y[component] || use.norm_y;
}

void SubstitutedComponentDriver::evaluate(int layer, std::size_t node, double t, std::span<const double> y,
                                          std::span<const double> z, std::span<double> out) const {
    const int n = solved_.n;
    const int d = solved_.d;
    thread_local std::vector<double> yfull, zfull;
    yfull.assign(n, 0.0);
    zfull.assign(static_cast<std::size_t>(n) * d, 0.0);
    const auto sy = solved_.y_at(layer, node);
    const auto sz = solved_.z_at(layer, node);
    for (int j = 0; j < component_; ++j) {
        yfull[j] = sy[j];
        std::copy_n(sz.begin() + j * d, d, zfull.begin() + j * d);
    }
    yfull[component_] = y[0];
    std::copy_n(z.begin(), d, zfull.begin() + component_ * d);
    out[0] = gen_.component(component_, EvalEnv{t, yfull, zfull, {}});
}

TriangularResult solve_triangular(const ProblemInstance& instance, const LatticeModel& lattice,
                                  const ContractionOptions& opts) {
    check_compatible(instance, lattice);
    const GeneratorModel& gen = instance.generator;
    auto violations = check_triangular_deps(gen);
    if (!violations.empty()) throw DependencyError(std::move(violations));

    const int n = instance.n;
    const int d = instance.d;
    const int N = lattice.steps();
    const std::vector<double> xi = terminal_layer(instance, lattice);
    TriangularResult r;
    r.field = SolutionField::zeros(lattice, n);
    r.field.y[N] = xi;
    const double lip_beta = instance.has_triangular_params ? instance.params.lip_beta : 0.0;

    for (int i = 0; i < n; ++i) {
        const SubstitutedComponentDriver driver(gen, i, r.field);
        const std::vector<double> terminal = component_values(xi, n, i);
        ContractionResult part;
        const std::string where = "component " + std::to_string(i + 1) + ": ";
        try {
            part = frozen_y_contraction(driver, terminal, lip_beta, lattice, opts);
        } catch (const ConvergenceError& e) {
            throw ConvergenceError(where + e.what());
        } catch (const NumericalError& e) {
            throw NumericalError(where + e.what());
        }
        for (int k = 0; k <= N; ++k) {
            for (std::size_t node = 0; node < lattice.layer_size(k); ++node) {
                r.field.y_at(k, node)[i] = part.field.y_at(k, node)[0];
                if (k < N) {
                    auto src = part.field.z_at(k, node);
                    std::copy(src.begin(), src.end(), r.field.z_at(k, node).begin() + i * d);
                }
            }
        }
        r.field.iterations += part.field.iterations;
        r.field.clip_count += part.field.clip_count;
        r.traces.push_back(std::move(part.trace));
    }
    r.field.scheme = "triangular";
    return r;
}

SolutionField oracle_pure_quadratic(double gamma, std::span<const double> terminal, const LatticeModel& lattice) {
    const int N = lattice.steps();
    if (terminal.size() != lattice.layer_size(N)) throw DimensionError("terminal values do not match the lattice");
    SolutionField f = SolutionField::zeros(lattice, 1);
    f.scheme = "oracle_pure_quadratic";
    const double lw = std::log(lattice.child_weight());
    const int nc = lattice.children();
    std::array<std::size_t, 1 << kMaxLatticeDim> children{};

    // Work with V = gamma * Y; each layer is a log-sum-exp over children.
    std::vector<double> next(terminal.begin(), terminal.end());
    if (gamma != 0.0)
        for (double& v : next) v *= gamma;
    f.y[N].assign(terminal.begin(), terminal.end());
    for (int k = N - 1; k >= 0; --k) {
        std::vector<double> cur(lattice.layer_size(k));
        for (std::size_t node = 0; node < cur.size(); ++node) {
            lattice.child_indices(k, node, children);
            if (gamma == 0.0) {
                double s = 0.0;
                for (int c = 0; c < nc; ++c) s += lattice.child_weight() * next[children[c]];
                cur[node] = s;
            } else {
                double m = -std::numeric_limits<double>::infinity();
                for (int c = 0; c < nc; ++c) m = std::max(m, next[children[c]]);
                double s = 0.0;
                for (int c = 0; c < nc; ++c) s += std::exp(next[children[c]] - m);
                cur[node] = m + lw + std::log(s);
            }
            f.y[k][node] = gamma == 0.0 ? cur[node] : cur[node] / gamma;
        }
        next = std::move(cur);
    }
    return f;
}

double oracle_pure_quadratic_root(double gamma, const TerminalCondition& terminal, double horizon, int d, int steps,
                                  std::size_t max_nodes) {
    if (steps < 1) throw ParameterRangeError("oracle: steps must be positive");
    if (d < 1 || d > kMaxLatticeDim) throw ParameterRangeError("oracle: unsupported dimension");
    if (terminal.components.size() != 1) throw DimensionError("oracle_pure_quadratic needs a scalar terminal");
    double count = std::pow(static_cast<double>(steps) + 1.0, d);
    if (count > static_cast<double>(max_nodes))
        throw NodeBudgetError("reference lattice needs " + std::to_string(count) + " terminal nodes");

    const double sq = std::sqrt(horizon / steps);
    std::vector<double> logw(steps + 1);
    for (int u = 0; u <= steps; ++u)
        logw[u] = std::lgamma(steps + 1.0) - std::lgamma(u + 1.0) - std::lgamma(steps - u + 1.0) - steps * std::log(2.0);

    std::vector<int> up(d, 0);
    std::vector<double> w(d);
    double value = 0.0;
    std::vector<double> terms;
    terms.reserve(static_cast<std::size_t>(count));
    while (true) {
        double lw = 0.0;
        for (int j = 0; j < d; ++j) {
            w[j] = (2.0 * up[j] - steps) * sq;
            lw += logw[up[j]];
        }
        double xi = 0.0;
        terminal.evaluate(horizon, w, std::span<double>(&xi, 1));
        if (gamma == 0.0) value += std::exp(lw) * xi;
        else terms.push_back(lw + gamma * xi);
        int j = d - 1;
        while (j >= 0 && up[j] == steps) up[j--] = 0;
        if (j < 0) break;
        ++up[j];
    }
    if (gamma == 0.0) return value;
    const double m = *std::max_element(terms.begin(), terms.end());
    double s = 0.0;
    for (double v : terms) s += std::exp(v - m);
    return (m + std::log(s)) / gamma;
}

SolutionField oracle_linear(double a, double c, std::span<const double> terminal, const LatticeModel& lattice) {
    const int N = lattice.steps();
    if (terminal.size() != lattice.layer_size(N)) throw DimensionError("terminal values do not match the lattice");
    SolutionField f = SolutionField::zeros(lattice, 1);
    f.scheme = "oracle_linear";
    const double T = lattice.grid().horizon();
    std::array<std::size_t, 1 << kMaxLatticeDim> scratch{};
    std::vector<double> cond(terminal.begin(), terminal.end());
    for (int k = N; k >= 0; --k) {
        if (k < N) {
            std::vector<double> cur(lattice.layer_size(k));
            for (std::size_t node = 0; node < cur.size(); ++node)
                project_node(lattice, k, node, cond, 1, std::span<double>(&cur[node], 1), {}, scratch);
            cond = std::move(cur);
        }
        const double tau = T - lattice.grid().time(k);
        const double growth = std::exp(a * tau);
        const double drift = a == 0.0 ? c * tau : (c / a) * std::expm1(a * tau);
        for (std::size_t node = 0; node < cond.size(); ++node) f.y[k][node] = growth * cond[node] + drift;
    }
    return f;
}

PicardResult oracle_joint_picard(const ProblemInstance& instance, const LatticeModel& lattice, double tight_tol,
                                 const PicardOptions& base) {
    PicardOptions opts = base;
    opts.tol = tight_tol;
    opts.max_iter = base.max_iter * 10;
    return picard_solve(instance, lattice, nullptr, opts);
}

namespace {

// c * norm2(z1), norm2(z1) * c, norm2(z1) / c or norm2(z1); returns c.
std::optional<double> quadratic_coefficient(const Expr& e) {
    const auto& nodes = e.nodes();
    if (e.root() < 0) return std::nullopt;
    const auto& r = nodes[e.root()];
    auto is_row0 = [&](int idx) { return nodes[idx].op == Op::Norm2Row && nodes[nodes[idx].args[0]].index == 0; };
    auto is_num = [&](int idx) { return nodes[idx].op == Op::Number; };
    if (is_row0(e.root())) return 1.0;
    if (r.op == Op::Mul) {
        if (is_num(r.args[0]) && is_row0(r.args[1])) return nodes[r.args[0]].value;
        if (is_row0(r.args[0]) && is_num(r.args[1])) return nodes[r.args[1]].value;
    }
    if (r.op == Op::Div && is_row0(r.args[0]) && is_num(r.args[1]) && nodes[r.args[1]].value != 0.0)
        return 1.0 / nodes[r.args[1]].value;
    return std::nullopt;
}

} // namespace

std::optional<double> match_pure_quadratic(const ProblemInstance& instance) {
    if (instance.n != 1) return std::nullopt;
    const GeneratorModel& gen = instance.generator;
    std::optional<double> c;
    if (gen.kind() == GeneratorKind::Structured) {
        if (!gen.h()[0].is_zero_literal()) return std::nullopt;
        c = quadratic_coefficient(gen.g()[0]);
    } else {
        c = quadratic_coefficient(gen.k()[0]);
    }
    if (!c || !(*c > 0)) return std::nullopt;
    return 2.0 * *c;
}

std::optional<LinearCoefficients> match_linear(const ProblemInstance& instance) {
    if (instance.n != 1) return std::nullopt;
    const GeneratorModel& gen = instance.generator;
    std::vector<const Expr*> parts;
    if (gen.kind() == GeneratorKind::Structured) parts = {&gen.g()[0], &gen.h()[0]};
    else parts = {&gen.k()[0]};
    for (const Expr* e : parts) {
        const VariableUse use = e->variables();
        const bool reads_z = std::any_of(use.z.begin(), use.z.end(), [](bool b) { return b; });
        if (use.time || reads_z || use.norm_z || use.norm_y) return std::nullopt;
    }
    const std::vector<double> z(instance.d, 0.0);
    auto f = [&](double y) { return gen.component(0, EvalEnv{0.0, std::span<const double>(&y, 1), z, {}}); };
    try {
        LinearCoefficients lc;
        lc.c = f(0.0);
        lc.a = f(1.0) - lc.c;
        for (double y : {-2.5, 7.25, 0.3}) {
            const double v = f(y);
            if (std::abs(v - (lc.a * y + lc.c)) > 1e-12 * std::max(1.0, std::abs(v))) return std::nullopt;
        }
        return lc;
    } catch (const NumericalError&) {
        return std::nullopt;
    }
}

} // namespace qbsde
