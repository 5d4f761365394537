#include "qbsde/engine.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <iomanip>
#include <limits>
#include <ostream>
#include <sstream>

namespace qbsde {

namespace {

struct NodeScratch {
    std::array<std::size_t, 1 << kMaxLatticeDim> children{};
    std::vector<double> cond, z, y, y_next, f;

    NodeScratch(int n, int d) : cond(n), z(static_cast<std::size_t>(n) * d), y(n), y_next(n), f(n) {}
};

template <typename Make, typename Body>
void for_each_node(ExecPolicy policy, std::size_t count, Make make, Body body) {
    const long long total = static_cast<long long>(count);
    if (policy == ExecPolicy::Parallel) {
#pragma omp parallel
        {
            auto scratch = make();
#pragma omp for schedule(static)
            for (long long i = 0; i < total; ++i) body(static_cast<std::size_t>(i), scratch);
        }
    } else {
        auto scratch = make();
        for (long long i = 0; i < total; ++i) body(static_cast<std::size_t>(i), scratch);
    }
}

enum class FailureKind { InnerNonConvergence, NonFinite, Evaluation };

struct NodeFailure {
    FailureKind kind;
    int layer;
    std::size_t node;
    double residual;
    std::string message;
};

// Failures are collected per layer; the lowest node index is reported so the
// error does not depend on thread scheduling.
class FailureLog {
public:
    void record(NodeFailure f) {
#pragma omp critical(qbsde_failure_log)
        failures_.push_back(std::move(f));
    }

    void raise_if_any() const {
        if (failures_.empty()) return;
        const auto& f = *std::min_element(failures_.begin(), failures_.end(),
                                          [](const NodeFailure& a, const NodeFailure& b) { return a.node < b.node; });
        std::ostringstream msg;
        msg << "layer " << f.layer << ", node " << f.node << ": ";
        switch (f.kind) {
        case FailureKind::InnerNonConvergence:
            msg << "inner iteration did not converge (residual " << f.residual << ")";
            throw ConvergenceError(msg.str());
        case FailureKind::NonFinite:
            msg << "non-finite value";
            throw NumericalError(msg.str());
        case FailureKind::Evaluation:
            msg << f.message;
            throw NumericalError(msg.str());
        }
    }

private:
    std::vector<NodeFailure> failures_;
};

std::size_t truncate_rows(std::span<double> z, int n, int d, const std::optional<double>& threshold) {
    if (!threshold) return 0;
    std::size_t clips = 0;
    for (int i = 0; i < n; ++i) {
        auto row = z.subspan(static_cast<std::size_t>(i) * d, d);
        double s = 0.0;
        for (double v : row) s += v * v;
        const double norm = std::sqrt(s);
        if (norm > *threshold) {
            const double scale = *threshold / norm;
            for (double& v : row) v *= scale;
            ++clips;
        }
    }
    return clips;
}

bool all_finite(std::span<const double> v) {
    return std::all_of(v.begin(), v.end(), [](double x) { return std::isfinite(x); });
}

void check_field_shape(const SolutionField& field, const LatticeModel& lattice, int n) {
    if (field.n != n || field.d != lattice.d() || field.steps != lattice.steps() ||
        static_cast<int>(field.y.size()) != lattice.steps() + 1)
        throw std::invalid_argument("solution field does not match the lattice");
}

void check_window(const LatticeModel& lattice, int begin, int end) {
    if (begin < 0 || end > lattice.steps() || begin > end) throw std::out_of_range("layer window out of range");
}

} // namespace

SolutionField SolutionField::zeros(const LatticeModel& lattice, int n) {
    SolutionField f;
    f.n = n;
    f.d = lattice.d();
    f.steps = lattice.steps();
    f.y.resize(f.steps + 1);
    f.z.resize(f.steps);
    for (int k = 0; k <= f.steps; ++k) {
        f.y[k].assign(lattice.layer_size(k) * n, 0.0);
        if (k < f.steps) f.z[k].assign(lattice.layer_size(k) * n * f.d, 0.0);
    }
    return f;
}

void check_compatible(const ProblemInstance& instance, const LatticeModel& lattice) {
    if (instance.d != lattice.d() || instance.grid.steps() != lattice.steps() ||
        instance.grid.horizon() != lattice.grid().horizon())
        throw DimensionError("instance and lattice disagree on (d, N, T)");
}

std::vector<double> terminal_layer(const ProblemInstance& instance, const LatticeModel& lattice) {
    check_compatible(instance, lattice);
    const int n = instance.n;
    const int N = lattice.steps();
    const std::size_t count = lattice.layer_size(N);
    std::vector<double> out(count * n);
    std::vector<double> w(lattice.d());
    const double bound = instance.terminal.declared_bound;
    for (std::size_t idx = 0; idx < count; ++idx) {
        lattice.brownian_state(N, idx, w);
        auto vals = std::span<double>(out).subspan(idx * n, n);
        instance.terminal.evaluate(instance.grid.horizon(), w, vals);
        for (int i = 0; i < n; ++i) {
            if (std::abs(vals[i]) > bound * (1.0 + 1e-12) + 1e-12) {
                std::ostringstream msg;
                msg << "terminal." << (i + 1) << " = " << vals[i] << " at terminal node " << idx
                    << " exceeds terminal.bound = " << bound;
                throw TerminalBoundError(msg.str());
            }
        }
    }
    return out;
}

SweepStats backward_sweep(const Driver& driver, const LatticeModel& lattice, SolutionField& field, int begin, int end,
                          const BackwardOptions& opts) {
    const int n = driver.components();
    const int d = lattice.d();
    check_field_shape(field, lattice, n);
    check_window(lattice, begin, end);
    const double dt = lattice.grid().dt();
    const bool has_step = dt > 0.0;
    const bool implicit = driver.y_dependent();

    SweepStats stats;
    for (int k = end - 1; k >= begin; --k) {
        const double t = lattice.grid().time(k);
        const std::span<const double> child = field.y[k + 1];
        FailureLog failures;
        std::size_t clips = 0;
        int max_iter = 0;

        auto body = [&](std::size_t node, NodeScratch& s) {
            project_node(lattice, k, node, child, n, s.cond, has_step ? std::span<double>(s.z) : std::span<double>(),
                         s.children);
            if (!has_step) std::fill(s.z.begin(), s.z.end(), 0.0);
            std::size_t local_clips = truncate_rows(s.z, n, d, opts.z_truncation);
            int iterations = 0;
            try {
                std::copy(s.cond.begin(), s.cond.end(), s.y.begin());
                if (has_step) {
                    if (!implicit) {
                        driver.evaluate(k, node, t, s.y, s.z, s.f);
                        for (int i = 0; i < n; ++i) s.y[i] = s.cond[i] + s.f[i] * dt;
                        iterations = 1;
                    } else {
                        double change = std::numeric_limits<double>::infinity();
                        while (iterations < opts.inner_max_iter) {
                            driver.evaluate(k, node, t, s.y, s.z, s.f);
                            change = 0.0;
                            for (int i = 0; i < n; ++i) {
                                s.y_next[i] = s.cond[i] + s.f[i] * dt;
                                change = std::max(change, std::abs(s.y_next[i] - s.y[i]));
                            }
                            std::swap(s.y, s.y_next);
                            ++iterations;
                            if (!std::isfinite(change) || change <= opts.inner_tol) break;
                        }
                        if (std::isfinite(change) && change > opts.inner_tol) {
                            failures.record({FailureKind::InnerNonConvergence, k, node, change, {}});
                            return;
                        }
                    }
                }
            } catch (const NumericalError& e) {
                failures.record({FailureKind::Evaluation, k, node, 0.0, e.what()});
                return;
            }
            if (!all_finite(s.y) || !all_finite(s.z)) {
                failures.record({FailureKind::NonFinite, k, node, 0.0, {}});
                return;
            }
            std::copy(s.y.begin(), s.y.end(), field.y_at(k, node).begin());
            std::copy(s.z.begin(), s.z.end(), field.z_at(k, node).begin());
            if (local_clips || iterations > 1) {
#pragma omp critical(qbsde_sweep_stats)
                {
                    clips += local_clips;
                    max_iter = std::max(max_iter, iterations);
                }
            }
        };
        for_each_node(opts.policy, lattice.layer_size(k), [&] { return NodeScratch(n, d); }, body);
        failures.raise_if_any();
        stats.clips += clips;
        stats.max_inner_iterations = std::max({stats.max_inner_iterations, max_iter, 1});
    }
    return stats;
}

SolutionField backward_solve(const ProblemInstance& instance, const LatticeModel& lattice,
                             const BackwardOptions& opts) {
    check_compatible(instance, lattice);
    SolutionField field = SolutionField::zeros(lattice, instance.n);
    field.y[lattice.steps()] = terminal_layer(instance, lattice);
    GeneratorDriver driver(instance.generator);
    const SweepStats stats = backward_sweep(driver, lattice, field, 0, lattice.steps(), opts);
    field.scheme = "direct";
    field.iterations = stats.max_inner_iterations;
    field.clip_count = stats.clips;
    return field;
}

const char* picard_status_name(PicardStatus s) {
    switch (s) {
    case PicardStatus::Converged: return "converged";
    case PicardStatus::MaxIterations: return "maxIter";
    case PicardStatus::Diverged: return "diverged";
    }
    return "?";
}

PicardOutcome picard_sweep(const Driver& driver, const LatticeModel& lattice, SolutionField& field, int begin, int end,
                           const PicardOptions& opts) {
    const int n = driver.components();
    const int d = lattice.d();
    check_field_shape(field, lattice, n);
    check_window(lattice, begin, end);
    const double dt = lattice.grid().dt();
    const bool has_step = dt > 0.0;

    // Next iterate, allocated for the window only.
    std::vector<std::vector<double>> next_y(end - begin + 1), next_z(end - begin);
    for (int k = begin; k < end; ++k) {
        next_y[k - begin].assign(field.y[k].size(), 0.0);
        next_z[k - begin].assign(field.z[k].size(), 0.0);
    }
    next_y[end - begin] = field.y[end];

    PicardOutcome out;
    std::size_t clips_total = 0;
    for (int m = 1; m <= opts.max_iter; ++m) {
        double change = 0.0;
        std::size_t clips = 0;
        for (int k = end - 1; k >= begin; --k) {
            const double t = lattice.grid().time(k);
            const std::span<const double> child = next_y[k + 1 - begin];
            auto& ny = next_y[k - begin];
            auto& nz = next_z[k - begin];
            FailureLog failures;
            std::vector<double> layer_change(lattice.layer_size(k), 0.0);
            auto body = [&](std::size_t node, NodeScratch& s) {
                project_node(lattice, k, node, child, n, s.cond,
                             has_step ? std::span<double>(s.z) : std::span<double>(), s.children);
                if (!has_step) std::fill(s.z.begin(), s.z.end(), 0.0);
                const std::size_t c = truncate_rows(s.z, n, d, opts.z_truncation);
                if (c) {
#pragma omp atomic
                    clips += c;
                }
                try {
                    if (has_step) driver.evaluate(k, node, t, field.y_at(k, node), field.z_at(k, node), s.f);
                    else std::fill(s.f.begin(), s.f.end(), 0.0);
                } catch (const NumericalError& e) {
                    failures.record({FailureKind::Evaluation, k, node, 0.0, e.what()});
                    return;
                }
                double local = 0.0;
                const auto old = field.y_at(k, node);
                for (int i = 0; i < n; ++i) {
                    const double v = s.cond[i] + s.f[i] * dt;
                    ny[node * n + i] = v;
                    const double diff = std::abs(v - old[i]);
                    local = std::isfinite(v) ? std::max(local, diff) : std::numeric_limits<double>::infinity();
                }
                std::copy(s.z.begin(), s.z.end(), nz.begin() + static_cast<std::ptrdiff_t>(node * n * d));
                layer_change[node] = local;
            };
            for_each_node(opts.policy, lattice.layer_size(k), [&] { return NodeScratch(n, d); }, body);
            failures.raise_if_any();
            for (double c : layer_change) change = std::max(change, c);
        }
        for (int k = begin; k < end; ++k) {
            std::swap(field.y[k], next_y[k - begin]);
            std::swap(field.z[k], next_z[k - begin]);
        }
        clips_total = clips;
        out.trace.push_back(change);
        out.iterations = m;
        if (change <= opts.tol) {
            out.status = PicardStatus::Converged;
            break;
        }
        if (!std::isfinite(change) || (out.trace.front() > 0.0 && change > 10.0 * out.trace.front())) {
            out.status = PicardStatus::Diverged;
            break;
        }
        out.status = PicardStatus::MaxIterations;
    }
    field.clip_count = clips_total;
    return out;
}

PicardResult picard_solve(const ProblemInstance& instance, const LatticeModel& lattice, const SolutionField* init,
                          const PicardOptions& opts) {
    check_compatible(instance, lattice);
    PicardResult r;
    if (init) {
        check_field_shape(*init, lattice, instance.n);
        r.field = *init;
    } else {
        r.field = SolutionField::zeros(lattice, instance.n);
    }
    r.field.y[lattice.steps()] = terminal_layer(instance, lattice);
    GeneratorDriver driver(instance.generator);
    r.outcome = picard_sweep(driver, lattice, r.field, 0, lattice.steps(), opts);
    r.field.scheme = "picard";
    r.field.iterations = r.outcome.iterations;
    r.field.residuals = r.outcome.trace;
    return r;
}

double sup_norm_y(const SolutionField& field, int begin, int end) {
    double best = 0.0;
    for (int k = begin; k <= end; ++k) {
        const std::size_t count = field.y[k].size() / field.n;
        for (std::size_t node = 0; node < count; ++node) best = std::max(best, vector_norm(field.y_at(k, node)));
    }
    return best;
}

double sup_norm_y(const SolutionField& field) { return sup_norm_y(field, 0, field.steps); }

double estimate_bmo(const SolutionField& field, const LatticeModel& lattice) {
    const int N = lattice.steps();
    if (field.steps != N || field.d != lattice.d()) throw std::invalid_argument("estimate_bmo: field/lattice mismatch");
    const double dt = lattice.grid().dt();
    std::vector<double> next(lattice.layer_size(N), 0.0);
    double best = 0.0;
    for (int k = N - 1; k >= 0; --k) {
        std::vector<double> cur(lattice.layer_size(k));
        std::array<std::size_t, 1 << kMaxLatticeDim> scratch{};
        for (std::size_t node = 0; node < cur.size(); ++node) {
            double e = 0.0;
            project_node(lattice, k, node, next, 1, std::span<double>(&e, 1), {}, scratch);
            double z2 = 0.0;
            for (double v : field.z_at(k, node)) z2 += v * v;
            cur[node] = e + z2 * dt;
            best = std::max(best, cur[node]);
        }
        next = std::move(cur);
    }
    return std::sqrt(best);
}

FieldDiff max_abs_diff_y(const SolutionField& a, const SolutionField& b) {
    if (a.n != b.n || a.steps != b.steps || a.y.size() != b.y.size())
        throw std::invalid_argument("max_abs_diff_y: shape mismatch");
    FieldDiff out;
    for (int k = 0; k <= a.steps; ++k) {
        if (a.y[k].size() != b.y[k].size()) throw std::invalid_argument("max_abs_diff_y: shape mismatch");
        for (std::size_t j = 0; j < a.y[k].size(); ++j) {
            const double diff = std::abs(a.y[k][j] - b.y[k][j]);
            if (diff > out.max_abs || std::isnan(diff)) {
                out.max_abs = std::isnan(diff) ? std::numeric_limits<double>::infinity() : diff;
                out.layer = k;
                out.node = j / a.n;
                out.component = static_cast<int>(j % a.n);
            }
        }
    }
    return out;
}

void write_solution_csv(std::ostream& os, const SolutionField& field, const LatticeModel& lattice) {
    const int n = field.n;
    const int d = field.d;
    os << "layer,nodeIndex,t";
    for (int j = 1; j <= d; ++j) os << ",W_" << j;
    for (int i = 1; i <= n; ++i) os << ",Y_" << i;
    for (int i = 1; i <= n; ++i)
        for (int j = 1; j <= d; ++j) os << ",Z_" << i << j;
    os << '\n';
    os << std::setprecision(17);
    std::vector<double> w(d);
    for (int k = 0; k <= field.steps; ++k) {
        const double t = lattice.grid().time(k);
        for (std::size_t node = 0; node < lattice.layer_size(k); ++node) {
            lattice.brownian_state(k, node, w);
            os << k << ',' << node << ',' << t;
            for (double v : w) os << ',' << v;
            for (double v : field.y_at(k, node)) os << ',' << v;
            if (k < field.steps) {
                for (double v : field.z_at(k, node)) os << ',' << v;
            } else {
                for (int m = 0; m < n * d; ++m) os << ',';
            }
            os << '\n';
        }
    }
}

} // namespace qbsde
