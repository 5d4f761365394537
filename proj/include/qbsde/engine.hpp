#pragma once

#include "qbsde/exec.hpp"
#include "qbsde/lattice.hpp"
#include "qbsde/model.hpp"

#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace qbsde {

/// Y (n values per node, layers 0..N) and Z (n x d values per node,
/// layers 0..N-1) on a lattice.
struct SolutionField {
    int n = 1;
    int d = 1;
    int steps = 0;
    std::vector<std::vector<double>> y;
    std::vector<std::vector<double>> z;

    std::string scheme;
    int iterations = 0;
    std::vector<double> residuals;
    std::size_t clip_count = 0;

    static SolutionField zeros(const LatticeModel& lattice, int n);

    std::span<double> y_at(int k, std::size_t node) { return {y[k].data() + node * n, static_cast<std::size_t>(n)}; }
    std::span<const double> y_at(int k, std::size_t node) const {
        return {y[k].data() + node * n, static_cast<std::size_t>(n)};
    }
    std::span<double> z_at(int k, std::size_t node) {
        return {z[k].data() + node * n * d, static_cast<std::size_t>(n) * d};
    }
    std::span<const double> z_at(int k, std::size_t node) const {
        return {z[k].data() + node * n * d, static_cast<std::size_t>(n) * d};
    }
};

/// Generator seen by the lattice solvers. Implementations must be reentrant:
/// evaluate() is called concurrently for distinct nodes of a layer.
class Driver {
public:
    virtual ~Driver() = default;
    virtual int components() const = 0;
    virtual bool y_dependent() const = 0;
    virtual void evaluate(int layer, std::size_t node, double t, std::span<const double> y,
                          std::span<const double> z, std::span<double> out) const = 0;
};

class GeneratorDriver final : public Driver {
public:
    explicit GeneratorDriver(const GeneratorModel& gen) : gen_(gen) {}
    int components() const override { return gen_.components(); }
    bool y_dependent() const override { return gen_.y_dependent(); }
    void evaluate(int, std::size_t, double t, std::span<const double> y, std::span<const double> z,
                  std::span<double> out) const override {
        gen_.evaluate(EvalEnv{t, y, z, {}}, out);
    }

private:
    const GeneratorModel& gen_;
};

struct BackwardOptions {
    double inner_tol = 1e-10;
    int inner_max_iter = 200;
    std::optional<double> z_truncation;
    ExecPolicy policy = ExecPolicy::Parallel;
};

struct SweepStats {
    std::size_t clips = 0;
    int max_inner_iterations = 0;
};

/// Terminal layer values xi(W_T), checked finite and within terminal.bound.
std::vector<double> terminal_layer(const ProblemInstance& instance, const LatticeModel& lattice);

/// Backward induction over layers [begin, end) given field.y[end]. At each
/// node: (E, Z) = project(Y_{k+1}); Y solves Y = E + f(t_k, Y, Z) dt by
/// fixed-point iteration from Y = E (implicit in y, explicit in z).
SweepStats backward_sweep(const Driver& driver, const LatticeModel& lattice, SolutionField& field, int begin, int end,
                          const BackwardOptions& opts);

SolutionField backward_solve(const ProblemInstance& instance, const LatticeModel& lattice,
                             const BackwardOptions& opts = {});

struct PicardOptions {
    double tol = 1e-10;
    int max_iter = 200;
    std::optional<double> z_truncation;
    ExecPolicy policy = ExecPolicy::Parallel;
};

enum class PicardStatus { Converged, MaxIterations, Diverged };
const char* picard_status_name(PicardStatus s);

struct PicardOutcome {
    PicardStatus status = PicardStatus::MaxIterations;
    int iterations = 0;
    std::vector<double> trace; // sup |Y^(m+1) - Y^(m)| per iteration
};

/// Picard iteration over layers [begin, end) with the generator frozen at the
/// previous iterate. `field` holds the initial iterate on the window and the
/// terminal values at layer `end`; on return it holds the last iterate.
PicardOutcome picard_sweep(const Driver& driver, const LatticeModel& lattice, SolutionField& field, int begin, int end,
                           const PicardOptions& opts);

struct PicardResult {
    SolutionField field;
    PicardOutcome outcome;
    bool converged() const { return outcome.status == PicardStatus::Converged; }
};

/// Whole-horizon Picard solve. `init` (optional) supplies Y^(0), Z^(0);
/// otherwise the iteration starts from zero. Never throws on
/// nonconvergence: inspect the outcome.
PicardResult picard_solve(const ProblemInstance& instance, const LatticeModel& lattice, const SolutionField* init,
                          const PicardOptions& opts = {});

double sup_norm_y(const SolutionField& field);
double sup_norm_y(const SolutionField& field, int begin, int end);

/// sqrt of max over (layer, node) of E[sum_{j>=k} |Z_j|^2 dt | node].
double estimate_bmo(const SolutionField& field, const LatticeModel& lattice);

struct FieldDiff {
    double max_abs = 0.0;
    int layer = 0;
    std::size_t node = 0;
    int component = 0;
};

/// Largest |a.Y - b.Y| over all layers, nodes and components.
FieldDiff max_abs_diff_y(const SolutionField& a, const SolutionField& b);

/// CSV with header layer,nodeIndex,t,W_1..W_d,Y_1..Y_n,Z_11..Z_nd. The
/// terminal layer leaves the Z columns empty.
void write_solution_csv(std::ostream& os, const SolutionField& field, const LatticeModel& lattice);

void check_compatible(const ProblemInstance& instance, const LatticeModel& lattice);

} // namespace qbsde
