#pragma once

#include "qbsde/engine.hpp"

#include <optional>
#include <span>
#include <string>
#include <vector>

namespace qbsde {

// ---- Stitching -------------------------------------------------------------

enum class StitchMode { Picard, Direct };

struct StitchChunk {
    int begin = 0; // layer indices, begin < end
    int end = 0;
    int iterations = 0;
    double sup_change = 0.0; // last Picard sup-change (0 in direct mode)
    double sup_norm = 0.0;   // sup |Y| over the chunk's layers
    bool within_lambda = true;
    PicardStatus status = PicardStatus::Converged;
};

struct StitchHalving {
    int at_layer = 0; // end layer of the chunk that failed
    int from_layers = 0;
    int to_layers = 0;
    PicardStatus cause = PicardStatus::MaxIterations;
};

/// Chunks are listed from T backward to 0.
struct StitchPlan {
    int chunk_layers = 0; // requested chunk length in layers
    bool adaptive = false;
    std::vector<StitchChunk> chunks;
    std::vector<StitchHalving> halvings;
    bool converged = true;
};

struct StitchOptions {
    /// Chunk length in time units; nullopt = adaptive, starting from T.
    std::optional<double> horizon;
    StitchMode mode = StitchMode::Picard;
    PicardOptions picard;
    BackwardOptions backward;
    /// A priori bound that each chunk's sup-norm is compared against.
    std::optional<double> lambda;
};

struct StitchResult {
    SolutionField field;
    StitchPlan plan;
};

/// Solves chunk by chunk from T backward, each chunk taking the previous
/// chunk's boundary layer as terminal data. A fixed horizon must span at
/// least one layer and is rounded to whole layers. In adaptive mode a chunk
/// whose Picard iteration fails is retried with half the length (throws
/// ConvergenceError once a single layer fails). With a fixed horizon a
/// failed chunk stops the solve and is reported in the plan.
StitchResult solve_stitched(const ProblemInstance& instance, const LatticeModel& lattice, const StitchOptions& opts);

// ---- Frozen-y contraction --------------------------------------------------

struct ContractionInterval {
    int begin = 0;
    int end = 0;
    std::vector<double> changes; // sup-change per outer iteration
};

struct ContractionTrace {
    double max_length = 0.0; // min(1/(2 beta), T)
    std::vector<ContractionInterval> intervals; // from T backward
};

struct ContractionOptions {
    double tol = 1e-10;
    int max_outer = 200;
    BackwardOptions backward;
};

struct ContractionResult {
    SolutionField field; // one component
    ContractionTrace trace;
};

/// Number of sub-intervals used for Lipschitz constant `lip_beta` on [0, T].
int contraction_interval_count(double lip_beta, double horizon);

/// Solves a scalar problem by iterating y -> Y, where Y solves the BSDE with
/// the generator's y-argument frozen at y. `driver` must have one component.
ContractionResult frozen_y_contraction(const Driver& driver, std::span<const double> terminal, double lip_beta,
                                       const LatticeModel& lattice, const ContractionOptions& opts);

/// A scalar driver y-frozen at a stored field (layer, node) value.
class FrozenYDriver final : public Driver {
public:
    FrozenYDriver(const Driver& inner, const SolutionField& frozen) : inner_(inner), frozen_(frozen) {}
    int components() const override { return 1; }
    bool y_dependent() const override { return false; }
    void evaluate(int layer, std::size_t node, double t, std::span<const double>, std::span<const double> z,
                  std::span<double> out) const override {
        inner_.evaluate(layer, node, t, frozen_.y_at(layer, node), z, out);
    }

private:
    const Driver& inner_;
    const SolutionField& frozen_;
};

/// Component i of a triangular model with components 0..i-1 taken node-wise
/// from an already-solved field.
class SubstitutedComponentDriver final : public Driver {
public:
    SubstitutedComponentDriver(const GeneratorModel& gen, int component, const SolutionField& solved);
    int components() const override { return 1; }
    bool y_dependent() const override { return y_dependent_; }
    void evaluate(int layer, std::size_t node, double t, std::span<const double> y, std::span<const double> z,
                  std::span<double> out) const override;

private:
    const GeneratorModel& gen_;
    int component_;
    const SolutionField& solved_;
    bool y_dependent_;
};

struct TriangularResult {
    SolutionField field;
    std::vector<ContractionTrace> traces; // per component
};

/// Solves components 1..n in order, each as a scalar problem via
/// frozen_y_contraction with the already-solved components substituted.
TriangularResult solve_triangular(const ProblemInstance& instance, const LatticeModel& lattice,
                                  const ContractionOptions& opts);

// ---- Oracles ---------------------------------------------------------------

/// Y = (1/gamma) log E[exp(gamma xi) | node] on every layer (Z left zero);
/// gamma = 0 gives E[xi | node]. `terminal` holds one value per terminal node.
SolutionField oracle_pure_quadratic(double gamma, std::span<const double> terminal, const LatticeModel& lattice);

/// The same value at the root only, summing a lattice with `steps` layers
/// through binomial weights, without storing intermediate layers.
double oracle_pure_quadratic_root(double gamma, const TerminalCondition& terminal, double horizon, int d, int steps,
                                  std::size_t max_nodes = kDefaultMaxNodes);

/// Closed form for f = a y + c: Y = e^{a(T-t)} E[xi | node] + (c/a)(e^{a(T-t)} - 1).
SolutionField oracle_linear(double a, double c, std::span<const double> terminal, const LatticeModel& lattice);

/// Whole-system Picard with tolerance `tight_tol` and 10x the iteration cap.
PicardResult oracle_joint_picard(const ProblemInstance& instance, const LatticeModel& lattice, double tight_tol,
                                 const PicardOptions& base = {});

/// gamma if the instance is scalar with driver (gamma/2)|z1|^2 exactly.
std::optional<double> match_pure_quadratic(const ProblemInstance& instance);

struct LinearCoefficients {
    double a = 0.0;
    double c = 0.0;
};
/// (a, c) if the instance is scalar with driver a y1 + c.
std::optional<LinearCoefficients> match_linear(const ProblemInstance& instance);

} // namespace qbsde
