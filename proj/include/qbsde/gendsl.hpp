#pragma once

#include "qbsde/errors.hpp"

#include <cstddef>
#include <cstdint>
#include <map>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace qbsde {

/// Problem dimensions an expression is checked against: n components of y
/// (and rows of z), d Brownian components (columns of z, inputs w).
struct Dims {
    int n = 1;
    int d = 1;
    bool operator==(const Dims&) const = default;
};

/// Generator expressions see (t, y, z); terminal expressions see (t, w).
enum class ExprContext { Generator, Terminal };

enum class Op : std::uint8_t {
    Number,
    Time,
    YVar,     // y<i>
    ZRow,     // z<i>, only as the argument of norm/norm2
    WVar,     // w<j>
    NormZ,    // Frobenius norm of z
    NormY,    // Euclidean norm of y
    Neg,
    Add,
    Sub,
    Mul,
    Div,
    Pow,
    Sin,
    Cos,
    Exp,
    Log,
    Abs,
    Sign,
    Sqrt,
    NormRow,  // norm(z<i>)
    Norm2Row, // norm2(z<i>)
    Clamp,
};

/// Which variables an expression reads. Indices are 0-based.
struct VariableUse {
    bool time = false;
    std::vector<bool> y;
    std::vector<bool> z;
    std::vector<bool> w;
    bool norm_y = false;
    bool norm_z = false;

    bool reads_y() const;
};

/// Immutable parsed expression. Nodes are stored in a flat array; children
/// are referenced by index. Safe to share and evaluate concurrently.
class Expr {
public:
    struct Node {
        Op op = Op::Number;
        double value = 0.0;  // Number literal
        int index = -1;      // 0-based variable index
        std::size_t pos = 0; // byte offset in the source
        int args[3] = {-1, -1, -1};
    };

    Expr() = default;

    const std::vector<Node>& nodes() const noexcept { return nodes_; }
    int root() const noexcept { return root_; }
    Dims dims() const noexcept { return dims_; }
    ExprContext context() const noexcept { return context_; }
    const std::string& source() const noexcept { return source_; }

    int depth() const;
    VariableUse variables() const;
    /// Fully parenthesised text that reparses to a structurally equal tree.
    std::string to_string() const;
    /// Same tree shape, ops, literals and variable indices (positions ignored).
    bool structurally_equal(const Expr& other) const;
    /// True when the expression is the literal 0 (or empty).
    bool is_zero_literal() const;

private:
    friend class Parser;
    friend Expr parse_expr(std::string_view, Dims, ExprContext);

    std::vector<Node> nodes_;
    int root_ = -1;
    Dims dims_;
    ExprContext context_ = ExprContext::Generator;
    std::string source_;
};

/// Recursive-descent parse. Precedence from tightest: unary sign, `^`
/// (right associative, same as pow), `* /`, `+ -`.
Expr parse_expr(std::string_view text, Dims dims, ExprContext context);

/// Evaluation inputs. `z` is the n x d matrix in row-major order. Spans that
/// the expression's context does not use may be empty.
struct EvalEnv {
    double t = 0.0;
    std::span<const double> y;
    std::span<const double> z;
    std::span<const double> w;
};

/// Pure evaluation. Throws EvalError (with the node's source offset) on
/// domain errors and non-finite intermediate results.
double eval_expr(const Expr& expr, const EvalEnv& env);

enum class GeneratorKind { Structured, Triangular };

/// Per-component drivers. Structured: f^i = g^i(t, z^i) + h^i(t, y, z).
/// Triangular: f^i = k^i(t, y, z).
class GeneratorModel {
public:
    static GeneratorModel structured(std::vector<Expr> g, std::vector<Expr> h);
    static GeneratorModel triangular(std::vector<Expr> k);

    GeneratorKind kind() const noexcept { return kind_; }
    Dims dims() const noexcept { return dims_; }
    int components() const noexcept { return dims_.n; }

    /// Structured parts (empty for triangular models).
    const std::vector<Expr>& g() const noexcept { return g_; }
    const std::vector<Expr>& h() const noexcept { return h_; }
    /// Triangular parts (empty for structured models).
    const std::vector<Expr>& k() const noexcept { return k_; }

    /// f^i for a 0-based component index.
    double component(int i, const EvalEnv& env) const;
    void evaluate(const EvalEnv& env, std::span<double> out) const;
    bool y_dependent() const noexcept { return y_dependent_; }

private:
    GeneratorKind kind_ = GeneratorKind::Structured;
    Dims dims_;
    std::vector<Expr> g_, h_, k_;
    bool y_dependent_ = false;
};

/// Named generators: pure_quadratic {n, d, gamma}, linear {n, d, a, c},
/// remark22 {n, d, delta}, triangular_demo {n, d}. `d` defaults to 1.
GeneratorModel catalog_generator(const std::string& name, const std::map<std::string, double>& params);

/// Component i (1-based) of a triangular model may read only y1..yi and
/// z1..zi. Throws ConfigError for structured models.
std::vector<DependencyViolation> check_triangular_deps(const GeneratorModel& gen);

} // namespace qbsde
