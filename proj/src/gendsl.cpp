#include "qbsde/gendsl.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdlib>
#include <functional>
#include <iomanip>
#include <sstream>
#include <stdexcept>

namespace qbsde {

DependencyError::DependencyError(std::vector<DependencyViolation> violations)
    : ConfigError([&] {
          std::string msg = "triangular dependency violation:";
          for (const auto& v : violations)
              msg += " component " + std::to_string(v.component) + " reads " + v.variable + ";";
          return msg;
      }()),
      violations_(std::move(violations)) {}

namespace {

enum class Tok { Number, Ident, Symbol, End };

struct Token {
    Tok kind = Tok::End;
    std::string text;
    std::size_t pos = 0;
    double value = 0.0;
};

std::string format_real(double v) {
    std::ostringstream os;
    os << std::setprecision(17) << v;
    return os.str();
}

int arity(Op op) {
    switch (op) {
    case Op::Neg: case Op::Sin: case Op::Cos: case Op::Exp: case Op::Log:
    case Op::Abs: case Op::Sign: case Op::Sqrt: case Op::NormRow: case Op::Norm2Row:
        return 1;
    case Op::Add: case Op::Sub: case Op::Mul: case Op::Div: case Op::Pow:
        return 2;
    case Op::Clamp:
        return 3;
    default:
        return 0;
    }
}

const std::map<std::string, Op>& unary_functions() {
    static const std::map<std::string, Op> table = {
        {"sin", Op::Sin}, {"cos", Op::Cos}, {"exp", Op::Exp}, {"log", Op::Log},
        {"abs", Op::Abs}, {"sign", Op::Sign}, {"sqrt", Op::Sqrt},
    };
    return table;
}

} // namespace

class Parser {
public:
    Parser(std::string_view text, Dims dims, ExprContext ctx) : text_(text), dims_(dims), ctx_(ctx) {
        if (dims.n < 1 || dims.d < 1) throw std::invalid_argument("parse_expr: dimensions must be positive");
        advance();
    }

    Expr run() {
        Expr out;
        out.dims_ = dims_;
        out.context_ = ctx_;
        out.source_ = std::string(text_);
        int root = parse_sum();
        if (cur_.kind != Tok::End) fail("unexpected token");
        out.root_ = root;
        out.nodes_ = std::move(nodes_);
        return out;
    }

private:
    [[noreturn]] void fail(const std::string& msg) const { throw ParseError(cur_.pos, msg, cur_.text); }
    [[noreturn]] void fail_at(const Token& tok, const std::string& msg) const {
        throw ParseError(tok.pos, msg, tok.text);
    }

    void advance() {
        std::size_t i = pos_;
        while (i < text_.size() && std::isspace(static_cast<unsigned char>(text_[i]))) ++i;
        cur_ = Token{};
        cur_.pos = i;
        if (i >= text_.size()) {
            cur_.kind = Tok::End;
            pos_ = i;
            return;
        }
        const char c = text_[i];
        if (std::isdigit(static_cast<unsigned char>(c)) || c == '.') {
            std::size_t j = i;
            while (j < text_.size() && std::isdigit(static_cast<unsigned char>(text_[j]))) ++j;
            if (j < text_.size() && text_[j] == '.') {
                ++j;
                while (j < text_.size() && std::isdigit(static_cast<unsigned char>(text_[j]))) ++j;
            }
            if (j < text_.size() && (text_[j] == 'e' || text_[j] == 'E')) {
                std::size_t k = j + 1;
                if (k < text_.size() && (text_[k] == '+' || text_[k] == '-')) ++k;
                if (k < text_.size() && std::isdigit(static_cast<unsigned char>(text_[k]))) {
                    while (k < text_.size() && std::isdigit(static_cast<unsigned char>(text_[k]))) ++k;
                    j = k;
                }
            }
            cur_.kind = Tok::Number;
            cur_.text = std::string(text_.substr(i, j - i));
            char* end = nullptr;
            cur_.value = std::strtod(cur_.text.c_str(), &end);
            if (end != cur_.text.c_str() + cur_.text.size() || !std::isfinite(cur_.value))
                fail("malformed number");
            pos_ = j;
            return;
        }
        if (std::isalpha(static_cast<unsigned char>(c)) || c == '_') {
            std::size_t j = i;
            while (j < text_.size() &&
                   (std::isalnum(static_cast<unsigned char>(text_[j])) || text_[j] == '_'))
                ++j;
            cur_.kind = Tok::Ident;
            cur_.text = std::string(text_.substr(i, j - i));
            pos_ = j;
            return;
        }
        static const std::string symbols = "+-*/^(),";
        cur_.text = std::string(1, c);
        if (symbols.find(c) == std::string::npos) fail("unexpected character");
        cur_.kind = Tok::Symbol;
        pos_ = i + 1;
    }

    bool at_symbol(char c) const { return cur_.kind == Tok::Symbol && cur_.text[0] == c; }

    void expect_symbol(char c) {
        if (!at_symbol(c)) fail(std::string("expected '") + c + "'");
        advance();
    }

    int add(Op op, std::size_t pos, int a = -1, int b = -1, int c = -1) {
        Expr::Node n;
        n.op = op;
        n.pos = pos;
        n.args[0] = a;
        n.args[1] = b;
        n.args[2] = c;
        nodes_.push_back(n);
        return static_cast<int>(nodes_.size()) - 1;
    }

    int parse_sum() {
        int lhs = parse_product();
        while (at_symbol('+') || at_symbol('-')) {
            const Op op = at_symbol('+') ? Op::Add : Op::Sub;
            const std::size_t pos = cur_.pos;
            advance();
            int rhs = parse_product();
            lhs = add(op, pos, lhs, rhs);
        }
        return lhs;
    }

    int parse_product() {
        int lhs = parse_power();
        while (at_symbol('*') || at_symbol('/')) {
            const Op op = at_symbol('*') ? Op::Mul : Op::Div;
            const std::size_t pos = cur_.pos;
            advance();
            int rhs = parse_power();
            lhs = add(op, pos, lhs, rhs);
        }
        return lhs;
    }

    int parse_power() {
        int base = parse_unary();
        if (at_symbol('^')) {
            const std::size_t pos = cur_.pos;
            advance();
            int exponent = parse_power();
            return add(Op::Pow, pos, base, exponent);
        }
        return base;
    }

    int parse_unary() {
        if (at_symbol('-')) {
            const std::size_t pos = cur_.pos;
            advance();
            return add(Op::Neg, pos, parse_unary());
        }
        if (at_symbol('+')) {
            advance();
            return parse_unary();
        }
        return parse_primary();
    }

    // Parses the digits after a one-letter variable prefix; returns the
    // 0-based index or throws if out of [1, limit].
    int variable_index(const Token& tok, int limit, const char* dim_name) const {
        const std::string digits = tok.text.substr(1);
        if (digits.empty() || !std::all_of(digits.begin(), digits.end(),
                                           [](char ch) { return std::isdigit(static_cast<unsigned char>(ch)); }))
            fail_at(tok, "unknown identifier");
        if (digits.size() > 6) fail_at(tok, "variable index out of range");
        const int idx = std::stoi(digits);
        if (idx < 1 || idx > limit)
            fail_at(tok, "variable index out of range (" + std::string(dim_name) + " = " +
                             std::to_string(limit) + ")");
        return idx - 1;
    }

    static bool is_indexed(const std::string& s, char prefix) {
        return s.size() >= 2 && s[0] == prefix &&
               std::all_of(s.begin() + 1, s.end(), [](char ch) { return std::isdigit(static_cast<unsigned char>(ch)); });
    }

    int parse_primary() {
        const Token tok = cur_;
        if (tok.kind == Tok::Number) {
            advance();
            int id = add(Op::Number, tok.pos);
            nodes_[id].value = tok.value;
            return id;
        }
        if (at_symbol('(')) {
            advance();
            int inner = parse_sum();
            expect_symbol(')');
            return inner;
        }
        if (tok.kind != Tok::Ident) fail("expected expression");

        const std::string& name = tok.text;
        const bool generator = ctx_ == ExprContext::Generator;
        if (name == "t") {
            advance();
            return add(Op::Time, tok.pos);
        }
        if (name == "normz" || name == "normy") {
            if (!generator) fail_at(tok, "terminal expressions may not read y or z");
            advance();
            return add(name == "normz" ? Op::NormZ : Op::NormY, tok.pos);
        }
        if (is_indexed(name, 'y')) {
            if (!generator) fail_at(tok, "terminal expressions may not read y or z");
            int id = add(Op::YVar, tok.pos);
            nodes_[id].index = variable_index(tok, dims_.n, "n");
            advance();
            return id;
        }
        if (is_indexed(name, 'z')) {
            if (!generator) fail_at(tok, "terminal expressions may not read y or z");
            fail_at(tok, "z rows may only appear inside norm() or norm2()");
        }
        if (is_indexed(name, 'w')) {
            if (generator) fail_at(tok, "generator expressions may not read w");
            int id = add(Op::WVar, tok.pos);
            nodes_[id].index = variable_index(tok, dims_.d, "d");
            advance();
            return id;
        }
        if (name == "norm" || name == "norm2") {
            if (!generator) fail_at(tok, "terminal expressions may not read y or z");
            advance();
            expect_symbol('(');
            const Token row = cur_;
            if (row.kind != Tok::Ident || !is_indexed(row.text, 'z')) fail("expected a z row such as z1");
            int zid = add(Op::ZRow, row.pos);
            nodes_[zid].index = variable_index(row, dims_.n, "n");
            advance();
            expect_symbol(')');
            return add(name == "norm" ? Op::NormRow : Op::Norm2Row, tok.pos, zid);
        }
        if (auto it = unary_functions().find(name); it != unary_functions().end()) {
            advance();
            expect_symbol('(');
            int a = parse_sum();
            expect_symbol(')');
            return add(it->second, tok.pos, a);
        }
        if (name == "pow") {
            advance();
            expect_symbol('(');
            int a = parse_sum();
            expect_symbol(',');
            int b = parse_sum();
            expect_symbol(')');
            return add(Op::Pow, tok.pos, a, b);
        }
        if (name == "clamp") {
            advance();
            expect_symbol('(');
            int a = parse_sum();
            expect_symbol(',');
            int lo = parse_sum();
            expect_symbol(',');
            int hi = parse_sum();
            expect_symbol(')');
            return add(Op::Clamp, tok.pos, a, lo, hi);
        }
        fail_at(tok, "unknown identifier");
    }

    std::string_view text_;
    Dims dims_;
    ExprContext ctx_;
    std::size_t pos_ = 0;
    Token cur_;
    std::vector<Expr::Node> nodes_;
};

Expr parse_expr(std::string_view text, Dims dims, ExprContext context) {
    return Parser(text, dims, context).run();
}

bool VariableUse::reads_y() const {
    return norm_y || std::any_of(y.begin(), y.end(), [](bool b) { return b; });
}

int Expr::depth() const {
    if (root_ < 0) return 0;
    std::function<int(int)> rec = [&](int id) {
        int best = 0;
        for (int a : nodes_[id].args)
            if (a >= 0) best = std::max(best, rec(a));
        return best + 1;
    };
    return rec(root_);
}

VariableUse Expr::variables() const {
    VariableUse use;
    use.y.assign(dims_.n, false);
    use.z.assign(dims_.n, false);
    use.w.assign(dims_.d, false);
    for (const auto& node : nodes_) {
        switch (node.op) {
        case Op::Time: use.time = true; break;
        case Op::YVar: use.y[node.index] = true; break;
        case Op::ZRow: use.z[node.index] = true; break;
        case Op::WVar: use.w[node.index] = true; break;
        case Op::NormY: use.norm_y = true; break;
        case Op::NormZ: use.norm_z = true; break;
        default: break;
        }
    }
    return use;
}

std::string Expr::to_string() const {
    if (root_ < 0) return "0";
    std::function<std::string(int)> rec = [&](int id) -> std::string {
        const Node& n = nodes_[id];
        auto arg = [&](int k) { return rec(n.args[k]); };
        switch (n.op) {
        case Op::Number: return format_real(n.value);
        case Op::Time: return "t";
        case Op::YVar: return "y" + std::to_string(n.index + 1);
        case Op::ZRow: return "z" + std::to_string(n.index + 1);
        case Op::WVar: return "w" + std::to_string(n.index + 1);
        case Op::NormZ: return "normz";
        case Op::NormY: return "normy";
        case Op::Neg: return "(-" + arg(0) + ")";
        case Op::Add: return "(" + arg(0) + " + " + arg(1) + ")";
        case Op::Sub: return "(" + arg(0) + " - " + arg(1) + ")";
        case Op::Mul: return "(" + arg(0) + " * " + arg(1) + ")";
        case Op::Div: return "(" + arg(0) + " / " + arg(1) + ")";
        case Op::Pow: return "pow(" + arg(0) + ", " + arg(1) + ")";
        case Op::Sin: return "sin(" + arg(0) + ")";
        case Op::Cos: return "cos(" + arg(0) + ")";
        case Op::Exp: return "exp(" + arg(0) + ")";
        case Op::Log: return "log(" + arg(0) + ")";
        case Op::Abs: return "abs(" + arg(0) + ")";
        case Op::Sign: return "sign(" + arg(0) + ")";
        case Op::Sqrt: return "sqrt(" + arg(0) + ")";
        case Op::NormRow: return "norm(" + arg(0) + ")";
        case Op::Norm2Row: return "norm2(" + arg(0) + ")";
        case Op::Clamp: return "clamp(" + arg(0) + ", " + arg(1) + ", " + arg(2) + ")";
        }
        return "?";
    };
    return rec(root_);
}

bool Expr::structurally_equal(const Expr& other) const {
    if (dims_ != other.dims_) return false;
    if ((root_ < 0) != (other.root_ < 0)) return false;
    if (root_ < 0) return true;
    std::function<bool(int, int)> rec = [&](int a, int b) {
        const Node& x = nodes_[a];
        const Node& y = other.nodes_[b];
        if (x.op != y.op || x.index != y.index) return false;
        if (x.op == Op::Number && x.value != y.value) return false;
        for (int k = 0; k < arity(x.op); ++k)
            if (!rec(x.args[k], y.args[k])) return false;
        return true;
    };
    return rec(root_, other.root_);
}

bool Expr::is_zero_literal() const {
    return root_ < 0 || (nodes_[root_].op == Op::Number && nodes_[root_].value == 0.0);
}

namespace {

struct Evaluator {
    const Expr& expr;
    const EvalEnv& env;
    int d;

    double row_norm2(int row) const {
        double s = 0.0;
        for (int j = 0; j < d; ++j) {
            const double v = env.z[static_cast<std::size_t>(row) * d + j];
            s += v * v;
        }
        return s;
    }

    double run(int id) const {
        const Expr::Node& n = expr.nodes()[id];
        auto arg = [&](int k) { return run(n.args[k]); };
        double r = 0.0;
        switch (n.op) {
        case Op::Number: return n.value;
        case Op::Time: return env.t;
        case Op::YVar: return env.y[n.index];
        case Op::WVar: return env.w[n.index];
        case Op::ZRow: throw EvalError(n.pos, "bare z row");
        case Op::NormZ: {
            double s = 0.0;
            for (double v : env.z) s += v * v;
            r = std::sqrt(s);
            break;
        }
        case Op::NormY: {
            double s = 0.0;
            for (double v : env.y) s += v * v;
            r = std::sqrt(s);
            break;
        }
        case Op::NormRow: r = std::sqrt(row_norm2(expr.nodes()[n.args[0]].index)); break;
        case Op::Norm2Row: r = row_norm2(expr.nodes()[n.args[0]].index); break;
        case Op::Neg: r = -arg(0); break;
        case Op::Add: r = arg(0) + arg(1); break;
        case Op::Sub: r = arg(0) - arg(1); break;
        case Op::Mul: r = arg(0) * arg(1); break;
        case Op::Div: {
            const double a = arg(0);
            const double b = arg(1);
            if (b == 0.0) throw EvalError(n.pos, "division by zero");
            r = a / b;
            break;
        }
        case Op::Pow: {
            const double a = arg(0);
            const double b = arg(1);
            if (a < 0.0 && std::trunc(b) != b) throw EvalError(n.pos, "negative base with non-integer exponent");
            if (a == 0.0 && b < 0.0) throw EvalError(n.pos, "division by zero in pow");
            r = std::pow(a, b);
            break;
        }
        case Op::Sin: r = std::sin(arg(0)); break;
        case Op::Cos: r = std::cos(arg(0)); break;
        case Op::Exp: r = std::exp(arg(0)); break;
        case Op::Log: {
            const double a = arg(0);
            if (!(a > 0.0)) throw EvalError(n.pos, "log of nonpositive argument");
            r = std::log(a);
            break;
        }
        case Op::Abs: r = std::abs(arg(0)); break;
        case Op::Sign: {
            const double a = arg(0);
            r = static_cast<double>((a > 0.0) - (a < 0.0));
            break;
        }
        case Op::Sqrt: {
            const double a = arg(0);
            if (a < 0.0) throw EvalError(n.pos, "sqrt of negative argument");
            r = std::sqrt(a);
            break;
        }
        case Op::Clamp: {
            const double a = arg(0);
            const double lo = arg(1);
            const double hi = arg(2);
            if (lo > hi) throw EvalError(n.pos, "clamp with lo > hi");
            r = std::clamp(a, lo, hi);
            break;
        }
        }
        if (!std::isfinite(r)) throw EvalError(n.pos, "non-finite result");
        return r;
    }
};

} // namespace

double eval_expr(const Expr& expr, const EvalEnv& env) {
    if (expr.root() < 0) return 0.0;
    const Dims dims = expr.dims();
    if (expr.context() == ExprContext::Generator) {
        if (env.y.size() != static_cast<std::size_t>(dims.n) ||
            env.z.size() != static_cast<std::size_t>(dims.n) * dims.d)
            throw std::invalid_argument("eval_expr: environment does not match (n, d)");
    } else if (env.w.size() != static_cast<std::size_t>(dims.d)) {
        throw std::invalid_argument("eval_expr: terminal environment does not match d");
    }
    return Evaluator{expr, env, dims.d}.run(expr.root());
}

GeneratorModel GeneratorModel::structured(std::vector<Expr> g, std::vector<Expr> h) {
    if (g.empty() || g.size() != h.size())
        throw DimensionError("structured generator needs one g and one h per component");
    GeneratorModel m;
    m.kind_ = GeneratorKind::Structured;
    m.dims_ = g.front().dims();
    if (m.dims_.n != static_cast<int>(g.size()))
        throw DimensionError("structured generator: expected " + std::to_string(m.dims_.n) + " components, got " +
                             std::to_string(g.size()));
    for (std::size_t i = 0; i < g.size(); ++i) {
        for (const Expr* e : {&g[i], &h[i]}) {
            if (e->dims() != m.dims_ || e->context() != ExprContext::Generator)
                throw DimensionError("structured generator: component expressions disagree on dimensions");
        }
        const VariableUse use = g[i].variables();
        bool ok = !use.reads_y() && !use.norm_z;
        for (int j = 0; j < m.dims_.n; ++j)
            if (use.z[j] && j != static_cast<int>(i)) ok = false;
        if (!ok)
            throw ConfigError("generator." + std::to_string(i + 1) + ".g may depend only on t and z" +
                              std::to_string(i + 1));
        if (h[i].variables().reads_y()) m.y_dependent_ = true;
    }
    m.g_ = std::move(g);
    m.h_ = std::move(h);
    return m;
}

GeneratorModel GeneratorModel::triangular(std::vector<Expr> k) {
    if (k.empty()) throw DimensionError("triangular generator needs at least one component");
    GeneratorModel m;
    m.kind_ = GeneratorKind::Triangular;
    m.dims_ = k.front().dims();
    if (m.dims_.n != static_cast<int>(k.size()))
        throw DimensionError("triangular generator: expected " + std::to_string(m.dims_.n) + " components, got " +
                             std::to_string(k.size()));
    for (const auto& e : k) {
        if (e.dims() != m.dims_ || e.context() != ExprContext::Generator)
            throw DimensionError("triangular generator: component expressions disagree on dimensions");
        if (e.variables().reads_y()) m.y_dependent_ = true;
    }
    m.k_ = std::move(k);
    return m;
}

double GeneratorModel::component(int i, const EvalEnv& env) const {
    if (kind_ == GeneratorKind::Triangular) return eval_expr(k_[i], env);
    return eval_expr(g_[i], env) + eval_expr(h_[i], env);
}

void GeneratorModel::evaluate(const EvalEnv& env, std::span<double> out) const {
    for (int i = 0; i < dims_.n; ++i) out[i] = component(i, env);
}

namespace {

double catalog_param(const std::string& name, const std::map<std::string, double>& params, const std::string& key) {
    auto it = params.find(key);
    if (it == params.end()) throw ConfigError("catalog generator " + name + ": missing parameter " + key);
    return it->second;
}

Dims catalog_dims(const std::string& name, const std::map<std::string, double>& params) {
    const double n = catalog_param(name, params, "n");
    const double d = params.count("d") ? params.at("d") : 1.0;
    if (n < 1 || std::trunc(n) != n || d < 1 || std::trunc(d) != d)
        throw ParameterRangeError("catalog generator " + name + ": n and d must be positive integers");
    return Dims{static_cast<int>(n), static_cast<int>(d)};
}

} // namespace

GeneratorModel catalog_generator(const std::string& name, const std::map<std::string, double>& params) {
    auto gen = [](const std::string& s, Dims dims) { return parse_expr(s, dims, ExprContext::Generator); };
    if (name == "pure_quadratic") {
        const Dims dims = catalog_dims(name, params);
        const double gamma = catalog_param(name, params, "gamma");
        if (!(gamma > 0)) throw ParameterRangeError("pure_quadratic: gamma must be positive");
        std::vector<Expr> g, h;
        for (int i = 1; i <= dims.n; ++i) {
            g.push_back(gen(format_real(gamma / 2) + "*norm2(z" + std::to_string(i) + ")", dims));
            h.push_back(gen("0", dims));
        }
        return GeneratorModel::structured(std::move(g), std::move(h));
    }
    if (name == "linear") {
        const Dims dims = catalog_dims(name, params);
        const double a = catalog_param(name, params, "a");
        const double c = catalog_param(name, params, "c");
        std::vector<Expr> g, h;
        for (int i = 1; i <= dims.n; ++i) {
            g.push_back(gen("0", dims));
            h.push_back(gen(format_real(a) + "*y" + std::to_string(i) + " + " + format_real(c), dims));
        }
        return GeneratorModel::structured(std::move(g), std::move(h));
    }
    if (name == "remark22") {
        const Dims dims = catalog_dims(name, params);
        const double delta = catalog_param(name, params, "delta");
        if (!(delta >= 0 && delta < 1)) throw ParameterRangeError("remark22: delta must lie in [0, 1)");
        std::vector<Expr> g, h;
        const std::string hs = "normy + sin(pow(normz, " + format_real(1 + delta) + ")) + log(normz + 1)";
        for (int i = 1; i <= dims.n; ++i) {
            const std::string zi = "z" + std::to_string(i);
            g.push_back(gen("norm2(" + zi + ")*sin(log(norm(" + zi + ") + 1))", dims));
            h.push_back(gen(hs, dims));
        }
        return GeneratorModel::structured(std::move(g), std::move(h));
    }
    if (name == "triangular_demo") {
        const Dims dims = catalog_dims(name, params);
        std::vector<Expr> k;
        k.push_back(gen("0.5*norm2(z1)", dims));
        for (int i = 2; i <= dims.n; ++i)
            k.push_back(gen("y" + std::to_string(i - 1) + " + 0.5*norm2(z" + std::to_string(i) + ")", dims));
        return GeneratorModel::triangular(std::move(k));
    }
    throw ConfigError("unknown catalog generator: " + name);
}

std::vector<DependencyViolation> check_triangular_deps(const GeneratorModel& gen) {
    if (gen.kind() != GeneratorKind::Triangular) throw ConfigError("not triangular");
    std::vector<DependencyViolation> out;
    const int n = gen.components();
    for (int i = 0; i < n; ++i) {
        const VariableUse use = gen.k()[i].variables();
        for (int j = i + 1; j < n; ++j) {
            if (use.y[j]) out.push_back({i + 1, "y" + std::to_string(j + 1)});
            if (use.z[j]) out.push_back({i + 1, "z" + std::to_string(j + 1)});
        }
        if (i + 1 < n && use.norm_y) out.push_back({i + 1, "normy"});
        if (i + 1 < n && use.norm_z) out.push_back({i + 1, "normz"});
    }
    return out;
}

} // namespace qbsde
