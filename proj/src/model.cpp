#include "qbsde/model.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

namespace qbsde {

TimeGrid::TimeGrid(double horizon, int steps) : horizon_(horizon), steps_(steps) {
    if (steps < 1) throw ParameterRangeError("time grid: steps must be >= 1");
    if (!(horizon >= 0.0) || !std::isfinite(horizon)) throw ParameterRangeError("time grid: horizon must be >= 0");
}

TimeGrid build_time_grid(double horizon, int steps) { return TimeGrid(horizon, steps); }

CoefficientFunction::CoefficientFunction(std::vector<std::pair<double, double>> breakpoints)
    : pieces_(std::move(breakpoints)) {
    if (pieces_.empty()) throw ParameterRangeError("coefficient function: no breakpoints");
    if (pieces_.front().first != 0.0) throw ParameterRangeError("coefficient function: first breakpoint must be 0");
    for (std::size_t j = 0; j < pieces_.size(); ++j) {
        if (!(pieces_[j].second >= 0.0) || !std::isfinite(pieces_[j].second))
            throw ParameterRangeError("coefficient function: values must be finite and >= 0");
        if (j > 0 && !(pieces_[j].first > pieces_[j - 1].first))
            throw ParameterRangeError("coefficient function: breakpoints must be strictly increasing");
    }
}

CoefficientFunction CoefficientFunction::parse(const std::string& key, const std::string& text) {
    std::vector<std::pair<double, double>> out;
    std::stringstream ss(text);
    std::string item;
    while (std::getline(ss, item, ';')) {
        if (item.find_first_not_of(" \t") == std::string::npos) continue;
        auto eq = item.find('=');
        if (eq == std::string::npos) throw ConfigError(key + ": expected 't=v' pieces separated by ';'");
        out.emplace_back(parse_real(key, item.substr(0, eq)), parse_real(key, item.substr(eq + 1)));
    }
    try {
        return CoefficientFunction(std::move(out));
    } catch (const ParameterRangeError& e) {
        throw ParameterRangeError(key + ": " + e.what());
    }
}

double CoefficientFunction::value_at(double t) const {
    auto it = std::upper_bound(pieces_.begin(), pieces_.end(), t,
                               [](double x, const std::pair<double, double>& p) { return x < p.first; });
    if (it == pieces_.begin()) return pieces_.front().second;
    return std::prev(it)->second;
}

double CoefficientFunction::integral(double T) const {
    return integral_of(T, [](double v) { return v; });
}

double CoefficientFunction::max_value() const {
    double m = 0.0;
    for (const auto& p : pieces_) m = std::max(m, p.second);
    return m;
}

void AssumptionParams::validate() const {
    if (!(gamma > 0.0)) throw ParameterRangeError("params.gamma must be > 0");
    if (!(lip_k >= 0.0)) throw ParameterRangeError("params.K must be >= 0");
    if (!(delta >= 0.0 && delta < 1.0)) throw ParameterRangeError("params.delta must lie in [0, 1)");
    if (!(c0 > 0.0)) throw ParameterRangeError("params.C0 must be > 0");
    if (!(power_alpha > -1.0 && power_alpha < 1.0))
        throw ParameterRangeError("triangular.powerAlpha must lie in (-1, 1)");
    if (!(lip_beta >= 0.0)) throw ParameterRangeError("triangular.lipBeta must be >= 0");
    if (!(a1_c >= 0.0) || !(a2_c >= 0.0) || !(xi_bound >= 0.0))
        throw ParameterRangeError("triangular.C1, C2, C3 must be >= 0");
}

void TerminalCondition::evaluate(double horizon, std::span<const double> w, std::span<double> out) const {
    EvalEnv env;
    env.t = horizon;
    env.w = w;
    for (std::size_t i = 0; i < components.size(); ++i) out[i] = eval_expr(components[i], env);
}

void ProblemInstance::validate() const {
    if (n < 1 || d < 1) throw DimensionError("problem.n and problem.d must be >= 1");
    if (generator.components() != n || generator.dims().d != d)
        throw DimensionError("generator has " + std::to_string(generator.components()) +
                             " components, problem.n = " + std::to_string(n));
    if (static_cast<int>(terminal.components.size()) != n)
        throw DimensionError("terminal has " + std::to_string(terminal.components.size()) +
                             " components, problem.n = " + std::to_string(n));
    for (const auto& e : terminal.components)
        if (e.dims() != dims() || e.context() != ExprContext::Terminal)
            throw DimensionError("terminal expression dimensions do not match the problem");
    if (!(terminal.declared_bound >= 0.0)) throw ParameterRangeError("terminal.bound must be >= 0");
    params.validate();
    if (generator.kind() == GeneratorKind::Triangular) {
        auto violations = check_triangular_deps(generator);
        if (!violations.empty()) throw DependencyError(std::move(violations));
    }
}

namespace {

void read_structured_params(const KeyValueDoc& doc, AssumptionParams& p) {
    p.gamma = doc.require_real("params.gamma");
    p.lip_k = doc.require_real("params.K");
    p.delta = doc.require_real("params.delta");
    p.c0 = doc.require_real("params.C0");
    if (auto s = doc.find("params.alpha")) p.alpha = CoefficientFunction::parse("params.alpha", *s);
    if (auto s = doc.find("params.beta")) p.beta = CoefficientFunction::parse("params.beta", *s);
    if (auto s = doc.find("params.eta")) p.eta = CoefficientFunction::parse("params.eta", *s);
}

void read_triangular_params(const KeyValueDoc& doc, AssumptionParams& p) {
    p.power_alpha = doc.require_real("triangular.powerAlpha");
    p.lip_beta = doc.require_real("triangular.lipBeta");
    p.a1_c = doc.require_real("triangular.C1");
    p.a2_c = doc.require_real("triangular.C2");
    p.xi_bound = doc.require_real("triangular.C3");
}

int positive_int(const KeyValueDoc& doc, const std::string& key) {
    const long long v = doc.require_int(key);
    if (v < 1 || v > 1'000'000) throw ParameterRangeError(key + " must be a positive integer");
    return static_cast<int>(v);
}

Expr parse_keyed(const KeyValueDoc& doc, const std::string& key, Dims dims, ExprContext ctx) {
    const std::string& text = doc.require(key);
    try {
        return parse_expr(text, dims, ctx);
    } catch (const ParseError& e) {
        throw ParseError(e.position(), key + ": " + e.message(), e.token());
    }
}

GeneratorModel read_generator(const KeyValueDoc& doc, Dims dims) {
    if (auto name = doc.find("generator.catalog")) {
        std::map<std::string, double> cp{{"n", dims.n}, {"d", dims.d}};
        for (const char* key : {"gamma", "delta", "a", "c"})
            if (auto v = doc.find_real(std::string("generator.catalog.") + key)) cp[key] = *v;
        auto gen = catalog_generator(*name, cp);
        if (auto kind = doc.find("generator.kind")) {
            const bool tri = gen.kind() == GeneratorKind::Triangular;
            if (*kind != (tri ? "triangular" : "structured"))
                throw ConfigError("generator.kind disagrees with generator.catalog");
        }
        return gen;
    }
    const std::string& kind = doc.require("generator.kind");
    if (kind == "structured") {
        std::vector<Expr> g, h;
        for (int i = 1; i <= dims.n; ++i) {
            const std::string base = "generator." + std::to_string(i);
            g.push_back(parse_keyed(doc, base + ".g", dims, ExprContext::Generator));
            h.push_back(parse_keyed(doc, base + ".h", dims, ExprContext::Generator));
        }
        return GeneratorModel::structured(std::move(g), std::move(h));
    }
    if (kind == "triangular") {
        std::vector<Expr> k;
        for (int i = 1; i <= dims.n; ++i)
            k.push_back(parse_keyed(doc, "generator." + std::to_string(i) + ".k", dims, ExprContext::Generator));
        return GeneratorModel::triangular(std::move(k));
    }
    throw ConfigError("generator.kind must be 'structured' or 'triangular', got '" + kind + "'");
}

} // namespace

ProblemInstance assemble_problem(const KeyValueDoc& doc) {
    ProblemInstance inst;
    inst.n = positive_int(doc, "problem.n");
    inst.d = positive_int(doc, "problem.d");
    inst.grid = TimeGrid(doc.require_real("problem.T"), positive_int(doc, "grid.N"));
    inst.generator = read_generator(doc, inst.dims());

    for (int i = 1; i <= inst.n; ++i)
        inst.terminal.components.push_back(
            parse_keyed(doc, "terminal." + std::to_string(i), inst.dims(), ExprContext::Terminal));
    inst.terminal.declared_bound = doc.require_real("terminal.bound");

    const bool triangular = inst.generator.kind() == GeneratorKind::Triangular;
    const bool any_params = doc.contains("params.gamma") || doc.contains("params.K") ||
                            doc.contains("params.delta") || doc.contains("params.C0") ||
                            doc.contains("params.alpha") || doc.contains("params.beta") ||
                            doc.contains("params.eta");
    if (!triangular || any_params) {
        read_structured_params(doc, inst.params);
        inst.has_structured_params = true;
    }
    const bool any_tri = doc.contains("triangular.powerAlpha") || doc.contains("triangular.lipBeta") ||
                         doc.contains("triangular.C1") || doc.contains("triangular.C2") ||
                         doc.contains("triangular.C3");
    if (triangular || any_tri) {
        read_triangular_params(doc, inst.params);
        inst.has_triangular_params = true;
    }
    inst.validate();
    return inst;
}

double matrix_norm(std::span<const double> z) {
    double s = 0.0;
    for (double v : z) {
        if (!std::isfinite(v)) throw NumericalError("matrix_norm: non-finite entry");
        s += v * v;
    }
    return std::sqrt(s);
}

double row_norm(std::span<const double> z, int d, int i) {
    return matrix_norm(z.subspan(static_cast<std::size_t>(i) * d, d));
}

double vector_norm(std::span<const double> v) { return matrix_norm(v); }

} // namespace qbsde
