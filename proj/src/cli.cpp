#include "qbsde/cli.hpp"

#include "qbsde/certs.hpp"

#include <CLI11.hpp>

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

namespace qbsde {

namespace {

std::string fmt(double v) {
    if (std::isnan(v)) return "nan";
    if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

class Report {
public:
    void add(const std::string& key, const std::string& value) { lines_.push_back(key + " = " + value); }
    void add(const std::string& key, const char* value) { add(key, std::string(value)); }
    void add(const std::string& key, double value) { add(key, fmt(value)); }
    void add(const std::string& key, bool value) { add(key, std::string(value ? "true" : "false")); }
    void add(const std::string& key, int value) { add(key, std::to_string(value)); }
    void add(const std::string& key, std::size_t value) { add(key, std::to_string(value)); }
    void raw(const std::string& line) { lines_.push_back(line); }

    void write(std::ostream& os) const {
        for (const auto& l : lines_) os << l << '\n';
    }

private:
    std::vector<std::string> lines_;
};

struct Globals {
    std::string config;
    std::string out_dir;
    bool strict = false;
    std::optional<std::uint64_t> seed;
    std::optional<int> threads;
};

std::filesystem::path output_path(const Globals& g, const RunConfig* run, const std::string& name) {
    std::string dir = ".";
    if (run && run->output_dir) dir = *run->output_dir;
    if (!g.out_dir.empty()) dir = g.out_dir;
    std::error_code ec;
    std::filesystem::create_directories(dir, ec);
    if (ec) throw ConfigError("cannot create output directory '" + dir + "': " + ec.message());
    return std::filesystem::path(dir) / name;
}

std::ofstream open_output(const std::filesystem::path& p) {
    std::ofstream os(p);
    if (!os) throw ConfigError("cannot write " + p.string());
    return os;
}

LoadedConfig require_config(const Globals& g) {
    if (g.config.empty()) throw MissingKeyError("--config");
    return load_config(g.config);
}

LogGrid parse_grid(const std::string& name, const std::string& text) {
    std::vector<std::string> parts;
    std::stringstream ss(text);
    std::string item;
    while (std::getline(ss, item, ':')) parts.push_back(item);
    if (parts.size() != 3) throw ConfigError("--" + name + " expects lo:hi:count, got '" + text + "'");
    LogGrid gr;
    gr.lo = parse_real("--" + name, parts[0]);
    gr.hi = parse_real("--" + name, parts[1]);
    const long long count = parse_int("--" + name, parts[2]);
    if (count < 1 || count > 100000) throw ParameterRangeError("--" + name + ": count must lie in [1, 100000]");
    gr.count = static_cast<int>(count);
    gr.validate(name.c_str());
    return gr;
}

void add_certificate(Report& rep, const Certificate& cert, const ProblemInstance& inst) {
    rep.add("structured", cert.has_structured);
    if (cert.has_structured) {
        rep.add("c1", cert.c1);
        rep.add("lambda", cert.lambda.value());
        rep.add("lambdaLog", cert.lambda.log_value);
        rep.add("lambdaLogSpace", cert.lambda.log_space);
        rep.add("ksIntegral", cert.ks_integral);
        rep.add("h3Budget", cert.h3_budget);
        rep.add("C0", inst.params.c0);
        rep.add("h3Satisfied", cert.h3_satisfied);
        rep.add("bmoBoundLog", cert.bmo_bound_log);
    }
    rep.add("contractionHorizon", cert.contraction_horizon);
}

int cmd_certify(const Globals& g, std::ostream& out) {
    const LoadedConfig cfg = require_config(g);
    const ProblemInstance& inst = cfg.instance;
    const Certificate cert = make_certificate(inst);

    SamplerOptions so;
    so.seed = g.seed.value_or(cfg.run.seed.value_or(0));
    so.count = cfg.run.falsify_samples;
    so.y_radius = so.z_radius = cfg.run.falsify_radius;
    const FalsificationReport fr = falsify_assumptions(inst, so);

    Report rep;
    add_certificate(rep, cert, inst);
    rep.add("falsify.samples", fr.sample_count);
    rep.add("falsify.seed", std::to_string(fr.seed));
    rep.add("falsify.radius", cfg.run.falsify_radius);
    rep.add("falsify.violations", fr.violations.size());
    rep.add("falsify.domainErrors", fr.domain_errors.size());
    const std::size_t shown = std::min<std::size_t>(fr.violations.size(), 10);
    for (std::size_t j = 0; j < shown; ++j) {
        const Violation& v = fr.violations[j];
        rep.add("violation." + std::to_string(j + 1),
                std::string(assumption_name(v.id)) + " component " + std::to_string(v.component + 1) + " t " +
                    fmt(v.a.t) + " lhs " + fmt(v.lhs) + " rhs " + fmt(v.rhs));
    }
    const bool budget_fail = cert.has_structured && !cert.h3_satisfied;
    const bool strict_fail = g.strict && (budget_fail || !fr.violations.empty());
    rep.add("strict", g.strict);
    rep.add("strictFailure", strict_fail);

    auto os = open_output(output_path(g, &cfg.run, "certificate.txt"));
    rep.write(os);
    rep.write(out);
    return strict_fail ? kExitStrict : kExitOk;
}

struct CheckArgs {
    std::string x = "1e-6:1e6:60", y = "1e-6:1e6:60", C = "1e-6:1e6:60";
    bool young = false;
    std::string L = "1e-2:1e2:30", eps = "1e-2:1e2:30", z = "1e-3:1e3:40";
    std::vector<double> alphas{0.0, 0.25, 0.5, 0.9};
};

int cmd_check(const Globals& g, const CheckArgs& a, std::ostream& out) {
    std::optional<RunConfig> run;
    if (!g.config.empty()) run = load_config(g.config).run;
    const RunConfig* rp = run ? &*run : nullptr;
    if (!a.young) {
        const LogGrid xg = parse_grid("x", a.x), yg = parse_grid("y", a.y), cg = parse_grid("C", a.C);
        const LogScanResult r = scan_log_inequality(xg, yg, cg, true);
        auto os = open_output(output_path(g, rp, "check.csv"));
        os << "x,y,C,residual\n";
        for (int i = 0; i < xg.count; ++i)
            for (int j = 0; j < yg.count; ++j)
                for (int c = 0; c < cg.count; ++c)
                    os << fmt(xg.at(i)) << ',' << fmt(yg.at(j)) << ',' << fmt(cg.at(c)) << ','
                       << fmt(r.residuals[(static_cast<std::size_t>(i) * yg.count + j) * cg.count + c]) << '\n';
        out << "minResidual = " << fmt(r.min_residual) << ", argmin = (" << fmt(r.argmin[0]) << ", "
            << fmt(r.argmin[1]) << ", " << fmt(r.argmin[2]) << "), points = " << r.points
            << ", violations = " << r.violations << ", slicesOutsideCell = " << r.slices_outside_cell << '\n';
        return r.min_residual >= -kResidualSlack ? kExitOk : kExitStrict;
    }
    const LogGrid Lg = parse_grid("L", a.L), eg = parse_grid("eps", a.eps), zg = parse_grid("z", a.z);
    for (double al : a.alphas)
        if (!(al > -1 && al < 1)) throw ParameterRangeError("--alphas: values must lie in (-1, 1)");
    const YoungScanResult r = scan_young_power(a.alphas, Lg, eg, zg);
    auto os = open_output(output_path(g, rp, "check.csv"));
    os << "alpha,L,eps,z,residual\n";
    for (double al : a.alphas)
        for (int i = 0; i < Lg.count; ++i)
            for (int j = 0; j < eg.count; ++j)
                for (int k = 0; k < zg.count; ++k)
                    os << fmt(al) << ',' << fmt(Lg.at(i)) << ',' << fmt(eg.at(j)) << ',' << fmt(zg.at(k)) << ','
                       << fmt(check_young_power(Lg.at(i), al, eg.at(j), zg.at(k))) << '\n';
    out << "minResidual = " << fmt(r.min_residual) << ", argmin = (" << fmt(r.argmin[0]) << ", " << fmt(r.argmin[1])
        << ", " << fmt(r.argmin[2]) << ", " << fmt(r.argmin[3]) << "), points = " << r.points
        << ", violations = " << r.violations << '\n';
    return r.min_residual >= -kResidualSlack ? kExitOk : kExitStrict;
}

int cmd_solve(const Globals& g, std::ostream& out) {
    const LoadedConfig cfg = require_config(g);
    const ProblemInstance& inst = cfg.instance;
    const LatticeModel lattice(inst.grid, inst.d, cfg.run.max_nodes);
    const Certificate cert = make_certificate(inst);

    Report rep;
    rep.add("mode", cfg.run.mode);
    rep.add("n", inst.n);
    rep.add("d", inst.d);
    rep.add("N", inst.grid.steps());
    rep.add("T", inst.grid.horizon());

    SolveOutcome so;
    try {
        so = run_solver(inst, lattice, cfg.run);
    } catch (const ConvergenceError& e) {
        rep.add("status", "failed");
        rep.add("error", e.what());
        auto os = open_output(output_path(g, &cfg.run, "report.txt"));
        rep.write(os);
        rep.write(out);
        throw;
    }
    rep.add("status", so.status);
    rep.add("iterations", so.field.iterations);
    for (const auto& l : so.details) rep.raw(l);

    const double sup_y = sup_norm_y(so.field);
    const double bmo = estimate_bmo(so.field, lattice);
    rep.add("supY", sup_y);
    rep.add("bmoEstimate", bmo);
    rep.add("bmoEstimateLog2", bmo > 0 ? 2.0 * std::log(bmo) : -std::numeric_limits<double>::infinity());
    if (cert.has_structured) {
        rep.add("lambda", cert.lambda.value());
        rep.add("lambdaLog", cert.lambda.log_value);
        rep.add("supYWithinLambda", sup_y == 0.0 || std::log(sup_y) <= cert.lambda.log_value);
        rep.add("bmoBoundLog", cert.bmo_bound_log);
        rep.add("bmoWithinBound", bmo == 0.0 || 2.0 * std::log(bmo) <= cert.bmo_bound_log);
        rep.add("h3Satisfied", cert.h3_satisfied);
    }
    rep.add("clipCount", so.field.clip_count);
    for (std::size_t m = 0; m < so.field.residuals.size(); ++m)
        rep.add("residual." + std::to_string(m + 1), so.field.residuals[m]);

    {
        auto os = open_output(output_path(g, &cfg.run, "solution.csv"));
        write_solution_csv(os, so.field, lattice);
    }
    auto os = open_output(output_path(g, &cfg.run, "report.txt"));
    rep.write(os);
    rep.write(out);
    return so.converged ? kExitOk : kExitNonConvergence;
}

int cmd_compare(const Globals& g, const std::string& oracle, std::ostream& out) {
    const LoadedConfig cfg = require_config(g);
    const ProblemInstance& inst = cfg.instance;
    const LatticeModel lattice(inst.grid, inst.d, cfg.run.max_nodes);

    SolutionField reference;
    if (oracle == "pure_quadratic") {
        const auto gamma = match_pure_quadratic(inst);
        if (!gamma) throw ConfigError("oracle pure_quadratic needs a scalar driver (gamma/2)*norm2(z1)");
        reference = oracle_pure_quadratic(*gamma, terminal_layer(inst, lattice), lattice);
    } else if (oracle == "linear") {
        const auto lc = match_linear(inst);
        if (!lc) throw ConfigError("oracle linear needs a scalar driver a*y1 + c");
        reference = oracle_linear(lc->a, lc->c, terminal_layer(inst, lattice), lattice);
    } else if (oracle == "joint") {
        PicardOptions po;
        po.max_iter = cfg.run.max_iter;
        po.z_truncation = cfg.run.z_truncation;
        PicardResult pr = oracle_joint_picard(inst, lattice, cfg.run.tol / 100.0, po);
        if (!pr.converged())
            throw ConvergenceError(std::string("joint Picard oracle did not converge (") +
                                   picard_status_name(pr.outcome.status) + ")");
        reference = std::move(pr.field);
    } else {
        throw ConfigError("unknown oracle '" + oracle + "' (pure_quadratic, linear, joint)");
    }

    const SolveOutcome so = run_solver(inst, lattice, cfg.run);
    if (!so.converged) throw ConvergenceError("solver did not converge: " + so.status);
    const FieldDiff diff = max_abs_diff_y(so.field, reference);
    const bool pass = diff.max_abs <= cfg.run.compare_tol;

    Report rep;
    rep.add("oracle", oracle);
    rep.add("solver", cfg.run.mode);
    rep.add("maxAbsDiff", diff.max_abs);
    rep.add("layer", diff.layer);
    rep.add("node", diff.node);
    rep.add("component", diff.component + 1);
    rep.add("t", lattice.grid().time(diff.layer));
    rep.add("Y0", so.field.y[0][0]);
    rep.add("Y0Oracle", reference.y[0][0]);
    rep.add("tol", cfg.run.compare_tol);
    rep.add("pass", pass);
    auto os = open_output(output_path(g, &cfg.run, "compare.txt"));
    rep.write(os);
    rep.write(out);
    return pass ? kExitOk : kExitNonConvergence;
}

bool is_zero_generator(const GeneratorModel& gen) {
    auto zero = [](const std::vector<Expr>& v) {
        return std::all_of(v.begin(), v.end(), [](const Expr& e) { return e.is_zero_literal(); });
    };
    return zero(gen.g()) && zero(gen.h()) && zero(gen.k());
}

int cmd_converge(const Globals& g, const std::vector<int>& nlist, std::ostream& out) {
    if (nlist.size() < 3) throw ConfigError("--nlist needs at least 3 entries");
    for (std::size_t j = 0; j < nlist.size(); ++j) {
        if (nlist[j] < 1) throw ParameterRangeError("--nlist entries must be positive");
        if (j > 0 && nlist[j] <= nlist[j - 1]) throw ConfigError("--nlist must be strictly ascending");
    }
    const LoadedConfig cfg = require_config(g);
    const ProblemInstance& base = cfg.instance;
    if (base.n != 1) throw ConfigError("converge needs a scalar problem");
    double gamma = 0.0;
    if (auto gm = match_pure_quadratic(base)) gamma = *gm;
    else if (!is_zero_generator(base.generator))
        throw ConfigError("converge needs a pure quadratic or zero generator");

    const int ref_steps = 8 * nlist.back();
    const double T = base.grid.horizon();
    const double reference =
        oracle_pure_quadratic_root(gamma, base.terminal, T, base.d, ref_steps, cfg.run.max_nodes);

    std::vector<double> dts, errs;
    auto os = open_output(output_path(g, &cfg.run, "converge.csv"));
    os << "N,dt,Y0,reference,error\n";
    for (int N : nlist) {
        ProblemInstance inst = base;
        inst.grid = TimeGrid(T, N);
        const LatticeModel lattice(inst.grid, inst.d, cfg.run.max_nodes);
        const SolveOutcome so = run_solver(inst, lattice, cfg.run);
        if (!so.converged) throw ConvergenceError("solver did not converge at N = " + std::to_string(N));
        const double y0 = so.field.y[0][0];
        const double err = std::abs(y0 - reference);
        dts.push_back(inst.grid.dt());
        errs.push_back(err);
        os << N << ',' << fmt(inst.grid.dt()) << ',' << fmt(y0) << ',' << fmt(reference) << ',' << fmt(err) << '\n';
    }
    Report rep;
    rep.add("reference", reference);
    rep.add("referenceSteps", ref_steps);
    const double max_err = *std::max_element(errs.begin(), errs.end());
    if (max_err <= 1e-12) {
        rep.add("slope", "skipped");
        rep.add("pass", true);
        rep.write(out);
        return kExitOk;
    }
    // Least-squares slope of log(error) against log(dt).
    double sx = 0, sy = 0, sxx = 0, sxy = 0;
    const double m = static_cast<double>(errs.size());
    for (std::size_t j = 0; j < errs.size(); ++j) {
        const double lx = std::log(dts[j]);
        const double ly = std::log(std::max(errs[j], 1e-300));
        sx += lx;
        sy += ly;
        sxx += lx * lx;
        sxy += lx * ly;
    }
    const double slope = (m * sxy - sx * sy) / (m * sxx - sx * sx);
    const bool pass = slope >= 0.8;
    rep.add("slope", slope);
    rep.add("pass", pass);
    rep.write(out);
    return pass ? kExitOk : kExitNonConvergence;
}

} // namespace

RunConfig read_run_config(const KeyValueDoc& doc) {
    RunConfig rc;
    if (auto v = doc.find("solver.mode")) {
        if (*v != "direct" && *v != "picard" && *v != "stitched" && *v != "triangular")
            throw ConfigError("solver.mode must be direct, picard, stitched or triangular");
        rc.mode = *v;
    }
    if (auto v = doc.find_real("solver.tol")) {
        if (!(*v > 0)) throw ParameterRangeError("solver.tol must be positive");
        rc.tol = *v;
    }
    if (auto v = doc.find_int("solver.maxIter")) {
        if (*v < 1 || *v > 100'000'000) throw ParameterRangeError("solver.maxIter must be a positive integer");
        rc.max_iter = static_cast<int>(*v);
    }
    if (auto v = doc.find("solver.horizon")) {
        if (*v != "adaptive") {
            const double h = parse_real("solver.horizon", *v);
            if (!(h > 0)) throw ParameterRangeError("solver.horizon must be positive or 'adaptive'");
            rc.horizon = h;
        }
    }
    if (auto v = doc.find_real("solver.zTruncation")) {
        if (!(*v > 0)) throw ParameterRangeError("solver.zTruncation must be positive");
        rc.z_truncation = *v;
    }
    if (auto v = doc.find_int("seed")) {
        if (*v < 0) throw ParameterRangeError("seed must be nonnegative");
        rc.seed = static_cast<std::uint64_t>(*v);
    }
    if (auto v = doc.find("output.dir")) rc.output_dir = *v;
    if (auto v = doc.find_int("engine.maxNodes")) {
        if (*v < 1) throw ParameterRangeError("engine.maxNodes must be positive");
        rc.max_nodes = static_cast<std::size_t>(*v);
    }
    if (auto v = doc.find_real("compare.tol")) {
        if (!(*v >= 0)) throw ParameterRangeError("compare.tol must be nonnegative");
        rc.compare_tol = *v;
    }
    if (auto v = doc.find_int("falsify.samples")) {
        if (*v < 1) throw ParameterRangeError("falsify.samples must be positive");
        rc.falsify_samples = static_cast<std::size_t>(*v);
    }
    if (auto v = doc.find_real("falsify.radius")) {
        if (!(*v > 0)) throw ParameterRangeError("falsify.radius must be positive");
        rc.falsify_radius = *v;
    }
    return rc;
}

namespace {

LoadedConfig load_doc(const KeyValueDoc& doc) {
    LoadedConfig cfg{assemble_problem(doc), read_run_config(doc)};
    doc.reject_unknown();
    return cfg;
}

} // namespace

LoadedConfig load_config(const std::string& path) { return load_doc(KeyValueDoc::load(path)); }

LoadedConfig load_config_text(const std::string& text) { return load_doc(KeyValueDoc::parse(text)); }

SolveOutcome run_solver(const ProblemInstance& instance, const LatticeModel& lattice, const RunConfig& run) {
    SolveOutcome so;
    BackwardOptions bo;
    bo.z_truncation = run.z_truncation;
    PicardOptions po;
    po.tol = run.tol;
    po.max_iter = run.max_iter;
    po.z_truncation = run.z_truncation;

    if (run.mode == "direct") {
        so.field = backward_solve(instance, lattice, bo);
    } else if (run.mode == "picard") {
        PicardResult pr = picard_solve(instance, lattice, nullptr, po);
        so.converged = pr.converged();
        so.status = picard_status_name(pr.outcome.status);
        so.field = std::move(pr.field);
    } else if (run.mode == "stitched") {
        StitchOptions opts;
        opts.horizon = run.horizon;
        opts.picard = po;
        opts.backward = bo;
        const Certificate cert = make_certificate(instance);
        if (cert.has_structured && !cert.lambda.log_space) opts.lambda = cert.lambda.value();
        StitchResult sr = solve_stitched(instance, lattice, opts);
        so.converged = sr.plan.converged;
        so.status = sr.plan.converged ? "converged" : "chunkFailed";
        so.details.push_back("chunkLayers = " + std::to_string(sr.plan.chunk_layers));
        so.details.push_back(std::string("adaptive = ") + (sr.plan.adaptive ? "true" : "false"));
        for (std::size_t j = 0; j < sr.plan.halvings.size(); ++j) {
            const auto& h = sr.plan.halvings[j];
            so.details.push_back("halving." + std::to_string(j + 1) + " = atLayer " + std::to_string(h.at_layer) +
                                 " layers " + std::to_string(h.from_layers) + " -> " + std::to_string(h.to_layers) +
                                 " (" + picard_status_name(h.cause) + ")");
        }
        for (std::size_t j = 0; j < sr.plan.chunks.size(); ++j) {
            const auto& c = sr.plan.chunks[j];
            so.details.push_back("chunk." + std::to_string(j + 1) + " = start " + std::to_string(c.begin) + " end " +
                                 std::to_string(c.end) + " iterations " + std::to_string(c.iterations) +
                                 " supChange " + fmt(c.sup_change) + " supNorm " + fmt(c.sup_norm) + " status " +
                                 picard_status_name(c.status) + " withinLambda " +
                                 (c.within_lambda ? "true" : "false"));
        }
        so.field = std::move(sr.field);
    } else if (run.mode == "triangular") {
        ContractionOptions co;
        co.tol = run.tol;
        co.max_outer = run.max_iter;
        co.backward = bo;
        TriangularResult tr = solve_triangular(instance, lattice, co);
        for (std::size_t i = 0; i < tr.traces.size(); ++i) {
            const auto& t = tr.traces[i];
            int outer = 0;
            for (const auto& iv : t.intervals) outer += static_cast<int>(iv.changes.size());
            so.details.push_back("component." + std::to_string(i + 1) + " = subIntervals " +
                                 std::to_string(t.intervals.size()) + " outerIterations " + std::to_string(outer) +
                                 " lastChange " + fmt(t.intervals.back().changes.back()));
        }
        so.field = std::move(tr.field);
    } else {
        throw ConfigError("unknown solver.mode '" + run.mode + "'");
    }
    return so;
}

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
    CLI::App app{"Lattice solver and certificates for diagonally quadratic BSDE systems", "qbsde"};
    app.require_subcommand(1);
    app.fallthrough();

    Globals g;
    app.add_option("--config", g.config, "Model and run configuration file");
    app.add_option("--out", g.out_dir, "Output directory");
    app.add_flag("--strict", g.strict, "Fail (exit 4) when the assumption budget or falsifier fails");
    app.add_option("--seed", g.seed, "Falsifier seed");
    app.add_option("--threads", g.threads, "Worker threads")->check(CLI::PositiveNumber);

    auto* certify = app.add_subcommand("certify", "Compute certificate constants and falsify assumptions");
    auto* check = app.add_subcommand("check", "Scan the log inequality (or the Young-type bound)");
    CheckArgs ca;
    check->add_option("--x", ca.x, "x grid lo:hi:count");
    check->add_option("--y", ca.y, "y grid lo:hi:count");
    check->add_option("--C", ca.C, "C grid lo:hi:count");
    check->add_flag("--young", ca.young, "Scan the Young-type power bound instead");
    check->add_option("--L", ca.L, "L grid lo:hi:count (--young)");
    check->add_option("--eps", ca.eps, "eps grid lo:hi:count (--young)");
    check->add_option("--z", ca.z, "|z| grid lo:hi:count (--young)");
    check->add_option("--alphas", ca.alphas, "alpha values (--young)");
    auto* solve = app.add_subcommand("solve", "Solve on the lattice and write solution.csv and report.txt");
    auto* compare = app.add_subcommand("compare", "Compare the configured solver with an oracle");
    std::string oracle;
    compare->add_option("--oracle", oracle, "pure_quadratic, linear or joint")->required();
    auto* converge = app.add_subcommand("converge", "Empirical convergence order against the reference value");
    std::vector<int> nlist;
    converge->add_option("--nlist", nlist, "Ascending list of N")->required()->delimiter(',');

    std::vector<std::string> rev(args.rbegin(), args.rend());
    try {
        app.parse(rev);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e, out, err);
        return code == 0 ? kExitOk : kExitUsage;
    }

    try {
        if (g.threads) set_thread_count(*g.threads);
        if (certify->parsed()) return cmd_certify(g, out);
        if (check->parsed()) return cmd_check(g, ca, out);
        if (solve->parsed()) return cmd_solve(g, out);
        if (compare->parsed()) return cmd_compare(g, oracle, out);
        if (converge->parsed()) return cmd_converge(g, nlist, out);
    } catch (const ConfigError& e) {
        err << "error: " << e.what() << '\n';
        return kExitConfig;
    } catch (const NumericalError& e) {
        err << "error: " << e.what() << '\n';
        return kExitNonConvergence;
    } catch (const std::invalid_argument& e) {
        err << "error: " << e.what() << '\n';
        return kExitConfig;
    } catch (const std::exception& e) {
        err << "error: " << e.what() << '\n';
        return kExitNonConvergence;
    }
    return kExitUsage;
}

} // namespace qbsde
