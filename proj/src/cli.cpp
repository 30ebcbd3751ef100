#include "safecert/cli.hpp"

#include "safecert/experiments.hpp"
#include "safecert/filter.hpp"
#include "safecert/io.hpp"
#include "safecert/risk.hpp"
#include "safecert/synth.hpp"
#include "safecert/verify.hpp"

#include <CLI11.hpp>

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <iomanip>
#include <iostream>
#include <sstream>

namespace safecert::cli {

namespace fs = std::filesystem;

namespace {

struct UsageError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

std::string fmt6(double v) {
    std::ostringstream os;
    os << std::setprecision(6) << v;
    return os.str();
}

// Returns the first validation problem for the problem's mode, if any.
void require_valid(const io::Problem& p) {
    const auto report = validate_problem(p.plant, p.spec, p.noise, p.params.mode);
    if (!report.valid()) throw UsageError("invalid problem:\n" + report.summary());
}

double initial_b0(const io::Problem& p, const Certificate& cert) {
    if (p.params.x0) return std::clamp(barrier_value(cert, *p.params.x0), 0.0, 1.0);
    return risk::b0_floor(p.spec.initial_margin);
}

synth::FiniteHorizonSpec finite_spec(const io::Problem& p) {
    synth::FiniteHorizonSpec fh;
    fh.beta = p.params.beta;
    fh.delta = p.params.delta.value_or(0.0);
    fh.sigma = p.spec.initial_margin;
    fh.horizon = p.params.horizon.value_or(100);
    fh.trace_mode = p.params.trace_mode;
    return fh;
}

struct SynthOutcome {
    synth::SynthesisResult result;
    std::optional<double> delta;
};

SynthOutcome synthesize(const io::Problem& p, bool bisect, const synth::SynthesisOptions& opts) {
    SynthOutcome out;
    if (p.params.mode == SynthesisMode::InfiniteHorizon) {
        if (p.params.lambda && !(*p.params.lambda > 0.0 && *p.params.lambda < 1.0))
            throw UsageError("lambda must lie in (0,1)");
        const std::optional<double> lambda = bisect ? std::nullopt : p.params.lambda;
        if (!bisect && !lambda) throw UsageError("infinite-horizon problems need params.lambda or --bisect-lambda");
        out.result = synth::synthesize_infinite(p.plant, p.spec, p.noise, p.params.beta, lambda, opts);
        return out;
    }
    synth::FiniteHorizonSpec fh = finite_spec(p);
    if (p.params.robust != io::RobustKind::None) {
        const synth::GelbrichSpec ball{p.noise.covariance, p.params.rho.value_or(0.0)};
        out.result = p.params.robust == io::RobustKind::Gelbrich
                         ? synth::synthesize_gelbrich(p.plant, p.spec, ball, fh, opts)
                         : synth::synthesize_frobenius(p.plant, p.spec, ball, fh, opts);
        out.delta = fh.delta;
        return out;
    }
    if (p.params.alpha_bar && !p.params.delta) {
        auto r = risk::synthesize_for_risk(p.plant, p.spec, p.noise, *p.params.alpha_bar, fh, opts);
        if (!r.best) {
            out.result.status = SolverStatus::Infeasible;
            out.result.message = "no delta meets the target exit probability";
            return out;
        }
        out.result = std::move(*r.best);
        out.delta = r.delta;
        return out;
    }
    out.result = synth::synthesize_finite(p.plant, p.spec, p.noise, fh, opts);
    out.delta = fh.delta;
    return out;
}

int cmd_synth(const std::string& problem_path, const std::string& out_path, bool bisect, bool logdet,
              std::ostream& out) {
    io::Problem p = io::read_problem(problem_path);
    require_valid(p);
    synth::SynthesisOptions opts;
    opts.objective = logdet || p.params.objective == synth::ObjectiveKind::LogDet ? synth::ObjectiveKind::LogDet
                                                                                   : synth::ObjectiveKind::Trace;
    SynthOutcome s = synthesize(p, bisect, opts);
    out << "status: " << to_string(s.result.status) << '\n';
    if (!s.result.ok()) {
        if (!s.result.message.empty()) out << "message: " << s.result.message << '\n';
        return kInfeasible;
    }
    const Certificate& cert = *s.result.certificate;
    std::optional<risk::RiskBound> bound;
    if (cert.mode() == SynthesisMode::FiniteHorizon && s.delta)
        bound = risk::exit_bound(initial_b0(p, cert), p.params.beta, *s.delta, p.params.horizon.value_or(100));
    const io::CertificateFile file = io::make_certificate_file(cert, p.spec, s.result.solution.max_lmi_residual, bound);
    io::write_certificate(out_path, file);

    out << "objective: " << fmt6(cert.objective_value()) << '\n';
    if (s.result.lambda) out << "lambda: " << fmt6(*s.result.lambda) << '\n';
    if (s.delta) out << "delta: " << fmt6(*s.delta) << '\n';
    out << "residual containment_initial: " << fmt6(file.residuals.containment_initial) << '\n';
    if (file.residuals.containment_safe)
        out << "residual containment_safe: " << fmt6(*file.residuals.containment_safe) << '\n';
    out << "residual lmi_min_eigenvalue: " << fmt6(file.residuals.lmi_max) << '\n';
    if (bound) {
        out << "bound alpha: " << fmt6(bound->alpha) << " (safety >= " << fmt6(1.0 - bound->alpha) << ")\n";
        out << "bound case: " << io::to_string(bound->bound_case) << '\n';
    }
    out << "wrote " << out_path << '\n';
    return kOk;
}

int cmd_bound(double beta, double delta, int horizon, std::optional<double> b0, std::optional<double> sigma,
              std::ostream& out) {
    if (b0.has_value() == sigma.has_value()) throw UsageError("give exactly one of --b0 and --sigma");
    if (sigma && !(*sigma >= 0.0 && *sigma <= 1.0)) throw UsageError("sigma must lie in [0,1]");
    const double b = b0 ? *b0 : risk::b0_floor(*sigma);
    risk::RiskBound r;
    try {
        r = risk::exit_bound(b, beta, delta, horizon);
    } catch (const std::invalid_argument& e) {
        throw UsageError(e.what());
    }
    out << "alpha: " << fmt6(r.alpha) << '\n';
    out << "case: " << io::to_string(r.bound_case) << '\n';
    out << "eta_star: " << fmt6(r.eta_star) << '\n';
    return kOk;
}

int cmd_select_delta(double alpha_bar, double beta, double sigma, int horizon, std::ostream& out) {
    risk::DeltaSelection sel;
    try {
        sel = risk::select_delta(alpha_bar, beta, sigma, horizon);
    } catch (const std::invalid_argument& e) {
        throw UsageError(e.what());
    }
    for (int z : {0, 1}) {
        out << "z=" << z << ": ";
        auto it = std::find_if(sel.branches.begin(), sel.branches.end(), [z](const auto& b) { return b.z == z; });
        if (it == sel.branches.end()) {
            out << "empty\n";
        } else {
            out << '[' << fmt6(it->lo) << ", " << fmt6(it->hi) << (it->hi_open ? ")" : "]") << '\n';
        }
    }
    return kOk;
}

Matrix parse_gain(const std::string& text, Eigen::Index m, Eigen::Index n) {
    std::vector<double> vals;
    std::stringstream ss(text);
    std::string tok;
    while (std::getline(ss, tok, ',')) {
        try {
            std::size_t used = 0;
            vals.push_back(std::stod(tok, &used));
            if (tok.find_first_not_of(" \t", used) != std::string::npos) throw std::invalid_argument(tok);
        } catch (const std::exception&) {
            throw UsageError("--unom: '" + tok + "' is not a number");
        }
    }
    if (static_cast<Eigen::Index>(vals.size()) != m * n)
        throw UsageError("--unom needs " + std::to_string(m * n) + " comma-separated entries (row-major m x n)");
    Matrix k(m, n);
    for (Eigen::Index i = 0; i < m; ++i)
        for (Eigen::Index j = 0; j < n; ++j) k(i, j) = vals[static_cast<std::size_t>(i * n + j)];
    return k;
}

int cmd_filter_run(const std::string& cert_path, const std::string& problem_path, const std::string& unom, int horizon,
                   int runs, std::uint64_t seed, const std::string& out_path, std::ostream& out) {
    if (runs < 1) throw UsageError("--runs must be at least 1");
    if (horizon < 1) throw UsageError("--T must be at least 1");
    const io::CertificateFile cf = io::read_certificate(cert_path);
    const io::Problem p = io::read_problem(problem_path);
    require_valid(p);
    const Certificate& cert = cf.certificate;
    if (cert.mode() != SynthesisMode::InfiniteHorizon) throw UsageError("filter-run needs an infinite-horizon certificate");
    if (cert.states() != p.plant.states() || cert.inputs() != p.plant.inputs())
        throw UsageError("certificate and problem dimensions differ");
    const Matrix gain = parse_gain(unom, p.plant.inputs(), p.plant.states());
    const filter::NominalController u_nom = [gain](const Vector& x) { return Vector(gain * x); };
    const Vector x0 = p.params.x0.value_or(Vector::Zero(p.plant.states()));

    std::vector<filter::Trajectory> trajs;
    double min_b = std::numeric_limits<double>::infinity();
    std::size_t fallbacks = 0;
    for (int run = 0; run < runs; ++run) {
        filter::ClosedLoopConfig cfg;
        cfg.horizon = horizon;
        cfg.seed = seed;
        cfg.run = static_cast<std::uint64_t>(run);
        trajs.push_back(filter::run_closed_loop(p.plant, cert, cert.params().beta, u_nom, p.noise, x0, cfg));
        min_b = std::min(min_b, trajs.back().min_barrier());
        fallbacks += trajs.back().fallback_count;
    }
    io::write_text(out_path, experiments::trajectory_csv(trajs, p.plant.states(), p.plant.inputs()));
    out << "runs: " << runs << '\n';
    out << "min b: " << fmt6(min_b) << '\n';
    out << "fallback steps: " << fallbacks << '\n';
    out << "wrote " << out_path << '\n';
    return fallbacks > 0 ? kInfeasible : kOk;
}

void print_report(const verify::VerificationReport& r, std::ostream& out) {
    out << "containment initial: " << fmt6(r.containment.initial) << '\n';
    if (std::isfinite(r.containment.safe)) out << "containment safe: " << fmt6(r.containment.safe) << '\n';
    if (r.containment.ellipsoid) out << "containment ellipsoid: " << fmt6(*r.containment.ellipsoid) << '\n';
    if (r.invariance_margin) out << "invariance margin: " << fmt6(*r.invariance_margin) << '\n';
    if (r.decrease) {
        out << "decrease slack (analytic min): " << fmt6(r.decrease->analytic_min) << '\n';
        out << "decrease slack (sampled min): " << fmt6(r.decrease->sampled_min) << '\n';
    }
    if (r.monte_carlo) {
        out << "monte carlo runs: " << r.monte_carlo->runs << '\n';
        out << "empirical exit: " << fmt6(r.monte_carlo->empirical_exit) << " (stderr " << fmt6(r.monte_carlo->stderr_exit)
            << ")\n";
        out << "empirical safety: " << fmt6(1.0 - r.monte_carlo->empirical_exit) << '\n';
    }
}

int cmd_verify(const std::string& cert_path, const std::string& problem_path, int mc_runs, std::uint64_t seed,
               double tol, std::ostream& out) {
    if (mc_runs < 0) throw UsageError("--mc-runs must be non-negative");
    const io::CertificateFile cf = io::read_certificate(cert_path);
    const io::Problem p = io::read_problem(problem_path);
    require_valid(p);
    const Certificate& cert = cf.certificate;
    if (cert.mode() != p.params.mode) throw UsageError("certificate and problem modes differ");
    if (cert.states() != p.plant.states() || cert.inputs() != p.plant.inputs())
        throw UsageError("certificate and problem dimensions differ");

    std::optional<verify::MonteCarloOptions> mc;
    if (mc_runs > 0) {
        verify::MonteCarloOptions mo;
        mo.runs = mc_runs;
        mo.seed = seed;
        mo.horizon = cert.params().horizon.value_or(p.params.horizon.value_or(100));
        if (p.params.x0) {
            mo.x0 = *p.params.x0;
        } else {
            mo.policy = verify::InitialPolicy::InitialBoundary;
            mo.initial_shape = cert.mode() == SynthesisMode::FiniteHorizon ? p.spec.initial_shape() : p.spec.initial_R;
        }
        mc = mo;
    }
    const auto report = verify::verify_certificate(cert, p.plant, p.spec, p.noise, tol, mc);
    print_report(report, out);
    if (cert.mode() == SynthesisMode::FiniteHorizon && cert.params().delta) {
        const auto b = risk::exit_bound(initial_b0(p, cert), cert.params().beta, *cert.params().delta,
                                        cert.params().horizon.value_or(p.params.horizon.value_or(100)));
        out << "theoretical exit bound: " << fmt6(b.alpha) << " (safety >= " << fmt6(1.0 - b.alpha) << ")\n";
    }
    out << "verdict: " << (report.passed ? "passed" : "failed") << '\n';
    return report.passed ? kOk : kVerifyFailed;
}

std::string grid_csv(const std::vector<experiments::SensitivityCell>& grid) {
    std::ostringstream os;
    os.precision(17);
    os << "x1,x2,b0,empirical_exit,bound\n";
    for (const auto& c : grid)
        os << c.x1 << ',' << c.x2 << ',' << c.b0 << ',' << c.empirical_exit << ',' << c.bound << '\n';
    return os.str();
}

std::string barrier_csv(const std::vector<filter::Trajectory>& runs) {
    std::ostringstream os;
    os.precision(17);
    os << "t,min_b,max_b\n";
    if (runs.empty()) return os.str();
    for (std::size_t t = 0; t < runs.front().b.size(); ++t) {
        double lo = std::numeric_limits<double>::infinity(), hi = -lo;
        for (const auto& r : runs) {
            lo = std::min(lo, r.b[t]);
            hi = std::max(hi, r.b[t]);
        }
        os << t << ',' << lo << ',' << hi << '\n';
    }
    return os.str();
}

// Uncontrolled-noise trajectories of the pendulum certificate, for plotting.
std::vector<filter::Trajectory> pendulum_trajectories(const io::Problem& p, const Certificate& cert, int runs,
                                                       std::uint64_t seed) {
    std::vector<filter::Trajectory> out;
    const Vector x0 = p.params.x0.value_or(Vector::Zero(2));
    for (int run = 0; run < runs; ++run) {
        filter::ClosedLoopConfig cfg;
        cfg.horizon = p.params.horizon.value_or(100);
        cfg.seed = seed;
        cfg.run = static_cast<std::uint64_t>(run);
        cfg.filtered = false;
        const filter::NominalController k = [&cert](const Vector& x) { return controller(cert, x); };
        out.push_back(filter::run_closed_loop(p.plant, cert, cert.params().beta, k, p.noise, x0, cfg));
    }
    return out;
}

int reproduce_pendulum(const fs::path& dir, std::uint64_t seed, std::ostream& out) {
    experiments::PendulumOptions opts;
    opts.seed = seed;
    const auto r = experiments::run_pendulum(opts);
    io::write_problem(dir / "problem.json", r.problem);
    std::ostringstream rep;
    rep << "experiment: pendulum\n";
    rep << "synthesis status (beta = " << fmt6(r.problem.params.beta) << "): " << to_string(r.synthesis.status) << '\n';
    if (r.synthesis.ok()) {
        const Certificate& cert = *r.synthesis.certificate;
        io::write_certificate(dir / "certificate.json",
                              io::make_certificate_file(cert, r.problem.spec, r.synthesis.solution.max_lmi_residual, r.bound));
        const auto trajs = pendulum_trajectories(r.problem, cert, 100, seed);
        io::write_text(dir / "trajectories.csv", experiments::trajectory_csv(trajs, 2, 1));
        rep << "theoretical exit bound: " << fmt6(r.bound->alpha) << '\n';
        rep << "empirical safety (" << r.mc->runs << " runs): " << fmt6(1.0 - r.mc->empirical_exit) << '\n';
    } else {
        rep << "message: " << r.synthesis.message << '\n';
    }
    if (r.fallback_beta) {
        const Certificate& cert = *r.fallback_certificate;
        io::write_certificate(dir / "certificate_largest_feasible_beta.json",
                              io::make_certificate_file(cert, r.problem.spec, 0.0, std::nullopt));
        const auto trajs = pendulum_trajectories(r.problem, cert, 100, seed);
        io::write_text(dir / "trajectories_largest_feasible_beta.csv", experiments::trajectory_csv(trajs, 2, 1));
        rep << "largest feasible beta (diagnostic): " << fmt6(*r.fallback_beta) << '\n';
        rep << "empirical safety at that beta (" << r.fallback_mc->runs
            << " runs): " << fmt6(1.0 - r.fallback_mc->empirical_exit) << '\n';
    }
    for (const auto& [b, safety] : r.diagnostics)
        rep << "diagnostic beta " << fmt6(b) << ": empirical safety " << fmt6(safety) << '\n';
    if (r.heatmap_certificate)
        rep << "heat map certificate: beta = " << fmt6(r.diagnostics[r.heatmap_index].first) << '\n';
    if (!r.grid.empty()) {
        io::write_text(dir / "sensitivity.csv", grid_csv(r.grid));
        rep << "sensitivity trend correlation(b0, exit): " << fmt6(experiments::trend_correlation(r.grid)) << '\n';
    }
    rep << "runtime seconds: " << fmt6(r.seconds) << '\n';
    rep << "acceptance (empirical safety in [0.86, 0.96]): " << (r.accepted ? "PASS" : "FAIL") << '\n';
    io::write_text(dir / "report.txt", rep.str());
    out << rep.str();
    return r.accepted ? kOk : kVerifyFailed;
}

int reproduce_double_integrator(const fs::path& dir, std::uint64_t seed, std::ostream& out) {
    experiments::DoubleIntegratorOptions opts;
    opts.seed = seed;
    const auto r = experiments::run_double_integrator(opts);
    io::write_problem(dir / "problem.json", r.problem);
    std::ostringstream rep;
    rep << "experiment: double-integrator\n";
    rep << "synthesis status: " << to_string(r.synthesis.status) << '\n';
    if (r.synthesis.ok()) {
        io::write_certificate(dir / "certificate.json",
                              io::make_certificate_file(*r.synthesis.certificate, r.problem.spec,
                                                        r.synthesis.solution.max_lmi_residual, std::nullopt));
        io::write_text(dir / "trajectories.csv", experiments::trajectory_csv(r.runs, 2, 1));
        io::write_text(dir / "barrier_envelope.csv", barrier_csv(r.runs));
        rep << "filtered runs: " << r.runs.size() << '\n';
        rep << "min b over all runs: " << fmt6(r.min_barrier) << '\n';
        rep << "fallback steps: " << r.fallback_steps << '\n';
    } else {
        rep << "message: " << r.synthesis.message << '\n';
    }
    rep << "runtime seconds: " << fmt6(r.seconds) << '\n';
    rep << "acceptance (min b >= 0): " << (r.accepted ? "PASS" : "FAIL") << '\n';
    io::write_text(dir / "report.txt", rep.str());
    out << rep.str();
    return r.accepted ? kOk : kVerifyFailed;
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
    CLI::App app{"Quadratic barrier certificate synthesis and verification"};
    app.require_subcommand(1);
    app.set_help_all_flag("--help-all", "Expand all help");

    std::string problem, cert, out_path, unom;
    bool bisect = false, logdet = false;
    double beta = 0.0, delta = 0.0, alpha_bar = 0.0, sigma = 0.0, tol = 1e-6;
    std::optional<double> b0_opt, sigma_opt;
    int horizon = 100, runs = 50, mc_runs = 0;
    std::uint64_t seed = 42;
    std::string experiment;

    auto* synth_cmd = app.add_subcommand("synth", "Synthesize a certificate from a problem file");
    synth_cmd->add_option("problem", problem, "Problem file")->required();
    synth_cmd->add_option("--out", out_path, "Certificate output file")->required();
    synth_cmd->add_flag("--bisect-lambda", bisect, "Search lambda instead of using params.lambda");
    synth_cmd->add_flag("--logdet", logdet, "Maximize logdet(Omega) instead of its trace");

    auto* bound_cmd = app.add_subcommand("bound", "Exit-probability bound");
    bound_cmd->add_option("--beta", beta)->required();
    bound_cmd->add_option("--delta", delta)->required();
    bound_cmd->add_option("--T", horizon)->required();
    bound_cmd->add_option("--b0", b0_opt, "Initial barrier value");
    bound_cmd->add_option("--sigma", sigma_opt, "Initial-set margin, used as the barrier floor");

    auto* select_cmd = app.add_subcommand("select-delta", "Feasible delta intervals for a target risk");
    select_cmd->add_option("--alpha-bar", alpha_bar)->required();
    select_cmd->add_option("--beta", beta)->required();
    select_cmd->add_option("--sigma", sigma)->required();
    select_cmd->add_option("--T", horizon)->required();

    auto* filter_cmd = app.add_subcommand("filter-run", "Closed-loop runs through the safety filter");
    filter_cmd->add_option("certificate", cert)->required();
    filter_cmd->add_option("problem", problem)->required();
    filter_cmd->add_option("--unom", unom, "Nominal gain, row-major comma list")->required();
    filter_cmd->add_option("--T", horizon, "Steps per run");
    filter_cmd->add_option("--runs", runs, "Number of runs");
    filter_cmd->add_option("--seed", seed);
    filter_cmd->add_option("--out", out_path, "Trajectory CSV")->required();

    auto* verify_cmd = app.add_subcommand("verify", "Check a certificate against a problem");
    verify_cmd->add_option("certificate", cert)->required();
    verify_cmd->add_option("problem", problem)->required();
    verify_cmd->add_option("--mc-runs", mc_runs, "Monte Carlo runs (0 skips)");
    verify_cmd->add_option("--seed", seed);
    verify_cmd->add_option("--tol", tol, "Tolerance of the analytic checks");

    auto* repro_cmd = app.add_subcommand("reproduce", "Run a bundled experiment");
    repro_cmd->add_option("experiment", experiment, "pendulum | double-integrator")->required();
    repro_cmd->add_option("--out", out_path, "Output directory")->required();
    repro_cmd->add_option("--seed", seed);

    std::vector<std::string> reversed(args.rbegin(), args.rend());
    try {
        app.parse(reversed);
    } catch (const CLI::CallForHelp& e) {
        app.exit(e, out, err);
        return kOk;
    } catch (const CLI::CallForAllHelp& e) {
        app.exit(e, out, err);
        return kOk;
    } catch (const CLI::ParseError& e) {
        app.exit(e, out, err);
        return kUsage;
    }

    try {
        if (*synth_cmd) return cmd_synth(problem, out_path, bisect, logdet, out);
        if (*bound_cmd) return cmd_bound(beta, delta, horizon, b0_opt, sigma_opt, out);
        if (*select_cmd) return cmd_select_delta(alpha_bar, beta, sigma, horizon, out);
        if (*filter_cmd) return cmd_filter_run(cert, problem, unom, horizon, runs, seed, out_path, out);
        if (*verify_cmd) return cmd_verify(cert, problem, mc_runs, seed, tol, out);
        if (*repro_cmd) {
            if (experiment == "pendulum") return reproduce_pendulum(out_path, seed, out);
            if (experiment == "double-integrator") return reproduce_double_integrator(out_path, seed, out);
            err << "unknown experiment '" << experiment << "'\n" << repro_cmd->help();
            return kUsage;
        }
    } catch (const UsageError& e) {
        err << "error: " << e.what() << '\n';
        return kUsage;
    } catch (const io::FormatError& e) {
        err << "error: " << e.what() << '\n';
        return kUsage;
    } catch (const std::invalid_argument& e) {
        err << "error: " << e.what() << '\n';
        return kUsage;
    } catch (const std::filesystem::filesystem_error& e) {
        err << "error: " << e.what() << '\n';
        return kUsage;
    }
    return kUsage;
}

int run(int argc, char** argv) {
    std::vector<std::string> args;
    for (int i = 1; i < argc; ++i) args.emplace_back(argv[i]);
    return run(args, std::cout, std::cerr);
}

}  // namespace safecert::cli
