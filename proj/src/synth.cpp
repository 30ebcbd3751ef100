#include "safecert/synth.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>

namespace safecert::synth {

using conic::AffineExpr;
using conic::block_matrix;
using conic::ConicProgram;
using conic::scaled;

namespace {

struct Skeleton {
    ConicProgram prog;
    AffineExpr omega;
    AffineExpr y;
};

void require_valid(const Plant& plant, const SafetySpec& spec, const NoiseModel& noise, SynthesisMode mode) {
    const ValidationReport report = validate_problem(plant, spec, noise, mode);
    if (!report.valid()) throw std::invalid_argument(report.summary());
}

// Omega, Y, initial-set and safe-set containment, input set and objective.
Skeleton skeleton(const Plant& plant, const SafetySpec& spec, const Matrix& initial_shape, const BuildOptions& opts) {
    const auto n = plant.states();
    const auto m = plant.inputs();
    Skeleton s;
    s.omega = s.prog.add_symmetric(kOmega, n);
    s.y = s.prog.add_matrix(kY, m, n);

    const double eps = 1e-8 * (1.0 + plant.A.norm());
    s.prog.add_psd(s.omega - AffineExpr(Matrix(eps * Matrix::Identity(n, n))), "omega_floor");

    const AffineExpr I = AffineExpr::identity(n);
    s.prog.add_psd(block_matrix({{AffineExpr(initial_shape), I}, {I, s.omega}}), "initial_set");

    for (std::size_t j = 0; j < spec.halfspaces.size(); ++j) {
        const Matrix a = spec.halfspaces[j];
        s.prog.add_geq(AffineExpr::scalar(1.0) - Matrix(a.transpose()) * s.omega * a,
                       "halfspace_" + std::to_string(j));
    }
    if (spec.ellipsoidal_safe) add_ellipsoidal_containment(s.prog, s.omega, *spec.ellipsoidal_safe);

    if (const auto* poly = std::get_if<PolytopeInput>(&spec.input_set)) {
        if (!opts.input_multiplier) {
            throw std::invalid_argument("polytopic input constraint needs a multiplier");
        }
        add_polytopic_input_constraint(s.prog, s.omega, s.y, poly->H, poly->h, *opts.input_multiplier);
    } else if (const auto* ball = std::get_if<NormBallInput>(&spec.input_set)) {
        add_norm_input_constraint(s.prog, s.omega, s.y, ball->u_bar);
    }

    if (opts.objective == ObjectiveKind::LogDet) {
        s.prog.maximize_logdet(s.omega);
    } else {
        s.prog.maximize(s.omega.trace());
    }
    return s;
}

AffineExpr closed_loop(const Plant& plant, const Skeleton& s) {
    return plant.A * s.omega + plant.B * s.y;  // A Omega + B Y
}

void add_decrease_lmi(Skeleton& s, const Plant& plant, double beta_tilde) {
    const AffineExpr cl = closed_loop(plant, s);
    s.prog.add_psd(block_matrix({{beta_tilde * s.omega, cl.transpose()}, {cl, s.omega}}), "decrease");
}

void check_finite_spec(const FiniteHorizonSpec& fh) {
    if (!(fh.beta > 0.0 && fh.beta < 1.0)) throw std::invalid_argument("beta must lie in (0,1)");
    if (!(fh.delta > fh.beta - 1.0 && fh.delta <= fh.beta)) {
        throw std::invalid_argument("delta must lie in (beta - 1, beta]");
    }
    if (fh.horizon < 1) throw std::invalid_argument("horizon must be at least 1");
}

Matrix state_covariance(const Plant& plant, const Matrix& sigma) {
    return linalg::symmetrize(plant.D * sigma * plant.D.transpose());
}

void check_covariance_pd(const Matrix& S, Eigen::Index d) {
    if (S.rows() != d || S.cols() != d) throw std::invalid_argument("covariance must be d x d");
    if (!linalg::is_symmetric(S) || !linalg::SpdFactor::factor(S)) {
        throw std::invalid_argument("nominal covariance S must be symmetric positive definite");
    }
}

}  // namespace

void add_ellipsoidal_containment(ConicProgram& prog, const AffineExpr& omega, const Matrix& S) {
    auto f = linalg::SpdFactor::factor(S);
    if (!f || !linalg::is_symmetric(S)) throw std::invalid_argument("ellipsoidal safe set S must be positive definite");
    prog.add_psd(block_matrix({{omega, omega}, {omega, AffineExpr(f->inverse())}}), "ellipsoid_containment");
}

void add_polytopic_input_constraint(ConicProgram& prog, const AffineExpr& omega, const AffineExpr& y,
                                    const Matrix& H, const Vector& h, double multiplier) {
    if (H.rows() != h.size() || H.cols() != y.rows()) throw std::invalid_argument("input polytope shape mismatch");
    if (h.size() > 0 && (h.array() <= 0.0).any()) throw std::invalid_argument("input polytope needs h > 0");
    for (Eigen::Index i = 0; i < h.size(); ++i) {
        if (!(multiplier > 0.0 && multiplier < 2.0 * h(i))) {
            throw std::invalid_argument("input multiplier must lie in (0, 2 min h)");
        }
        const AffineExpr hy = Matrix(H.row(i)) * y;  // 1 x n
        prog.add_psd(block_matrix({{multiplier * omega, hy.transpose()},
                                   {hy, AffineExpr::scalar(2.0 * h(i) - multiplier)}}),
                     "input_row_" + std::to_string(i));
    }
}

void add_norm_input_constraint(ConicProgram& prog, const AffineExpr& omega, const AffineExpr& y, double u_bar) {
    if (!(u_bar > 0.0)) throw std::invalid_argument("input bound u_bar must be positive");
    const auto m = y.rows();
    prog.add_psd(block_matrix({{omega, y.transpose()}, {y, AffineExpr(Matrix(u_bar * Matrix::Identity(m, m)))}}),
                 "input_norm");
}

std::vector<double> input_multiplier_grid(const Vector& h) {
    const double hmin = h.minCoeff();
    std::vector<double> grid;
    for (double f : {0.1, 0.3, 0.5, 0.7, 0.9}) grid.push_back(f * 2.0 * hmin);
    return grid;
}

ConicProgram build_infinite_horizon(const Plant& plant, const SafetySpec& spec, const NoiseModel& noise,
                                    const InfiniteHorizonSpec& ih, const BuildOptions& opts) {
    if (noise.kind != NoiseKind::UnitBall) throw std::invalid_argument("infinite-horizon synthesis needs unit-ball noise");
    if (!(ih.lambda > 0.0 && ih.lambda < 1.0)) throw std::invalid_argument("lambda must lie in (0,1)");
    if (!(ih.beta > 0.0 && ih.beta < 1.0)) throw std::invalid_argument("beta must lie in (0,1)");
    require_valid(plant, spec, noise, SynthesisMode::InfiniteHorizon);

    const auto n = plant.states();
    const auto d = plant.disturbances();
    Skeleton s = skeleton(plant, spec, spec.initial_R, opts);
    const Matrix D = noise.radius * plant.D;
    const AffineExpr cl = closed_loop(plant, s);
    const AffineExpr lmi = block_matrix({
        {(ih.lambda - ih.beta_tilde()) * s.omega, AffineExpr::zeros(n, d), cl.transpose()},
        {AffineExpr::zeros(d, n), AffineExpr(Matrix(-ih.lambda * Matrix::Identity(d, d))), AffineExpr(Matrix(D.transpose()))},
        {cl, AffineExpr(D), -s.omega},
    });
    s.prog.add_nsd(lmi, "robust_decrease");
    return std::move(s.prog);
}

ConicProgram build_finite_horizon(const Plant& plant, const SafetySpec& spec, const NoiseModel& noise,
                                  const FiniteHorizonSpec& fh, const BuildOptions& opts) {
    if (noise.kind != NoiseKind::Gaussian) throw std::invalid_argument("finite-horizon synthesis needs a Gaussian covariance");
    check_finite_spec(fh);
    require_valid(plant, spec, noise, SynthesisMode::FiniteHorizon);

    const auto n = plant.states();
    Skeleton s = skeleton(plant, spec, spec.initial_shape(), opts);
    add_decrease_lmi(s, plant, fh.beta_tilde());

    const AffineExpr root(linalg::psd_sqrt(state_covariance(plant, noise.covariance)));
    if (fh.trace_mode == TraceMode::SoundTrace) {
        const AffineExpr Z = s.prog.add_symmetric("Z", n);
        s.prog.add_psd(block_matrix({{Z, root}, {root, s.omega}}), "moment");
        s.prog.add_psd(Z, "moment_slack");
        s.prog.add_geq(AffineExpr::scalar(fh.psi()) - Z.trace(), "moment_budget");
    } else {
        const AffineExpr lam = s.prog.add_scalar("lambda");
        s.prog.add_psd(block_matrix({{scaled(lam, Matrix::Identity(n, n)), root}, {root, s.omega}}), "moment");
        s.prog.add_geq(AffineExpr::scalar(fh.psi()) - lam, "moment_budget");
        s.prog.add_geq(lam, "moment_sign");
    }
    return std::move(s.prog);
}

ConicProgram build_gelbrich_robust(const Plant& plant, const SafetySpec& spec, const GelbrichSpec& gelbrich,
                                   const FiniteHorizonSpec& fh, const BuildOptions& opts) {
    check_finite_spec(fh);
    if (!(gelbrich.rho >= 0.0)) throw std::invalid_argument("Gelbrich radius must be nonnegative");
    const auto n = plant.states();
    const auto d = plant.disturbances();
    check_covariance_pd(gelbrich.S, d);
    require_valid(plant, spec, NoiseModel::gaussian(gelbrich.S), SynthesisMode::FiniteHorizon);

    Skeleton s = skeleton(plant, spec, spec.initial_shape(), opts);
    add_decrease_lmi(s, plant, fh.beta_tilde());

    // sup over the ball of Tr(D^T Omega^{-1} D Sigma) <= beta - delta, in dual form
    const AffineExpr gamma = s.prog.add_scalar("gamma");
    const AffineExpr Z = s.prog.add_symmetric("Z", d);
    const AffineExpr Q = s.prog.add_symmetric("Q", d);
    const AffineExpr q0 = s.prog.add_scalar("q0");
    const Matrix root = linalg::psd_sqrt(gelbrich.S);
    const Matrix Id = Matrix::Identity(d, d);
    (void)n;

    s.prog.add_psd(block_matrix({{Q, AffineExpr(Matrix(plant.D.transpose()))}, {AffineExpr(plant.D), s.omega}}),
                   "gelbrich_lift");
    s.prog.add_psd(block_matrix({{scaled(gamma, Id) - Q, scaled(gamma, root)}, {scaled(gamma, root), Z}}),
                   "gelbrich_dual");
    s.prog.add_psd(Z, "gelbrich_slack");
    s.prog.add_geq(gamma, "gelbrich_gamma");
    const double rho2 = gelbrich.rho * gelbrich.rho;
    s.prog.add_geq(-(q0 + (rho2 - gelbrich.S.trace()) * gamma + Z.trace()), "gelbrich_budget");
    s.prog.add_geq(q0 + AffineExpr::scalar(fh.psi()), "gelbrich_level");
    return std::move(s.prog);
}

ConicProgram build_frobenius_robust(const Plant& plant, const SafetySpec& spec, const GelbrichSpec& ball,
                                    const FiniteHorizonSpec& fh, const BuildOptions& opts) {
    check_finite_spec(fh);
    if (!(ball.rho >= 0.0)) throw std::invalid_argument("radius must be nonnegative");
    const auto n = plant.states();
    check_covariance_pd(ball.S, plant.disturbances());
    require_valid(plant, spec, NoiseModel::gaussian(ball.S), SynthesisMode::FiniteHorizon);

    Skeleton s = skeleton(plant, spec, spec.initial_shape(), opts);
    add_decrease_lmi(s, plant, fh.beta_tilde());

    const AffineExpr lam = s.prog.add_scalar("lambda");
    const AffineExpr nu = s.prog.add_scalar("nu");
    const Matrix Sx = state_covariance(plant, ball.S);
    const Matrix In = Matrix::Identity(n, n);
    s.prog.add_psd(block_matrix({{scaled(lam - nu, In), AffineExpr(Sx)}, {AffineExpr(Sx), s.omega - scaled(nu, In)}}),
                   "frobenius_moment");
    s.prog.add_geq(nu - AffineExpr::scalar(0.5 * ball.rho * ball.rho), "frobenius_radius");
    s.prog.add_geq(AffineExpr::scalar(fh.psi()) - lam, "moment_budget");
    s.prog.add_geq(lam, "moment_sign");
    return std::move(s.prog);
}

Certificate extract_certificate(const conic::Solution& solution, SynthesisMode mode, const CertificateParams& params) {
    if (!solution.optimal()) {
        throw SynthesisError("no certificate: solver status " + to_string(solution.status));
    }
    try {
        return Certificate(solution.value(kOmega), solution.value(kY), mode, params, solution.objective,
                           solution.status);
    } catch (const std::invalid_argument& e) {
        throw SynthesisError(std::string("no certificate: ") + e.what());
    }
}

namespace {

using Builder = std::function<ConicProgram(const BuildOptions&)>;

struct GridOutcome {
    conic::Solution solution;
    std::optional<double> multiplier;
};

bool better(const conic::Solution& cand, const conic::Solution& best) {
    if (!cand.optimal()) return false;
    return !best.optimal() || cand.objective > best.objective;
}

// Solves once, or once per multiplier when the input set is a polytope.
GridOutcome solve_over_inputs(const SafetySpec& spec, const SynthesisOptions& opts, const Builder& build) {
    BuildOptions bo;
    bo.objective = opts.objective;
    GridOutcome out;
    if (const auto* poly = std::get_if<PolytopeInput>(&spec.input_set)) {
        bool first = true;
        for (double mu : input_multiplier_grid(poly->h)) {
            bo.input_multiplier = mu;
            conic::Solution sol = conic::solve(build(bo), opts.solver);
            if (first || better(sol, out.solution)) {
                out.solution = std::move(sol);
                out.multiplier = mu;
                first = false;
            }
        }
        return out;
    }
    out.solution = conic::solve(build(bo), opts.solver);
    return out;
}

SynthesisResult finalize(GridOutcome outcome, SynthesisMode mode, const CertificateParams& params) {
    SynthesisResult r;
    r.status = outcome.solution.status;
    r.input_multiplier = outcome.multiplier;
    r.message = outcome.solution.message;
    if (outcome.solution.optimal()) {
        try {
            r.certificate = extract_certificate(outcome.solution, mode, params);
        } catch (const SynthesisError& e) {
            r.status = SolverStatus::NumericalFailure;
            r.message = e.what();
        }
    }
    r.solution = std::move(outcome.solution);
    return r;
}

}  // namespace

SynthesisResult synthesize_infinite(const Plant& plant, const SafetySpec& spec, const NoiseModel& noise, double beta,
                                    std::optional<double> lambda, const SynthesisOptions& opts) {
    if (!(beta > 0.0 && beta < 1.0)) throw std::invalid_argument("beta must lie in (0,1)");
    require_valid(plant, spec, noise, SynthesisMode::InfiniteHorizon);
    CertificateParams params;
    params.beta = beta;

    if (lambda) {
        const InfiniteHorizonSpec ih{*lambda, beta};
        auto outcome = solve_over_inputs(spec, opts, [&](const BuildOptions& bo) {
            return build_infinite_horizon(plant, spec, noise, ih, bo);
        });
        params.lambda = *lambda;
        SynthesisResult r = finalize(std::move(outcome), SynthesisMode::InfiniteHorizon, params);
        r.lambda = *lambda;
        return r;
    }

    // g(lambda) is infeasible for lambda >= 1 - beta (the top-left block turns positive)
    const double hi = 1.0 - beta;
    std::vector<std::optional<double>> multipliers{std::nullopt};
    if (const auto* poly = std::get_if<PolytopeInput>(&spec.input_set)) {
        multipliers.clear();
        for (double mu : input_multiplier_grid(poly->h)) multipliers.emplace_back(mu);
    }

    GridOutcome best;
    double best_lambda = std::numeric_limits<double>::quiet_NaN();
    std::vector<std::pair<double, double>> probes;
    bool first = true;
    for (const auto& mu : multipliers) {
        BuildOptions bo;
        bo.objective = opts.objective;
        bo.input_multiplier = mu;
        auto search = conic::bisect_lambda(
            [&](double lam) { return build_infinite_horizon(plant, spec, noise, InfiniteHorizonSpec{lam, beta}, bo); },
            0.0, hi, opts.lambda_tol, opts.solver);
        probes.insert(probes.end(), search.probes.begin(), search.probes.end());
        if (first || better(search.solution, best.solution)) {
            best.solution = std::move(search.solution);
            best.multiplier = mu;
            best_lambda = search.argmax;
            first = false;
        }
    }
    params.lambda = best_lambda;
    SynthesisResult r = finalize(std::move(best), SynthesisMode::InfiniteHorizon, params);
    r.lambda = best_lambda;
    r.lambda_probes = std::move(probes);
    return r;
}

namespace {

CertificateParams finite_params(const FiniteHorizonSpec& fh) {
    CertificateParams p;
    p.beta = fh.beta;
    p.delta = fh.delta;
    p.horizon = fh.horizon;
    p.sigma = fh.sigma;
    return p;
}

}  // namespace

SynthesisResult synthesize_finite(const Plant& plant, const SafetySpec& spec, const NoiseModel& noise,
                                  const FiniteHorizonSpec& fh, const SynthesisOptions& opts) {
    auto outcome = solve_over_inputs(spec, opts, [&](const BuildOptions& bo) {
        return build_finite_horizon(plant, spec, noise, fh, bo);
    });
    return finalize(std::move(outcome), SynthesisMode::FiniteHorizon, finite_params(fh));
}

SynthesisResult synthesize_gelbrich(const Plant& plant, const SafetySpec& spec, const GelbrichSpec& gelbrich,
                                    const FiniteHorizonSpec& fh, const SynthesisOptions& opts) {
    auto outcome = solve_over_inputs(spec, opts, [&](const BuildOptions& bo) {
        return build_gelbrich_robust(plant, spec, gelbrich, fh, bo);
    });
    return finalize(std::move(outcome), SynthesisMode::FiniteHorizon, finite_params(fh));
}

SynthesisResult synthesize_frobenius(const Plant& plant, const SafetySpec& spec, const GelbrichSpec& ball,
                                     const FiniteHorizonSpec& fh, const SynthesisOptions& opts) {
    auto outcome = solve_over_inputs(spec, opts, [&](const BuildOptions& bo) {
        return build_frobenius_robust(plant, spec, ball, fh, bo);
    });
    return finalize(std::move(outcome), SynthesisMode::FiniteHorizon, finite_params(fh));
}

}  // namespace safecert::synth
