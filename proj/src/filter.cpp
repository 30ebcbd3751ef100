#include "safecert/filter.hpp"

#include <algorithm>
#include <limits>
#include <stdexcept>

namespace safecert::filter {

using conic::AffineExpr;
using conic::block_matrix;

FilterParams filter_params(const Certificate& cert, const Plant& plant, double beta, const Vector& x,
                           double noise_radius) {
    if (x.size() != plant.states()) throw std::invalid_argument("state has the wrong dimension");
    const auto& f = cert.omega_factor();
    const Matrix D = noise_radius * plant.D;
    const Vector Ax = plant.A * x;
    const Matrix PB = f.solve(plant.B);
    const Vector PAx = f.solve(Ax);
    const Matrix PD = f.solve(D);

    FilterParams p;
    p.x = x;
    p.beta = beta;
    p.Q = linalg::symmetrize(plant.B.transpose() * PB);
    p.a = plant.B.transpose() * PAx;
    p.bmat = D.transpose() * PB;
    p.L = linalg::symmetrize(D.transpose() * PD);
    p.dvec = D.transpose() * PAx;
    // V(x+) <= beta + (1 - beta) V(x)  <=>  ... + x^T A^T P A x - (1 - beta) x^T P x - beta <= 0
    p.kappa = Ax.dot(PAx) - (1.0 - beta) * f.inverse_quad_form(x) - beta;
    return p;
}

double worst_case_violation(const FilterParams& p, const Vector& u) {
    const double nominal = u.dot(p.Q * u) + 2.0 * u.dot(p.a) + p.kappa;
    const Vector e = p.bmat * u + p.dvec;
    // w^T L w + 2 w^T e is convex, so its max over the ball sits on the sphere
    const double worst = linalg::maximize_on_sphere(p.L, e).value;
    return nominal + worst;
}

conic::ConicProgram build_filter_program(const FilterParams& p, const Vector& u_nom) {
    const auto m = p.Q.rows();
    const auto d = p.L.rows();
    if (u_nom.size() != m) throw std::invalid_argument("nominal input has the wrong dimension");
    conic::ConicProgram prog;
    const AffineExpr u = prog.add_matrix("u", m, 1);
    const AffineExpr lam = prog.add_scalar("lambda");
    const AffineExpr gam = prog.add_scalar("gamma");

    // u^T Q u + 2 a^T u + kappa + gamma <= 0 as [I, G u; (G u)^T, -2 a^T u - kappa - gamma] >= 0
    const Matrix G = linalg::psd_factor(p.Q);
    const AffineExpr Gu = G * u;
    const AffineExpr rhs = -2.0 * (Matrix(p.a.transpose()) * u) - AffineExpr::scalar(p.kappa) - gam;
    prog.add_psd(block_matrix({{AffineExpr::identity(G.rows()), Gu}, {Gu.transpose(), rhs}}), "quadratic");

    // S-lemma: gamma >= max_{||w||<=1} w^T L w + 2 w^T (bmat u + dvec)
    const AffineExpr e = p.bmat * u + AffineExpr(Matrix(p.dvec));
    prog.add_psd(block_matrix({{conic::scaled(lam, Matrix::Identity(d, d)) - AffineExpr(p.L), e},
                               {e.transpose(), gam - lam}}),
                 "s_lemma");
    prog.add_geq(lam, "lambda_sign");
    prog.add_geq(gam, "gamma_sign");
    prog.minimize_squared_norm(u - AffineExpr(Matrix(u_nom)));
    return prog;
}

FilterResult solve_filter(const FilterParams& p, const Vector& u_nom, const FilterOptions& opts) {
    FilterResult r;
    if (opts.fast_path && worst_case_violation(p, u_nom) <= 0.0) {
        r.u = u_nom;
        r.objective = 0.0;
        r.status = SolverStatus::Optimal;
        r.fast_path = true;
        return r;
    }
    const conic::Solution sol = conic::solve(build_filter_program(p, u_nom), opts.solver);
    r.status = sol.status;
    if (sol.optimal()) {
        r.u = sol.value("u").col(0);
        r.objective = sol.objective;
        r.lambda = sol.scalar("lambda");
        r.gamma = sol.scalar("gamma");
    }
    return r;
}

StepOutcome safe_input(const Certificate& cert, const Plant& plant, double beta, const Vector& x,
                       const Vector& u_nom, double noise_radius, const FilterOptions& opts) {
    StepOutcome out;
    out.filter = solve_filter(filter_params(cert, plant, beta, x, noise_radius), u_nom, opts);
    if (out.filter.status == SolverStatus::Optimal) {
        out.u = out.filter.u;
    } else {
        out.u = controller(cert, x);
        out.fallback = true;
    }
    return out;
}

double Trajectory::min_barrier() const {
    return b.empty() ? std::numeric_limits<double>::infinity() : *std::min_element(b.begin(), b.end());
}

Trajectory run_closed_loop(const Plant& plant, const Certificate& cert, double beta, const NominalController& u_nom,
                           const NoiseModel& noise, const Vector& x0, const ClosedLoopConfig& config) {
    if (config.horizon < 1) throw std::invalid_argument("horizon must be at least 1");
    if (x0.size() != plant.states()) throw std::invalid_argument("initial state has the wrong dimension");
    const double radius = noise.kind == NoiseKind::UnitBall ? noise.radius : 1.0;
    NoiseSampler sampler(noise, plant.disturbances(), config.seed, config.run);

    Trajectory tr;
    Vector x = x0;
    tr.x.push_back(x);
    tr.b.push_back(barrier_value(cert, x));
    for (int t = 0; t < config.horizon; ++t) {
        Vector u = u_nom(x);
        bool fb = false;
        if (config.filtered) {
            StepOutcome step = safe_input(cert, plant, beta, x, u, radius, config.options);
            u = step.u;
            fb = step.fallback;
        }
        const Vector w = sampler.next();
        x = plant.A * x + plant.B * u + plant.D * w;
        tr.u.push_back(u);
        tr.fallback.push_back(fb);
        if (fb) ++tr.fallback_count;
        tr.x.push_back(x);
        tr.b.push_back(barrier_value(cert, x));
    }
    return tr;
}

}  // namespace safecert::filter
