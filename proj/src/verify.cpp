#include "safecert/verify.hpp"

#include "safecert/rng.hpp"

#include <Eigen/Eigenvalues>

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <random>
#include <stdexcept>

namespace safecert::verify {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

// Unit vectors: an angular grid for k = 2, otherwise Gaussian directions.
std::vector<Vector> sphere_points(Eigen::Index k, int count, std::uint64_t seed) {
    std::vector<Vector> pts;
    pts.reserve(static_cast<std::size_t>(count));
    if (k == 1) {
        pts.push_back(Vector::Constant(1, 1.0));
        pts.push_back(Vector::Constant(1, -1.0));
        return pts;
    }
    if (k == 2) {
        for (int i = 0; i < count; ++i) {
            const double th = 2.0 * std::numbers::pi * i / count;
            Vector u(2);
            u << std::cos(th), std::sin(th);
            pts.push_back(u);
        }
        return pts;
    }
    NoiseSampler s(NoiseModel::unit_ball(), k, seed, 0);
    for (int i = 0; i < count; ++i) pts.push_back(s.unit_sphere(k));
    return pts;
}

Matrix closed_loop_matrix(const Certificate& cert, const Plant& plant) {
    return plant.A + plant.B * cert.gain();
}

}  // namespace

bool ContainmentReport::passed(double tol) const {
    return initial >= -tol && safe >= -tol && (!ellipsoid || *ellipsoid >= -tol);
}

ContainmentReport check_containment(const Certificate& cert, const SafetySpec& spec) {
    ContainmentReport r;
    const Matrix shape = cert.mode() == SynthesisMode::FiniteHorizon ? spec.initial_shape() : spec.initial_R;
    r.initial = linalg::min_eigenvalue(shape - cert.omega_inverse());
    r.safe = kInf;
    for (const auto& a : spec.halfspaces) r.safe = std::min(r.safe, 1.0 - a.dot(cert.omega() * a));
    if (spec.ellipsoidal_safe) {
        auto f = linalg::SpdFactor::factor(*spec.ellipsoidal_safe);
        if (!f) throw std::invalid_argument("ellipsoidal safe set must be positive definite");
        r.ellipsoid = linalg::min_eigenvalue(f->inverse() - cert.omega());
    }
    return r;
}

double invariance_oracle(const Certificate& cert, const Plant& plant, const InvarianceOptions& opts) {
    const auto n = plant.states();
    const auto d = plant.disturbances();
    const Matrix root = linalg::psd_sqrt(cert.omega());
    const Matrix Abar = closed_loop_matrix(cert, plant);
    const Matrix D = opts.noise_radius * plant.D;
    const auto& f = cert.omega_factor();
    const auto states = sphere_points(n, opts.n_boundary, opts.seed);

    std::vector<Vector> dirs;
    if (d <= 2) dirs = sphere_points(d, opts.n_dirs, opts.seed + 1);

    double margin = kInf;
    for (const auto& u : states) {
        const Vector v = Abar * (root * u);
        if (d <= 2) {
            for (const auto& w : dirs) margin = std::min(margin, 1.0 - f.inverse_quad_form(v + D * w));
        } else {
            const Vector w = adversarial_disturbance(cert, plant, v, opts.noise_radius);
            margin = std::min(margin, 1.0 - f.inverse_quad_form(v + plant.D * w));
        }
    }
    return margin;
}

Vector adversarial_disturbance(const Certificate& cert, const Plant& plant, const Vector& v, double radius) {
    const auto& f = cert.omega_factor();
    const Matrix D = radius * plant.D;
    const Matrix L = D.transpose() * f.solve(D);
    const Vector e = D.transpose() * f.solve(v);
    return radius * linalg::maximize_on_sphere(L, e).argmax;
}

AdversarialRun adversarial_simulation(const Certificate& cert, const Plant& plant, const Vector& x0, int horizon,
                                      double radius) {
    const Matrix Abar = closed_loop_matrix(cert, plant);
    AdversarialRun r;
    Vector x = x0;
    r.min_barrier = barrier_value(cert, x);
    for (int t = 0; t < horizon; ++t) {
        const Vector v = Abar * x;
        x = v + plant.D * adversarial_disturbance(cert, plant, v, radius);
        r.min_barrier = std::min(r.min_barrier, barrier_value(cert, x));
        ++r.steps;
    }
    r.exited = r.min_barrier < 0.0;
    return r;
}

DecreaseReport expected_decrease_oracle(const Certificate& cert, const Plant& plant, double beta, double delta,
                                        const Matrix& sigma, int n_points, std::uint64_t seed) {
    const auto n = plant.states();
    const auto& f = cert.omega_factor();
    const Matrix P = cert.omega_inverse();
    const Matrix Abar = closed_loop_matrix(cert, plant);
    const Matrix M = linalg::symmetrize((1.0 - beta) * P - Abar.transpose() * P * Abar);
    const Matrix Sx = plant.D * sigma * plant.D.transpose();
    const double c = beta - delta - f.solve(Sx).trace();

    DecreaseReport r;
    const Matrix root = linalg::psd_sqrt(cert.omega());
    // over B = {Omega^{1/2} y : ||y|| <= 1} the quadratic part is y^T (Omega^{1/2} M Omega^{1/2}) y
    r.analytic_min = c + std::min(0.0, linalg::min_eigenvalue(root * M * root));

    NoiseSampler s(NoiseModel::unit_ball(), n, seed, 0);
    r.sampled_min = c;  // x = 0
    for (int i = 0; i < n_points; ++i) {
        const Vector x = root * s.next();
        r.sampled_min = std::min(r.sampled_min, x.dot(M * x) + c);
    }
    return r;
}

MonteCarloResult monte_carlo_exit(const Certificate& cert, const Plant& plant, const NoiseModel& noise,
                                  const MonteCarloOptions& opts) {
    if (opts.runs < 1) throw std::invalid_argument("Monte Carlo needs at least one run");
    if (opts.horizon < 1) throw std::invalid_argument("horizon must be at least 1");
    const auto n = plant.states();
    const Matrix Abar = closed_loop_matrix(cert, plant);
    Matrix init_root;
    if (opts.policy == InitialPolicy::FixedPoint) {
        if (opts.x0.size() != n) throw std::invalid_argument("initial state has the wrong dimension");
    } else {
        auto f = linalg::SpdFactor::factor(opts.initial_shape);
        if (!f || opts.initial_shape.rows() != n) throw std::invalid_argument("initial shape must be n x n and PD");
        init_root = linalg::psd_sqrt(f->inverse());
    }

    MonteCarloResult r;
    r.runs = opts.runs;
    for (int run = 0; run < opts.runs; ++run) {
        NoiseSampler s(noise, plant.disturbances(), opts.seed, static_cast<std::uint64_t>(run));
        Vector x = opts.policy == InitialPolicy::FixedPoint ? opts.x0 : Vector(init_root * s.unit_sphere(n));
        bool exited = barrier_value(cert, x) < 0.0;
        for (int t = 0; t < opts.horizon && !exited; ++t) {
            x = Abar * x + plant.D * s.next();
            exited = barrier_value(cert, x) < 0.0;
        }
        if (exited) ++r.exits;
    }
    const double p = static_cast<double>(r.exits) / r.runs;
    r.empirical_exit = p;
    r.stderr_exit = std::sqrt(p * (1.0 - p) / r.runs);
    return r;
}

VerificationReport verify_certificate(const Certificate& cert, const Plant& plant, const SafetySpec& spec,
                                      const NoiseModel& noise, double tol, std::optional<MonteCarloOptions> mc) {
    VerificationReport r;
    r.containment = check_containment(cert, spec);
    bool ok = r.containment.passed(tol);
    if (cert.mode() == SynthesisMode::InfiniteHorizon && noise.kind == NoiseKind::UnitBall) {
        InvarianceOptions io;
        io.noise_radius = noise.radius;
        r.invariance_margin = invariance_oracle(cert, plant, io);
        ok = ok && *r.invariance_margin >= -tol;
    }
    if (cert.mode() == SynthesisMode::FiniteHorizon && noise.kind == NoiseKind::Gaussian) {
        const double beta = cert.params().beta;
        const double delta = cert.params().delta.value_or(0.0);
        r.decrease = expected_decrease_oracle(cert, plant, beta, delta, noise.covariance);
        ok = ok && r.decrease->analytic_min >= -tol;
    }
    if (mc) r.monte_carlo = monte_carlo_exit(cert, plant, noise, *mc);
    r.passed = ok;
    return r;
}

}  // namespace safecert::verify
