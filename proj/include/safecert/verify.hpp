#pragma once

#include "safecert/model.hpp"

#include <cstdint>
#include <optional>
#include <vector>

namespace safecert::verify {

struct ContainmentReport {
    double initial = 0.0;                 // lambda_min(R_shape - Omega^{-1})
    double safe = 0.0;                    // min_j 1 - a_j^T Omega a_j (+inf without half-spaces)
    std::optional<double> ellipsoid;      // lambda_min(S^{-1} - Omega)

    [[nodiscard]] bool passed(double tol) const;
};

// The initial set uses R / (1 - sigma) for finite-horizon certificates.
[[nodiscard]] ContainmentReport check_containment(const Certificate& cert, const SafetySpec& spec);

struct InvarianceOptions {
    int n_boundary = 1000;
    int n_dirs = 720;
    std::uint64_t seed = 42;
    double noise_radius = 1.0;
};

// min over sampled boundary states and disturbances of 1 - V(A x + B K x + D w).
// Boundary states are Omega^{1/2} u with u on the unit sphere (angular grid for n = 2);
// disturbances are an angular grid for d <= 2 and the exact sphere maximizer otherwise.
[[nodiscard]] double invariance_oracle(const Certificate& cert, const Plant& plant, const InvarianceOptions& opts = {});

// Disturbance on the radius-r sphere maximizing V(v + D w).
[[nodiscard]] Vector adversarial_disturbance(const Certificate& cert, const Plant& plant, const Vector& v,
                                             double radius = 1.0);

struct AdversarialRun {
    double min_barrier = 0.0;
    int steps = 0;
    bool exited = false;
};

// Closed loop under the certificate controller with the worst disturbance at every step.
[[nodiscard]] AdversarialRun adversarial_simulation(const Certificate& cert, const Plant& plant, const Vector& x0,
                                                    int horizon, double radius = 1.0);

struct DecreaseReport {
    double sampled_min = 0.0;   // minimum slack over sampled states in B
    double analytic_min = 0.0;  // exact minimum of the slack over B
};

// slack(x) = x^T ((1-beta) P - Abar^T P Abar) x + beta - delta - Tr(P Sigma_x), P = Omega^{-1},
// Sigma_x = D Sigma D^T, Abar = A + B K.
[[nodiscard]] DecreaseReport expected_decrease_oracle(const Certificate& cert, const Plant& plant, double beta,
                                                      double delta, const Matrix& sigma, int n_points = 1000,
                                                      std::uint64_t seed = 42);

enum class InitialPolicy { FixedPoint, InitialBoundary };

struct MonteCarloOptions {
    int horizon = 100;
    int runs = 1000;
    std::uint64_t seed = 42;
    InitialPolicy policy = InitialPolicy::FixedPoint;
    Vector x0;          // FixedPoint
    Matrix initial_shape;  // InitialBoundary: states with x^T shape x = 1
};

struct MonteCarloResult {
    int runs = 0;
    int exits = 0;
    double empirical_exit = 0.0;
    double stderr_exit = 0.0;
};

// A run exits when min_t b(x_t) < 0 along x_{t+1} = (A + B K) x_t + D w_t.
[[nodiscard]] MonteCarloResult monte_carlo_exit(const Certificate& cert, const Plant& plant, const NoiseModel& noise,
                                                const MonteCarloOptions& opts);

struct VerificationReport {
    ContainmentReport containment;
    std::optional<double> invariance_margin;
    std::optional<DecreaseReport> decrease;
    std::optional<MonteCarloResult> monte_carlo;
    bool passed = false;
};

[[nodiscard]] VerificationReport verify_certificate(const Certificate& cert, const Plant& plant, const SafetySpec& spec,
                                                    const NoiseModel& noise, double tol = 1e-6,
                                                    std::optional<MonteCarloOptions> mc = std::nullopt);

}  // namespace safecert::verify
