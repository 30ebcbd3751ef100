#pragma once

#include "safecert/conic.hpp"
#include "safecert/model.hpp"
#include "safecert/rng.hpp"

#include <cstdint>
#include <functional>
#include <vector>

namespace safecert::filter {

/// Data of the per-state program. With P = Omega^{-1} and v = A x + B u,
/// V(v + D w) = u^T Q u + 2 u^T a + x^T A^T P A x + 2 w^T (bmat u + dvec) + w^T L w.
struct FilterParams {
    Matrix Q;     // B^T P B
    Vector a;     // B^T P A x
    Matrix bmat;  // D^T P B
    Matrix L;     // D^T P D
    Vector dvec;  // D^T P A x
    double kappa = 0.0;  // x^T (A^T P A - (1 - beta) P) x - beta
    Vector x;
    double beta = 0.0;
};

struct FilterOptions {
    bool fast_path = true;  // return u_nom untouched when it already passes the exact check
    conic::SolverSettings solver;
};

struct FilterResult {
    Vector u;
    double objective = 0.0;
    SolverStatus status = SolverStatus::NumericalFailure;
    double lambda = 0.0;
    double gamma = 0.0;
    bool fast_path = false;
};

// D is scaled by the disturbance radius so that the program always sees ||w|| <= 1.
[[nodiscard]] FilterParams filter_params(const Certificate& cert, const Plant& plant, double beta, const Vector& x,
                                         double noise_radius = 1.0);

// max over ||w|| <= 1 of V(Ax + Bu + Dw) - (1 - beta) V(x) - beta; <= 0 means u is robustly admissible.
[[nodiscard]] double worst_case_violation(const FilterParams& p, const Vector& u);

[[nodiscard]] conic::ConicProgram build_filter_program(const FilterParams& p, const Vector& u_nom);

[[nodiscard]] FilterResult solve_filter(const FilterParams& p, const Vector& u_nom, const FilterOptions& opts = {});

struct StepOutcome {
    Vector u;
    bool fallback = false;  // filter failed; certificate controller applied
    FilterResult filter;
};

// Filters u_nom and falls back to K x when the filter program is not solved.
[[nodiscard]] StepOutcome safe_input(const Certificate& cert, const Plant& plant, double beta, const Vector& x,
                                     const Vector& u_nom, double noise_radius = 1.0, const FilterOptions& opts = {});

struct Trajectory {
    std::vector<Vector> x;       // x_0 .. x_T
    std::vector<Vector> u;       // u_0 .. u_{T-1}
    std::vector<double> b;       // b(x_0) .. b(x_T)
    std::vector<bool> fallback;  // per input step
    std::size_t fallback_count = 0;

    [[nodiscard]] double min_barrier() const;
};

using NominalController = std::function<Vector(const Vector&)>;

struct ClosedLoopConfig {
    int horizon = 100;
    std::uint64_t seed = 42;
    std::uint64_t run = 0;
    bool filtered = true;
    FilterOptions options;
};

[[nodiscard]] Trajectory run_closed_loop(const Plant& plant, const Certificate& cert, double beta,
                                         const NominalController& u_nom, const NoiseModel& noise, const Vector& x0,
                                         const ClosedLoopConfig& config);

}  // namespace safecert::filter
