#pragma once

#include "safecert/model.hpp"
#include "safecert/synth.hpp"

#include <optional>
#include <vector>

namespace safecert::risk {

enum class BoundCase { DeltaNegative, DeltaNonneg };

struct RiskBound {
    double alpha = 1.0;  // upper bound on the exit probability, clamped to [0,1]
    BoundCase bound_case = BoundCase::DeltaNonneg;
    double eta_star = 1.0;
    double psi = 0.0;
    double beta = 0.0;
    double delta = 0.0;
    int horizon = 0;
    double b0 = 0.0;
};

struct MartingaleTrace {
    std::vector<double> values;  // zeta_0 .. zeta_T
    double eta = 1.0;
    double psi = 0.0;
    int horizon = 0;
};

// zeta_t = eta^t x_t^T Omega^{-1} x_t + psi eta (eta^T - eta^t) / (eta - 1)
// Throws std::invalid_argument for eta <= 1, psi < 0 or a path whose length is not T+1.
[[nodiscard]] MartingaleTrace zeta(const std::vector<Vector>& path, const Matrix& omega, double eta, double psi,
                                   int horizon);

// Weights of the general supermartingale construction; g and h hold g_1..g_T and h_1..h_T.
struct SupermartingaleWeights {
    std::vector<double> g;
    std::vector<double> h;
    double H = 0.0;
};

// Geometric weights g_i = eta, h_i = psi eta^i, H = sum_i h_i.
[[nodiscard]] SupermartingaleWeights geometric_weights(double eta, double psi, int horizon);

// Empty when the weights satisfy the positivity, growth and offset conditions
// for (beta, psi); otherwise a description of the first violation.
[[nodiscard]] std::optional<std::string> check_weights(const SupermartingaleWeights& w, double beta, double psi);

// zeta_t = (prod_{i<=t} g_i) V_t + H - sum_{i<=t} h_i with V_t = x_t^T Omega^{-1} x_t
[[nodiscard]] std::vector<double> zeta_general(const std::vector<Vector>& path, const Matrix& omega,
                                               const SupermartingaleWeights& w);

// a(t) = prod_{i<=t} g_i + H - sum_{i<=t} h_i
[[nodiscard]] std::vector<double> level_sequence(const SupermartingaleWeights& w);

// (1 - b0 + H) / min_t a(t), clamped to [0,1]. Throws if the weights are invalid.
[[nodiscard]] double exit_bound_general(double b0, double beta, double psi, const SupermartingaleWeights& w);

// Exit bound of the geometric construction at a given eta in (1, 1/(1-beta)],
// evaluated without forming eta^T.
[[nodiscard]] double exit_bound_at_eta(double b0, double beta, double delta, int horizon, double eta);

// Closed-form bound at the optimal eta. Throws std::invalid_argument outside
// beta in (0,1), delta in (beta-1, beta], b0 in [0,1], T >= 1.
[[nodiscard]] RiskBound exit_bound(double b0, double beta, double delta, int horizon);

// Barrier margin assumed over the initial set when no initial point is given.
[[nodiscard]] inline double b0_floor(double sigma) { return sigma; }

struct DeltaBranch {
    int z = 0;             // 0: delta < 0 branch, 1: delta >= 0 branch
    double lo = 0.0;       // smallest admissible delta (best objective)
    double hi = 0.0;
    bool hi_open = false;  // z = 0 excludes delta = 0
};

struct DeltaSelection {
    double theta1 = 0.0;
    double theta2 = 0.0;
    double theta3 = 0.0;
    double theta4 = 0.0;
    double big_m = 10.0;
    std::vector<DeltaBranch> branches;  // nonempty branches only
};

// Feasible delta intervals for a target exit probability alpha_bar.
[[nodiscard]] DeltaSelection select_delta(double alpha_bar, double beta, double sigma, int horizon,
                                          double big_m = 10.0);

// True when (delta, z) satisfies the big-M encoding of the branch disjunction.
[[nodiscard]] bool big_m_consistent(const DeltaSelection& sel, double alpha_bar, double sigma, double beta,
                                    double delta, int z);

// Omega / (1 + d)^2 with Y scaled alike so that K is unchanged.
[[nodiscard]] Certificate inflate_support(const Certificate& cert, double hausdorff_d);

struct RiskTargetResult {
    std::optional<synth::SynthesisResult> best;
    std::optional<double> delta;
    DeltaSelection selection;
    std::vector<std::pair<double, SolverStatus>> attempts;  // (delta, status) per branch
};

// Solves one finite-horizon program per nonempty branch at its smallest delta
// and keeps the larger objective.
[[nodiscard]] RiskTargetResult synthesize_for_risk(const Plant& plant, const SafetySpec& spec,
                                                   const NoiseModel& noise, double alpha_bar,
                                                   const synth::FiniteHorizonSpec& base,
                                                   const synth::SynthesisOptions& opts = {});

}  // namespace safecert::risk
