#pragma once

#include "safecert/conic.hpp"
#include "safecert/model.hpp"

#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

namespace safecert::synth {

struct InfiniteHorizonSpec {
    double lambda = 0.5;
    double beta = 0.5;

    [[nodiscard]] double beta_tilde() const { return 1.0 - beta; }
};

// PaperLiteral bounds the largest eigenvalue of Omega^{-1/2} Sigma Omega^{-1/2};
// SoundTrace bounds its trace, which is what the expectation argument needs.
enum class TraceMode { PaperLiteral, SoundTrace };

struct FiniteHorizonSpec {
    double beta = 0.5;
    double delta = 0.0;
    double sigma = 0.5;
    int horizon = 100;
    TraceMode trace_mode = TraceMode::SoundTrace;

    [[nodiscard]] double beta_tilde() const { return 1.0 - beta; }
    [[nodiscard]] double psi() const { return beta - delta; }
};

struct GelbrichSpec {
    Matrix S;  // nominal disturbance covariance, d x d
    double rho = 0.0;
};

enum class ObjectiveKind { Trace, LogDet };

struct BuildOptions {
    ObjectiveKind objective = ObjectiveKind::Trace;
    // multiplier of the polytopic input constraint; required when the input set is a polytope
    std::optional<double> input_multiplier;
};

class SynthesisError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// Variable names used by every builder
inline constexpr const char* kOmega = "Omega";
inline constexpr const char* kY = "Y";

[[nodiscard]] conic::ConicProgram build_infinite_horizon(const Plant& plant, const SafetySpec& spec,
                                                         const NoiseModel& noise, const InfiniteHorizonSpec& ih,
                                                         const BuildOptions& opts = {});

[[nodiscard]] conic::ConicProgram build_finite_horizon(const Plant& plant, const SafetySpec& spec,
                                                       const NoiseModel& noise, const FiniteHorizonSpec& fh,
                                                       const BuildOptions& opts = {});

// Worst case over the Gelbrich ball around S replaces the nominal moment bound.
[[nodiscard]] conic::ConicProgram build_gelbrich_robust(const Plant& plant, const SafetySpec& spec,
                                                        const GelbrichSpec& gelbrich, const FiniteHorizonSpec& fh,
                                                        const BuildOptions& opts = {});

// Frobenius-ball variant: [(lambda - nu) I, S_x; S_x, Omega - nu I] >= 0, nu >= rho^2 / 2,
// with S_x = D S D^T the state-space covariance.
[[nodiscard]] conic::ConicProgram build_frobenius_robust(const Plant& plant, const SafetySpec& spec,
                                                         const GelbrichSpec& ball, const FiniteHorizonSpec& fh,
                                                         const BuildOptions& opts = {});

// Fragments that act on an existing program's Omega and Y
void add_ellipsoidal_containment(conic::ConicProgram& prog, const conic::AffineExpr& omega, const Matrix& S);
void add_polytopic_input_constraint(conic::ConicProgram& prog, const conic::AffineExpr& omega,
                                    const conic::AffineExpr& y, const Matrix& H, const Vector& h,
                                    double multiplier);
void add_norm_input_constraint(conic::ConicProgram& prog, const conic::AffineExpr& omega,
                               const conic::AffineExpr& y, double u_bar);

// Grid of polytope multipliers tried by the drivers.
[[nodiscard]] std::vector<double> input_multiplier_grid(const Vector& h);

// Throws SynthesisError unless the solution is Optimal.
[[nodiscard]] Certificate extract_certificate(const conic::Solution& solution, SynthesisMode mode,
                                              const CertificateParams& params);

struct SynthesisOptions {
    ObjectiveKind objective = ObjectiveKind::Trace;
    conic::SolverSettings solver;
    double lambda_tol = 1e-3;
};

struct SynthesisResult {
    SolverStatus status = SolverStatus::Infeasible;
    std::optional<Certificate> certificate;
    conic::Solution solution;
    std::optional<double> lambda;
    std::optional<double> input_multiplier;
    std::vector<std::pair<double, double>> lambda_probes;
    std::string message;

    [[nodiscard]] bool ok() const { return certificate.has_value(); }
};

// lambda fixed when given, otherwise searched over (0, 1 - beta).
[[nodiscard]] SynthesisResult synthesize_infinite(const Plant& plant, const SafetySpec& spec, const NoiseModel& noise,
                                                  double beta, std::optional<double> lambda,
                                                  const SynthesisOptions& opts = {});

[[nodiscard]] SynthesisResult synthesize_finite(const Plant& plant, const SafetySpec& spec, const NoiseModel& noise,
                                                const FiniteHorizonSpec& fh, const SynthesisOptions& opts = {});

[[nodiscard]] SynthesisResult synthesize_gelbrich(const Plant& plant, const SafetySpec& spec,
                                                  const GelbrichSpec& gelbrich, const FiniteHorizonSpec& fh,
                                                  const SynthesisOptions& opts = {});

[[nodiscard]] SynthesisResult synthesize_frobenius(const Plant& plant, const SafetySpec& spec,
                                                   const GelbrichSpec& ball, const FiniteHorizonSpec& fh,
                                                   const SynthesisOptions& opts = {});

}  // namespace safecert::synth
