#pragma once

#include "safecert/linalg.hpp"

#include <optional>
#include <string>
#include <variant>
#include <vector>

namespace safecert {

/// Discrete-time linear plant x+ = A x + B u + D w.
struct Plant {
    Matrix A;
    Matrix B;
    Matrix D;

    [[nodiscard]] Eigen::Index states() const { return A.rows(); }
    [[nodiscard]] Eigen::Index inputs() const { return B.cols(); }
    [[nodiscard]] Eigen::Index disturbances() const { return D.cols(); }
};

enum class NoiseKind { UnitBall, Gaussian, Empirical };

struct NoiseModel {
    NoiseKind kind = NoiseKind::UnitBall;
    double radius = 1.0;        // UnitBall
    Matrix covariance;          // Gaussian, d x d
    std::vector<Vector> samples;  // Empirical

    static NoiseModel unit_ball(double radius = 1.0);
    static NoiseModel gaussian(Matrix covariance);
    static NoiseModel empirical(std::vector<Vector> samples);
};

struct FreeInput {};
struct PolytopeInput {
    Matrix H;  // k x m
    Vector h;  // k
};
struct NormBallInput {
    double u_bar = 1.0;  // bound on u^T u
};
using InputSet = std::variant<FreeInput, PolytopeInput, NormBallInput>;

struct SafetySpec {
    // each row a_j encodes the half-space a_j^T x + 1 >= 0
    std::vector<Vector> halfspaces;
    std::optional<Matrix> ellipsoidal_safe;  // S: {x : 1 - x^T S x >= 0}
    Matrix initial_R;
    double initial_margin = 0.0;  // sigma; 0 means the full ellipsoid {x^T R x <= 1}
    InputSet input_set = FreeInput{};

    // [-c, c]^n as 2n half-spaces a = +-e_j / c
    static std::vector<Vector> box(Eigen::Index n, double c);

    // Matrix whose unit ellipsoid is the initial set: R / (1 - sigma).
    [[nodiscard]] Matrix initial_shape() const;
};

enum class SynthesisMode { InfiniteHorizon, FiniteHorizon };

enum class SolverStatus { Optimal, Infeasible, Unbounded, NumericalFailure, MaxIter };

[[nodiscard]] std::string to_string(SynthesisMode mode);
[[nodiscard]] std::string to_string(SolverStatus status);
[[nodiscard]] SynthesisMode synthesis_mode_from_string(const std::string& s);
[[nodiscard]] SolverStatus solver_status_from_string(const std::string& s);

struct CertificateParams {
    double beta = 0.0;
    std::optional<double> lambda;
    std::optional<double> delta;
    std::optional<int> horizon;
    std::optional<double> sigma;
};

/// Quadratic barrier b(x) = 1 - x^T Omega^{-1} x with linear feedback
/// u(x) = Y Omega^{-1} x. Immutable once built; K and the factorization of
/// Omega are cached at construction.
class Certificate {
public:
    // Throws std::invalid_argument if Omega is not symmetric positive definite
    // or dimensions disagree. Omega is symmetrized before use.
    Certificate(Matrix omega, Matrix y, SynthesisMode mode, CertificateParams params,
                double objective_value = 0.0, SolverStatus status = SolverStatus::Optimal);

    [[nodiscard]] const Matrix& omega() const { return omega_; }
    [[nodiscard]] const Matrix& y() const { return y_; }
    [[nodiscard]] const Matrix& gain() const { return k_; }
    [[nodiscard]] SynthesisMode mode() const { return mode_; }
    [[nodiscard]] const CertificateParams& params() const { return params_; }
    [[nodiscard]] double objective_value() const { return objective_; }
    [[nodiscard]] SolverStatus solver_status() const { return status_; }
    [[nodiscard]] const linalg::SpdFactor& omega_factor() const { return factor_; }

    [[nodiscard]] Eigen::Index states() const { return omega_.rows(); }
    [[nodiscard]] Eigen::Index inputs() const { return y_.rows(); }

    // x^T Omega^{-1} x
    [[nodiscard]] double lyapunov(const Vector& x) const;

    // Omega^{-1}, formed through the factor (reporting and filter data only).
    [[nodiscard]] Matrix omega_inverse() const { return factor_.inverse(); }

private:
    Matrix omega_;
    Matrix y_;
    Matrix k_;
    SynthesisMode mode_;
    CertificateParams params_;
    double objective_;
    SolverStatus status_;
    linalg::SpdFactor factor_;
};

/// 1 - x^T Omega^{-1} x
[[nodiscard]] double barrier_value(const Certificate& cert, const Vector& x);

/// K x with K = Y Omega^{-1}
[[nodiscard]] Vector controller(const Certificate& cert, const Vector& x);

struct ValidationIssue {
    enum class Kind { DimensionMismatch, NonFinite, NotPositiveDefinite, InvalidValue, MissingPrerequisite };
    Kind kind;
    std::string message;
};

struct ValidationReport {
    std::vector<ValidationIssue> issues;

    [[nodiscard]] bool valid() const { return issues.empty(); }
    [[nodiscard]] bool has(ValidationIssue::Kind kind) const;
    [[nodiscard]] std::string summary() const;
};

/// Collects every structural problem with a synthesis request; never throws.
[[nodiscard]] ValidationReport validate_problem(const Plant& plant, const SafetySpec& spec,
                                                const NoiseModel& noise, SynthesisMode mode);

}  // namespace safecert
