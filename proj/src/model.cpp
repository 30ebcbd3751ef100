#include "safecert/model.hpp"

#include <sstream>
#include <stdexcept>

namespace safecert {

NoiseModel NoiseModel::unit_ball(double radius) {
    NoiseModel n;
    n.kind = NoiseKind::UnitBall;
    n.radius = radius;
    return n;
}

NoiseModel NoiseModel::gaussian(Matrix covariance) {
    NoiseModel n;
    n.kind = NoiseKind::Gaussian;
    n.covariance = std::move(covariance);
    return n;
}

NoiseModel NoiseModel::empirical(std::vector<Vector> samples) {
    NoiseModel n;
    n.kind = NoiseKind::Empirical;
    n.samples = std::move(samples);
    return n;
}

std::vector<Vector> SafetySpec::box(Eigen::Index n, double c) {
    std::vector<Vector> out;
    for (Eigen::Index j = 0; j < n; ++j) {
        for (double sign : {1.0, -1.0}) {
            Vector a = Vector::Zero(n);
            a(j) = sign / c;
            out.push_back(a);
        }
    }
    return out;
}

Matrix SafetySpec::initial_shape() const {
    return initial_R / (1.0 - initial_margin);
}

std::string to_string(SynthesisMode mode) {
    return mode == SynthesisMode::InfiniteHorizon ? "infinite" : "finite";
}

std::string to_string(SolverStatus status) {
    switch (status) {
        case SolverStatus::Optimal: return "optimal";
        case SolverStatus::Infeasible: return "infeasible";
        case SolverStatus::Unbounded: return "unbounded";
        case SolverStatus::NumericalFailure: return "numerical_failure";
        case SolverStatus::MaxIter: return "max_iter";
    }
    return "unknown";
}

SynthesisMode synthesis_mode_from_string(const std::string& s) {
    if (s == "infinite") return SynthesisMode::InfiniteHorizon;
    if (s == "finite") return SynthesisMode::FiniteHorizon;
    throw std::invalid_argument("unknown mode '" + s + "' (expected infinite or finite)");
}

SolverStatus solver_status_from_string(const std::string& s) {
    for (auto st : {SolverStatus::Optimal, SolverStatus::Infeasible, SolverStatus::Unbounded,
                    SolverStatus::NumericalFailure, SolverStatus::MaxIter}) {
        if (to_string(st) == s) return st;
    }
    throw std::invalid_argument("unknown solver status '" + s + "'");
}

namespace {

linalg::SpdFactor factor_or_throw(const Matrix& omega) {
    auto f = linalg::SpdFactor::factor(omega);
    if (!f) throw std::invalid_argument("Omega must be symmetric positive definite");
    return *f;
}

}  // namespace

Certificate::Certificate(Matrix omega, Matrix y, SynthesisMode mode, CertificateParams params,
                         double objective_value, SolverStatus status)
    : omega_(linalg::symmetrize(omega)),
      y_(std::move(y)),
      mode_(mode),
      params_(params),
      objective_(objective_value),
      status_(status),
      factor_(factor_or_throw(omega_)) {
    if (y_.cols() != omega_.rows()) {
        throw std::invalid_argument("Y must have as many columns as Omega has rows");
    }
    // K = Y Omega^{-1} = (Omega^{-1} Y^T)^T
    k_ = factor_.solve(y_.transpose()).transpose();
}

double Certificate::lyapunov(const Vector& x) const {
    return factor_.inverse_quad_form(x);
}

double barrier_value(const Certificate& cert, const Vector& x) {
    return 1.0 - cert.lyapunov(x);
}

Vector controller(const Certificate& cert, const Vector& x) {
    return cert.gain() * x;
}

bool ValidationReport::has(ValidationIssue::Kind kind) const {
    for (const auto& i : issues) {
        if (i.kind == kind) return true;
    }
    return false;
}

std::string ValidationReport::summary() const {
    std::ostringstream os;
    for (const auto& i : issues) os << i.message << '\n';
    return os.str();
}

ValidationReport validate_problem(const Plant& plant, const SafetySpec& spec, const NoiseModel& noise,
                                  SynthesisMode mode) {
    using Kind = ValidationIssue::Kind;
    ValidationReport r;
    auto add = [&r](Kind k, std::string msg) { r.issues.push_back({k, std::move(msg)}); };

    const auto n = plant.A.rows();
    const auto d = plant.D.cols();
    if (n < 1 || plant.A.cols() != n) add(Kind::DimensionMismatch, "A must be square with n >= 1");
    if (plant.B.rows() != n) add(Kind::DimensionMismatch, "B must have n rows");
    if (plant.B.cols() < 1) add(Kind::DimensionMismatch, "B must have at least one column");
    if (plant.D.rows() != n) add(Kind::DimensionMismatch, "D must have n rows");
    if (d < 1) add(Kind::DimensionMismatch, "D must have at least one column");
    if (!plant.A.allFinite() || !plant.B.allFinite() || !plant.D.allFinite()) {
        add(Kind::NonFinite, "plant matrices must be finite");
    }

    for (std::size_t j = 0; j < spec.halfspaces.size(); ++j) {
        const auto& a = spec.halfspaces[j];
        if (a.size() != n) add(Kind::DimensionMismatch, "half-space " + std::to_string(j) + " must have length n");
        if (!a.allFinite()) add(Kind::NonFinite, "half-space " + std::to_string(j) + " is not finite");
    }
    if (spec.ellipsoidal_safe) {
        const Matrix& S = *spec.ellipsoidal_safe;
        if (S.rows() != n || S.cols() != n) {
            add(Kind::DimensionMismatch, "ellipsoidal safe set S must be n x n");
        } else if (!linalg::is_symmetric(S) || !linalg::SpdFactor::factor(S)) {
            add(Kind::NotPositiveDefinite, "ellipsoidal safe set S must be symmetric positive definite");
        }
    }
    if (spec.halfspaces.empty() && !spec.ellipsoidal_safe) {
        add(Kind::MissingPrerequisite, "safe set needs at least one half-space or an ellipsoid");
    }

    if (spec.initial_R.rows() != n || spec.initial_R.cols() != n) {
        add(Kind::DimensionMismatch, "initial set R must be n x n");
    } else if (!linalg::is_symmetric(spec.initial_R) || !linalg::SpdFactor::factor(spec.initial_R)) {
        add(Kind::NotPositiveDefinite, "initial set R must be symmetric positive definite");
    }
    if (!(spec.initial_margin >= 0.0 && spec.initial_margin < 1.0)) {
        add(Kind::InvalidValue, "initial margin sigma must lie in [0,1)");
    }

    if (const auto* poly = std::get_if<PolytopeInput>(&spec.input_set)) {
        if (poly->H.cols() != plant.B.cols() || poly->H.rows() != poly->h.size()) {
            add(Kind::DimensionMismatch, "input polytope H must be k x m with h of length k");
        }
        if (!poly->H.allFinite() || !poly->h.allFinite()) add(Kind::NonFinite, "input polytope must be finite");
        if (poly->h.size() > 0 && (poly->h.array() <= 0.0).any()) {
            add(Kind::InvalidValue, "input polytope needs h > 0 so that 0 is interior");
        }
    } else if (const auto* ball = std::get_if<NormBallInput>(&spec.input_set)) {
        if (!(ball->u_bar > 0.0)) add(Kind::InvalidValue, "input bound u_bar must be positive");
    }

    switch (noise.kind) {
        case NoiseKind::UnitBall:
            if (!(noise.radius > 0.0)) add(Kind::InvalidValue, "noise radius must be positive");
            break;
        case NoiseKind::Gaussian: {
            const Matrix& S = noise.covariance;
            if (S.rows() != d || S.cols() != d) {
                add(Kind::DimensionMismatch, "noise covariance must be d x d");
            } else if (!linalg::is_symmetric(S) || linalg::min_eigenvalue(S) < -1e-12) {
                add(Kind::NotPositiveDefinite, "noise covariance must be symmetric positive semidefinite");
            }
            break;
        }
        case NoiseKind::Empirical:
            if (noise.samples.empty()) add(Kind::InvalidValue, "empirical noise needs at least one sample");
            for (const auto& s : noise.samples) {
                if (s.size() != d) {
                    add(Kind::DimensionMismatch, "empirical noise samples must have length d");
                    break;
                }
            }
            break;
    }

    if (mode == SynthesisMode::FiniteHorizon) {
        if (noise.kind != NoiseKind::Gaussian) {
            add(Kind::MissingPrerequisite, "finite-horizon synthesis needs a Gaussian noise covariance");
        }
        if (!(spec.initial_margin > 0.0)) {
            add(Kind::MissingPrerequisite, "finite-horizon synthesis needs an initial margin sigma in (0,1)");
        }
    } else if (noise.kind != NoiseKind::UnitBall) {
        add(Kind::MissingPrerequisite, "infinite-horizon synthesis needs bounded (unit-ball) noise");
    }
    return r;
}

}  // namespace safecert
