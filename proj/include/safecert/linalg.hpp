#pragma once

#include <Eigen/Cholesky>
#include <Eigen/Dense>

#include <optional>

namespace safecert {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

namespace linalg {

[[nodiscard]] bool all_finite(const Matrix& m);

[[nodiscard]] bool is_symmetric(const Matrix& m, double tol = 1e-9);

// (M + M^T) / 2
[[nodiscard]] Matrix symmetrize(const Matrix& m);

// Smallest eigenvalue of the symmetric part. Empty matrix -> +inf.
[[nodiscard]] double min_eigenvalue(const Matrix& m);
[[nodiscard]] double max_eigenvalue(const Matrix& m);

// Symmetric square root; eigenvalues below zero are clamped to zero.
[[nodiscard]] Matrix psd_sqrt(const Matrix& m);

// Returns G with G^T G = M for a PSD M (rows = rank-agnostic, G is n x n).
[[nodiscard]] Matrix psd_factor(const Matrix& m);

/// Cholesky factorization of a symmetric positive definite matrix.
///
/// Quadratic forms and solves go through the factor; the inverse is never
/// formed explicitly.
class SpdFactor {
public:
    // Returns nullopt if the matrix is not numerically positive definite.
    static std::optional<SpdFactor> factor(const Matrix& m);

    [[nodiscard]] Eigen::Index size() const { return llt_.rows(); }

    // x^T M^{-1} x
    [[nodiscard]] double inverse_quad_form(const Vector& x) const;

    // M^{-1} b
    [[nodiscard]] Matrix solve(const Matrix& b) const { return llt_.solve(b); }

    // M^{-1}, only for reporting
    [[nodiscard]] Matrix inverse() const;

    [[nodiscard]] double log_det() const;

    [[nodiscard]] Matrix lower() const { return llt_.matrixL(); }

private:
    explicit SpdFactor(Eigen::LLT<Matrix> llt) : llt_(std::move(llt)) {}
    Eigen::LLT<Matrix> llt_;
};

struct SphereMaximum {
    double value = 0.0;  // max of w^T L w + 2 e^T w over ||w|| = 1
    Vector argmax;
};

/// Maximizes w^T L w + 2 e^T w over the unit sphere for symmetric L.
///
/// Solved through the secular equation ||(mu I - L)^{-1} e|| = 1 with
/// mu >= lambda_max(L); the degenerate ("hard") case where e has no
/// component along the top eigenspace is handled explicitly. For PSD L this
/// is also the maximum over the closed unit ball.
[[nodiscard]] SphereMaximum maximize_on_sphere(const Matrix& L, const Vector& e);

}  // namespace linalg
}  // namespace safecert
