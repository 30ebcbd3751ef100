#include "safecert/linalg.hpp"

#include <Eigen/Eigenvalues>

#include <algorithm>
#include <cmath>
#include <limits>

namespace safecert::linalg {

bool all_finite(const Matrix& m) {
    return m.allFinite();
}

bool is_symmetric(const Matrix& m, double tol) {
    if (m.rows() != m.cols()) return false;
    const double scale = std::max(1.0, m.cwiseAbs().maxCoeff());
    return (m - m.transpose()).cwiseAbs().maxCoeff() <= tol * scale;
}

Matrix symmetrize(const Matrix& m) {
    return 0.5 * (m + m.transpose());
}

double min_eigenvalue(const Matrix& m) {
    if (m.size() == 0) return std::numeric_limits<double>::infinity();
    Eigen::SelfAdjointEigenSolver<Matrix> es(symmetrize(m), Eigen::EigenvaluesOnly);
    return es.eigenvalues()(0);
}

double max_eigenvalue(const Matrix& m) {
    if (m.size() == 0) return -std::numeric_limits<double>::infinity();
    Eigen::SelfAdjointEigenSolver<Matrix> es(symmetrize(m), Eigen::EigenvaluesOnly);
    return es.eigenvalues()(es.eigenvalues().size() - 1);
}

Matrix psd_sqrt(const Matrix& m) {
    Eigen::SelfAdjointEigenSolver<Matrix> es(symmetrize(m));
    const Vector root = es.eigenvalues().cwiseMax(0.0).cwiseSqrt();
    Matrix s = es.eigenvectors() * root.asDiagonal() * es.eigenvectors().transpose();
    return symmetrize(s);
}

Matrix psd_factor(const Matrix& m) {
    Eigen::SelfAdjointEigenSolver<Matrix> es(symmetrize(m));
    const Vector root = es.eigenvalues().cwiseMax(0.0).cwiseSqrt();
    return root.asDiagonal() * es.eigenvectors().transpose();
}

std::optional<SpdFactor> SpdFactor::factor(const Matrix& m) {
    if (m.rows() != m.cols() || m.rows() == 0 || !m.allFinite()) return std::nullopt;
    Eigen::LLT<Matrix> llt(symmetrize(m));
    if (llt.info() != Eigen::Success) return std::nullopt;
    const auto diag = Matrix(llt.matrixL()).diagonal();
    if ((diag.array() <= 0.0).any()) return std::nullopt;
    return SpdFactor(std::move(llt));
}

double SpdFactor::inverse_quad_form(const Vector& x) const {
    const Vector z = llt_.matrixL().solve(x);
    return z.squaredNorm();
}

Matrix SpdFactor::inverse() const {
    return symmetrize(llt_.solve(Matrix::Identity(size(), size())));
}

double SpdFactor::log_det() const {
    return 2.0 * Matrix(llt_.matrixL()).diagonal().array().log().sum();
}

SphereMaximum maximize_on_sphere(const Matrix& L, const Vector& e) {
    const Eigen::Index d = L.rows();
    Eigen::SelfAdjointEigenSolver<Matrix> es(symmetrize(L));
    const Vector lam = es.eigenvalues();
    const Matrix& V = es.eigenvectors();
    const Vector et = V.transpose() * e;
    const double lmax = lam(d - 1);
    const double scale = std::max({1.0, std::abs(lmax), e.norm()});
    const double tie = 1e-12 * scale;

    auto norm_sq = [&](double mu) {
        double s = 0.0;
        for (Eigen::Index i = 0; i < d; ++i) {
            const double gap = mu - lam(i);
            s += et(i) * et(i) / (gap * gap);
        }
        return s;
    };

    double top_weight = 0.0;
    for (Eigen::Index i = 0; i < d; ++i) {
        if (lmax - lam(i) <= tie) top_weight += et(i) * et(i);
    }

    Vector w(d);
    if (top_weight <= 1e-24 * scale * scale) {
        // hard case candidate: evaluate the secular function just off the top eigenspace
        Vector partial = Vector::Zero(d);
        double partial_sq = 0.0;
        for (Eigen::Index i = 0; i < d; ++i) {
            if (lmax - lam(i) > tie) {
                partial(i) = et(i) / (lmax - lam(i));
                partial_sq += partial(i) * partial(i);
            }
        }
        if (partial_sq <= 1.0) {
            Eigen::Index top = d - 1;
            partial(top) = std::sqrt(1.0 - partial_sq);
            w = V * partial;
            SphereMaximum out;
            out.argmax = w;
            out.value = w.dot(L * w) + 2.0 * e.dot(w);
            return out;
        }
    }

    double lo = lmax;
    double hi = lmax + std::max(e.norm(), 1e-300);
    // norm_sq(hi) <= 1 by construction; bisect on the monotone secular function
    for (int it = 0; it < 200; ++it) {
        const double mid = 0.5 * (lo + hi);
        if (mid <= lo || mid >= hi) break;
        if (norm_sq(mid) > 1.0) {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    const double mu = hi;
    Vector coeff(d);
    for (Eigen::Index i = 0; i < d; ++i) coeff(i) = et(i) / (mu - lam(i));
    w = V * coeff;
    const double n = w.norm();
    if (n > 0.0) w /= n;
    SphereMaximum out;
    out.argmax = w;
    out.value = w.dot(L * w) + 2.0 * e.dot(w);
    return out;
}

}  // namespace safecert::linalg
