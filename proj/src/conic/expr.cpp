#include "safecert/conic.hpp"

#include <stdexcept>

namespace safecert::conic {

namespace {

Matrix mul(const Matrix& a, const Matrix& b) {
    return a * b;
}

}  // namespace

AffineExpr::AffineExpr(Eigen::Index rows, Eigen::Index cols) : constant_(Matrix::Zero(rows, cols)) {}

AffineExpr::AffineExpr(Matrix constant) : constant_(std::move(constant)) {}

AffineExpr AffineExpr::scalar(double value) {
    return AffineExpr(Matrix::Constant(1, 1, value));
}

AffineExpr AffineExpr::identity(Eigen::Index n) {
    return AffineExpr(Matrix::Identity(n, n));
}

AffineExpr AffineExpr::zeros(Eigen::Index rows, Eigen::Index cols) {
    return AffineExpr(rows, cols);
}

void AffineExpr::add_term(VarIndex var, const Matrix& coeff) {
    if (coeff.rows() != rows() || coeff.cols() != cols()) {
        throw std::invalid_argument("AffineExpr::add_term: coefficient shape mismatch");
    }
    auto it = terms_.find(var);
    if (it == terms_.end()) {
        terms_.emplace(var, coeff);
    } else {
        it->second += coeff;
    }
}

AffineExpr AffineExpr::transpose() const {
    AffineExpr out(Matrix(constant_.transpose()));
    for (const auto& [v, c] : terms_) out.terms_.emplace(v, c.transpose());
    return out;
}

AffineExpr AffineExpr::block(Eigen::Index i, Eigen::Index j, Eigen::Index r, Eigen::Index c) const {
    AffineExpr out(Matrix(constant_.block(i, j, r, c)));
    for (const auto& [v, m] : terms_) out.terms_.emplace(v, m.block(i, j, r, c));
    return out;
}

AffineExpr AffineExpr::trace() const {
    if (rows() != cols()) throw std::invalid_argument("AffineExpr::trace: expression is not square");
    AffineExpr out = scalar(constant_.trace());
    for (const auto& [v, m] : terms_) out.terms_.emplace(v, Matrix::Constant(1, 1, m.trace()));
    return out;
}

AffineExpr AffineExpr::symmetric_part() const {
    if (rows() != cols()) throw std::invalid_argument("AffineExpr::symmetric_part: expression is not square");
    AffineExpr out(linalg::symmetrize(constant_));
    for (const auto& [v, m] : terms_) out.terms_.emplace(v, linalg::symmetrize(m));
    return out;
}

Matrix AffineExpr::evaluate(const Vector& y) const {
    Matrix out = constant_;
    for (const auto& [v, m] : terms_) {
        if (static_cast<Eigen::Index>(v) >= y.size()) {
            throw std::invalid_argument("AffineExpr::evaluate: variable index out of range");
        }
        out += y(static_cast<Eigen::Index>(v)) * m;
    }
    return out;
}

AffineExpr& AffineExpr::operator+=(const AffineExpr& rhs) {
    if (rhs.rows() != rows() || rhs.cols() != cols()) {
        throw std::invalid_argument("AffineExpr: shape mismatch in addition");
    }
    constant_ += rhs.constant_;
    for (const auto& [v, m] : rhs.terms_) add_term(v, m);
    return *this;
}

AffineExpr& AffineExpr::operator-=(const AffineExpr& rhs) {
    return *this += -1.0 * rhs;
}

AffineExpr& AffineExpr::operator*=(double s) {
    constant_ *= s;
    for (auto& [v, m] : terms_) m *= s;
    return *this;
}

AffineExpr operator*(const Matrix& m, const AffineExpr& e) {
    if (m.cols() != e.rows()) throw std::invalid_argument("AffineExpr: shape mismatch in left product");
    AffineExpr out(mul(m, e.constant_));
    for (const auto& [v, c] : e.terms_) out.terms_.emplace(v, mul(m, c));
    return out;
}

AffineExpr operator*(const AffineExpr& e, const Matrix& m) {
    if (e.cols() != m.rows()) throw std::invalid_argument("AffineExpr: shape mismatch in right product");
    AffineExpr out(mul(e.constant_, m));
    for (const auto& [v, c] : e.terms_) out.terms_.emplace(v, mul(c, m));
    return out;
}

AffineExpr scaled(const AffineExpr& s, const Matrix& m) {
    if (s.rows() != 1 || s.cols() != 1) throw std::invalid_argument("scaled: expected a 1x1 expression");
    AffineExpr out(Matrix(s.constant()(0, 0) * m));
    for (const auto& [v, c] : s.terms()) out.add_term(v, c(0, 0) * m);
    return out;
}

AffineExpr block_matrix(const std::vector<std::vector<AffineExpr>>& blocks) {
    if (blocks.empty()) return AffineExpr(0, 0);
    const std::size_t ncols = blocks.front().size();
    std::vector<Eigen::Index> heights(blocks.size());
    std::vector<Eigen::Index> widths(ncols);
    for (std::size_t i = 0; i < blocks.size(); ++i) {
        if (blocks[i].size() != ncols) throw std::invalid_argument("block_matrix: ragged block rows");
        heights[i] = blocks[i][0].rows();
    }
    for (std::size_t j = 0; j < ncols; ++j) widths[j] = blocks[0][j].cols();

    Eigen::Index total_rows = 0, total_cols = 0;
    for (auto h : heights) total_rows += h;
    for (auto w : widths) total_cols += w;

    AffineExpr out(total_rows, total_cols);
    Matrix constant = Matrix::Zero(total_rows, total_cols);
    std::map<VarIndex, Matrix> terms;
    Eigen::Index r0 = 0;
    for (std::size_t i = 0; i < blocks.size(); ++i) {
        Eigen::Index c0 = 0;
        for (std::size_t j = 0; j < ncols; ++j) {
            const AffineExpr& b = blocks[i][j];
            if (b.rows() != heights[i] || b.cols() != widths[j]) {
                throw std::invalid_argument("block_matrix: inconsistent block shapes");
            }
            constant.block(r0, c0, b.rows(), b.cols()) = b.constant();
            for (const auto& [v, m] : b.terms()) {
                auto it = terms.find(v);
                if (it == terms.end()) it = terms.emplace(v, Matrix::Zero(total_rows, total_cols)).first;
                it->second.block(r0, c0, m.rows(), m.cols()) += m;
            }
            c0 += widths[j];
        }
        r0 += heights[i];
    }
    AffineExpr result(constant);
    for (const auto& [v, m] : terms) result.add_term(v, m);
    return result;
}

}  // namespace safecert::conic
