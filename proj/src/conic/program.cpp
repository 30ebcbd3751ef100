#include "safecert/conic.hpp"

#include <limits>
#include <stdexcept>

namespace safecert::conic {

VariableInfo& ConicProgram::declare(const std::string& name, Eigen::Index rows, Eigen::Index cols,
                                    bool symmetric, std::size_t count) {
    if (name.empty()) throw std::invalid_argument("variable name must not be empty");
    if (find_variable(name)) throw std::invalid_argument("duplicate variable name '" + name + "'");
    if (rows < 1 || cols < 1) throw std::invalid_argument("variable '" + name + "' must have positive shape");
    VariableInfo info{name, rows, cols, symmetric, num_scalars_, count};
    num_scalars_ += count;
    variables_.push_back(info);
    return variables_.back();
}

AffineExpr ConicProgram::add_scalar(const std::string& name) {
    return add_matrix(name, 1, 1);
}

AffineExpr ConicProgram::add_matrix(const std::string& name, Eigen::Index rows, Eigen::Index cols) {
    const auto& info = declare(name, rows, cols, false, static_cast<std::size_t>(rows * cols));
    return variable(info.name);
}

AffineExpr ConicProgram::add_symmetric(const std::string& name, Eigen::Index n) {
    const auto& info = declare(name, n, n, true, static_cast<std::size_t>(n * (n + 1) / 2));
    return variable(info.name);
}

const VariableInfo* ConicProgram::find_variable(const std::string& name) const {
    for (const auto& v : variables_) {
        if (v.name == name) return &v;
    }
    return nullptr;
}

AffineExpr ConicProgram::variable(const std::string& name) const {
    const VariableInfo* info = find_variable(name);
    if (!info) throw std::invalid_argument("unknown variable '" + name + "'");
    AffineExpr e(info->rows, info->cols);
    VarIndex k = info->offset;
    if (info->symmetric) {
        for (Eigen::Index j = 0; j < info->cols; ++j) {
            for (Eigen::Index i = j; i < info->rows; ++i) {
                Matrix c = Matrix::Zero(info->rows, info->cols);
                c(i, j) = 1.0;
                c(j, i) = 1.0;
                e.add_term(k++, c);
            }
        }
    } else {
        for (Eigen::Index j = 0; j < info->cols; ++j) {
            for (Eigen::Index i = 0; i < info->rows; ++i) {
                Matrix c = Matrix::Zero(info->rows, info->cols);
                c(i, j) = 1.0;
                e.add_term(k++, c);
            }
        }
    }
    return e;
}

void ConicProgram::check_declared(const AffineExpr& e) const {
    for (const auto& [v, m] : e.terms()) {
        (void)m;
        if (v >= num_scalars_) throw std::invalid_argument("expression references an undeclared variable");
    }
}

void ConicProgram::add_psd(const AffineExpr& expr, std::string label) {
    if (expr.rows() != expr.cols() || expr.rows() == 0) {
        throw std::invalid_argument("LMI block must be square and nonempty");
    }
    check_declared(expr);
    lmis_.push_back({expr.symmetric_part(), std::move(label)});
}

void ConicProgram::add_nsd(const AffineExpr& expr, std::string label) {
    add_psd(-expr, std::move(label));
}

void ConicProgram::add_geq(const AffineExpr& scalar_expr, std::string label) {
    if (scalar_expr.rows() != 1 || scalar_expr.cols() != 1) {
        throw std::invalid_argument("linear constraint must be a 1x1 expression");
    }
    check_declared(scalar_expr);
    linear_.push_back({scalar_expr, Relation::GreaterEqualZero, std::move(label)});
}

void ConicProgram::add_eq(const AffineExpr& scalar_expr, std::string label) {
    if (scalar_expr.rows() != 1 || scalar_expr.cols() != 1) {
        throw std::invalid_argument("linear constraint must be a 1x1 expression");
    }
    check_declared(scalar_expr);
    linear_.push_back({scalar_expr, Relation::EqualZero, std::move(label)});
}

void ConicProgram::maximize(const AffineExpr& scalar_expr) {
    if (scalar_expr.rows() != 1 || scalar_expr.cols() != 1) {
        throw std::invalid_argument("objective must be a 1x1 expression");
    }
    if (objective_.sense == ObjectiveSense::Minimize) throw std::logic_error("objective sense already set to minimize");
    check_declared(scalar_expr);
    objective_.sense = ObjectiveSense::Maximize;
    objective_.linear += scalar_expr;
}

void ConicProgram::minimize(const AffineExpr& scalar_expr) {
    if (scalar_expr.rows() != 1 || scalar_expr.cols() != 1) {
        throw std::invalid_argument("objective must be a 1x1 expression");
    }
    if (objective_.sense == ObjectiveSense::Maximize) throw std::logic_error("objective sense already set to maximize");
    check_declared(scalar_expr);
    objective_.sense = ObjectiveSense::Minimize;
    objective_.linear += scalar_expr;
}

void ConicProgram::maximize_logdet(const AffineExpr& sym_expr) {
    if (sym_expr.rows() != sym_expr.cols()) throw std::invalid_argument("logdet needs a square expression");
    if (objective_.sense == ObjectiveSense::Minimize) throw std::logic_error("objective sense already set to minimize");
    if (objective_.logdet) throw std::logic_error("only one logdet term is supported");
    check_declared(sym_expr);
    objective_.sense = ObjectiveSense::Maximize;
    objective_.logdet = sym_expr.symmetric_part();
}

void ConicProgram::minimize_squared_norm(const AffineExpr& vec_expr) {
    if (vec_expr.cols() != 1) throw std::invalid_argument("squared norm needs a column expression");
    if (objective_.sense == ObjectiveSense::Maximize) throw std::logic_error("objective sense already set to maximize");
    if (objective_.squared_norm) throw std::logic_error("only one squared-norm term is supported");
    check_declared(vec_expr);
    objective_.sense = ObjectiveSense::Minimize;
    objective_.squared_norm = vec_expr;
}

std::map<std::string, Matrix> ConicProgram::unpack(const Vector& y) const {
    if (static_cast<std::size_t>(y.size()) != num_scalars_) {
        throw std::invalid_argument("unpack: vector length does not match the number of scalars");
    }
    std::map<std::string, Matrix> out;
    for (const auto& v : variables_) {
        out.emplace(v.name, variable(v.name).evaluate(y));
    }
    return out;
}

Vector ConicProgram::pack(const std::map<std::string, Matrix>& values) const {
    Vector y = Vector::Zero(static_cast<Eigen::Index>(num_scalars_));
    for (const auto& v : variables_) {
        auto it = values.find(v.name);
        if (it == values.end()) throw std::invalid_argument("missing value for variable '" + v.name + "'");
        const Matrix& m = it->second;
        if (m.rows() != v.rows || m.cols() != v.cols) {
            throw std::invalid_argument("value for '" + v.name + "' has the wrong shape");
        }
        auto k = static_cast<Eigen::Index>(v.offset);
        if (v.symmetric) {
            for (Eigen::Index j = 0; j < v.cols; ++j) {
                for (Eigen::Index i = j; i < v.rows; ++i) {
                    y(k++) = i == j ? m(i, j) : 0.5 * (m(i, j) + m(j, i));
                }
            }
        } else {
            for (Eigen::Index j = 0; j < v.cols; ++j) {
                for (Eigen::Index i = 0; i < v.rows; ++i) y(k++) = m(i, j);
            }
        }
    }
    return y;
}

double ConicProgram::objective_value(const Vector& y) const {
    double f = objective_.linear.evaluate(y)(0, 0);
    if (objective_.logdet) {
        auto fac = linalg::SpdFactor::factor(objective_.logdet->evaluate(y));
        f += fac ? fac->log_det() : -std::numeric_limits<double>::infinity();
    }
    if (objective_.squared_norm) f += 0.5 * objective_.squared_norm->evaluate(y).squaredNorm();
    return f;
}

const Matrix& Solution::value(const std::string& name) const {
    auto it = values.find(name);
    if (it == values.end()) throw std::out_of_range("solution has no variable '" + name + "'");
    return it->second;
}

std::vector<double> lmi_residuals(const ConicProgram& program, const std::map<std::string, Matrix>& values) {
    const Vector y = program.pack(values);
    std::vector<double> out;
    out.reserve(program.lmi_blocks().size());
    for (const auto& b : program.lmi_blocks()) out.push_back(linalg::min_eigenvalue(b.expr.evaluate(y)));
    return out;
}

}  // namespace safecert::conic
