#pragma once

#include "safecert/linalg.hpp"
#include "safecert/model.hpp"

#include <functional>
#include <map>
#include <optional>
#include <string>
#include <utility>
#include <vector>

namespace safecert::conic {

using VarIndex = std::size_t;

/// Matrix-valued expression affine in the scalar decision variables:
/// constant + sum_k coeff_k * y_k.
class AffineExpr {
public:
    AffineExpr() = default;
    AffineExpr(Eigen::Index rows, Eigen::Index cols);
    AffineExpr(Matrix constant);  // NOLINT: implicit on purpose, lets constants mix into expressions

    static AffineExpr scalar(double value);
    static AffineExpr identity(Eigen::Index n);
    static AffineExpr zeros(Eigen::Index rows, Eigen::Index cols);

    [[nodiscard]] Eigen::Index rows() const { return constant_.rows(); }
    [[nodiscard]] Eigen::Index cols() const { return constant_.cols(); }
    [[nodiscard]] const Matrix& constant() const { return constant_; }
    [[nodiscard]] const std::map<VarIndex, Matrix>& terms() const { return terms_; }
    [[nodiscard]] bool is_constant() const { return terms_.empty(); }

    void add_term(VarIndex var, const Matrix& coeff);

    [[nodiscard]] AffineExpr transpose() const;
    [[nodiscard]] AffineExpr block(Eigen::Index i, Eigen::Index j, Eigen::Index r, Eigen::Index c) const;
    [[nodiscard]] AffineExpr trace() const;
    [[nodiscard]] AffineExpr symmetric_part() const;

    [[nodiscard]] Matrix evaluate(const Vector& y) const;

    AffineExpr& operator+=(const AffineExpr& rhs);
    AffineExpr& operator-=(const AffineExpr& rhs);
    AffineExpr& operator*=(double s);

    friend AffineExpr operator+(AffineExpr lhs, const AffineExpr& rhs) { return lhs += rhs; }
    friend AffineExpr operator-(AffineExpr lhs, const AffineExpr& rhs) { return lhs -= rhs; }
    friend AffineExpr operator-(AffineExpr e) { return e *= -1.0; }
    friend AffineExpr operator*(double s, AffineExpr e) { return e *= s; }
    friend AffineExpr operator*(AffineExpr e, double s) { return e *= s; }
    friend AffineExpr operator*(const Matrix& m, const AffineExpr& e);
    friend AffineExpr operator*(const AffineExpr& e, const Matrix& m);

private:
    Matrix constant_;
    std::map<VarIndex, Matrix> terms_;
};

// 1x1 expression s times a constant matrix M.
[[nodiscard]] AffineExpr scaled(const AffineExpr& s, const Matrix& m);

// Assembles a block matrix; every row of blocks must share heights and every
// column of blocks must share widths.
[[nodiscard]] AffineExpr block_matrix(const std::vector<std::vector<AffineExpr>>& blocks);

struct VariableInfo {
    std::string name;
    Eigen::Index rows = 0;
    Eigen::Index cols = 0;
    bool symmetric = false;
    VarIndex offset = 0;
    std::size_t count = 0;
};

struct LmiBlock {
    AffineExpr expr;  // constrained positive semidefinite; symmetric by construction
    std::string label;
};

enum class Relation { GreaterEqualZero, EqualZero };

struct LinearConstraint {
    AffineExpr expr;  // 1x1
    Relation relation = Relation::GreaterEqualZero;
    std::string label;
};

enum class ObjectiveSense { Feasibility, Maximize, Minimize };

struct Objective {
    ObjectiveSense sense = ObjectiveSense::Feasibility;
    AffineExpr linear = AffineExpr::scalar(0.0);
    std::optional<AffineExpr> logdet;         // maximize: + logdet(expr)
    std::optional<AffineExpr> squared_norm;   // minimize: + 0.5 ||expr||^2 (column vector)
};

/// Solver-agnostic semidefinite program: declared variables, LMI blocks,
/// scalar linear constraints and a concave/convex objective.
class ConicProgram {
public:
    AffineExpr add_scalar(const std::string& name);
    AffineExpr add_matrix(const std::string& name, Eigen::Index rows, Eigen::Index cols);
    AffineExpr add_symmetric(const std::string& name, Eigen::Index n);

    // expr >= 0 in the semidefinite order; the expression is symmetrized.
    void add_psd(const AffineExpr& expr, std::string label = {});
    // expr <= 0 in the semidefinite order
    void add_nsd(const AffineExpr& expr, std::string label = {});
    void add_geq(const AffineExpr& scalar_expr, std::string label = {});  // expr >= 0
    void add_eq(const AffineExpr& scalar_expr, std::string label = {});   // expr == 0

    void maximize(const AffineExpr& scalar_expr);
    void minimize(const AffineExpr& scalar_expr);
    // adds logdet(expr) to a maximization objective
    void maximize_logdet(const AffineExpr& sym_expr);
    // adds 0.5 ||expr||^2 to a minimization objective
    void minimize_squared_norm(const AffineExpr& vec_expr);

    [[nodiscard]] std::size_t num_scalars() const { return num_scalars_; }
    [[nodiscard]] const std::vector<VariableInfo>& variables() const { return variables_; }
    [[nodiscard]] const VariableInfo* find_variable(const std::string& name) const;
    [[nodiscard]] AffineExpr variable(const std::string& name) const;
    [[nodiscard]] const std::vector<LmiBlock>& lmi_blocks() const { return lmis_; }
    [[nodiscard]] const std::vector<LinearConstraint>& linear_constraints() const { return linear_; }
    [[nodiscard]] const Objective& objective() const { return objective_; }

    // Flat vector <-> named values
    [[nodiscard]] std::map<std::string, Matrix> unpack(const Vector& y) const;
    [[nodiscard]] Vector pack(const std::map<std::string, Matrix>& values) const;

    // Objective value in the user's sense (no barrier terms).
    [[nodiscard]] double objective_value(const Vector& y) const;

private:
    VariableInfo& declare(const std::string& name, Eigen::Index rows, Eigen::Index cols, bool symmetric,
                          std::size_t count);
    void check_declared(const AffineExpr& e) const;

    std::vector<VariableInfo> variables_;
    std::size_t num_scalars_ = 0;
    std::vector<LmiBlock> lmis_;
    std::vector<LinearConstraint> linear_;
    Objective objective_;
};

struct SolverSettings {
    double tol_feas = 1e-7;       // absolute eigenvalue residual
    double gap_tol = 1e-10;       // relative duality-gap bound
    double barrier_growth = 10.0;
    int max_newton_per_center = 100;
    int max_total_newton = 3000;
    double unbounded_threshold = 1e12;
};

struct Solution {
    SolverStatus status = SolverStatus::NumericalFailure;
    std::map<std::string, Matrix> values;
    Vector raw;
    double objective = 0.0;
    double max_lmi_residual = 0.0;       // min eigenvalue over all PSD blocks
    double max_linear_violation = 0.0;   // worst violation of scalar constraints (>= 0)
    int newton_steps = 0;
    std::string message;

    [[nodiscard]] bool optimal() const { return status == SolverStatus::Optimal; }
    [[nodiscard]] const Matrix& value(const std::string& name) const;
    [[nodiscard]] double scalar(const std::string& name) const { return value(name)(0, 0); }
};

/// Interior-point (log-barrier, phase I / phase II) solve of a ConicProgram.
/// Failures are reported through Solution::status, never thrown.
[[nodiscard]] Solution solve(const ConicProgram& program, const SolverSettings& settings = {});

/// Most negative eigenvalue of every LMI block at the given values.
/// Throws std::invalid_argument if a declared variable is missing.
[[nodiscard]] std::vector<double> lmi_residuals(const ConicProgram& program,
                                                const std::map<std::string, Matrix>& values);

struct UnimodalSearchResult {
    double argmax = 0.0;
    Solution solution;
    std::vector<std::pair<double, double>> probes;  // (parameter, objective or -inf)
};

using ProgramBuilder = std::function<ConicProgram(double)>;

/// Maximizes the optimal value g(p) of a parametric program over p in (lo, hi).
/// A coarse scan brackets the best feasible probe, then golden-section search
/// narrows it to width tol. Infeasible probes score -inf. If every probe is
/// infeasible the returned solution carries status Infeasible.
/// Throws std::invalid_argument on an empty or inverted interval.
[[nodiscard]] UnimodalSearchResult maximize_unimodal(const ProgramBuilder& builder, double lo, double hi,
                                                     double tol = 1e-3, const SolverSettings& settings = {},
                                                     int coarse_points = 9);

/// The lambda search of the infinite-horizon synthesis; lo and hi must lie in [0, 1].
[[nodiscard]] UnimodalSearchResult bisect_lambda(const ProgramBuilder& builder, double lo, double hi,
                                                 double tol = 1e-3, const SolverSettings& settings = {});

}  // namespace safecert::conic
