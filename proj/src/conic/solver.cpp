#include "safecert/conic.hpp"

#include <Eigen/Cholesky>
#include <Eigen/SVD>

#include <algorithm>
#include <cmath>
#include <limits>

namespace safecert::conic {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

// F(z) = c + sum_j z_j G_j in the reduced coordinates
struct Block {
    Matrix c;
    std::vector<std::pair<Eigen::Index, Matrix>> terms;

    [[nodiscard]] Eigen::Index size() const { return c.rows(); }

    [[nodiscard]] Matrix at(const Vector& z) const {
        Matrix f = c;
        for (const auto& [j, g] : terms) f += z(j) * g;
        return f;
    }
};

// y = y0 + N z removes the equality constraints
struct Reduction {
    Vector y0;
    Matrix N;
    bool consistent = true;
};

Reduction eliminate_equalities(const ConicProgram& p) {
    const auto n = static_cast<Eigen::Index>(p.num_scalars());
    std::vector<const LinearConstraint*> eqs;
    for (const auto& lc : p.linear_constraints()) {
        if (lc.relation == Relation::EqualZero) eqs.push_back(&lc);
    }
    Reduction r;
    if (eqs.empty()) {
        r.y0 = Vector::Zero(n);
        r.N = Matrix::Identity(n, n);
        return r;
    }
    const auto m = static_cast<Eigen::Index>(eqs.size());
    Matrix A = Matrix::Zero(m, n);
    Vector b(m);
    for (Eigen::Index i = 0; i < m; ++i) {
        b(i) = -eqs[static_cast<std::size_t>(i)]->expr.constant()(0, 0);
        for (const auto& [v, c] : eqs[static_cast<std::size_t>(i)]->expr.terms()) {
            A(i, static_cast<Eigen::Index>(v)) += c(0, 0);
        }
    }
    Eigen::JacobiSVD<Matrix> svd(A, Eigen::ComputeFullU | Eigen::ComputeFullV);
    const Vector& s = svd.singularValues();
    const double cut = 1e-12 * std::max(1.0, s.size() > 0 ? s(0) : 0.0);
    Eigen::Index rank = 0;
    while (rank < s.size() && s(rank) > cut) ++rank;
    const Matrix& U = svd.matrixU();
    const Matrix& V = svd.matrixV();
    Vector coeff = (U.leftCols(rank).transpose() * b).cwiseQuotient(s.head(rank));
    r.y0 = V.leftCols(rank) * coeff;
    r.N = V.rightCols(n - rank);
    r.consistent = (A * r.y0 - b).norm() <= 1e-9 * (1.0 + b.norm());
    return r;
}

Block reduce(const AffineExpr& e, const Reduction& red) {
    Block blk;
    blk.c = e.constant();
    for (const auto& [v, m] : e.terms()) blk.c += red.y0(static_cast<Eigen::Index>(v)) * m;
    for (Eigen::Index j = 0; j < red.N.cols(); ++j) {
        Matrix g = Matrix::Zero(e.rows(), e.cols());
        bool any = false;
        for (const auto& [v, m] : e.terms()) {
            const double w = red.N(static_cast<Eigen::Index>(v), j);
            if (w != 0.0) {
                g += w * m;
                any = true;
            }
        }
        if (any && g.cwiseAbs().maxCoeff() > 0.0) blk.terms.emplace_back(j, std::move(g));
    }
    return blk;
}

// minimize  c^T z + 0.5 ||p0 + P z||^2 - w logdet(L(z))
//   s.t.    F_k(z) > 0 for all blocks
struct Problem {
    Eigen::Index nz = 0;
    std::vector<Block> blocks;
    Vector c;
    double c0 = 0.0;
    std::optional<Block> logdet;
    bool quadratic = false;
    Matrix P;
    Vector p0;

    [[nodiscard]] double theta() const {
        double t = 0.0;
        for (const auto& b : blocks) t += static_cast<double>(b.size());
        return t;
    }
};

// Adds -w logdet F(z) (and derivatives) to the accumulators; false if F is not PD.
bool add_neg_logdet(const Block& b, const Vector& z, double w, bool derivs, double& val, Vector* g, Matrix* H) {
    const Matrix f = b.at(z);
    Eigen::LLT<Matrix> llt(f);
    if (llt.info() != Eigen::Success) return false;
    const Matrix L = llt.matrixL();
    const Vector diag = L.diagonal();
    if ((diag.array() <= 0.0).any() || !diag.allFinite()) return false;
    val -= w * 2.0 * diag.array().log().sum();
    if (!derivs) return true;
    std::vector<Matrix> W;
    W.reserve(b.terms.size());
    for (const auto& [j, gm] : b.terms) {
        Matrix x = L.triangularView<Eigen::Lower>().solve(gm);
        Matrix wj = L.triangularView<Eigen::Lower>().solve(x.transpose());
        W.push_back(std::move(wj));
        (*g)(j) -= w * W.back().trace();
    }
    for (std::size_t a = 0; a < W.size(); ++a) {
        const auto ja = b.terms[a].first;
        for (std::size_t c = a; c < W.size(); ++c) {
            const auto jc = b.terms[c].first;
            const double h = w * W[a].cwiseProduct(W[c]).sum();
            (*H)(ja, jc) += h;
            if (ja != jc) (*H)(jc, ja) += h;
        }
    }
    return true;
}

double f0_value(const Problem& p, const Vector& z, bool* ok) {
    double v = p.c0 + p.c.dot(z);
    if (p.quadratic) v += 0.5 * (p.p0 + p.P * z).squaredNorm();
    if (p.logdet) {
        double ld = 0.0;
        if (!add_neg_logdet(*p.logdet, z, 1.0, false, ld, nullptr, nullptr)) {
            *ok = false;
            return kInf;
        }
        v += ld;
    }
    return v;
}

struct Eval {
    bool ok = false;
    double phi = kInf;
    Vector g;
    Matrix H;
};

// phi(z) = t f0(z) - sum_k logdet F_k(z)
Eval evaluate(const Problem& p, const Vector& z, double t, bool derivs) {
    Eval e;
    e.phi = 0.0;
    if (derivs) {
        e.g = Vector::Zero(p.nz);
        e.H = Matrix::Zero(p.nz, p.nz);
    }
    Vector* g = derivs ? &e.g : nullptr;
    Matrix* H = derivs ? &e.H : nullptr;
    for (const auto& b : p.blocks) {
        if (!add_neg_logdet(b, z, 1.0, derivs, e.phi, g, H)) return e;
    }
    e.phi += t * (p.c0 + p.c.dot(z));
    if (derivs) e.g += t * p.c;
    if (p.quadratic) {
        const Vector r = p.p0 + p.P * z;
        e.phi += t * 0.5 * r.squaredNorm();
        if (derivs) {
            e.g += t * p.P.transpose() * r;
            e.H += t * p.P.transpose() * p.P;
        }
    }
    if (p.logdet) {
        if (!add_neg_logdet(*p.logdet, z, t, derivs, e.phi, g, H)) return e;
    }
    e.ok = std::isfinite(e.phi);
    return e;
}

enum class CenterResult { Centered, Stalled, Infeasible, Budget };

struct PathState {
    Vector z;
    int steps = 0;
};

// Damped Newton on phi for fixed t. `early_stop` is checked after every step.
template <typename Stop>
CenterResult center(const Problem& p, PathState& st, double t, const SolverSettings& s, Stop early_stop,
                    bool* stopped) {
    *stopped = false;
    for (int it = 0; it < s.max_newton_per_center; ++it) {
        if (st.steps >= s.max_total_newton) return CenterResult::Budget;
        Eval e = evaluate(p, st.z, t, true);
        if (!e.ok) return CenterResult::Infeasible;
        Matrix H = e.H;
        const double reg = 1e-13 * std::max(1.0, H.diagonal().cwiseAbs().maxCoeff());
        H.diagonal().array() += reg;
        Eigen::LDLT<Matrix> ldlt(H);
        Vector dz = -ldlt.solve(e.g);
        if (!dz.allFinite()) return CenterResult::Stalled;
        const double dec2 = -e.g.dot(dz);
        if (dec2 <= 0.0 || 0.5 * dec2 < 1e-11) return CenterResult::Centered;

        double alpha = 1.0;
        bool accepted = false;
        for (int ls = 0; ls < 80; ++ls) {
            const Vector zn = st.z + alpha * dz;
            Eval en = evaluate(p, zn, t, false);
            if (en.ok && en.phi <= e.phi - 0.01 * alpha * dec2) {
                st.z = zn;
                accepted = true;
                break;
            }
            alpha *= 0.5;
        }
        ++st.steps;
        if (!accepted) return CenterResult::Stalled;
        if (early_stop(st.z)) {
            *stopped = true;
            return CenterResult::Centered;
        }
    }
    return CenterResult::Centered;
}

Solution finish(const ConicProgram& prog, const Reduction& red, const Vector& z, SolverStatus status,
                const SolverSettings& s, int steps, std::string message) {
    Solution sol;
    sol.status = status;
    sol.newton_steps = steps;
    sol.message = std::move(message);
    sol.raw = red.y0 + red.N * z;
    if (!sol.raw.allFinite()) {
        sol.status = SolverStatus::NumericalFailure;
        sol.message = "non-finite iterate";
        return sol;
    }
    sol.values = prog.unpack(sol.raw);
    sol.objective = prog.objective_value(sol.raw);
    double worst = kInf;
    for (const auto& b : prog.lmi_blocks()) worst = std::min(worst, linalg::min_eigenvalue(b.expr.evaluate(sol.raw)));
    sol.max_lmi_residual = std::isfinite(worst) ? worst : 0.0;
    double viol = 0.0;
    for (const auto& lc : prog.linear_constraints()) {
        const double v = lc.expr.evaluate(sol.raw)(0, 0);
        viol = std::max(viol, lc.relation == Relation::EqualZero ? std::abs(v) : std::max(0.0, -v));
    }
    sol.max_linear_violation = viol;
    if (sol.status == SolverStatus::Optimal && (sol.max_lmi_residual < -s.tol_feas || viol > s.tol_feas)) {
        sol.status = SolverStatus::NumericalFailure;
        sol.message = "returned point violates the constraints beyond tolerance";
    }
    return sol;
}

}  // namespace

Solution solve(const ConicProgram& prog, const SolverSettings& s) {
    const Reduction red = eliminate_equalities(prog);
    if (!red.consistent) {
        Solution sol;
        sol.status = SolverStatus::Infeasible;
        sol.message = "inconsistent equality constraints";
        return sol;
    }

    Problem p;
    p.nz = red.N.cols();
    for (const auto& b : prog.lmi_blocks()) p.blocks.push_back(reduce(b.expr, red));
    for (const auto& lc : prog.linear_constraints()) {
        if (lc.relation == Relation::GreaterEqualZero) p.blocks.push_back(reduce(lc.expr, red));
    }

    const Objective& obj = prog.objective();
    const double sign = obj.sense == ObjectiveSense::Maximize ? -1.0 : 1.0;
    const bool has_objective = obj.sense != ObjectiveSense::Feasibility;
    {
        const Block lin = reduce(obj.linear, red);
        p.c0 = sign * lin.c(0, 0);
        p.c = Vector::Zero(p.nz);
        for (const auto& [j, g] : lin.terms) p.c(j) = sign * g(0, 0);
    }
    if (obj.logdet) p.logdet = reduce(*obj.logdet, red);
    if (obj.squared_norm) {
        const Block q = reduce(*obj.squared_norm, red);
        p.quadratic = true;
        p.p0 = q.c.col(0);
        p.P = Matrix::Zero(q.c.rows(), p.nz);
        for (const auto& [j, g] : q.terms) p.P.col(j) = g.col(0);
    }

    const Vector zero = Vector::Zero(p.nz);
    if (p.nz == 0) {
        double worst = kInf;
        for (const auto& b : p.blocks) worst = std::min(worst, linalg::min_eigenvalue(b.c));
        const bool feasible = !(worst < -s.tol_feas);
        return finish(prog, red, zero, feasible ? SolverStatus::Optimal : SolverStatus::Infeasible, s, 0,
                      feasible ? "no free variables" : "constant constraints violated");
    }

    // Phase I: maximize s subject to F_k(z) - s I > 0; the logdet objective
    // domain joins the constraint set so phase II starts inside it.
    Problem ph1;
    ph1.nz = p.nz + 1;
    auto lift = [&](const Block& b) {
        Block out;
        out.c = b.c;
        out.terms = b.terms;
        out.terms.emplace_back(p.nz, -Matrix::Identity(b.size(), b.size()));
        return out;
    };
    for (const auto& b : p.blocks) ph1.blocks.push_back(lift(b));
    if (p.logdet) ph1.blocks.push_back(lift(*p.logdet));
    ph1.c = Vector::Zero(ph1.nz);
    ph1.c(p.nz) = -1.0;

    double smin = kInf;
    for (const auto& b : ph1.blocks) smin = std::min(smin, linalg::min_eigenvalue(b.c));
    PathState st;
    st.z = Vector::Zero(ph1.nz);

    int total_steps = 0;
    Vector z0 = zero;
    double shift = 0.0;
    if (smin > 0.0) {
        z0 = zero;
    } else {
        st.z(p.nz) = smin - std::max(1.0, 0.1 * std::abs(smin));
        const double theta1 = ph1.theta();
        double t = 1.0;
        bool found = false;
        for (;;) {
            bool stopped = false;
            auto res = center(ph1, st, t, s, [&](const Vector& z) { return z(p.nz) > 0.0; }, &stopped);
            if (stopped) {
                found = true;
                break;
            }
            if (res == CenterResult::Budget) {
                return finish(prog, red, st.z.head(p.nz), SolverStatus::MaxIter, s, st.steps,
                              "iteration budget exhausted in phase I");
            }
            if (res == CenterResult::Infeasible) {
                return finish(prog, red, st.z.head(p.nz), SolverStatus::NumericalFailure, s, st.steps,
                              "phase I left the barrier domain");
            }
            const double sbar = st.z(p.nz);
            if (std::abs(sbar) > s.unbounded_threshold || st.z.cwiseAbs().maxCoeff() > s.unbounded_threshold) {
                return finish(prog, red, st.z.head(p.nz), SolverStatus::NumericalFailure, s, st.steps,
                              "phase I diverged");
            }
            const double gap = theta1 / t;
            if (sbar + gap < -s.tol_feas) {
                Solution sol = finish(prog, red, st.z.head(p.nz), SolverStatus::Infeasible, s, st.steps,
                                      "phase I certifies infeasibility");
                return sol;
            }
            if (gap < 1e-3 * s.tol_feas || res == CenterResult::Stalled) {
                if (sbar < -s.tol_feas) {
                    return finish(prog, red, st.z.head(p.nz), SolverStatus::Infeasible, s, st.steps,
                                  "phase I optimum below the feasibility tolerance");
                }
                // marginally feasible: relax every block by a shift within tolerance
                shift = 0.5 * (s.tol_feas - sbar);
                break;
            }
            t *= s.barrier_growth;
        }
        z0 = st.z.head(p.nz);
        if (!found && shift <= 0.0) shift = 0.5 * s.tol_feas;
    }
    total_steps = st.steps;
    if (shift > 0.0) {
        for (auto& b : p.blocks) b.c.diagonal().array() += shift;
    }

    // Phase II: barrier path on t f0 - sum logdet F_k
    PathState path;
    path.z = z0;
    path.steps = total_steps;
    const double theta = p.theta() + (p.logdet ? static_cast<double>(p.logdet->size()) : 0.0);
    auto never = [](const Vector&) { return false; };
    std::string note = shift > 0.0 ? "solved with a feasibility shift" : "";

    if (!has_objective) {
        bool stopped = false;
        auto res = center(p, path, 1.0, s, never, &stopped);
        if (res == CenterResult::Budget) {
            return finish(prog, red, path.z, SolverStatus::MaxIter, s, path.steps, "iteration budget exhausted");
        }
        return finish(prog, red, path.z, SolverStatus::Optimal, s, path.steps, note);
    }

    bool ok = true;
    const double f_start = f0_value(p, path.z, &ok);
    double t = std::max(theta, 1.0) / std::max(1.0, std::abs(f_start));
    for (;;) {
        bool stopped = false;
        auto res = center(p, path, t, s, never, &stopped);
        if (res == CenterResult::Budget) {
            return finish(prog, red, path.z, SolverStatus::MaxIter, s, path.steps, "iteration budget exhausted");
        }
        if (res == CenterResult::Infeasible) {
            return finish(prog, red, path.z, SolverStatus::NumericalFailure, s, path.steps,
                          "phase II left the barrier domain");
        }
        bool fok = true;
        const double f = f0_value(p, path.z, &fok);
        if (!fok || !std::isfinite(f)) {
            return finish(prog, red, path.z, SolverStatus::NumericalFailure, s, path.steps, "objective undefined");
        }
        if (f < -s.unbounded_threshold || path.z.cwiseAbs().maxCoeff() > s.unbounded_threshold) {
            return finish(prog, red, path.z, SolverStatus::Unbounded, s, path.steps, "objective unbounded");
        }
        const double gap = theta / t;
        if (gap <= s.gap_tol * std::max(1.0, std::abs(f))) {
            return finish(prog, red, path.z, SolverStatus::Optimal, s, path.steps, note);
        }
        if (res == CenterResult::Stalled) {
            // numerical floor reached; accept if the gap is already small
            if (gap <= 1e-6 * std::max(1.0, std::abs(f))) {
                return finish(prog, red, path.z, SolverStatus::Optimal, s, path.steps,
                              note.empty() ? "stopped at numerical floor" : note);
            }
            return finish(prog, red, path.z, SolverStatus::NumericalFailure, s, path.steps,
                          "Newton line search stalled");
        }
        t *= s.barrier_growth;
    }
}

}  // namespace safecert::conic
