#include "fixtures.hpp"

#include "safecert/conic.hpp"

#include <doctest.h>

#include <cmath>
#include <random>

using namespace safecert;
using namespace safecert::conic;
using fixtures::mat;

TEST_CASE("2x2 Schur bound: max t with [1 t; t 1] >= 0") {
    ConicProgram p;
    const auto t = p.add_scalar("t");
    p.add_psd(block_matrix({{AffineExpr::scalar(1.0), t}, {t, AffineExpr::scalar(1.0)}}));
    p.maximize(t);
    const auto s = solve(p);
    REQUIRE(s.optimal());
    CHECK(s.scalar("t") == doctest::Approx(1.0).epsilon(1e-6));
    CHECK(s.max_lmi_residual >= -1e-7);
}

TEST_CASE("a constant negative block is infeasible") {
    ConicProgram p;
    p.add_scalar("x");
    p.add_psd(AffineExpr::scalar(-1.0));
    CHECK(solve(p).status == SolverStatus::Infeasible);
}

TEST_CASE("conflicting scalar bounds are infeasible") {
    ConicProgram p;
    const auto x = p.add_scalar("x");
    p.add_geq(x - AffineExpr::scalar(2.0));
    p.add_geq(AffineExpr::scalar(1.0) - x);
    p.maximize(x);
    CHECK(solve(p).status == SolverStatus::Infeasible);
}

TEST_CASE("unbounded linear objective") {
    ConicProgram p;
    const auto x = p.add_scalar("x");
    p.add_geq(x);
    p.maximize(x);
    CHECK(solve(p).status == SolverStatus::Unbounded);
}

TEST_CASE("max trace W subject to M - W >= 0 equals trace M") {
    std::mt19937_64 rng(11);
    std::normal_distribution<double> n;
    for (int k = 0; k < 5; ++k) {
        Matrix G = Matrix::NullaryExpr(3, 3, [&] { return n(rng); });
        const Matrix M = G * G.transpose() + 0.1 * Matrix::Identity(3, 3);
        ConicProgram p;
        const auto W = p.add_symmetric("W", 3);
        p.add_psd(AffineExpr(M) - W);
        p.maximize(W.trace());
        const auto s = solve(p);
        REQUIRE(s.optimal());
        CHECK(s.objective == doctest::Approx(M.trace()).epsilon(1e-6));
    }
}

TEST_CASE("logdet objective recovers the bounding matrix") {
    const Matrix M = mat({{2.0, 0.5}, {0.5, 1.0}});
    ConicProgram p;
    const auto W = p.add_symmetric("W", 2);
    p.add_psd(AffineExpr(M) - W);
    p.maximize_logdet(W);
    const auto s = solve(p);
    REQUIRE(s.optimal());
    CHECK((s.value("W") - M).norm() < 1e-5);
}

TEST_CASE("equality constraints are eliminated exactly") {
    ConicProgram p;
    const auto x = p.add_scalar("x");
    const auto y = p.add_scalar("y");
    p.add_eq(x + y - AffineExpr::scalar(0.5));
    p.add_geq(AffineExpr::scalar(1.0) - x);
    p.add_geq(x + AffineExpr::scalar(1.0));
    p.maximize(y);
    const auto s = solve(p);
    REQUIRE(s.optimal());
    CHECK(s.scalar("x") == doctest::Approx(-1.0).epsilon(1e-6));
    CHECK(s.scalar("y") == doctest::Approx(1.5).epsilon(1e-6));
}

TEST_CASE("squared-norm projection onto a half-plane") {
    // min 0.5 ||u - (3, -1)||^2 s.t. u_1 <= 1  ->  u = (1, -1)
    ConicProgram p;
    const auto u = p.add_matrix("u", 2, 1);
    p.add_geq(AffineExpr::scalar(1.0) - u.block(0, 0, 1, 1));
    p.minimize_squared_norm(u - AffineExpr(mat({{3.0}, {-1.0}})));
    const auto s = solve(p);
    REQUIRE(s.optimal());
    CHECK(s.value("u")(0, 0) == doctest::Approx(1.0).epsilon(1e-6));
    CHECK(s.value("u")(1, 0) == doctest::Approx(-1.0).epsilon(1e-6));
    CHECK(s.objective == doctest::Approx(2.0).epsilon(1e-6));
}

TEST_CASE("assembled blocks are exactly symmetric") {
    ConicProgram p;
    const auto X = p.add_matrix("X", 2, 2);
    const auto S = p.add_symmetric("S", 2);
    p.add_psd(mat({{1.0, 2.0}, {0.0, 1.0}}) * X + S);
    const auto& blk = p.lmi_blocks().front().expr;
    CHECK(blk.constant() == blk.constant().transpose());
    for (const auto& [var, coeff] : blk.terms()) {
        (void)var;
        CHECK(coeff == coeff.transpose());
    }
    Vector y = Vector::LinSpaced(static_cast<Eigen::Index>(p.num_scalars()), 0.3, 2.1);
    const Matrix v = blk.evaluate(y);
    CHECK((v - v.transpose()).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("pack and unpack round trip") {
    ConicProgram p;
    p.add_scalar("a");
    p.add_symmetric("S", 3);
    p.add_matrix("M", 2, 3);
    std::map<std::string, Matrix> v{{"a", mat({{1.5}})},
                                    {"S", mat({{1.0, 2.0, 3.0}, {2.0, 4.0, 5.0}, {3.0, 5.0, 6.0}})},
                                    {"M", mat({{1.0, 2.0, 3.0}, {4.0, 5.0, 6.0}})}};
    CHECK(p.num_scalars() == 1 + 6 + 6);
    const auto back = p.unpack(p.pack(v));
    for (const auto& [k, m] : v) CHECK((back.at(k) - m).norm() == 0.0);
}

TEST_CASE("lmi_residuals of an exact PSD substitution are nonnegative") {
    ConicProgram p;
    const auto W = p.add_symmetric("W", 2);
    p.add_psd(W);
    p.add_psd(AffineExpr::identity(2) - W);
    const auto r = lmi_residuals(p, {{"W", mat({{0.5, 0.1}, {0.1, 0.5}})}});
    for (double v : r) CHECK(v >= 0.0);
}

TEST_CASE("unimodal search finds the peak of a parametric program") {
    // g(p) = max t s.t. t <= 1 - (p - 0.3)^2
    const ProgramBuilder build = [](double par) {
        ConicProgram prog;
        const auto t = prog.add_scalar("t");
        prog.add_geq(AffineExpr::scalar(1.0 - (par - 0.3) * (par - 0.3)) - t);
        prog.maximize(t);
        return prog;
    };
    const auto r = maximize_unimodal(build, 0.0, 1.0, 1e-4);
    REQUIRE(r.solution.optimal());
    CHECK(r.argmax == doctest::Approx(0.3).epsilon(1e-3));
    CHECK(r.solution.objective == doctest::Approx(1.0).epsilon(1e-6));
}

TEST_CASE("unimodal search scores infeasible probes as -inf") {
    // feasible only for p in (0.6, 0.8)
    const ProgramBuilder build = [](double par) {
        ConicProgram prog;
        const auto t = prog.add_scalar("t");
        prog.add_geq(AffineExpr::scalar((par - 0.6) * (0.8 - par)) - t);
        prog.add_geq(t);
        prog.maximize(t);
        return prog;
    };
    const auto r = maximize_unimodal(build, 0.0, 1.0, 1e-4, {}, 21);
    REQUIRE(r.solution.optimal());
    CHECK(r.argmax == doctest::Approx(0.7).epsilon(1e-2));
    bool saw_infeasible = false;
    for (const auto& [par, val] : r.probes) saw_infeasible = saw_infeasible || std::isinf(val);
    CHECK(saw_infeasible);
}

TEST_CASE("unimodal search with no feasible probe reports Infeasible") {
    const ProgramBuilder build = [](double) {
        ConicProgram prog;
        prog.add_scalar("t");
        prog.add_psd(AffineExpr::scalar(-1.0));
        return prog;
    };
    CHECK(maximize_unimodal(build, 0.0, 1.0).solution.status == SolverStatus::Infeasible);
    CHECK_THROWS_AS((void)bisect_lambda(build, 0.5, 0.2), std::invalid_argument);
}
