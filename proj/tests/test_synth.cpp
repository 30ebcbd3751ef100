#include "fixtures.hpp"

#include "safecert/synth.hpp"
#include "safecert/verify.hpp"

#include <doctest.h>

#include <cmath>
#include <limits>
#include <numbers>
#include <random>

using namespace safecert;
using fixtures::mat;
using fixtures::vec;

namespace {

// x^T M x >= 0 for all x, with M = (1 - beta) P - Abar^T P Abar
double decrease_margin(const Certificate& c, const Plant& p, double beta) {
    const Matrix P = c.omega_inverse();
    const Matrix Abar = p.A + p.B * c.gain();
    return linalg::min_eigenvalue((1.0 - beta) * P - Abar.transpose() * P * Abar);
}

void check_contained(const Certificate& c, const SafetySpec& spec) {
    const auto r = verify::check_containment(c, spec);
    CHECK(r.initial >= -1e-7);
    CHECK(r.safe >= -1e-7);
    if (r.ellipsoid) CHECK(*r.ellipsoid >= -1e-7);
}

synth::FiniteHorizonSpec fh_spec(double beta, double delta, double sigma, int T) {
    synth::FiniteHorizonSpec fh;
    fh.beta = beta;
    fh.delta = delta;
    fh.sigma = sigma;
    fh.horizon = T;
    return fh;
}

}  // namespace

TEST_CASE("scalar instance has omega = 1 and K = -1/2") {
    // 1 - omega >= 0 caps omega; at omega = 1 the top-left entry vanishes, forcing A omega + B y = 0
    const auto r = synth::synthesize_infinite(fixtures::scalar_plant(), fixtures::scalar_spec(), NoiseModel::unit_ball(),
                                              0.5, 0.5);
    REQUIRE(r.ok());
    CHECK(r.certificate->omega()(0, 0) == doctest::Approx(1.0).epsilon(1e-5));
    CHECK(r.certificate->gain()(0, 0) == doctest::Approx(-0.5).epsilon(1e-4));
}

TEST_CASE("double integrator fills the box in trace") {
    const auto spec = fixtures::box_spec(2.0, 1.0);
    const auto r = synth::synthesize_infinite(fixtures::double_integrator(), spec, NoiseModel::unit_ball(), 0.4, 0.05);
    REQUIRE(r.ok());
    // 1 - a^T Omega a >= 0 with a = e_i / 2 gives Omega_ii <= 4
    CHECK(r.certificate->omega().trace() == doctest::Approx(8.0).epsilon(1e-6));
    check_contained(*r.certificate, spec);
    CHECK(r.certificate->params().lambda.value() == doctest::Approx(0.05));
}

TEST_CASE("lambda search is at least as good as a fixed lambda") {
    const auto spec = fixtures::box_spec(2.0, 1.0);
    const auto fixed = synth::synthesize_infinite(fixtures::double_integrator(), spec, NoiseModel::unit_ball(), 0.4, 0.05);
    const auto searched =
        synth::synthesize_infinite(fixtures::double_integrator(), spec, NoiseModel::unit_ball(), 0.4, std::nullopt);
    REQUIRE(fixed.ok());
    REQUIRE(searched.ok());
    CHECK(searched.solution.objective >= fixed.solution.objective - 1e-6);
    REQUIRE(searched.lambda);
    CHECK(*searched.lambda > 0.0);
    CHECK(*searched.lambda < 0.6);
}

TEST_CASE("optimal value over lambda has no interior dip") {
    Plant p = fixtures::double_integrator();
    p.D = 0.05 * Matrix::Identity(2, 2);
    const auto spec = fixtures::box_spec(2.0, 1.0);
    std::vector<double> g;
    for (int i = 1; i < 20; ++i) {
        const double lambda = 0.6 * i / 20.0;
        const auto r = synth::synthesize_infinite(p, spec, NoiseModel::unit_ball(), 0.4, lambda);
        g.push_back(r.ok() ? r.solution.objective : -std::numeric_limits<double>::infinity());
    }
    int feasible = 0;
    for (double v : g) feasible += std::isfinite(v) ? 1 : 0;
    CHECK(feasible >= 3);
    for (std::size_t i = 1; i + 1 < g.size(); ++i) {
        if (!std::isfinite(g[i])) continue;
        CHECK_FALSE((g[i] < g[i - 1] - 1e-3 && g[i] < g[i + 1] - 1e-3));
    }
}

TEST_CASE("lambda outside (0,1) is rejected") {
    CHECK_THROWS_WITH_AS((void)synth::synthesize_infinite(fixtures::scalar_plant(), fixtures::scalar_spec(),
                                                          NoiseModel::unit_ball(), 0.5, 1.5),
                         "lambda must lie in (0,1)", std::invalid_argument);
}

TEST_CASE("infinite-horizon certificate satisfies the robust decrease condition") {
    const auto spec = fixtures::box_spec(2.0, 1.0);
    const Plant p = fixtures::double_integrator();
    const auto r = synth::synthesize_infinite(p, spec, NoiseModel::unit_ball(), 0.4, 0.05);
    REQUIRE(r.ok());
    verify::InvarianceOptions io;
    io.n_boundary = 400;
    io.n_dirs = 180;
    CHECK(verify::invariance_oracle(*r.certificate, p, io) >= -1e-6);
}

TEST_CASE("finite-horizon certificate satisfies the decrease and moment conditions") {
    const Plant p = fixtures::underactuated();
    const Matrix S = fixtures::small_cov();
    const auto spec = fixtures::box_spec(1.0, 4.0, 0.5);
    const auto fh = fh_spec(0.2, 0.0, 0.5, 20);
    const auto r = synth::synthesize_finite(p, spec, NoiseModel::gaussian(S), fh);
    REQUIRE(r.ok());
    const Certificate& c = *r.certificate;
    CHECK(decrease_margin(c, p, fh.beta) >= -1e-7);
    // Tr(Omega^{-1} D S D^T) <= beta - delta
    CHECK(c.omega_factor().solve(p.D * S * p.D.transpose()).trace() <= fh.psi() + 1e-7);
    check_contained(c, spec);
}

TEST_CASE("printed moment bound is a relaxation of the trace bound") {
    const Plant p = fixtures::underactuated();
    Matrix S = 5.0 * fixtures::small_cov();
    const auto spec = fixtures::box_spec(1.0, 4.0, 0.5);
    auto fh = fh_spec(0.2, 0.0, 0.5, 20);
    const auto sound = synth::synthesize_finite(p, spec, NoiseModel::gaussian(S), fh);
    fh.trace_mode = synth::TraceMode::PaperLiteral;
    const auto literal = synth::synthesize_finite(p, spec, NoiseModel::gaussian(S), fh);
    REQUIRE(literal.ok());
    const Matrix Sx = p.D * S * p.D.transpose();
    const Matrix root = linalg::psd_sqrt(literal.certificate->omega_inverse());
    CHECK(linalg::max_eigenvalue(root * Sx * root) <= fh.psi() + 1e-7);
    if (sound.ok()) CHECK(literal.solution.objective >= sound.solution.objective - 1e-6);
}

TEST_CASE("ellipsoidal safe set is respected") {
    auto spec = fixtures::box_spec(2.0, 1.0);
    spec.ellipsoidal_safe = mat({{0.5, 0.0}, {0.0, 0.2}});
    const auto r = synth::synthesize_infinite(fixtures::double_integrator(), spec, NoiseModel::unit_ball(), 0.4, 0.05);
    REQUIRE(r.ok());
    check_contained(*r.certificate, spec);
    const Matrix Sinv = spec.ellipsoidal_safe->inverse();
    CHECK(linalg::min_eigenvalue(Sinv - r.certificate->omega()) >= -1e-7);
}

TEST_CASE("polytope fragment accepts the scalar certificate") {
    // omega = 1, Y = -0.5, H = 1, h = 1: max over [-1, 1] of |K x| is 0.5 <= 1
    bool any = false;
    for (double mu : synth::input_multiplier_grid(vec({1.0}))) {
        conic::ConicProgram prog;
        prog.add_scalar("dummy");
        synth::add_polytopic_input_constraint(prog, conic::AffineExpr(mat({{1.0}})), conic::AffineExpr(mat({{-0.5}})),
                                              mat({{1.0}}), vec({1.0}), mu);
        any = any || conic::solve(prog).optimal();
    }
    CHECK(any);
}

TEST_CASE("polytope fragment rejects a gain that leaves the input set") {
    for (double mu : synth::input_multiplier_grid(vec({1.0}))) {
        conic::ConicProgram prog;
        prog.add_scalar("dummy");
        synth::add_polytopic_input_constraint(prog, conic::AffineExpr(mat({{1.0}})), conic::AffineExpr(mat({{-1.5}})),
                                              mat({{1.0}}), vec({1.0}), mu);
        CHECK_FALSE(conic::solve(prog).optimal());
    }
}

TEST_CASE("synthesized gains respect polytope and norm-ball input sets") {
    const Plant p = fixtures::double_integrator();
    auto spec = fixtures::box_spec(2.0, 1.0);
    spec.input_set = PolytopeInput{mat({{1.0}, {-1.0}}), vec({1.5, 1.5})};
    const auto r = synth::synthesize_infinite(p, spec, NoiseModel::unit_ball(), 0.4, 0.05);
    REQUIRE(r.ok());
    const Matrix K = r.certificate->gain();
    // max over B of |K x| = sqrt(K Omega K^T)
    CHECK(std::sqrt((K * r.certificate->omega() * K.transpose())(0, 0)) <= 1.5 + 1e-6);

    spec.input_set = NormBallInput{0.5};
    const auto rb = synth::synthesize_infinite(p, spec, NoiseModel::unit_ball(), 0.4, 0.05);
    REQUIRE(rb.ok());
    const Matrix Kb = rb.certificate->gain();
    CHECK(linalg::max_eigenvalue(Kb * rb.certificate->omega() * Kb.transpose()) <= 0.5 + 1e-6);
}

TEST_CASE("extract_certificate refuses a non-optimal solution") {
    conic::Solution s;
    s.status = SolverStatus::Infeasible;
    CHECK_THROWS_AS((void)synth::extract_certificate(s, SynthesisMode::InfiniteHorizon, {}), synth::SynthesisError);
}

TEST_CASE("infeasible problem yields no certificate") {
    // contraction by sqrt(0.2) per step is out of reach with this input channel and box
    Plant p{mat({{1.0, 0.01}, {0.01, 1.0}}), mat({{0.0}, {0.01}}), Matrix::Identity(2, 2)};
    const Matrix S = mat({{0.0075 * 0.0075, 0.0}, {0.0, 0.05 * 0.05}});
    const auto spec = fixtures::box_spec(std::numbers::pi / 6.0, 1e4, 0.5);
    const auto r = synth::synthesize_finite(p, spec, NoiseModel::gaussian(S), fh_spec(0.8, 0.0, 0.5, 100));
    CHECK(r.status == SolverStatus::Infeasible);
    CHECK_FALSE(r.ok());
}

TEST_CASE("logdet objective does not lose volume against the trace objective") {
    const Plant p = fixtures::underactuated();
    const auto spec = fixtures::box_spec(1.0, 4.0, 0.5);
    const auto fh = fh_spec(0.2, 0.0, 0.5, 20);
    synth::SynthesisOptions tr, ld;
    ld.objective = synth::ObjectiveKind::LogDet;
    const auto a = synth::synthesize_finite(p, spec, NoiseModel::gaussian(fixtures::small_cov()), fh, tr);
    const auto b = synth::synthesize_finite(p, spec, NoiseModel::gaussian(fixtures::small_cov()), fh, ld);
    REQUIRE(a.ok());
    REQUIRE(b.ok());
    CHECK(b.certificate->omega_factor().log_det() >= a.certificate->omega_factor().log_det() - 1e-6);
    CHECK(a.certificate->omega().trace() >= b.certificate->omega().trace() - 1e-6);
}

TEST_CASE("Gelbrich ball of radius zero reproduces the nominal gain") {
    const Plant p = fixtures::underactuated();
    const Matrix S = fixtures::small_cov();
    const auto spec = fixtures::box_spec(1.0, 4.0, 0.5);
    const auto fh = fh_spec(0.2, 0.0, 0.5, 20);
    const auto nom = synth::synthesize_finite(p, spec, NoiseModel::gaussian(S), fh);
    const auto rob = synth::synthesize_gelbrich(p, spec, {S, 0.0}, fh);
    REQUIRE(nom.ok());
    REQUIRE(rob.ok());
    const double rel = (rob.certificate->gain() - nom.certificate->gain()).norm() / nom.certificate->gain().norm();
    CHECK(rel <= 1e-5);
}

TEST_CASE("robust optimal trace does not grow with the radius") {
    const Plant p = fixtures::underactuated();
    const Matrix S = fixtures::small_cov();
    const auto spec = fixtures::box_spec(1.0, 4.0, 0.5);
    const auto fh = fh_spec(0.2, 0.0, 0.5, 20);
    double prev_g = std::numeric_limits<double>::infinity();
    double prev_f = prev_g;
    for (double rho : {0.0, 0.01, 0.05, 0.1, 0.5}) {
        const auto g = synth::synthesize_gelbrich(p, spec, {S, rho}, fh);
        const double tg = g.ok() ? g.certificate->omega().trace() : -std::numeric_limits<double>::infinity();
        CHECK(tg <= prev_g + 1e-6);
        prev_g = tg;
        const auto f = synth::synthesize_frobenius(p, spec, {S, rho}, fh);
        const double tf = f.ok() ? f.certificate->omega().trace() : -std::numeric_limits<double>::infinity();
        CHECK(tf <= prev_f + 1e-6);
        prev_f = tf;
        if (g.ok()) check_contained(*g.certificate, spec);
    }
}

TEST_CASE("Gelbrich certificate covers every covariance in the ball it was built for") {
    const Plant p = fixtures::underactuated();
    const Matrix S = fixtures::small_cov();
    const auto spec = fixtures::box_spec(1.0, 4.0, 0.5);
    const auto fh = fh_spec(0.2, 0.0, 0.5, 20);
    const double rho = 0.05;
    const auto g = synth::synthesize_gelbrich(p, spec, {S, rho}, fh);
    REQUIRE(g.ok());
    const Matrix P = g.certificate->omega_inverse();
    // covariances Sigma = (S^{1/2} + E)(S^{1/2} + E)^T with ||E||_F <= rho are in the Gelbrich ball
    const Matrix root = linalg::psd_sqrt(S);
    std::mt19937_64 rng(5);
    std::normal_distribution<double> n;
    for (int k = 0; k < 200; ++k) {
        Matrix E = Matrix::NullaryExpr(2, 2, [&] { return n(rng); });
        E *= rho / E.norm();
        const Matrix L = root + E;
        const Matrix Sigma = L * L.transpose();
        CHECK((P * p.D * Sigma * p.D.transpose()).trace() <= fh.psi() + 1e-6);
    }
}
