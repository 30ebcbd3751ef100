#include "fixtures.hpp"

#include "safecert/risk.hpp"
#include "safecert/rng.hpp"
#include "safecert/synth.hpp"

#include <doctest.h>

#include <cmath>
#include <random>

using namespace safecert;
using fixtures::mat;
using fixtures::vec;

namespace {

// Bound of the weighted construction evaluated from scratch: a(t) and H from
// g_i = eta, h_i = psi eta^i, minimized over a fine eta grid in (1, 1/(1-beta)].
double grid_bound(double b0, double beta, double delta, int T) {
    const double psi = beta - delta;
    const double top = 1.0 / (1.0 - beta);
    double best = 1.0;
    for (int k = 1; k <= 4000; ++k) {
        const long double eta = 1.0L + (top - 1.0L) * k / 4000.0L;
        long double H = 0, prod = 1, sum_h = 0, amin = 1e300L, pw = 1;
        std::vector<long double> h;
        for (int i = 1; i <= T; ++i) {
            pw *= eta;
            h.push_back(psi * pw);
            H += psi * pw;
        }
        amin = 1 + H;
        for (int t = 1; t <= T; ++t) {
            prod *= eta;
            sum_h += h[static_cast<std::size_t>(t - 1)];
            amin = std::min(amin, prod + H - sum_h);
        }
        best = std::min(best, static_cast<double>(std::min(1.0L, (1 - b0 + H) / amin)));
    }
    return best;
}

}  // namespace

TEST_CASE("bound with delta = 0 is 1 - b0 (1 - beta)^T") {
    const auto r = risk::exit_bound(0.9, 0.01, 0.0, 100);
    const double oracle = static_cast<double>(1.0L - 0.9L * std::pow(0.99L, 100));
    CHECK(r.alpha == doctest::Approx(oracle).epsilon(1e-12));
    CHECK(r.alpha == doctest::Approx(0.670571).epsilon(1e-6));
    CHECK(r.bound_case == risk::BoundCase::DeltaNonneg);
    CHECK(r.eta_star == doctest::Approx(1.0 / 0.99));
}

TEST_CASE("bound with delta = beta is 1 - b0") {
    for (double b0 : {0.0, 0.3, 0.9, 1.0}) {
        const auto r = risk::exit_bound(b0, 0.3, 0.3, 50);
        CHECK(r.alpha == doctest::Approx(1.0 - b0).epsilon(1e-14));
        CHECK(r.eta_star == doctest::Approx(1.0));
    }
}

TEST_CASE("single-step bound") {
    CHECK(risk::exit_bound(1.0, 0.1, 0.05, 1).alpha == doctest::Approx(0.05).epsilon(1e-12));
}

TEST_CASE("closed-form bound is the minimum over eta of the weighted construction") {
    struct Case {
        double b0, beta, delta;
        int T;
    };
    for (const Case c : {Case{0.9, 0.2, 0.1, 10}, Case{0.5, 0.3, 0.0, 20}, Case{0.95, 0.05, -0.01, 5},
                         Case{0.99, 0.1, -0.02, 8}, Case{1.0, 0.1, 0.05, 1}, Case{0.6, 0.4, 0.35, 15}}) {
        CAPTURE(c.beta);
        CAPTURE(c.delta);
        const double closed = risk::exit_bound(c.b0, c.beta, c.delta, c.T).alpha;
        const double grid = grid_bound(c.b0, c.beta, c.delta, c.T);
        CHECK(closed <= grid + 1e-9);
        CHECK(grid - closed <= 1e-3);
        CHECK(risk::exit_bound(c.b0, c.beta, c.delta, c.T).bound_case ==
              (c.delta < 0 ? risk::BoundCase::DeltaNegative : risk::BoundCase::DeltaNonneg));
    }
}

TEST_CASE("bound at eta is minimized at eta star when delta < 0") {
    const double b0 = 0.95, beta = 0.05, delta = -0.01;
    const int T = 5;
    const double star = risk::exit_bound(b0, beta, delta, T).alpha;
    CHECK(risk::exit_bound_at_eta(b0, beta, delta, T, 1.0 / (1.0 - beta)) == doctest::Approx(star).epsilon(1e-12));
    for (double eta : {1.001, 1.01, 1.03, 1.05}) CHECK(risk::exit_bound_at_eta(b0, beta, delta, T, eta) >= star - 1e-12);
}

TEST_CASE("bound decreases as b0 grows") {
    double prev = 2.0;
    for (double b0 = 0.0; b0 <= 1.0; b0 += 0.1) {
        const double a = risk::exit_bound(b0, 0.05, 0.02, 20).alpha;
        CHECK(a <= prev + 1e-15);
        prev = a;
    }
}

TEST_CASE("bound does not overflow for huge horizons") {
    const auto r = risk::exit_bound(0.5, 0.9, -0.05, 100000);
    CHECK(std::isfinite(r.alpha));
    CHECK(r.alpha >= 0.0);
    CHECK(r.alpha <= 1.0);
}

TEST_CASE("bound domain errors") {
    CHECK_THROWS_AS((void)risk::exit_bound(0.5, 0.0, 0.0, 10), std::invalid_argument);
    CHECK_THROWS_AS((void)risk::exit_bound(0.5, 0.5, 0.6, 10), std::invalid_argument);
    CHECK_THROWS_AS((void)risk::exit_bound(0.5, 0.5, -0.5, 10), std::invalid_argument);
    CHECK_THROWS_AS((void)risk::exit_bound(1.5, 0.5, 0.0, 10), std::invalid_argument);
    CHECK_THROWS_AS((void)risk::exit_bound(0.5, 0.5, 0.0, 0), std::invalid_argument);
}

TEST_CASE("geometric weights pass the weight conditions") {
    const double beta = 0.2, psi = 0.15;
    const auto w = risk::geometric_weights(1.0 / (1.0 - beta), psi, 10);
    CHECK_FALSE(risk::check_weights(w, beta, psi).has_value());
    double sum = 0.0;
    for (double h : w.h) sum += h;
    CHECK(w.H == doctest::Approx(sum));
}

TEST_CASE("weight conditions reject each kind of violation") {
    const double beta = 0.2, psi = 0.15;
    auto w = risk::geometric_weights(1.1, psi, 5);
    auto bad = w;
    bad.g[2] = 1.0 / (1.0 - beta) + 0.1;
    CHECK(risk::check_weights(bad, beta, psi).has_value());
    bad = w;
    bad.h[1] = -1e-3;
    CHECK(risk::check_weights(bad, beta, psi).has_value());
    bad = w;
    bad.h[3] = 0.5 * w.h[3];
    CHECK(risk::check_weights(bad, beta, psi).has_value());
    bad = w;
    bad.H = 0.5 * w.H;
    CHECK(risk::check_weights(bad, beta, psi).has_value());
}

TEST_CASE("general zeta with geometric weights matches the closed-form zeta") {
    const Matrix omega = mat({{2.0, 0.3}, {0.3, 1.0}});
    std::vector<Vector> path;
    for (int t = 0; t <= 6; ++t) path.push_back(vec({0.1 * t, -0.05 * t + 0.2}));
    const double eta = 1.2, psi = 0.1;
    const auto a = risk::zeta(path, omega, eta, psi, 6);
    const auto b = risk::zeta_general(path, omega, risk::geometric_weights(eta, psi, 6));
    REQUIRE(a.values.size() == b.size());
    for (std::size_t i = 0; i < b.size(); ++i) CHECK(a.values[i] == doctest::Approx(b[i]).epsilon(1e-12));
}

TEST_CASE("zeta is a supermartingale under a finite-horizon certificate") {
    const Plant p = fixtures::underactuated();
    const Matrix S = fixtures::small_cov();
    auto spec = fixtures::box_spec(1.0, 4.0, 0.5);
    synth::FiniteHorizonSpec fh;
    fh.beta = 0.2;
    fh.delta = 0.05;
    fh.sigma = 0.5;
    fh.horizon = 10;
    const auto r = synth::synthesize_finite(p, spec, NoiseModel::gaussian(S), fh);
    REQUIRE(r.ok());
    const Certificate& c = *r.certificate;
    const double eta = 1.0 / (1.0 - fh.beta);
    const double psi = fh.psi();
    const int T = fh.horizon;
    const Matrix Abar = p.A + p.B * c.gain();
    const auto zeta_at = [&](int t, const Vector& x) {
        const double et = std::pow(eta, t);
        return et * c.lyapunov(x) + psi * eta * (std::pow(eta, T) - et) / (eta - 1.0);
    };
    NoiseSampler ns(NoiseModel::gaussian(S), 2, 99, 0);
    const Matrix root = linalg::psd_sqrt(c.omega());
    for (const Vector& u : {vec({0.0, 0.0}), vec({0.6, 0.0}), vec({0.0, -0.9}), vec({0.5, 0.5})}) {
        const Vector x = root * u;  // b(x) >= 0
        const int t = 3;
        const int N = 100000;
        double mean = 0.0, sq = 0.0;
        for (int k = 0; k < N; ++k) {
            const double z = zeta_at(t + 1, Vector(Abar * x + p.D * ns.next()));
            mean += z;
            sq += z * z;
        }
        mean /= N;
        const double se = std::sqrt(std::max(0.0, sq / N - mean * mean) / N);
        CHECK(mean <= zeta_at(t, x) + 3.0 * se);
    }
}

TEST_CASE("select_delta on the worked example") {
    const auto sel = risk::select_delta(0.3, 0.1, 0.9, 10);
    // delta >= (((1 - 0.3) / 0.9)^{1/10}) + 0.1 - 1
    const double lo = std::pow(0.7 / 0.9, 0.1) - 0.9;
    bool found = false;
    for (const auto& b : sel.branches) {
        if (b.z != 1) continue;
        found = true;
        CHECK(b.lo == doctest::Approx(lo).epsilon(1e-12));
        CHECK(b.hi == doctest::Approx(0.1));
        CHECK(b.lo == doctest::Approx(0.075169).epsilon(1e-3));
    }
    CHECK(found);
    CHECK(sel.theta2 == doctest::Approx(1.0).epsilon(1e-14));
}

TEST_CASE("select_delta admits zero for a loose target") {
    // 1 - sigma (1 - beta)^T <= alpha_bar
    const auto sel = risk::select_delta(0.999, 0.1, 0.9, 10);
    bool zero_ok = false;
    for (const auto& b : sel.branches)
        if (b.z == 1 && b.lo <= 0.0) zero_ok = true;
    CHECK(zero_ok);
}

TEST_CASE("select_delta is empty for an impossible target") {
    CHECK(risk::select_delta(0.001, 0.1, 0.1, 10).branches.empty());
}

TEST_CASE("every selected delta meets the target and the branch encoding") {
    std::mt19937_64 rng(17);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    int checked = 0;
    for (int k = 0; k < 300; ++k) {
        const double alpha_bar = 0.02 + 0.96 * u(rng);
        const double beta = 0.02 + 0.9 * u(rng);
        const double sigma = 0.05 + 0.9 * u(rng);
        const int T = 1 + static_cast<int>(50 * u(rng));
        const auto sel = risk::select_delta(alpha_bar, beta, sigma, T);
        for (const auto& b : sel.branches) {
            const double mid = b.hi_open ? 0.5 * (b.lo + b.hi) : b.lo;
            for (double d : {b.lo, mid}) {
                if (b.hi_open && d >= 0.0) continue;
                CHECK(risk::exit_bound(sigma, beta, d, T).alpha <= alpha_bar + 1e-9);
                CHECK(risk::big_m_consistent(sel, alpha_bar, sigma, beta, d, b.z));
                ++checked;
            }
            // slightly below the smallest delta the target fails, unless lo sits on the domain edge
            const double below = b.lo - 1e-4;
            const bool interior = b.z == 1 ? b.lo > 1e-4 : below > beta - 1.0;
            if (interior) CHECK(risk::exit_bound(sigma, beta, below, T).alpha > alpha_bar);
        }
    }
    CHECK(checked > 50);
}

TEST_CASE("big-M encoding rejects the wrong branch") {
    const auto sel = risk::select_delta(0.3, 0.1, 0.9, 10);
    CHECK(risk::big_m_consistent(sel, 0.3, 0.9, 0.1, 0.09, 1));
    CHECK_FALSE(risk::big_m_consistent(sel, 0.3, 0.9, 0.1, 0.09, 0));  // positive delta with z = 0
    CHECK_FALSE(risk::big_m_consistent(sel, 0.3, 0.9, 0.1, 0.05, 1));  // below the z = 1 threshold
}

TEST_CASE("support inflation keeps the gain and shrinks Omega") {
    const Certificate c(mat({{2.0, 0.3}, {0.3, 1.0}}), mat({{1.0, -0.4}}), SynthesisMode::FiniteHorizon, {});
    const auto inflated = risk::inflate_support(c, 0.25);
    CHECK((inflated.gain() - c.gain()).norm() < 1e-12);
    CHECK((inflated.omega() * 1.5625 - c.omega()).norm() < 1e-12);
    CHECK_THROWS_AS((void)risk::inflate_support(c, -0.1), std::invalid_argument);
}
