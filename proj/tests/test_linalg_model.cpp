#include "fixtures.hpp"

#include "safecert/linalg.hpp"
#include "safecert/model.hpp"

#include <doctest.h>

#include <cmath>
#include <random>

using namespace safecert;
using fixtures::mat;
using fixtures::vec;

TEST_CASE("validate_problem accepts a consistent box problem") {
    Plant p{Matrix::Identity(2, 2), mat({{0.0}, {1.0}}), Matrix::Identity(2, 2)};
    const auto spec = fixtures::box_spec(1.0, 1.0);
    const auto r = validate_problem(p, spec, NoiseModel::unit_ball(), SynthesisMode::InfiniteHorizon);
    CHECK(r.valid());
}

TEST_CASE("validate_problem flags a B with too many rows") {
    Plant p{Matrix::Identity(2, 2), Matrix::Ones(3, 1), Matrix::Identity(2, 2)};
    const auto r = validate_problem(p, fixtures::box_spec(1.0, 1.0), NoiseModel::unit_ball(),
                                    SynthesisMode::InfiniteHorizon);
    CHECK(r.has(ValidationIssue::Kind::DimensionMismatch));
}

TEST_CASE("validate_problem collects several issues at once") {
    Plant p{Matrix::Identity(2, 2), mat({{0.0}, {1.0}}), Matrix::Identity(2, 2)};
    auto spec = fixtures::box_spec(1.0, 1.0);
    spec.initial_R = mat({{1.0, 0.0}, {0.0, -1.0}});
    spec.initial_margin = 1.5;
    const auto r = validate_problem(p, spec, NoiseModel::unit_ball(), SynthesisMode::FiniteHorizon);
    CHECK(r.has(ValidationIssue::Kind::NotPositiveDefinite));
    CHECK(r.has(ValidationIssue::Kind::InvalidValue));
    CHECK(r.has(ValidationIssue::Kind::MissingPrerequisite));  // finite mode wants Gaussian noise
    CHECK(r.issues.size() >= 3);
}

TEST_CASE("barrier and controller on the scalar certificate") {
    const Certificate c(mat({{1.0}}), mat({{-0.5}}), SynthesisMode::InfiniteHorizon, {});
    CHECK(barrier_value(c, vec({0.0})) == doctest::Approx(1.0));
    CHECK(barrier_value(c, vec({1.0})) == doctest::Approx(0.0));
    CHECK(controller(c, vec({1.0}))(0) == doctest::Approx(-0.5));
}

TEST_CASE("barrier on a diagonal certificate matches the hand value") {
    const Certificate c(mat({{4.0, 0.0}, {0.0, 1.0}}), Matrix::Zero(1, 2), SynthesisMode::InfiniteHorizon, {});
    CHECK(barrier_value(c, vec({1.0, 0.5})) == doctest::Approx(1.0 - 0.25 - 0.25));
}

TEST_CASE("certificate rejects an indefinite Omega and a mis-shaped Y") {
    CHECK_THROWS_AS(Certificate(mat({{1.0, 0.0}, {0.0, -1.0}}), Matrix::Zero(1, 2), SynthesisMode::InfiniteHorizon, {}),
                    std::invalid_argument);
    CHECK_THROWS_AS(Certificate(Matrix::Identity(2, 2), Matrix::Zero(1, 3), SynthesisMode::InfiniteHorizon, {}),
                    std::invalid_argument);
}

TEST_CASE("factored quadratic form stays accurate on an ill-conditioned Omega") {
    using LMatrix = Eigen::Matrix<long double, Eigen::Dynamic, Eigen::Dynamic>;
    std::mt19937_64 rng(7);
    std::normal_distribution<double> n;
    Matrix Q = Matrix::NullaryExpr(4, 4, [&] { return n(rng); });
    Q = Eigen::HouseholderQR<Matrix>(Q).householderQ();
    const Vector ev = vec({1e-6, 1e-3, 1.0, 1e3});
    const Matrix omega = Q * ev.asDiagonal() * Q.transpose();
    const Certificate c(omega, Matrix::Zero(1, 4), SynthesisMode::InfiniteHorizon, {});
    for (int k = 0; k < 20; ++k) {
        const Vector x = Vector::NullaryExpr(4, [&] { return n(rng); });
        // long-double solve with the stored Omega
        const Eigen::Matrix<long double, Eigen::Dynamic, 1> xl = x.cast<long double>();
        const LMatrix ol = c.omega().cast<long double>();
        const long double v = xl.dot(ol.llt().solve(xl));
        // double precision loses about cond(Omega) * eps
        CHECK(std::abs(c.lyapunov(x) - static_cast<double>(v)) <= 1e9 * 1e-15 * static_cast<double>(v));
    }
}

TEST_CASE("gain is Y Omega^{-1}") {
    const Matrix omega = mat({{2.0, 0.5}, {0.5, 1.0}});
    const Matrix y = mat({{1.0, -1.0}});
    const Certificate c(omega, y, SynthesisMode::InfiniteHorizon, {});
    CHECK((c.gain() - y * omega.inverse()).norm() < 1e-12);
}

TEST_CASE("maximize_on_sphere agrees with a dense angular scan") {
    std::mt19937_64 rng(3);
    std::normal_distribution<double> n;
    for (int trial = 0; trial < 30; ++trial) {
        Matrix G = Matrix::NullaryExpr(2, 2, [&] { return n(rng); });
        const Matrix L = G.transpose() * G;
        Vector e = Vector::NullaryExpr(2, [&] { return n(rng); });
        if (trial % 5 == 0) e.setZero();
        const auto r = linalg::maximize_on_sphere(L, e);
        double best = -1e300;
        for (int i = 0; i < 20000; ++i) {
            const double th = 2.0 * std::numbers::pi * i / 20000.0;
            const Vector w = vec({std::cos(th), std::sin(th)});
            best = std::max(best, w.dot(L * w) + 2.0 * e.dot(w));
        }
        CHECK(r.value >= best - 1e-9);
        CHECK(r.value <= best + 1e-5 * (1.0 + std::abs(best)));
        CHECK(r.argmax.norm() == doctest::Approx(1.0).epsilon(1e-9));
        CHECK(r.argmax.dot(L * r.argmax) + 2.0 * e.dot(r.argmax) == doctest::Approx(r.value).epsilon(1e-9));
    }
}

TEST_CASE("maximize_on_sphere hard case with e orthogonal to the top eigenvector") {
    const Matrix L = mat({{2.0, 0.0}, {0.0, 1.0}});
    const auto r = linalg::maximize_on_sphere(L, vec({0.0, 0.1}));
    // w = (sqrt(1 - 0.01), 0.1): 2 (0.99) + 0.01 + 0.02 = 2.01
    CHECK(r.value == doctest::Approx(2.01).epsilon(1e-9));
}

TEST_CASE("psd_sqrt and psd_factor reproduce the matrix") {
    const Matrix M = mat({{4.0, 1.0}, {1.0, 3.0}});
    const Matrix s = linalg::psd_sqrt(M);
    CHECK((s * s - M).norm() < 1e-12);
    const Matrix g = linalg::psd_factor(M);
    CHECK((g.transpose() * g - M).norm() < 1e-12);
    const Matrix singular = mat({{1.0, 1.0}, {1.0, 1.0}});
    const Matrix gs = linalg::psd_factor(singular);
    CHECK((gs.transpose() * gs - singular).norm() < 1e-12);
}

TEST_CASE("box helper encodes a_j^T x + 1 >= 0") {
    const auto hs = SafetySpec::box(2, 2.0);
    REQUIRE(hs.size() == 4);
    const Vector corner = vec({2.0, -2.0});
    for (const auto& a : hs) CHECK(a.dot(corner) + 1.0 >= -1e-15);
    const Vector outside = vec({2.1, 0.0});
    bool violated = false;
    for (const auto& a : hs) violated = violated || a.dot(outside) + 1.0 < 0.0;
    CHECK(violated);
}
