#pragma once

#include "safecert/model.hpp"

#include <numbers>

namespace fixtures {

using safecert::Matrix;
using safecert::Vector;

inline Matrix mat(std::initializer_list<std::initializer_list<double>> rows) {
    Matrix m(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(rows.begin()->size()));
    Eigen::Index i = 0;
    for (const auto& r : rows) {
        Eigen::Index j = 0;
        for (double v : r) m(i, j++) = v;
        ++i;
    }
    return m;
}

inline Vector vec(std::initializer_list<double> v) {
    Vector out(static_cast<Eigen::Index>(v.size()));
    Eigen::Index i = 0;
    for (double x : v) out(i++) = x;
    return out;
}

// A = 0.5, B = 1, D = 0.1, |x| <= 1, R = 4
inline safecert::Plant scalar_plant() { return {mat({{0.5}}), mat({{1.0}}), mat({{0.1}})}; }

inline safecert::SafetySpec scalar_spec() {
    safecert::SafetySpec s;
    s.halfspaces = safecert::SafetySpec::box(1, 1.0);
    s.initial_R = mat({{4.0}});
    return s;
}

inline safecert::Plant double_integrator() {
    return {mat({{0.1, 0.65}, {0.0, 1.02}}), mat({{0.5}, {0.5}}), 0.01 * Matrix::Identity(2, 2)};
}

inline safecert::SafetySpec box_spec(double c, double r, double sigma = 0.0) {
    safecert::SafetySpec s;
    s.halfspaces = safecert::SafetySpec::box(2, c);
    s.initial_R = r * Matrix::Identity(2, 2);
    s.initial_margin = sigma;
    return s;
}

// lightly damped, single input
inline safecert::Plant underactuated() {
    return {mat({{1.0, 0.1}, {0.0, 1.0}}), mat({{0.0}, {1.0}}), Matrix::Identity(2, 2)};
}

inline Matrix small_cov() { return mat({{0.004, 0.001}, {0.001, 0.006}}); }

}  // namespace fixtures
