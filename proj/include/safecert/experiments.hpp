#pragma once

#include "safecert/filter.hpp"
#include "safecert/io.hpp"
#include "safecert/risk.hpp"
#include "safecert/synth.hpp"
#include "safecert/verify.hpp"

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

namespace safecert::experiments {

// Printed pendulum data; the initial set (R = 1e4 I, sigma = 0.5) is our choice.
[[nodiscard]] io::Problem pendulum_problem();

// Printed double-integrator data with R = I, sigma = 0.
[[nodiscard]] io::Problem double_integrator_problem();

struct SensitivityCell {
    double x1 = 0.0;
    double x2 = 0.0;
    double b0 = 0.0;
    double empirical_exit = 0.0;
    double bound = 1.0;
};

// Pearson correlation of b0 against empirical exit over cells with b0 >= 0.
[[nodiscard]] double trend_correlation(const std::vector<SensitivityCell>& grid);

struct PendulumOptions {
    int mc_runs = 500;
    int grid = 11;
    int grid_runs = 100;
    std::uint64_t seed = 42;
    bool sensitivity = true;
};

struct PendulumReport {
    io::Problem problem;
    synth::SynthesisResult synthesis;
    std::optional<risk::RiskBound> bound;
    std::optional<verify::MonteCarloResult> mc;

    // When the printed beta is infeasible: the largest feasible beta found by bisection,
    // with its certificate and Monte Carlo run. Used only for diagnostics and the heat map.
    std::optional<double> fallback_beta;
    std::optional<Certificate> fallback_certificate;
    std::optional<verify::MonteCarloResult> fallback_mc;

    // (beta, empirical safety) of feasible fallback candidates; the one nearest 0.91 feeds the heat map
    std::vector<std::pair<double, double>> diagnostics;
    std::optional<Certificate> heatmap_certificate;
    std::size_t heatmap_index = 0;

    std::vector<SensitivityCell> grid;  // over the certificate actually available
    double seconds = 0.0;
    bool accepted = false;
};

[[nodiscard]] PendulumReport run_pendulum(const PendulumOptions& opts = {});

struct DoubleIntegratorOptions {
    int runs = 50;
    int horizon = 100;
    std::uint64_t seed = 42;
    Matrix nominal_gain;  // empty: [0, 50]
};

struct DoubleIntegratorReport {
    io::Problem problem;
    synth::SynthesisResult synthesis;
    std::vector<filter::Trajectory> runs;
    double min_barrier = 0.0;
    std::size_t fallback_steps = 0;
    double seconds = 0.0;
    bool accepted = false;
};

[[nodiscard]] DoubleIntegratorReport run_double_integrator(const DoubleIntegratorOptions& opts = {});

// run,t,x1..xn,u1..um,b,fallback; the last row of each run has empty inputs.
[[nodiscard]] std::string trajectory_header(Eigen::Index n, Eigen::Index m);
[[nodiscard]] std::string trajectory_csv(const std::vector<filter::Trajectory>& runs, Eigen::Index n, Eigen::Index m);

}  // namespace safecert::experiments
