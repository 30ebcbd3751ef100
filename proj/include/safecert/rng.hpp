#pragma once

#include "safecert/model.hpp"

#include <cstdint>
#include <random>

namespace safecert {

/// Disturbance stream for one simulation run. Each run owns an engine seeded
/// from (seed, run), so runs can execute in any order with identical output.
class NoiseSampler {
public:
    NoiseSampler(const NoiseModel& model, Eigen::Index d, std::uint64_t seed, std::uint64_t run);

    Vector next();

    // Standard normal vector and uniform point on the unit sphere, from the same stream.
    Vector standard_normal(Eigen::Index k);
    Vector unit_sphere(Eigen::Index k);

private:
    NoiseModel model_;
    Eigen::Index d_;
    Matrix root_;
    std::mt19937_64 engine_;
    std::normal_distribution<double> normal_{0.0, 1.0};
    std::uniform_real_distribution<double> uniform_{0.0, 1.0};
};

}  // namespace safecert
