#include "safecert/rng.hpp"

#include <cmath>
#include <stdexcept>

namespace safecert {

namespace {

std::mt19937_64 make_engine(std::uint64_t seed, std::uint64_t run) {
    std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                      static_cast<std::uint32_t>(run), static_cast<std::uint32_t>(run >> 32)};
    return std::mt19937_64(seq);
}

}  // namespace

NoiseSampler::NoiseSampler(const NoiseModel& model, Eigen::Index d, std::uint64_t seed, std::uint64_t run)
    : model_(model), d_(d), engine_(make_engine(seed, run)) {
    if (model_.kind == NoiseKind::Gaussian) {
        if (model_.covariance.rows() != d || model_.covariance.cols() != d) {
            throw std::invalid_argument("noise covariance must be d x d");
        }
        root_ = linalg::psd_sqrt(model_.covariance);
    }
    if (model_.kind == NoiseKind::Empirical && model_.samples.empty()) {
        throw std::invalid_argument("empirical noise needs samples");
    }
}

Vector NoiseSampler::standard_normal(Eigen::Index k) {
    Vector z(k);
    for (Eigen::Index i = 0; i < k; ++i) z(i) = normal_(engine_);
    return z;
}

Vector NoiseSampler::unit_sphere(Eigen::Index k) {
    for (;;) {
        Vector z = standard_normal(k);
        const double n = z.norm();
        if (n > 1e-12) return z / n;
    }
}

Vector NoiseSampler::next() {
    switch (model_.kind) {
        case NoiseKind::UnitBall: {
            const Vector dir = unit_sphere(d_);
            const double r = std::pow(uniform_(engine_), 1.0 / static_cast<double>(d_));
            return model_.radius * r * dir;
        }
        case NoiseKind::Gaussian:
            return root_ * standard_normal(d_);
        case NoiseKind::Empirical: {
            std::uniform_int_distribution<std::size_t> pick(0, model_.samples.size() - 1);
            return model_.samples[pick(engine_)];
        }
    }
    return Vector::Zero(d_);
}

}  // namespace safecert
