#include "safecert/risk.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

namespace safecert::risk {

namespace {

constexpr double kCap = 1.0 - 1e-9;

double clamp01(double v) {
    return std::clamp(v, 0.0, 1.0);
}

// (1 - x)^T for x in [0, 1)
double pow_one_minus(double x, int horizon) {
    return std::exp(static_cast<double>(horizon) * std::log1p(-std::min(x, kCap)));
}

void check_bound_domain(double b0, double beta, double delta, int horizon) {
    if (!(beta > 0.0 && beta < 1.0)) throw std::invalid_argument("beta must lie in (0,1)");
    if (!(delta > beta - 1.0 && delta <= beta)) throw std::invalid_argument("delta must lie in (beta - 1, beta]");
    if (!(b0 >= 0.0 && b0 <= 1.0)) throw std::invalid_argument("b0 must lie in [0,1]");
    if (horizon < 1) throw std::invalid_argument("horizon must be at least 1");
}

}  // namespace

MartingaleTrace zeta(const std::vector<Vector>& path, const Matrix& omega, double eta, double psi, int horizon) {
    if (!(eta > 1.0)) throw std::invalid_argument("eta must exceed 1");
    if (!(psi >= 0.0)) throw std::invalid_argument("psi must be nonnegative");
    if (horizon < 1 || path.size() != static_cast<std::size_t>(horizon) + 1) {
        throw std::invalid_argument("path must hold T+1 states");
    }
    auto f = linalg::SpdFactor::factor(omega);
    if (!f) throw std::invalid_argument("Omega must be positive definite");

    MartingaleTrace tr;
    tr.eta = eta;
    tr.psi = psi;
    tr.horizon = horizon;
    const double etaT = std::pow(eta, horizon);
    const double c = psi * eta / (eta - 1.0);
    for (int t = 0; t <= horizon; ++t) {
        const double etat = std::pow(eta, t);
        tr.values.push_back(etat * f->inverse_quad_form(path[static_cast<std::size_t>(t)]) + c * (etaT - etat));
    }
    return tr;
}

SupermartingaleWeights geometric_weights(double eta, double psi, int horizon) {
    if (!(eta > 1.0)) throw std::invalid_argument("eta must exceed 1");
    if (horizon < 1) throw std::invalid_argument("horizon must be at least 1");
    SupermartingaleWeights w;
    double p = 1.0;
    for (int i = 1; i <= horizon; ++i) {
        p *= eta;
        w.g.push_back(eta);
        w.h.push_back(psi * p);
        w.H += psi * p;
    }
    return w;
}

std::optional<std::string> check_weights(const SupermartingaleWeights& w, double beta, double psi) {
    if (w.g.empty() || w.g.size() != w.h.size()) return "g and h must be nonempty and of equal length";
    const double gmax = 1.0 / (1.0 - beta);
    double sum_h = 0.0;
    double prod = 1.0;
    for (std::size_t i = 0; i < w.g.size(); ++i) {
        if (!(w.g[i] > 0.0) || w.g[i] > gmax * (1.0 + 1e-12)) {
            return "g_" + std::to_string(i + 1) + " must lie in (0, 1/(1-beta)]";
        }
        if (!(w.h[i] >= 0.0)) return "h_" + std::to_string(i + 1) + " must be nonnegative";
        prod *= w.g[i];
        if (prod * psi > w.h[i] * (1.0 + 1e-12) + 1e-300) {
            return "h_" + std::to_string(i + 1) + " must dominate psi times the product of g";
        }
        sum_h += w.h[i];
    }
    if (w.H < sum_h * (1.0 - 1e-12)) return "H must be at least the sum of h";
    return std::nullopt;
}

std::vector<double> zeta_general(const std::vector<Vector>& path, const Matrix& omega,
                                 const SupermartingaleWeights& w) {
    if (path.size() != w.g.size() + 1) throw std::invalid_argument("path must hold T+1 states");
    auto f = linalg::SpdFactor::factor(omega);
    if (!f) throw std::invalid_argument("Omega must be positive definite");
    std::vector<double> out;
    double prod = 1.0;
    double sum_h = 0.0;
    for (std::size_t t = 0; t < path.size(); ++t) {
        if (t > 0) {
            prod *= w.g[t - 1];
            sum_h += w.h[t - 1];
        }
        out.push_back(prod * f->inverse_quad_form(path[t]) + w.H - sum_h);
    }
    return out;
}

std::vector<double> level_sequence(const SupermartingaleWeights& w) {
    std::vector<double> a;
    double prod = 1.0;
    double sum_h = 0.0;
    a.push_back(1.0 + w.H);
    for (std::size_t i = 0; i < w.g.size(); ++i) {
        prod *= w.g[i];
        sum_h += w.h[i];
        a.push_back(prod + w.H - sum_h);
    }
    return a;
}

double exit_bound_general(double b0, double beta, double psi, const SupermartingaleWeights& w) {
    if (auto err = check_weights(w, beta, psi)) throw std::invalid_argument(*err);
    if (!(b0 >= 0.0 && b0 <= 1.0)) throw std::invalid_argument("b0 must lie in [0,1]");
    const auto a = level_sequence(w);
    const double amin = *std::min_element(a.begin(), a.end());
    return clamp01((1.0 - b0 + w.H) / amin);
}

double exit_bound_at_eta(double b0, double beta, double delta, int horizon, double eta) {
    check_bound_domain(b0, beta, delta, horizon);
    const double eta_max = 1.0 / (1.0 - std::min(beta, kCap));
    if (!(eta > 1.0) || eta > eta_max * (1.0 + 1e-12)) throw std::invalid_argument("eta must lie in (1, 1/(1-beta)]");
    const double psi = beta - delta;
    // all terms divided by eta^T
    const double q = std::exp(-static_cast<double>(horizon) * std::log(eta));
    const double c = psi * eta / (eta - 1.0);
    const double z0 = (1.0 - b0) * q + c * (1.0 - q);
    const double a0 = q + c * (1.0 - q);
    return clamp01(z0 / std::min(a0, 1.0));
}

RiskBound exit_bound(double b0, double beta, double delta, int horizon) {
    check_bound_domain(b0, beta, delta, horizon);
    RiskBound r;
    r.beta = beta;
    r.delta = delta;
    r.horizon = horizon;
    r.b0 = b0;
    r.psi = beta - delta;
    if (delta < 0.0) {
        r.bound_case = BoundCase::DeltaNegative;
        r.eta_star = 1.0 / (1.0 - std::min(beta, kCap));
        const double q = pow_one_minus(beta, horizon);
        r.alpha = clamp01((1.0 - b0) * q + (r.psi / beta) * (1.0 - q));
    } else {
        // psi = 0 is the eta -> 1 limit of the same expression
        r.bound_case = BoundCase::DeltaNonneg;
        r.eta_star = 1.0 / (1.0 - std::min(r.psi, kCap));
        r.alpha = clamp01(1.0 - b0 * pow_one_minus(r.psi, horizon));
    }
    return r;
}

DeltaSelection select_delta(double alpha_bar, double beta, double sigma, int horizon, double big_m) {
    if (!(alpha_bar > 0.0 && alpha_bar < 1.0)) throw std::invalid_argument("target alpha must lie in (0,1)");
    if (!(beta > 0.0 && beta < 1.0)) throw std::invalid_argument("beta must lie in (0,1)");
    if (!(sigma > 0.0 && sigma < 1.0)) throw std::invalid_argument("sigma must lie in (0,1)");
    if (horizon < 1) throw std::invalid_argument("horizon must be at least 1");

    DeltaSelection sel;
    sel.big_m = big_m;
    sel.theta1 = pow_one_minus(beta, horizon);
    double geometric = 0.0;
    double p = 1.0;
    for (int i = 1; i <= horizon; ++i) {
        geometric += p;
        p *= 1.0 - beta;
    }
    sel.theta3 = geometric;
    sel.theta2 = sel.theta1 + beta * sel.theta3;
    sel.theta4 = std::exp(std::log((1.0 - alpha_bar) / sigma) / horizon);

    // delta < 0: theta3 delta >= theta2 - theta1 sigma - alpha_bar, inside (beta - 1, 0)
    const double need0 = (sel.theta2 - sel.theta1 * sigma - alpha_bar) / sel.theta3;
    const double floor0 = beta - 1.0 + 1e-9;
    const double lo0 = std::max(need0, floor0);
    if (lo0 < 0.0) sel.branches.push_back({0, lo0, 0.0, true});

    // delta >= 0: delta >= theta4 + beta - 1, inside [0, beta]
    const double lo1 = std::max(sel.theta4 + beta - 1.0, 0.0);
    if (lo1 <= beta + 1e-15) sel.branches.push_back({1, std::min(lo1, beta), beta, false});
    return sel;
}

bool big_m_consistent(const DeltaSelection& sel, double alpha_bar, double sigma, double beta, double delta, int z) {
    const double M = sel.big_m;
    const double zf = z;
    const double tol = 1e-12;
    if (!(delta > beta - 1.0 && delta <= beta)) return false;
    if (delta < -M * (1.0 - zf) - tol) return false;
    if (delta > M * zf + tol) return false;
    // the z = 0 condition binds when z = 0, the z = 1 condition when z = 1
    if (sel.theta2 - sel.theta1 * sigma - alpha_bar - sel.theta3 * delta > M * zf + tol) return false;
    if (sel.theta4 + beta - 1.0 - delta > M * (1.0 - zf) + tol) return false;
    return true;
}

Certificate inflate_support(const Certificate& cert, double hausdorff_d) {
    if (!(hausdorff_d >= 0.0)) throw std::invalid_argument("Hausdorff distance must be nonnegative");
    const double s = (1.0 + hausdorff_d) * (1.0 + hausdorff_d);
    return Certificate(cert.omega() / s, cert.y() / s, cert.mode(), cert.params(), cert.objective_value(),
                       cert.solver_status());
}

RiskTargetResult synthesize_for_risk(const Plant& plant, const SafetySpec& spec, const NoiseModel& noise,
                                     double alpha_bar, const synth::FiniteHorizonSpec& base,
                                     const synth::SynthesisOptions& opts) {
    RiskTargetResult out;
    out.selection = select_delta(alpha_bar, base.beta, base.sigma, base.horizon);
    for (const auto& br : out.selection.branches) {
        synth::FiniteHorizonSpec fh = base;
        fh.delta = br.lo;
        synth::SynthesisResult r = synth::synthesize_finite(plant, spec, noise, fh, opts);
        out.attempts.emplace_back(br.lo, r.status);
        if (r.ok() && (!out.best || !out.best->ok() || r.solution.objective > out.best->solution.objective)) {
            out.best = std::move(r);
            out.delta = br.lo;
        } else if (!out.best) {
            out.best = std::move(r);
        }
    }
    if (out.best && !out.best->ok()) out.delta.reset();
    return out;
}

}  // namespace safecert::risk
