#include "safecert/conic.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

namespace safecert::conic {

UnimodalSearchResult maximize_unimodal(const ProgramBuilder& builder, double lo, double hi, double tol,
                                       const SolverSettings& settings, int coarse_points) {
    if (!std::isfinite(lo) || !std::isfinite(hi) || !(lo < hi)) {
        throw std::invalid_argument("search interval must be finite and nonempty");
    }
    if (!(tol > 0.0)) throw std::invalid_argument("search tolerance must be positive");
    coarse_points = std::max(coarse_points, 1);

    UnimodalSearchResult out;
    double best = -std::numeric_limits<double>::infinity();
    bool have_any = false;

    auto probe = [&](double p) {
        Solution sol = solve(builder(p), settings);
        const double score = sol.optimal() ? sol.objective : -std::numeric_limits<double>::infinity();
        out.probes.emplace_back(p, score);
        if (sol.optimal() && (!have_any || score > best)) {
            best = score;
            out.argmax = p;
            out.solution = std::move(sol);
            have_any = true;
        } else if (!have_any && out.probes.size() == 1) {
            out.argmax = p;
            out.solution = std::move(sol);
        }
        return score;
    };

    const double step = (hi - lo) / (coarse_points + 1);
    std::vector<double> xs, fs;
    for (int i = 1; i <= coarse_points; ++i) {
        xs.push_back(lo + i * step);
        fs.push_back(probe(xs.back()));
    }
    if (!have_any) {
        out.solution.status = SolverStatus::Infeasible;
        out.solution.message = "no feasible parameter found in the search interval";
        return out;
    }

    std::size_t ib = 0;
    for (std::size_t i = 1; i < fs.size(); ++i) {
        if (fs[i] > fs[ib]) ib = i;
    }
    double a = ib == 0 ? lo : xs[ib - 1];
    double b = ib + 1 == xs.size() ? hi : xs[ib + 1];

    const double invphi = (std::sqrt(5.0) - 1.0) / 2.0;
    double c = b - invphi * (b - a);
    double d = a + invphi * (b - a);
    double fc = probe(c);
    double fd = probe(d);
    while (b - a > tol) {
        if (fc >= fd) {
            b = d;
            d = c;
            fd = fc;
            c = b - invphi * (b - a);
            fc = probe(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + invphi * (b - a);
            fd = probe(d);
        }
    }
    return out;
}

UnimodalSearchResult bisect_lambda(const ProgramBuilder& builder, double lo, double hi, double tol,
                                   const SolverSettings& settings) {
    if (!(lo >= 0.0) || !(hi <= 1.0) || !(lo < hi)) {
        throw std::invalid_argument("lambda interval must satisfy 0 <= lo < hi <= 1");
    }
    return maximize_unimodal(builder, lo, hi, tol, settings);
}

}  // namespace safecert::conic
