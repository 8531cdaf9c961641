#pragma once

// Integrals over the lens {|k| <= kF, |k + q| > lmin} for a transfer of length
// q > 0, written in s = |k| and u = cos(k, q).

#include <cmath>
#include <vector>

#include "fermipair/lattice.hpp"
#include "fermipair/quadrature.hpp"

namespace fermipair {

// Surface measure of the unit sphere in R^d (2, 2 pi, 4 pi).
double sphere_area(int d);
// Volume of the unit ball (2, pi, 4 pi / 3).
double ball_volume(int d);

// Closed-form angular factor for 1/(A + B u) with u restricted to u > u0:
//   d = 1: sum over u = +-1, d = 2: 2 int_0^phi dphi, d = 3: 2 pi int du.
double angular_inverse(int d, double A, double B, double u0);

// G(q) = int_lens d^dk 1/(2 k.q + 2 q^2 + 1), angles in closed form, s by
// adaptive quadrature.
QuadResult lens_inverse_denominator(int d, double q, double kF, double lmin, double rel_tol);

// Generic version with a numeric angular integral. g(s, u) must be finite on
// the lens.
template <class G>
QuadResult lens_integral(int d, double q, double kF, double lmin, G&& g, double rel_tol) {
    const double s_lo = std::max(0.0, lmin - q);
    if (!(s_lo < kF)) return {};
    std::vector<double> breaks{q - lmin, lmin - q, q + lmin};
    const std::vector<double> edges = panel_edges(s_lo, kF, breaks);
    QuadOptions inner;
    inner.rel_tol = rel_tol * 0.1;
    QuadResult angular_err;
    auto u0_of = [&](double s) {
        if (s <= 0) return (q > lmin) ? -2.0 : 2.0;
        return (lmin * lmin - s * s - q * q) / (2 * s * q);
    };
    auto radial = [&](double s) -> double {
        const double u0 = u0_of(s);
        if (d == 1) {
            double v = 0;
            if (1 > u0) v += g(s, 1.0);
            if (-1 > u0) v += g(s, -1.0);
            return v;
        }
        if (u0 >= 1) return 0.0;
        if (d == 2) {
            const double phim = u0 <= -1 ? kPi : std::acos(u0);
            QuadResult r = integrate([&](double p) { return g(s, std::cos(p)); }, 0.0, phim, inner);
            angular_err += r;
            return 2 * s * r.value;
        }
        const double ulo = std::max(u0, -1.0);
        QuadResult r = integrate([&](double u) { return g(s, u); }, ulo, 1.0, inner);
        angular_err += r;
        return 2 * kPi * s * s * r.value;
    };
    QuadOptions outer;
    outer.rel_tol = rel_tol;
    QuadResult res = integrate_panels(radial, edges, outer);
    res.converged = res.converged && angular_err.converged;
    res.evaluations += angular_err.evaluations;
    return res;
}

}  // namespace fermipair
