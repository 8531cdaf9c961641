#include "fermipair/lens.hpp"

#include <limits>

namespace fermipair {

double sphere_area(int d) { return d == 1 ? 2.0 : d == 2 ? 2 * kPi : 4 * kPi; }
double ball_volume(int d) { return d == 1 ? 2.0 : d == 2 ? kPi : 4 * kPi / 3; }

namespace {

// atan(sqrt(x))/sqrt(x), continued analytically to x < 0.
double atan_ratio(double x) {
    if (std::abs(x) < 1e-4) return 1 - x / 3 + x * x / 5 - x * x * x / 7;
    if (x > 0) {
        const double r = std::sqrt(x);
        return std::atan(r) / r;
    }
    const double r = std::sqrt(-x);
    return std::atanh(r) / r;
}

}  // namespace

double angular_inverse(int d, double A, double B, double u0) {
    if (u0 >= 1) return 0;
    if (d == 1) {
        double v = 1.0 / (A + B);
        if (u0 < -1) v += 1.0 / (A - B);
        return v;
    }
    if (d == 2) {
        // int_0^phim dphi/(A + B cos phi) with t = tan(phi/2)
        if (u0 <= -1) return 2 * kPi / std::sqrt((A - B) * (A + B));
        const double T2 = (1 - u0) / (1 + u0);
        const double c = (A - B) / (A + B);
        return 2 * (2 * std::sqrt(T2) / (A + B)) * atan_ratio(c * T2);
    }
    const double ulo = std::max(u0, -1.0);
    if (std::abs(B) < 1e-300) return 2 * kPi * (1 - ulo) / A;
    return 2 * kPi * std::log1p(B * (1 - ulo) / (A + B * ulo)) / B;
}

QuadResult lens_inverse_denominator(int d, double q, double kF, double lmin, double rel_tol) {
    const double A = 2 * q * q + 1;
    if (d == 1) {
        // k in [max(-kF, lmin - q), kF], antiderivative log(2kq + A)/(2q)
        QuadResult r;
        const double a = std::max(-kF, lmin - q);
        if (a < kF) r.value = std::log1p(2 * q * (kF - a) / (2 * a * q + A)) / (2 * q);
        return r;
    }
    const double s_lo = std::max(0.0, lmin - q);
    if (!(s_lo < kF)) return {};
    auto radial = [&](double s) {
        if (s <= 0) return 0.0;
        const double B = 2 * s * q;
        const double u0 = (lmin * lmin - s * s - q * q) / (2 * s * q);
        const double ang = angular_inverse(d, A, B, u0);
        return (d == 2 ? s : s * s) * ang;
    };
    QuadOptions o;
    o.rel_tol = rel_tol;
    return integrate_panels(radial, panel_edges(s_lo, kF, {q - lmin}), o);
}

}  // namespace fermipair
