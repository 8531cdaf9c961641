#include "fermipair/bounds.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <set>
#include <sstream>

#include <Eigen/Dense>

#include "fermipair/error.hpp"
#include "fermipair/lens.hpp"
#include "fermipair/quadrature.hpp"

namespace fermipair {

namespace {

void check_dim(int d) {
    if (d < 1 || d > 3) throw ConfigError("dimension must be 1, 2 or 3");
}

double envelope_R(const PotentialSpec& spec) {
    return spec.kind() == ProfileKind::yukawa ? spec.yukawa_R() : 1.0;
}

std::size_t orbit_size(const IVec& rep, int d) {
    std::set<IVec> orbit;
    std::array<int, 3> perm{0, 1, 2};
    do {
        for (int s = 0; s < (1 << d); ++s) {
            IVec q{0, 0, 0};
            for (int i = 0; i < d; ++i) q[i] = ((s >> i) & 1 ? -1 : 1) * rep[perm[i]];
            orbit.insert(q);
        }
    } while (std::next_permutation(perm.begin(), perm.begin() + d));
    return orbit.size();
}

template <class F>
QuadResult to_infinity(F&& f, double a, const std::vector<double>& breaks, double Q, const QuadOptions& o) {
    QuadResult r = integrate_panels(f, panel_edges(a, Q, breaks), o);
    auto g = [&](double x) { return x <= 0 ? 0.0 : f(Q / x) * Q / (x * x); };
    r += integrate(g, 0.0, 1.0, o);
    return r;
}

// int_{-a}^0 ds int_0^a dr (r - s + eps)^{-m}
double shell_double_integral(double a, double eps, int m, double rel_tol) {
    QuadOptions in, out;
    in.rel_tol = rel_tol * 0.01;
    out.rel_tol = rel_tol;
    bool ok = true;
    auto outer = [&](double s) {
        auto f = [&](double r) { return std::pow(r - s + eps, -m); };
        // the integrand varies on the scale eps - s near r = 0
        std::vector<double> e{0.0};
        for (double x = std::max(eps - s, 1e-300); x < a; x *= 8) e.push_back(x);
        e.push_back(a);
        QuadResult r = integrate_panels(f, panel_edges(0.0, a, e), in);
        ok = ok && r.converged;
        return r.value;
    };
    std::vector<double> e{-a, 0.0};
    for (double x = eps; x < a; x *= 8) e.push_back(-x);
    QuadResult res = integrate_panels(outer, panel_edges(-a, 0.0, e), out);
    if (!res.converged || !ok) throw NumericalError("elementary integral failed to converge");
    return res.value;
}

}  // namespace

nlohmann::json BoundReport::to_json() const {
    nlohmann::json out = nlohmann::json::array();
    for (const SumValue& s : sums) {
        nlohmann::json j;
        j["sum"] = s.id;
        j["d"] = d;
        j["k_F"] = kF;
        j["L"] = L;
        j["cutoff"] = cutoff;
        j["value"] = s.value;
        j["tail"] = std::isfinite(s.tail) ? nlohmann::json(s.tail) : nlohmann::json(nullptr);
        j["envelope"] = s.envelope;
        j["ratio"] = s.ratio;
        out.push_back(j);
    }
    return out;
}

Lemma2Sums lemma2_sums(const FermiBall& fb, const PotentialSpec& spec, double tail_tol,
                       const kernels::KernelTable& kern) {
    const MomentumLattice& lat = fb.lattice();
    const int d = lat.dim();
    const double L = lat.length(), h = lat.spacing(), kF = fb.kF(), cutoff = lat.cutoff();
    const std::int64_t zF2 = fb.fermi_norm2(), zc2 = lat.cutoff_norm2();
    Lemma2Sums out;
    if (spec.kind() == ProfileKind::zero) return out;

    kernels::LensBall ball;
    for (std::size_t i : fb.members()) {
        const IVec& z = lat.mode(i);
        ball.push(z[0], z[1], z[2]);
    }
    ball.finish();

    const int reach = int(std::floor(std::sqrt(double(zc2)) + std::sqrt(double(zF2)) + 1e-9)) + 1;
    const int r2 = d >= 2 ? 1 : 0, r3 = d >= 3 ? 1 : 0;
    std::array<double, 4> acc{};
    for (int a = 1; a <= reach; ++a)
        for (int b = 0; b <= a * r2; ++b)
            for (int c = 0; c <= b * r3; ++c) {
                const double qz2 = double(a) * a + double(b) * b + double(c) * c;
                const double v = spec(h * std::sqrt(qz2));
                if (v == 0) continue;
                kernels::LensQuery lq;
                lq.qx = a;
                lq.qy = b;
                lq.qz = c;
                lq.zF2 = double(zF2);
                lq.zc2 = double(zc2);
                lq.h2 = h * h;
                const kernels::LensMoments m = kern.lens_moments(ball, lq);
                if (m.count == 0) continue;
                const double w = double(orbit_size({a, b, c}, d)) * v * v;
                acc[0] += w * m.count;
                acc[1] += w * m.inv_b;
                acc[2] += w * m.inv_b2;
                acc[3] += w * h * h * qz2 * m.inv_d2;
            }
    const double norm = std::pow(L, -2.0 * d);
    for (int i = 0; i < 4; ++i) out.value[i] = norm * acc[i];

    // beyond the cutoff, |v| replaced by its envelope 1/(q^2 + R)
    const double Q0 = cutoff - kF;
    if (spec.support_radius() > Q0) {
        const double R = envelope_R(spec);
        const double pref = std::pow(2 * kPi, -2.0 * d) * sphere_area(d);
        QuadOptions o;
        o.rel_tol = 1e-3;
        for (int i = 0; i < 4; ++i) {
            auto f = [&](double q) {
                const double env = 1.0 / (q * q + R);
                auto g = [&](double s, double u) -> double {
                    const double b = 2 * s * q * u + q * q + 1;
                    switch (i) {
                        case 0: return 1.0;
                        case 1: return 1.0 / b;
                        case 2: return 1.0 / (b * b);
                        default: {
                            const double dd = b + q * q;
                            return q * q / (dd * dd);
                        }
                    }
                };
                return pref * std::pow(q, d - 1) * env * env * lens_integral(d, q, kF, cutoff, g, 1e-4).value;
            };
            out.tail[i] = to_infinity(f, std::max(Q0, 1e-12), {}, cutoff + kF, o).value;
            if (out.tail[i] > tail_tol * out.value[i]) {
                std::ostringstream os;
                os << "cutoff too small: tail " << out.tail[i] << " of transition sum " << i << " valued "
                   << out.value[i];
                throw ConfigError(os.str());
            }
        }
    }
    return out;
}

std::array<double, 5> lemmaA1_sums(const FermiBall& fb, const PotentialSpec& spec, std::size_t max_entries) {
    const MomentumLattice& lat = fb.lattice();
    const int d = lat.dim();
    const double L = lat.length();
    const auto& in = fb.members();
    const auto& out = fb.outside();
    const Eigen::Index N = Eigen::Index(in.size()), P = Eigen::Index(out.size());
    if (double(P) * double(P) > double(max_entries))
        throw ResourceError("nested transition sums need a " + std::to_string(P) + "^2 matrix; cap is " +
                            std::to_string(max_entries) + " entries");
    std::array<double, 5> s{};
    if (spec.kind() == ProfileKind::zero || N == 0 || P == 0) return s;

    auto absv = [&](std::size_t i, std::size_t j) {
        const Vec3 a = lat.momentum(i), b = lat.momentum(j);
        const double dx = a[0] - b[0], dy = a[1] - b[1], dz = a[2] - b[2];
        return std::abs(spec(std::sqrt(dx * dx + dy * dy + dz * dz)));
    };
    Eigen::MatrixXd C(P, N), Voo(P, P), Vbb(N, N);
    for (Eigen::Index l = 0; l < P; ++l)
        for (Eigen::Index k = 0; k < N; ++k)
            C(l, k) = absv(out[l], in[k]) / (lat.energy(out[l]) - lat.energy(in[k]) + 1);
    for (Eigen::Index a = 0; a < P; ++a)
        for (Eigen::Index b = 0; b <= a; ++b) Voo(a, b) = Voo(b, a) = absv(out[a], out[b]);
    for (Eigen::Index a = 0; a < N; ++a)
        for (Eigen::Index b = 0; b <= a; ++b) Vbb(a, b) = Vbb(b, a) = absv(in[a], in[b]);

    const Eigen::MatrixXd VC = Voo * C;
    const double L2d = std::pow(L, -2.0 * d);
    s[0] = L2d * L2d * VC.squaredNorm();
    s[1] = L2d * L2d * (C * Vbb).squaredNorm();
    s[2] = std::pow(L, -3.0 * d) * C.cwiseProduct(VC).sum();
    s[3] = L2d * L2d * L2d * (C.transpose() * VC).squaredNorm();
    s[4] = L2d * L2d * L2d * (VC * C.transpose()).squaredNorm();
    return s;
}

double gamma(int d, double kF) {
    check_dim(d);
    if (!(kF >= 2)) throw ConfigError("gamma needs k_F >= 2");
    const double l3 = std::pow(std::log(kF), 3);
    return d == 1 ? l3 / (kF * kF) : std::pow(kF, 2 * d - 5) * l3;
}

BigGamma big_gamma(int d, double kF, double lambda, double t) {
    const double g = gamma(d, kF);
    const double lnk = std::log(kF), la = std::abs(lambda), at = std::abs(t), l2 = lambda * lambda;
    const double grow = 1 + l2 * std::pow(kF, d - 2);
    const double half = std::pow(kF, 0.5 * (d - 3)) * std::sqrt(lnk);
    BigGamma r;
    r.terms[0] = la * (1 + at * grow) * half;
    r.terms[1] = l2 * std::pow(kF, d - 3) * lnk;
    r.terms[2] = l2 * at * grow * std::pow(kF, d - 3) * lnk;
    r.terms[3] = l2 * at * std::sqrt(g);
    r.terms[4] = la * l2 * at * std::pow(kF, 0.5 * (3 * d - 7)) * lnk;
    r.terms[5] = la * l2 * at * std::sqrt(g) * half;
    r.terms[6] = la * l2 * at * g;
    for (double x : r.terms) r.value += x;
    return r;
}

std::array<double, 4> lemma2_envelopes(int d, double kF) {
    const double lk = std::log(kF);
    return {std::pow(kF, d - 1), std::pow(kF, d - 2), std::pow(kF, d - 3) * lk, std::pow(kF, d - 3) * lk * lk};
}

std::array<double, 5> lemmaA1_envelopes(int d, double kF) {
    const double g = gamma(d, kF);
    return {g, g, g, g * g, g * g};
}

BoundReport bound_report(const FermiBall& ball, const PotentialSpec& spec, bool lemma2, std::array<bool, 5> a_sums,
                         double tail_tol) {
    const MomentumLattice& lat = ball.lattice();
    BoundReport rep;
    rep.d = lat.dim();
    rep.kF = ball.kF();
    rep.L = lat.length();
    rep.cutoff = lat.cutoff();
    if (lemma2) {
        const Lemma2Sums s = lemma2_sums(ball, spec, tail_tol);
        const auto env = lemma2_envelopes(rep.d, rep.kF);
        const char* ids[4] = {"a", "b", "c", "d"};
        for (int i = 0; i < 4; ++i) rep.sums.push_back({ids[i], s.value[i], s.tail[i], env[i], s.value[i] / env[i]});
    }
    if (std::any_of(a_sums.begin(), a_sums.end(), [](bool b) { return b; })) {
        const auto s = lemmaA1_sums(ball, spec);
        const auto env = lemmaA1_envelopes(rep.d, rep.kF);
        const double nan = std::numeric_limits<double>::quiet_NaN();
        for (int i = 0; i < 5; ++i)
            if (a_sums[i]) rep.sums.push_back({std::to_string(5 + i), s[i], nan, env[i], s[i] / env[i]});
    }
    return rep;
}

ElementaryIntegrals elementary_integral_checks(double a, double eps) {
    if (!(a > 1 && 1 > 2 * eps && eps > 0)) throw ConfigError("elementary integrals need a > 1 > 2 eps > 0");
    ElementaryIntegrals r;
    r.a = a;
    r.eps = eps;
    r.first = shell_double_integral(a, eps, 1, 1e-10);
    r.second = shell_double_integral(a, eps, 2, 1e-10);
    r.first_bound = 5 * a * std::log(3 * a) + eps * std::log(1 / eps);
    r.second_bound = 2 * std::log(2 * a) + std::log(1 / eps);
    return r;
}

std::vector<JIntegral> appendix_J_integrals(int d, double kF, const PotentialSpec& spec, double rel_tol) {
    check_dim(d);
    if (!(kF >= 2 && kF <= 32)) throw ConfigError("appendix integrals need k_F in [2, 32]");
    const double eps = 1 / kF;
    const double area = sphere_area(d);
    QuadOptions o;
    o.rel_tol = rel_tol;
    const double inner_tol = rel_tol * 0.1;

    auto radial = [&](double s, double q, double u) { return std::sqrt(std::max(s * s + q * q + 2 * s * q * u, 0.0)); };
    const double inf = std::numeric_limits<double>::infinity();
    std::vector<JIntegral> out;
    auto push = [&](const char* id, const QuadResult& r, double env) {
        if (!r.converged) throw NumericalError(std::string("quadrature failed for ") + id);
        out.push_back({id, r.value, r.error, env, r.value / env});
    };
    auto v2 = [&](double q) {
        const double v = spec(q);
        return v * v;
    };
    auto run_q = [&](auto&& weight, int m, double q_max) {
        auto f = [&](double q) {
            const double w = weight(q);
            if (w == 0 || q <= 0) return 0.0;
            auto g = [&](double s, double u) { return std::pow(radial(s, q, u) - s + eps, -m); };
            return area * std::pow(q, d - 1) * w * lens_integral(d, q, kF, kF, g, inner_tol).value;
        };
        std::vector<double> br = spec.breakpoints();
        br.push_back(kF);
        br.push_back(2 * kF);
        if (std::isfinite(q_max)) return integrate_panels(f, panel_edges(0.0, q_max, br), o);
        return to_infinity(f, 0.0, br, std::max(4 * kF, 40.0), o);
    };
    const double lk = std::log(kF);
    push("J1", run_q([](double q) { return 1 / ((1 + q * q) * (1 + q * q)); }, 0, inf), std::pow(kF, d - 1));
    push("J2", run_q(v2, 1, inf), std::pow(kF, d - 1));
    push("J3", run_q(v2, 2, inf), std::pow(kF, d - 1) * lk);
    const double a = 10;
    auto unit = [](double) { return 1.0; };
    const double shell = std::pow(kF * a, d - 1);
    push("K1", run_q(unit, 1, a), shell * shell_double_integral(a, eps, 1, 1e-8));
    push("K2", run_q(unit, 2, a), shell * shell_double_integral(a, eps, 2, 1e-8));
    return out;
}

}  // namespace fermipair
