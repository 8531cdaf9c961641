#include "fermipair/effective_potential.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <map>
#include <set>
#include <sstream>

#include "fermipair/lens.hpp"
#include "fermipair/quadrature.hpp"

namespace fermipair {

namespace {

void check_dim(int d) {
    if (d < 1 || d > 3) throw ConfigError("dimension must be 1, 2 or 3");
}

// Angular average of exp(i q.x) over directions of q, times the sphere area.
double plane_wave_average(int d, double x) {
    if (d == 1) return 2 * std::cos(x);
    if (d == 2) return 2 * kPi * std::cyl_bessel_j(0.0, x);
    if (std::abs(x) < 1e-4) return 4 * kPi * (1 - x * x / 6);
    return 4 * kPi * std::sin(x) / x;
}

double envelope_R(const PotentialSpec& spec) {
    return spec.kind() == ProfileKind::yukawa ? spec.yukawa_R() : 1.0;
}

// int_{Q}^{inf} f(q) dq through q = Q / x.
template <class F>
QuadResult tail_integral(F&& f, double Q, const QuadOptions& o) {
    auto g = [&](double x) {
        if (x <= 0) return 0.0;
        return f(Q / x) * Q / (x * x);
    };
    return integrate(g, 0.0, 1.0, o);
}

}  // namespace

WValue W_quadrature(double r, double kF, int d, const PotentialSpec& spec, const WOptions& opt) {
    check_dim(d);
    if (!(kF > 0)) throw ConfigError("Fermi momentum must be positive");
    if (!(opt.rel_tol > 0)) throw ConfigError("rel_tol must be positive");
    r = std::abs(r);
    const double pref = std::pow(2 * kPi, -2.0 * d);
    const double q_lo = std::max(0.0, opt.q_lo);
    const double q_hi = std::min(opt.q_hi, spec.support_radius());
    if (!(q_hi > q_lo)) return {};
    const double inner_tol = opt.rel_tol * 0.05;

    double scale = opt.scale;
    if (scale <= 0 && r > 0) {
        WOptions crude = opt;
        crude.rel_tol = 1e-3;
        scale = std::abs(W_quadrature(0.0, kF, d, spec, crude).value);
    }
    QuadOptions qo;
    qo.rel_tol = opt.rel_tol;
    qo.abs_tol = opt.rel_tol * scale * 0.5;
    qo.max_intervals = 20000;

    bool inner_ok = true;
    auto f = [&](double q) {
        if (q <= 0) return 0.0;
        const double v = spec(q);
        if (v == 0) return 0.0;
        QuadResult g = lens_inverse_denominator(d, q, kF, kF, inner_tol);
        inner_ok = inner_ok && g.converged;
        return pref * std::pow(q, d - 1) * v * v * g.value * plane_wave_average(d, q * r);
    };

    const double R = envelope_R(spec);
    double Qc = std::max(4 * kF, 2 * kF + 20 * std::sqrt(R));
    for (double b : spec.breakpoints()) Qc = std::max(Qc, b + 1);
    if (std::isfinite(q_hi)) Qc = q_hi;
    Qc = std::max(Qc, q_lo);
    Qc = std::min(Qc, q_hi);

    std::vector<double> breaks = spec.breakpoints();
    breaks.push_back(2 * kF);
    breaks.push_back(kF);
    if (r > 0) {
        const double half = kPi / r;
        for (double x = half * std::ceil(q_lo / half); x < Qc; x += half) breaks.push_back(x);
    }
    QuadResult res = integrate_panels(f, panel_edges(q_lo, Qc, breaks), qo);
    if (q_hi > Qc) res += tail_integral(f, Qc, qo);
    if (!res.converged || !inner_ok) throw NumericalError("quadrature failed to converge for W");
    WValue out;
    out.value = res.value;
    out.error = res.error + inner_tol * std::max(std::abs(res.value), scale);
    return out;
}

LatticeW::LatticeW(int d, double L, double kF, double cutoff, const PotentialSpec& spec, double tail_tol,
                   const kernels::KernelTable& kern)
    : d_(d), L_(L), kF_(kF), cutoff_(cutoff) {
    check_dim(d);
    if (!(L > 0)) throw ConfigError("box length must be positive");
    if (kF > cutoff * (1 + 1e-12)) throw ConfigError("cutoff too small: k_F exceeds the cutoff");
    const double h = 2 * kPi / L;
    const std::int64_t zF2 = max_norm2(kF, h), zc2 = max_norm2(cutoff, h);
    const int rF = int(std::floor(std::sqrt(double(zF2)) + 1e-9));
    kernels::LensBall ball;
    const int ry = d >= 2 ? rF : 0, rz = d >= 3 ? rF : 0;
    for (int x = -rF; x <= rF; ++x)
        for (int y = -ry; y <= ry; ++y)
            for (int z = -rz; z <= rz; ++z)
                if (std::int64_t(x) * x + std::int64_t(y) * y + std::int64_t(z) * z <= zF2) ball.push(x, y, z);
    ball.finish();

    const int reach = int(std::floor(std::sqrt(double(zc2)) + std::sqrt(double(zF2)) + 1e-9)) + 1;
    const double norm = std::pow(L, -2.0 * d);
    std::map<int, double> axis;
    IVec rep{0, 0, 0};
    const int r2 = d >= 2 ? 1 : 0, r3 = d >= 3 ? 1 : 0;
    for (int a = 0; a <= reach; ++a)
        for (int b = 0; b <= a * r2; ++b)
            for (int c = 0; c <= b * r3; ++c) {
                if (a == 0) continue;
                rep = {a, b, c};
                const double qn = h * std::sqrt(double(a) * a + double(b) * b + double(c) * c);
                const double v = spec(qn);
                if (v == 0) continue;
                kernels::LensQuery lq;
                lq.qx = a;
                lq.qy = b;
                lq.qz = c;
                lq.zF2 = double(zF2);
                lq.zc2 = double(zc2);
                lq.h2 = h * h;
                const double S = kern.lens_moments(ball, lq).inv_d;
                if (S == 0) continue;
                const double wgt = norm * v * v * S;
                // orbit under signed permutations of the first d axes
                std::set<IVec> orbit;
                std::array<int, 3> perm{0, 1, 2};
                do {
                    for (int s = 0; s < (1 << d); ++s) {
                        IVec q{0, 0, 0};
                        for (int i = 0; i < d; ++i) q[i] = ((s >> i) & 1 ? -1 : 1) * rep[perm[i]];
                        orbit.insert(q);
                    }
                } while (std::next_permutation(perm.begin(), perm.begin() + d));
                for (const IVec& q : orbit) {
                    terms_.push_back({q, wgt});
                    axis[q[0]] += wgt;
                    w0_ += wgt;
                }
            }
    axis_.assign(axis.begin(), axis.end());

    // continuum estimate of the part beyond the cutoff
    const double Q0 = cutoff - kF;
    if (spec.support_radius() > Q0 && std::isfinite(tail_tol)) {
        const double R = envelope_R(spec);
        const double pref = std::pow(2 * kPi, -2.0 * d) * sphere_area(d);
        auto f = [&](double q) {
            const double env = 1.0 / (q * q + R);
            return pref * std::pow(q, d - 1) * env * env * lens_inverse_denominator(d, q, kF, cutoff, 1e-4).value;
        };
        QuadOptions o;
        o.rel_tol = 1e-3;
        const double Qm = cutoff + kF;
        tail_ = integrate(f, std::max(Q0, 1e-12), Qm, o).value + tail_integral(f, Qm, o).value;
        if (tail_ > tail_tol * std::abs(w0_)) {
            std::ostringstream os;
            os << "cutoff too small: omitted tail " << tail_ << " vs W(0) " << w0_;
            throw ConfigError(os.str());
        }
    }
}

double LatticeW::operator()(double r) const {
    const double h = 2 * kPi / L_;
    double s = 0;
    for (const auto& [q1, w] : axis_) s += w * std::cos(h * q1 * r);
    return s;
}

double LatticeW::at(const Vec3& x) const {
    const double h = 2 * kPi / L_;
    double s = 0;
    for (const Term& t : terms_) s += t.weight * std::cos(h * (t.q[0] * x[0] + t.q[1] * x[1] + t.q[2] * x[2]));
    return s;
}

ComplexW W_lattice_brute(const Vec3& x, double kF, double L, int d, const PotentialSpec& spec, double cutoff) {
    MomentumLattice lat(d, L, cutoff);
    FermiBall ball(lat, kF);
    const double h = lat.spacing();
    const double norm = std::pow(L, -2.0 * d);
    ComplexW out;
    for (std::size_t l : ball.outside())
        for (std::size_t k : ball.members()) {
            const IVec& zl = lat.mode(l);
            const IVec& zk = lat.mode(k);
            const IVec q{zl[0] - zk[0], zl[1] - zk[1], zl[2] - zk[2]};
            const double q2 = double(q[0]) * q[0] + double(q[1]) * q[1] + double(q[2]) * q[2];
            const double v = spec(h * std::sqrt(q2));
            if (v == 0) continue;
            const double den = h * h * (double(lat.norm2(l)) - double(lat.norm2(k)) + q2) + 1;
            const double ph = h * (q[0] * x[0] + q[1] * x[1] + q[2] * x[2]);
            out.re += norm * v * v * std::cos(ph) / den;
            out.im += norm * v * v * std::sin(ph) / den;
        }
    return out;
}

double W_lattice_sum(double r, double kF, double L, int d, const PotentialSpec& spec, double cutoff) {
    return LatticeW(d, L, kF, cutoff, spec)(r);
}

double PotentialTable::scaled_at(double x) const {
    x = std::abs(x);
    if (r.empty() || x > r.back() * (1 + 1e-12) + 1e-14)
        throw ConfigError("potential table incomplete: separation " + std::to_string(x) + " beyond r_max");
    if (x <= r.front()) return scaled.front();
    auto it = std::lower_bound(r.begin(), r.end(), x);
    std::size_t j = std::size_t(it - r.begin());
    if (j >= r.size()) return scaled.back();
    if (r[j] == x) return scaled[j];
    const double a = (x - r[j - 1]) / (r[j] - r[j - 1]);
    return scaled[j - 1] + a * (scaled[j] - scaled[j - 1]);
}

double PotentialTable::raw_at(double x) const { return scaled_at(x) * std::pow(kF, d - 2.0); }

void PotentialTable::write_csv(const std::string& path) const {
    std::ofstream out(path);
    if (!out) throw ConfigError("cannot write " + path);
    out << "d,k_F,method,spec_id\n" << d << ',' << kF << ',' << method << ",\"" << spec_id << "\"\n";
    out << "r,scaled_value,err_est\n" << std::setprecision(17);
    for (std::size_t i = 0; i < r.size(); ++i) out << r[i] << ',' << scaled[i] << ',' << err[i] << '\n';
}

PotentialTable PotentialTable::read_csv(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open " + path);
    PotentialTable t;
    std::string line;
    std::getline(in, line);
    std::getline(in, line);
    {
        std::istringstream ls(line);
        std::string tok;
        std::getline(ls, tok, ',');
        t.d = std::stoi(tok);
        std::getline(ls, tok, ',');
        t.kF = std::stod(tok);
        std::getline(ls, t.method, ',');
        std::getline(ls, t.spec_id);
        if (t.spec_id.size() >= 2 && t.spec_id.front() == '"') t.spec_id = t.spec_id.substr(1, t.spec_id.size() - 2);
    }
    std::getline(in, line);
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        std::istringstream ls(line);
        std::string a, b, c;
        std::getline(ls, a, ',');
        std::getline(ls, b, ',');
        std::getline(ls, c);
        t.r.push_back(std::stod(a));
        t.scaled.push_back(std::stod(b));
        t.err.push_back(std::stod(c));
    }
    return t;
}

PotentialTable tabulate_quadrature(int d, double kF, const PotentialSpec& spec, const std::vector<double>& r,
                                   double rel_tol) {
    PotentialTable t;
    t.d = d;
    t.kF = kF;
    t.method = "quadrature";
    t.spec_id = spec.id();
    const double sc = std::pow(kF, 2.0 - d);
    WOptions o;
    o.rel_tol = rel_tol;
    o.scale = std::abs(W_quadrature(0.0, kF, d, spec, o).value);
    for (double x : r) {
        const WValue w = W_quadrature(x, kF, d, spec, o);
        t.r.push_back(x);
        t.scaled.push_back(sc * w.value);
        t.err.push_back(sc * w.error);
    }
    return t;
}

PotentialTable tabulate_lattice(const LatticeW& w, const PotentialSpec& spec, const std::vector<double>& r) {
    PotentialTable t;
    t.d = w.dim();
    t.kF = w.kF();
    t.method = "lattice_sum";
    t.spec_id = spec.id();
    t.L = w.length();
    t.cutoff = w.cutoff();
    const double sc = std::pow(w.kF(), 2.0 - w.dim());
    for (double x : r) {
        t.r.push_back(x);
        t.scaled.push_back(sc * w(x));
        t.err.push_back(sc * 1e-14 * std::abs(w.at_zero()));
    }
    return t;
}

double Lemma1Report::sup_ratio() const {
    double lo = std::numeric_limits<double>::infinity(), hi = 0;
    for (const auto& row : rows) {
        lo = std::min(lo, row.sup_abs);
        hi = std::max(hi, row.sup_abs);
    }
    return lo > 0 ? hi / lo : std::numeric_limits<double>::infinity();
}

Lemma1Report lemma1_report(const std::vector<PotentialTable>& tables, const PotentialSpec& spec) {
    if (tables.empty()) throw ConfigError("lemma1 report needs at least one table");
    Lemma1Report rep;
    rep.d = tables.front().d;
    rep.spec_id = spec.id();
    rep.r = tables.front().r;
    try {
        rep.spec_core_certified = certify_assumptions(spec, envelope_R(spec)).core_ok;
    } catch (const AssumptionViolated&) {
        rep.spec_core_certified = false;
    }
    std::size_t positive_prefix = rep.r.size();
    for (const PotentialTable& t : tables) {
        if (t.r != rep.r || t.d != rep.d) throw ConfigError("lemma1 report needs tables on a common grid");
        Lemma1Row row;
        row.kF = t.kF;
        row.scaled = t.scaled;
        std::size_t j = 0;
        while (j < row.scaled.size() && row.scaled[j] > 0) ++j;
        positive_prefix = std::min(positive_prefix, j);
        for (double v : row.scaled) row.sup_abs = std::max(row.sup_abs, std::abs(v));
        rep.rows.push_back(std::move(row));
    }
    // need the positive run to contain at least one radius beyond 0
    rep.core_ok = positive_prefix >= 2;
    rep.c_probe = rep.core_ok ? rep.r[positive_prefix - 1] : 0.0;
    for (auto& row : rep.rows) {
        row.core_inf = std::numeric_limits<double>::infinity();
        for (std::size_t j = 0; j < std::max<std::size_t>(positive_prefix, 1); ++j)
            row.core_inf = std::min(row.core_inf, row.scaled[j]);
    }
    return rep;
}

Lemma1Report lemma1_scan(const std::vector<double>& kFs, int d, const PotentialSpec& spec, double r_max,
                         int grid_points, double rel_tol) {
    if (grid_points < 2 || !(r_max > 0)) throw ConfigError("lemma1 scan needs r_max > 0 and at least two points");
    std::vector<double> r;
    for (int i = 0; i < grid_points; ++i) r.push_back(r_max * i / (grid_points - 1));
    std::vector<PotentialTable> tables;
    for (double kF : kFs) tables.push_back(tabulate_quadrature(d, kF, spec, r, rel_tol));
    return lemma1_report(tables, spec);
}

}  // namespace fermipair
