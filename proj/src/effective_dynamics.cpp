#include "fermipair/effective_dynamics.hpp"

#include <fftw3.h>

#include <cmath>
#include <fstream>
#include <iomanip>
#include <mutex>
#include <random>
#include <sstream>

#include <json.hpp>

#include "fermipair/kernels.hpp"

namespace fermipair {

namespace {

std::mutex& planner_mutex() {
    static std::mutex m;
    return m;
}

std::size_t ipow(std::size_t b, int e) {
    std::size_t r = 1;
    while (e-- > 0) r *= b;
    return r;
}

// digits of idx in base M, most significant first, count = n*d
void unflatten(std::size_t idx, int M, int count, int* digits) {
    for (int a = count - 1; a >= 0; --a) {
        digits[a] = int(idx % M);
        idx /= M;
    }
}

}  // namespace

std::size_t ImpurityGrid::per_impurity() const { return ipow(std::size_t(M), d); }
std::size_t ImpurityGrid::size() const { return ipow(std::size_t(M), n * d); }

void ImpurityGrid::validate() const {
    if (n < 1) throw ConfigError("at least one impurity is required");
    if (d < 1 || d > 3) throw ConfigError("dimension must be 1, 2 or 3");
    if (M < 2 || (M & (M - 1)) != 0) throw ConfigError("impurity mode count must be a power of two");
    if (!(L > 0)) throw ConfigError("box length must be positive");
    if (std::pow(double(M), n * d) > double(1u << 27)) throw ResourceError("impurity grid too large");
}

double ImpurityState::norm() const {
    return std::sqrt(kernels::active().norm2(c_.data(), c_.size()));
}

void ImpurityState::normalize() {
    const double nrm = norm();
    if (!(nrm > 0)) throw ConfigError("cannot normalize a zero state");
    for (auto& x : c_) x /= nrm;
}

struct GridTransform::Impl {
    fftw_plan fwd = nullptr, bwd = nullptr;
};

GridTransform::GridTransform(const ImpurityGrid& g) : impl_(std::make_unique<Impl>()) {
    g.validate();
    const int rank = g.n * g.d;
    std::vector<int> dims(rank, g.M);
    std::lock_guard<std::mutex> lock(planner_mutex());
    fftw_complex* buf = fftw_alloc_complex(g.size());
    const unsigned flags = FFTW_ESTIMATE | FFTW_UNALIGNED;
    impl_->fwd = fftw_plan_dft(rank, dims.data(), buf, buf, FFTW_FORWARD, flags);
    impl_->bwd = fftw_plan_dft(rank, dims.data(), buf, buf, FFTW_BACKWARD, flags);
    fftw_free(buf);
    if (!impl_->fwd || !impl_->bwd) throw NumericalError("FFT planning failed");
}

GridTransform::~GridTransform() {
    std::lock_guard<std::mutex> lock(planner_mutex());
    if (impl_->fwd) fftw_destroy_plan(impl_->fwd);
    if (impl_->bwd) fftw_destroy_plan(impl_->bwd);
}

void GridTransform::to_position(cplx* data) const {
    auto* p = reinterpret_cast<fftw_complex*>(data);
    fftw_execute_dft(impl_->bwd, p, p);
}

void GridTransform::to_momentum(cplx* data) const {
    auto* p = reinterpret_cast<fftw_complex*>(data);
    fftw_execute_dft(impl_->fwd, p, p);
}

std::vector<cplx> to_position(const ImpurityState& s) {
    const ImpurityGrid& g = s.grid();
    std::vector<cplx> psi = s.amplitudes();
    GridTransform(g).to_position(psi.data());
    const double f = std::pow(g.L, -0.5 * g.n * g.d);
    for (auto& x : psi) x *= f;
    return psi;
}

ImpurityState from_position(const ImpurityGrid& g, const std::vector<cplx>& psi) {
    ImpurityState s(g);
    s.amplitudes() = psi;
    GridTransform(g).to_momentum(s.amplitudes().data());
    const double f = std::pow(g.L, 0.5 * g.n * g.d) / double(g.size());
    for (auto& x : s.amplitudes()) x *= f;
    return s;
}

ImpurityState gaussian_state(const ImpurityGrid& g, const std::vector<Vec3>& centers, double sigma,
                             const std::vector<Vec3>& kbar) {
    g.validate();
    if (int(centers.size()) != g.n) throw ConfigError("need one center per impurity");
    if (!kbar.empty() && int(kbar.size()) != g.n) throw ConfigError("need one mean momentum per impurity");
    if (!(sigma > 0)) throw ConfigError("packet width must be positive");
    const int count = g.n * g.d;
    const double dx = g.L / g.M;
    std::vector<cplx> psi(g.size());
    std::vector<int> dig(count);
    for (std::size_t idx = 0; idx < psi.size(); ++idx) {
        unflatten(idx, g.M, count, dig.data());
        double logamp = 0, phase = 0;
        for (int i = 0; i < g.n; ++i)
            for (int a = 0; a < g.d; ++a) {
                const double y = dig[i * g.d + a] * dx;
                double dy = std::remainder(y - centers[i][a], g.L);
                logamp -= dy * dy / (4 * sigma * sigma);
                if (!kbar.empty()) phase += kbar[i][a] * y;
            }
        psi[idx] = std::polar(std::exp(logamp), phase);
    }
    ImpurityState s = from_position(g, psi);
    s.normalize();
    return s;
}

ImpurityState random_state(const ImpurityGrid& g, double pcut, std::uint64_t seed) {
    g.validate();
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> nd;
    ImpurityState s(g);
    const int count = g.n * g.d;
    std::vector<int> dig(count);
    const double h = g.spacing();
    bool any = false;
    for (std::size_t idx = 0; idx < g.size(); ++idx) {
        unflatten(idx, g.M, count, dig.data());
        bool inside = true;
        for (int i = 0; i < g.n && inside; ++i) {
            double p2 = 0;
            for (int a = 0; a < g.d; ++a) {
                const double p = h * ImpurityGrid::momentum(dig[i * g.d + a], g.M);
                p2 += p * p;
            }
            inside = p2 <= pcut * pcut * (1 + 1e-12);
        }
        const double re = nd(rng), im = nd(rng);
        if (inside) {
            s.amplitudes()[idx] = {re, im};
            any = true;
        }
    }
    if (!any) throw ConfigError("momentum cutoff leaves no modes");
    s.normalize();
    return s;
}

double kinetic_functional(const ImpurityState& s) {
    const ImpurityGrid& g = s.grid();
    const int count = g.n * g.d;
    std::vector<int> dig(count);
    const double h = g.spacing();
    double q = 0;
    for (std::size_t idx = 0; idx < g.size(); ++idx) {
        unflatten(idx, g.M, count, dig.data());
        double k2 = 0;
        for (int a = 0; a < count; ++a) {
            const double p = h * ImpurityGrid::momentum(dig[a], g.M);
            k2 += p * p;
        }
        q += std::norm(s.amplitudes()[idx]) * k2;
    }
    return q;
}

double energy_shift(const FermiBall& ball, double lambda, int n, const PotentialSpec& spec) {
    const double L = ball.lattice().length();
    return ball.free_energy() + n * lambda * spec(0.0) * double(ball.particle_number()) / std::pow(L, ball.lattice().dim());
}

EffectiveHamiltonian::EffectiveHamiltonian(const ImpurityGrid& g, double lambda, const PotentialTable& W,
                                           const ImpurityPotential& w, EffectiveVariant variant)
    : grid_(g), variant_(variant), lambda_(lambda) {
    g.validate();
    if (!w.certified()) throw ConfigError("impurity potential is uncertified; only bounded w is propagated");
    if (W.d != g.d) throw ConfigError("potential table dimension does not match the grid");
    const int count = g.n * g.d;
    const double h = g.spacing();
    std::vector<int> dig(count);
    kinetic_.resize(g.size());
    for (std::size_t idx = 0; idx < g.size(); ++idx) {
        unflatten(idx, g.M, count, dig.data());
        double k2 = 0;
        for (int a = 0; a < count; ++a) {
            const double p = h * ImpurityGrid::momentum(dig[a], g.M);
            k2 += p * p;
        }
        kinetic_[idx] = k2;
    }
    const double l2 = lambda * lambda;
    // both variants carry -n lambda^2 W(0); under the scaled coupling this is -n k_F^{2-d} W(0)
    constant_ = -g.n * l2 * W.raw_at(0.0);

    pairfun_.assign(g.per_impurity(), 0.0);
    const double dx = g.L / g.M;
    std::vector<int> dd(g.d);
    for (std::size_t o = 0; o < g.per_impurity(); ++o) {
        unflatten(o, g.M, g.d, dd.data());
        double r2 = 0;
        for (int a = 0; a < g.d; ++a) {
            const int m = std::min(dd[a], g.M - dd[a]);
            r2 += (m * dx) * (m * dx);
        }
        const double r = std::sqrt(r2);
        double v = w(r);
        if (variant == EffectiveVariant::h_n && g.n >= 2 && l2 != 0) v -= l2 * W.raw_at(r);
        pairfun_[o] = v;
    }
    pair_.assign(g.size(), 0.0);
    if (g.n >= 2) {
        for (std::size_t idx = 0; idx < g.size(); ++idx) {
            unflatten(idx, g.M, count, dig.data());
            double v = 0;
            for (int i = 0; i < g.n; ++i)
                for (int j = i + 1; j < g.n; ++j) {
                    std::size_t o = 0;
                    for (int a = 0; a < g.d; ++a) o = o * g.M + std::size_t(((dig[i * g.d + a] - dig[j * g.d + a]) % g.M + g.M) % g.M);
                    v += pairfun_[o];
                }
            pair_[idx] = v;
        }
    }
}

double EffectiveHamiltonian::pair_function(const std::array<int, 3>& delta) const {
    std::size_t o = 0;
    for (int a = 0; a < grid_.d; ++a) o = o * grid_.M + std::size_t(ImpurityGrid::index(delta[a], grid_.M));
    return pairfun_[o];
}

double EffectiveHamiltonian::max_kinetic() const {
    double m = 0;
    for (double k : kinetic_) m = std::max(m, k);
    return m;
}

ImpurityState EffectiveHamiltonian::apply(const ImpurityState& s) const {
    const std::size_t N = grid_.size();
    std::vector<cplx> pos = s.amplitudes();
    GridTransform tr(grid_);
    tr.to_position(pos.data());
    for (std::size_t i = 0; i < N; ++i) pos[i] *= (pair_[i] + constant_) / double(N);
    tr.to_momentum(pos.data());
    ImpurityState out(grid_);
    for (std::size_t i = 0; i < N; ++i) out.amplitudes()[i] = kinetic_[i] * s.amplitudes()[i] + pos[i];
    return out;
}

double EffectiveHamiltonian::energy(const ImpurityState& s) const {
    const ImpurityState hs = apply(s);
    return kernels::active().cdot(s.amplitudes().data(), hs.amplitudes().data(), s.amplitudes().size()).real();
}

Observables observe(const ImpurityState& s, const EffectiveHamiltonian& H, double t) {
    Observables o;
    o.t = t;
    o.norm = s.norm();
    o.energy = H.energy(s);
    o.q = kinetic_functional(s);
    const ImpurityGrid& g = s.grid();
    if (g.n >= 2) {
        const std::vector<cplx> psi = to_position(s);
        const double dV = std::pow(g.L / g.M, g.n * g.d);
        const double dx = g.L / g.M;
        const int count = g.n * g.d;
        std::vector<int> dig(count);
        for (std::size_t idx = 0; idx < psi.size(); ++idx) {
            unflatten(idx, g.M, count, dig.data());
            double r2 = 0;
            for (int a = 0; a < g.d; ++a) {
                const int m = ((dig[a] - dig[g.d + a]) % g.M + g.M) % g.M;
                const int mi = std::min(m, g.M - m);
                r2 += (mi * dx) * (mi * dx);
            }
            const double p = std::norm(psi[idx]) * dV;
            o.pair_mean += p * std::sqrt(r2);
            o.pair_sq += p * r2;
        }
    }
    return o;
}

void write_observables_csv(const std::string& path, const std::vector<Observables>& rows) {
    std::ofstream out(path);
    if (!out) throw ConfigError("cannot write " + path);
    out << "t,norm,energy,q_xi,pair_mean,pair_sq\n" << std::setprecision(15);
    for (const auto& r : rows)
        out << r.t << ',' << r.norm << ',' << r.energy << ',' << r.q << ',' << r.pair_mean << ',' << r.pair_sq << '\n';
}

void write_snapshot(const std::string& path, const ImpurityState& s, double t) {
    const ImpurityGrid& g = s.grid();
    std::ofstream bin(path, std::ios::binary);
    if (!bin) throw ConfigError("cannot write " + path);
    bin.write(reinterpret_cast<const char*>(s.amplitudes().data()), std::streamsize(s.amplitudes().size() * sizeof(cplx)));
    nlohmann::json j;
    j["n"] = g.n;
    j["d"] = g.d;
    j["M"] = g.M;
    j["L"] = g.L;
    j["t"] = t;
    j["shape"] = std::vector<int>(g.n * g.d, g.M);
    j["layout"] = "momentum amplitudes, impurity-major, complex128 little-endian";
    std::ofstream(path + ".json") << j.dump(2) << '\n';
}

ImpurityState read_snapshot(const std::string& path) {
    std::ifstream js(path + ".json");
    if (!js) throw ConfigError("missing sidecar " + path + ".json");
    nlohmann::json j;
    js >> j;
    ImpurityGrid g;
    g.n = j.at("n");
    g.d = j.at("d");
    g.M = j.at("M");
    g.L = j.at("L");
    g.validate();
    ImpurityState s(g);
    std::ifstream bin(path, std::ios::binary);
    bin.read(reinterpret_cast<char*>(s.amplitudes().data()), std::streamsize(g.size() * sizeof(cplx)));
    if (!bin) throw ConfigError("truncated snapshot " + path);
    return s;
}

namespace {

EvolveResult strang(const ImpurityState& xi0, const EffectiveHamiltonian& H, double t, double dt,
                    const EvolveOptions& opt) {
    const ImpurityGrid& g = xi0.grid();
    EvolveResult res;
    res.state = xi0;
    if (t == 0) return res;
    const std::size_t steps = std::max<std::size_t>(1, std::size_t(std::ceil(std::abs(t) / dt - 1e-9)));
    dt = t / double(steps);
    res.dt = dt;
    res.steps = steps;
    if (std::abs(dt) * H.max_kinetic() >= 0.5) {
        std::ostringstream os;
        os << "unstable step size: dt*max kinetic = " << std::abs(dt) * H.max_kinetic() << " >= 0.5";
        throw NumericalError(os.str());
    }
    const std::size_t N = g.size();
    std::vector<cplx> half(N), full(N), pot(N);
    for (std::size_t i = 0; i < N; ++i) {
        half[i] = std::polar(1.0, -H.kinetic()[i] * dt / 2);
        full[i] = half[i] * half[i];
        pot[i] = std::polar(1.0 / double(N), -(H.pair_terms()[i] + H.constant()) * dt);
    }
    const auto& K = kernels::active();
    GridTransform tr(g);
    std::vector<cplx>& c = res.state.amplitudes();
    const double n0 = xi0.norm();
    K.cmul(c.data(), half.data(), N);
    for (std::size_t s = 1; s <= steps; ++s) {
        tr.to_position(c.data());
        K.cmul(c.data(), pot.data(), N);
        tr.to_momentum(c.data());
        if (s == steps) {
            K.cmul(c.data(), half.data(), N);
        } else {
            if (opt.observer && opt.observe_every > 0 && s % std::size_t(opt.observe_every) == 0) {
                ImpurityState snap = res.state;
                K.cmul(snap.amplitudes().data(), half.data(), N);
                opt.observer(dt * double(s), snap);
            }
            K.cmul(c.data(), full.data(), N);
        }
    }
    if (opt.observer) opt.observer(t, res.state);
    res.norm_drift = std::abs(res.state.norm() - n0);
    if (res.norm_drift > 1e-6) throw NumericalError("unstable step size: norm drift " + std::to_string(res.norm_drift));
    return res;
}

}  // namespace

EvolveResult evolve_effective(const ImpurityState& xi0, const EffectiveHamiltonian& H, double t, const EvolveOptions& opt) {
    if (xi0.grid().size() != H.grid().size() || xi0.grid().M != H.grid().M || xi0.grid().n != H.grid().n)
        throw ConfigError("state and Hamiltonian grids differ");
    if (std::abs(xi0.norm() - 1) > 1e-9) throw ConfigError("initial state must be normalized");
    double dt = opt.dt > 0 ? opt.dt : std::abs(t) / 2048;
    if (t == 0) return strang(xi0, H, t, 1, opt);
    if (!opt.refine) return strang(xi0, H, t, dt, opt);
    EvolveOptions quiet = opt;
    quiet.observer = nullptr;
    EvolveResult prev = strang(xi0, H, t, dt, quiet);
    for (int k = 0; k < opt.max_halvings; ++k) {
        dt /= 2;
        EvolveResult cur = strang(xi0, H, t, dt, quiet);
        double diff = 0;
        for (std::size_t i = 0; i < cur.state.amplitudes().size(); ++i)
            diff += std::norm(cur.state.amplitudes()[i] - prev.state.amplitudes()[i]);
        prev = std::move(cur);
        if (std::sqrt(diff) < opt.refine_tol) break;
    }
    if (opt.observer) return strang(xi0, H, t, prev.dt, opt);
    return prev;
}

}  // namespace fermipair
