#include <cmath>
#include <fstream>

#include <json.hpp>

#include "fermipair/fock.hpp"
#include "fermipair/kernels.hpp"

namespace fermipair {

double FockState::norm() const { return std::sqrt(kernels::active().norm2(a_.data(), a_.size())); }

double FockState::block_norm2(std::size_t K) const {
    return kernels::active().norm2(block(K), basis_->block_dim());
}

void FockState::save(const std::string& path) const {
    const FockBasis& b = *basis_;
    std::ofstream bin(path, std::ios::binary);
    if (!bin) throw ConfigError("cannot write " + path);
    bin.write(reinterpret_cast<const char*>(a_.data()), std::streamsize(a_.size() * sizeof(cplx)));
    nlohmann::json j;
    j["d"] = b.lattice().dim();
    j["L"] = b.lattice().length();
    j["cutoff"] = b.lattice().cutoff();
    j["k_F"] = b.ball().kF();
    j["m_max"] = b.m_max();
    j["n"] = b.grid().n;
    j["M_imp"] = b.grid().M;
    j["blocks"] = b.blocks();
    j["block_dim"] = b.block_dim();
    j["fermion_configs"] = b.fermion_count();
    j["layout"] = "block-major complex128; index K*block_dim + f*tuples + t";
    std::ofstream(path + ".json") << j.dump(2) << '\n';
}

FockState FockState::load(const FockBasis& b, const std::string& path) {
    std::ifstream js(path + ".json");
    if (!js) throw ConfigError("missing manifest " + path + ".json");
    nlohmann::json j;
    js >> j;
    if (j.at("block_dim").get<std::size_t>() != b.block_dim() || j.at("blocks").get<std::size_t>() != b.blocks() ||
        j.at("m_max").get<int>() != b.m_max())
        throw ConfigError("checkpoint " + path + " does not match the basis");
    FockState s(b);
    std::ifstream bin(path, std::ios::binary);
    bin.read(reinterpret_cast<char*>(s.a_.data()), std::streamsize(s.a_.size() * sizeof(cplx)));
    if (!bin) throw ConfigError("truncated checkpoint " + path);
    return s;
}

FockState fermi_sea_state(const FockBasis& b, const ImpurityState& xi) {
    const ImpurityGrid& g = xi.grid();
    if (g.n != b.grid().n || g.d != b.grid().d || g.M != b.grid().M || std::abs(g.L - b.grid().L) > 1e-12 * g.L)
        throw ConfigError("impurity grid does not match the Fock basis");
    FockState s(b);
    const std::size_t B = b.blocks();
    const std::size_t T = b.tuples();
    for (std::size_t idx = 0; idx < g.size(); ++idx) {
        const cplx c = xi.amplitudes()[idx];
        if (c == cplx(0)) continue;
        const std::size_t t = idx / B;
        // total impurity momentum mod M
        IVec K{0, 0, 0};
        std::size_t rest = idx;
        for (int i = 0; i < g.n; ++i) {
            const IVec p = b.unflat(rest % B);
            rest /= B;
            for (int a = 0; a < 3; ++a) K[a] += p[a];
        }
        s.amplitudes()[b.flat(K) * b.block_dim() + 0 * T + t] = c;
    }
    return s;
}

ImpurityState sea_component(const FockState& s) {
    const FockBasis& b = s.basis();
    ImpurityState xi(b.grid());
    const std::size_t B = b.blocks();
    for (std::size_t idx = 0; idx < b.grid().size(); ++idx) {
        const std::size_t t = idx / B;
        IVec K{0, 0, 0};
        std::size_t rest = idx;
        for (int i = 0; i < b.grid().n; ++i) {
            const IVec p = b.unflat(rest % B);
            rest /= B;
            for (int a = 0; a < 3; ++a) K[a] += p[a];
        }
        xi.amplitudes()[idx] = s.amplitudes()[b.flat(K) * b.block_dim() + t];
    }
    return xi;
}

FockState project_holes(const FockState& s, int m) {
    const FockBasis& b = s.basis();
    if (m < 0 || m > b.m_max()) throw ConfigError("hole number outside [0, m_max]");
    FockState out(b);
    const std::size_t T = b.tuples();
    const std::size_t lo = b.sector_begin(m) * T, hi = b.sector_begin(m + 1) * T;
    for (std::size_t K = 0; K < b.blocks(); ++K)
        std::copy(s.block(K) + lo, s.block(K) + hi, out.block(K) + lo);
    return out;
}

double distance(const FockState& a, const FockState& b) {
    if (&a.basis() != &b.basis()) throw ConfigError("states live on different bases");
    double s = 0;
    for (std::size_t i = 0; i < a.amplitudes().size(); ++i) s += std::norm(a.amplitudes()[i] - b.amplitudes()[i]);
    return std::sqrt(s);
}

MicroHamiltonian::MicroHamiltonian(const FockBasis& b, double lambda, const ImpurityPotential& w)
    : basis_(&b), lambda_(lambda) {
    if (!w.certified()) throw ConfigError("impurity potential is uncertified; only bounded w is propagated");
    const ImpurityGrid& g = b.grid();
    const std::size_t B = b.blocks(), T = b.tuples(), F = b.fermion_count();
    const double h2 = g.spacing() * g.spacing();

    if (!w.is_zero() && g.n >= 2) {
        // w sampled at minimal-image offsets, then its discrete Fourier series
        std::vector<double> wd(B);
        const double dx = g.L / g.M;
        for (std::size_t o = 0; o < B; ++o) {
            const IVec dl = b.unflat(o);
            double r2 = 0;
            for (int a = 0; a < g.d; ++a) {
                const int m = std::min(dl[a], g.M - dl[a]);
                r2 += (m * dx) * (m * dx);
            }
            wd[o] = w(std::sqrt(r2));
        }
        what_.assign(B, 0.0);
        for (std::size_t q = 0; q < B; ++q) {
            const IVec dq = b.unflat(q);
            double s = 0;
            for (std::size_t o = 0; o < B; ++o) {
                const IVec dl = b.unflat(o);
                double ph = 0;
                for (int a = 0; a < g.d; ++a) ph += double(dq[a]) * dl[a];
                s += wd[o] * std::cos(2 * kPi * ph / g.M);
            }
            what_[q] = s / double(B);
            if (std::abs(what_[q]) < 1e-15 * (w.sup_abs() + 1e-300)) what_[q] = 0;
        }
        has_w_ = true;
    }

    diag_.assign(B, {});
    double max_diag = 0;
    for (std::size_t K = 0; K < B; ++K) {
        auto& D = diag_[K];
        D.resize(F * T);
        for (std::size_t f = 0; f < F; ++f)
            for (std::size_t t = 0; t < T; ++t) {
                double kin = 0;
                for (const IVec& p : b.impurity_momenta(K, f, t))
                    for (int a = 0; a < g.d; ++a) kin += h2 * double(p[a]) * p[a];
                D[f * T + t] = b.fermion_energy(f) + kin;
                max_diag = std::max(max_diag, std::abs(D[f * T + t]));
            }
    }
    double max_row = 0;
    for (std::size_t f = 0; f < F; ++f) {
        double s = 0;
        for (std::size_t e = b.hop_rows()[f]; e < b.hop_rows()[f + 1]; ++e) s += std::abs(b.hops()[e].c);
        max_row = std::max(max_row, s);
    }
    double wsum = 0;
    for (double x : what_) wsum += std::abs(x);
    norm_bound_ = max_diag + std::abs(lambda) * g.n * max_row + wsum * g.n * (g.n - 1) / 2;
}

void MicroHamiltonian::apply_block(std::size_t K, const cplx* x, cplx* y) const {
    const FockBasis& b = *basis_;
    const ImpurityGrid& g = b.grid();
    const std::size_t T = b.tuples(), F = b.fermion_count(), B = b.blocks();
    const std::vector<double>& D = diag_[K];
    const std::size_t dim = F * T;
    for (std::size_t i = 0; i < dim; ++i) y[i] = D[i] * x[i];

    if (has_w_) {
        for (std::size_t f = 0; f < F; ++f) {
            const cplx* xf = x + f * T;
            cplx* yf = y + f * T;
            for (int i = 0; i < g.n; ++i)
                for (int j = i + 1; j < g.n; ++j)
                    for (std::size_t q = 0; q < B; ++q) {
                        const double wq = what_[q];
                        if (wq == 0) continue;
                        IVec mq = b.unflat(q);
                        for (int a = 0; a < 3; ++a) mq[a] = -mq[a];
                        const std::size_t qm = b.flat(mq);
                        for (std::size_t t = 0; t < T; ++t) {
                            std::size_t src = b.shift_tuple(i, t, qm);
                            if (j <= g.n - 2) src = b.shift_tuple(j, src, q);
                            yf[t] += wq * xf[src];
                        }
                    }
        }
    }
    if (lambda_ == 0) return;

    const auto& rows = b.hop_rows();
    const auto& hops = b.hops();
    const int n = g.n;
    const auto& kern = kernels::active();
    if (n == 1) {
        for (std::size_t f = 0; f < F; ++f) {
            cplx acc = 0;
            for (std::size_t e = rows[f]; e < rows[f + 1]; ++e) acc += hops[e].c * x[hops[e].g];
            y[f] += lambda_ * acc;
        }
        return;
    }
    const bool cyclic = g.d == 1 && n == 2;
    const std::size_t M = std::size_t(g.M);
    for (std::size_t f = 0; f < F; ++f) {
        cplx* yf = y + f * T;
        for (std::size_t e = rows[f]; e < rows[f + 1]; ++e) {
            const double c = lambda_ * hops[e].c;
            const cplx* xg = x + std::size_t(hops[e].g) * T;
            const std::size_t s = hops[e].shift;
            // impurity n-1 takes the recoil implicitly
            kern.raxpy(c, xg, yf, T);
            if (cyclic) {
                kern.raxpy(c, xg + s, yf, M - s);
                if (s) kern.raxpy(c, xg, yf + (M - s), s);
                continue;
            }
            for (int i = 0; i + 1 < n; ++i)
                for (std::size_t t = 0; t < T; ++t) yf[t] += c * xg[b.shift_tuple(i, t, s)];
        }
    }
}

FockState MicroHamiltonian::apply(const FockState& s) const {
    FockState out(*basis_);
    for (std::size_t K = 0; K < basis_->blocks(); ++K) apply_block(K, s.block(K), out.block(K));
    return out;
}

double MicroHamiltonian::energy(const FockState& s) const {
    const FockState hs = apply(s);
    return kernels::active().cdot(s.amplitudes().data(), hs.amplitudes().data(), s.amplitudes().size()).real();
}

double MicroHamiltonian::dropped_weight(const FockState& s) const {
    const FockBasis& b = *basis_;
    const std::size_t T = b.tuples();
    double acc = 0;
    for (std::size_t K = 0; K < b.blocks(); ++K) {
        const cplx* x = s.block(K);
        for (std::size_t f = 0; f < b.fermion_count(); ++f) {
            const double lk = b.leak(f);
            if (lk == 0) continue;
            double w = 0;
            for (std::size_t t = 0; t < T; ++t) w += std::norm(x[f * T + t]);
            acc += lk * w;
        }
    }
    return std::sqrt(b.grid().n * lambda_ * lambda_ * acc);
}

}  // namespace fermipair
