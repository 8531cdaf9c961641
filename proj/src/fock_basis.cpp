#include <cmath>
#include <sstream>

#include "fermipair/fock.hpp"

namespace fermipair {

namespace {

Mask bit(int i) { return Mask(1) << i; }
Mask below(int i) { return bit(i) - 1; }

// next mask with the same popcount (Gosper), increasing integer order
Mask next_combination(Mask x) {
    const Mask c = x & (~x + 1);
    const Mask r = x + c;
    return (((r ^ x) >> 2) / c) | r;
}

int lowest(Mask m) {
    const std::uint64_t lo = std::uint64_t(m);
    return lo ? __builtin_ctzll(lo) : 64 + __builtin_ctzll(std::uint64_t(m >> 64));
}

template <class F>
void for_bits(Mask m, F&& f) {
    while (m) {
        const int b = lowest(m);
        f(b);
        m &= m - 1;
    }
}

}  // namespace

int hop_sign(Mask occ, int l, int k) {
    if (!(occ & bit(k))) return 0;
    const Mask mid = occ & ~bit(k);
    if (l != k && (mid & bit(l))) return 0;
    const int swaps = popcount(occ & below(k)) + popcount(mid & below(l));
    return (swaps & 1) ? -1 : 1;
}

FockBasis::FockBasis(const FermiBall& ball, const ImpurityGrid& grid, const PotentialSpec& v, const FockOptions& opt)
    : ball_(&ball), grid_(grid), m_max_(opt.m_max) {
    const MomentumLattice& lat = ball.lattice();
    grid_.validate();
    if (opt.m_max < 0 || opt.m_max > 3) throw ConfigError("m_max must lie in {0, 1, 2, 3}");
    if (grid_.d != lat.dim()) throw ConfigError("impurity grid dimension differs from the lattice");
    if (std::abs(grid_.L - lat.length()) > 1e-12 * lat.length()) throw ConfigError("impurity grid box differs from the lattice box");
    if (lat.size() > 127) throw ResourceError("Fock lattice has " + std::to_string(lat.size()) + " modes; the occupation masks hold 127");
    for (std::size_t i : ball.members()) ball_global_.push_back(int(i));
    for (std::size_t i : ball.outside()) out_global_.push_back(int(i));
    N_ = int(ball_global_.size());
    P_ = int(out_global_.size());
    for (int i = 0; i < grid_.n - 1; ++i) tuples_ *= grid_.per_impurity();
    spec_id_ = v.id();

    binom_.assign(129 * 5, 0);
    for (int n = 0; n <= 128; ++n) {
        binom_[n * 5] = 1;
        for (int k = 1; k <= 4 && k <= n; ++k) binom_[n * 5 + k] = binom_[(n - 1) * 5 + k - 1] + (k <= n - 1 ? binom_[(n - 1) * 5 + k] : 0);
    }
    build_configs(opt.max_states);
    build_hops(v);
    const double radius = opt.leak_radius > 0 ? opt.leak_radius : 2 * lat.cutoff();
    build_leaks(v, radius);

    const std::size_t B = blocks();
    shift_.resize(std::size_t(std::max(grid_.n - 1, 0)) * B * tuples_);
    const int M = grid_.M, d = grid_.d;
    for (int i = 0; i + 1 < grid_.n; ++i)
        for (std::size_t s = 0; s < B; ++s) {
            const IVec ds = unflat(s);
            for (std::size_t t = 0; t < tuples_; ++t) {
                // digits of impurity i inside t
                std::size_t stride = 1;
                for (int j = grid_.n - 2; j > i; --j) stride *= B;
                const std::size_t pi = (t / stride) % B;
                IVec p = unflat(pi);
                for (int a = 0; a < d; ++a) p[a] = (p[a] + ds[a]) % M;
                const std::size_t np = flat(p);
                shift_[(std::size_t(i) * B + s) * tuples_ + t] = std::uint32_t(t + (np - pi) * stride);
            }
        }
}

std::size_t FockBasis::flat(const IVec& p) const {
    std::size_t o = 0;
    for (int a = 0; a < grid_.d; ++a) o = o * grid_.M + std::size_t(ImpurityGrid::index(p[a], grid_.M));
    return o;
}

IVec FockBasis::unflat(std::size_t idx) const {
    IVec p{0, 0, 0};
    for (int a = grid_.d - 1; a >= 0; --a) {
        p[a] = int(idx % grid_.M);
        idx /= grid_.M;
    }
    return p;
}

int FockBasis::holes(std::size_t f) const {
    int m = 0;
    while (m < m_max_ && f >= sector_[m + 1]) ++m;
    return m;
}

std::size_t FockBasis::rank(int m, Mask h, Mask p) const {
    std::size_t rh = 0, rp = 0;
    int j = 0;
    for_bits(h, [&](int b) { rh += std::size_t(binom_[b * 5 + (++j)]); });
    j = 0;
    for_bits(p, [&](int b) { rp += std::size_t(binom_[b * 5 + (++j)]); });
    return sector_[m] + rh * std::size_t(binom_[P_ * 5 + m]) + rp;
}

void FockBasis::build_configs(std::size_t max_states) {
    const MomentumLattice& lat = lattice();
    double total = 0;
    for (int m = 0; m <= m_max_; ++m) total += double(binom_[N_ * 5 + m]) * double(binom_[P_ * 5 + m]);
    const double states = total * double(tuples_) * double(blocks());
    if (states > double(max_states) || total > 4e9) {
        std::ostringstream os;
        os << "basis too large: " << std::llround(states) << " states (cap " << max_states << ")";
        throw ResourceError(os.str());
    }
    Mask sea = 0;
    for (int g : ball_global_) sea |= bit(g);
    const double h2 = lat.spacing() * lat.spacing();
    sector_.assign(m_max_ + 2, 0);
    for (int m = 0; m <= m_max_; ++m) {
        sector_[m] = occ_.size();
        if (m > N_ || m > P_) continue;
        const Mask hend = bit(N_), pend = bit(P_);
        for (Mask hm = below(m); hm < hend; hm = m ? next_combination(hm) : hend) {
            for (Mask pm = below(m); pm < pend; pm = m ? next_combination(pm) : pend) {
                Mask occ = sea;
                double e = 0;
                IVec P{0, 0, 0};
                for_bits(hm, [&](int b) {
                    const int g = ball_global_[b];
                    occ &= ~bit(g);
                    e -= h2 * double(lat.norm2(g));
                    for (int a = 0; a < 3; ++a) P[a] -= lat.mode(g)[a];
                });
                for_bits(pm, [&](int b) {
                    const int g = out_global_[b];
                    occ |= bit(g);
                    e += h2 * double(lat.norm2(g));
                    for (int a = 0; a < 3; ++a) P[a] += lat.mode(g)[a];
                });
                occ_.push_back(occ);
                energy_.push_back(e);
                pf_.push_back(P);
                pf_flat_.push_back(flat(P));
            }
        }
    }
    sector_[m_max_ + 1] = occ_.size();
}

std::optional<std::size_t> FockBasis::find(Mask occ) const {
    Mask h = 0, p = 0;
    for (int b = 0; b < N_; ++b)
        if (!(occ & bit(ball_global_[b]))) h |= bit(b);
    for (int b = 0; b < P_; ++b)
        if (occ & bit(out_global_[b])) p |= bit(b);
    const int m = popcount(h);
    if (popcount(p) != m || m > m_max_) return std::nullopt;
    Mask all = 0;
    for (int g : ball_global_) all |= bit(g);
    for (int g : out_global_) all |= bit(g);
    if (occ & ~all) return std::nullopt;
    return rank(m, h, p);
}

void FockBasis::build_hops(const PotentialSpec& v) {
    const MomentumLattice& lat = lattice();
    const double h = lat.spacing();
    const double norm = std::pow(lat.length(), -double(lat.dim()));
    const Mask ball_all = below(N_), out_all = below(P_);
    row_.assign(occ_.size() + 1, 0);
    if (occ_.size() >= (std::size_t(1) << 32)) throw ResourceError("too many fermion configurations");

    auto emit = [&](std::size_t f, std::size_t g, int l, int k) {
        const IVec& zl = lat.mode(l);
        const IVec& zk = lat.mode(k);
        IVec s{0, 0, 0};
        double q2 = 0;
        for (int a = 0; a < 3; ++a) {
            s[a] = zk[a] - zl[a];
            q2 += double(s[a]) * s[a];
        }
        const double amp = v(h * std::sqrt(q2));
        if (amp == 0) return;
        const int sg = hop_sign(occ_[f], l, k);
        hops_.push_back({std::uint32_t(g), std::uint32_t(flat(s)), norm * amp * sg});
    };

    for (std::size_t f = 0; f < occ_.size(); ++f) {
        row_[f] = hops_.size();
        const int m = holes(f);
        // recover local masks
        Mask H = 0, Pm = 0;
        for (int b = 0; b < N_; ++b)
            if (!(occ_[f] & bit(ball_global_[b]))) H |= bit(b);
        for (int b = 0; b < P_; ++b)
            if (occ_[f] & bit(out_global_[b])) Pm |= bit(b);
        const Mask occ_ball = ball_all & ~H, free_out = out_all & ~Pm;
        if (m < m_max_)
            for_bits(occ_ball, [&](int kb) {
                for_bits(free_out, [&](int lo) {
                    emit(f, rank(m + 1, H | bit(kb), Pm | bit(lo)), out_global_[lo], ball_global_[kb]);
                });
            });
        for_bits(occ_ball, [&](int kb) {
            for_bits(H, [&](int hb) {
                emit(f, rank(m, (H & ~bit(hb)) | bit(kb), Pm), ball_global_[hb], ball_global_[kb]);
            });
        });
        for_bits(Pm, [&](int pk) {
            for_bits(free_out, [&](int lo) {
                emit(f, rank(m, H, (Pm & ~bit(pk)) | bit(lo)), out_global_[lo], out_global_[pk]);
            });
            for_bits(H, [&](int hb) {
                emit(f, rank(m - 1, H & ~bit(hb), Pm & ~bit(pk)), ball_global_[hb], out_global_[pk]);
            });
        });
    }
    row_[occ_.size()] = hops_.size();
}

void FockBasis::build_leaks(const PotentialSpec& v, double radius) {
    const MomentumLattice& lat = lattice();
    const int d = lat.dim();
    const double h = lat.spacing(), h2 = h * h;
    const double norm = std::pow(lat.length(), -double(d));
    const std::int64_t zc2 = lat.cutoff_norm2(), ze2 = max_norm2(radius, h);
    std::vector<IVec> ext;
    const int r = int(std::floor(std::sqrt(double(ze2)) + 1e-9));
    const int ry = d >= 2 ? r : 0, rz = d >= 3 ? r : 0;
    for (int x = -r; x <= r; ++x)
        for (int y = -ry; y <= ry; ++y)
            for (int z = -rz; z <= rz; ++z) {
                const std::int64_t n2 = std::int64_t(x) * x + std::int64_t(y) * y + std::int64_t(z) * z;
                if (n2 > zc2 && n2 <= ze2) ext.push_back({x, y, z});
            }
    auto term = [&](std::size_t f, const IVec& zl, const IVec& zk) {
        double q2 = 0, l2 = 0, k2 = 0, P2 = 0;
        for (int a = 0; a < 3; ++a) {
            const double q = zl[a] - zk[a];
            q2 += q * q;
            l2 += double(zl[a]) * zl[a];
            k2 += double(zk[a]) * zk[a];
            const double P = pf_[f][a] + q;
            P2 += P * P;
        }
        const double c = norm * v(h * std::sqrt(q2));
        const double R = 1.0 / (energy_[f] + h2 * (l2 - k2) + h2 * P2 + 1.0);
        return c * c * R * R;
    };
    leak_.assign(occ_.size(), 0.0);
    for (std::size_t f = 0; f < occ_.size(); ++f) {
        double s = 0;
        const int m = holes(f);
        for (std::size_t k = 0; k < lat.size(); ++k) {
            if (!(occ_[f] & bit(int(k)))) continue;
            for (const IVec& zl : ext) s += term(f, zl, lat.mode(k));
            if (m == m_max_ && ball_->contains(k))
                for (int g : out_global_)
                    if (!(occ_[f] & bit(g))) s += term(f, lat.mode(g), lat.mode(k));
        }
        leak_[f] = s;
    }
}

std::vector<IVec> FockBasis::impurity_momenta(std::size_t K, std::size_t f, std::size_t t) const {
    const int n = grid_.n, d = grid_.d, M = grid_.M;
    const std::size_t B = blocks();
    std::vector<IVec> p(n);
    IVec rest = unflat(K);
    for (int a = 0; a < d; ++a) rest[a] -= pf_[f][a];
    for (int i = n - 2; i >= 0; --i) {
        p[i] = unflat(t % B);
        t /= B;
    }
    for (int i = 0; i + 1 < n; ++i)
        for (int a = 0; a < d; ++a) rest[a] -= p[i][a];
    p[n - 1] = rest;
    for (auto& q : p)
        for (int a = 0; a < d; ++a) q[a] = ImpurityGrid::momentum(ImpurityGrid::index(q[a], M), M);
    return p;
}

}  // namespace fermipair
