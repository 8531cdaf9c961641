#pragma once

// Truncated particle-hole Fock space for n impurities in a Fermi sea.
//
// A fermion configuration is a set of holes in the ball and particles outside
// it, |holes| = |particles| = m <= m_max, stored as occupation bit masks over
// the lattice modes in lattice order. Impurity momenta live on the periodic
// M^d grid of the effective dynamics, so the recoil exp(i(k-l).y) acts modulo
// M and blocks are labelled by the total momentum modulo M.
//
// Within block K a basis state is (f, t): fermion configuration f and the
// momenta of impurities 0..n-2 flattened into t; impurity n-1 carries the
// remainder K - P_f - sum p_i.

#include <complex>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "fermipair/effective_dynamics.hpp"
#include "fermipair/lattice.hpp"
#include "fermipair/potentials.hpp"

namespace fermipair {

using Mask = unsigned __int128;

inline int popcount(Mask m) {
    return __builtin_popcountll(std::uint64_t(m)) + __builtin_popcountll(std::uint64_t(m >> 64));
}

// a*_l a_k on a global occupation mask, canonical ascending order. Returns the
// sign, or 0 when k is empty or l is already filled (l != k).
int hop_sign(Mask occ, int l, int k);

struct FockOptions {
    int m_max = 2;
    std::size_t max_states = 60'000'000;
    // dropped transitions to particles beyond the cutoff are tallied up to this
    // radius; 0 means twice the lattice cutoff
    double leak_radius = 0;
};

class FockBasis {
public:
    // Keeps a pointer to ball, which must outlive the basis. The hopping
    // amplitudes depend on the profile v, so it is fixed here.
    FockBasis(const FermiBall& ball, const ImpurityGrid& grid, const PotentialSpec& v, const FockOptions& opt = {});

    const FermiBall& ball() const { return *ball_; }
    const MomentumLattice& lattice() const { return ball_->lattice(); }
    const ImpurityGrid& grid() const { return grid_; }
    int m_max() const { return m_max_; }

    std::size_t fermion_count() const { return occ_.size(); }
    std::size_t tuples() const { return tuples_; }
    std::size_t blocks() const { return grid_.per_impurity(); }
    std::size_t block_dim() const { return occ_.size() * tuples_; }
    std::size_t dimension() const { return block_dim() * blocks(); }
    // first fermion index with m holes; sector m is [sector_begin(m), sector_begin(m+1))
    std::size_t sector_begin(int m) const { return sector_[m]; }

    Mask occupation(std::size_t f) const { return occ_[f]; }
    int holes(std::size_t f) const;
    // T - E0 = sum_particles l^2 - sum_holes k^2
    double fermion_energy(std::size_t f) const { return energy_[f]; }
    const IVec& fermion_momentum(std::size_t f) const { return pf_[f]; }
    std::optional<std::size_t> find(Mask occupation) const;

    // integer momenta (symmetric range) of all n impurities of state (K, f, t)
    std::vector<IVec> impurity_momenta(std::size_t K, std::size_t f, std::size_t t) const;
    // flattened mod-M index of an integer momentum vector
    std::size_t flat(const IVec& p) const;
    IVec unflat(std::size_t idx) const;

    // Gather form of the fermion hopping: row f lists (g, s, c) with
    // <f, p| V^{(i)} |g, p + s e_i> = lambda * c, s = k - l for the hop f -> g.
    struct Hop {
        std::uint32_t g;
        std::uint32_t shift;  // flattened mod-M recoil
        double c;             // L^{-d} v(l - k) * sign
    };
    const std::vector<std::size_t>& hop_rows() const { return row_; }
    const std::vector<Hop>& hops() const { return hops_; }

    // sum over dropped hops from f of (c R)^2, R = 1/(T - E0 + P_f^2 + 1) of
    // the target, per impurity and without lambda
    double leak(std::size_t f) const { return leak_[f]; }

    // impurity index shift: t -> t with p_i += s (i <= n-2)
    std::uint32_t shift_tuple(int i, std::size_t t, std::size_t s) const { return shift_[(std::size_t(i) * blocks() + s) * tuples_ + t]; }

private:
    std::size_t rank(int m, Mask holes, Mask parts) const;
    void build_configs(std::size_t max_states);
    void build_hops(const PotentialSpec& v);
    void build_leaks(const PotentialSpec& v, double radius);

    const FermiBall* ball_;
    ImpurityGrid grid_;
    int m_max_;
    std::size_t tuples_ = 1;
    int N_ = 0, P_ = 0;
    std::vector<int> ball_global_, out_global_;  // local -> lattice index
    std::vector<std::int64_t> binom_;            // binom_[n * 5 + k]
    std::vector<std::size_t> sector_;
    std::vector<Mask> occ_;
    std::vector<double> energy_;
    std::vector<IVec> pf_;
    std::vector<std::size_t> pf_flat_;
    std::vector<std::size_t> row_;
    std::vector<Hop> hops_;
    std::vector<double> leak_;
    std::vector<std::uint32_t> shift_;
    std::string spec_id_;
};

// Amplitudes of every block, block-major: index K * block_dim + f * tuples + t.
class FockState {
public:
    FockState() = default;
    explicit FockState(const FockBasis& b) : basis_(&b), a_(b.dimension()) {}

    const FockBasis& basis() const { return *basis_; }
    std::vector<cplx>& amplitudes() { return a_; }
    const std::vector<cplx>& amplitudes() const { return a_; }
    cplx* block(std::size_t K) { return a_.data() + K * basis_->block_dim(); }
    const cplx* block(std::size_t K) const { return a_.data() + K * basis_->block_dim(); }
    double norm() const;
    double block_norm2(std::size_t K) const;

    void save(const std::string& path) const;
    static FockState load(const FockBasis& b, const std::string& path);

private:
    const FockBasis* basis_ = nullptr;
    std::vector<cplx> a_;
};

FockState fermi_sea_state(const FockBasis& b, const ImpurityState& xi);
// m = 0 component as an impurity state
ImpurityState sea_component(const FockState& s);
FockState project_holes(const FockState& s, int m);
double distance(const FockState& a, const FockState& b);

// H - E = h0_n + (T - E0) + V, with E the energy shift.
class MicroHamiltonian {
public:
    MicroHamiltonian(const FockBasis& b, double lambda, const ImpurityPotential& w = ImpurityPotential::zero());

    const FockBasis& basis() const { return *basis_; }
    double lambda() const { return lambda_; }
    void apply_block(std::size_t K, const cplx* x, cplx* y) const;
    FockState apply(const FockState& s) const;
    double energy(const FockState& s) const;
    // Gershgorin bound on the spectral radius of a block
    double norm_bound() const { return norm_bound_; }
    // sqrt(n lambda^2 sum_f leak(f) |psi_f|^2): first-order weight of the
    // transitions the truncation drops
    double dropped_weight(const FockState& s) const;

private:
    const FockBasis* basis_;
    double lambda_;
    std::vector<double> what_;  // w in momentum space, per flattened offset
    bool has_w_ = false;
    std::vector<std::vector<double>> diag_;
    double norm_bound_ = 0;
};

struct KrylovOptions {
    double tol = 1e-10;
    int dim = 40;
    double min_step = 1e-12;
};

struct KrylovStats {
    std::size_t applies = 0, steps = 0, rejections = 0;
};

// exp(-i H t) on one block, Lanczos with full reorthogonalization.
KrylovStats krylov_expm(const MicroHamiltonian& H, std::size_t K, cplx* x, double t, const KrylovOptions& opt = {});

FockState evolve_full(const MicroHamiltonian& H, const FockState& psi0, double t, const KrylovOptions& opt = {},
                      KrylovStats* stats = nullptr);

struct DeficitPoint {
    double t = 0;
    double deficit = 0;
    double dropped_weight = 0;
    double norm = 0, energy = 0;
};

// || e^{-i H t} (xi0 x Omega0) - (e^{-i h t} xi0) x Omega0 || along `times`
// (ascending), both sides stepped incrementally.
std::vector<DeficitPoint> deficit_curve(const MicroHamiltonian& H, const EffectiveHamiltonian& h,
                                        const ImpurityState& xi0, const std::vector<double>& times,
                                        const KrylovOptions& kopt = {}, const EvolveOptions& eopt = {});

double theorem1_deficit(const MicroHamiltonian& H, const EffectiveHamiltonian& h, const ImpurityState& xi0, double t);

// || H(xi0 x Omega0) - (h xi0) x Omega0 ||, the first-order Duhamel rate.
double duhamel_rate(const MicroHamiltonian& H, const EffectiveHamiltonian& h, const ImpurityState& xi0);

}  // namespace fermipair
