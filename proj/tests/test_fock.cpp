#include <doctest.h>

#include <cmath>
#include <cstdio>
#include <map>
#include <random>

#include "fermipair/effective_potential.hpp"
#include "fermipair/fock.hpp"

using namespace fermipair;

namespace {

struct Tiny {
    MomentumLattice lat{1, 2 * kPi, 3};
    FermiBall ball{lat, 1};
};

FockState random_fock(const FockBasis& b, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> nd;
    FockState s(b);
    for (auto& x : s.amplitudes()) x = {nd(rng), nd(rng)};
    return s;
}

cplx dot(const FockState& a, const FockState& b) {
    cplx s = 0;
    for (std::size_t i = 0; i < a.amplitudes().size(); ++i) s += std::conj(a.amplitudes()[i]) * b.amplitudes()[i];
    return s;
}

// Dense oracle written against the second-quantized form directly: states are
// (set of occupied lattice modes, raw impurity digits), signs from counting
// occupied modes below the operator position.
struct OracleKey {
    std::uint64_t occ;
    std::vector<int> p;
    bool operator<(const OracleKey& o) const { return std::tie(occ, p) < std::tie(o.occ, o.p); }
};

FockState oracle_apply(const FockBasis& b, double lambda, const ImpurityPotential& w, const FockState& x) {
    const MomentumLattice& lat = b.lattice();
    const ImpurityGrid& g = b.grid();
    const int M = g.M, n = g.n, modes = int(lat.size());
    const double h = lat.spacing(), Ld = std::pow(lat.length(), -1.0);
    const auto v = [&](int q) { return 1 / (h * h * q * q + 1); };  // yukawa R = 1

    std::map<OracleKey, std::size_t> index;
    std::vector<OracleKey> keys(b.dimension());
    for (std::size_t K = 0; K < b.blocks(); ++K)
        for (std::size_t f = 0; f < b.fermion_count(); ++f)
            for (std::size_t t = 0; t < b.tuples(); ++t) {
                OracleKey k{std::uint64_t(b.occupation(f)), {}};
                for (const IVec& p : b.impurity_momenta(K, f, t)) k.p.push_back(ImpurityGrid::index(p[0], M));
                const std::size_t i = K * b.block_dim() + f * b.tuples() + t;
                index[k] = i;
                keys[i] = k;
            }
    REQUIRE(index.size() == b.dimension());

    std::uint64_t sea = 0;
    for (std::size_t k : b.ball().members()) sea |= std::uint64_t(1) << k;
    double E0 = 0;
    for (std::size_t k : b.ball().members()) E0 += lat.energy(k);
    // w on the grid, Fourier coefficients by direct summation
    std::vector<double> what(M, 0);
    for (int q = 0; q < M; ++q)
        for (int o = 0; o < M; ++o) what[q] += w(std::min(o, M - o) * g.L / M) * std::cos(2 * kPi * q * o / M) / M;

    FockState y(b);
    for (std::size_t i = 0; i < keys.size(); ++i) {
        const OracleKey& s = keys[i];
        const cplx xs = x.amplitudes()[i];
        double diag = -E0;
        for (int k = 0; k < modes; ++k)
            if (s.occ >> k & 1) diag += lat.energy(k);
        for (int pi : s.p) diag += h * h * std::pow(ImpurityGrid::momentum(pi, M), 2);
        y.amplitudes()[i] += diag * xs;
        if (n == 2 && !w.is_zero())
            for (int q = 0; q < M; ++q) {
                OracleKey t = s;
                t.p[0] = (t.p[0] + q) % M;
                t.p[1] = (t.p[1] - q + M) % M;
                y.amplitudes()[index.at(t)] += what[q] * xs;
            }
        for (int k = 0; k < modes; ++k) {
            if (!(s.occ >> k & 1)) continue;
            for (int l = 0; l < modes; ++l) {
                if (l == k) continue;
                const std::uint64_t mid = s.occ & ~(std::uint64_t(1) << k);
                if (mid >> l & 1) continue;
                int sign = 1;
                for (int j = 0; j < k; ++j)
                    if (s.occ >> j & 1) sign = -sign;
                for (int j = 0; j < l; ++j)
                    if (mid >> j & 1) sign = -sign;
                const std::uint64_t occ = mid | (std::uint64_t(1) << l);
                if (__builtin_popcountll(sea & ~occ) > b.m_max()) continue;
                const int zk = lat.mode(k)[0], zl = lat.mode(l)[0];
                for (int imp = 0; imp < n; ++imp) {
                    OracleKey t{occ, s.p};
                    t.p[imp] = ImpurityGrid::index(t.p[imp] + zk - zl, M);
                    y.amplitudes()[index.at(t)] += lambda * Ld * v(zl - zk) * sign * xs;
                }
            }
        }
    }
    return y;
}

PotentialTable flat_table(int d, double kF) {
    PotentialTable t;
    t.d = d;
    t.kF = kF;
    t.r = {0, 100};
    t.scaled = {0, 0};
    t.err = {0, 0};
    return t;
}

}  // namespace

TEST_CASE("basis size by brute-force enumeration") {
    Tiny s;
    // 3 ball modes, 4 outside: configurations with at most m_max holes
    for (int m_max : {0, 1, 2, 3}) {
        std::size_t count = 0;
        for (unsigned occ = 0; occ < (1u << 7); ++occ) {
            if (__builtin_popcount(occ) != 3) continue;
            int holes = 0;
            for (std::size_t k : s.ball.members())
                if (!(occ >> k & 1)) ++holes;
            if (holes <= m_max) ++count;
        }
        for (int n : {1, 2}) {
            const FockBasis b(s.ball, {n, 1, 4, 2 * kPi}, PotentialSpec::yukawa(1), {m_max});
            CAPTURE(m_max);
            CHECK(b.fermion_count() == count);
            CHECK(b.dimension() == count * (n == 1 ? 4 : 16));
        }
    }
}

TEST_CASE("configuration order: smaller truncations are prefixes") {
    Tiny s;
    const FockBasis b1(s.ball, {1, 1, 4, 2 * kPi}, PotentialSpec::yukawa(1), {1});
    const FockBasis b2(s.ball, {1, 1, 4, 2 * kPi}, PotentialSpec::yukawa(1), {2});
    for (std::size_t f = 0; f < b1.fermion_count(); ++f) {
        CHECK(b1.occupation(f) == b2.occupation(f));
        CHECK(b2.find(b2.occupation(f)) == f);
    }
    CHECK(b2.sector_begin(1) == 1);
    CHECK(b2.sector_begin(2) == 13);
    CHECK(b2.holes(0) == 0);
    CHECK(b2.holes(12) == 1);
    CHECK(b2.holes(13) == 2);
}

TEST_CASE("hop sign") {
    // occupied {0, 2}: a*_1 a_2 passes mode 0 twice, a*_3 a_0 passes mode 2 once
    const Mask occ = Mask(0b101);
    CHECK(hop_sign(occ, 1, 2) == 1);
    CHECK(hop_sign(occ, 3, 0) == -1);
    CHECK(hop_sign(occ, 2, 0) == 0);
    CHECK(hop_sign(occ, 3, 1) == 0);
}

TEST_CASE("Hamiltonian matches the dense second-quantized oracle") {
    Tiny s;
    const auto w = ImpurityPotential::bounded_table({0, 1, 2, 4}, {0.8, 0.5, 0.1, 0}, "w");
    for (int n : {1, 2})
        for (double lambda : {0.0, 1.3}) {
            const FockBasis b(s.ball, {n, 1, 4, 2 * kPi}, PotentialSpec::yukawa(1), {2});
            const ImpurityPotential& wn = n == 2 ? w : ImpurityPotential::zero();
            const MicroHamiltonian H(b, lambda, wn);
            const FockState x = random_fock(b, 11 + n);
            const FockState y = H.apply(x), z = oracle_apply(b, lambda, wn, x);
            CAPTURE(n);
            CAPTURE(lambda);
            CHECK(distance(y, z) < 1e-12 * z.norm());
        }
}

TEST_CASE("Hermiticity") {
    MomentumLattice lat(2, 2 * kPi, 2.3);
    FermiBall ball(lat, 1);
    const auto w = ImpurityPotential::bounded_table({0, 1, 3}, {0.8, 0.5, 0}, "w");
    const FockBasis b(ball, {2, 2, 4, 2 * kPi}, PotentialSpec::yukawa(1), {2});
    const MicroHamiltonian H(b, 0.9, w);
    double worst = 0;
    for (int trial = 0; trial < 100; ++trial) {
        const FockState x = random_fock(b, 100 + 2 * trial), y = random_fock(b, 101 + 2 * trial);
        const cplx a = dot(x, H.apply(y)), c = dot(y, H.apply(x));
        worst = std::max(worst, std::abs(a - std::conj(c)) / std::abs(a));
    }
    CHECK(worst < 1e-10);
    CHECK(H.norm_bound() > 0);
}

TEST_CASE("sea states and the decoupled limit") {
    Tiny s;
    const ImpurityGrid g{2, 1, 4, 2 * kPi};
    const FockBasis b(s.ball, g, PotentialSpec::yukawa(1), {2});
    const ImpurityState xi = random_state(g, 2, 5);
    const FockState psi = fermi_sea_state(b, xi);
    CHECK(psi.norm() == doctest::Approx(1));
    CHECK(distance(project_holes(psi, 0), psi) == 0);
    CHECK(project_holes(psi, 1).norm() == 0);
    const ImpurityState back = sea_component(psi);
    for (std::size_t i = 0; i < g.size(); ++i) CHECK(back.amplitudes()[i] == xi.amplitudes()[i]);

    const auto w = ImpurityPotential::bounded_table({0, 1, 2, 4}, {0.8, 0.5, 0.1, 0}, "w");
    const EffectiveHamiltonian h0(g, 0, flat_table(1, 1), w);
    const MicroHamiltonian H0(b, 0, w);
    CHECK(H0.energy(psi) == doctest::Approx(h0.energy(xi)).epsilon(1e-12));
    CHECK(distance(H0.apply(psi), fermi_sea_state(b, h0.apply(xi))) < 1e-12);

    // with coupling, H (xi x Omega) - (h0 xi) x Omega has exactly one pair
    const MicroHamiltonian H(b, 1.1, w);
    CHECK(H.energy(psi) == doctest::Approx(h0.energy(xi)).epsilon(1e-12));
    FockState diff = H.apply(psi);
    const FockState sea = fermi_sea_state(b, h0.apply(xi));
    for (std::size_t i = 0; i < diff.amplitudes().size(); ++i) diff.amplitudes()[i] -= sea.amplitudes()[i];
    CHECK(diff.norm() > 0.01);
    CHECK(distance(project_holes(diff, 1), diff) < 1e-13);

    CHECK_THROWS_AS(fermi_sea_state(b, random_state({2, 1, 8, 2 * kPi}, 2, 5)), ConfigError);
}

TEST_CASE("propagation") {
    Tiny s;
    const ImpurityGrid g{2, 1, 4, 2 * kPi};
    const FockBasis b(s.ball, g, PotentialSpec::yukawa(1), {2});
    const auto w = ImpurityPotential::bounded_table({0, 1, 2, 4}, {0.8, 0.5, 0.1, 0}, "w");
    const ImpurityState xi = gaussian_state(g, {{0, 0, 0}, {3, 0, 0}}, 0.6);

    SUBCASE("zero coupling follows the effective dynamics") {
        const MicroHamiltonian H(b, 0, w);
        const EffectiveHamiltonian h(g, 0, flat_table(1, 1), w);
        EvolveOptions eo;
        eo.refine = true;
        eo.refine_tol = 1e-10;
        const auto pts = deficit_curve(H, h, xi, {0.25, 0.5}, {}, eo);
        for (const auto& p : pts) CHECK(p.deficit < 1e-7);
    }
    SUBCASE("norm, energy, identity at t = 0") {
        const MicroHamiltonian H(b, 1.2, w);
        const FockState psi = fermi_sea_state(b, xi);
        CHECK(distance(evolve_full(H, psi, 0), psi) == 0);
        KrylovStats st;
        const FockState out = evolve_full(H, psi, 0.8, {}, &st);
        CHECK(st.applies > 0);
        CHECK(out.norm() == doctest::Approx(1).epsilon(1e-10));
        CHECK(H.energy(out) == doctest::Approx(H.energy(psi)).epsilon(1e-8));
        // back and forth
        CHECK(distance(evolve_full(H, out, -0.8), psi) < 1e-8);
    }
    SUBCASE("Krylov step against a dense eigendecomposition of a 2x2 block") {
        // tiny basis with m_max = 0 and n = 1: each block is a single state
        const FockBasis b0(s.ball, {1, 1, 4, 2 * kPi}, PotentialSpec::yukawa(1), {0});
        const MicroHamiltonian H(b0, 1, ImpurityPotential::zero());
        const ImpurityState x = random_state(b0.grid(), 2, 3);
        const FockState psi = fermi_sea_state(b0, x);
        const FockState out = evolve_full(H, psi, 0.7);
        for (std::size_t K = 0; K < b0.blocks(); ++K) {
            const double p = ImpurityGrid::momentum(int(K), 4);
            CHECK(std::abs(out.block(K)[0] - psi.block(K)[0] * std::polar(1.0, -p * p * 0.7)) < 1e-12);
        }
    }
}

TEST_CASE("checkpoint round trip") {
    Tiny s;
    const FockBasis b(s.ball, {2, 1, 4, 2 * kPi}, PotentialSpec::yukawa(1), {2});
    const FockState x = random_fock(b, 3);
    x.save("fock_ckpt.bin");
    const FockState y = FockState::load(b, "fock_ckpt.bin");
    CHECK(distance(x, y) == 0);
    const FockBasis b1(s.ball, {2, 1, 4, 2 * kPi}, PotentialSpec::yukawa(1), {1});
    CHECK_THROWS_AS(FockState::load(b1, "fock_ckpt.bin"), ConfigError);
    std::remove("fock_ckpt.bin");
    std::remove("fock_ckpt.bin.json");
}

TEST_CASE("refusals") {
    Tiny s;
    CHECK_THROWS_AS(FockBasis(s.ball, {1, 1, 4, 4 * kPi}, PotentialSpec::yukawa(1)), ConfigError);
    CHECK_THROWS_AS(FockBasis(s.ball, {1, 1, 4, 2 * kPi}, PotentialSpec::yukawa(1), {4}), ConfigError);
    FockOptions tight;
    tight.max_states = 10;
    CHECK_THROWS_AS(FockBasis(s.ball, {1, 1, 4, 2 * kPi}, PotentialSpec::yukawa(1), tight), ResourceError);
    const FockBasis b(s.ball, {1, 1, 4, 2 * kPi}, PotentialSpec::yukawa(1), {1});
    CHECK_THROWS_AS(MicroHamiltonian(b, 1, ImpurityPotential::uncertified({0, 1}, {2, 0}, 0.3, "u")), ConfigError);
}

TEST_CASE("dropped weight tracks what a larger cutoff adds") {
    // deficits at cutoff 3 and 5 differ by roughly the weight the smaller space drops
    const double kF = 2, t = 0.4;
    const ImpurityGrid g{1, 1, 16, 2 * kPi};
    const ImpurityState xi = gaussian_state(g, {{0, 0, 0}}, 0.5);
    std::vector<double> r;
    for (int i = 0; i <= 10; ++i) r.push_back(kPi * i / 10 + 0.001 * i);
    double def[2], drop[2];
    int i = 0;
    for (double cut : {kF + 1, kF + 3}) {
        MomentumLattice lat(1, 2 * kPi, cut);
        FermiBall ball(lat, kF);
        const FockBasis b(ball, g, PotentialSpec::yukawa(1), {2});
        const MicroHamiltonian H(b, std::sqrt(kF), ImpurityPotential::zero());
        const EffectiveHamiltonian h(g, std::sqrt(kF), tabulate_lattice(LatticeW(1, 2 * kPi, kF, cut, PotentialSpec::yukawa(1),
                                                                               std::numeric_limits<double>::infinity()),
                                                                      PotentialSpec::yukawa(1), r));
        const auto p = deficit_curve(H, h, xi, {t});
        def[i] = p[0].deficit;
        drop[i] = p[0].dropped_weight;
        ++i;
    }
    MESSAGE("deficit " << def[0] << " -> " << def[1] << ", dropped " << drop[0] << " -> " << drop[1]);
    CHECK(drop[1] < drop[0]);
    CHECK(std::abs(def[1] - def[0]) < 3 * drop[0]);
}
