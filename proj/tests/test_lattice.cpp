#include <doctest.h>

#include <set>

#include "fermipair/error.hpp"
#include "fermipair/lattice.hpp"

using namespace fermipair;

namespace {

// brute-force count of integer vectors with |z| <= r in d dimensions
std::size_t integer_ball(int d, int r2) {
    std::size_t n = 0;
    const int r = 10;
    for (int x = -r; x <= r; ++x)
        for (int y = (d >= 2 ? -r : 0); y <= (d >= 2 ? r : 0); ++y)
            for (int z = (d >= 3 ? -r : 0); z <= (d >= 3 ? r : 0); ++z)
                if (x * x + y * y + z * z <= r2) ++n;
    return n;
}

}  // namespace

TEST_CASE("mode counts") {
    CHECK(MomentumLattice(1, 2 * kPi, 1).size() == 3);
    CHECK(MomentumLattice(2, 2 * kPi, 1).size() == 5);
    CHECK(MomentumLattice(3, 2 * kPi, 2).size() == integer_ball(3, 4));
    CHECK(integer_ball(3, 4) == 33);
    // spacing 1/2: radius 1.5 is |z| <= 3
    CHECK(MomentumLattice(2, 4 * kPi, 1.5).size() == integer_ball(2, 9));
}

TEST_CASE("lexicographic order and lookup") {
    const MomentumLattice lat(2, 2 * kPi, 2);
    for (std::size_t i = 1; i < lat.size(); ++i) CHECK(lat.mode(i - 1) < lat.mode(i));
    for (std::size_t i = 0; i < lat.size(); ++i) {
        const auto j = lat.find(lat.mode(i));
        REQUIRE(j);
        CHECK(*j == i);
    }
    CHECK_FALSE(lat.find({3, 0, 0}));
    CHECK_FALSE(lat.find({2, 1, 0}));
    CHECK(lat.energy(*lat.find({1, 1, 0})) == doctest::Approx(2));
}

TEST_CASE("Fermi ball") {
    const MomentumLattice l1(1, 2 * kPi, 3), l2(2, 2 * kPi, 3), l3(3, 2 * kPi, 3);
    const FermiBall b1(l1, 1), b2(l2, 1), b3(l3, 1);
    CHECK(b1.particle_number() == 3);
    CHECK(b2.particle_number() == 5);
    CHECK(b1.free_energy() == doctest::Approx(2));
    CHECK(b2.free_energy() == doctest::Approx(4));
    CHECK(b3.free_energy() == doctest::Approx(6));
    CHECK(b2.members().size() + b2.outside().size() == l2.size());
    for (std::size_t i : b2.members()) CHECK(b2.contains(i));
    for (std::size_t i : b2.outside()) CHECK_FALSE(b2.contains(i));

    // density against V_2 kF^2 = 1/(4 pi)
    const double L = 40 * kPi;
    const MomentumLattice big(2, L, 1.2);
    const FermiBall fb(big, 1);
    CHECK(double(fb.particle_number()) / (L * L) == doctest::Approx(1 / (4 * kPi)).epsilon(0.05));

    CHECK_THROWS_AS(FermiBall(l1, 4), ConfigError);
}

TEST_CASE("excitation pairs") {
    const MomentumLattice l1(1, 2 * kPi, 2), l2(2, 2 * kPi, 2);
    const FermiBall b1(l1, 1), b2(l2, 1);
    const ExcitationPairs p1(b1), p2(b2);
    CHECK(p1.size() == 6);
    CHECK(p2.size() == (integer_ball(2, 4) - 5) * 5);
    CHECK(p2.size() == 40);
    std::size_t n = 0;
    std::set<std::pair<std::size_t, std::size_t>> seen;
    for (const auto& e : p2) {
        CHECK_FALSE(b2.contains(e.particle));
        CHECK(b2.contains(e.hole));
        seen.insert({e.particle, e.hole});
        ++n;
    }
    CHECK(n == 40);
    CHECK(seen.size() == 40);

    const MomentumLattice tight(2, 2 * kPi, 1);
    const FermiBall bt(tight, 1);
    const ExcitationPairs pt(bt);
    CHECK(pt.begin() == pt.end());
}

TEST_CASE("resource cap") {
    CHECK_THROWS_AS(MomentumLattice(3, 200 * kPi, 10, 1000), ResourceError);
}
