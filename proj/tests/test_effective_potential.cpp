#include <doctest.h>

#include <cmath>
#include <cstdio>
#include <limits>

#include "fermipair/effective_potential.hpp"

using namespace fermipair;

namespace {
constexpr double kInf = std::numeric_limits<double>::infinity();
}

TEST_CASE("zero profile gives zero W") {
    const auto z = PotentialSpec::zero();
    CHECK(W_quadrature(0.0, 2, 1, z).value == 0);
    CHECK(LatticeW(2, 2 * kPi, 2, 4, z, kInf)(0.3) == 0);
}

TEST_CASE("d = 1 golden value by explicit enumeration") {
    // L = 2 pi, kF = 1, cutoff 3: holes {-1, 0, 1}, particles {+-2, +-3}
    const auto v = [](double q) { return 1 / (q * q + 1); };
    const int holes[] = {-1, 0, 1}, parts[] = {-3, -2, 2, 3};
    for (double r : {0.0, 0.7, 2.0}) {
        double expect = 0;
        for (int k : holes)
            for (int l : parts) {
                const double q = l - k;
                expect += v(q) * v(q) * std::cos(q * r) / (l * l - k * k + q * q + 1);
            }
        expect /= std::pow(2 * kPi, 2);
        const LatticeW W(1, 2 * kPi, 1, 3, PotentialSpec::yukawa(1), kInf);
        CAPTURE(r);
        CHECK(W(r) == doctest::Approx(expect).epsilon(1e-13));
        CHECK(W_lattice_brute({r, 0, 0}, 1, 2 * kPi, 1, PotentialSpec::yukawa(1), 3).re ==
              doctest::Approx(expect).epsilon(1e-13));
    }
}

TEST_CASE("orbit-grouped sum matches the direct double loop") {
    const auto spec = PotentialSpec::yukawa(1);
    for (int d : {1, 2, 3}) {
        const double L = d == 3 ? 2 * kPi : 4 * kPi, kF = 1.6, cutoff = 3.3;
        const LatticeW W(d, L, kF, cutoff, spec, kInf);
        for (Vec3 x : {Vec3{0, 0, 0}, Vec3{0.9, 0, 0}, Vec3{0.4, -1.3, 0.6}}) {
            const ComplexW b = W_lattice_brute(x, kF, L, d, spec, cutoff);
            CAPTURE(d);
            CHECK(W.at(x) == doctest::Approx(b.re).epsilon(1e-12));
            CHECK(std::abs(b.im) < 1e-14 * std::abs(b.re) + 1e-18);
        }
        CHECK(W(0.9) == doctest::Approx(W.at({0.9, 0, 0})).epsilon(1e-12));
        CHECK(W.at_zero() == doctest::Approx(W(0)).epsilon(1e-12));
    }
}

TEST_CASE("W is positive definite in shape: W(0) > 0 and |W(r)| <= W(0)") {
    for (int d : {1, 2, 3}) {
        const double w0 = W_quadrature(0, 2, d, PotentialSpec::yukawa(1)).value;
        CHECK(w0 > 0);
        for (double r : {0.2, 0.8, 2.5, 6.0}) CHECK(std::abs(W_quadrature(r, 2, d, PotentialSpec::yukawa(1)).value) <= w0);
    }
}

TEST_CASE("lattice sum approaches the continuum as L grows") {
    // d = 2: the discretisation error is a surface effect and drops with h = 2 pi / L
    const auto spec = PotentialSpec::step();
    const double kF = 2;
    const double exact = W_quadrature(0.5, kF, 2, spec, {1e-9}).value;
    double prev = kInf;
    for (double L : {4 * kPi, 8 * kPi, 16 * kPi}) {
        const double err = std::abs(LatticeW(2, L, kF, kF + 1, spec, kInf)(0.5) / exact - 1);
        CAPTURE(L);
        CHECK(err < prev);
        prev = err;
    }
    CHECK(prev < 0.03);
}

TEST_CASE("transfer window splits W") {
    const auto spec = PotentialSpec::yukawa(1);
    const double full = W_quadrature(0.3, 2, 2, spec, {1e-9}).value;
    WOptions lo{1e-9, 0, 1.5}, hi{1e-9, 1.5, kInf};
    lo.scale = hi.scale = full;
    CHECK(W_quadrature(0.3, 2, 2, spec, lo).value + W_quadrature(0.3, 2, 2, spec, hi).value ==
          doctest::Approx(full).epsilon(1e-7));
}

TEST_CASE("truncated cutoff is refused") {
    CHECK_THROWS_AS(LatticeW(1, 2 * kPi, 2, 3, PotentialSpec::yukawa(1), 1e-6), ConfigError);
    CHECK_THROWS_AS(LatticeW(1, 2 * kPi, 2, 1.5, PotentialSpec::yukawa(1), kInf), ConfigError);
}

TEST_CASE("tables: scaling, interpolation, CSV round trip") {
    const auto spec = PotentialSpec::yukawa(1);
    const std::vector<double> r{0, 0.5, 1, 1.5, 2};
    const PotentialTable t = tabulate_quadrature(1, 4, spec, r);
    CHECK(t.raw_at(0.5) == doctest::Approx(W_quadrature(0.5, 4, 1, spec).value).epsilon(1e-5));
    CHECK(t.scaled_at(0.5) == doctest::Approx(4 * t.raw_at(0.5)));
    CHECK(t.scaled_at(0.75) == doctest::Approx(0.5 * (t.scaled[1] + t.scaled[2])));
    CHECK(t.scaled_at(-0.5) == t.scaled_at(0.5));
    CHECK_THROWS_WITH_AS(t.scaled_at(2.5), doctest::Contains("potential table incomplete"), ConfigError);

    const std::string path = "table_roundtrip.csv";
    t.write_csv(path);
    const PotentialTable u = PotentialTable::read_csv(path);
    std::remove(path.c_str());
    CHECK(u.d == 1);
    CHECK(u.kF == 4);
    CHECK(u.method == "quadrature");
    REQUIRE(u.r.size() == r.size());
    for (std::size_t i = 0; i < r.size(); ++i) CHECK(u.scaled[i] == doctest::Approx(t.scaled[i]).epsilon(1e-14));
}

TEST_CASE("scan report") {
    const Lemma1Report rep = lemma1_scan({2, 4}, 2, PotentialSpec::step(), 3, 7);
    CHECK(rep.rows.size() == 2);
    CHECK(rep.r.size() == 7);
    CHECK(rep.core_ok);
    CHECK(rep.c_probe > 0);
    CHECK(rep.sup_ratio() >= 1);
    const Lemma1Report z = lemma1_scan({2}, 1, PotentialSpec::zero(), 3, 4);
    CHECK_FALSE(z.core_ok);
    for (double s : z.rows[0].scaled) CHECK(s == 0);
}
