#include <doctest.h>

#include <cmath>
#include <limits>
#include <vector>

#include "fermipair/bounds.hpp"
#include "fermipair/quadrature.hpp"

using namespace fermipair;

namespace {
constexpr double kInf = std::numeric_limits<double>::infinity();
double yuk(double q) { return 1 / (q * q + 1); }
}  // namespace

TEST_CASE("zero profile gives zero sums") {
    MomentumLattice lat(1, 2 * kPi, 3);
    FermiBall ball(lat, 1);
    const auto z = PotentialSpec::zero();
    const Lemma2Sums s = lemma2_sums(ball, z);
    for (double x : s.value) CHECK(x == 0);
    for (double x : lemmaA1_sums(ball, z)) CHECK(x == 0);
}

TEST_CASE("transition sums by explicit pair enumeration") {
    MomentumLattice lat(1, 2 * kPi, 3);
    FermiBall ball(lat, 1);
    const std::vector<int> in{-1, 0, 1}, out{-3, -2, 2, 3};
    double e[4] = {0, 0, 0, 0};
    for (int l : out)
        for (int k : in) {
            const double q = l - k, v2 = yuk(q) * yuk(q), D = l * l - k * k + 1, Dp = D + q * q;
            e[0] += v2;
            e[1] += v2 / D;
            e[2] += v2 / (D * D);
            e[3] += v2 * q * q / (Dp * Dp);
        }
    const Lemma2Sums s = lemma2_sums(ball, PotentialSpec::yukawa(1), kInf);
    for (int i = 0; i < 4; ++i) {
        CAPTURE(i);
        CHECK(s.value[i] == doctest::Approx(e[i] / std::pow(2 * kPi, 2)).epsilon(1e-13));
        CHECK(s.tail[i] > 0);
    }
    CHECK(s.value[1] <= s.value[0]);
    CHECK(s.value[2] <= s.value[1]);
    CHECK_THROWS_WITH_AS(lemma2_sums(ball, PotentialSpec::yukawa(1), 1e-4), doctest::Contains("cutoff too small"),
                         ConfigError);
}

TEST_CASE("pair sums in d = 2 dominate termwise") {
    MomentumLattice lat(2, 4 * kPi, 5);
    FermiBall ball(lat, 2);
    const Lemma2Sums s = lemma2_sums(ball, PotentialSpec::yukawa(1), kInf);
    CHECK(s.value[1] <= s.value[0]);
    CHECK(s.value[2] <= s.value[1]);
}

TEST_CASE("nested sums by brute-force loops") {
    // d = 1, L = 2 pi, kF = 1, cutoff 2: ball {-1, 0, 1}, outside {-2, 2}
    MomentumLattice lat(1, 2 * kPi, 2);
    FermiBall ball(lat, 1);
    const std::vector<int> B{-1, 0, 1}, O{-2, 2};
    auto v = [](int a, int b) { return yuk(a - b); };
    auto den = [](int l, int k) { return double(l * l - k * k + 1); };
    const double L = 2 * kPi;
    double s5 = 0, s6 = 0, s7 = 0, s8 = 0, s9 = 0;
    for (int n : O)
        for (int k : B) {
            double in = 0;
            for (int l : O) in += v(l, k) * v(n, l) / den(l, k);
            s5 += std::pow(in / L, 2);
        }
    for (int l : O)
        for (int m : B) {
            double in = 0;
            for (int k : B) in += v(l, k) * v(m, k) / den(l, k);
            s6 += std::pow(in / L, 2);
        }
    for (int l : O)
        for (int k : B)
            for (int n : O) s7 += v(l, k) * v(n, k) * v(l, n) / (den(l, k) * den(n, k));
    for (int k : B)
        for (int m : B) {
            double in = 0;
            for (int l : O)
                for (int n : O) in += v(l, k) * v(n, m) * v(l, n) / (den(l, k) * den(n, m));
            s8 += std::pow(in / (L * L), 2);
        }
    for (int r : O)
        for (int l : O) {
            double in = 0;
            for (int n : O)
                for (int m : B) in += v(l, m) * v(n, m) * v(r, n) / (den(l, m) * den(n, m));
            s9 += std::pow(in / (L * L), 2);
        }
    s5 /= L * L;
    s6 /= L * L;
    s7 /= std::pow(L, 3);
    s8 /= L * L;
    s9 /= L * L;
    const auto s = lemmaA1_sums(ball, PotentialSpec::yukawa(1));
    const double e[5] = {s5, s6, s7, s8, s9};
    for (int i = 0; i < 5; ++i) {
        CAPTURE(i);
        CHECK(s[i] == doctest::Approx(e[i]).epsilon(1e-13));
    }
    CHECK_THROWS_AS(lemmaA1_sums(ball, PotentialSpec::yukawa(1), 3), ResourceError);
}

TEST_CASE("gamma") {
    const double l3 = std::pow(std::log(2.0), 3);
    CHECK(gamma(2, 2) == doctest::Approx(l3 / 2).epsilon(1e-14));
    CHECK(gamma(3, 2) == doctest::Approx(2 * l3).epsilon(1e-14));
    CHECK(gamma(1, 2) == doctest::Approx(l3 / 4).epsilon(1e-14));
    // the rounded figures quoted for these three cases
    CHECK(gamma(2, 2) == doctest::Approx(0.16647).epsilon(5e-4));
    CHECK(gamma(3, 2) == doctest::Approx(0.66588).epsilon(5e-4));
    CHECK(gamma(1, 2) == doctest::Approx(0.08324).epsilon(5e-4));
    CHECK_THROWS_AS(gamma(2, 1.5), ConfigError);
    CHECK(gamma(3, 16) == doctest::Approx(std::pow(16.0, 1) * std::pow(std::log(16.0), 3)));
}

TEST_CASE("big gamma") {
    for (int d : {1, 2, 3})
        for (double kF : {2.0, 5.0}) {
            const double lam = 0.7, lk = std::log(kF);
            const BigGamma g0 = big_gamma(d, kF, lam, 0);
            CHECK(g0.value == doctest::Approx(lam * std::pow(kF, (d - 3) / 2.0) * std::sqrt(lk) +
                                              lam * lam * std::pow(kF, d - 3) * lk)
                                  .epsilon(1e-14));
            CHECK(big_gamma(d, kF, 0, 3).value == 0);
            const BigGamma g = big_gamma(d, kF, -lam, 1.5);
            double sum = 0;
            for (double x : g.terms) sum += x;
            CHECK(g.value == doctest::Approx(sum));
            CHECK(g.value == doctest::Approx(big_gamma(d, kF, lam, -1.5).value));
        }
}

TEST_CASE("envelope wiring") {
    MomentumLattice lat(1, 2 * kPi, 5);
    FermiBall ball(lat, 2);
    const BoundReport r = bound_report(ball, PotentialSpec::yukawa(1), true, {true, true, true, true, true}, kInf);
    REQUIRE(r.sums.size() == 9);
    const double g = gamma(1, 2);
    CHECK(r.sums[0].envelope == doctest::Approx(1));
    CHECK(r.sums[1].envelope == doctest::Approx(0.5));
    CHECK(r.sums[2].envelope == doctest::Approx(std::log(2.0) / 4));
    CHECK(r.sums[3].envelope == doctest::Approx(std::pow(std::log(2.0), 2) / 4));
    for (int i = 4; i < 7; ++i) CHECK(r.sums[i].envelope == doctest::Approx(g));
    CHECK(r.sums[7].envelope == doctest::Approx(g * g));
    CHECK(r.sums[8].envelope == doctest::Approx(g * g));
    for (const auto& s : r.sums) CHECK(s.ratio == doctest::Approx(s.value / s.envelope));
    CHECK(r.sums[8].id == "9");
    const auto j = r.to_json();
    CHECK(j[8]["tail"].is_null());
    CHECK(j[8]["sum"] == "9");
    const BoundReport only = bound_report(ball, PotentialSpec::yukawa(1), false, {false, false, false, true, false}, kInf);
    REQUIRE(only.sums.size() == 1);
    CHECK(only.sums[0].id == "8");
}

TEST_CASE("elementary integrals against closed forms") {
    auto G = [](double x) { return x * std::log(x) - x; };
    for (auto [a, eps] : {std::pair{2.0, 0.1}, {10.0, 0.01}, {100.0, 0.001}}) {
        const ElementaryIntegrals r = elementary_integral_checks(a, eps);
        const double first = G(2 * a + eps) - 2 * G(a + eps) + G(eps);
        const double second = 2 * std::log(a + eps) - std::log(eps) - std::log(2 * a + eps);
        CHECK(r.first == doctest::Approx(first).epsilon(1e-9));
        CHECK(r.second == doctest::Approx(second).epsilon(1e-9));
        CHECK(r.first_bound == doctest::Approx(5 * a * std::log(3 * a) + eps * std::log(1 / eps)));
        CHECK(r.holds());
    }
    CHECK_THROWS_AS(elementary_integral_checks(1, 0.1), ConfigError);
    CHECK_THROWS_AS(elementary_integral_checks(2, 0.5), ConfigError);
}

TEST_CASE("J integrals in d = 1 against nested quadrature") {
    const double kF = 2;
    const auto js = appendix_J_integrals(1, kF, PotentialSpec::yukawa(1), 1e-8);
    auto find = [&](const std::string& id) {
        for (const auto& j : js)
            if (j.id == id) return j;
        FAIL("missing " << id);
        return JIntegral{};
    };
    QuadOptions o;
    o.rel_tol = 1e-10;
    // k in [-kF, kF], l in (-inf, -kF] u [kF, inf); the l tail beyond 400 is below 1e-9
    auto nested = [&](auto&& f) {
        return integrate(
                   [&](double k) {
                       auto g = [&](double l) { return f(l, k); };
                       return integrate(g, kF, kF + 400, o).value + integrate(g, -kF - 400, -kF, o).value;
                   },
                   -kF, kF, o)
            .value;
    };
    const double j1 = nested([](double l, double k) { return std::pow(1 + (l - k) * (l - k), -2); });
    const double j2 = nested([&](double l, double k) {
        const double v = yuk(l - k);
        return v * v / (std::abs(l) - std::abs(k) + 1 / kF);
    });
    CHECK(find("J1").value == doctest::Approx(j1).epsilon(1e-6));
    CHECK(find("J2").value == doctest::Approx(j2).epsilon(1e-6));
    CHECK(find("J1").envelope == 1);
    for (const auto& j : js) CHECK(j.ratio == doctest::Approx(j.value / j.envelope));
    CHECK_THROWS_AS(appendix_J_integrals(1, 1, PotentialSpec::yukawa(1)), ConfigError);
}
