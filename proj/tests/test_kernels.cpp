#include <doctest.h>

#include <random>

#include "fermipair/kernels.hpp"

using namespace fermipair::kernels;

namespace {

std::vector<cplx> random_vec(std::size_t n, std::mt19937_64& rng) {
    std::normal_distribution<double> g;
    std::vector<cplx> v(n);
    for (auto& z : v) z = {g(rng), g(rng)};
    return v;
}

double rel(double a, double b) { return std::abs(a - b) / std::max(1e-300, std::max(std::abs(a), std::abs(b))); }

}  // namespace

TEST_CASE("avx2 kernels match the scalar reference") {
    const KernelTable* v = avx2();
    if (!v) {
        MESSAGE("no AVX2 on this CPU, nothing to compare");
        return;
    }
    const KernelTable& s = scalar();
    std::mt19937_64 rng(7);
    // odd lengths exercise the remainder loops
    for (std::size_t n : {0u, 1u, 3u, 4u, 5u, 17u, 1000u, 1003u}) {
        CAPTURE(n);
        auto x = random_vec(n, rng), y = random_vec(n, rng);
        const cplx alpha(0.3, -1.7);

        auto a1 = y, a2 = y;
        s.caxpy(alpha, x.data(), a1.data(), n);
        v->caxpy(alpha, x.data(), a2.data(), n);
        for (std::size_t i = 0; i < n; ++i) CHECK(std::abs(a1[i] - a2[i]) <= 1e-14 * (1 + std::abs(a1[i])));

        auto r1 = y, r2 = y;
        s.raxpy(-0.75, x.data(), r1.data(), n);
        v->raxpy(-0.75, x.data(), r2.data(), n);
        for (std::size_t i = 0; i < n; ++i) CHECK(std::abs(r1[i] - r2[i]) <= 1e-14 * (1 + std::abs(r1[i])));

        auto m1 = y, m2 = y;
        s.cmul(m1.data(), x.data(), n);
        v->cmul(m2.data(), x.data(), n);
        for (std::size_t i = 0; i < n; ++i) CHECK(std::abs(m1[i] - m2[i]) <= 1e-14 * (1 + std::abs(m1[i])));

        const cplx d1 = s.cdot(x.data(), y.data(), n), d2 = v->cdot(x.data(), y.data(), n);
        CHECK(std::abs(d1 - d2) <= 1e-12 * (1 + std::sqrt(double(n))));
        CHECK(rel(s.norm2(x.data(), n), v->norm2(x.data(), n)) < 1e-13);
    }
}

TEST_CASE("lens moments agree between kernels and with a direct loop") {
    LensBall ball;
    const int r = 9;
    for (int x = -r; x <= r; ++x)
        for (int y = -r; y <= r; ++y)
            if (x * x + y * y <= r * r) ball.push(x, y, 0);
    ball.finish();
    CHECK(ball.zx.size() % 4 == 0);
    for (int qx : {1, 3, 7, 20}) {
        LensQuery q;
        q.qx = qx;
        q.qy = 2;
        q.zF2 = r * r;
        q.zc2 = 4 * r * r;
        q.h2 = 0.25;
        const LensMoments a = scalar().lens_moments(ball, q);
        // direct oracle without any SoA layout
        double count = 0, ib = 0, ib2 = 0, id = 0, id2 = 0;
        for (int x = -r; x <= r; ++x)
            for (int y = -r; y <= r; ++y) {
                if (x * x + y * y > r * r) continue;
                const int lx = x + qx, ly = y + 2;
                const int n2 = lx * lx + ly * ly;
                if (n2 <= r * r || n2 > 4 * r * r) continue;
                const double kq = x * qx + y * 2.0, q2 = qx * qx + 4.0;
                count += 1;
                ib += 1 / (0.25 * (2 * kq + q2) + 1);
                ib2 += std::pow(0.25 * (2 * kq + q2) + 1, -2);
                id += 1 / (0.25 * (2 * kq + 2 * q2) + 1);
                id2 += std::pow(0.25 * (2 * kq + 2 * q2) + 1, -2);
            }
        CHECK(a.count == count);
        CHECK(a.inv_b == doctest::Approx(ib).epsilon(1e-13));
        CHECK(a.inv_b2 == doctest::Approx(ib2).epsilon(1e-13));
        CHECK(a.inv_d == doctest::Approx(id).epsilon(1e-13));
        CHECK(a.inv_d2 == doctest::Approx(id2).epsilon(1e-13));
        if (const KernelTable* v = avx2()) {
            const LensMoments b = v->lens_moments(ball, q);
            CHECK(b.count == a.count);
            CHECK(b.inv_b == doctest::Approx(a.inv_b).epsilon(1e-13));
            CHECK(b.inv_b2 == doctest::Approx(a.inv_b2).epsilon(1e-13));
            CHECK(b.inv_d == doctest::Approx(a.inv_d).epsilon(1e-13));
            CHECK(b.inv_d2 == doctest::Approx(a.inv_d2).epsilon(1e-13));
        }
    }
}
