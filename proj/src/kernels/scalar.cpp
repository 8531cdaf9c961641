#include "fermipair/kernels.hpp"

namespace fermipair::kernels {

void LensBall::push(int x, int y, int z) {
    zx.push_back(x);
    zy.push_back(y);
    zz.push_back(z);
    n2.push_back(double(x) * x + double(y) * y + double(z) * z);
    ++count;
}

void LensBall::finish() {
    while (zx.size() % 4 != 0) {
        zx.push_back(0);
        zy.push_back(0);
        zz.push_back(0);
        n2.push_back(-1e300);
    }
}

namespace {

LensMoments lens_moments_ref(const LensBall& b, const LensQuery& q) {
    LensMoments m;
    const double q2 = q.qx * q.qx + q.qy * q.qy + q.qz * q.qz;
    for (std::size_t i = 0; i < b.count; ++i) {
        const double kq = b.zx[i] * q.qx + b.zy[i] * q.qy + b.zz[i] * q.qz;
        const double nt2 = b.n2[i] + 2 * kq + q2;
        if (!(nt2 > q.zF2 && nt2 <= q.zc2)) continue;
        const double ib = 1.0 / (q.h2 * (2 * kq + q2) + 1.0);
        const double id = 1.0 / (q.h2 * (2 * kq + 2 * q2) + 1.0);
        m.count += 1;
        m.inv_b += ib;
        m.inv_b2 += ib * ib;
        m.inv_d += id;
        m.inv_d2 += id * id;
    }
    return m;
}

void cmul_ref(cplx* a, const cplx* b, std::size_t n) {
    for (std::size_t i = 0; i < n; ++i) {
        const double re = a[i].real() * b[i].real() - a[i].imag() * b[i].imag();
        const double im = a[i].real() * b[i].imag() + a[i].imag() * b[i].real();
        a[i] = {re, im};
    }
}

void caxpy_ref(cplx alpha, const cplx* x, cplx* y, std::size_t n) {
    for (std::size_t i = 0; i < n; ++i) {
        const double re = alpha.real() * x[i].real() - alpha.imag() * x[i].imag();
        const double im = alpha.real() * x[i].imag() + alpha.imag() * x[i].real();
        y[i] += cplx(re, im);
    }
}

void raxpy_ref(double alpha, const cplx* x, cplx* y, std::size_t n) {
    for (std::size_t i = 0; i < n; ++i) y[i] += alpha * x[i];
}

cplx cdot_ref(const cplx* x, const cplx* y, std::size_t n) {
    double re = 0, im = 0;
    for (std::size_t i = 0; i < n; ++i) {
        re += x[i].real() * y[i].real() + x[i].imag() * y[i].imag();
        im += x[i].real() * y[i].imag() - x[i].imag() * y[i].real();
    }
    return {re, im};
}

double norm2_ref(const cplx* x, std::size_t n) {
    double s = 0;
    for (std::size_t i = 0; i < n; ++i) s += x[i].real() * x[i].real() + x[i].imag() * x[i].imag();
    return s;
}

const KernelTable kScalar{"scalar", lens_moments_ref, cmul_ref, caxpy_ref, raxpy_ref, cdot_ref, norm2_ref};

}  // namespace

const KernelTable& scalar() { return kScalar; }

}  // namespace fermipair::kernels
