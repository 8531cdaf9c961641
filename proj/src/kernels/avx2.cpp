// Compiled with -mavx2 -mfma; only reached through the dispatch table after a
// cpuid check.
#include <immintrin.h>

#include "fermipair/kernels.hpp"

namespace fermipair::kernels {
namespace {

inline double hsum(__m256d v) {
    __m128d lo = _mm256_castpd256_pd128(v);
    __m128d hi = _mm256_extractf128_pd(v, 1);
    lo = _mm_add_pd(lo, hi);
    return _mm_cvtsd_f64(_mm_add_sd(lo, _mm_unpackhi_pd(lo, lo)));
}

LensMoments lens_moments_avx2(const LensBall& b, const LensQuery& q) {
    const double q2s = q.qx * q.qx + q.qy * q.qy + q.qz * q.qz;
    const __m256d qx = _mm256_set1_pd(q.qx), qy = _mm256_set1_pd(q.qy), qz = _mm256_set1_pd(q.qz);
    const __m256d q2 = _mm256_set1_pd(q2s), q22 = _mm256_set1_pd(2 * q2s);
    const __m256d zF2 = _mm256_set1_pd(q.zF2), zc2 = _mm256_set1_pd(q.zc2);
    const __m256d h2 = _mm256_set1_pd(q.h2), one = _mm256_set1_pd(1.0), two = _mm256_set1_pd(2.0);
    __m256d cnt = _mm256_setzero_pd(), sb = cnt, sb2 = cnt, sd = cnt, sd2 = cnt;
    const std::size_t n = b.zx.size();
    for (std::size_t i = 0; i < n; i += 4) {
        const __m256d x = _mm256_loadu_pd(&b.zx[i]);
        const __m256d y = _mm256_loadu_pd(&b.zy[i]);
        const __m256d z = _mm256_loadu_pd(&b.zz[i]);
        const __m256d n2 = _mm256_loadu_pd(&b.n2[i]);
        __m256d kq = _mm256_mul_pd(x, qx);
        kq = _mm256_fmadd_pd(y, qy, kq);
        kq = _mm256_fmadd_pd(z, qz, kq);
        const __m256d kq2 = _mm256_mul_pd(two, kq);
        const __m256d nt2 = _mm256_add_pd(_mm256_add_pd(n2, kq2), q2);
        const __m256d mask = _mm256_and_pd(_mm256_cmp_pd(nt2, zF2, _CMP_GT_OQ), _mm256_cmp_pd(nt2, zc2, _CMP_LE_OQ));
        if (_mm256_movemask_pd(mask) == 0) continue;
        const __m256d db = _mm256_fmadd_pd(h2, _mm256_add_pd(kq2, q2), one);
        const __m256d dd = _mm256_fmadd_pd(h2, _mm256_add_pd(kq2, q22), one);
        const __m256d ib = _mm256_and_pd(_mm256_div_pd(one, db), mask);
        const __m256d id = _mm256_and_pd(_mm256_div_pd(one, dd), mask);
        cnt = _mm256_add_pd(cnt, _mm256_and_pd(one, mask));
        sb = _mm256_add_pd(sb, ib);
        sb2 = _mm256_fmadd_pd(ib, ib, sb2);
        sd = _mm256_add_pd(sd, id);
        sd2 = _mm256_fmadd_pd(id, id, sd2);
    }
    return {hsum(cnt), hsum(sb), hsum(sb2), hsum(sd), hsum(sd2)};
}

// Two complex numbers per register, interleaved re/im.
inline __m256d cmul2(__m256d a, __m256d b) {
    const __m256d bre = _mm256_movedup_pd(b);
    const __m256d bim = _mm256_permute_pd(b, 0xF);
    const __m256d asw = _mm256_permute_pd(a, 0x5);
    return _mm256_fmaddsub_pd(a, bre, _mm256_mul_pd(asw, bim));
}

void cmul_avx2(cplx* a, const cplx* b, std::size_t n) {
    double* pa = reinterpret_cast<double*>(a);
    const double* pb = reinterpret_cast<const double*>(b);
    std::size_t i = 0;
    for (; i + 2 <= n; i += 2) {
        const __m256d va = _mm256_loadu_pd(pa + 2 * i);
        const __m256d vb = _mm256_loadu_pd(pb + 2 * i);
        _mm256_storeu_pd(pa + 2 * i, cmul2(va, vb));
    }
    for (; i < n; ++i) a[i] *= b[i];
}

void caxpy_avx2(cplx alpha, const cplx* x, cplx* y, std::size_t n) {
    const double* px = reinterpret_cast<const double*>(x);
    double* py = reinterpret_cast<double*>(y);
    const __m256d are = _mm256_set1_pd(alpha.real()), aim = _mm256_set1_pd(alpha.imag());
    std::size_t i = 0;
    for (; i + 2 <= n; i += 2) {
        const __m256d vx = _mm256_loadu_pd(px + 2 * i);
        const __m256d sw = _mm256_permute_pd(vx, 0x5);
        const __m256d prod = _mm256_fmaddsub_pd(vx, are, _mm256_mul_pd(sw, aim));
        _mm256_storeu_pd(py + 2 * i, _mm256_add_pd(_mm256_loadu_pd(py + 2 * i), prod));
    }
    for (; i < n; ++i) y[i] += alpha * x[i];
}

void raxpy_avx2(double alpha, const cplx* x, cplx* y, std::size_t n) {
    const double* px = reinterpret_cast<const double*>(x);
    double* py = reinterpret_cast<double*>(y);
    const __m256d va = _mm256_set1_pd(alpha);
    const std::size_t m = 2 * n;
    std::size_t i = 0;
    for (; i + 4 <= m; i += 4)
        _mm256_storeu_pd(py + i, _mm256_fmadd_pd(va, _mm256_loadu_pd(px + i), _mm256_loadu_pd(py + i)));
    for (; i < m; ++i) py[i] += alpha * px[i];
}

cplx cdot_avx2(const cplx* x, const cplx* y, std::size_t n) {
    const double* px = reinterpret_cast<const double*>(x);
    const double* py = reinterpret_cast<const double*>(y);
    __m256d same = _mm256_setzero_pd(), cross = same;
    std::size_t i = 0;
    for (; i + 2 <= n; i += 2) {
        const __m256d vx = _mm256_loadu_pd(px + 2 * i);
        const __m256d vy = _mm256_loadu_pd(py + 2 * i);
        same = _mm256_fmadd_pd(vx, vy, same);
        cross = _mm256_fmadd_pd(_mm256_permute_pd(vx, 0x5), vy, cross);
    }
    alignas(32) double c[4];
    _mm256_store_pd(c, cross);
    double re = hsum(same);
    double im = (c[1] - c[0]) + (c[3] - c[2]);
    for (; i < n; ++i) {
        re += x[i].real() * y[i].real() + x[i].imag() * y[i].imag();
        im += x[i].real() * y[i].imag() - x[i].imag() * y[i].real();
    }
    return {re, im};
}

double norm2_avx2(const cplx* x, std::size_t n) {
    const double* px = reinterpret_cast<const double*>(x);
    const std::size_t m = 2 * n;
    __m256d acc = _mm256_setzero_pd();
    std::size_t i = 0;
    for (; i + 4 <= m; i += 4) {
        const __m256d v = _mm256_loadu_pd(px + i);
        acc = _mm256_fmadd_pd(v, v, acc);
    }
    double s = hsum(acc);
    for (; i < m; ++i) s += px[i] * px[i];
    return s;
}

}  // namespace

extern const KernelTable kAvx2Table;
const KernelTable kAvx2Table{"avx2", lens_moments_avx2, cmul_avx2, caxpy_avx2, raxpy_avx2, cdot_avx2, norm2_avx2};

}  // namespace fermipair::kernels
