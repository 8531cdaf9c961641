#pragma once

// Hot inner loops with a portable reference and an AVX2 variant. The variant is
// picked once at startup from cpuid; FERMIPAIR_SIMD=scalar forces the reference.

#include <complex>
#include <cstddef>
#include <vector>

namespace fermipair::kernels {

using cplx = std::complex<double>;

// Fermi-ball members in integer lattice units, structure of arrays, padded to a
// multiple of 4. Padding lanes carry n2 = -1e300 so they never pass the mask.
struct LensBall {
    std::vector<double> zx, zy, zz, n2;
    std::size_t count = 0;

    void push(int x, int y, int z);
    void finish();
};

// Shell test for member k and transfer q (integer units):
//   zF2 < |k+q|^2 <= zc2
// den_b = h2*(2 k.q + |q|^2) + 1, den_d = h2*(2 k.q + 2|q|^2) + 1.
struct LensQuery {
    double qx = 0, qy = 0, qz = 0;
    double zF2 = 0, zc2 = 0;
    double h2 = 1;
};

struct LensMoments {
    double count = 0;
    double inv_b = 0, inv_b2 = 0;
    double inv_d = 0, inv_d2 = 0;
};

struct KernelTable {
    const char* name;
    LensMoments (*lens_moments)(const LensBall&, const LensQuery&);
    void (*cmul)(cplx* a, const cplx* b, std::size_t n);
    void (*caxpy)(cplx alpha, const cplx* x, cplx* y, std::size_t n);
    void (*raxpy)(double alpha, const cplx* x, cplx* y, std::size_t n);
    cplx (*cdot)(const cplx* x, const cplx* y, std::size_t n);
    double (*norm2)(const cplx* x, std::size_t n);
};

const KernelTable& scalar();
// nullptr when the CPU lacks AVX2/FMA.
const KernelTable* avx2();
const KernelTable& active();

}  // namespace fermipair::kernels
