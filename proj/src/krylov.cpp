#include <cmath>

#include <Eigen/Eigenvalues>

#include "fermipair/error.hpp"
#include "fermipair/fock.hpp"
#include "fermipair/kernels.hpp"

namespace fermipair {

KrylovStats krylov_expm(const MicroHamiltonian& H, std::size_t K, cplx* x, double t, const KrylovOptions& opt) {
    KrylovStats st;
    const std::size_t n = H.basis().block_dim();
    const auto& kern = kernels::active();
    const int mmax = std::max(2, opt.dim);
    std::vector<std::vector<cplx>> V(mmax + 1, std::vector<cplx>(n));
    std::vector<double> alpha(mmax), beta(mmax);

    double remaining = std::abs(t);
    const double sgn = t < 0 ? -1.0 : 1.0;
    double tau = remaining;
    while (remaining > 0) {
        const double beta0 = std::sqrt(kern.norm2(x, n));
        if (beta0 == 0) return st;
        for (std::size_t i = 0; i < n; ++i) V[0][i] = x[i] / beta0;
        int m = 0;
        bool exhausted = false;
        for (int j = 0; j < mmax; ++j) {
            std::vector<cplx>& w = V[j + 1];
            H.apply_block(K, V[j].data(), w.data());
            ++st.applies;
            alpha[j] = kern.cdot(V[j].data(), w.data(), n).real();
            // two passes of Gram-Schmidt against the whole basis
            for (int pass = 0; pass < 2; ++pass)
                for (int i = 0; i <= j; ++i) {
                    const cplx c = kern.cdot(V[i].data(), w.data(), n);
                    kern.caxpy(-c, V[i].data(), w.data(), n);
                }
            beta[j] = std::sqrt(kern.norm2(w.data(), n));
            m = j + 1;
            if (beta[j] < 1e-12 * (std::abs(alpha[j]) + 1)) {
                exhausted = true;
                break;
            }
            const double inv = 1 / beta[j];
            for (auto& z : w) z *= inv;
        }
        Eigen::VectorXd diag(m), off(std::max(m - 1, 0));
        for (int j = 0; j < m; ++j) diag[j] = alpha[j];
        for (int j = 0; j + 1 < m; ++j) off[j] = beta[j];
        Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es;
        es.computeFromTridiagonal(diag, off, Eigen::ComputeEigenvectors);
        const Eigen::MatrixXd& Q = es.eigenvectors();
        const Eigen::VectorXd& ev = es.eigenvalues();

        tau = std::min(tau, remaining);
        Eigen::VectorXcd c(m);
        for (;;) {
            Eigen::VectorXcd y(m);
            for (int k = 0; k < m; ++k) y[k] = std::exp(cplx(0, -sgn * ev[k] * tau)) * Q(0, k);
            c = Q * y;
            const double err = exhausted ? 0.0 : beta0 * beta[m - 1] * std::abs(c[m - 1]);
            if (err <= opt.tol * tau / std::abs(t) || err <= 1e-15 * beta0) break;
            ++st.rejections;
            tau *= 0.5;
            if (tau < opt.min_step) throw NumericalError("propagation stalled");
        }
        std::fill(x, x + n, cplx(0));
        for (int k = 0; k < m; ++k) kern.caxpy(beta0 * c[k], V[k].data(), x, n);
        remaining -= tau;
        if (remaining < 1e-14 * std::abs(t)) remaining = 0;
        ++st.steps;
        // try a longer step next time if this one went through untouched
        tau *= 1.5;
    }
    return st;
}

}  // namespace fermipair
