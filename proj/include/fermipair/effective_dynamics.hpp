#pragma once

#include <complex>
#include <cstdint>
#include <functional>
#include <memory>
#include <string>
#include <vector>

#include "fermipair/effective_potential.hpp"
#include "fermipair/lattice.hpp"
#include "fermipair/potentials.hpp"

namespace fermipair {

using cplx = std::complex<double>;

// n impurities on a periodic box of side L, M momentum modes per axis.
// Index j in [0, M) carries the integer momentum j for j < M/2 and j - M
// otherwise; impurity 0 is the slowest index, axes run fastest inside an
// impurity. xi(y) = L^{-nd/2} sum_p c_p exp(i p.y).
struct ImpurityGrid {
    int n = 1, d = 1, M = 16;
    double L = 2 * kPi;

    std::size_t per_impurity() const;
    std::size_t size() const;
    double spacing() const { return 2 * kPi / L; }
    static int momentum(int j, int M) { return j < M / 2 ? j : j - M; }
    static int index(int m, int M) { return ((m % M) + M) % M; }
    void validate() const;
};

class ImpurityState {
public:
    ImpurityState() = default;
    explicit ImpurityState(const ImpurityGrid& g) : grid_(g), c_(g.size()) {}

    const ImpurityGrid& grid() const { return grid_; }
    std::vector<cplx>& amplitudes() { return c_; }
    const std::vector<cplx>& amplitudes() const { return c_; }
    double norm() const;
    void normalize();

private:
    ImpurityGrid grid_;
    std::vector<cplx> c_;
};

// prod_i exp(-|y_i - c_i|^2 / (4 sigma^2) + i kbar_i . y_i), minimal image,
// normalized; |xi|^2 has standard deviation sigma per axis.
ImpurityState gaussian_state(const ImpurityGrid& g, const std::vector<Vec3>& centers, double sigma,
                             const std::vector<Vec3>& kbar = {});
// Gaussian random amplitudes on every impurity momentum with |p_i| <= pcut.
ImpurityState random_state(const ImpurityGrid& g, double pcut, std::uint64_t seed);

// Position-space samples xi(y_j), y_j = j L / M, normalized so that
// sum_j |psi_j|^2 (L/M)^{nd} = ||xi||^2.
std::vector<cplx> to_position(const ImpurityState& s);
ImpurityState from_position(const ImpurityGrid& g, const std::vector<cplx>& psi);

double kinetic_functional(const ImpurityState& s);
double energy_shift(const FermiBall& ball, double lambda, int n, const PotentialSpec& spec);

enum class EffectiveVariant { h_n, h_tilde };

class EffectiveHamiltonian {
public:
    // W is read from the table (scaled values) at minimal-image distances.
    EffectiveHamiltonian(const ImpurityGrid& g, double lambda, const PotentialTable& W,
                         const ImpurityPotential& w = ImpurityPotential::zero(),
                         EffectiveVariant variant = EffectiveVariant::h_n);

    const ImpurityGrid& grid() const { return grid_; }
    EffectiveVariant variant() const { return variant_; }
    double lambda() const { return lambda_; }
    const std::vector<double>& kinetic() const { return kinetic_; }
    // position grid values of the pair terms, without the constant
    const std::vector<double>& pair_terms() const { return pair_; }
    double constant() const { return constant_; }
    // w(r) - lambda^2 W(r) (h_n) or w(r) (h_tilde) at the minimal-image
    // separation of grid offset delta
    double pair_function(const std::array<int, 3>& delta) const;
    double max_kinetic() const;

    ImpurityState apply(const ImpurityState& s) const;
    double energy(const ImpurityState& s) const;

private:
    ImpurityGrid grid_;
    EffectiveVariant variant_;
    double lambda_, constant_ = 0;
    std::vector<double> kinetic_, pair_, pairfun_;
};

struct Observables {
    double t = 0, norm = 0, energy = 0, q = 0;
    double pair_mean = 0, pair_sq = 0;  // <|y1 - y2|>, <|y1 - y2|^2> for n >= 2
};
Observables observe(const ImpurityState& s, const EffectiveHamiltonian& H, double t);
void write_observables_csv(const std::string& path, const std::vector<Observables>& rows);
// raw little-endian complex<double> dump plus <path>.json
void write_snapshot(const std::string& path, const ImpurityState& s, double t);
ImpurityState read_snapshot(const std::string& path);

struct EvolveOptions {
    double dt = 0;  // 0 means t / 2048
    // halve dt until the final state moves by less than refine_tol
    bool refine = false;
    double refine_tol = 1e-8;
    int max_halvings = 6;
    // called every `observe_every` steps and at the end
    std::function<void(double, const ImpurityState&)> observer;
    int observe_every = 0;
};

struct EvolveResult {
    ImpurityState state;
    double dt = 0;
    std::size_t steps = 0;
    double norm_drift = 0;
};

EvolveResult evolve_effective(const ImpurityState& xi0, const EffectiveHamiltonian& H, double t,
                              const EvolveOptions& opt = {});

// FFTW plans for one grid shape, reused across calls.
class GridTransform {
public:
    explicit GridTransform(const ImpurityGrid& g);
    ~GridTransform();
    GridTransform(const GridTransform&) = delete;
    GridTransform& operator=(const GridTransform&) = delete;
    // unnormalized: to_position sums c_p e^{+ipy}, to_momentum sums e^{-ipy}
    void to_position(cplx* data) const;
    void to_momentum(cplx* data) const;

private:
    struct Impl;
    std::unique_ptr<Impl> impl_;
};

}  // namespace fermipair
