#pragma once

#include <limits>
#include <string>
#include <vector>

#include "fermipair/kernels.hpp"
#include "fermipair/lattice.hpp"
#include "fermipair/potentials.hpp"

namespace fermipair {

// Continuum limit of the lattice sum
//   W(r) = L^{-2d} sum_{k in B_F, l notin B_F} |v(l-k)|^2 cos((l-k).r) / (l^2 - k^2 + (l-k)^2 + 1)
// which carries the prefactor (2 pi)^{-2d}. Evaluated along the first axis.
struct WValue {
    double value = 0;
    double error = 0;
};

struct WOptions {
    double rel_tol = 1e-6;
    // transfer window |l - k| in [q_lo, q_hi]; the default is the full W
    double q_lo = 0;
    double q_hi = std::numeric_limits<double>::infinity();
    // |W| scale used for the absolute tolerance; 0 means estimate from W(0)
    double scale = 0;
};

WValue W_quadrature(double r, double kF, int d, const PotentialSpec& spec, const WOptions& opt = {});

// Finite-volume sum. The r-independent lens sums S(q) are computed once per
// transfer orbit under the signed permutations of the axes.
class LatticeW {
public:
    LatticeW(int d, double L, double kF, double cutoff, const PotentialSpec& spec,
             double tail_tol = 1e-3, const kernels::KernelTable& k = kernels::active());

    int dim() const { return d_; }
    double length() const { return L_; }
    double kF() const { return kF_; }
    double cutoff() const { return cutoff_; }
    // W at separation r along the first axis, and at a general vector.
    double operator()(double r) const;
    double at(const Vec3& x) const;
    double at_zero() const { return w0_; }
    // continuum estimate of what the cutoff drops, from the (Av) envelope
    double tail_bound() const { return tail_; }
    std::size_t transfer_count() const { return terms_.size(); }

private:
    struct Term {
        IVec q;
        double weight;  // L^{-2d} |v|^2 S(q)
    };
    int d_;
    double L_, kF_, cutoff_, w0_ = 0, tail_ = 0;
    std::vector<Term> terms_;
    std::vector<std::pair<int, double>> axis_;  // weights summed over q_1
};

// Direct double loop over (k, l) pairs, no symmetry used. Returns the cosine
// and sine parts; the latter vanishes by k -> -k symmetry. Test oracle only.
struct ComplexW {
    double re = 0, im = 0;
};
ComplexW W_lattice_brute(const Vec3& x, double kF, double L, int d, const PotentialSpec& spec, double cutoff);

double W_lattice_sum(double r, double kF, double L, int d, const PotentialSpec& spec, double cutoff);

// Values stored scaled by kF^{2-d}.
struct PotentialTable {
    int d = 1;
    double kF = 1;
    std::string method;  // "quadrature" or "lattice_sum"
    std::string spec_id;
    double L = 0, cutoff = 0;  // lattice_sum only
    std::vector<double> r, scaled, err;

    double scaled_at(double x) const;
    double raw_at(double x) const;
    double r_max() const { return r.empty() ? 0 : r.back(); }

    void write_csv(const std::string& path) const;
    static PotentialTable read_csv(const std::string& path);
};

PotentialTable tabulate_quadrature(int d, double kF, const PotentialSpec& spec, const std::vector<double>& r,
                                   double rel_tol = 1e-6);
PotentialTable tabulate_lattice(const LatticeW& w, const PotentialSpec& spec, const std::vector<double>& r);

struct Lemma1Row {
    double kF = 0;
    std::vector<double> scaled;
    double sup_abs = 0;
    double core_inf = 0;  // min of scaled W on [0, c_probe]
};

struct Lemma1Report {
    int d = 1;
    std::string spec_id;
    std::vector<double> r;
    std::vector<Lemma1Row> rows;
    double c_probe = 0;     // largest grid radius with all scaled values positive on [0, c]
    bool core_ok = false;   // c_probe > 0
    bool spec_core_certified = false;
    double sup_ratio() const;  // max sup_abs / min sup_abs over kF
};

// Tables must share d and the r grid.
Lemma1Report lemma1_report(const std::vector<PotentialTable>& tables, const PotentialSpec& spec);
Lemma1Report lemma1_scan(const std::vector<double>& kFs, int d, const PotentialSpec& spec, double r_max,
                         int grid_points, double rel_tol = 1e-6);

}  // namespace fermipair
