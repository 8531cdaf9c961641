#pragma once

// Transition-amplitude sums over T_F = B_F^c x B_F, their scaling envelopes,
// the error functionals gamma / Gamma and a few elementary integrals.

#include <array>
#include <string>
#include <vector>

#include <json.hpp>

#include "fermipair/kernels.hpp"
#include "fermipair/lattice.hpp"
#include "fermipair/potentials.hpp"

namespace fermipair {

struct SumValue {
    std::string id;
    double value = 0;
    double tail = 0;  // continuum estimate of the part beyond the cutoff; NaN if not estimated
    double envelope = 0;
    double ratio = 0;
};

struct BoundReport {
    int d = 1;
    double kF = 0, L = 0, cutoff = 0;
    std::vector<SumValue> sums;
    nlohmann::json to_json() const;
};

// L^{-2d} sum_{(l,k) in T_F} |v(l-k)|^2 f with f = 1, 1/D, 1/D^2 and
// (l-k)^2 / D'^2; D = l^2 - k^2 + 1, D' = D + (l-k)^2.
struct Lemma2Sums {
    std::array<double, 4> value{};
    std::array<double, 4> tail{};
};

// Throws ConfigError("cutoff too small") when a tail exceeds tail_tol times
// its sum.
Lemma2Sums lemma2_sums(const FermiBall& ball, const PotentialSpec& spec, double tail_tol = 0.01,
                       const kernels::KernelTable& kern = kernels::active());

// The five nested sums. The index n of the third one runs over B_F^c.
// Dense matrices over the lattice modes; ResourceError above max_entries.
std::array<double, 5> lemmaA1_sums(const FermiBall& ball, const PotentialSpec& spec,
                                   std::size_t max_entries = 60'000'000);

double gamma(int d, double kF);

struct BigGamma {
    double value = 0;
    std::array<double, 7> terms{};  // in the order of the defining formula
};
BigGamma big_gamma(int d, double kF, double lambda, double t);

// Envelopes: k^{d-1}, k^{d-2}, k^{d-3} ln k, k^{d-3} (ln k)^2 and gamma, gamma^2.
std::array<double, 4> lemma2_envelopes(int d, double kF);
std::array<double, 5> lemmaA1_envelopes(int d, double kF);

// a_sums selects which of the five nested sums to evaluate (skipped ones are
// omitted from the report).
BoundReport bound_report(const FermiBall& ball, const PotentialSpec& spec, bool lemma2 = true,
                         std::array<bool, 5> a_sums = {true, true, true, true, true}, double tail_tol = 0.01);

struct ElementaryIntegrals {
    double a = 0, eps = 0;
    double first = 0, first_bound = 0;    // int 1/(r - s + eps)
    double second = 0, second_bound = 0;  // int 1/(r - s + eps)^2
    double first_margin() const { return first_bound - first; }
    double second_margin() const { return second_bound - second; }
    bool holds() const { return first_margin() > 0 && second_margin() > 0; }
};
// Double integrals over s in [-a, 0], r in [0, a]; needs a > 1 > 2 eps > 0.
ElementaryIntegrals elementary_integral_checks(double a, double eps);

struct JIntegral {
    std::string id;
    double value = 0, error = 0, envelope = 0, ratio = 0;
};
// J1: 1/(1+|l-k|^2)^2; J2, J3: |v(l-k)|^2 / (|l|-|k|+1/kF)^{1,2}; K1, K2:
// the shell kernel chi(|l-k| < a) / (|l|-|k|+1/kF)^{1,2} at a = 10 against
// (kF a)^{d-1} times the matching elementary integral. All over |k| <= kF,
// |l| >= kF in R^d.
std::vector<JIntegral> appendix_J_integrals(int d, double kF, const PotentialSpec& spec, double rel_tol = 1e-6);

}  // namespace fermipair
