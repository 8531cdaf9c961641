#pragma once

#include <functional>
#include <limits>
#include <string>
#include <vector>

#include "fermipair/error.hpp"

namespace fermipair {

struct AssumptionViolated : ConfigError {
    explicit AssumptionViolated(const std::string& w) : ConfigError(w) {}
};

enum class ProfileKind { zero, yukawa, step, table, custom };

// Radial impurity-fermion profile v(|k|), real and rotation invariant.
class PotentialSpec {
public:
    static PotentialSpec zero();
    static PotentialSpec yukawa(double R);
    static PotentialSpec step();
    // Piecewise linear in |k| through (k_i, v_i), zero beyond the last node.
    static PotentialSpec table(std::vector<double> k, std::vector<double> v, std::string id);
    // Two whitespace separated columns; '#' starts a comment.
    static PotentialSpec load_table(const std::string& path);
    static PotentialSpec custom(std::function<double(double)> f, std::string id,
                                double support = std::numeric_limits<double>::infinity(),
                                std::vector<double> breaks = {});

    double operator()(double kabs) const;
    ProfileKind kind() const { return kind_; }
    const std::string& id() const { return id_; }
    // v vanishes for |k| > support_radius().
    double support_radius() const { return support_; }
    // Points where v has a jump or a kink.
    const std::vector<double>& breakpoints() const { return breaks_; }
    double yukawa_R() const { return R_; }

private:
    ProfileKind kind_ = ProfileKind::zero;
    std::string id_ = "zero";
    double R_ = 1;
    double support_ = 0;
    std::vector<double> breaks_;
    std::vector<double> tk_, tv_;
    std::function<double(double)> f_;
};

struct CertificateReport {
    double R = 1;
    // max over samples of |v(k)| - 1/(k^2 + R); must be <= 0.
    double worst_envelope_violation = 0;
    double worst_at = 0;
    // min over k^2 <= 1 of |v(k)| - 1/(1 + R); negative means no core bound.
    double core_margin = 0;
    bool core_ok = false;
    std::vector<std::string> warnings;
};

// Samples |k| on {0} u log grid up to 1e3 plus breakpoints. Throws
// AssumptionViolated when the envelope is exceeded by more than 1e-12.
CertificateReport certify_assumptions(const PotentialSpec& spec, double R, int samples = 4001);

// Impurity-impurity potential w(|x|), tabulated radially and interpolated
// linearly; beyond the last node it holds the last value.
class ImpurityPotential {
public:
    static ImpurityPotential zero();
    static ImpurityPotential bounded_table(std::vector<double> r, std::vector<double> w, std::string id);
    // For w outside L^infinity the relative bound c has to come from the user;
    // such potentials are marked uncertified and refused by the propagators.
    static ImpurityPotential uncertified(std::vector<double> r, std::vector<double> w, double c, std::string id);

    double operator()(double r) const;
    bool is_zero() const { return r_.empty(); }
    bool certified() const { return certified_; }
    double sup_abs() const { return sup_; }
    // w^2 <= c (-Laplace) + C. Bounded w: c = 0, C = sup^2.
    double relative_bound() const { return c_; }
    double bound_constant() const { return sup_ * sup_; }
    const std::string& id() const { return id_; }

private:
    std::string id_ = "zero";
    std::vector<double> r_, w_;
    double sup_ = 0, c_ = 0;
    bool certified_ = true;
};

}  // namespace fermipair
