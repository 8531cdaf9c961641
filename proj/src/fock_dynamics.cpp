#include <cmath>

#include "fermipair/error.hpp"
#include "fermipair/fock.hpp"

namespace fermipair {

namespace {

void add_stats(KrylovStats* acc, const KrylovStats& s) {
    if (!acc) return;
    acc->applies += s.applies;
    acc->steps += s.steps;
    acc->rejections += s.rejections;
}

void step_in_place(const MicroHamiltonian& H, FockState& psi, double t, const KrylovOptions& opt, KrylovStats* stats) {
    for (std::size_t K = 0; K < H.basis().blocks(); ++K) {
        if (psi.block_norm2(K) == 0) continue;
        add_stats(stats, krylov_expm(H, K, psi.block(K), t, opt));
    }
}

}  // namespace

FockState evolve_full(const MicroHamiltonian& H, const FockState& psi0, double t, const KrylovOptions& opt,
                      KrylovStats* stats) {
    FockState psi = psi0;
    if (t != 0) step_in_place(H, psi, t, opt, stats);
    return psi;
}

std::vector<DeficitPoint> deficit_curve(const MicroHamiltonian& H, const EffectiveHamiltonian& h,
                                        const ImpurityState& xi0, const std::vector<double>& times,
                                        const KrylovOptions& kopt, const EvolveOptions& eopt) {
    if (std::abs(xi0.norm() - 1) > 1e-10) throw ConfigError("initial impurity state must be normalized");
    const FockBasis& b = H.basis();
    FockState psi = fermi_sea_state(b, xi0);
    const double drop0 = H.dropped_weight(psi);
    ImpurityState xi = xi0;
    std::vector<DeficitPoint> out;
    double now = 0;
    for (double t : times) {
        if (t < now) throw ConfigError("deficit times must be ascending and non-negative");
        const double dt = t - now;
        if (dt > 0) {
            step_in_place(H, psi, dt, kopt, nullptr);
            EvolveOptions eo = eopt;
            if (eo.dt > dt) eo.dt = 0;
            xi = evolve_effective(xi, h, dt, eo).state;
            now = t;
        }
        DeficitPoint p;
        p.t = t;
        p.deficit = distance(psi, fermi_sea_state(b, xi));
        p.dropped_weight = drop0 + H.dropped_weight(psi);
        p.norm = psi.norm();
        p.energy = H.energy(psi);
        out.push_back(p);
    }
    return out;
}

double theorem1_deficit(const MicroHamiltonian& H, const EffectiveHamiltonian& h, const ImpurityState& xi0, double t) {
    return deficit_curve(H, h, xi0, {t}).front().deficit;
}

double duhamel_rate(const MicroHamiltonian& H, const EffectiveHamiltonian& h, const ImpurityState& xi0) {
    const FockState psi = fermi_sea_state(H.basis(), xi0);
    return distance(H.apply(psi), fermi_sea_state(H.basis(), h.apply(xi0)));
}

}  // namespace fermipair
