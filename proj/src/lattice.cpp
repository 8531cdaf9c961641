#include "fermipair/lattice.hpp"

#include <cmath>
#include <string>

#include "fermipair/error.hpp"

namespace fermipair {

std::int64_t max_norm2(double radius, double spacing) {
    if (radius < 0) return -1;
    const double x = radius / spacing;
    return static_cast<std::int64_t>(std::floor(x * x * (1 + 1e-12) + 1e-9));
}

MomentumLattice::MomentumLattice(int dim, double length, double cutoff, std::size_t max_modes)
    : dim_(dim), length_(length), cutoff_(cutoff) {
    if (dim < 1 || dim > 3) throw ConfigError("lattice dimension must be 1, 2 or 3");
    if (!(length > 0) || !(cutoff >= 0)) throw ConfigError("lattice length must be positive and cutoff non-negative");
    spacing_ = 2 * kPi / length;
    zc2_ = max_norm2(cutoff, spacing_);
    reach_ = static_cast<int>(std::floor(std::sqrt(double(zc2_)) + 1e-9));
    const double side = 2.0 * reach_ + 1;
    const double cube = std::pow(side, dim);
    // volume estimate before allocating anything
    const double ball_est = cube * (dim == 1 ? 1.0 : dim == 2 ? kPi / 4 : kPi / 6);
    if (ball_est > 1.2 * double(max_modes) + 64)
        throw ResourceError("lattice too large: about " + std::to_string(std::llround(ball_est)) + " modes");
    index_.assign(static_cast<std::size_t>(cube), -1);
    const int r = reach_;
    const int ry = dim >= 2 ? r : 0, rz = dim >= 3 ? r : 0;
    for (int x = -r; x <= r; ++x)
        for (int y = -ry; y <= ry; ++y)
            for (int z = -rz; z <= rz; ++z) {
                const std::int64_t n2 = std::int64_t(x) * x + std::int64_t(y) * y + std::int64_t(z) * z;
                if (n2 > zc2_) continue;
                if (modes_.size() >= max_modes) throw ResourceError("lattice too large");
                const IVec v{x, y, z};
                std::size_t off = 0;
                for (int a = 0; a < dim; ++a) off = off * (2 * r + 1) + std::size_t(v[a] + r);
                index_[off] = static_cast<std::int32_t>(modes_.size());
                modes_.push_back(v);
            }
}

std::int64_t MomentumLattice::norm2(std::size_t i) const {
    const IVec& z = modes_[i];
    return std::int64_t(z[0]) * z[0] + std::int64_t(z[1]) * z[1] + std::int64_t(z[2]) * z[2];
}

Vec3 MomentumLattice::momentum(std::size_t i) const {
    const IVec& z = modes_[i];
    return {spacing_ * z[0], spacing_ * z[1], spacing_ * z[2]};
}

std::optional<std::size_t> MomentumLattice::find(const IVec& z) const {
    std::size_t off = 0;
    for (int a = 0; a < 3; ++a) {
        if (a >= dim_) {
            if (z[a] != 0) return std::nullopt;
            continue;
        }
        if (z[a] < -reach_ || z[a] > reach_) return std::nullopt;
        off = off * (2 * reach_ + 1) + std::size_t(z[a] + reach_);
    }
    const std::int32_t k = index_[off];
    if (k < 0) return std::nullopt;
    return static_cast<std::size_t>(k);
}

FermiBall::FermiBall(const MomentumLattice& lattice, double kF) : lattice_(&lattice), kF_(kF) {
    if (!(kF > 0)) throw ConfigError("Fermi momentum must be positive");
    if (kF > lattice.cutoff() * (1 + 1e-12)) throw ConfigError("cutoff too small: k_F exceeds the lattice cutoff");
    zF2_ = max_norm2(kF, lattice.spacing());
    for (std::size_t i = 0; i < lattice.size(); ++i)
        (lattice.norm2(i) <= zF2_ ? members_ : outside_).push_back(i);
}

double FermiBall::free_energy() const {
    double e = 0;
    for (std::size_t i : members_) e += lattice_->energy(i);
    return e;
}

}  // namespace fermipair
