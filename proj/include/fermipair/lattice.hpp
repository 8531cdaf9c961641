#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <iterator>
#include <optional>
#include <vector>

namespace fermipair {

constexpr double kPi = 3.14159265358979323846;

// Integer lattice coordinates; unused axes are zero.
using IVec = std::array<int, 3>;
using Vec3 = std::array<double, 3>;

// Largest integer |z|^2 with |z| * spacing <= radius. The small slack makes
// radii that land exactly on a shell (kF = 2 at L = 2 pi) inclusive.
std::int64_t max_norm2(double radius, double spacing);

// Momenta (2 pi / L) z, z in Z^d, with |k| <= cutoff, in lexicographic order of z.
class MomentumLattice {
public:
    MomentumLattice(int dim, double length, double cutoff, std::size_t max_modes = 20'000'000);

    int dim() const { return dim_; }
    double length() const { return length_; }
    double cutoff() const { return cutoff_; }
    double spacing() const { return spacing_; }
    std::int64_t cutoff_norm2() const { return zc2_; }
    std::size_t size() const { return modes_.size(); }

    const IVec& mode(std::size_t i) const { return modes_[i]; }
    std::int64_t norm2(std::size_t i) const;
    double energy(std::size_t i) const { return spacing_ * spacing_ * double(norm2(i)); }
    Vec3 momentum(std::size_t i) const;
    std::optional<std::size_t> find(const IVec& z) const;

private:
    int dim_;
    double length_, cutoff_, spacing_;
    std::int64_t zc2_;
    int reach_;
    std::vector<IVec> modes_;
    std::vector<std::int32_t> index_;  // dense cube [-reach, reach]^d
};

class FermiBall {
public:
    FermiBall(const MomentumLattice& lattice, double kF);

    const MomentumLattice& lattice() const { return *lattice_; }
    double kF() const { return kF_; }
    std::int64_t fermi_norm2() const { return zF2_; }
    std::size_t particle_number() const { return members_.size(); }
    const std::vector<std::size_t>& members() const { return members_; }
    const std::vector<std::size_t>& outside() const { return outside_; }
    bool contains(std::size_t lattice_index) const { return lattice_->norm2(lattice_index) <= zF2_; }
    // E0 = sum of |k|^2 over the ball.
    double free_energy() const;

private:
    const MomentumLattice* lattice_;
    double kF_;
    std::int64_t zF2_;
    std::vector<std::size_t> members_, outside_;
};

struct ExcitationPair {
    std::size_t particle;  // lattice index outside the ball
    std::size_t hole;      // lattice index inside the ball
};

// (modes \ ball) x ball, particle-major.
class ExcitationPairs {
public:
    explicit ExcitationPairs(const FermiBall& ball) : ball_(&ball) {}

    class iterator {
    public:
        using iterator_category = std::forward_iterator_tag;
        using value_type = ExcitationPair;
        using difference_type = std::ptrdiff_t;
        using pointer = const ExcitationPair*;
        using reference = ExcitationPair;

        iterator(const FermiBall* b, std::size_t o, std::size_t m) : b_(b), o_(o), m_(m) {}
        ExcitationPair operator*() const { return {b_->outside()[o_], b_->members()[m_]}; }
        iterator& operator++() {
            if (++m_ == b_->members().size()) {
                m_ = 0;
                ++o_;
            }
            return *this;
        }
        bool operator==(const iterator& r) const { return o_ == r.o_ && m_ == r.m_; }
        bool operator!=(const iterator& r) const { return !(*this == r); }

    private:
        const FermiBall* b_;
        std::size_t o_, m_;
    };

    iterator begin() const {
        return ball_->members().empty() ? end() : iterator(ball_, 0, 0);
    }
    iterator end() const { return iterator(ball_, ball_->outside().size(), 0); }
    std::size_t size() const { return ball_->outside().size() * ball_->members().size(); }

private:
    const FermiBall* ball_;
};

}  // namespace fermipair
