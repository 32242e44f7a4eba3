#pragma once

// Angular and regular-simplex geometry on the unit hypersphere. All angles
// are radians.

#include <optional>
#include <utility>
#include <vector>

#include "spherecc/common.hpp"

namespace spherecc::geometry {

/// Clamps a cosine into [-1, 1] so that acos never sees overshoot.
inline double clamp_cos(double c) { return c < -1.0 ? -1.0 : (c > 1.0 ? 1.0 : c); }

/// Angle in [0, pi]. Throws std::invalid_argument("degenerate vector") on a
/// zero-norm input.
double angle_between(const Eigen::Ref<const Vector>& u, const Eigen::Ref<const Vector>& v);

class UnitVector {
public:
    /// Normalizes `v`; throws on zero norm or empty input.
    static UnitVector normalize(const Eigen::Ref<const Vector>& v);

    const Vector& coords() const noexcept { return coords_; }
    Eigen::Index dim() const noexcept { return coords_.size(); }

private:
    explicit UnitVector(Vector v) : coords_(std::move(v)) {}
    Vector coords_;
};

enum class OmegaStatus { Infeasible, Unique, Range };

struct OmegaBound {
    int k = 0;
    int d = 0;
    OmegaStatus status = OmegaStatus::Infeasible;
    std::optional<double> omega_min;
    std::optional<double> theta_max;
};

/// Classifies the negative-zone factor for k equidistant clusters in R^d.
OmegaBound valid_omega(int k, int d);

/// pi / arccos(-1/(k-1)); in [1, 2), increasing in k.
double minimal_admissible_omega(int k);

/// arccos(-1/(k-1)), the pairwise angle of a regular k-simplex.
double simplex_angle(int k);

struct DeviationBounds {
    double delta_plus = 0.0;   // max angle of a must-link pair
    double delta_minus = 0.0;  // max shortfall of a cannot-link pair below pi/omega
};

/// Worst-case angular deviations compatible with a mean pairwise loss of
/// `epsilon` over `n_constraints` pairs.
DeviationBounds deviation_bounds(long long n_constraints, double epsilon, double omega);

/// k unit vectors in R^d with pairwise inner product -1/(k-1), as rows of a
/// k x d matrix. Coordinates come from the Helmert basis of the plane
/// orthogonal to (1,...,1), zero-padded from k-1 to d columns.
Matrix regular_simplex(int k, int d);

/// Same vertices as UnitVector values.
std::vector<UnitVector> regular_simplex_vertices(int k, int d);

/// Strictly positive cluster proportions summing to one.
class ClusterFrequencies {
public:
    explicit ClusterFrequencies(std::vector<double> p);

    /// Normalizes positive weights to frequencies.
    static ClusterFrequencies from_weights(const std::vector<double>& w);

    const std::vector<double>& values() const noexcept { return p_; }
    std::size_t size() const noexcept { return p_.size(); }
    double operator[](std::size_t i) const { return p_[i]; }
    double sum_of_squares() const noexcept { return s_; }

private:
    std::vector<double> p_;
    double s_ = 0.0;
};

/// Cosine between the mean-centered simplex vertices of clusters k and k2 when
/// clusters occur with frequencies p. Independent of the common inner product
/// of the uncentered vertices.
double centered_centroid_cosine(const ClusterFrequencies& p, std::size_t k, std::size_t k2);

/// Smallest centered angle over all cluster pairs.
double min_centered_angle(const ClusterFrequencies& p);

}  // namespace spherecc::geometry
