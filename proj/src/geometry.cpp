#include "spherecc/geometry.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <numeric>
#include <stdexcept>

namespace spherecc::geometry {

double angle_between(const Eigen::Ref<const Vector>& u, const Eigen::Ref<const Vector>& v) {
    if (u.size() != v.size()) throw std::invalid_argument("dimension mismatch");
    const double nu = u.norm();
    const double nv = v.norm();
    if (nu == 0.0 || nv == 0.0) throw std::invalid_argument("degenerate vector");
    return std::acos(clamp_cos(u.dot(v) / (nu * nv)));
}

UnitVector UnitVector::normalize(const Eigen::Ref<const Vector>& v) {
    if (v.size() == 0) throw std::invalid_argument("empty vector");
    const double n = v.norm();
    if (n == 0.0 || !std::isfinite(n)) throw std::invalid_argument("degenerate vector");
    return UnitVector(v / n);
}

double simplex_angle(int k) {
    if (k < 2) throw std::invalid_argument("need at least two clusters");
    return std::acos(-1.0 / (k - 1));
}

double minimal_admissible_omega(int k) { return std::numbers::pi / simplex_angle(k); }

OmegaBound valid_omega(int k, int d) {
    if (k < 2) throw std::invalid_argument("need at least two clusters");
    if (d < 1) throw std::invalid_argument("embedding dimension must be >= 1");
    OmegaBound b;
    b.k = k;
    b.d = d;
    if (d < k - 1) {
        b.status = OmegaStatus::Infeasible;
        return b;
    }
    b.status = d == k - 1 ? OmegaStatus::Unique : OmegaStatus::Range;
    b.theta_max = simplex_angle(k);
    b.omega_min = std::numbers::pi / *b.theta_max;
    return b;
}

DeviationBounds deviation_bounds(long long n_constraints, double epsilon, double omega) {
    if (n_constraints < 1) throw std::invalid_argument("need at least one constraint");
    if (epsilon < 0.0) throw std::invalid_argument("epsilon must be non-negative");
    if (omega <= 0.0) throw std::invalid_argument("omega must be positive");
    // Any single term is at most |C| * epsilon, so Sim >= exp(-|C| eps) for a
    // must-link pair and 1 - Sim >= exp(-|C| eps) for a cannot-link pair.
    const double e = std::exp(-static_cast<double>(n_constraints) * epsilon);
    DeviationBounds out;
    out.delta_plus = std::acos(clamp_cos(2.0 * e - 1.0));
    // pi/omega - theta <= (pi - arccos(1 - 2e)) / omega = arccos(2e - 1) / omega
    out.delta_minus = out.delta_plus / omega;
    return out;
}

Matrix regular_simplex(int k, int d) {
    if (k < 2) throw std::invalid_argument("need at least two clusters");
    if (d < k - 1) throw std::invalid_argument("simplex infeasible");
    Matrix out = Matrix::Zero(k, d);
    const double scale = std::sqrt(static_cast<double>(k) / (k - 1));
    // Helmert row j (1-based): (1, ..., 1, -j, 0, ...) / sqrt(j (j + 1)).
    for (int j = 1; j < k; ++j) {
        const double h = 1.0 / std::sqrt(static_cast<double>(j) * (j + 1));
        for (int i = 0; i < j; ++i) out(i, j - 1) = scale * h;
        out(j, j - 1) = -scale * h * j;
    }
    return out;
}

std::vector<UnitVector> regular_simplex_vertices(int k, int d) {
    const Matrix m = regular_simplex(k, d);
    std::vector<UnitVector> out;
    out.reserve(static_cast<std::size_t>(k));
    for (Eigen::Index i = 0; i < m.rows(); ++i) out.push_back(UnitVector::normalize(m.row(i).transpose()));
    return out;
}

ClusterFrequencies::ClusterFrequencies(std::vector<double> p) : p_(std::move(p)) {
    if (p_.empty()) throw std::invalid_argument("empty frequency vector");
    double sum = 0.0;
    for (double v : p_) {
        if (!(v > 0.0)) throw std::invalid_argument("frequencies must be strictly positive");
        sum += v;
        s_ += v * v;
    }
    if (std::abs(sum - 1.0) > 1e-12) throw std::invalid_argument("frequencies must sum to 1");
}

ClusterFrequencies ClusterFrequencies::from_weights(const std::vector<double>& w) {
    const double total = std::accumulate(w.begin(), w.end(), 0.0);
    if (!(total > 0.0)) throw std::invalid_argument("weights must have positive sum");
    std::vector<double> p(w.size());
    for (std::size_t i = 0; i < w.size(); ++i) p[i] = w[i] / total;
    // Push rounding residue into the largest entry.
    double sum = std::accumulate(p.begin(), p.end(), 0.0);
    auto it = std::max_element(p.begin(), p.end());
    *it += 1.0 - sum;
    return ClusterFrequencies(std::move(p));
}

double centered_centroid_cosine(const ClusterFrequencies& p, std::size_t k, std::size_t k2) {
    if (k >= p.size() || k2 >= p.size()) throw std::out_of_range("cluster index out of range");
    if (k == k2) throw std::invalid_argument("same cluster");
    const double s = p.sum_of_squares();
    const double num = s - p[k] - p[k2];
    const double den = std::sqrt((1.0 - 2.0 * p[k] + s) * (1.0 - 2.0 * p[k2] + s));
    return clamp_cos(num / den);
}

double min_centered_angle(const ClusterFrequencies& p) {
    double best = std::numbers::pi;
    for (std::size_t i = 0; i < p.size(); ++i)
        for (std::size_t j = i + 1; j < p.size(); ++j)
            best = std::min(best, std::acos(centered_centroid_cosine(p, i, j)));
    return best;
}

}  // namespace spherecc::geometry
