#pragma once

// Angular pairwise loss, reconstruction loss and their weighted sum.

#include <span>

#include "spherecc/common.hpp"
#include "spherecc/constraints.hpp"

namespace spherecc::loss {

struct LossConfig {
    double omega = 2.0;     // negative-zone factor; cannot-link pairs must clear pi/omega
    double lambda = 0.02;   // reconstruction weight
    double log_eps = 1e-12; // floor inside both logarithms

    void validate() const;
};

/// Cosine bound used when differentiating arccos.
inline constexpr double kArccosClamp = 1.0 - 1e-7;

/// Similarity in [0, 1]: (cos t + 1)/2 for must-link, (cos(min(omega t, pi)) + 1)/2
/// for cannot-link. Throws if theta is outside [0, pi].
double sim(double theta, Link y, double omega);

struct LossValue {
    double value = 0.0;
    Matrix grad;  // same shape as the input it differentiates
};

/// Mean pairwise log-loss over `constraints`, whose indices address rows of
/// `z`. Rows are used through their directions only. Throws on an empty
/// constraint list or a zero-norm constrained row.
LossValue angular_loss(const Matrix& z, std::span<const Constraint> constraints, const LossConfig& cfg);
inline LossValue angular_loss(const Matrix& z, const ConstraintSet& cs, const LossConfig& cfg) {
    return angular_loss(z, cs.span(), cfg);
}

/// Mean squared row distance; grad w.r.t. x_hat is 2 (x_hat - x) / N.
LossValue recon_loss(const Matrix& x, const Matrix& x_hat);

inline double total_loss(double angular, double recon, double lambda) { return angular + lambda * recon; }

}  // namespace spherecc::loss
