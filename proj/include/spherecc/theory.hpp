#pragma once

// Executable checks of the geometric results behind the loss: simplex
// structure, admissible negative-zone factors, the centered-centroid angle
// formula and cross-dimensional angle invariance under PCA.

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "spherecc/common.hpp"

namespace spherecc::theory {

struct CheckResult {
    std::string name;
    bool passed = false;
    double max_error = 0.0;
    std::string detail;
};

struct TheoryOptions {
    int k_min = 2;
    int k_max = 10;
    int d_below = 2;  // sweep d from k-1-d_below ...
    int d_above = 5;  // ... to k+d_above
    int random_frequencies = 100;
    double tol = 1e-9;
    std::uint64_t seed = 0;
    /// Formula under test for the minimal admissible omega; swappable so a
    /// wrong formula can be shown to fail.
    std::function<double(int)> omega_formula;
};

CheckResult check_simplex_gram(const TheoryOptions& opts);
CheckResult check_valid_omega(const TheoryOptions& opts);
CheckResult check_minimal_admissible_omega(const TheoryOptions& opts);
CheckResult check_centered_centroid_cosine(const TheoryOptions& opts);
CheckResult check_uniform_angle(const TheoryOptions& opts);
CheckResult check_delta_star_bounds(const TheoryOptions& opts);
CheckResult check_deviation_bounds(const TheoryOptions& opts);

/// Exact K-simplex clusters with random frequencies, randomly rotated into
/// R^{K+extra}: angles of centered PCA projections agree within `tol` for
/// every d >= K-1 and differ by more than `gap` for some pair at d = K-2.
struct InvarianceReport {
    int k = 0;
    int dim = 0;
    double max_dev_above = 0.0;  // max |theta(d) - theta(D)| over d >= K-1
    double max_dev_below = 0.0;  // same at d = K-2
};
InvarianceReport pca_invariance(int k, int extra_dims, std::uint64_t seed);
CheckResult check_pca_angle_invariance(int k_min, int k_max, int extra_dims, std::uint64_t seed);

/// All checks in a fixed order.
std::vector<CheckResult> run_all(const TheoryOptions& opts);

}  // namespace spherecc::theory
