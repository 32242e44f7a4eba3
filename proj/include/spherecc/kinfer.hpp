#pragma once

// Estimating the number of clusters from a trained sphere embedding.
//
// The primary method projects the endpoints of cannot-link pairs onto the
// top-d principal subspace for every d and tracks the tail-averaged smallest
// angle between projected pairs. Once d reaches K-1 the centered cluster
// directions are fully captured, so the curve flattens; the onset of that
// plateau gives K = d* + 1.

#include <filesystem>
#include <numbers>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "spherecc/common.hpp"
#include "spherecc/constraints.hpp"

namespace spherecc::kinfer {

/// Mean-centered principal-component scores of a point set.
struct PcaProjections {
    Matrix scores;           // M x D; column j is the j-th component (descending singular value)
    Vector singular_values;  // length min(M, D)
    Vector mean;

    int dims() const { return static_cast<int>(scores.cols()); }
    /// Coordinates of row `i` in the top-d subspace.
    auto top(Eigen::Index i, int d) const { return scores.row(i).head(d); }
};

/// Throws std::invalid_argument for M < 2 and DegenerateInputError for a
/// rank-0 (all rows equal) input. Component signs are fixed so that the
/// largest-magnitude loading of each axis is positive.
PcaProjections pca_project_all(const Matrix& z);

struct DeltaCurve {
    std::vector<double> values;    // delta_bar_d for d = 1..D
    std::vector<char> all_zero;    // 1 where every projected pair was degenerate
    double rho = 0.05;
    std::size_t n_neg = 0;

    bool warning() const;
};

/// Tail-averaged minimal angle curve. Endpoints are deduplicated by instance
/// index before PCA. Pairs with a zero-norm projection are skipped.
DeltaCurve delta_curve(const Matrix& z, std::span<const Constraint> negatives, double rho);

struct PlateauRule {
    double rel_rise_tol = 0.05;
    double floor = std::numbers::pi / 3.0;
    int lookahead = 2;
};

enum class Method { PcaPlateau, Silhouette, Lifetime };
std::string method_name(Method m);

struct KEstimate {
    int k_hat = 0;
    int d_star = 0;  // only meaningful for PcaPlateau
    Method method = Method::PcaPlateau;
    std::optional<DeltaCurve> curve;
    std::vector<int> candidates;  // silhouette / lifetime
    std::vector<double> scores;   // NaN for skipped candidates
    double plateau_value = 0.0;
};

class NoPlateauError : public std::runtime_error {
public:
    explicit NoPlateauError(DeltaCurve curve)
        : std::runtime_error("no plateau"), curve_(std::move(curve)) {}
    const DeltaCurve& curve() const noexcept { return curve_; }

private:
    DeltaCurve curve_;
};

/// d* is the smallest d with delta_bar_d > floor whose next `lookahead`
/// rises (as far as the curve extends, at least one) are each at most
/// rel_rise_tol * delta_bar at that step.
KEstimate plateau_onset(const DeltaCurve& curve, const PlateauRule& rule = {});

/// Full pipeline: cannot-link pairs of `cs`, delta curve, plateau rule.
KEstimate infer_k_pca(const Matrix& z, const ConstraintSet& cs, double rho = 0.05, const PlateauRule& rule = {});

struct SilhouetteOptions {
    int k_min = 2;
    int k_max = 10;
    int restarts = 5;
    std::size_t subsample = 5000;
    std::uint64_t seed = 0;
};

/// Mean silhouette over the (sub)sampled rows; singletons score 0.
double silhouette_score(const Matrix& z, const std::vector<int>& labels);

/// Argmax of mean silhouette over k_min..k_max. Candidates whose clustering
/// is degenerate are skipped; if all are, the error propagates.
KEstimate infer_k_silhouette(const Matrix& z, const SilhouetteOptions& opts);

/// Argmax over k of (d_k - d_{k+1}) / d_2 from Ward merge heights.
KEstimate infer_k_lifetime(const Matrix& z, int k_min, int k_max, std::size_t cap = 5000);

void write_estimate_json(const std::filesystem::path& path, const KEstimate& est);
/// CSV `d,delta_bar`.
void write_curve_csv(const std::filesystem::path& path, const DeltaCurve& curve);

}  // namespace spherecc::kinfer
