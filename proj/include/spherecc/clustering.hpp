#pragma once

// Clustering of unit-sphere embeddings and nearest-centroid prediction.
//
// For unit vectors |u - v|^2 = 2 (1 - cos theta), so Euclidean K-means and
// Ward linkage operate directly on the embeddings.

#include <filesystem>
#include <vector>

#include "spherecc/common.hpp"
#include "spherecc/net.hpp"

namespace spherecc::clustering {

struct ClusterModel {
    Matrix centroids;              // k x D, unit rows: Norm(mean of members)
    std::vector<int> assignments;  // one per clustered row, in [0, k)
    int k = 0;
    double inertia = 0.0;          // sum of squared distances to Euclidean means
};

struct KMeansOptions {
    int restarts = 20;
    int max_iter = 300;
    double tol = 1e-10;  // stop when relative inertia improvement falls below
    std::uint64_t seed = 0;
};

/// Best-of-restarts Lloyd with k-means++ seeding. Throws
/// std::invalid_argument for k < 2 or N < k and DegenerateInputError when
/// fewer than k distinct rows exist.
ClusterModel kmeans(const Matrix& z, int k, const KMeansOptions& opts);

/// Inertia trace of a single seeded Lloyd run, one entry per iteration.
std::vector<double> kmeans_inertia_trace(const Matrix& z, int k, std::uint64_t seed, int max_iter = 300);

struct WardResult {
    ClusterModel model;
    /// Merge heights sorted ascending; heights[s] is the merge taking N - s
    /// clusters to N - s - 1. Heights use the scipy convention
    /// sqrt(2 n_a n_b / (n_a + n_b)) |c_a - c_b|.
    std::vector<double> heights;

    /// d_{K'}: height of the merge from K' clusters to K' - 1, K' in [2, N].
    double linkage_distance(std::size_t k_prime) const;
};

inline constexpr std::size_t kDefaultWardCap = 5000;

/// Ward agglomerative clustering (nearest-neighbor chain over a
/// Lance-Williams distance matrix), cut at k clusters.
WardResult agglomerative_ward(const Matrix& z, int k, std::size_t cap = kDefaultWardCap);

/// Index of the centroid at minimal angle to each row; ties go to the lowest
/// index. Throws on a zero-norm row.
std::vector<int> assign_nearest(const Matrix& centroids, const Matrix& z);

/// Encodes, normalizes, then assigns.
std::vector<int> predict(const ClusterModel& model, const net::Autoencoder& encoder, const Matrix& x_new);

/// Normalized cluster means; throws if some cluster is empty.
Matrix sphere_centroids(const Matrix& z, const std::vector<int>& assignments, int k);

/// JSON with k and centroids (row-major).
void save_cluster_model(const std::filesystem::path& path, const ClusterModel& model);
ClusterModel load_cluster_model(const std::filesystem::path& path);

/// CSV `index,cluster`.
void write_assignments_csv(const std::filesystem::path& path, const std::vector<int>& assignments);
std::vector<int> read_assignments_csv(const std::filesystem::path& path);

}  // namespace spherecc::clustering
