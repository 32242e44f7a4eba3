#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "spherecc/common.hpp"

namespace spherecc::data {

struct Split {
    std::vector<std::size_t> train_idx;
    std::vector<std::size_t> test_idx;
};

struct Dataset {
    Matrix x;
    std::optional<std::vector<int>> labels;
    std::string name;
    std::optional<Split> split;

    std::size_t size() const noexcept { return static_cast<std::size_t>(x.rows()); }
    std::size_t dim() const noexcept { return static_cast<std::size_t>(x.cols()); }

    /// Throws if labels or split are inconsistent with x.
    void validate() const;
};

/// Rows selected in order; labels follow, split is dropped.
Dataset subset(const Dataset& ds, const std::vector<std::size_t>& idx);

/// Comma separated, '.' decimal. A first line with no numeric cell is taken
/// as a header. With `has_labels` the last column is an integer label.
Dataset load_csv(const std::filesystem::path& path, bool has_labels);

/// Writes full precision (%.17g) so that load_csv reproduces x bit-exactly.
void save_csv(const std::filesystem::path& path, const Dataset& ds, bool with_header = true);

/// Binary matrix: 8 magic bytes "SPCCMAT1", uint64 rows, uint64 cols, then
/// row-major little-endian float64.
void save_binary(const std::filesystem::path& path, const Matrix& m);
Matrix load_binary(const std::filesystem::path& path);

struct MixtureSpec {
    int k = 4;
    int dim = 10;
    /// Either a total count split by `proportions`, or equal clusters of
    /// n_per_cluster when proportions is empty.
    std::size_t n_per_cluster = 100;
    std::size_t n_total = 0;
    std::vector<double> proportions;
    double separation = 10.0;  // norm of each cluster mean
    double spread = 1.0;       // isotropic std per coordinate
    std::uint64_t seed = 0;
};

/// Cluster sizes for `n` instances by largest-remainder rounding.
std::vector<std::size_t> allocate_counts(std::size_t n, const std::vector<double>& proportions);

/// Gaussian clusters centered at separation * (regular simplex vertices),
/// zero-padded into R^dim. Rows are grouped by cluster.
Dataset gen_gaussian_mixture(const MixtureSpec& spec);

/// Stratified by label when labels exist; uniform otherwise. Index lists are
/// sorted.
Dataset split(const Dataset& ds, double test_fraction, std::uint64_t seed);

/// Per-column zero mean, unit variance (constant columns are only centered).
void standardize(Dataset& ds);

}  // namespace spherecc::data
