#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <unordered_set>
#include <vector>

#include "spherecc/common.hpp"

namespace spherecc {

enum class Link : std::uint8_t { CannotLink = 0, MustLink = 1 };

/// One pairwise constraint. Stored canonically with a < b.
struct Constraint {
    std::size_t a = 0;
    std::size_t b = 0;
    Link y = Link::CannotLink;

    bool must_link() const noexcept { return y == Link::MustLink; }
    friend bool operator==(const Constraint&, const Constraint&) = default;
};

/// Canonicalizes (a, b) so that a < b; throws on a == b.
Constraint make_constraint(std::size_t a, std::size_t b, Link y);

/// Duplicate-free set of constraints over a dataset of `n_instances` rows.
/// Transitive consistency is not enforced.
class ConstraintSet {
public:
    explicit ConstraintSet(std::size_t n_instances = 0) : n_(n_instances) {}

    /// Adds a constraint; throws on out-of-range index, self-pair, or a pair
    /// that is already present (with either link value).
    void add(std::size_t a, std::size_t b, Link y);
    void add(const Constraint& c) { add(c.a, c.b, c.y); }

    bool contains_pair(std::size_t a, std::size_t b) const;

    std::size_t size() const noexcept { return items_.size(); }
    bool empty() const noexcept { return items_.empty(); }
    std::size_t n_instances() const noexcept { return n_; }
    const std::vector<Constraint>& items() const noexcept { return items_; }
    std::span<const Constraint> span() const noexcept { return items_; }
    const Constraint& operator[](std::size_t i) const { return items_[i]; }

    std::size_t count_must_link() const;

    /// Only the cannot-link constraints.
    ConstraintSet negatives() const;

    /// True when every pair in *this is in `other` with the same link.
    bool is_subset_of(const ConstraintSet& other) const;

private:
    static std::uint64_t key(std::size_t a, std::size_t b) noexcept {
        return (static_cast<std::uint64_t>(a) << 32) | static_cast<std::uint64_t>(b);
    }

    std::size_t n_;
    std::vector<Constraint> items_;
    std::unordered_set<std::uint64_t> keys_;
};

/// m distinct pairs drawn uniformly without replacement; y = 1 iff the labels
/// agree. Deterministic in `seed`.
ConstraintSet sample_balanced(std::span<const int> labels, std::size_t m, std::uint64_t seed);

struct ImbSizes {
    std::size_t m0 = 0;
    std::size_t m1 = 0;
    std::size_t m2 = 0;
};

/// Nested balanced-then-skewed constraint sets. imb1 and imb2 only add
/// cannot-link pairs with one endpoint in `imb_cluster`.
struct ImbGroup {
    ConstraintSet imb0;
    ConstraintSet imb1;
    ConstraintSet imb2;
    int imb_cluster = 0;
    std::uint64_t seed = 0;
};

ImbGroup sample_imbalanced(std::span<const int> labels, ImbSizes sizes, int imb_cluster, std::uint64_t seed);

/// K x K symmetric matrix of the fraction of constraints joining each pair of
/// ground-truth clusters; entries sum to 1. Off-diagonal mass is split
/// evenly between (k, k') and (k', k).
Matrix constraint_heatmap(const ConstraintSet& cs, std::span<const int> labels);

/// CSV with header `a,b,y`.
void write_constraints_csv(const std::filesystem::path& path, const ConstraintSet& cs);

/// Reads a constraint CSV. When `n_instances` is zero the set is sized to
/// max index + 1.
ConstraintSet read_constraints_csv(const std::filesystem::path& path, std::size_t n_instances = 0);

/// Writes imb0.csv, imb1.csv, imb2.csv and imb_manifest.json into `dir`.
void write_imb_group(const std::filesystem::path& dir, const ImbGroup& group);
ImbGroup read_imb_group(const std::filesystem::path& dir, std::size_t n_instances = 0);

}  // namespace spherecc
