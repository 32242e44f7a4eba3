#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <set>

#include "spherecc/constraints.hpp"

using namespace spherecc;
namespace fs = std::filesystem;

namespace {

fs::path temp_dir(const std::string& name) {
    const fs::path p = fs::temp_directory_path() / ("spherecc_constraints_" + name);
    fs::remove_all(p);
    fs::create_directories(p);
    return p;
}

std::vector<int> balanced_labels(int k, int per) {
    std::vector<int> l;
    for (int c = 0; c < k; ++c)
        for (int i = 0; i < per; ++i) l.push_back(c);
    return l;
}

}  // namespace

TEST(Constraint, Canonicalizes) {
    const auto c = make_constraint(5, 2, Link::MustLink);
    EXPECT_EQ(c.a, 2u);
    EXPECT_EQ(c.b, 5u);
    EXPECT_THROW(make_constraint(3, 3, Link::CannotLink), std::invalid_argument);
}

TEST(ConstraintSet, RejectsBadPairs) {
    ConstraintSet cs(4);
    cs.add(0, 1, Link::MustLink);
    EXPECT_THROW(cs.add(1, 0, Link::CannotLink), std::invalid_argument);  // conflicting duplicate
    EXPECT_THROW(cs.add(0, 1, Link::MustLink), std::invalid_argument);
    EXPECT_THROW(cs.add(2, 2, Link::MustLink), std::invalid_argument);
    EXPECT_THROW(cs.add(0, 4, Link::MustLink), std::out_of_range);
    EXPECT_TRUE(cs.contains_pair(1, 0));
    EXPECT_EQ(cs.size(), 1u);
}

TEST(SampleBalanced, Exhaustive) {
    const std::vector<int> labels{0, 0, 1, 1};
    const auto cs = sample_balanced(labels, 6, 3);
    ASSERT_EQ(cs.size(), 6u);
    for (const auto& c : cs.items()) {
        const bool same = (c.a == 0 && c.b == 1) || (c.a == 2 && c.b == 3);
        EXPECT_EQ(c.must_link(), same) << c.a << "," << c.b;
    }
    EXPECT_EQ(cs.count_must_link(), 2u);
}

TEST(SampleBalanced, SingleCluster) {
    const std::vector<int> labels(5, 7);
    const auto cs = sample_balanced(labels, 3, 1);
    EXPECT_EQ(cs.size(), 3u);
    EXPECT_EQ(cs.count_must_link(), 3u);
}

TEST(SampleBalanced, PositiveRateMatchesSumOfSquares) {
    const auto labels = balanced_labels(10, 100);
    const auto cs = sample_balanced(labels, 10000, 11);
    const double frac = static_cast<double>(cs.count_must_link()) / static_cast<double>(cs.size());
    EXPECT_NEAR(frac, 0.1, 0.02);
}

TEST(SampleBalanced, LabelsDetermineLink) {
    const auto labels = balanced_labels(3, 20);
    const auto cs = sample_balanced(labels, 500, 5);
    for (const auto& c : cs.items()) EXPECT_EQ(c.must_link(), labels[c.a] == labels[c.b]);
}

TEST(SampleBalanced, Deterministic) {
    const auto labels = balanced_labels(4, 30);
    EXPECT_EQ(sample_balanced(labels, 300, 9).items(), sample_balanced(labels, 300, 9).items());
    EXPECT_NE(sample_balanced(labels, 300, 9).items(), sample_balanced(labels, 300, 10).items());
}

TEST(SampleBalanced, Errors) {
    const std::vector<int> labels{0, 1, 1};
    EXPECT_THROW(sample_balanced(labels, 4, 0), std::invalid_argument);
    EXPECT_THROW(sample_balanced(std::vector<int>{0}, 1, 0), std::invalid_argument);
}

TEST(SampleBalanced, RejectionPathForLargeN) {
    // 3000 instances exceed the shuffle threshold
    const auto labels = balanced_labels(3, 1000);
    const auto cs = sample_balanced(labels, 2000, 4);
    EXPECT_EQ(cs.size(), 2000u);
    std::set<std::pair<std::size_t, std::size_t>> seen;
    for (const auto& c : cs.items()) {
        EXPECT_LT(c.a, c.b);
        EXPECT_TRUE(seen.emplace(c.a, c.b).second);
        EXPECT_EQ(c.must_link(), labels[c.a] == labels[c.b]);
    }
}

TEST(SampleImbalanced, NestingAndExtras) {
    const auto labels = balanced_labels(4, 25);
    const auto g = sample_imbalanced(labels, {10, 50, 100}, 2, 8);
    EXPECT_EQ(g.imb0.size(), 10u);
    EXPECT_EQ(g.imb1.size(), 50u);
    EXPECT_EQ(g.imb2.size(), 100u);
    EXPECT_TRUE(g.imb0.is_subset_of(g.imb1));
    EXPECT_TRUE(g.imb1.is_subset_of(g.imb2));
    std::size_t extra = 0;
    for (const auto& c : g.imb1.items()) {
        if (g.imb0.contains_pair(c.a, c.b)) continue;
        ++extra;
        EXPECT_FALSE(c.must_link());
        EXPECT_TRUE(labels[c.a] == 2 || labels[c.b] == 2);
        EXPECT_NE(labels[c.a], labels[c.b]);
    }
    EXPECT_EQ(extra, 40u);
    for (const auto& c : g.imb2.items()) {
        if (g.imb1.contains_pair(c.a, c.b)) continue;
        EXPECT_FALSE(c.must_link());
        EXPECT_TRUE(labels[c.a] == 2 || labels[c.b] == 2);
    }
}

TEST(SampleImbalanced, Errors) {
    const auto labels = balanced_labels(3, 4);
    EXPECT_THROW(sample_imbalanced(labels, {10, 10, 20}, 0, 1), std::invalid_argument);
    EXPECT_THROW(sample_imbalanced(labels, {5, 10, 20}, 7, 1), std::invalid_argument);
    // cluster 0 has only 4 * 8 = 32 cross pairs
    EXPECT_THROW(sample_imbalanced(labels, {5, 20, 60}, 0, 1), std::invalid_argument);
}

TEST(SampleImbalanced, HeatmapDominatedByImbCluster) {
    const auto labels = balanced_labels(10, 100);
    const auto g = sample_imbalanced(labels, {1000, 5000, 10000}, 3, 2);
    const Matrix h = constraint_heatmap(g.imb2, labels);
    // direct count of constraints touching each cluster
    std::vector<double> touch(10, 0.0);
    for (const auto& c : g.imb2.items()) {
        touch[static_cast<std::size_t>(labels[c.a])] += 1;
        if (labels[c.b] != labels[c.a]) touch[static_cast<std::size_t>(labels[c.b])] += 1;
    }
    for (int r = 0; r < 10; ++r) {
        if (r == 3) continue;
        EXPECT_GT(h.row(3).sum(), 3.0 * h.row(r).sum());
        EXPECT_GT(touch[3], 3.0 * touch[static_cast<std::size_t>(r)]);
    }
    // cluster-pair fractions equal direct counts
    Matrix counts = Matrix::Zero(10, 10);
    for (const auto& c : g.imb2.items()) {
        const int a = labels[c.a], b = labels[c.b];
        if (a == b) {
            counts(a, a) += 1.0;
        } else {
            counts(a, b) += 0.5;
            counts(b, a) += 0.5;
        }
    }
    EXPECT_LT((h - counts / static_cast<double>(g.imb2.size())).cwiseAbs().maxCoeff(), 1e-12);
}

TEST(Heatmap, Examples) {
    const std::vector<int> labels{0, 0, 1, 1};
    ConstraintSet one(4);
    one.add(0, 1, Link::MustLink);
    const Matrix h1 = constraint_heatmap(one, labels);
    EXPECT_DOUBLE_EQ(h1(0, 0), 1.0);
    EXPECT_DOUBLE_EQ(h1.sum(), 1.0);

    const auto all = sample_balanced(labels, 6, 0);
    const Matrix h = constraint_heatmap(all, labels);
    EXPECT_NEAR(h(0, 0), 1.0 / 6, 1e-15);
    EXPECT_NEAR(h(1, 1), 1.0 / 6, 1e-15);
    EXPECT_NEAR(h(0, 1), 1.0 / 3, 1e-15);
    EXPECT_NEAR(h(1, 0), 1.0 / 3, 1e-15);

    EXPECT_THROW(constraint_heatmap(ConstraintSet(4), labels), std::invalid_argument);
}

TEST(ConstraintIo, CsvRoundTrip) {
    const auto dir = temp_dir("csv");
    const auto labels = balanced_labels(3, 10);
    const auto cs = sample_balanced(labels, 100, 1);
    write_constraints_csv(dir / "c.csv", cs);
    const auto back = read_constraints_csv(dir / "c.csv", labels.size());
    EXPECT_EQ(back.items(), cs.items());
    std::ifstream in(dir / "c.csv");
    std::string header;
    std::getline(in, header);
    EXPECT_EQ(header, "a,b,y");
}

TEST(ConstraintIo, ReportsLineNumbers) {
    const auto dir = temp_dir("bad");
    std::ofstream(dir / "bad.csv") << "a,b,y\n0,1,1\n2,x,0\n";
    try {
        read_constraints_csv(dir / "bad.csv");
        FAIL();
    } catch (const std::exception& ex) {
        EXPECT_NE(std::string(ex.what()).find("line 3"), std::string::npos) << ex.what();
    }
    std::ofstream(dir / "range.csv") << "a,b,y\n0,9,1\n";
    EXPECT_THROW(read_constraints_csv(dir / "range.csv", 4), std::exception);
}

TEST(ConstraintIo, ImbGroupRoundTrip) {
    const auto dir = temp_dir("imb");
    const auto labels = balanced_labels(4, 20);
    const auto g = sample_imbalanced(labels, {20, 60, 120}, 1, 5);
    write_imb_group(dir, g);
    for (const char* f : {"imb0.csv", "imb1.csv", "imb2.csv", "imb_manifest.json"}) EXPECT_TRUE(fs::exists(dir / f)) << f;
    const auto back = read_imb_group(dir, labels.size());
    EXPECT_EQ(back.imb_cluster, 1);
    EXPECT_EQ(back.seed, g.seed);
    EXPECT_EQ(back.imb2.items(), g.imb2.items());
}
