#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <numbers>

#include "spherecc/geometry.hpp"
#include "spherecc/trainer.hpp"

using namespace spherecc;
using namespace spherecc::trainer;

namespace {

struct Toy {
    Matrix x;
    std::vector<int> labels;
};

// Gaussian blobs around the given centers.
Toy blobs(const Matrix& centers, int per, double spread, std::uint64_t seed) {
    Rng rng(seed);
    std::normal_distribution<double> n(0.0, spread);
    Toy t;
    t.x.resize(centers.rows() * per, centers.cols());
    for (Eigen::Index c = 0; c < centers.rows(); ++c)
        for (int i = 0; i < per; ++i) {
            for (Eigen::Index j = 0; j < centers.cols(); ++j) t.x(c * per + i, j) = centers(c, j) + n(rng);
            t.labels.push_back(static_cast<int>(c));
        }
    return t;
}

Toy planar4(int per, std::uint64_t seed) {
    Matrix c(4, 2);
    c << 5, 0, -5, 0, 0, 5, 0, -5;
    return blobs(c, per, 0.5, seed);
}

ConstraintSet exhaustive(const std::vector<int>& labels) {
    ConstraintSet cs(labels.size());
    for (std::size_t i = 0; i < labels.size(); ++i)
        for (std::size_t j = i + 1; j < labels.size(); ++j) cs.add(i, j, labels[i] == labels[j] ? Link::MustLink : Link::CannotLink);
    return cs;
}

TrainConfig quick(int epochs, int embed_dim, std::uint64_t seed) {
    TrainConfig cfg;
    cfg.epochs = epochs;
    cfg.embed_dim = embed_dim;
    cfg.seed = seed;
    cfg.hidden = {32, 32};
    cfg.early_stop.warmup_epochs = epochs;  // run the full budget
    return cfg;
}

}  // namespace

TEST(AutoInstanceBatch, Examples) {
    EXPECT_EQ(auto_instance_batch(60000, 10000, 256), 1536u);
    EXPECT_EQ(auto_instance_batch(100, 100, 100), 100u);
    EXPECT_EQ(auto_instance_batch(10, 10000, 256), 1u);
    EXPECT_THROW(auto_instance_batch(0, 1, 1), std::invalid_argument);
}

TEST(TrainConfig, Validation) {
    TrainConfig c;
    EXPECT_NO_THROW(c.validate());
    EXPECT_EQ(c.effective_omega(), 2.0);
    c.embed_dim = 0;
    EXPECT_THROW(c.validate(), std::invalid_argument);
    c = {};
    c.lr = 0.0;
    EXPECT_THROW(c.validate(), std::invalid_argument);
    c = {};
    c.constraint_batch = 0;
    EXPECT_THROW(c.validate(), std::invalid_argument);
    c = {};
    c.epochs = 0;
    EXPECT_THROW(c.validate(), std::invalid_argument);
}

TEST(Train, PlanarFourClustersReachSmallLoss) {
    const Toy t = planar4(15, 1);
    const ConstraintSet cs = exhaustive(t.labels);
    TrainConfig cfg = quick(200, 8, 3);
    cfg.hidden = {64, 64, 256};
    const auto res = train(t.x, cs, cfg);
    const double final_ang = evaluate_angular_loss(res.model, t.x, cs, 2.0);
    EXPECT_LE(final_ang, 1e-3);
    ASSERT_EQ(static_cast<int>(res.report.epochs.size()), res.report.final_epoch);
    for (const auto& e : res.report.epochs) EXPECT_TRUE(std::isfinite(e.l_total));

    // deviation bounds at the final loss
    const auto bounds = geometry::deviation_bounds(static_cast<long long>(cs.size()), final_ang, 2.0);
    const Matrix z = extract_sphere_embedding(res.model, t.x);
    for (const auto& c : cs.items()) {
        const double th = std::acos(geometry::clamp_cos(z.row(static_cast<Eigen::Index>(c.a)).dot(z.row(static_cast<Eigen::Index>(c.b)))));
        if (c.must_link())
            EXPECT_LE(th, bounds.delta_plus);
        else
            EXPECT_GE(th, std::numbers::pi / 2.0 - bounds.delta_minus);
    }
}

TEST(Train, LossTrendsDownAfterWarmup) {
    const Toy t = planar4(15, 2);
    const ConstraintSet cs = exhaustive(t.labels);
    const auto res = train(t.x, cs, quick(120, 4, 5));
    const auto& ep = res.report.epochs;
    // 10-epoch window means are non-increasing up to 5%
    const int warm = 20;
    auto window = [&](int start) {
        double s = 0;
        for (int i = start; i < start + 10; ++i) s += ep[static_cast<std::size_t>(i)].l_ang;
        return s / 10;
    };
    for (int s = warm; s + 20 <= static_cast<int>(ep.size()); s += 10) EXPECT_LE(window(s + 10), 1.05 * window(s)) << "window " << s;
}

TEST(Train, ReconstructionWeightTradesOff) {
    const Toy t = planar4(10, 3);
    const ConstraintSet cs = exhaustive(t.labels);
    TrainConfig a = quick(60, 4, 7), b = quick(60, 4, 7);
    a.lambda = 0.0;
    b.lambda = 1.0;
    const double la = evaluate_angular_loss(train(t.x, cs, a).model, t.x, cs, 2.0);
    const double lb = evaluate_angular_loss(train(t.x, cs, b).model, t.x, cs, 2.0);
    EXPECT_LT(la, lb);
}

TEST(Train, InfeasibleDimensionLeavesResidual) {
    // K=4 clusters with the minimal omega need the regular simplex: D=2 cannot host it
    Matrix centers = 6.0 * geometry::regular_simplex(4, 5);
    const Toy t = blobs(centers, 12, 0.5, 4);
    const ConstraintSet cs = exhaustive(t.labels);
    const double w = geometry::minimal_admissible_omega(4);
    TrainConfig lo = quick(150, 2, 9), hi = quick(150, 4, 9);
    lo.omega = w;
    hi.omega = w;
    const double l2 = evaluate_angular_loss(train(t.x, cs, lo).model, t.x, cs, w);
    const double l4 = evaluate_angular_loss(train(t.x, cs, hi).model, t.x, cs, w);
    EXPECT_GE(l2, 10.0 * l4) << "D=2: " << l2 << "  D=4: " << l4;
}

TEST(Train, Reproducible) {
    const Toy t = planar4(8, 4);
    const ConstraintSet cs = exhaustive(t.labels);
    TrainConfig cfg = quick(15, 3, 11);
    cfg.constraint_batch = 64;
    const auto a = train(t.x, cs, cfg);
    const auto b = train(t.x, cs, cfg);
    ASSERT_EQ(a.report.epochs.size(), b.report.epochs.size());
    for (std::size_t i = 0; i < a.report.epochs.size(); ++i) EXPECT_NEAR(a.report.epochs[i].l_total, b.report.epochs[i].l_total, 1e-10);
    EXPECT_TRUE(a.model == b.model);
}

TEST(Train, EarlyStopping) {
    const Toy t = planar4(8, 5);
    const ConstraintSet cs = exhaustive(t.labels);
    TrainConfig cfg = quick(500, 3, 1);
    cfg.early_stop = {10, 0.5, 3};
    const auto res = train(t.x, cs, cfg);
    EXPECT_EQ(res.report.stop_reason, "early_stop");
    EXPECT_LT(res.report.final_epoch, 500);
    EXPECT_GE(res.report.final_epoch, 13);
}

TEST(Train, Errors) {
    const Toy t = planar4(4, 6);
    EXPECT_THROW(train(t.x, ConstraintSet(t.labels.size()), quick(2, 2, 0)), std::invalid_argument);
    ConstraintSet far(100);
    far.add(0, 50, Link::MustLink);
    EXPECT_THROW(train(t.x, far, quick(2, 2, 0)), std::invalid_argument);

    Matrix bad = t.x;
    bad(0, 0) = std::nan("");
    try {
        train(bad, exhaustive(t.labels), quick(3, 2, 0));
        FAIL();
    } catch (const DivergedError& ex) {
        EXPECT_EQ(ex.epoch(), 1);
        EXPECT_NE(std::string(ex.what()).find("diverged"), std::string::npos);
    }
}

TEST(SphereEmbedding, UnitRowsAndDeterministic) {
    const Toy t = planar4(6, 7);
    const auto res = train(t.x, exhaustive(t.labels), quick(5, 3, 2));
    const Matrix z = extract_sphere_embedding(res.model, t.x);
    for (Eigen::Index i = 0; i < z.rows(); ++i) EXPECT_NEAR(z.row(i).norm(), 1.0, 1e-9);
    EXPECT_EQ(z, extract_sphere_embedding(res.model, t.x));
}

TEST(SphereEmbedding, ThreeClustersFormSimplexInThreeDimensions) {
    const Toy t = blobs(6.0 * geometry::regular_simplex(3, 4), 20, 0.5, 8);
    const ConstraintSet cs = exhaustive(t.labels);
    TrainConfig cfg = quick(200, 3, 4);
    cfg.omega = 1.5;
    cfg.constraint_batch = cs.size();  // full batch
    const auto res = train(t.x, cs, cfg);
    const Matrix z = extract_sphere_embedding(res.model, t.x);
    Matrix mean = Matrix::Zero(3, 3);
    for (std::size_t i = 0; i < t.labels.size(); ++i) mean.row(t.labels[i]) += z.row(static_cast<Eigen::Index>(i));
    for (int a = 0; a < 3; ++a)
        for (int b = a + 1; b < 3; ++b)
            EXPECT_NEAR(geometry::angle_between(mean.row(a).transpose(), mean.row(b).transpose()), 2 * std::numbers::pi / 3, 0.05);
}

TEST(ReportIo, JsonAndCsv) {
    TrainReport r;
    r.epochs = {{1.0, 2.0, 1.04}, {0.5, 1.0, 0.52}};
    r.final_epoch = 2;
    r.stop_reason = "max_epochs";
    const auto dir = std::filesystem::temp_directory_path();
    write_loss_csv(dir / "spherecc_loss.csv", r);
    write_report_json(dir / "spherecc_report.json", r);
    std::ifstream in(dir / "spherecc_loss.csv");
    std::string line;
    std::getline(in, line);
    EXPECT_EQ(line, "epoch,l_ang,l_recon,l_total");
    std::getline(in, line);
    EXPECT_EQ(line.substr(0, 4), "1,1,");
    EXPECT_TRUE(std::filesystem::exists(dir / "spherecc_report.json"));
}
