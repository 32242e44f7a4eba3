// End-to-end acceptance suite. Prints one [PASS]/[FAIL] line per criterion
// and exits non-zero if any fails. Pass criterion numbers as arguments to run
// a subset.

#include <sys/wait.h>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <numbers>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "../oracles.hpp"
#include "spherecc/clustering.hpp"
#include "spherecc/constraints.hpp"
#include "spherecc/data.hpp"
#include "spherecc/eval.hpp"
#include "spherecc/geometry.hpp"
#include "spherecc/kinfer.hpp"
#include "spherecc/theory.hpp"
#include "spherecc/trainer.hpp"

using namespace spherecc;
namespace fs = std::filesystem;
using nlohmann::json;
using std::numbers::pi;

namespace {

struct Outcome {
    bool pass = false;
    std::string detail;
};

double seconds_since(std::chrono::steady_clock::time_point t0) {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

double median(std::vector<double> v) {
    std::sort(v.begin(), v.end());
    const std::size_t n = v.size();
    return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

std::string fmt(double v, int prec = 4) {
    std::ostringstream os;
    os.precision(prec);
    os << v;
    return os.str();
}

int run_cli(const std::string& args) {
    const std::string cmd = std::string(SPHERECC_CLI) + " " + args + " > /dev/null 2>&1";
    const int status = std::system(cmd.c_str());
    return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

fs::path work_dir(const std::string& name) {
    const fs::path p = fs::temp_directory_path() / "spherecc_acceptance" / name;
    fs::remove_all(p);
    fs::create_directories(p);
    return p;
}

ConstraintSet exhaustive(const std::vector<int>& labels) {
    ConstraintSet cs(labels.size());
    for (std::size_t i = 0; i < labels.size(); ++i)
        for (std::size_t j = i + 1; j < labels.size(); ++j) cs.add(i, j, labels[i] == labels[j] ? Link::MustLink : Link::CannotLink);
    return cs;
}

double angle(const Matrix& z, std::size_t a, std::size_t b) {
    return std::acos(geometry::clamp_cos(z.row(static_cast<Eigen::Index>(a)).dot(z.row(static_cast<Eigen::Index>(b)))));
}

// The K=4, dim=20, N=800 task with an 80/20 split.
struct Task {
    data::Dataset train, test;
};

Task four_cluster_task(std::uint64_t seed) {
    data::MixtureSpec s;
    s.k = 4;
    s.dim = 20;
    s.n_per_cluster = 200;
    s.separation = 4.0;
    s.spread = 1.0;
    s.seed = derive_seed(seed, "acceptance.data");
    const auto ds = data::split(data::gen_gaussian_mixture(s), 0.2, derive_seed(seed, "acceptance.split"));
    return {data::subset(ds, ds.split->train_idx), data::subset(ds, ds.split->test_idx)};
}

struct Scores {
    double train_acc = 0, test_acc = 0, test_nmi = 0, test_ari = 0;
};

Scores cluster_and_score(const net::Autoencoder& model, const Task& t, int k, std::uint64_t seed) {
    const Matrix z = trainer::extract_sphere_embedding(model, t.train.x);
    const auto cm = clustering::kmeans(z, k, {20, 300, 1e-10, seed});
    const auto pred = clustering::predict(cm, model, t.test.x);
    return {eval::accuracy(cm.assignments, *t.train.labels), eval::accuracy(pred, *t.test.labels), eval::nmi(pred, *t.test.labels),
            eval::ari(pred, *t.test.labels)};
}

// ---------------------------------------------------------------------------

Outcome c1_theory() {
    const auto t0 = std::chrono::steady_clock::now();
    theory::TheoryOptions o;
    std::vector<theory::CheckResult> rs{theory::check_simplex_gram(o), theory::check_valid_omega(o), theory::check_minimal_admissible_omega(o),
                                        theory::check_centered_centroid_cosine(o), theory::check_uniform_angle(o)};
    const double secs = seconds_since(t0);
    const int code = run_cli("verify-theory");
    bool ok = secs < 10.0 && code == 0;
    std::string failed;
    for (const auto& r : rs)
        if (!r.passed) {
            ok = false;
            failed += " " + r.name;
        }
    return {ok, "checks=" + std::to_string(rs.size()) + " time=" + fmt(secs) + "s cli_exit=" + std::to_string(code) +
                    (failed.empty() ? "" : " failed:" + failed)};
}

Outcome c2_pca_invariance() {
    const auto t0 = std::chrono::steady_clock::now();
    double above = 0, below = 1e300;
    for (int k = 3; k <= 6; ++k) {
        const auto r = theory::pca_invariance(k, 3, 2024);
        above = std::max(above, r.max_dev_above);
        below = std::min(below, r.max_dev_below);
    }
    const double secs = seconds_since(t0);
    return {above <= 1e-6 && below > 1e-3 && secs < 10.0,
            "max_dev(d>=K-1)=" + fmt(above) + " min_k max_dev(d=K-2)=" + fmt(below) + " time=" + fmt(secs) + "s"};
}

// Shared by criteria 3 and 4.
struct SimplexRun {
    int k;
    double omega;
    double max_angle_error;
    double eps;
    long long violations;
    std::size_t n_constraints;
};
std::vector<SimplexRun> g_simplex_runs;
double g_simplex_secs = 0;

void ensure_simplex_runs() {
    if (!g_simplex_runs.empty()) return;
    const auto t0 = std::chrono::steady_clock::now();
    for (int k : {2, 3, 4}) {
        data::MixtureSpec s;
        s.k = k;
        s.dim = 6;
        s.n_per_cluster = 30;
        s.separation = 6.0;
        s.spread = 1.0;
        s.seed = 300 + static_cast<std::uint64_t>(k);
        const auto ds = data::gen_gaussian_mixture(s);
        const auto& labels = *ds.labels;
        const ConstraintSet cs = exhaustive(labels);
        const double w = geometry::minimal_admissible_omega(k);

        trainer::TrainConfig cfg;
        cfg.embed_dim = 3;
        cfg.omega = w;
        cfg.constraint_batch = cs.size();  // full batch
        cfg.epochs = 1500;
        cfg.early_stop.warmup_epochs = cfg.epochs;
        cfg.seed = 7;
        const auto res = trainer::train(ds.x, cs, cfg);
        const Matrix z = trainer::extract_sphere_embedding(res.model, ds.x);

        Matrix mean = Matrix::Zero(k, 3);
        for (std::size_t i = 0; i < labels.size(); ++i) mean.row(labels[i]) += z.row(static_cast<Eigen::Index>(i));
        const double target = std::acos(-1.0 / (k - 1));
        double err = 0;
        for (int a = 0; a < k; ++a)
            for (int b = a + 1; b < k; ++b)
                err = std::max(err, std::abs(geometry::angle_between(mean.row(a).transpose(), mean.row(b).transpose()) - target));

        const double eps = trainer::evaluate_angular_loss(res.model, ds.x, cs, w);
        const auto bounds = geometry::deviation_bounds(static_cast<long long>(cs.size()), eps, w);
        long long bad = 0;
        for (const auto& c : cs.items()) {
            const double th = angle(z, c.a, c.b);
            if (c.must_link() ? th > bounds.delta_plus : th < pi / w - bounds.delta_minus) ++bad;
        }
        g_simplex_runs.push_back({k, w, err, eps, bad, cs.size()});
    }
    g_simplex_secs = seconds_since(t0);
}

Outcome c3_simplex_3d() {
    ensure_simplex_runs();
    bool ok = g_simplex_secs < 300.0;
    std::string d;
    for (const auto& r : g_simplex_runs) {
        ok = ok && r.max_angle_error <= 0.05;
        d += "K=" + std::to_string(r.k) + " err=" + fmt(r.max_angle_error) + " ";
    }
    return {ok, d + "time=" + fmt(g_simplex_secs) + "s"};
}

Outcome c4_deviation_bounds() {
    ensure_simplex_runs();
    bool ok = true;
    std::string d;
    for (const auto& r : g_simplex_runs) {
        ok = ok && r.violations == 0;
        d += "K=" + std::to_string(r.k) + " eps=" + fmt(r.eps) + " violations=" + std::to_string(r.violations) + "/" +
             std::to_string(r.n_constraints) + " ";
    }
    return {ok, d};
}

Outcome c5_dimension_threshold() {
    const auto t0 = std::chrono::steady_clock::now();
    data::MixtureSpec s;
    s.k = 5;
    s.dim = 10;
    s.n_per_cluster = 30;
    s.separation = 6.0;
    s.spread = 1.0;
    s.seed = 55;
    const auto ds = data::gen_gaussian_mixture(s);
    const ConstraintSet cs = exhaustive(*ds.labels);
    const double w = geometry::minimal_admissible_omega(5);

    auto run = [&](int d) {
        trainer::TrainConfig cfg;
        cfg.embed_dim = d;
        cfg.omega = w;
        cfg.epochs = 600;
        cfg.early_stop.warmup_epochs = cfg.epochs;
        cfg.seed = 11;
        const auto res = trainer::train(ds.x, cs, cfg);
        const double l = trainer::evaluate_angular_loss(res.model, ds.x, cs, w);
        const Matrix z = trainer::extract_sphere_embedding(res.model, ds.x);
        const auto cm = clustering::kmeans(z, 5, {20, 300, 1e-10, 3});
        return std::pair{l, eval::accuracy(cm.assignments, *ds.labels)};
    };
    const auto [l3, a3] = run(3);
    const auto [l6, a6] = run(6);
    const double secs = seconds_since(t0);
    const bool ok = l6 <= 0.1 * l3 && a6 >= 0.95 && a3 <= 0.90 && secs < 600.0;
    return {ok, "omega=" + fmt(w) + " L_ang(D=3)=" + fmt(l3) + " L_ang(D=6)=" + fmt(l6) + " ACC(D=3)=" + fmt(a3) + " ACC(D=6)=" + fmt(a6) +
                    " time=" + fmt(secs) + "s"};
}

Outcome c6_end_to_end() {
    std::vector<double> tr, te, nm, ar, secs;
    for (std::uint64_t seed = 1; seed <= 5; ++seed) {
        const auto t0 = std::chrono::steady_clock::now();
        const Task t = four_cluster_task(seed);
        const auto cs = sample_balanced(*t.train.labels, 2000, derive_seed(seed, "acceptance.constraints"));
        trainer::TrainConfig cfg;
        cfg.embed_dim = 8;
        cfg.seed = seed;
        const auto res = trainer::train(t.train.x, cs, cfg);
        const Scores sc = cluster_and_score(res.model, t, 4, seed);
        tr.push_back(sc.train_acc);
        te.push_back(sc.test_acc);
        nm.push_back(sc.test_nmi);
        ar.push_back(sc.test_ari);
        secs.push_back(seconds_since(t0));
    }
    const double mtr = median(tr), mte = median(te), mnm = median(nm), mar = median(ar);
    const double slowest = *std::max_element(secs.begin(), secs.end());
    const bool ok = mtr >= 0.95 && mte >= 0.92 && mnm >= 0.90 && mar >= 0.88 && slowest < 300.0;
    return {ok, "median train_acc=" + fmt(mtr) + " test_acc=" + fmt(mte) + " test_nmi=" + fmt(mnm) + " test_ari=" + fmt(mar) +
                    " slowest_seed=" + fmt(slowest) + "s"};
}

Outcome c7_infer_k() {
    const fs::path dir = work_dir("c7");
    int hits = 0;
    bool plateau_ok = true;
    std::string d = "k_hat=[";
    for (std::uint64_t seed = 1; seed <= 5; ++seed) {
        const Task t = four_cluster_task(seed);
        const auto cs = sample_balanced(*t.train.labels, 2000, derive_seed(seed, "acceptance.constraints"));
        trainer::TrainConfig cfg;
        cfg.embed_dim = 12;
        cfg.seed = seed;
        const auto res = trainer::train(t.train.x, cs, cfg);
        const fs::path sd = dir / ("seed" + std::to_string(seed));
        fs::create_directories(sd);
        data::Dataset emb;
        emb.x = trainer::extract_sphere_embedding(res.model, t.train.x);
        data::save_csv(sd / "embedding.csv", emb);
        write_constraints_csv(sd / "constraints.csv", cs);
        const int code = run_cli("infer-k --embedding " + (sd / "embedding.csv").string() + " --no-labels --constraints " +
                                 (sd / "constraints.csv").string() + " --method pca --rho 0.05 --out " + (sd / "k").string());
        int k_hat = -1;
        if (code == 0) {
            std::ifstream in(sd / "k/k_estimate.json");
            const auto j = json::parse(in);
            k_hat = j["k_hat"].get<int>();
            const double pv = j["plateau_value"].get<double>();
            if (k_hat == 4) {
                ++hits;
                if (!(pv > pi / 3 && pv <= std::acos(-1.0 / 3) + 1e-12)) plateau_ok = false;
            }
        }
        d += std::to_string(k_hat) + (seed < 5 ? "," : "]");
    }

    // exact-simplex control for the alternative methods
    Matrix z = Matrix::Zero(4 * 25, 12);
    const Matrix v = geometry::regular_simplex(4, 12);
    for (int c = 0; c < 4; ++c)
        for (int i = 0; i < 25; ++i) z.row(c * 25 + i) = v.row(c);
    data::Dataset ctrl;
    ctrl.x = z;
    data::save_csv(dir / "simplex.csv", ctrl);
    auto alt = [&](const std::string& m) {
        if (run_cli("infer-k --embedding " + (dir / "simplex.csv").string() + " --no-labels --method " + m + " --k-range 2:10 --out " +
                    (dir / m).string()) != 0)
            return -1;
        std::ifstream in(dir / m / "k_estimate.json");
        return json::parse(in)["k_hat"].get<int>();
    };
    const int ksc = alt("sc"), klt = alt("lifetime");
    const bool ok = hits >= 4 && plateau_ok && ksc == 4 && klt == 4;
    return {ok, d + " hits=" + std::to_string(hits) + "/5 plateau_in_range=" + (plateau_ok ? "yes" : "no") + " sc=" + std::to_string(ksc) +
                    " lifetime=" + std::to_string(klt)};
}

Outcome c8_imbalanced() {
    std::vector<double> a0, a2;
    for (std::uint64_t seed = 1; seed <= 5; ++seed) {
        const Task t = four_cluster_task(seed);
        const auto g = sample_imbalanced(*t.train.labels, {500, 2500, 5000}, 0, derive_seed(seed, "acceptance.imb"));
        for (auto [cs, out] : {std::pair{&g.imb0, &a0}, std::pair{&g.imb2, &a2}}) {
            trainer::TrainConfig cfg;
            cfg.embed_dim = 8;
            cfg.seed = seed;
            const auto res = trainer::train(t.train.x, *cs, cfg);
            out->push_back(cluster_and_score(res.model, t, 4, seed).test_acc);
        }
    }
    const double m0 = median(a0), m2 = median(a2);
    return {std::abs(m2 - m0) <= 0.05, "median test_acc IMB0=" + fmt(m0) + " IMB2=" + fmt(m2)};
}

Outcome c9_metric_oracles() {
    Rng rng(99);
    std::uniform_int_distribution<int> nn(2, 30), kk(1, 5);
    int acc_bad = 0;
    double nmi_err = 0, ari_err = 0;
    for (int t = 0; t < 100; ++t) {
        const auto n = static_cast<std::size_t>(nn(rng));
        const int kp = kk(rng), kt = kk(rng);
        std::uniform_int_distribution<int> up(0, kp - 1), ut(0, kt - 1);
        std::vector<int> p(n), g(n);
        for (auto& x : p) x = up(rng);
        for (auto& x : g) x = ut(rng);
        if (eval::accuracy(p, g) != oracle::brute_force_accuracy(p, g)) ++acc_bad;
        nmi_err = std::max(nmi_err, std::abs(eval::nmi(p, g) - oracle::direct_nmi(p, g)));
        ari_err = std::max(ari_err, std::abs(eval::ari(p, g) - oracle::pair_count_ari(p, g)));
    }
    return {acc_bad == 0 && nmi_err <= 1e-12 && ari_err <= 1e-12,
            "acc_mismatches=" + std::to_string(acc_bad) + " max_nmi_err=" + fmt(nmi_err) + " max_ari_err=" + fmt(ari_err)};
}

Outcome c10_gradient() {
    Rng rng(10);
    std::normal_distribution<double> nd;
    const loss::LossConfig cfg{1.8, 0.02, 1e-12};
    double worst = 0;
    int points = 0, rejected = 0;
    while (points < 20) {
        auto model = net::Autoencoder::create({6, {12, 8}, 4}, rng());
        for (std::size_t l = 0; l < 3; ++l)
            for (auto& b : model.bias(net::Part::Encoder, l)) b = 0.3 * nd(rng);
        for (std::size_t l = 0; l < 3; ++l)
            for (auto& b : model.bias(net::Part::Decoder, l)) b = 0.3 * nd(rng);
        Matrix x(8, 6);
        for (Eigen::Index i = 0; i < x.rows(); ++i)
            for (Eigen::Index j = 0; j < x.cols(); ++j) x(i, j) = nd(rng);
        std::vector<Constraint> cs;
        std::uniform_int_distribution<std::size_t> pick(0, 7);
        while (cs.size() < 6) {
            const std::size_t a = pick(rng), b = pick(rng);
            if (a == b) continue;
            cs.push_back(make_constraint(a, b, cs.size() % 2 ? Link::CannotLink : Link::MustLink));
        }

        // reject points near ReLU kinks, the flat-zone boundary or |cos| = 1
        net::Trace te;
        const Matrix z = model.forward(net::Part::Encoder, x, &te);
        const Matrix zn = net::normalize_rows(z, 0.0);
        net::Trace td;
        model.forward(net::Part::Decoder, zn, &td);
        double margin = 1e300;
        for (std::size_t l = 0; l < te.pre.size(); ++l)
            if (model.layers(net::Part::Encoder)[l].activation == net::Activation::ReLU) margin = std::min(margin, te.pre[l].cwiseAbs().minCoeff());
        for (std::size_t l = 0; l < td.pre.size(); ++l)
            if (model.layers(net::Part::Decoder)[l].activation == net::Activation::ReLU) margin = std::min(margin, td.pre[l].cwiseAbs().minCoeff());
        bool near_singular = margin < 1e-4;
        for (const auto& c : cs) {
            const double cv = zn.row(static_cast<Eigen::Index>(c.a)).dot(zn.row(static_cast<Eigen::Index>(c.b)));
            if (std::abs(cv) > 0.999) near_singular = true;
            if (!c.must_link() && std::abs(cfg.omega * std::acos(geometry::clamp_cos(cv)) - pi) < 1e-3) near_singular = true;
        }
        if (near_singular) {
            ++rejected;
            continue;
        }
        const net::LossFn f = [&](const net::Autoencoder& m, std::span<double> grad) {
            return trainer::batch_loss(m, x, cs, x, cfg, 0.0, grad).l_total;
        };
        worst = std::max(worst, net::numerical_gradient_check(model, f, 1e-4, 1e-6).max_rel_error);
        ++points;
    }
    return {worst < 1e-4, "points=20 rejected=" + std::to_string(rejected) + " max_rel_error=" + fmt(worst)};
}

}  // namespace

int main(int argc, char** argv) {
    const std::vector<std::pair<std::string, std::function<Outcome()>>> criteria{
        {"theory oracle suite", c1_theory},
        {"PCA angle invariance", c2_pca_invariance},
        {"3D simplex reproduction", c3_simplex_3d},
        {"deviation-bound conformance", c4_deviation_bounds},
        {"dimension threshold", c5_dimension_threshold},
        {"end-to-end recovery and generalization", c6_end_to_end},
        {"K inference", c7_infer_k},
        {"imbalanced-constraint robustness", c8_imbalanced},
        {"metric oracles", c9_metric_oracles},
        {"gradient correctness", c10_gradient},
    };
    std::set<int> only;
    for (int i = 1; i < argc; ++i) only.insert(std::atoi(argv[i]));

    int failures = 0;
    for (std::size_t i = 0; i < criteria.size(); ++i) {
        const int id = static_cast<int>(i) + 1;
        if (!only.empty() && !only.count(id)) continue;
        Outcome o;
        try {
            o = criteria[i].second();
        } catch (const std::exception& ex) {
            o = {false, std::string("exception: ") + ex.what()};
        }
        if (!o.pass) ++failures;
        std::cout << (o.pass ? "[PASS] " : "[FAIL] ") << id << ". " << criteria[i].first << " | " << o.detail << std::endl;
    }
    std::cout << (failures ? std::to_string(failures) + " criteria failed" : "all criteria passed") << std::endl;
    return failures ? 1 : 0;
}
