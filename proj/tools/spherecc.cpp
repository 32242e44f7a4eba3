// spherecc: command-line front end.
//
// Exit codes: 0 success, 1 property failure, 2 usage or validation error,
// 3 numerical divergence.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "spherecc/clustering.hpp"
#include "spherecc/constraints.hpp"
#include "spherecc/data.hpp"
#include "spherecc/eval.hpp"
#include "spherecc/geometry.hpp"
#include "spherecc/kinfer.hpp"
#include "spherecc/theory.hpp"
#include "spherecc/trainer.hpp"

namespace fs = std::filesystem;
using namespace spherecc;

namespace {

constexpr int kOk = 0;
constexpr int kPropertyFailure = 1;
constexpr int kUsage = 2;
constexpr int kDiverged = 3;

struct UsageError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

std::string now_iso8601() {
    const std::time_t t = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
    std::ostringstream os;
    os << std::put_time(std::gmtime(&t), "%Y-%m-%dT%H:%M:%SZ");
    return os.str();
}

void write_json(const fs::path& path, const nlohmann::json& j) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot open " + path.string() + " for writing");
    out << j.dump(2) << '\n';
}

std::string join(const std::vector<std::string>& v, char sep) {
    std::string out;
    for (std::size_t i = 0; i < v.size(); ++i) out += (i ? std::string(1, sep) : "") + v[i];
    return out;
}

bool is_meta_option(const CLI::Option* opt) {
    const auto& names = opt->get_lnames();
    return names.empty() || names.front() == "help" || names.front() == "config";
}

// Resolved value of every option, one `key=value` line each; readable back
// through --config.
void write_effective_config(const CLI::App& sub, const fs::path& dir) {
    std::ofstream out(dir / "effective_config.ini");
    if (!out) throw std::runtime_error("cannot write effective config into " + dir.string());
    for (const CLI::Option* opt : sub.get_options()) {
        if (is_meta_option(opt)) continue;
        std::string value;
        if (opt->count() == 0) {
            value = opt->get_default_str();
            if (value.size() >= 2 && value.front() == '[' && value.back() == ']') value = value.substr(1, value.size() - 2);
        } else if (opt->get_expected_max() == 0) {
            value = opt->as<bool>() ? "true" : "false";
        } else {
            value = join(opt->results(), ',');
        }
        if (value.empty()) continue;
        if (value.find_first_of(" \t#;") != std::string::npos) value = '"' + value + '"';
        out << opt->get_lnames().front() << '=' << value << '\n';
    }
}

// Turns INI entries into `--key=value` tokens for options the command line
// does not already set, so that explicit flags take precedence.
std::vector<std::string> config_tokens(const CLI::App& sub, const fs::path& path, const std::vector<std::string>& given) {
    if (!fs::is_regular_file(path)) throw UsageError("config file not found: " + path.string());
    std::vector<CLI::ConfigItem> items;
    try {
        items = CLI::ConfigINI().from_file(path.string());
    } catch (const CLI::Error& e) {
        throw UsageError("cannot parse config " + path.string() + ": " + e.what());
    }
    auto on_command_line = [&](const CLI::Option* opt) {
        for (const auto& name : opt->get_lnames())
            for (const auto& tok : given)
                if (tok == "--" + name || tok.rfind("--" + name + "=", 0) == 0) return true;
        return false;
    };
    std::vector<std::string> tokens;
    for (const auto& item : items) {
        if (item.name == "++" || item.name == "--") continue;  // section markers
        const CLI::Option* opt = sub.get_option_no_throw("--" + item.name);
        if (!opt || is_meta_option(opt)) throw UsageError("unknown config key '" + item.name + "' in " + path.string());
        if (on_command_line(opt)) continue;
        tokens.push_back("--" + item.name + "=" + join(item.inputs, ','));
    }
    return tokens;
}

void prepare_out(const fs::path& dir) {
    std::error_code ec;
    fs::create_directories(dir, ec);
    if (ec) throw std::runtime_error("cannot create output directory " + dir.string() + ": " + ec.message());
}

void require_file(const fs::path& p, const std::string& what) {
    if (!fs::is_regular_file(p)) throw UsageError(what + " not found: " + p.string());
}

std::string hex64(std::uint64_t v) {
    std::ostringstream os;
    os << std::hex << std::setw(16) << std::setfill('0') << v;
    return os.str();
}

data::Dataset embedding_dataset(const Matrix& z) {
    data::Dataset ds;
    ds.x = z;
    ds.name = "sphere_embedding";
    return ds;
}

// ---------------------------------------------------------------- gen

struct GenOpts {
    int k = 0;
    int dim = 10;
    std::size_t n = 400;
    std::vector<double> proportions;
    double separation = 10.0;
    double spread = 1.0;
    double test_fraction = 0.2;
    std::size_t constraints = 2000;
    std::vector<std::size_t> imb;
    int imb_cluster = 0;
    bool standardize = false;
    std::uint64_t seed = 0;
    std::string out;
};

void add_gen(CLI::App& app, GenOpts& o) {
    app.add_option("--k", o.k, "Number of clusters")->required()->check(CLI::Range(2, 1000));
    app.add_option("--dim", o.dim, "Feature dimension")->capture_default_str();
    app.add_option("--n", o.n, "Total number of instances")->capture_default_str();
    app.add_option("--proportions", o.proportions, "Cluster proportions, comma separated")->delimiter(',');
    app.add_option("--separation", o.separation, "Norm of each cluster mean")->capture_default_str();
    app.add_option("--spread", o.spread, "Per-coordinate standard deviation")->capture_default_str();
    app.add_option("--test-fraction", o.test_fraction, "Held-out fraction")->capture_default_str();
    app.add_option("--constraints", o.constraints, "Balanced constraints over the training split")->capture_default_str();
    app.add_option("--imb", o.imb, "Nested IMB sizes m0,m1,m2")->delimiter(',')->expected(3);
    app.add_option("--imb-cluster", o.imb_cluster, "Cluster receiving the extra cannot-links")->capture_default_str();
    app.add_flag("--standardize", o.standardize, "Standardize feature columns");
    app.add_option("--seed", o.seed, "Root seed")->capture_default_str();
    app.add_option("--out", o.out, "Output directory")->required();
}

int run_gen(const CLI::App& sub, const GenOpts& o) {
    if (o.dim < 2) throw UsageError("--dim must be >= 2");
    if (o.n < static_cast<std::size_t>(o.k)) throw UsageError("--n must be at least --k");
    if (!(o.test_fraction > 0.0 && o.test_fraction < 1.0)) throw UsageError("--test-fraction must lie in (0, 1)");
    if (!o.proportions.empty() && static_cast<int>(o.proportions.size()) != o.k)
        throw UsageError("--proportions needs exactly k values");
    if (!o.imb.empty() && (o.imb_cluster < 0 || o.imb_cluster >= o.k)) throw UsageError("--imb-cluster out of range");

    data::MixtureSpec spec;
    spec.k = o.k;
    spec.dim = o.dim;
    spec.n_total = o.n;
    spec.proportions = o.proportions.empty() ? std::vector<double>(static_cast<std::size_t>(o.k), 1.0 / o.k) : o.proportions;
    spec.separation = o.separation;
    spec.spread = o.spread;
    spec.seed = derive_seed(o.seed, "cli.gen.mixture");
    data::Dataset ds = data::gen_gaussian_mixture(spec);
    if (o.standardize) data::standardize(ds);
    ds = data::split(ds, o.test_fraction, derive_seed(o.seed, "cli.gen.split"));
    const data::Dataset train = data::subset(ds, ds.split->train_idx);
    const data::Dataset test = data::subset(ds, ds.split->test_idx);

    const fs::path out = o.out;
    prepare_out(out);
    data::save_csv(out / "data.csv", ds);
    data::save_csv(out / "train.csv", train);
    data::save_csv(out / "test.csv", test);
    {
        std::ofstream sp(out / "split.csv");
        sp << "index,part\n";
        for (std::size_t i : ds.split->train_idx) sp << i << ",train\n";
        for (std::size_t i : ds.split->test_idx) sp << i << ",test\n";
    }
    const ConstraintSet cs = sample_balanced(*train.labels, o.constraints, derive_seed(o.seed, "cli.gen.constraints"));
    write_constraints_csv(out / "constraints.csv", cs);

    nlohmann::json manifest{{"created", now_iso8601()},
                            {"seed", o.seed},
                            {"k", o.k},
                            {"dim", o.dim},
                            {"n", ds.size()},
                            {"n_train", train.size()},
                            {"n_test", test.size()},
                            {"constraints", cs.size()},
                            {"must_link", cs.count_must_link()},
                            {"files", {"data.csv", "train.csv", "test.csv", "split.csv", "constraints.csv"}}};
    if (!o.imb.empty()) {
        const ImbGroup g = sample_imbalanced(*train.labels, {o.imb[0], o.imb[1], o.imb[2]}, o.imb_cluster,
                                             derive_seed(o.seed, "cli.gen.imb"));
        if (!g.imb0.is_subset_of(g.imb1) || !g.imb1.is_subset_of(g.imb2))
            throw std::logic_error("IMB nesting violated");
        write_imb_group(out, g);
        manifest["imb"] = {{"sizes", o.imb}, {"imb_cluster", o.imb_cluster}, {"nested", true}};
    }
    write_json(out / "manifest.json", manifest);
    write_effective_config(sub, out);
    std::cout << "wrote " << ds.size() << " instances (" << train.size() << " train / " << test.size() << " test) and "
              << cs.size() << " constraints to " << out.string() << '\n';
    return kOk;
}

// ---------------------------------------------------------------- train

struct TrainOpts {
    std::string data, constraints, out;
    bool has_labels = true;
    int epochs = 300;
    std::size_t constraint_batch = 256;
    std::size_t instance_batch = 0;  // 0: auto
    double lr = 1e-3;
    double lambda = 0.02;
    std::string omega = "auto";
    int k = 0;
    int embed_dim = 10;
    std::vector<int> hidden{64, 64, 256};
    std::uint64_t seed = 0;
    int warmup = 100;
    double rel_tol = 0.1;
    int patience = 5;
};

void add_train(CLI::App& app, TrainOpts& o) {
    app.add_option("--data", o.data, "Training data CSV")->required();
    app.add_option("--constraints", o.constraints, "Constraint CSV (a,b,y)")->required();
    app.add_option("--out", o.out, "Output directory")->required();
    app.add_flag("--has-labels,!--no-labels", o.has_labels, "Last data column holds labels")->default_str("true");
    app.add_option("--epochs", o.epochs)->capture_default_str();
    app.add_option("--constraint-batch", o.constraint_batch)->capture_default_str();
    app.add_option("--instance-batch", o.instance_batch, "0 derives it from the constraint batch")->capture_default_str();
    app.add_option("--lr", o.lr)->capture_default_str();
    app.add_option("--lambda", o.lambda, "Reconstruction weight")->capture_default_str();
    app.add_option("--omega", o.omega, "auto (2), exact (minimal for --k), or a number")->capture_default_str();
    app.add_option("--k", o.k, "Cluster count, needed by --omega exact")->capture_default_str();
    app.add_option("--embed-dim", o.embed_dim)->capture_default_str();
    app.add_option("--hidden", o.hidden, "Hidden widths, comma separated")->delimiter(',')->capture_default_str();
    app.add_option("--seed", o.seed)->capture_default_str();
    app.add_option("--warmup", o.warmup, "Epochs before early stopping may trigger")->capture_default_str();
    app.add_option("--rel-tol", o.rel_tol, "Early-stop relative loss change")->capture_default_str();
    app.add_option("--patience", o.patience)->capture_default_str();
}

trainer::TrainConfig train_config(const TrainOpts& o) {
    trainer::TrainConfig cfg;
    cfg.epochs = o.epochs;
    cfg.constraint_batch = o.constraint_batch;
    if (o.instance_batch > 0) cfg.instance_batch = o.instance_batch;
    cfg.lr = o.lr;
    cfg.lambda = o.lambda;
    cfg.embed_dim = o.embed_dim;
    cfg.hidden = o.hidden;
    cfg.seed = o.seed;
    cfg.early_stop = {o.warmup, o.rel_tol, o.patience};
    if (o.embed_dim < 1) throw UsageError("--embed-dim must be >= 1");
    if (o.omega == "auto") {
        cfg.omega.reset();
    } else if (o.omega == "exact") {
        if (o.k < 2) throw UsageError("--omega exact requires --k >= 2");
        const auto b = geometry::valid_omega(o.k, o.embed_dim);
        if (b.status == geometry::OmegaStatus::Infeasible)
            throw UsageError("no valid omega: embed dim " + std::to_string(o.embed_dim) + " < k - 1 = " + std::to_string(o.k - 1));
        cfg.omega = *b.omega_min;
    } else {
        std::size_t used = 0;
        double w = 0.0;
        try {
            w = std::stod(o.omega, &used);
        } catch (const std::exception&) {
            used = 0;
        }
        if (used != o.omega.size()) throw UsageError("--omega must be auto, exact or a number");
        cfg.omega = w;
    }
    try {
        cfg.validate();
    } catch (const std::invalid_argument& e) {
        throw UsageError(e.what());
    }
    return cfg;
}

int run_train(const CLI::App& sub, const TrainOpts& o) {
    const trainer::TrainConfig cfg = train_config(o);
    require_file(o.data, "data file");
    require_file(o.constraints, "constraint file");
    const data::Dataset ds = data::load_csv(o.data, o.has_labels);
    const ConstraintSet cs = read_constraints_csv(o.constraints, ds.size());
    const fs::path out = o.out;
    prepare_out(out);
    write_effective_config(sub, out);

    const std::string created = now_iso8601();
    trainer::TrainResult res = [&] {
        try {
            return trainer::train(ds.x, cs, cfg);
        } catch (const DivergedError& e) {
            write_json(out / "train_report.json", {{"stop_reason", "diverged"}, {"final_epoch", e.epoch()}, {"omega", cfg.effective_omega()}});
            throw;
        }
    }();
    const std::string hash = hex64(fnv1a("input_dim=" + std::to_string(res.model.input_dim()) + ";" + cfg.canonical()));
    net::save_checkpoint(out / "model.json", res.model, hash);
    trainer::write_report_json(out / "train_report.json", res.report);
    trainer::write_loss_csv(out / "loss.csv", res.report);
    data::save_csv(out / "embedding.csv", embedding_dataset(trainer::extract_sphere_embedding(res.model, ds.x)));
    write_json(out / "train_manifest.json", {{"created", created},
                                             {"wall_seconds", res.report.wall_seconds},
                                             {"config_hash", hash},
                                             {"data", o.data},
                                             {"constraints", o.constraints}});
    const auto& last = res.report.epochs.back();
    std::cout << "trained " << res.report.final_epoch << " epochs (" << res.report.stop_reason << "), omega=" << res.report.omega
              << ", L_ang=" << last.l_ang << ", L_recon=" << last.l_recon << '\n';
    return kOk;
}

// ---------------------------------------------------------------- cluster

struct ClusterOpts {
    std::string model, data, test, centroids, out;
    bool has_labels = true;
    int k = 0;
    std::string method = "kmeans";
    int restarts = 20;
    std::size_t ward_cap = clustering::kDefaultWardCap;
    std::uint64_t seed = 0;
};

void add_cluster(CLI::App& app, ClusterOpts& o) {
    app.add_option("--model", o.model, "Checkpoint from train")->required();
    app.add_option("--data", o.data, "Data to cluster")->required();
    app.add_option("--test", o.test, "Held-out data predicted with the fitted centroids");
    app.add_option("--k", o.k, "Number of clusters")->required()->check(CLI::Range(2, 100000));
    app.add_option("--method", o.method)->check(CLI::IsMember({"kmeans", "ward"}))->capture_default_str();
    app.add_option("--centroids", o.centroids, "Use a saved cluster model instead of fitting");
    app.add_option("--restarts", o.restarts)->capture_default_str();
    app.add_option("--ward-cap", o.ward_cap, "Largest N accepted by Ward linkage")->capture_default_str();
    app.add_option("--seed", o.seed)->capture_default_str();
    app.add_flag("--has-labels,!--no-labels", o.has_labels)->default_str("true");
    app.add_option("--out", o.out, "Output directory")->required();
}

int run_cluster(const CLI::App& sub, const ClusterOpts& o) {
    if (o.restarts < 1) throw UsageError("--restarts must be >= 1");
    require_file(o.model, "checkpoint");
    require_file(o.data, "data file");
    if (!o.test.empty()) require_file(o.test, "test file");
    if (!o.centroids.empty()) require_file(o.centroids, "centroid file");

    const net::Checkpoint ck = net::load_checkpoint(o.model);
    const data::Dataset ds = data::load_csv(o.data, o.has_labels);
    if (static_cast<int>(ds.dim()) != ck.model.input_dim())
        throw UsageError("data has " + std::to_string(ds.dim()) + " features, model expects " + std::to_string(ck.model.input_dim()));
    const fs::path out = o.out;
    prepare_out(out);
    write_effective_config(sub, out);

    const Matrix z = trainer::extract_sphere_embedding(ck.model, ds.x);
    clustering::ClusterModel cm;
    if (!o.centroids.empty()) {
        cm = clustering::load_cluster_model(o.centroids);
        if (cm.k != o.k) throw UsageError("centroid file has k=" + std::to_string(cm.k) + " but --k is " + std::to_string(o.k));
        cm.assignments = clustering::assign_nearest(cm.centroids, z);
    } else if (o.method == "ward") {
        cm = clustering::agglomerative_ward(z, o.k, o.ward_cap).model;
    } else {
        cm = clustering::kmeans(z, o.k, {o.restarts, 300, 1e-10, derive_seed(o.seed, "cli.cluster.kmeans")});
    }
    clustering::save_cluster_model(out / "cluster_model.json", cm);
    clustering::write_assignments_csv(out / "assignments.csv", cm.assignments);

    nlohmann::json summary{{"method", o.centroids.empty() ? o.method : std::string("centroids")}, {"k", o.k}};
    if (fs::exists(out / "metrics.csv")) fs::remove(out / "metrics.csv");
    if (ds.labels) {
        const auto rep = eval::evaluate(cm.assignments, *ds.labels);
        eval::write_metrics_json(out / "metrics_train.json", rep);
        eval::append_metrics_csv(out / "metrics.csv", "train", rep);
        summary["train"] = {{"acc", rep.acc}, {"nmi", rep.nmi}, {"ari", rep.ari}};
        std::cout << "train: ACC=" << rep.acc << " NMI=" << rep.nmi << " ARI=" << rep.ari << '\n';
    }
    if (!o.test.empty()) {
        const data::Dataset te = data::load_csv(o.test, o.has_labels);
        const auto pred = clustering::predict(cm, ck.model, te.x);
        clustering::write_assignments_csv(out / "test_assignments.csv", pred);
        if (te.labels) {
            const auto rep = eval::evaluate(pred, *te.labels);
            eval::write_metrics_json(out / "metrics_test.json", rep);
            eval::append_metrics_csv(out / "metrics.csv", "test", rep);
            summary["test"] = {{"acc", rep.acc}, {"nmi", rep.nmi}, {"ari", rep.ari}};
            std::cout << "test:  ACC=" << rep.acc << " NMI=" << rep.nmi << " ARI=" << rep.ari << '\n';
        }
    }
    write_json(out / "cluster_summary.json", summary);
    return kOk;
}

// ---------------------------------------------------------------- infer-k

struct InferOpts {
    std::string embedding, model, data, constraints, out;
    bool has_labels = true;
    std::string method = "pca";
    double rho = 0.05;
    double rel_rise_tol = 0.05;
    double floor = std::numbers::pi / 3.0;
    int lookahead = 2;
    std::string k_range = "2:10";
    int restarts = 5;
    std::size_t subsample = 5000;
    std::size_t ward_cap = clustering::kDefaultWardCap;
    std::uint64_t seed = 0;
};

void add_infer(CLI::App& app, InferOpts& o) {
    app.add_option("--embedding", o.embedding, "Sphere embedding CSV (from train)");
    app.add_option("--model", o.model, "Checkpoint; used with --data instead of --embedding");
    app.add_option("--data", o.data, "Data CSV for --model");
    app.add_flag("--has-labels,!--no-labels", o.has_labels, "Last --data column holds labels")->default_str("true");
    app.add_option("--constraints", o.constraints, "Constraint CSV; cannot-links drive the pca method");
    app.add_option("--method", o.method)->check(CLI::IsMember({"pca", "sc", "lifetime"}))->capture_default_str();
    app.add_option("--rho", o.rho, "Tail fraction of smallest angles")->capture_default_str();
    app.add_option("--rel-rise-tol", o.rel_rise_tol)->capture_default_str();
    app.add_option("--floor", o.floor, "Plateau values must exceed this angle")->capture_default_str();
    app.add_option("--lookahead", o.lookahead)->capture_default_str();
    app.add_option("--k-range", o.k_range, "Candidates a:b for sc and lifetime")->capture_default_str();
    app.add_option("--restarts", o.restarts)->capture_default_str();
    app.add_option("--subsample", o.subsample)->capture_default_str();
    app.add_option("--ward-cap", o.ward_cap)->capture_default_str();
    app.add_option("--seed", o.seed)->capture_default_str();
    app.add_option("--out", o.out, "Output directory")->required();
}

std::pair<int, int> parse_range(const std::string& s) {
    const auto colon = s.find(':');
    if (colon == std::string::npos) throw UsageError("--k-range must look like a:b");
    try {
        std::size_t u1 = 0, u2 = 0;
        const int a = std::stoi(s.substr(0, colon), &u1);
        const int b = std::stoi(s.substr(colon + 1), &u2);
        if (u1 != colon || u2 != s.size() - colon - 1) throw UsageError("--k-range must look like a:b");
        if (a < 2 || b < a) throw UsageError("--k-range needs 2 <= a <= b");
        return {a, b};
    } catch (const std::logic_error&) {
        throw UsageError("--k-range must look like a:b");
    }
}

int run_infer(const CLI::App& sub, const InferOpts& o) {
    const auto [k_lo, k_hi] = parse_range(o.k_range);
    if (!(o.rho > 0.0 && o.rho <= 1.0)) throw UsageError("--rho must lie in (0, 1]");
    if (o.embedding.empty() == o.model.empty()) throw UsageError("give exactly one of --embedding or --model");
    if (!o.model.empty() && o.data.empty()) throw UsageError("--model needs --data");
    if (o.method == "pca" && o.constraints.empty()) throw UsageError("--method pca needs --constraints");

    Matrix z;
    if (!o.embedding.empty()) {
        require_file(o.embedding, "embedding file");
        z = data::load_csv(o.embedding, false).x;
    } else {
        require_file(o.model, "checkpoint");
        require_file(o.data, "data file");
        const net::Checkpoint ck = net::load_checkpoint(o.model);
        z = trainer::extract_sphere_embedding(ck.model, data::load_csv(o.data, o.has_labels).x);
    }
    const fs::path out = o.out;
    prepare_out(out);
    write_effective_config(sub, out);

    kinfer::KEstimate est;
    if (o.method == "pca") {
        require_file(o.constraints, "constraint file");
        const ConstraintSet cs = read_constraints_csv(o.constraints, static_cast<std::size_t>(z.rows()));
        if (cs.negatives().empty()) throw UsageError("no negative constraints in " + o.constraints);
        try {
            est = kinfer::infer_k_pca(z, cs, o.rho, {o.rel_rise_tol, o.floor, o.lookahead});
        } catch (const kinfer::NoPlateauError& e) {
            kinfer::write_curve_csv(out / "delta_curve.csv", e.curve());
            std::cerr << "error: no plateau found; curve written to " << (out / "delta_curve.csv").string() << '\n';
            return kPropertyFailure;
        }
        kinfer::write_curve_csv(out / "delta_curve.csv", *est.curve);
        if (est.curve->warning()) std::cerr << "warning: every projected pair was degenerate at some d\n";
    } else if (o.method == "sc") {
        est = kinfer::infer_k_silhouette(z, {k_lo, k_hi, o.restarts, o.subsample, derive_seed(o.seed, "cli.infer.sc")});
    } else {
        est = kinfer::infer_k_lifetime(z, k_lo, k_hi, o.ward_cap);
    }
    kinfer::write_estimate_json(out / "k_estimate.json", est);
    std::cout << "k_hat=" << est.k_hat << " (" << kinfer::method_name(est.method);
    if (est.method == kinfer::Method::PcaPlateau) std::cout << ", d*=" << est.d_star << ", plateau=" << est.plateau_value;
    std::cout << ")\n";
    for (std::size_t i = 0; i < est.candidates.size(); ++i)
        std::cout << "  k=" << est.candidates[i] << " score=" << est.scores[i] << '\n';
    return kOk;
}

// ---------------------------------------------------------------- verify-theory

struct TheoryOpts {
    bool json = false;
    int k_max = 10;
    std::uint64_t seed = 0;
};

void add_theory(CLI::App& app, TheoryOpts& o) {
    app.add_flag("--json", o.json, "Print results as JSON");
    app.add_option("--k-max", o.k_max, "Largest cluster count in the sweep")->check(CLI::Range(3, 64))->capture_default_str();
    app.add_option("--seed", o.seed)->capture_default_str();
}

int run_theory(const TheoryOpts& o) {
    theory::TheoryOptions opts;
    opts.k_max = o.k_max;
    opts.seed = o.seed;
    const auto results = theory::run_all(opts);
    bool all = true;
    nlohmann::json arr = nlohmann::json::array();
    for (const auto& r : results) {
        all = all && r.passed;
        arr.push_back({{"name", r.name}, {"passed", r.passed}, {"max_error", r.max_error}, {"detail", r.detail}});
        if (!o.json) {
            std::cout << (r.passed ? "PASS " : "FAIL ") << r.name << "  max_error=" << r.max_error;
            if (!r.detail.empty()) std::cout << "  " << r.detail;
            std::cout << '\n';
        }
    }
    if (o.json) std::cout << nlohmann::json{{"passed", all}, {"checks", arr}}.dump(2) << '\n';
    return all ? kOk : kPropertyFailure;
}

// ---------------------------------------------------------------- eval

struct EvalOpts {
    std::string pred, truth, out;
};

void add_eval(CLI::App& app, EvalOpts& o) {
    app.add_option("--pred", o.pred, "Assignments CSV (index,cluster)")->required();
    app.add_option("--truth", o.truth, "Labeled data CSV (label in the last column)")->required();
    app.add_option("--out", o.out, "Write metrics JSON here");
}

int run_eval(const EvalOpts& o) {
    require_file(o.pred, "prediction file");
    require_file(o.truth, "truth file");
    const auto pred = clustering::read_assignments_csv(o.pred);
    const data::Dataset truth = data::load_csv(o.truth, true);
    if (pred.size() != truth.size())
        throw UsageError("length mismatch: " + std::to_string(pred.size()) + " predictions vs " + std::to_string(truth.size()) + " labels");
    const auto rep = eval::evaluate(pred, *truth.labels);
    if (!o.out.empty()) eval::write_metrics_json(o.out, rep);
    std::cout << nlohmann::json{{"acc", rep.acc}, {"nmi", rep.nmi}, {"ari", rep.ari}, {"n", rep.n}}.dump() << '\n';
    return kOk;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Constrained clustering on the unit hypersphere"};
    app.require_subcommand(1);

    GenOpts gen;
    TrainOpts tr;
    ClusterOpts cl;
    InferOpts inf;
    TheoryOpts th;
    EvalOpts ev;
    auto* s_gen = app.add_subcommand("gen", "Generate a Gaussian mixture, split and constraints");
    auto* s_train = app.add_subcommand("train", "Learn a sphere embedding from pairwise constraints");
    auto* s_cluster = app.add_subcommand("cluster", "Cluster the embedding and evaluate");
    auto* s_infer = app.add_subcommand("infer-k", "Estimate the number of clusters");
    auto* s_theory = app.add_subcommand("verify-theory", "Run the geometric oracle checks");
    auto* s_eval = app.add_subcommand("eval", "ACC / NMI / ARI of an assignment file");
    add_gen(*s_gen, gen);
    add_train(*s_train, tr);
    add_cluster(*s_cluster, cl);
    add_infer(*s_infer, inf);
    add_theory(*s_theory, th);
    add_eval(*s_eval, ev);
    std::string config_path;
    for (auto* s : {s_gen, s_train, s_cluster, s_infer})
        s->add_option("--config", config_path, "INI file of key=value lines; command-line flags take precedence");

    // Expand a subcommand's --config into ordinary tokens before parsing.
    std::vector<std::string> args(argv + 1, argv + argc);
    try {
        for (std::size_t i = 0; i < args.size(); ++i) {
            CLI::App* sub = app.get_subcommand_no_throw(args[i]);
            if (!sub || sub == s_theory || sub == s_eval) continue;
            std::vector<std::string> rest(args.begin() + static_cast<std::ptrdiff_t>(i) + 1, args.end());
            fs::path cfg;
            for (std::size_t j = 0; j < rest.size(); ++j) {
                if (rest[j] == "--config" && j + 1 < rest.size()) cfg = rest[j + 1];
                else if (rest[j].rfind("--config=", 0) == 0) cfg = rest[j].substr(9);
            }
            if (!cfg.empty()) {
                const auto extra = config_tokens(*sub, cfg, rest);
                args.insert(args.begin() + static_cast<std::ptrdiff_t>(i) + 1, extra.begin(), extra.end());
            }
            break;
        }
    } catch (const UsageError& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kUsage;
    }
    std::reverse(args.begin(), args.end());  // CLI11 consumes from the back

    try {
        app.parse(args);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? kOk : kUsage;
    }

    try {
        if (*s_gen) return run_gen(*s_gen, gen);
        if (*s_train) return run_train(*s_train, tr);
        if (*s_cluster) return run_cluster(*s_cluster, cl);
        if (*s_infer) return run_infer(*s_infer, inf);
        if (*s_theory) return run_theory(th);
        if (*s_eval) return run_eval(ev);
    } catch (const DivergedError& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kDiverged;
    } catch (const UsageError& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kUsage;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kUsage;
    }
    return kUsage;
}
