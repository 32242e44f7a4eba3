#include "spherecc/trainer.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <fstream>
#include <numeric>
#include <sstream>
#include <stdexcept>

#include <json.hpp>

namespace spherecc::trainer {

void TrainConfig::validate() const {
    if (epochs < 1) throw std::invalid_argument("epochs must be >= 1");
    if (constraint_batch < 1) throw std::invalid_argument("constraint batch must be >= 1");
    if (instance_batch && *instance_batch < 1) throw std::invalid_argument("instance batch must be >= 1");
    if (!(lr > 0.0)) throw std::invalid_argument("learning rate must be > 0");
    if (!(lambda >= 0.0)) throw std::invalid_argument("lambda must be >= 0");
    if (omega && !(*omega > 0.0)) throw std::invalid_argument("omega must be > 0");
    if (embed_dim < 1) throw std::invalid_argument("embed dim must be >= 1");
    for (int h : hidden)
        if (h < 1) throw std::invalid_argument("hidden layer sizes must be >= 1");
    if (early_stop.warmup_epochs < 0 || early_stop.patience < 1 || !(early_stop.rel_tol >= 0.0))
        throw std::invalid_argument("invalid early-stop settings");
}

std::string TrainConfig::canonical() const {
    std::ostringstream os;
    os.precision(17);
    os << "epochs=" << epochs << ";bc=" << constraint_batch << ";bx=" << (instance_batch ? std::to_string(*instance_batch) : "auto")
       << ";lr=" << lr << ";lambda=" << lambda << ";omega=" << effective_omega() << ";embed_dim=" << embed_dim << ";hidden=";
    for (int h : hidden) os << h << ',';
    os << ";seed=" << seed << ";warmup=" << early_stop.warmup_epochs << ";rel_tol=" << early_stop.rel_tol
       << ";patience=" << early_stop.patience << ";norm_guard=" << norm_guard;
    return os.str();
}

std::size_t auto_instance_batch(std::size_t n_instances, std::size_t n_constraints, std::size_t constraint_batch) {
    if (n_instances == 0 || n_constraints == 0 || constraint_batch == 0)
        throw std::invalid_argument("auto_instance_batch: arguments must be positive");
    const std::size_t num = n_instances * constraint_batch;
    const std::size_t b = (num + n_constraints - 1) / n_constraints;
    return std::clamp<std::size_t>(b, 1, n_instances);
}

namespace {

Matrix gather_rows(const Matrix& x, std::span<const std::size_t> idx) {
    Matrix out(static_cast<Eigen::Index>(idx.size()), x.cols());
    for (std::size_t r = 0; r < idx.size(); ++r) out.row(static_cast<Eigen::Index>(r)) = x.row(static_cast<Eigen::Index>(idx[r]));
    return out;
}

}  // namespace

BatchLoss batch_loss(const net::Autoencoder& model, const Matrix& xc, std::span<const Constraint> local, const Matrix& xb,
                     const loss::LossConfig& cfg, double norm_guard, std::span<double> grad) {
    const bool want_grad = !grad.empty();
    net::Trace te;
    const Matrix ze = model.forward(net::Part::Encoder, xc, want_grad ? &te : nullptr);
    const loss::LossValue ang = loss::angular_loss(ze, local, cfg);
    if (want_grad) model.backward(net::Part::Encoder, te, ang.grad, grad);

    net::Trace ti, td;
    const Matrix zb = model.forward(net::Part::Encoder, xb, want_grad ? &ti : nullptr);
    const Matrix zn = net::normalize_rows(zb, norm_guard);
    const Matrix xh = model.forward(net::Part::Decoder, zn, want_grad ? &td : nullptr);
    const loss::LossValue rec = loss::recon_loss(xb, xh);
    if (want_grad && cfg.lambda > 0.0) {
        const Matrix dzn = model.backward(net::Part::Decoder, td, cfg.lambda * rec.grad, grad);
        model.backward(net::Part::Encoder, ti, net::normalize_rows_backward(zb, dzn, norm_guard), grad);
    }
    return {ang.value, rec.value, loss::total_loss(ang.value, rec.value, cfg.lambda)};
}

TrainResult train(const Matrix& x, const ConstraintSet& cs, const TrainConfig& cfg) {
    cfg.validate();
    if (cs.empty()) throw std::invalid_argument("empty constraint set");
    if (x.rows() == 0) throw std::invalid_argument("empty dataset");
    const auto n = static_cast<std::size_t>(x.rows());
    for (const auto& c : cs.items())
        if (c.b >= n) throw std::invalid_argument("constraint index beyond dataset size");

    const auto t0 = std::chrono::steady_clock::now();
    loss::LossConfig lcfg{cfg.effective_omega(), cfg.lambda, 1e-12};

    net::Architecture arch{static_cast<int>(x.cols()), cfg.hidden, cfg.embed_dim};
    TrainResult result{net::Autoencoder::create(arch, derive_seed(cfg.seed, "trainer.init")), {}};
    net::Autoencoder& model = result.model;
    TrainReport& report = result.report;
    report.omega = lcfg.omega;

    const std::size_t bc = std::min(cfg.constraint_batch, cs.size());
    const std::size_t bx = std::min(cfg.instance_batch.value_or(auto_instance_batch(n, cs.size(), bc)), n);
    report.instance_batch = bx;
    const std::size_t steps = (cs.size() + bc - 1) / bc;

    net::AdamState adam(model.parameter_count(), cfg.lr);
    Rng rng = make_rng(cfg.seed, "trainer.batches");
    std::vector<std::size_t> corder(cs.size()), xorder(n);
    std::iota(corder.begin(), corder.end(), std::size_t{0});
    std::iota(xorder.begin(), xorder.end(), std::size_t{0});

    std::vector<double> grad(model.parameter_count());
    std::vector<long> local_of(n, -1);
    std::vector<std::size_t> endpoints, xbatch;
    std::vector<Constraint> local;
    int streak = 0;
    report.stop_reason = "max_epochs";

    for (int epoch = 1; epoch <= cfg.epochs; ++epoch) {
        std::shuffle(corder.begin(), corder.end(), rng);
        std::shuffle(xorder.begin(), xorder.end(), rng);
        EpochLosses acc;
        for (std::size_t s = 0; s < steps; ++s) {
            std::fill(grad.begin(), grad.end(), 0.0);

            // constraint mini-batch: encode each distinct endpoint once
            endpoints.clear();
            local.clear();
            const std::size_t c_end = std::min(cs.size(), (s + 1) * bc);
            for (std::size_t i = s * bc; i < c_end; ++i) {
                const Constraint& c = cs[corder[i]];
                for (std::size_t v : {c.a, c.b})
                    if (local_of[v] < 0) {
                        local_of[v] = static_cast<long>(endpoints.size());
                        endpoints.push_back(v);
                    }
                local.push_back({static_cast<std::size_t>(local_of[c.a]), static_cast<std::size_t>(local_of[c.b]), c.y});
            }
            for (std::size_t v : endpoints) local_of[v] = -1;

            // instance mini-batch for the reconstruction term, wrapping around
            xbatch.clear();
            for (std::size_t i = 0; i < bx; ++i) xbatch.push_back(xorder[(s * bx + i) % n]);
            const BatchLoss bl = batch_loss(model, gather_rows(x, endpoints), local, gather_rows(x, xbatch), lcfg, cfg.norm_guard, grad);
            const double total = bl.l_total;
            if (!std::isfinite(total)) throw DivergedError("diverged at epoch " + std::to_string(epoch), epoch);
            try {
                net::adam_step(adam, model.parameters(), grad);
            } catch (const DivergedError&) {
                throw DivergedError("diverged at epoch " + std::to_string(epoch), epoch);
            }
            acc.l_ang += bl.l_ang;
            acc.l_recon += bl.l_recon;
            acc.l_total += total;
        }
        const double inv = 1.0 / static_cast<double>(steps);
        acc.l_ang *= inv;
        acc.l_recon *= inv;
        acc.l_total *= inv;
        report.epochs.push_back(acc);
        report.final_epoch = epoch;

        if (epoch > cfg.early_stop.warmup_epochs && report.epochs.size() >= 2) {
            const double prev = report.epochs[report.epochs.size() - 2].l_total;
            const double rel = std::abs(acc.l_total - prev) / std::max(std::abs(prev), 1e-300);
            streak = rel < cfg.early_stop.rel_tol ? streak + 1 : 0;
            if (streak >= cfg.early_stop.patience) {
                report.stop_reason = "early_stop";
                break;
            }
        }
    }
    report.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    return result;
}

Matrix extract_sphere_embedding(const net::Autoencoder& model, const Matrix& x) {
    Matrix z = model.encode(x);
    for (Eigen::Index i = 0; i < z.rows(); ++i) {
        const double nrm = z.row(i).norm();
        if (nrm == 0.0) throw std::invalid_argument("degenerate latent row " + std::to_string(i));
        z.row(i) /= nrm;
    }
    return z;
}

double evaluate_angular_loss(const net::Autoencoder& model, const Matrix& x, const ConstraintSet& cs, double omega) {
    const Matrix z = model.encode(x);
    return loss::angular_loss(z, cs, loss::LossConfig{omega, 0.0, 1e-12}).value;
}

void write_report_json(const std::filesystem::path& path, const TrainReport& report) {
    nlohmann::json j;
    j["stop_reason"] = report.stop_reason;
    j["final_epoch"] = report.final_epoch;
    j["instance_batch"] = report.instance_batch;
    j["omega"] = report.omega;
    auto& ep = j["epochs"] = nlohmann::json::array();
    for (std::size_t i = 0; i < report.epochs.size(); ++i)
        ep.push_back({{"epoch", i + 1},
                      {"l_ang", report.epochs[i].l_ang},
                      {"l_recon", report.epochs[i].l_recon},
                      {"l_total", report.epochs[i].l_total}});
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot open " + path.string() + " for writing");
    out << j.dump(2) << '\n';
}

void write_loss_csv(const std::filesystem::path& path, const TrainReport& report) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot open " + path.string() + " for writing");
    out.precision(17);
    out << "epoch,l_ang,l_recon,l_total\n";
    for (std::size_t i = 0; i < report.epochs.size(); ++i)
        out << i + 1 << ',' << report.epochs[i].l_ang << ',' << report.epochs[i].l_recon << ',' << report.epochs[i].l_total
            << '\n';
}

}  // namespace spherecc::trainer
