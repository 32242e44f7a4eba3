#pragma once

// Mini-batch training of the autoencoder on the angular pairwise loss plus
// the normalized-reconstruction regularizer.

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "spherecc/common.hpp"
#include "spherecc/constraints.hpp"
#include "spherecc/loss.hpp"
#include "spherecc/net.hpp"

namespace spherecc::trainer {

struct EarlyStop {
    int warmup_epochs = 100;
    double rel_tol = 0.1;
    int patience = 5;
};

struct TrainConfig {
    int epochs = 300;
    std::size_t constraint_batch = 256;
    std::optional<std::size_t> instance_batch;  // nullopt: auto
    double lr = 1e-3;
    double lambda = 0.02;
    std::optional<double> omega;                // nullopt: auto (2)
    int embed_dim = 10;
    std::vector<int> hidden{64, 64, 256};
    std::uint64_t seed = 0;
    EarlyStop early_stop;
    /// Guard added to latent norms before division during training.
    double norm_guard = 1e-12;

    double effective_omega() const { return omega.value_or(2.0); }
    void validate() const;
    /// Stable textual form used for the checkpoint's config hash.
    std::string canonical() const;
};

struct EpochLosses {
    double l_ang = 0.0;
    double l_recon = 0.0;
    double l_total = 0.0;
};

struct TrainReport {
    std::vector<EpochLosses> epochs;
    std::string stop_reason;
    double wall_seconds = 0.0;
    int final_epoch = 0;
    std::size_t instance_batch = 0;
    double omega = 2.0;
};

struct TrainResult {
    net::Autoencoder model;
    TrainReport report;
};

/// ceil(|X| * |B_c| / |C|) clamped to [1, |X|].
std::size_t auto_instance_batch(std::size_t n_instances, std::size_t n_constraints, std::size_t constraint_batch);

struct BatchLoss {
    double l_ang = 0.0;
    double l_recon = 0.0;
    double l_total = 0.0;
};

/// One training step's objective: angular loss over `local` (indices into
/// rows of `xc`) plus lambda times the normalized reconstruction error of
/// `xb`. When `grad` is non-empty the gradient is accumulated into it.
BatchLoss batch_loss(const net::Autoencoder& model, const Matrix& xc, std::span<const Constraint> local, const Matrix& xb,
                     const loss::LossConfig& cfg, double norm_guard, std::span<double> grad);

/// Throws DivergedError on a non-finite loss and std::invalid_argument on
/// empty or out-of-range constraints.
TrainResult train(const Matrix& x, const ConstraintSet& cs, const TrainConfig& cfg);

/// Row-normalized encoder outputs. Throws on a zero latent row.
Matrix extract_sphere_embedding(const net::Autoencoder& model, const Matrix& x);

/// Angular loss of the full constraint set under a frozen model.
double evaluate_angular_loss(const net::Autoencoder& model, const Matrix& x, const ConstraintSet& cs, double omega);

/// Deterministic fields only; wall time is left to the caller.
void write_report_json(const std::filesystem::path& path, const TrainReport& report);
/// Header `epoch,l_ang,l_recon,l_total`, epochs 1-based.
void write_loss_csv(const std::filesystem::path& path, const TrainReport& report);

}  // namespace spherecc::trainer
