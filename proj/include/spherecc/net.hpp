#pragma once

// Dense autoencoder with hand-written forward/backward passes and Adam.
//
// All parameters live in one flat buffer; layers view it through Eigen maps.
// Gradients use the same layout, so the optimizer and the finite-difference
// checker work on plain spans.

#include <filesystem>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "spherecc/common.hpp"

namespace spherecc::net {

enum class Activation { ReLU, Identity };

struct LayerSpec {
    int in_dim = 0;
    int out_dim = 0;
    Activation activation = Activation::Identity;

    friend bool operator==(const LayerSpec&, const LayerSpec&) = default;
};

/// Encoder input -> hidden... -> embed; decoder is the mirror image.
struct Architecture {
    int input_dim = 0;
    std::vector<int> hidden{64, 64, 256};
    int embed_dim = 10;
};

enum class Part { Encoder, Decoder };

/// Per-layer activations saved by a forward pass for the backward pass.
struct Trace {
    std::vector<Matrix> inputs;
    std::vector<Matrix> pre;
};

class Autoencoder {
public:
    Autoencoder() = default;

    /// He-initialized model (std = sqrt(2 / in_dim)), zero biases.
    static Autoencoder create(const Architecture& arch, std::uint64_t seed);

    /// Zero-initialized model with explicit layer lists.
    static Autoencoder from_layers(std::vector<LayerSpec> encoder, std::vector<LayerSpec> decoder);

    int input_dim() const;
    int embed_dim() const;
    const std::vector<LayerSpec>& layers(Part part) const;

    std::size_t parameter_count() const noexcept { return params_.size(); }
    std::span<double> parameters() noexcept { return params_; }
    std::span<const double> parameters() const noexcept { return params_; }

    Eigen::Map<Matrix> weight(Part part, std::size_t layer);
    Eigen::Map<const Matrix> weight(Part part, std::size_t layer) const;
    Eigen::Map<Vector> bias(Part part, std::size_t layer);
    Eigen::Map<const Vector> bias(Part part, std::size_t layer) const;

    /// Raw latent codes, N x D.
    Matrix encode(const Matrix& x) const;
    /// Decoder applied to Z as given.
    Matrix decode(const Matrix& z) const;
    /// Decoder applied to row-normalized Z. Throws "degenerate latent" on a
    /// zero row.
    Matrix decode_normalized(const Matrix& z) const;

    Matrix forward(Part part, const Matrix& in, Trace* trace) const;

    /// Backpropagates `d_out` through `part`, accumulating parameter
    /// gradients into `grad` (same layout as parameters()). Returns d_in.
    Matrix backward(Part part, const Trace& trace, const Matrix& d_out, std::span<double> grad) const;

    friend bool operator==(const Autoencoder&, const Autoencoder&) = default;

private:
    struct Slot {
        LayerSpec spec;
        std::size_t w_off = 0;
        std::size_t b_off = 0;
        friend bool operator==(const Slot&, const Slot&) = default;
    };

    void append(Part part, const LayerSpec& spec);
    const std::vector<Slot>& slots(Part part) const { return part == Part::Encoder ? enc_ : dec_; }

    std::vector<Slot> enc_;
    std::vector<Slot> dec_;
    std::vector<LayerSpec> enc_specs_;
    std::vector<LayerSpec> dec_specs_;
    std::vector<double> params_;
};

/// Row normalization z / (|z| + guard).
Matrix normalize_rows(const Matrix& z, double guard);

/// Gradient of normalize_rows(z, guard) pulled back from d_normalized.
Matrix normalize_rows_backward(const Matrix& z, const Matrix& d_normalized, double guard);

struct AdamState {
    double lr = 1e-3;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
    long long step = 0;
    std::vector<double> m;
    std::vector<double> v;

    explicit AdamState(std::size_t n_params = 0, double learning_rate = 1e-3)
        : lr(learning_rate), m(n_params, 0.0), v(n_params, 0.0) {}
};

/// One bias-corrected Adam update. Throws DivergedError("diverged") when a
/// gradient is not finite.
void adam_step(AdamState& state, std::span<double> params, std::span<const double> grads);

/// Loss callback for gradient checking: returns the loss and, when `grad` is
/// non-empty, writes the analytic gradient into it.
using LossFn = std::function<double(const Autoencoder&, std::span<double> grad)>;

struct GradCheckResult {
    double max_rel_error = 0.0;
    std::size_t worst_index = 0;
    bool passed = false;
};

/// Central finite differences over every parameter. Relative error is
/// |analytic - numeric| / max(|analytic|, |numeric|, 1e-6).
GradCheckResult numerical_gradient_check(const Autoencoder& model, const LossFn& loss, double tolerance,
                                         double step = 1e-6);

/// JSON checkpoint: architecture, row-major weights, embed dim, config hash.
void save_checkpoint(const std::filesystem::path& path, const Autoencoder& model, const std::string& config_hash);

struct Checkpoint {
    Autoencoder model;
    std::string config_hash;
};

Checkpoint load_checkpoint(const std::filesystem::path& path);

}  // namespace spherecc::net
