#include "spherecc/net.hpp"

#include <cmath>
#include <fstream>
#include <stdexcept>

#include <json.hpp>

namespace spherecc::net {

void Autoencoder::append(Part part, const LayerSpec& spec) {
    if (spec.in_dim < 1 || spec.out_dim < 1) throw std::invalid_argument("layer dims must be >= 1");
    auto& list = part == Part::Encoder ? enc_ : dec_;
    auto& specs = part == Part::Encoder ? enc_specs_ : dec_specs_;
    if (!list.empty() && list.back().spec.out_dim != spec.in_dim)
        throw std::invalid_argument("layer dims do not chain");
    Slot s{spec, params_.size(), 0};
    s.b_off = s.w_off + static_cast<std::size_t>(spec.in_dim) * spec.out_dim;
    params_.resize(s.b_off + static_cast<std::size_t>(spec.out_dim), 0.0);
    list.push_back(s);
    specs.push_back(spec);
}

Autoencoder Autoencoder::from_layers(std::vector<LayerSpec> encoder, std::vector<LayerSpec> decoder) {
    if (encoder.empty() || decoder.empty()) throw std::invalid_argument("encoder and decoder need at least one layer");
    if (encoder.back().out_dim != decoder.front().in_dim)
        throw std::invalid_argument("encoder output dim must equal decoder input dim");
    if (decoder.back().out_dim != encoder.front().in_dim)
        throw std::invalid_argument("decoder output dim must equal input dim");
    Autoencoder m;
    for (const auto& l : encoder) m.append(Part::Encoder, l);
    for (const auto& l : decoder) m.append(Part::Decoder, l);
    return m;
}

Autoencoder Autoencoder::create(const Architecture& arch, std::uint64_t seed) {
    if (arch.input_dim < 1) throw std::invalid_argument("input dim must be >= 1");
    if (arch.embed_dim < 1) throw std::invalid_argument("embed dim must be >= 1");
    std::vector<int> dims{arch.input_dim};
    dims.insert(dims.end(), arch.hidden.begin(), arch.hidden.end());
    dims.push_back(arch.embed_dim);

    std::vector<LayerSpec> enc, dec;
    for (std::size_t i = 0; i + 1 < dims.size(); ++i)
        enc.push_back({dims[i], dims[i + 1], i + 2 == dims.size() ? Activation::Identity : Activation::ReLU});
    for (std::size_t i = dims.size() - 1; i > 0; --i)
        dec.push_back({dims[i], dims[i - 1], i == 1 ? Activation::Identity : Activation::ReLU});

    Autoencoder m = from_layers(std::move(enc), std::move(dec));
    Rng rng = make_rng(seed, "net.init");
    for (Part part : {Part::Encoder, Part::Decoder}) {
        for (std::size_t l = 0; l < m.slots(part).size(); ++l) {
            auto w = m.weight(part, l);
            std::normal_distribution<double> normal(0.0, std::sqrt(2.0 / w.cols()));
            for (Eigen::Index i = 0; i < w.size(); ++i) w.data()[i] = normal(rng);
        }
    }
    return m;
}

int Autoencoder::input_dim() const { return enc_.empty() ? 0 : enc_.front().spec.in_dim; }
int Autoencoder::embed_dim() const { return enc_.empty() ? 0 : enc_.back().spec.out_dim; }

const std::vector<LayerSpec>& Autoencoder::layers(Part part) const {
    return part == Part::Encoder ? enc_specs_ : dec_specs_;
}

Eigen::Map<Matrix> Autoencoder::weight(Part part, std::size_t layer) {
    const Slot& s = slots(part).at(layer);
    return {params_.data() + s.w_off, s.spec.out_dim, s.spec.in_dim};
}
Eigen::Map<const Matrix> Autoencoder::weight(Part part, std::size_t layer) const {
    const Slot& s = slots(part).at(layer);
    return {params_.data() + s.w_off, s.spec.out_dim, s.spec.in_dim};
}
Eigen::Map<Vector> Autoencoder::bias(Part part, std::size_t layer) {
    const Slot& s = slots(part).at(layer);
    return {params_.data() + s.b_off, s.spec.out_dim};
}
Eigen::Map<const Vector> Autoencoder::bias(Part part, std::size_t layer) const {
    const Slot& s = slots(part).at(layer);
    return {params_.data() + s.b_off, s.spec.out_dim};
}

Matrix Autoencoder::forward(Part part, const Matrix& in, Trace* trace) const {
    const auto& list = slots(part);
    if (list.empty()) throw std::logic_error("empty model");
    if (in.cols() != list.front().spec.in_dim)
        throw std::invalid_argument("shape mismatch: expected " + std::to_string(list.front().spec.in_dim) +
                                    " columns, got " + std::to_string(in.cols()));
    if (trace) {
        trace->inputs.clear();
        trace->pre.clear();
    }
    Matrix a = in;
    for (std::size_t l = 0; l < list.size(); ++l) {
        Matrix pre = a * weight(part, l).transpose();
        pre.rowwise() += bias(part, l).transpose();
        if (trace) {
            trace->inputs.push_back(std::move(a));
            trace->pre.push_back(pre);
        }
        a = list[l].spec.activation == Activation::ReLU ? Matrix(pre.cwiseMax(0.0)) : std::move(pre);
    }
    return a;
}

Matrix Autoencoder::backward(Part part, const Trace& trace, const Matrix& d_out, std::span<double> grad) const {
    const auto& list = slots(part);
    if (grad.size() != params_.size()) throw std::invalid_argument("gradient buffer has wrong size");
    if (trace.inputs.size() != list.size()) throw std::invalid_argument("trace does not match model");
    Matrix g = d_out;
    for (std::size_t l = list.size(); l-- > 0;) {
        const Slot& s = list[l];
        if (s.spec.activation == Activation::ReLU) g = g.cwiseProduct((trace.pre[l].array() > 0.0).cast<double>().matrix());
        Eigen::Map<Matrix> dw(grad.data() + s.w_off, s.spec.out_dim, s.spec.in_dim);
        Eigen::Map<Vector> db(grad.data() + s.b_off, s.spec.out_dim);
        dw.noalias() += g.transpose() * trace.inputs[l];
        db += g.colwise().sum().transpose();
        g = g * weight(part, l);
    }
    return g;
}

Matrix Autoencoder::encode(const Matrix& x) const { return forward(Part::Encoder, x, nullptr); }

Matrix Autoencoder::decode(const Matrix& z) const { return forward(Part::Decoder, z, nullptr); }

Matrix Autoencoder::decode_normalized(const Matrix& z) const {
    for (Eigen::Index i = 0; i < z.rows(); ++i)
        if (z.row(i).norm() == 0.0) throw std::invalid_argument("degenerate latent");
    return decode(normalize_rows(z, 0.0));
}

Matrix normalize_rows(const Matrix& z, double guard) {
    Matrix out(z.rows(), z.cols());
    for (Eigen::Index i = 0; i < z.rows(); ++i) out.row(i) = z.row(i) / (z.row(i).norm() + guard);
    return out;
}

Matrix normalize_rows_backward(const Matrix& z, const Matrix& d_normalized, double guard) {
    Matrix out(z.rows(), z.cols());
    for (Eigen::Index i = 0; i < z.rows(); ++i) {
        const double n = z.row(i).norm();
        const double s = n + guard;
        out.row(i) = d_normalized.row(i) / s;
        // d(z/(|z|+g)) = dz/s - z (z . dz) / (|z| s^2)
        if (n > 0.0) out.row(i) -= z.row(i) * (z.row(i).dot(d_normalized.row(i)) / (n * s * s));
    }
    return out;
}

void adam_step(AdamState& state, std::span<double> params, std::span<const double> grads) {
    if (params.size() != grads.size() || state.m.size() != params.size() || state.v.size() != params.size())
        throw std::invalid_argument("adam: shape mismatch");
    for (double g : grads)
        if (!std::isfinite(g)) throw DivergedError("diverged", -1);
    ++state.step;
    const double c1 = 1.0 - std::pow(state.beta1, static_cast<double>(state.step));
    const double c2 = 1.0 - std::pow(state.beta2, static_cast<double>(state.step));
    for (std::size_t i = 0; i < params.size(); ++i) {
        const double g = grads[i];
        state.m[i] = state.beta1 * state.m[i] + (1.0 - state.beta1) * g;
        state.v[i] = state.beta2 * state.v[i] + (1.0 - state.beta2) * g * g;
        const double mhat = state.m[i] / c1;
        const double vhat = state.v[i] / c2;
        params[i] -= state.lr * mhat / (std::sqrt(vhat) + state.eps);
    }
}

GradCheckResult numerical_gradient_check(const Autoencoder& model, const LossFn& loss, double tolerance, double step) {
    std::vector<double> analytic(model.parameter_count(), 0.0);
    loss(model, analytic);
    Autoencoder probe = model;
    GradCheckResult r;
    for (std::size_t i = 0; i < analytic.size(); ++i) {
        const double orig = probe.parameters()[i];
        probe.parameters()[i] = orig + step;
        const double up = loss(probe, {});
        probe.parameters()[i] = orig - step;
        const double down = loss(probe, {});
        probe.parameters()[i] = orig;
        const double numeric = (up - down) / (2.0 * step);
        const double denom = std::max({std::abs(analytic[i]), std::abs(numeric), 1e-6});
        const double err = std::abs(analytic[i] - numeric) / denom;
        if (err > r.max_rel_error) {
            r.max_rel_error = err;
            r.worst_index = i;
        }
    }
    r.passed = r.max_rel_error < tolerance;
    return r;
}

namespace {

const char* activation_name(Activation a) { return a == Activation::ReLU ? "relu" : "identity"; }

Activation parse_activation(const std::string& s) {
    if (s == "relu") return Activation::ReLU;
    if (s == "identity") return Activation::Identity;
    throw std::runtime_error("unknown activation '" + s + "'");
}

}  // namespace

void save_checkpoint(const std::filesystem::path& path, const Autoencoder& model, const std::string& config_hash) {
    nlohmann::json j;
    j["format"] = "spherecc-autoencoder";
    j["version"] = 1;
    j["input_dim"] = model.input_dim();
    j["embed_dim"] = model.embed_dim();
    j["config_hash"] = config_hash;
    for (Part part : {Part::Encoder, Part::Decoder}) {
        nlohmann::json arr = nlohmann::json::array();
        const auto& specs = model.layers(part);
        for (std::size_t l = 0; l < specs.size(); ++l) {
            const auto w = model.weight(part, l);
            const auto b = model.bias(part, l);
            arr.push_back({{"in", specs[l].in_dim},
                           {"out", specs[l].out_dim},
                           {"activation", activation_name(specs[l].activation)},
                           {"weights", std::vector<double>(w.data(), w.data() + w.size())},
                           {"bias", std::vector<double>(b.data(), b.data() + b.size())}});
        }
        j[part == Part::Encoder ? "encoder" : "decoder"] = std::move(arr);
    }
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot open " + path.string() + " for writing");
    out << j.dump() << '\n';
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open checkpoint " + path.string());
    const auto j = nlohmann::json::parse(in);
    if (j.value("format", "") != "spherecc-autoencoder") throw std::runtime_error("not a spherecc checkpoint");
    std::vector<LayerSpec> enc, dec;
    for (const auto& l : j.at("encoder"))
        enc.push_back({l.at("in").get<int>(), l.at("out").get<int>(), parse_activation(l.at("activation"))});
    for (const auto& l : j.at("decoder"))
        dec.push_back({l.at("in").get<int>(), l.at("out").get<int>(), parse_activation(l.at("activation"))});
    Checkpoint c{Autoencoder::from_layers(enc, dec), j.value("config_hash", "")};
    for (Part part : {Part::Encoder, Part::Decoder}) {
        const auto& arr = j.at(part == Part::Encoder ? "encoder" : "decoder");
        for (std::size_t l = 0; l < arr.size(); ++l) {
            const auto w = arr[l].at("weights").get<std::vector<double>>();
            const auto b = arr[l].at("bias").get<std::vector<double>>();
            auto wm = c.model.weight(part, l);
            auto bm = c.model.bias(part, l);
            if (static_cast<Eigen::Index>(w.size()) != wm.size() || static_cast<Eigen::Index>(b.size()) != bm.size())
                throw std::runtime_error("checkpoint weight shape mismatch");
            std::copy(w.begin(), w.end(), wm.data());
            std::copy(b.begin(), b.end(), bm.data());
        }
    }
    if (c.model.embed_dim() != j.at("embed_dim").get<int>()) throw std::runtime_error("checkpoint embed_dim mismatch");
    return c;
}

}  // namespace spherecc::net
