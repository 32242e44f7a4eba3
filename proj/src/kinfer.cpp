#include "spherecc/kinfer.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <numeric>

#include <json.hpp>

#include "spherecc/clustering.hpp"
#include "spherecc/geometry.hpp"

namespace spherecc::kinfer {

PcaProjections pca_project_all(const Matrix& z) {
    if (z.rows() < 2) throw std::invalid_argument("PCA needs at least 2 rows");
    if (z.cols() < 1) throw std::invalid_argument("PCA needs at least 1 column");
    PcaProjections p;
    p.mean = z.colwise().mean().transpose();
    const Matrix centered = z.rowwise() - p.mean.transpose();
    const double scale = std::max(1.0, z.cwiseAbs().maxCoeff());
    if (centered.cwiseAbs().maxCoeff() <= 1e-14 * scale) throw DegenerateInputError("rank-0 input: all rows identical");

    Eigen::BDCSVD<Eigen::MatrixXd> svd(Eigen::MatrixXd(centered), Eigen::ComputeThinV);
    Eigen::MatrixXd v = svd.matrixV();
    for (Eigen::Index j = 0; j < v.cols(); ++j) {
        Eigen::Index arg = 0;
        v.col(j).cwiseAbs().maxCoeff(&arg);
        if (v(arg, j) < 0.0) v.col(j) = -v.col(j);
    }
    p.singular_values = svd.singularValues();
    p.scores = Matrix::Zero(z.rows(), z.cols());
    p.scores.leftCols(v.cols()) = centered * v;
    return p;
}

bool DeltaCurve::warning() const {
    return std::any_of(all_zero.begin(), all_zero.end(), [](char c) { return c != 0; });
}

DeltaCurve delta_curve(const Matrix& z, std::span<const Constraint> negatives, double rho) {
    if (!(rho > 0.0 && rho <= 1.0)) throw std::invalid_argument("rho must lie in (0, 1]");
    if (negatives.empty()) throw std::invalid_argument("no negative constraints");

    // unique endpoints, in ascending instance order
    std::vector<std::size_t> ids;
    ids.reserve(2 * negatives.size());
    for (const auto& c : negatives) {
        if (c.must_link()) throw std::invalid_argument("delta_curve expects cannot-link constraints only");
        if (c.a >= static_cast<std::size_t>(z.rows()) || c.b >= static_cast<std::size_t>(z.rows()))
            throw std::out_of_range("constraint index beyond embedding size");
        ids.push_back(c.a);
        ids.push_back(c.b);
    }
    std::sort(ids.begin(), ids.end());
    ids.erase(std::unique(ids.begin(), ids.end()), ids.end());
    Matrix pts(static_cast<Eigen::Index>(ids.size()), z.cols());
    for (std::size_t r = 0; r < ids.size(); ++r) pts.row(static_cast<Eigen::Index>(r)) = z.row(static_cast<Eigen::Index>(ids[r]));
    const PcaProjections proj = pca_project_all(pts);
    auto local = [&](std::size_t id) {
        return static_cast<Eigen::Index>(std::lower_bound(ids.begin(), ids.end(), id) - ids.begin());
    };
    std::vector<std::pair<Eigen::Index, Eigen::Index>> pairs;
    pairs.reserve(negatives.size());
    for (const auto& c : negatives) pairs.emplace_back(local(c.a), local(c.b));

    const double zero_tol = 1e-10 * std::max(proj.scores.rowwise().norm().maxCoeff(), 1e-300);
    const auto tail = static_cast<std::size_t>(std::ceil(rho * static_cast<double>(negatives.size()) - 1e-12));

    DeltaCurve curve;
    curve.rho = rho;
    curve.n_neg = negatives.size();
    const int dims = proj.dims();
    curve.values.assign(static_cast<std::size_t>(dims), 0.0);
    curve.all_zero.assign(static_cast<std::size_t>(dims), 0);
    std::vector<double> angles;
    for (int d = 1; d <= dims; ++d) {
        angles.clear();
        for (const auto& [a, b] : pairs) {
            const auto pa = proj.top(a, d);
            const auto pb = proj.top(b, d);
            const double na = pa.norm(), nb = pb.norm();
            if (na <= zero_tol || nb <= zero_tol) continue;
            angles.push_back(std::acos(geometry::clamp_cos(pa.dot(pb) / (na * nb))));
        }
        if (angles.empty()) {
            curve.all_zero[static_cast<std::size_t>(d - 1)] = 1;
            continue;
        }
        const std::size_t take = std::clamp<std::size_t>(tail, 1, angles.size());
        std::partial_sort(angles.begin(), angles.begin() + static_cast<std::ptrdiff_t>(take), angles.end());
        curve.values[static_cast<std::size_t>(d - 1)] =
            std::accumulate(angles.begin(), angles.begin() + static_cast<std::ptrdiff_t>(take), 0.0) / static_cast<double>(take);
    }
    return curve;
}

std::string method_name(Method m) {
    switch (m) {
        case Method::PcaPlateau: return "pca_plateau";
        case Method::Silhouette: return "silhouette";
        case Method::Lifetime: return "lifetime";
    }
    return "unknown";
}

KEstimate plateau_onset(const DeltaCurve& curve, const PlateauRule& rule) {
    const auto& v = curve.values;
    if (v.size() < 2) throw std::invalid_argument("plateau detection needs a curve of length >= 2");
    if (rule.lookahead < 1) throw std::invalid_argument("lookahead must be >= 1");
    for (std::size_t d = 0; d + 1 < v.size(); ++d) {
        if (!(v[d] > rule.floor)) continue;
        bool flat = true;
        for (std::size_t j = d; j < std::min(v.size() - 1, d + static_cast<std::size_t>(rule.lookahead)); ++j)
            if (v[j + 1] - v[j] > rule.rel_rise_tol * v[j]) {
                flat = false;
                break;
            }
        if (flat) {
            KEstimate e;
            e.method = Method::PcaPlateau;
            e.d_star = static_cast<int>(d + 1);
            e.k_hat = e.d_star + 1;
            e.plateau_value = v[d];
            e.curve = curve;
            return e;
        }
    }
    throw NoPlateauError(curve);
}

KEstimate infer_k_pca(const Matrix& z, const ConstraintSet& cs, double rho, const PlateauRule& rule) {
    const ConstraintSet neg = cs.negatives();
    if (neg.empty()) throw std::invalid_argument("no negative constraints");
    return plateau_onset(delta_curve(z, neg.span(), rho), rule);
}

double silhouette_score(const Matrix& z, const std::vector<int>& labels) {
    const auto n = static_cast<std::size_t>(z.rows());
    if (labels.size() != n) throw std::invalid_argument("label count mismatch");
    if (n == 0) throw std::invalid_argument("empty embedding");
    const int k = *std::max_element(labels.begin(), labels.end()) + 1;
    std::vector<double> sizes(static_cast<std::size_t>(k), 0.0);
    for (int l : labels) sizes[static_cast<std::size_t>(l)] += 1.0;
    std::vector<double> sums(static_cast<std::size_t>(k));
    double total = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        const auto li = static_cast<std::size_t>(labels[i]);
        if (sizes[li] <= 1.0) continue;  // singleton: 0
        std::fill(sums.begin(), sums.end(), 0.0);
        for (std::size_t j = 0; j < n; ++j)
            if (j != i) sums[static_cast<std::size_t>(labels[j])] += (z.row(static_cast<Eigen::Index>(i)) - z.row(static_cast<Eigen::Index>(j))).norm();
        const double a = sums[li] / (sizes[li] - 1.0);
        double b = std::numeric_limits<double>::infinity();
        for (std::size_t c = 0; c < sums.size(); ++c)
            if (c != li && sizes[c] > 0.0) b = std::min(b, sums[c] / sizes[c]);
        if (!std::isfinite(b)) continue;
        const double m = std::max(a, b);
        if (m > 0.0) total += (b - a) / m;
    }
    return total / static_cast<double>(n);
}

KEstimate infer_k_silhouette(const Matrix& z, const SilhouetteOptions& opts) {
    const auto n = static_cast<int>(z.rows());
    if (opts.k_min < 2 || opts.k_max < opts.k_min || opts.k_max > n - 1)
        throw std::invalid_argument("k range must lie within [2, N-1]");
    if (opts.subsample < 2) throw std::invalid_argument("subsample must be >= 2");

    std::vector<std::size_t> sample(static_cast<std::size_t>(n));
    std::iota(sample.begin(), sample.end(), std::size_t{0});
    if (sample.size() > opts.subsample) {
        Rng rng = make_rng(opts.seed, "kinfer.silhouette");
        std::shuffle(sample.begin(), sample.end(), rng);
        sample.resize(opts.subsample);
        std::sort(sample.begin(), sample.end());
    }
    Matrix zs(static_cast<Eigen::Index>(sample.size()), z.cols());
    for (std::size_t r = 0; r < sample.size(); ++r) zs.row(static_cast<Eigen::Index>(r)) = z.row(static_cast<Eigen::Index>(sample[r]));

    KEstimate e;
    e.method = Method::Silhouette;
    double best = -std::numeric_limits<double>::infinity();
    std::optional<DegenerateInputError> last_error;
    for (int k = opts.k_min; k <= opts.k_max; ++k) {
        e.candidates.push_back(k);
        clustering::ClusterModel m;
        try {
            m = clustering::kmeans(z, k, {opts.restarts, 300, 1e-10, derive_seed(opts.seed, "kinfer.silhouette.k" + std::to_string(k))});
        } catch (const DegenerateInputError& err) {
            last_error = err;
            e.scores.push_back(std::numeric_limits<double>::quiet_NaN());
            continue;
        }
        std::vector<int> labels(sample.size());
        for (std::size_t r = 0; r < sample.size(); ++r) labels[r] = m.assignments[sample[r]];
        const double s = silhouette_score(zs, labels);
        e.scores.push_back(s);
        if (s > best) {
            best = s;
            e.k_hat = k;
        }
    }
    if (e.k_hat == 0) throw *last_error;
    return e;
}

KEstimate infer_k_lifetime(const Matrix& z, int k_min, int k_max, std::size_t cap) {
    const auto n = static_cast<int>(z.rows());
    if (k_min < 2 || k_max < k_min || k_max > n - 1) throw std::invalid_argument("k range must lie within [2, N-1]");
    const clustering::WardResult ward = clustering::agglomerative_ward(z, 2, cap);
    const double d2 = ward.linkage_distance(2);
    if (!(d2 > 0.0)) throw DegenerateInputError("all merge heights are zero");
    KEstimate e;
    e.method = Method::Lifetime;
    double best = -std::numeric_limits<double>::infinity();
    for (int k = k_min; k <= k_max; ++k) {
        const double life = (ward.linkage_distance(static_cast<std::size_t>(k)) - ward.linkage_distance(static_cast<std::size_t>(k + 1))) / d2;
        e.candidates.push_back(k);
        e.scores.push_back(life);
        if (life > best) {
            best = life;
            e.k_hat = k;
        }
    }
    return e;
}

void write_estimate_json(const std::filesystem::path& path, const KEstimate& est) {
    nlohmann::json j;
    j["k_hat"] = est.k_hat;
    j["method"] = method_name(est.method);
    if (est.method == Method::PcaPlateau) {
        j["d_star"] = est.d_star;
        j["plateau_value"] = est.plateau_value;
    }
    if (est.curve) {
        j["rho"] = est.curve->rho;
        j["n_neg"] = est.curve->n_neg;
        j["delta_bar"] = est.curve->values;
        j["zero_projection_warning"] = est.curve->warning();
    }
    if (!est.candidates.empty()) {
        auto& diag = j["diagnostics"] = nlohmann::json::array();
        for (std::size_t i = 0; i < est.candidates.size(); ++i) {
            nlohmann::json row{{"k", est.candidates[i]}};
            if (std::isfinite(est.scores[i]))
                row["score"] = est.scores[i];
            else
                row["score"] = nullptr;
            diag.push_back(row);
        }
    }
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot open " + path.string() + " for writing");
    out << j.dump(2) << '\n';
}

void write_curve_csv(const std::filesystem::path& path, const DeltaCurve& curve) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot open " + path.string() + " for writing");
    out.precision(17);
    out << "d,delta_bar\n";
    for (std::size_t d = 0; d < curve.values.size(); ++d) out << d + 1 << ',' << curve.values[d] << '\n';
}

}  // namespace spherecc::kinfer
