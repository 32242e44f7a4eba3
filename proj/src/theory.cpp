#include "spherecc/theory.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <sstream>

#include "spherecc/geometry.hpp"
#include "spherecc/kinfer.hpp"

namespace spherecc::theory {
namespace {

using std::numbers::pi;

// Angle between two vertices of the Helmert-built simplex, measured directly.
double measured_simplex_angle(int k) {
    const Matrix s = geometry::regular_simplex(k, k - 1);
    return geometry::angle_between(s.row(0).transpose(), s.row(1).transpose());
}

std::vector<double> random_weights(int k, Rng& rng) {
    std::uniform_real_distribution<double> u(0.05, 1.0);
    std::vector<double> w(static_cast<std::size_t>(k));
    for (auto& x : w) x = u(rng);
    return w;
}

CheckResult finish(std::string name, double err, double tol, bool ok, std::string detail) {
    CheckResult r;
    r.name = std::move(name);
    r.max_error = err;
    r.passed = ok && err <= tol;
    r.detail = std::move(detail);
    return r;
}

}  // namespace

CheckResult check_simplex_gram(const TheoryOptions& opts) {
    double err = 0.0;
    bool ok = true;
    std::ostringstream why;
    for (int k = std::max(2, opts.k_min); k <= opts.k_max; ++k) {
        for (int d = k - 1; d <= k + opts.d_above; ++d) {
            const Matrix s = geometry::regular_simplex(k, d);
            const Matrix g = s * s.transpose();
            for (int i = 0; i < k; ++i)
                for (int j = 0; j < k; ++j) {
                    const double target = i == j ? 1.0 : -1.0 / (k - 1);
                    err = std::max(err, std::abs(g(i, j) - target));
                }
        }
        if (k - 2 >= 1) {
            try {
                (void)geometry::regular_simplex(k, k - 2);
                ok = false;
                why << "k=" << k << " accepted d=k-2; ";
            } catch (const std::invalid_argument&) {
            }
        }
    }
    return finish("simplex_gram", err, opts.tol, ok, why.str());
}

CheckResult check_valid_omega(const TheoryOptions& opts) {
    double err = 0.0;
    bool ok = true;
    std::ostringstream why;
    for (int k = std::max(2, opts.k_min); k <= opts.k_max; ++k) {
        const double angle = measured_simplex_angle(k);
        for (int d = std::max(1, k - 1 - opts.d_below); d <= k + opts.d_above; ++d) {
            const auto b = geometry::valid_omega(k, d);
            const auto want = d < k - 1 ? geometry::OmegaStatus::Infeasible
                                        : (d == k - 1 ? geometry::OmegaStatus::Unique : geometry::OmegaStatus::Range);
            if (b.status != want) {
                ok = false;
                why << "k=" << k << " d=" << d << " wrong status; ";
                continue;
            }
            if (want == geometry::OmegaStatus::Infeasible) {
                if (b.omega_min || b.theta_max) {
                    ok = false;
                    why << "k=" << k << " d=" << d << " infeasible but reports a bound; ";
                }
                continue;
            }
            if (!b.omega_min || !b.theta_max) {
                ok = false;
                why << "k=" << k << " d=" << d << " missing bound; ";
                continue;
            }
            err = std::max({err, std::abs(*b.theta_max - angle), std::abs(*b.omega_min - pi / angle)});
            if (!(*b.omega_min >= 1.0 && *b.omega_min < 2.0)) {
                ok = false;
                why << "k=" << k << " omega_min outside [1, 2); ";
            }
        }
    }
    return finish("valid_omega", err, opts.tol, ok, why.str());
}

CheckResult check_minimal_admissible_omega(const TheoryOptions& opts) {
    const auto f = opts.omega_formula ? opts.omega_formula : [](int k) { return geometry::minimal_admissible_omega(k); };
    double err = 0.0;
    bool ok = true;
    std::ostringstream why;
    if (opts.k_min <= 2 && f(2) != 1.0) {
        ok = false;
        why << "value at k=2 is " << f(2) << ", expected exactly 1; ";
    }
    double prev = -1.0;
    for (int k = std::max(2, opts.k_min); k <= opts.k_max; ++k) {
        const double w = f(k);
        if (!(w >= 1.0 && w < 2.0)) {
            ok = false;
            why << "k=" << k << " value " << w << " outside [1, 2); ";
        }
        if (k > std::max(2, opts.k_min) && !(w > prev)) {
            ok = false;
            why << "not increasing at k=" << k << "; ";
        }
        prev = w;
        // the minimal factor makes the negative zone exactly the simplex angle
        err = std::max(err, std::abs(w * measured_simplex_angle(k) - pi));
    }
    if (err > opts.tol) why << "omega * simplex angle deviates from pi by " << err << "; ";
    return finish("minimal_admissible_omega", err, opts.tol, ok, why.str());
}

CheckResult check_centered_centroid_cosine(const TheoryOptions& opts) {
    Rng rng = make_rng(opts.seed, "theory.centered_cosine");
    std::uniform_int_distribution<int> pick_k(std::max(2, opts.k_min), opts.k_max);
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    double err = 0.0;
    for (int t = 0; t < opts.random_frequencies; ++t) {
        const int k = pick_k(rng);
        const auto p = geometry::ClusterFrequencies::from_weights(random_weights(k, rng));
        // unit vectors with common inner product c, from a Cholesky factor of their Gram
        const double lo = -1.0 / (k - 1);
        const double c = lo + (0.9 - lo) * (0.05 + 0.9 * unit(rng));
        const Eigen::MatrixXd gram = (1.0 - c) * Eigen::MatrixXd::Identity(k, k) + c * Eigen::MatrixXd::Ones(k, k);
        const Eigen::MatrixXd v = gram.llt().matrixL();
        Eigen::VectorXd mean = Eigen::VectorXd::Zero(k);
        for (int i = 0; i < k; ++i) mean += p[static_cast<std::size_t>(i)] * v.row(i).transpose();
        for (int i = 0; i < k; ++i)
            for (int j = i + 1; j < k; ++j) {
                const Eigen::VectorXd a = v.row(i).transpose() - mean;
                const Eigen::VectorXd b = v.row(j).transpose() - mean;
                const double direct = a.dot(b) / (a.norm() * b.norm());
                err = std::max(err, std::abs(direct - geometry::centered_centroid_cosine(p, static_cast<std::size_t>(i), static_cast<std::size_t>(j))));
            }
    }
    return finish("centered_centroid_cosine", err, opts.tol, true, "");
}

CheckResult check_uniform_angle(const TheoryOptions& opts) {
    double err = 0.0;
    for (int k = std::max(2, opts.k_min); k <= opts.k_max; ++k) {
        const auto p = geometry::ClusterFrequencies(std::vector<double>(static_cast<std::size_t>(k), 1.0 / k));
        const double target = std::acos(-1.0 / (k - 1));
        for (int i = 0; i < k; ++i)
            for (int j = i + 1; j < k; ++j)
                err = std::max(err, std::abs(std::acos(geometry::clamp_cos(geometry::centered_centroid_cosine(p, static_cast<std::size_t>(i), static_cast<std::size_t>(j)))) - target));
        err = std::max(err, std::abs(geometry::min_centered_angle(p) - target));
    }
    return finish("uniform_angle", err, opts.tol, true, "");
}

CheckResult check_delta_star_bounds(const TheoryOptions& opts) {
    Rng rng = make_rng(opts.seed, "theory.delta_star");
    bool ok = true;
    std::ostringstream why;
    for (int k = std::max(2, opts.k_min); k <= opts.k_max; ++k) {
        const double upper = std::acos(-1.0 / (k - 1));
        for (int t = 0; t < std::max(1, opts.random_frequencies / 10); ++t) {
            const auto p = geometry::ClusterFrequencies::from_weights(random_weights(k, rng));
            const double a = geometry::min_centered_angle(p);
            // near pi acos amplifies rounding, so the k = 2 case is checked on the cosine
            const bool inside = k == 2 ? std::abs(geometry::centered_centroid_cosine(p, 0, 1) + 1.0) <= opts.tol
                                       : (a > pi / 3.0 && a <= upper + opts.tol);
            if (!inside) {
                ok = false;
                why << "k=" << k << " angle " << a << " outside bounds; ";
            }
        }
    }
    return finish("delta_star_bounds", 0.0, opts.tol, ok, why.str());
}

CheckResult check_deviation_bounds(const TheoryOptions& opts) {
    bool ok = true;
    double err = 0.0;
    std::ostringstream why;
    for (double omega : {1.0, 1.5, 2.0, 3.0}) {
        for (long long n : {1LL, 10LL, 1000LL}) {
            const auto zero = geometry::deviation_bounds(n, 0.0, omega);
            err = std::max({err, std::abs(zero.delta_plus), std::abs(zero.delta_minus)});
            double prev = 0.0;
            for (double eps = 1e-6; eps < 10.0; eps *= 3.0) {
                const auto b = geometry::deviation_bounds(n, eps, omega);
                err = std::max(err, std::abs(b.delta_minus * omega - b.delta_plus));
                if (b.delta_plus < prev || b.delta_plus > pi) {
                    ok = false;
                    why << "non-monotone or out of range at n=" << n << " eps=" << eps << "; ";
                }
                prev = b.delta_plus;
            }
        }
    }
    return finish("deviation_bounds", err, opts.tol, ok, why.str());
}

InvarianceReport pca_invariance(int k, int extra_dims, std::uint64_t seed) {
    if (k < 3) throw std::invalid_argument("invariance check needs k >= 3");
    const int dim = k + extra_dims;
    Rng rng = make_rng(seed, "theory.pca_invariance.k" + std::to_string(k));
    std::normal_distribution<double> normal(0.0, 1.0);
    Eigen::MatrixXd g(dim, dim);
    for (int i = 0; i < dim; ++i)
        for (int j = 0; j < dim; ++j) g(i, j) = normal(rng);
    const Eigen::MatrixXd q = Eigen::HouseholderQR<Eigen::MatrixXd>(g).householderQ();
    const Matrix vertices = geometry::regular_simplex(k, dim) * q;

    // each cluster sits exactly on its vertex, with random multiplicity
    std::uniform_int_distribution<int> count(2, 30);
    std::vector<int> first(static_cast<std::size_t>(k));
    std::vector<Eigen::Index> rows;
    for (int c = 0; c < k; ++c) {
        first[static_cast<std::size_t>(c)] = static_cast<int>(rows.size());
        for (int r = count(rng); r > 0; --r) rows.push_back(c);
    }
    Matrix z(static_cast<Eigen::Index>(rows.size()), dim);
    for (std::size_t r = 0; r < rows.size(); ++r) z.row(static_cast<Eigen::Index>(r)) = vertices.row(rows[r]);
    const kinfer::PcaProjections proj = kinfer::pca_project_all(z);

    const double zero_tol = 1e-10;
    auto angle = [&](int a, int b, int d) -> double {
        const auto pa = proj.top(first[static_cast<std::size_t>(a)], d);
        const auto pb = proj.top(first[static_cast<std::size_t>(b)], d);
        if (pa.norm() <= zero_tol || pb.norm() <= zero_tol) return std::nan("");
        return std::acos(geometry::clamp_cos(pa.dot(pb) / (pa.norm() * pb.norm())));
    };
    InvarianceReport rep;
    rep.k = k;
    rep.dim = dim;
    for (int a = 0; a < k; ++a)
        for (int b = a + 1; b < k; ++b) {
            const double ref = angle(a, b, dim);
            for (int d = k - 1; d <= dim; ++d) rep.max_dev_above = std::max(rep.max_dev_above, std::abs(angle(a, b, d) - ref));
            const double low = angle(a, b, k - 2);
            if (!std::isnan(low)) rep.max_dev_below = std::max(rep.max_dev_below, std::abs(low - ref));
        }
    return rep;
}

CheckResult check_pca_angle_invariance(int k_min, int k_max, int extra_dims, std::uint64_t seed) {
    double err = 0.0;
    bool ok = true;
    std::ostringstream why;
    for (int k = std::max(3, k_min); k <= k_max; ++k) {
        const auto r = pca_invariance(k, extra_dims, seed);
        err = std::max(err, r.max_dev_above);
        if (!(r.max_dev_below > 1e-3)) {
            ok = false;
            why << "k=" << k << " angles unchanged at d=k-2; ";
        }
    }
    return finish("pca_angle_invariance", err, 1e-6, ok, why.str());
}

std::vector<CheckResult> run_all(const TheoryOptions& opts) {
    return {check_simplex_gram(opts),
            check_valid_omega(opts),
            check_minimal_admissible_omega(opts),
            check_centered_centroid_cosine(opts),
            check_uniform_angle(opts),
            check_delta_star_bounds(opts),
            check_deviation_bounds(opts),
            check_pca_angle_invariance(3, std::min(opts.k_max, 6), 3, opts.seed)};
}

}  // namespace spherecc::theory
