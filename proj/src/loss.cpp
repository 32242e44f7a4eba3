#include "spherecc/loss.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <stdexcept>
#include <string>

#include "spherecc/geometry.hpp"

namespace spherecc::loss {

void LossConfig::validate() const {
    if (!(omega > 0.0)) throw std::invalid_argument("omega must be > 0");
    if (!(lambda >= 0.0)) throw std::invalid_argument("lambda must be >= 0");
    if (!(log_eps > 0.0)) throw std::invalid_argument("log_eps must be > 0");
}

double sim(double theta, Link y, double omega) {
    if (!(theta >= 0.0 && theta <= std::numbers::pi)) throw std::invalid_argument("theta outside [0, pi]");
    if (y == Link::MustLink) return 0.5 * (std::cos(theta) + 1.0);
    return 0.5 * (std::cos(std::min(omega * theta, std::numbers::pi)) + 1.0);
}

LossValue angular_loss(const Matrix& z, std::span<const Constraint> constraints, const LossConfig& cfg) {
    cfg.validate();
    if (constraints.empty()) throw std::invalid_argument("empty constraint set");
    LossValue out{0.0, Matrix::Zero(z.rows(), z.cols())};
    const double inv_count = 1.0 / static_cast<double>(constraints.size());

    for (const auto& c : constraints) {
        if (c.a >= static_cast<std::size_t>(z.rows()) || c.b >= static_cast<std::size_t>(z.rows()))
            throw std::out_of_range("constraint index out of range");
        const auto za = z.row(static_cast<Eigen::Index>(c.a));
        const auto zb = z.row(static_cast<Eigen::Index>(c.b));
        const double na = za.norm();
        const double nb = zb.norm();
        if (na == 0.0 || nb == 0.0) throw std::invalid_argument("degenerate latent row in constraint");
        const double cosv = geometry::clamp_cos(za.dot(zb) / (na * nb));
        const double theta = std::acos(cosv);

        // dterm/dcos
        double dcos = 0.0;
        if (c.must_link()) {
            const double s = 0.5 * (cosv + 1.0);
            if (s > cfg.log_eps) {
                out.value -= std::log(s);
                // d/dcos of -log((cos+1)/2); equals the arccos chain exactly
                dcos = -1.0 / (cosv + 1.0);
            } else {
                out.value -= std::log(cfg.log_eps);
            }
        } else {
            const double wt = cfg.omega * theta;
            if (wt >= std::numbers::pi) {
                // flat zone: Sim = 0, term = -log(1) = 0, zero gradient
            } else {
                const double one_minus = 0.5 * (1.0 - std::cos(wt));
                if (one_minus > cfg.log_eps) {
                    out.value -= std::log(one_minus);
                    const double dtheta = -cfg.omega * std::sin(wt) / (2.0 * one_minus);
                    const double cc = std::clamp(cosv, -kArccosClamp, kArccosClamp);
                    dcos = dtheta * (-1.0 / std::sqrt(1.0 - cc * cc));
                } else {
                    out.value -= std::log(cfg.log_eps);
                }
            }
        }
        if (dcos != 0.0) {
            const double scale = dcos * inv_count;
            // dcos/dza = zb/(na nb) - cos za/na^2
            out.grad.row(static_cast<Eigen::Index>(c.a)) += scale * (zb / (na * nb) - cosv * za / (na * na));
            out.grad.row(static_cast<Eigen::Index>(c.b)) += scale * (za / (na * nb) - cosv * zb / (nb * nb));
        }
    }
    out.value *= inv_count;
    return out;
}

LossValue recon_loss(const Matrix& x, const Matrix& x_hat) {
    if (x.rows() != x_hat.rows() || x.cols() != x_hat.cols())
        throw std::invalid_argument("shape mismatch in recon_loss");
    if (x.rows() == 0) throw std::invalid_argument("empty batch in recon_loss");
    const double n = static_cast<double>(x.rows());
    Matrix diff = x_hat - x;
    LossValue out;
    out.value = diff.squaredNorm() / n;
    out.grad = (2.0 / n) * diff;
    return out;
}

}  // namespace spherecc::loss
