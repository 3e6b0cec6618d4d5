#include "geocond/edm.hpp"

#include <cmath>

namespace geocond {
namespace edm {

void EdmConfig::validate() const {
    if (!(sigma_data > 0)) throw InvalidInput("sigma_data must be positive");
    if (!(p_std > 0)) throw InvalidInput("p_std must be positive");
    if (!(sigma_min > 0) || !(sigma_min < sigma_max))
        throw InvalidInput("need 0 < sigma_min < sigma_max");
    if (!(rho > 0)) throw InvalidInput("rho must be positive");
    if (steps < 1) throw InvalidInput("steps must be >= 1");
}

GaussianOracleDenoiser::GaussianOracleDenoiser(std::vector<double> mean,
                                               std::vector<double> cov_diag)
    : mean_(std::move(mean)), cov_diag_(std::move(cov_diag)) {
    if (mean_.size() != cov_diag_.size()) throw InvalidInput("mean/cov_diag size mismatch");
    for (double v : cov_diag_)
        if (!(v > 0)) throw InvalidInput("cov_diag must be positive");
}

std::vector<double> GaussianOracleDenoiser::denoise(std::span<const double> x, double sigma,
                                                    const Condition&) const {
    if (x.size() != mean_.size()) throw InvalidInput("state dimension mismatch");
    std::vector<double> out(x.size());
    const double s2 = sigma * sigma;
    for (std::size_t i = 0; i < x.size(); ++i)
        out[i] = mean_[i] + cov_diag_[i] / (cov_diag_[i] + s2) * (x[i] - mean_[i]);
    return out;
}

std::vector<double> LinearDenoiser::denoise(std::span<const double> x, double,
                                            const Condition&) const {
    std::vector<double> out(x.size());
    for (std::size_t i = 0; i < x.size(); ++i) out[i] = a_ * x[i];
    return out;
}

double sample_sigma(Rng& rng, const EdmConfig& cfg) {
    cfg.validate();
    return std::exp(cfg.p_mean + cfg.p_std * rng.normal());
}

double lambda_weight(double sigma, const EdmConfig& cfg) {
    if (!(sigma > 0)) throw InvalidInput("lambda_weight: sigma must be positive");
    const double sd = cfg.sigma_data;
    const double prod = sigma * sd;
    return (sigma * sigma + sd * sd) / (prod * prod);
}

LossSample weighted_loss(const Denoiser& denoiser, std::span<const double> x0,
                         const Condition& cond, double sigma, const EdmConfig& cfg,
                         const UncertaintyFn& u_of_sigma, Rng& rng) {
    if (!(sigma > 0)) throw InvalidInput("weighted_loss: sigma must be positive");
    std::vector<double> noisy(x0.size());
    for (std::size_t i = 0; i < x0.size(); ++i) {
        if (!std::isfinite(x0[i])) throw InvalidInput("weighted_loss: x0 must be finite");
        noisy[i] = x0[i] + sigma * rng.normal();
    }
    const std::vector<double> d = denoiser.denoise(noisy, sigma, cond);
    if (d.size() != x0.size()) throw NumericalError("denoiser changed the state dimension");

    double loss = 0;
    for (std::size_t i = 0; i < x0.size(); ++i) {
        if (!std::isfinite(d[i])) throw NumericalError("denoiser produced non-finite output");
        const double r = x0[i] - d[i];
        loss += r * r;
    }
    const double u = u_of_sigma ? u_of_sigma(sigma) : 0.0;
    LossSample out;
    out.per_sample_loss = loss;
    out.total_objective_term = lambda_weight(sigma, cfg) / std::exp(u) * loss + u;
    return out;
}

double fd_central(const std::function<double(double)>& f, double x, double h) {
    if (!(h > 0)) throw InvalidInput("fd step must be positive");
    return (f(x + h) - f(x - h)) / (2 * h);
}

GradCheck loss_grad_fd_check(double a, std::span<const double> x0, double sigma, double h,
                             Rng& rng) {
    if (!(h > 0)) throw InvalidInput("fd step must be positive");
    std::vector<double> y(x0.size());  // y = x0 + n, frozen
    for (std::size_t i = 0; i < x0.size(); ++i) y[i] = x0[i] + sigma * rng.normal();

    double yy = 0, xy = 0;
    for (std::size_t i = 0; i < x0.size(); ++i) {
        yy += y[i] * y[i];
        xy += x0[i] * y[i];
    }
    GradCheck out;
    out.analytic = 2 * a * yy - 2 * xy;

    auto loss_at = [&](double aa) {
        double acc = 0;
        for (std::size_t i = 0; i < x0.size(); ++i) {
            const double r = x0[i] - aa * y[i];
            acc += r * r;
        }
        return acc;
    };
    out.fd = fd_central(loss_at, a, h);
    return out;
}

NoiseSchedule build_schedule(const EdmConfig& cfg) {
    cfg.validate();
    NoiseSchedule sched;
    if (cfg.steps == 1) {
        sched.sigmas = {cfg.sigma_max, 0.0};
        return sched;
    }
    const double inv_rho = 1.0 / cfg.rho;
    const double hi = std::pow(cfg.sigma_max, inv_rho);
    const double lo = std::pow(cfg.sigma_min, inv_rho);
    sched.sigmas.resize(cfg.steps + 1);
    sched.sigmas[0] = cfg.sigma_max;
    sched.sigmas[cfg.steps - 1] = cfg.sigma_min;
    sched.sigmas[cfg.steps] = 0.0;
    for (int i = 1; i < cfg.steps - 1; ++i) {
        const double t = static_cast<double>(i) / (cfg.steps - 1);
        sched.sigmas[i] = std::pow(hi + t * (lo - hi), cfg.rho);
    }
    for (int i = 0; i < cfg.steps; ++i) {
        if (!(sched.sigmas[i] > sched.sigmas[i + 1]))
            throw NumericalError("schedule is not strictly decreasing");
    }
    return sched;
}

std::vector<double> heun_sample(const Denoiser& denoiser, const NoiseSchedule& schedule,
                                const Condition& cond, Rng& rng, std::size_t dim) {
    const auto& sig = schedule.sigmas;
    if (sig.size() < 2 || sig.back() != 0.0)
        throw InvalidInput("schedule must end at sigma = 0");
    if (dim == 0) throw InvalidInput("dim must be positive");

    std::vector<double> x(dim);
    for (auto& v : x) v = sig[0] * rng.normal();

    std::vector<double> d(dim), x_next(dim);
    for (std::size_t i = 0; i + 1 < sig.size(); ++i) {
        const double s_cur = sig[i], s_next = sig[i + 1];
        const double dt = s_next - s_cur;
        const std::vector<double> den = denoiser.denoise(x, s_cur, cond);
        for (std::size_t k = 0; k < dim; ++k) {
            d[k] = (x[k] - den[k]) / s_cur;
            x_next[k] = x[k] + dt * d[k];
        }
        if (s_next > 0.0) {
            const std::vector<double> den2 = denoiser.denoise(x_next, s_next, cond);
            for (std::size_t k = 0; k < dim; ++k) {
                const double d2 = (x_next[k] - den2[k]) / s_next;
                x_next[k] = x[k] + dt * 0.5 * (d[k] + d2);
            }
        }
        for (std::size_t k = 0; k < dim; ++k) {
            if (!std::isfinite(x_next[k]))
                throw NumericalError("non-finite sampler state at step " + std::to_string(i));
        }
        x.swap(x_next);
    }
    return x;
}

std::vector<double> cfg_combine(std::span<const double> d_cond, std::span<const double> d_uncond,
                                double w) {
    if (d_cond.size() != d_uncond.size()) throw InvalidInput("cfg_combine: shape mismatch");
    std::vector<double> out(d_cond.size());
    for (std::size_t i = 0; i < d_cond.size(); ++i)
        out[i] = d_uncond[i] + w * (d_cond[i] - d_uncond[i]);
    return out;
}

}  // namespace edm
}  // namespace geocond
