#pragma once

#include <functional>
#include <span>
#include <vector>

#include "geocond/errors.hpp"
#include "geocond/rng.hpp"

namespace geocond {
namespace edm {

struct EdmConfig {
    double sigma_data = 0.5;
    double p_mean = -1.2;
    double p_std = 1.2;
    double sigma_min = 0.002;
    double sigma_max = 80.0;
    double rho = 7.0;
    int steps = 30;

    void validate() const;
};

/// Descending sigma ladder of length steps+1, terminating at exactly 0.
struct NoiseSchedule {
    std::vector<double> sigmas;

    int steps() const { return static_cast<int>(sigmas.size()) - 1; }
};

/// Opaque conditioning payload threaded through denoisers; the oracle
/// denoisers ignore it.
struct Condition {
    std::vector<double> payload;
};

class Denoiser {
   public:
    virtual ~Denoiser() = default;
    virtual std::vector<double> denoise(std::span<const double> x, double sigma,
                                        const Condition& cond) const = 0;
};

/// Analytic optimum for Gaussian data: D(x, sigma) = mu + S(S + sigma^2)^-1 (x - mu)
/// with diagonal covariance S.
class GaussianOracleDenoiser : public Denoiser {
   public:
    GaussianOracleDenoiser(std::vector<double> mean, std::vector<double> cov_diag);
    std::vector<double> denoise(std::span<const double> x, double sigma,
                                const Condition& cond) const override;

   private:
    std::vector<double> mean_, cov_diag_;
};

/// D(x, sigma) = a * x.
class LinearDenoiser : public Denoiser {
   public:
    explicit LinearDenoiser(double a) : a_(a) {}
    std::vector<double> denoise(std::span<const double> x, double sigma,
                                const Condition& cond) const override;
    double a() const { return a_; }

   private:
    double a_;
};

/// sigma = exp(p_mean + p_std * z), z standard normal.
double sample_sigma(Rng& rng, const EdmConfig& cfg);

/// lambda(sigma) = (sigma^2 + sigma_data^2) / (sigma * sigma_data)^2.
double lambda_weight(double sigma, const EdmConfig& cfg);

struct LossSample {
    double per_sample_loss = 0;      // ||x0 - D(x0 + n, sigma)||^2
    double total_objective_term = 0; // lambda/exp(u) * loss + u
};

using UncertaintyFn = std::function<double(double)>;

/// Draws n ~ N(0, sigma^2 I) and evaluates one integrand sample of the
/// weighted training objective. x0 is an already-encoded latent.
LossSample weighted_loss(const Denoiser& denoiser, std::span<const double> x0,
                         const Condition& cond, double sigma, const EdmConfig& cfg,
                         const UncertaintyFn& u_of_sigma, Rng& rng);

struct GradCheck {
    double analytic = 0;
    double fd = 0;
};

/// dLoss/da of ||x0 - a*(x0 + n)||^2 with one frozen noise draw, in closed
/// form and by central differences with step h.
GradCheck loss_grad_fd_check(double a, std::span<const double> x0, double sigma, double h,
                             Rng& rng);

/// Central difference helper used by the gradient check.
double fd_central(const std::function<double(double)>& f, double x, double h);

/// sigma_i = (max^(1/rho) + i/(steps-1) * (min^(1/rho) - max^(1/rho)))^rho
/// for i in 0..steps-1, then a final 0. Endpoints are pinned exactly to
/// sigma_max / sigma_min. steps == 1 degenerates to [sigma_max, 0].
NoiseSchedule build_schedule(const EdmConfig& cfg);

/// Deterministic 2nd-order (Heun) probability-flow sampler. x starts at
/// N(0, sigma_max^2 I); the final step to sigma = 0 is plain Euler.
std::vector<double> heun_sample(const Denoiser& denoiser, const NoiseSchedule& schedule,
                                const Condition& cond, Rng& rng, std::size_t dim);

/// Classifier-free guidance: d_uncond + w * (d_cond - d_uncond).
std::vector<double> cfg_combine(std::span<const double> d_cond, std::span<const double> d_uncond,
                                double w);

}  // namespace edm
}  // namespace geocond
