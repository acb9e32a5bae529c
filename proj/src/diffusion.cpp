#include "awdiff/diffusion.hpp"

#include <cmath>
#include <sstream>

namespace awdiff {

void NoiseSchedule::require_step(int t) const {
    if (t < 1 || t > steps)
        throw ParameterError("timestep " + std::to_string(t) + " outside [1, " + std::to_string(steps) + "]");
}

std::string NoiseSchedule::dump_table() const {
    std::ostringstream out;
    out.precision(17);
    out << "t,beta,alpha,alpha_bar\n";
    for (int t = 1; t <= steps; ++t)
        out << t << "," << beta(t) << "," << alpha(t) << "," << alpha_bar(t) << "\n";
    return out.str();
}

NoiseSchedule linear_beta_schedule(int steps, double beta_start, double beta_end) {
    if (steps < 1) throw ParameterError("schedule needs at least one step");
    if (!(beta_start > 0.0) || !(beta_start <= beta_end) || !(beta_end < 1.0))
        throw ParameterError("require 0 < beta_start <= beta_end < 1");
    NoiseSchedule s;
    s.steps = steps;
    s.betas.resize(steps);
    s.alphas.resize(steps);
    s.alpha_bars.resize(steps);
    double prod = 1.0;
    for (int t = 1; t <= steps; ++t) {
        double beta = steps > 1 ? beta_start + (beta_end - beta_start) * (t - 1) / (steps - 1)
                                : beta_start;
        s.betas[t - 1] = beta;
        s.alphas[t - 1] = 1.0 - beta;
        prod *= s.alphas[t - 1];
        s.alpha_bars[t - 1] = prod;
    }
    return s;
}

Image forward_step(const Image& x_prev, int t, const NoiseSchedule& sched, SeededRng& rng) {
    sched.require_step(t);
    const double keep = std::sqrt(1.0 - sched.beta(t));
    const double sigma = std::sqrt(sched.beta(t));
    Image out(x_prev.width(), x_prev.height());
    for (std::size_t i = 0; i < out.size(); ++i)
        out.pixels()[i] = keep * x_prev.pixels()[i] + sigma * rng.next_normal();
    return out;
}

Image forward_marginal(const Image& x0, int t, const Image& eps, const NoiseSchedule& sched) {
    sched.require_step(t);
    if (!x0.same_shape(eps)) throw InvariantError("x0 and eps dims differ");
    const double signal = std::sqrt(sched.alpha_bar(t));
    const double noise = std::sqrt(1.0 - sched.alpha_bar(t));
    Image out(x0.width(), x0.height());
    for (std::size_t i = 0; i < out.size(); ++i)
        out.pixels()[i] = signal * x0.pixels()[i] + noise * eps.pixels()[i];
    return out;
}

Image predict_x0(const Image& x_t, int t, const Image& eps_pred, const NoiseSchedule& sched) {
    sched.require_step(t);
    if (!x_t.same_shape(eps_pred)) throw InvariantError("x_t and eps_pred dims differ");
    const double ab = sched.alpha_bar(t);
    const double inv_signal = 1.0 / std::sqrt(ab);
    const double noise = std::sqrt(1.0 - ab);
    Image out(x_t.width(), x_t.height());
    for (std::size_t i = 0; i < out.size(); ++i)
        out.pixels()[i] = (x_t.pixels()[i] - noise * eps_pred.pixels()[i]) * inv_signal;
    return out;
}

Image reverse_step(const Image& x_t, int t, const Image& eps_pred, const NoiseSchedule& sched,
                   const SamplerConfig& cfg, SeededRng& rng) {
    sched.require_step(t);
    if (!x_t.same_shape(eps_pred)) throw InvariantError("x_t and eps_pred dims differ");
    const double beta = sched.beta(t);
    const double inv_sqrt_alpha = 1.0 / std::sqrt(sched.alpha(t));
    const double eps_coeff = beta / std::sqrt(1.0 - sched.alpha_bar(t));
    double variance = beta;
    if (cfg.variance_mode == VarianceMode::BetaTilde)
        variance = beta * (1.0 - sched.alpha_bar_prev(t)) / (1.0 - sched.alpha_bar(t));
    const double sigma = std::sqrt(variance);

    Image out(x_t.width(), x_t.height());
    if (t > 1) {
        for (std::size_t i = 0; i < out.size(); ++i) {
            double mu = inv_sqrt_alpha * (x_t.pixels()[i] - eps_coeff * eps_pred.pixels()[i]);
            out.pixels()[i] = mu + sigma * rng.next_normal();
        }
    } else {
        // Terminal step is deterministic.
        for (std::size_t i = 0; i < out.size(); ++i)
            out.pixels()[i] = inv_sqrt_alpha * (x_t.pixels()[i] - eps_coeff * eps_pred.pixels()[i]);
    }
    return out;
}

Image sample(const DenoiserParams& denoiser, const NoiseSchedule& sched,
             const ConditioningEmbedding& z_y, const WaveletPyramid& f, const SamplerConfig& cfg) {
    SeededRng rng(cfg.seed);
    Image x = standard_normal_field(rng, f.width(), f.height());
    for (int t = sched.steps; t >= 1; --t) {
        Image eps_pred;
        try {
            eps_pred = denoiser_forward(denoiser, x, t, z_y, f);
        } catch (const DivergenceError& e) {
            throw DivergenceError(std::string(e.what()) + " (sampling step t=" + std::to_string(t) + ")");
        }
        x = reverse_step(x, t, eps_pred, sched, cfg, rng);
        if (!x.all_finite())
            throw DivergenceError("sampling diverged at step t=" + std::to_string(t));
    }
    return x;
}

} // namespace awdiff
