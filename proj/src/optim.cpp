#include "tsmi/optim.hpp"

#include <cmath>
#include <numbers>

#include "tsmi/errors.hpp"

namespace tsmi {

void adam_step(Parameter& p, real lr, const AdamConfig& cfg) {
    if (!p.grad.all_finite()) {
        throw DivergenceError("adam_step: non-finite gradient in parameter '" + p.name + "'");
    }
    p.step_count += 1;
    const double t = static_cast<double>(p.step_count);
    const double bc1 = 1.0 - std::pow(static_cast<double>(cfg.beta1), t);
    const double bc2 = 1.0 - std::pow(static_cast<double>(cfg.beta2), t);
    real* v = p.value.data();
    real* g = p.grad.data();
    real* m = p.adam_m.data();
    real* s = p.adam_v.data();
    for (std::size_t i = 0; i < p.value.size(); ++i) {
        m[i] = cfg.beta1 * m[i] + (real(1) - cfg.beta1) * g[i];
        s[i] = cfg.beta2 * s[i] + (real(1) - cfg.beta2) * g[i] * g[i];
        const double mhat = static_cast<double>(m[i]) / bc1;
        const double vhat = static_cast<double>(s[i]) / bc2;
        v[i] -= static_cast<real>(static_cast<double>(lr) * mhat /
                                  (std::sqrt(vhat) + static_cast<double>(cfg.eps)));
    }
    p.zero_grad();
}

real LrSchedule::lr(std::uint64_t step) const {
    const real min_lr = base_lr * real(0.01);
    if (warmup_steps > 0 && step < warmup_steps) {
        // Linear ramp; never returns exactly 0 at step 0.
        return base_lr * static_cast<real>(step + 1) / static_cast<real>(warmup_steps);
    }
    if (step >= total_steps) return min_lr;
    const double span = static_cast<double>(total_steps - warmup_steps);
    const double progress = span > 0 ? static_cast<double>(step - warmup_steps) / span : 1.0;
    const double cosine = 0.5 * (1.0 + std::cos(std::numbers::pi * progress));
    return min_lr + static_cast<real>(cosine) * (base_lr - min_lr);
}

double finite_diff_check(const std::function<double()>& loss, Parameter& p, double h,
                         const std::vector<std::size_t>& entries) {
    double max_rel = 0;
    real* v = p.value.data();
    const real* g = p.grad.data();
    for (std::size_t idx : entries) {
        const real saved = v[idx];
        v[idx] = saved + static_cast<real>(h);
        const double up = loss();
        v[idx] = saved - static_cast<real>(h);
        const double down = loss();
        v[idx] = saved;
        const double numeric = (up - down) / (2.0 * h);
        const double analytic = static_cast<double>(g[idx]);
        const double denom = std::max({std::abs(analytic), std::abs(numeric), 1e-6});
        max_rel = std::max(max_rel, std::abs(analytic - numeric) / denom);
    }
    return max_rel;
}

double finite_diff_check(const std::function<double()>& loss, Parameter& p, double h) {
    std::vector<std::size_t> all(p.value.size());
    for (std::size_t i = 0; i < all.size(); ++i) all[i] = i;
    return finite_diff_check(loss, p, h, all);
}

}  // namespace tsmi
