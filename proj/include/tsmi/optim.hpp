#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "tsmi/matrix.hpp"

namespace tsmi {

// A trainable matrix with its gradient accumulator and Adam state.
struct Parameter {
    std::string name;
    Matrix value;
    Matrix grad;
    Matrix adam_m;
    Matrix adam_v;
    std::uint64_t step_count = 0;

    Parameter() = default;
    Parameter(std::string n, Matrix v)
        : name(std::move(n)),
          value(std::move(v)),
          grad(value.rows(), value.cols()),
          adam_m(value.rows(), value.cols()),
          adam_v(value.rows(), value.cols()) {}

    void zero_grad() { grad.fill(0); }
};

struct AdamConfig {
    real beta1 = real(0.9);
    real beta2 = real(0.999);
    real eps = real(1e-8);
};

// Bias-corrected Adam update in place; zeroes the gradient afterward.
// Throws DivergenceError on non-finite gradient entries.
void adam_step(Parameter& p, real lr, const AdamConfig& cfg = {});

// Linear warmup to base_lr, then cosine decay down to 1% of base_lr.
struct LrSchedule {
    real base_lr = real(3e-4);
    std::uint64_t total_steps = 1;
    std::uint64_t warmup_steps = 0;

    real lr(std::uint64_t step) const;
};

// Central-difference gradient verification. `loss` evaluates the scalar
// objective at the current p.value; p.grad must already hold the analytic
// gradient for that objective. Only the given entries are probed. Returns
// the max relative error with denominator max(|analytic|, |numeric|, 1e-6).
double finite_diff_check(const std::function<double()>& loss, Parameter& p, double h,
                         const std::vector<std::size_t>& entries);

// Convenience overload probing every entry.
double finite_diff_check(const std::function<double()>& loss, Parameter& p, double h);

}  // namespace tsmi
