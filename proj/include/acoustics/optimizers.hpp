#pragma once

#include <Eigen/Dense>

namespace acoustics {

enum class FirstOrderMethod { Sgd, Adam };

struct DescentState {
    double step_size = 0.1;
};

struct AdamState {
    Eigen::VectorXd first_moment;
    Eigen::VectorXd second_moment;
    long step_count = 0;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps_stability = 1e-8;

    static AdamState zeros(Eigen::Index n);
};

/// params - step_size * grad
Eigen::VectorXd descent_step(const Eigen::VectorXd& params, const Eigen::VectorXd& grad,
                             const DescentState& state);

/// Standard bias-corrected Adam; advances `state` by one step.
Eigen::VectorXd adam_step(const Eigen::VectorXd& params, const Eigen::VectorXd& grad,
                          AdamState& state, double step_size);

} // namespace acoustics
