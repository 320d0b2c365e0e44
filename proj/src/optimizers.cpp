#include "acoustics/optimizers.hpp"

#include <cmath>
#include <stdexcept>

namespace acoustics {

AdamState AdamState::zeros(Eigen::Index n) {
    AdamState s;
    s.first_moment = Eigen::VectorXd::Zero(n);
    s.second_moment = Eigen::VectorXd::Zero(n);
    return s;
}

Eigen::VectorXd descent_step(const Eigen::VectorXd& params, const Eigen::VectorXd& grad,
                             const DescentState& state) {
    if (params.size() != grad.size())
        throw std::invalid_argument("descent_step: shape mismatch");
    return params - state.step_size * grad;
}

Eigen::VectorXd adam_step(const Eigen::VectorXd& params, const Eigen::VectorXd& grad,
                          AdamState& state, double step_size) {
    if (params.size() != grad.size())
        throw std::invalid_argument("adam_step: shape mismatch");
    if (state.first_moment.size() != params.size())
        throw std::invalid_argument("adam_step: state shape mismatch");

    state.step_count += 1;
    state.first_moment = state.beta1 * state.first_moment + (1.0 - state.beta1) * grad;
    state.second_moment =
        state.beta2 * state.second_moment + (1.0 - state.beta2) * grad.cwiseProduct(grad);

    const double bc1 = 1.0 - std::pow(state.beta1, static_cast<double>(state.step_count));
    const double bc2 = 1.0 - std::pow(state.beta2, static_cast<double>(state.step_count));
    const Eigen::VectorXd m_hat = state.first_moment / bc1;
    const Eigen::VectorXd v_hat = state.second_moment / bc2;

    return params - step_size * m_hat.cwiseQuotient(
                        v_hat.cwiseSqrt().array().matrix() +
                        Eigen::VectorXd::Constant(params.size(), state.eps_stability));
}

} // namespace acoustics
