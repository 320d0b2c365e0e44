#include <doctest.h>

#include <cmath>

#include "acoustics/optimizers.hpp"

using namespace acoustics;

namespace {

Eigen::VectorXd vec1(double v) {
    Eigen::VectorXd x(1);
    x << v;
    return x;
}

} // namespace

TEST_CASE("descent step") {
    CHECK(descent_step(vec1(1.0), vec1(2.0), DescentState{0.1})[0] ==
          doctest::Approx(0.8).epsilon(1e-15));
    CHECK(descent_step(vec1(1.0), vec1(0.0), DescentState{0.1})[0] == 1.0);
}

TEST_CASE("descent step is additive in the gradient") {
    const Eigen::VectorXd x = vec1(0.3), g1 = vec1(1.7), g2 = vec1(-0.4);
    const DescentState s{0.05};
    const double combined = descent_step(x, g1 + g2, s)[0];
    const double sequential = descent_step(descent_step(x, g1, s), g2, s)[0];
    CHECK(combined == doctest::Approx(sequential).epsilon(1e-15));
}

TEST_CASE("descent rejects shape mismatch") {
    Eigen::VectorXd g(2);
    g << 1.0, 2.0;
    CHECK_THROWS_AS(descent_step(vec1(1.0), g, DescentState{0.1}), std::invalid_argument);
}

TEST_CASE("adam first step is close to -lr * sign(g)") {
    AdamState s = AdamState::zeros(1);
    const Eigen::VectorXd out = adam_step(vec1(0.0), vec1(0.5), s, 0.1);
    // First step: m_hat = g, v_hat = g^2, update = -lr * g/(|g| + eps-ish).
    CHECK(out[0] == doctest::Approx(-0.1).epsilon(1e-6));
    CHECK(s.step_count == 1);
}

TEST_CASE("adam with zero gradient and zero state does nothing") {
    AdamState s = AdamState::zeros(1);
    CHECK(adam_step(vec1(3.0), vec1(0.0), s, 0.1)[0] == 3.0);
}

TEST_CASE("two adam steps with constant gradient match hand-computed moments") {
    const double g = 0.7, lr = 0.1;
    AdamState s = AdamState::zeros(1);
    Eigen::VectorXd x = vec1(1.0);
    x = adam_step(x, vec1(g), s, lr);
    x = adam_step(x, vec1(g), s, lr);

    // Hand arithmetic with defaults beta1=0.9, beta2=0.999, eps=1e-8.
    double m = 0.0, v = 0.0, xr = 1.0;
    for (int t = 1; t <= 2; ++t) {
        m = 0.9 * m + 0.1 * g;
        v = 0.999 * v + 0.001 * g * g;
        const double mh = m / (1.0 - std::pow(0.9, t));
        const double vh = v / (1.0 - std::pow(0.999, t));
        xr -= lr * mh / (std::sqrt(vh) + 1e-8);
    }
    CHECK(x[0] == doctest::Approx(xr).epsilon(1e-14));
    CHECK(s.first_moment[0] == doctest::Approx(m).epsilon(1e-14));
    CHECK(s.second_moment[0] == doctest::Approx(v).epsilon(1e-14));
}

TEST_CASE("adam per-coordinate step respects the trust-region bound") {
    // |step| <= lr * (1 - beta1) / sqrt(1 - beta2) for arbitrary gradients.
    const double lr = 0.1;
    const double bound = lr * (1.0 - 0.9) / std::sqrt(1.0 - 0.999);
    AdamState s = AdamState::zeros(3);
    Eigen::VectorXd x = Eigen::VectorXd::Zero(3);
    Eigen::VectorXd g(3);
    for (int t = 0; t < 50; ++t) {
        g << 1e3 * std::sin(t * 0.7), -1e-3 * t, 42.0;
        const Eigen::VectorXd next = adam_step(x, g, s, lr);
        CHECK((next - x).cwiseAbs().maxCoeff() <= bound * (1.0 + 1e-9));
        x = next;
    }
}

TEST_CASE("descent on a convex quadratic decreases monotonically") {
    // f(x) = 2 x^2, f' = 4x; stable for lr < 0.5.
    Eigen::VectorXd x = vec1(5.0);
    double prev = 2.0 * x[0] * x[0];
    const DescentState s{0.1};
    for (int t = 0; t < 100; ++t) {
        x = descent_step(x, vec1(4.0 * x[0]), s);
        const double f = 2.0 * x[0] * x[0];
        CHECK(f < prev);
        prev = f;
    }
}
