#pragma once

#include <cstdint>
#include <vector>

#include "acoustics/helmholtz.hpp"
#include "acoustics/optimizers.hpp"

namespace acoustics {

struct MeasurementSet {
    std::vector<Point2> points;
    std::vector<Complex> values;
};

struct LossWeights {
    double w_mag = 0.5;
    double w_phase = 0.1;
    double w_rel = 5.0;
};

struct EstimationConfig {
    HelmholtzProblem problem;  // admittance field holds the unknown's start point
    Admittance initial_admittance;
    LossWeights weights;
    FirstOrderMethod optimizer = FirstOrderMethod::Sgd;
    double step_size = 0.1;
    int iterations = 300;
    std::uint64_t seed = 0;
};

struct EstimationIteration {
    int iteration;
    double loss;
    double beta_r;
    double beta_i;
    double grad_r;
    double grad_i;
};

struct EstimationTrace {
    std::vector<EstimationIteration> iterations;
    Admittance final_admittance;
    bool failed = false;  // solver failure mid-run; trace is partial
};

/// Selects all quadrature points within `radius` of any cluster center and
/// evaluates the field there. Empty selection is an error.
MeasurementSet sample_measurements(const PressureField& field,
                                   const std::vector<Point2>& cluster_centers, double radius);

/// Independent Gaussian noise on real and imaginary parts, with standard
/// deviation level * RMS(|p|). Deterministic per seed.
MeasurementSet add_noise(const MeasurementSet& meas, double level, std::uint64_t seed);

/// Wraps a phase difference into (-pi, pi].
double wrap_phase(double diff);

double admittance_loss(const MeasurementSet& pred, const MeasurementSet& meas,
                       const LossWeights& weights);

struct BetaGradient {
    double loss;
    double d_beta_r;
    double d_beta_i;
};

/// Loss and gradient of the measurement objective with respect to
/// (beta_r, beta_i) via the discrete adjoint: one forward solve and one
/// transposed solve sharing the factorization (K is complex symmetric).
BetaGradient loss_gradient_beta(const Mesh& mesh, const HelmholtzProblem& problem,
                                const MeasurementSet& meas, const LossWeights& weights);

EstimationTrace estimate_admittance(const Mesh& mesh, const EstimationConfig& config,
                                    const MeasurementSet& meas);

} // namespace acoustics
