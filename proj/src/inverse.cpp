#include "acoustics/inverse.hpp"

#include <cmath>
#include <numbers>
#include <random>
#include <stdexcept>

#include "acoustics/optimizers.hpp"

namespace acoustics {

namespace {

// P1 interpolation operator from nodal values to arbitrary points.
SparseReal interpolation_matrix(const Mesh& mesh, const std::vector<Point2>& points) {
    std::vector<Eigen::Triplet<double>> trips;
    trips.reserve(points.size() * 3);
    for (std::size_t r = 0; r < points.size(); ++r) {
        const Point2& x = points[r];
        bool found = false;
        for (const auto& t : mesh.triangles) {
            const Point2& p0 = mesh.vertices[t.a];
            const Point2& p1 = mesh.vertices[t.b];
            const Point2& p2 = mesh.vertices[t.c];
            const double area2 = 2.0 * triangle_signed_area(p0, p1, p2);
            const double l0 = ((p1.x - x.x) * (p2.y - x.y) - (p2.x - x.x) * (p1.y - x.y)) / area2;
            const double l1 = ((p2.x - x.x) * (p0.y - x.y) - (p0.x - x.x) * (p2.y - x.y)) / area2;
            const double l2 = 1.0 - l0 - l1;
            if (l0 >= -1e-12 && l1 >= -1e-12 && l2 >= -1e-12) {
                trips.emplace_back(r, t.a, l0);
                trips.emplace_back(r, t.b, l1);
                trips.emplace_back(r, t.c, l2);
                found = true;
                break;
            }
        }
        if (!found)
            throw std::runtime_error("measurement point (" + std::to_string(x.x) + ", " +
                                     std::to_string(x.y) + ") is outside the mesh");
    }
    SparseReal E(points.size(), mesh.vertices.size());
    E.setFromTriplets(trips.begin(), trips.end());
    return E;
}

struct LossAndSensitivity {
    double loss;
    ComplexVector dq;  // per point: dJ/dRe(q) - i dJ/dIm(q)
};

// Loss of Eq-style weighted objective plus its sensitivity with respect to
// the predicted complex values q.
LossAndSensitivity loss_with_sensitivity(const ComplexVector& q, const std::vector<Complex>& meas,
                                         const LossWeights& w) {
    const Eigen::Index m = q.size();
    double meas_sq = 0.0;
    for (const auto& v : meas) meas_sq += std::norm(v);
    if (!(meas_sq > 0.0)) throw std::invalid_argument("admittance_loss: zero measurement norm");

    double loss = 0.0;
    ComplexVector dq = ComplexVector::Zero(m);
    double diff_sq = 0.0;
    for (Eigen::Index i = 0; i < m; ++i) {
        const Complex qi = q[i];
        const Complex mi = meas[i];
        const double aq = std::abs(qi);
        const double am = std::abs(mi);

        const double dmag = aq - am;
        loss += w.w_mag * dmag * dmag;
        if (aq > 0.0) dq[i] += 2.0 * w.w_mag * dmag * std::conj(qi) / aq;

        const double dphase = wrap_phase(std::arg(qi) - std::arg(mi));
        loss += w.w_phase * dphase * dphase;
        if (aq > 0.0)
            dq[i] += -2.0 * w.w_phase * dphase * Complex(0.0, 1.0) * std::conj(qi) / (aq * aq);

        diff_sq += std::norm(qi - mi);
        dq[i] += 2.0 * w.w_rel * std::conj(qi - mi) / meas_sq;
    }
    loss += w.w_rel * diff_sq / meas_sq;
    return {loss, std::move(dq)};
}

} // namespace

MeasurementSet sample_measurements(const PressureField& field,
                                   const std::vector<Point2>& cluster_centers, double radius) {
    const auto qpts = quadrature_points(*field.mesh);
    MeasurementSet out;
    for (const auto& qp : qpts) {
        for (const auto& c : cluster_centers) {
            const double d = std::hypot(qp.position.x - c.x, qp.position.y - c.y);
            if (d <= radius) {
                out.points.push_back(qp.position);
                out.values.push_back(eval_field(field, qp.position));
                break;
            }
        }
    }
    if (out.points.empty())
        throw std::runtime_error(
            "sample_measurements: no quadrature point within radius of any cluster "
            "(mesh too coarse or radius too small)");
    return out;
}

MeasurementSet add_noise(const MeasurementSet& meas, double level, std::uint64_t seed) {
    if (level < 0.0) throw std::invalid_argument("add_noise: negative noise level");
    if (level == 0.0) return meas;

    double sq = 0.0;
    for (const auto& v : meas.values) sq += std::norm(v);
    const double rms = std::sqrt(sq / static_cast<double>(meas.values.size()));

    std::mt19937_64 rng(seed);
    std::normal_distribution<double> dist(0.0, level * rms);
    MeasurementSet out = meas;
    for (auto& v : out.values) {
        const double re = dist(rng);
        const double im = dist(rng);
        v += Complex(re, im);
    }
    return out;
}

double wrap_phase(double diff) {
    const double two_pi = 2.0 * std::numbers::pi;
    double w = std::remainder(diff, two_pi);
    if (w <= -std::numbers::pi) w += two_pi;
    return w;
}

double admittance_loss(const MeasurementSet& pred, const MeasurementSet& meas,
                       const LossWeights& weights) {
    if (pred.values.size() != meas.values.size())
        throw std::invalid_argument("admittance_loss: point set size mismatch");
    ComplexVector q(pred.values.size());
    for (std::size_t i = 0; i < pred.values.size(); ++i) q[i] = pred.values[i];
    return loss_with_sensitivity(q, meas.values, weights).loss;
}

BetaGradient loss_gradient_beta(const Mesh& mesh, const HelmholtzProblem& problem,
                                const MeasurementSet& meas, const LossWeights& weights) {
    const auto parts = assemble_parts(mesh, problem);
    const auto sys = compose_system(parts, problem);
    const ComplexFactorization fact(sys.matrix);
    const ComplexVector p = fact.solve(sys.rhs);

    const SparseReal E = interpolation_matrix(mesh, meas.points);
    const ComplexVector q = E.cast<Complex>() * p;
    auto [loss, dq] = loss_with_sensitivity(q, meas.values, weights);

    // Adjoint: K^T lambda = E^T dq; K is complex symmetric, so the forward
    // factorization solves the transposed system too.
    const ComplexVector w = E.transpose().cast<Complex>() * dq;
    const ComplexVector lambda = fact.solve(w);

    // dK/dbeta_r = i k B, dK/dbeta_i = -k B; dJ/dtheta = -Re(lambda^T dK p).
    const double k = problem.wavenumber();
    const ComplexVector Bp = parts.boundary_mass.cast<Complex>() * p;
    const Complex t = (lambda.transpose() * Bp)(0, 0);
    return {loss, k * t.imag(), k * t.real()};
}

EstimationTrace estimate_admittance(const Mesh& mesh, const EstimationConfig& config,
                                    const MeasurementSet& meas) {
    if (config.iterations < 1)
        throw std::invalid_argument("estimate_admittance: iterations must be >= 1");

    EstimationTrace trace;
    Eigen::VectorXd params(2);
    params << config.initial_admittance.beta_r, config.initial_admittance.beta_i;
    AdamState adam = AdamState::zeros(2);
    DescentState descent{config.step_size};

    HelmholtzProblem problem = config.problem;
    for (int it = 0; it < config.iterations; ++it) {
        problem.admittance = {params[0], params[1]};
        BetaGradient g;
        try {
            g = loss_gradient_beta(mesh, problem, meas, config.weights);
        } catch (const std::exception&) {
            trace.failed = true;
            break;
        }
        trace.iterations.push_back({it, g.loss, params[0], params[1], g.d_beta_r, g.d_beta_i});

        Eigen::VectorXd grad(2);
        grad << g.d_beta_r, g.d_beta_i;
        params = config.optimizer == FirstOrderMethod::Adam
                     ? adam_step(params, grad, adam, config.step_size)
                     : descent_step(params, grad, descent);
    }
    trace.final_admittance = {params[0], params[1]};
    return trace;
}

} // namespace acoustics
