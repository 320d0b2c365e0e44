#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "acoustics/helmholtz.hpp"
#include "acoustics/meshqual.hpp"

namespace acoustics {

struct RandGradConfig {
    int samples = 30;        // S
    double epsilon = 1e-3;   // m
    std::uint64_t seed = 0;
    int threads = 1;
};

struct ShapeOptConfig {
    HelmholtzProblem problem;
    double boundary_step = 0.1;   // eta_b
    double interior_step = 0.1;   // eta_i
    int m_inner = 20;
    int max_outer = 100;          // K
    double tolerance = 0.0;       // tau; stop when |J - J_prev| <= tau
    RandGradConfig rand_grad;
    MeshLossWeights mesh_weights;
    bool normalize_by_initial_energy = true;
    FirstOrderMethod optimizer = FirstOrderMethod::Adam;
    int snapshot_every = 0;       // 0 disables mesh snapshots
};

struct ShapeOptIteration {
    int iteration;
    double energy;             // raw acoustic energy
    double objective;          // normalized energy + area penalty
    double mesh_loss_total;
    double area;
    double boundary_grad_norm;
    long cumulative_pde_solves;
};

enum class StopReason { MaxIterations, Tolerance, Error };

struct ShapeOptTrace {
    std::vector<ShapeOptIteration> iterations;
    std::vector<std::pair<int, Mesh>> snapshots;
    Mesh final_mesh;
    double initial_energy = 0.0;
    double final_energy = 0.0;
    long total_pde_solves = 0;
    long redraw_solves = 0;          // extra solves from re-drawn failed samples
    long skipped_boundary_updates = 0;  // updates rejected as irrecoverable and skipped
    StopReason stop_reason = StopReason::MaxIterations;
    std::string error_message;
};

struct ObjectiveBreakdown {
    double objective;
    double energy;
    double area;
};

/// J = energy / normalization + w_A (area - reference_area)^2, with energy
/// from a fresh assemble + solve on the given mesh.
ObjectiveBreakdown boundary_objective(const Mesh& mesh, const HelmholtzProblem& problem,
                                      double reference_area, double w_A, double normalization);

struct RandGradResult {
    Eigen::MatrixX2d gradient;  // N_b x 2, rows in boundary_vertex_ids order
    double base_objective;
    long evaluations;  // objective evaluations consumed (S + 1 absent redraws)
    long redraws;
};

/// Randomized finite-difference gradient over the boundary vertices:
/// directions d_s ~ N(0, I), g_s = [J(V_b + eps d_s) - J0]/eps, estimate
/// (1/S) sum g_s d_s. Each sample's direction comes from a counter-based
/// seed, so the estimate is independent of evaluation order. A failing
/// perturbed evaluation is re-drawn at most 3 times.
RandGradResult randomized_boundary_gradient(const Mesh& mesh,
                                            const std::function<double(const Mesh&)>& objective,
                                            const RandGradConfig& config);

class BoundaryOptimizer;  // forward declaration for apply_boundary_update

/// Holds the per-boundary-coordinate optimizer state across outer iterations.
class BoundaryOptimizer {
public:
    BoundaryOptimizer(FirstOrderMethod method, double step_size, Eigen::Index n_coords);

    /// Proposed displacement of the boundary coordinates for this gradient;
    /// advances internal state.
    Eigen::VectorXd propose(const Eigen::VectorXd& grad);

    /// Drops accumulated moments. Used after a rejected update so stale
    /// momentum stops re-proposing the same invalid direction.
    void reset();

private:
    FirstOrderMethod method_;
    double step_size_;
    AdamState adam_;
};

/// Moves boundary vertices by `delta` (flattened x0,y0,x1,y1,...). If the
/// updated boundary self-intersects or any triangle drops below the area
/// margin, the displacement is halved, up to 5 times; an irrecoverable
/// update throws a structured error. The caller raises min_area_margin
/// above the hard degeneracy floor when later evaluations will perturb the
/// boundary again (finite-difference sampling).
Mesh apply_boundary_update(const Mesh& mesh, const Eigen::VectorXd& delta,
                           double min_area_margin = 0.0);

/// Two-stage hybrid loop: randomized boundary gradient step, then m_inner
/// interior mesh-quality steps; stops on max_outer or |J - J_prev| <= tol.
ShapeOptTrace optimize_shape(const Mesh& mesh, const ShapeOptConfig& config);

struct FdGradientResult {
    Eigen::MatrixX2d gradient;  // N x 2, all vertices
    long evaluations;
};

/// Central-difference gradient over every vertex coordinate (2 evaluations
/// each). Baseline for the solve-count comparison; small meshes only.
FdGradientResult fd_full_mesh_gradient(const Mesh& mesh,
                                       const std::function<double(const Mesh&)>& objective,
                                       double step);

} // namespace acoustics
