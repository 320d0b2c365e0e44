#pragma once

#include <Eigen/Dense>

#include "acoustics/geometry.hpp"
#include "acoustics/optimizers.hpp"

namespace acoustics {

struct MeshLossWeights {
    double w_e = 1.0;
    double w_l = 1.0;
    double w_n = 1.0;
    double w_A = 100.0;
};

struct MeshLossReport {
    double edge = 0.0;
    double laplacian = 0.0;
    double normal = 0.0;
    double area = 0.0;
    double total = 0.0;
};

/// Mean over unique edges of (len - mean_len)^2.
double edge_loss(const Mesh& mesh);

/// Mean over interior vertices of |v - centroid(1-ring)|^2 (uniform graph
/// Laplacian). Zero interior vertices gives 0.
double laplacian_loss(const Mesh& mesh);

/// Mean over edge-adjacent triangle pairs of (1 - n_i . n_j) with n the unit
/// out-of-plane normal carrying the orientation sign. Zero for a consistently
/// oriented planar mesh; 2 per pair with one flipped triangle.
double normal_consistency_loss(const Mesh& mesh);

/// (signed_area(mesh) - reference_area)^2
double area_loss(const Mesh& mesh, double reference_area);

MeshLossReport mesh_loss(const Mesh& mesh, const MeshLossWeights& weights, double reference_area);

/// Closed-form gradient of the weighted mesh loss with respect to interior
/// vertex coordinates (N_i x 2, rows in interior_vertex_ids order). The
/// normal and area terms contribute exactly zero away from flips: planar
/// normals are locally constant, and interior motion cancels in the total
/// signed area.
Eigen::MatrixX2d mesh_loss_gradient_interior(const Mesh& mesh, const MeshLossWeights& weights,
                                             double reference_area);

enum class InteriorMethod { GradientDescent, Adam };

struct InteriorOptimizeResult {
    Mesh mesh;
    MeshLossReport report;
    bool degenerate = false;  // stopped early on a near-collapsed triangle
    int steps_taken = 0;
};

/// Runs m_inner first-order steps on the interior vertices; boundary
/// coordinates are bit-identical on return. Steps that would push any
/// triangle below the area guard are retried at geometrically smaller
/// scales, then stop the loop at the last valid mesh with the degenerate
/// flag set. Callers that will keep perturbing the result
/// (finite-difference sampling) raise the guard above the hard degeneracy
/// threshold via min_area_floor.
InteriorOptimizeResult interior_optimize(const Mesh& mesh, const MeshLossWeights& weights,
                                         double reference_area, double step_size, int m_inner,
                                         InteriorMethod method, double min_area_floor = 0.0);

} // namespace acoustics
