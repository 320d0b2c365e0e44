#pragma once

#include <complex>
#include <functional>
#include <memory>
#include <numbers>
#include <vector>

#include <Eigen/Sparse>
#include <Eigen/SparseLU>

#include "acoustics/geometry.hpp"

namespace acoustics {

using Complex = std::complex<double>;
using SparseComplex = Eigen::SparseMatrix<Complex>;
using SparseReal = Eigen::SparseMatrix<double>;
using ComplexVector = Eigen::VectorXcd;

/// Triangles flatter than this are treated as degenerate by assembly.
inline constexpr double kMinTriangleArea = 1e-9;

struct Admittance {
    double beta_r = 0.0;
    double beta_i = 0.0;

    Complex value() const { return {beta_r, beta_i}; }
};

struct GaussianSource {
    Point2 center;
    double sigma = 0.1;    // m
    double amplitude = 1.0;
};

struct HelmholtzProblem {
    double frequency = 1000.0;   // Hz
    double sound_speed = 343.0;  // m/s
    GaussianSource source;
    Admittance admittance;

    double wavenumber() const { return 2.0 * std::numbers::pi * frequency / sound_speed; }
};

/// K(beta) = S - k^2 M + i k beta B, with the three real FEM matrices kept
/// separate so the boundary block stays linear in beta.
struct AssembledParts {
    SparseReal stiffness;      // integral grad(phi_i) . grad(phi_j)
    SparseReal mass;           // integral phi_i phi_j over triangles
    SparseReal boundary_mass;  // integral phi_i phi_j over boundary edges
    Eigen::VectorXd load;      // integral f(x) phi_j
};

struct ComplexSystem {
    SparseComplex matrix;
    ComplexVector rhs;
};

struct PressureField {
    ComplexVector nodal;
    const Mesh* mesh = nullptr;
};

struct QuadraturePoint {
    Point2 position;
    double weight;
    int triangle = 0;
};

double eval_source(const GaussianSource& source, const Point2& x);

AssembledParts assemble_parts(const Mesh& mesh, const HelmholtzProblem& problem);

ComplexSystem compose_system(const AssembledParts& parts, const HelmholtzProblem& problem);

ComplexSystem assemble(const Mesh& mesh, const HelmholtzProblem& problem);

/// Volume load vector for an arbitrary (complex-valued) source density,
/// integrated with the 3-point rule. Used for manufactured solutions.
ComplexVector assemble_volume_load(const Mesh& mesh, const std::function<Complex(Point2)>& fn);

/// Boundary load vector: integral of g(x) phi_j over the boundary loop,
/// 2-point Gauss per edge.
ComplexVector assemble_boundary_load(const Mesh& mesh, const std::function<Complex(Point2)>& fn);

/// Immutable sparse complex LU factorization; back-substitutions are const
/// and safe to run concurrently.
class ComplexFactorization {
public:
    explicit ComplexFactorization(const SparseComplex& matrix);

    ComplexVector solve(const ComplexVector& rhs) const;

    /// Rough reciprocal-condition estimate from the U diagonal.
    double rcond_estimate() const { return rcond_; }

private:
    Eigen::SparseLU<SparseComplex> lu_;
    double rcond_ = 0.0;
};

PressureField solve(const ComplexSystem& system, const Mesh& mesh);

/// 3-point degree-2 rule: barycentric (2/3,1/6,1/6) permutations, weight
/// area/3 each.
std::vector<QuadraturePoint> quadrature_points(const Mesh& mesh);

Complex eval_field(const PressureField& field, const Point2& x);

/// integral |p|^2 over the mesh via the 3-point rule (exact for P1 fields).
double acoustic_energy(const PressureField& field, const Mesh& mesh);

} // namespace acoustics
