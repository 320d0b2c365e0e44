#include "acoustics/helmholtz.hpp"

#include <array>
#include <cmath>
#include <stdexcept>
#include <string>

namespace acoustics {

namespace {

struct TriangleGeometry {
    double area;
    // Gradients of the three P1 basis functions (constant per triangle).
    std::array<Eigen::Vector2d, 3> grad;
};

TriangleGeometry triangle_geometry(const Mesh& mesh, const Triangle& t, std::size_t index) {
    const Point2& p0 = mesh.vertices[t.a];
    const Point2& p1 = mesh.vertices[t.b];
    const Point2& p2 = mesh.vertices[t.c];
    const double area = triangle_signed_area(p0, p1, p2);
    if (area < kMinTriangleArea)
        throw std::runtime_error("assemble: degenerate triangle " + std::to_string(index) +
                                 " (area " + std::to_string(area) + ")");
    const double inv = 1.0 / (2.0 * area);
    TriangleGeometry g;
    g.area = area;
    g.grad[0] = inv * Eigen::Vector2d(p1.y - p2.y, p2.x - p1.x);
    g.grad[1] = inv * Eigen::Vector2d(p2.y - p0.y, p0.x - p2.x);
    g.grad[2] = inv * Eigen::Vector2d(p0.y - p1.y, p1.x - p0.x);
    return g;
}

// Barycentric coordinates of the 3-point degree-2 rule.
constexpr std::array<std::array<double, 3>, 3> kQuadBary = {{
    {2.0 / 3.0, 1.0 / 6.0, 1.0 / 6.0},
    {1.0 / 6.0, 2.0 / 3.0, 1.0 / 6.0},
    {1.0 / 6.0, 1.0 / 6.0, 2.0 / 3.0},
}};

Point2 bary_point(const Mesh& mesh, const Triangle& t, const std::array<double, 3>& w) {
    const Point2& p0 = mesh.vertices[t.a];
    const Point2& p1 = mesh.vertices[t.b];
    const Point2& p2 = mesh.vertices[t.c];
    return {w[0] * p0.x + w[1] * p1.x + w[2] * p2.x,
            w[0] * p0.y + w[1] * p1.y + w[2] * p2.y};
}

} // namespace

double eval_source(const GaussianSource& source, const Point2& x) {
    const double dx = x.x - source.center.x;
    const double dy = x.y - source.center.y;
    return source.amplitude * std::exp(-(dx * dx + dy * dy) / (2.0 * source.sigma * source.sigma));
}

AssembledParts assemble_parts(const Mesh& mesh, const HelmholtzProblem& problem) {
    const int n = static_cast<int>(mesh.vertices.size());
    std::vector<Eigen::Triplet<double>> st, mt, bt;
    st.reserve(mesh.triangles.size() * 9);
    mt.reserve(mesh.triangles.size() * 9);

    Eigen::VectorXd load = Eigen::VectorXd::Zero(n);

    for (std::size_t ti = 0; ti < mesh.triangles.size(); ++ti) {
        const Triangle& t = mesh.triangles[ti];
        const auto g = triangle_geometry(mesh, t, ti);
        const std::array<int, 3> idx = {t.a, t.b, t.c};
        for (int i = 0; i < 3; ++i) {
            for (int j = 0; j < 3; ++j) {
                st.emplace_back(idx[i], idx[j], g.area * g.grad[i].dot(g.grad[j]));
                mt.emplace_back(idx[i], idx[j], g.area / 12.0 * (i == j ? 2.0 : 1.0));
            }
        }
        const double wq = g.area / 3.0;
        for (const auto& bary : kQuadBary) {
            const double f = eval_source(problem.source, bary_point(mesh, t, bary));
            for (int j = 0; j < 3; ++j) load[idx[j]] += wq * f * bary[j];
        }
    }

    for (const auto& [i, j] : mesh.boundary_edges) {
        const Point2& a = mesh.vertices[i];
        const Point2& b = mesh.vertices[j];
        const double len = std::hypot(b.x - a.x, b.y - a.y);
        bt.emplace_back(i, i, len / 3.0);
        bt.emplace_back(j, j, len / 3.0);
        bt.emplace_back(i, j, len / 6.0);
        bt.emplace_back(j, i, len / 6.0);
    }

    AssembledParts parts;
    parts.stiffness.resize(n, n);
    parts.stiffness.setFromTriplets(st.begin(), st.end());
    parts.mass.resize(n, n);
    parts.mass.setFromTriplets(mt.begin(), mt.end());
    parts.boundary_mass.resize(n, n);
    parts.boundary_mass.setFromTriplets(bt.begin(), bt.end());
    parts.load = std::move(load);
    return parts;
}

ComplexSystem compose_system(const AssembledParts& parts, const HelmholtzProblem& problem) {
    const double k = problem.wavenumber();
    const Complex ikb = Complex(0.0, k) * problem.admittance.value();

    ComplexSystem sys;
    sys.matrix = parts.stiffness.cast<Complex>() - (k * k) * parts.mass.cast<Complex>() +
                 ikb * parts.boundary_mass.cast<Complex>();
    sys.rhs = parts.load.cast<Complex>();
    return sys;
}

ComplexSystem assemble(const Mesh& mesh, const HelmholtzProblem& problem) {
    return compose_system(assemble_parts(mesh, problem), problem);
}

ComplexVector assemble_volume_load(const Mesh& mesh, const std::function<Complex(Point2)>& fn) {
    ComplexVector load = ComplexVector::Zero(mesh.vertices.size());
    for (std::size_t ti = 0; ti < mesh.triangles.size(); ++ti) {
        const Triangle& t = mesh.triangles[ti];
        const auto g = triangle_geometry(mesh, t, ti);
        const std::array<int, 3> idx = {t.a, t.b, t.c};
        const double wq = g.area / 3.0;
        for (const auto& bary : kQuadBary) {
            const Complex f = fn(bary_point(mesh, t, bary));
            for (int j = 0; j < 3; ++j) load[idx[j]] += wq * f * bary[j];
        }
    }
    return load;
}

ComplexVector assemble_boundary_load(const Mesh& mesh, const std::function<Complex(Point2)>& fn) {
    ComplexVector load = ComplexVector::Zero(mesh.vertices.size());
    const double s = 1.0 / std::sqrt(3.0);
    for (const auto& [i, j] : mesh.boundary_edges) {
        const Point2& a = mesh.vertices[i];
        const Point2& b = mesh.vertices[j];
        const double len = std::hypot(b.x - a.x, b.y - a.y);
        for (double xi : {-s, s}) {
            const double n1 = 0.5 * (1.0 - xi);
            const double n2 = 0.5 * (1.0 + xi);
            const Point2 x{n1 * a.x + n2 * b.x, n1 * a.y + n2 * b.y};
            const Complex g = fn(x);
            load[i] += 0.5 * len * g * n1;
            load[j] += 0.5 * len * g * n2;
        }
    }
    return load;
}

ComplexFactorization::ComplexFactorization(const SparseComplex& matrix) {
    lu_.compute(matrix);
    if (lu_.info() != Eigen::Success)
        throw std::runtime_error("solve: complex LU factorization failed (singular matrix?)");
    // Cheap condition probe: one back-substitution against a constant vector.
    ComplexVector ones = ComplexVector::Constant(matrix.rows(), Complex(1.0, 0.0));
    ComplexVector x = lu_.solve(ones);
    double mat_norm = 0.0;
    for (int c = 0; c < matrix.outerSize(); ++c) {
        double col = 0.0;
        for (SparseComplex::InnerIterator it(matrix, c); it; ++it) col += std::abs(it.value());
        mat_norm = std::max(mat_norm, col);
    }
    const double inv_norm = x.lpNorm<1>() / ones.lpNorm<1>();
    rcond_ = (mat_norm * inv_norm > 0.0) ? 1.0 / (mat_norm * inv_norm) : 0.0;
}

ComplexVector ComplexFactorization::solve(const ComplexVector& rhs) const {
    return lu_.solve(rhs);
}

PressureField solve(const ComplexSystem& system, const Mesh& mesh) {
    ComplexFactorization fact(system.matrix);
    PressureField field;
    field.nodal = fact.solve(system.rhs);
    field.mesh = &mesh;

    const double rhs_norm = system.rhs.norm();
    if (rhs_norm > 0.0) {
        const double rel = (system.matrix * field.nodal - system.rhs).norm() / rhs_norm;
        if (!(rel <= 1e-10))
            throw std::runtime_error("solve: relative residual " + std::to_string(rel) +
                                     " exceeds 1e-10 (rcond ~ " +
                                     std::to_string(fact.rcond_estimate()) + ")");
    }
    return field;
}

std::vector<QuadraturePoint> quadrature_points(const Mesh& mesh) {
    std::vector<QuadraturePoint> pts;
    pts.reserve(mesh.triangles.size() * 3);
    for (std::size_t ti = 0; ti < mesh.triangles.size(); ++ti) {
        const Triangle& t = mesh.triangles[ti];
        const double area =
            triangle_signed_area(mesh.vertices[t.a], mesh.vertices[t.b], mesh.vertices[t.c]);
        for (const auto& bary : kQuadBary)
            pts.push_back({bary_point(mesh, t, bary), area / 3.0, static_cast<int>(ti)});
    }
    return pts;
}

Complex eval_field(const PressureField& field, const Point2& x) {
    const Mesh& mesh = *field.mesh;
    for (const auto& t : mesh.triangles) {
        const Point2& p0 = mesh.vertices[t.a];
        const Point2& p1 = mesh.vertices[t.b];
        const Point2& p2 = mesh.vertices[t.c];
        const double area2 = 2.0 * triangle_signed_area(p0, p1, p2);
        const double l0 = ((p1.x - x.x) * (p2.y - x.y) - (p2.x - x.x) * (p1.y - x.y)) / area2;
        const double l1 = ((p2.x - x.x) * (p0.y - x.y) - (p0.x - x.x) * (p2.y - x.y)) / area2;
        const double l2 = 1.0 - l0 - l1;
        const double tol = -1e-12;
        if (l0 >= tol && l1 >= tol && l2 >= tol)
            return l0 * field.nodal[t.a] + l1 * field.nodal[t.b] + l2 * field.nodal[t.c];
    }
    throw std::runtime_error("eval_field: point (" + std::to_string(x.x) + ", " +
                             std::to_string(x.y) + ") is outside the mesh");
}

double acoustic_energy(const PressureField& field, const Mesh& mesh) {
    if (field.nodal.size() != static_cast<Eigen::Index>(mesh.vertices.size()))
        throw std::invalid_argument("acoustic_energy: field does not match mesh");
    double energy = 0.0;
    for (const auto& t : mesh.triangles) {
        const double area =
            triangle_signed_area(mesh.vertices[t.a], mesh.vertices[t.b], mesh.vertices[t.c]);
        const double wq = area / 3.0;
        for (const auto& bary : kQuadBary) {
            const Complex p = bary[0] * field.nodal[t.a] + bary[1] * field.nodal[t.b] +
                              bary[2] * field.nodal[t.c];
            energy += wq * std::norm(p);
        }
    }
    return energy;
}

} // namespace acoustics
