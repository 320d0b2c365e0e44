#include "acoustics/meshqual.hpp"

#include <cmath>
#include <limits>
#include <map>
#include <stdexcept>
#include <vector>

#include "acoustics/helmholtz.hpp"  // kMinTriangleArea

namespace acoustics {

namespace {

std::vector<std::vector<int>> vertex_neighbors(const Mesh& mesh) {
    std::vector<std::vector<int>> nbrs(mesh.vertices.size());
    for (const auto& [i, j] : unique_edges(mesh)) {
        nbrs[i].push_back(j);
        nbrs[j].push_back(i);
    }
    return nbrs;
}

Eigen::Vector2d to_vec(const Point2& p) { return {p.x, p.y}; }

double min_triangle_area(const Mesh& mesh) {
    double m = std::numeric_limits<double>::infinity();
    for (const auto& t : mesh.triangles)
        m = std::min(m, triangle_signed_area(mesh.vertices[t.a], mesh.vertices[t.b],
                                             mesh.vertices[t.c]));
    return m;
}

} // namespace

double edge_loss(const Mesh& mesh) {
    const auto edges = unique_edges(mesh);
    if (edges.empty()) return 0.0;
    std::vector<double> lengths;
    lengths.reserve(edges.size());
    double mean = 0.0;
    for (const auto& [i, j] : edges) {
        const double len = (to_vec(mesh.vertices[i]) - to_vec(mesh.vertices[j])).norm();
        lengths.push_back(len);
        mean += len;
    }
    mean /= static_cast<double>(edges.size());
    double loss = 0.0;
    for (double len : lengths) loss += (len - mean) * (len - mean);
    return loss / static_cast<double>(edges.size());
}

double laplacian_loss(const Mesh& mesh) {
    if (mesh.interior_vertex_ids.empty()) return 0.0;
    const auto nbrs = vertex_neighbors(mesh);
    double loss = 0.0;
    for (int i : mesh.interior_vertex_ids) {
        Eigen::Vector2d centroid = Eigen::Vector2d::Zero();
        for (int j : nbrs[i]) centroid += to_vec(mesh.vertices[j]);
        centroid /= static_cast<double>(nbrs[i].size());
        loss += (to_vec(mesh.vertices[i]) - centroid).squaredNorm();
    }
    return loss / static_cast<double>(mesh.interior_vertex_ids.size());
}

double normal_consistency_loss(const Mesh& mesh) {
    // Edge -> adjacent triangle orientation signs.
    std::map<std::pair<int, int>, std::vector<int>> edge_tris;
    std::vector<int> sign(mesh.triangles.size());
    for (std::size_t ti = 0; ti < mesh.triangles.size(); ++ti) {
        const auto& t = mesh.triangles[ti];
        const double area =
            triangle_signed_area(mesh.vertices[t.a], mesh.vertices[t.b], mesh.vertices[t.c]);
        sign[ti] = area >= 0.0 ? 1 : -1;
        auto add = [&](int i, int j) {
            edge_tris[{std::min(i, j), std::max(i, j)}].push_back(static_cast<int>(ti));
        };
        add(t.a, t.b);
        add(t.b, t.c);
        add(t.a, t.c);
    }
    double loss = 0.0;
    long pairs = 0;
    for (const auto& [edge, tris] : edge_tris) {
        if (tris.size() != 2) continue;
        loss += 1.0 - static_cast<double>(sign[tris[0]] * sign[tris[1]]);
        ++pairs;
    }
    return pairs == 0 ? 0.0 : loss / static_cast<double>(pairs);
}

double area_loss(const Mesh& mesh, double reference_area) {
    if (!(reference_area > 0.0))
        throw std::invalid_argument("area_loss: reference_area must be positive");
    const double d = signed_area(mesh) - reference_area;
    return d * d;
}

MeshLossReport mesh_loss(const Mesh& mesh, const MeshLossWeights& weights, double reference_area) {
    MeshLossReport r;
    r.edge = edge_loss(mesh);
    r.laplacian = laplacian_loss(mesh);
    r.normal = normal_consistency_loss(mesh);
    r.area = area_loss(mesh, reference_area);
    r.total = weights.w_e * r.edge + weights.w_l * r.laplacian + weights.w_n * r.normal +
              weights.w_A * r.area;
    return r;
}

Eigen::MatrixX2d mesh_loss_gradient_interior(const Mesh& mesh, const MeshLossWeights& weights,
                                             double reference_area) {
    (void)reference_area;
    const int n = static_cast<int>(mesh.vertices.size());
    Eigen::MatrixX2d full = Eigen::MatrixX2d::Zero(n, 2);

    // Edge term. With L = mean (l_e - lbar)^2, the lbar coupling cancels
    // because sum (l_e - lbar) = 0, so dL/dl_f = (2/E)(l_f - lbar).
    if (weights.w_e != 0.0) {
        const auto edges = unique_edges(mesh);
        if (!edges.empty()) {
            std::vector<double> lengths(edges.size());
            double mean = 0.0;
            for (std::size_t e = 0; e < edges.size(); ++e) {
                lengths[e] =
                    (to_vec(mesh.vertices[edges[e].first]) - to_vec(mesh.vertices[edges[e].second]))
                        .norm();
                mean += lengths[e];
            }
            mean /= static_cast<double>(edges.size());
            const double scale = 2.0 * weights.w_e / static_cast<double>(edges.size());
            for (std::size_t e = 0; e < edges.size(); ++e) {
                const auto [i, j] = edges[e];
                if (lengths[e] <= 0.0) continue;
                const Eigen::Vector2d dir =
                    (to_vec(mesh.vertices[j]) - to_vec(mesh.vertices[i])) / lengths[e];
                const Eigen::Vector2d g = scale * (lengths[e] - mean) * dir;
                full.row(j) += g.transpose();
                full.row(i) -= g.transpose();
            }
        }
    }

    // Laplacian term: residual r_i = v_i - centroid(N(i)) for interior i.
    if (weights.w_l != 0.0 && !mesh.interior_vertex_ids.empty()) {
        const auto nbrs = vertex_neighbors(mesh);
        std::vector<char> is_interior(n, 0);
        for (int i : mesh.interior_vertex_ids) is_interior[i] = 1;
        const double scale =
            2.0 * weights.w_l / static_cast<double>(mesh.interior_vertex_ids.size());
        for (int i : mesh.interior_vertex_ids) {
            Eigen::Vector2d centroid = Eigen::Vector2d::Zero();
            for (int j : nbrs[i]) centroid += to_vec(mesh.vertices[j]);
            const double deg = static_cast<double>(nbrs[i].size());
            centroid /= deg;
            const Eigen::Vector2d r = to_vec(mesh.vertices[i]) - centroid;
            full.row(i) += scale * r.transpose();
            for (int j : nbrs[i])
                if (is_interior[j]) full.row(j) -= (scale / deg) * r.transpose();
        }
    }

    // Normal term: planar unit normals are +/- z, locally constant, gradient 0.
    // Area term: interior motion telescopes out of the total signed area.

    Eigen::MatrixX2d grad(mesh.interior_vertex_ids.size(), 2);
    for (std::size_t r = 0; r < mesh.interior_vertex_ids.size(); ++r)
        grad.row(r) = full.row(mesh.interior_vertex_ids[r]);
    return grad;
}

InteriorOptimizeResult interior_optimize(const Mesh& mesh, const MeshLossWeights& weights,
                                         double reference_area, double step_size, int m_inner,
                                         InteriorMethod method, double min_area_floor) {
    if (m_inner < 1) throw std::invalid_argument("interior_optimize: m_inner must be >= 1");
    // Hysteresis: a mesh that enters below the requested floor may still take
    // steps that do not degrade its current worst triangle.
    const double area_guard =
        std::max(kMinTriangleArea, std::min(min_area_floor, min_triangle_area(mesh)));

    const auto& ids = mesh.interior_vertex_ids;
    const Eigen::Index dof = 2 * static_cast<Eigen::Index>(ids.size());

    auto pack = [&](const Mesh& m) {
        Eigen::VectorXd x(dof);
        for (std::size_t r = 0; r < ids.size(); ++r) {
            x[2 * r] = m.vertices[ids[r]].x;
            x[2 * r + 1] = m.vertices[ids[r]].y;
        }
        return x;
    };
    auto unpack = [&](const Mesh& base, const Eigen::VectorXd& x) {
        auto verts = base.vertices;
        for (std::size_t r = 0; r < ids.size(); ++r)
            verts[ids[r]] = {x[2 * r], x[2 * r + 1]};
        return base.with_vertices(std::move(verts));
    };

    InteriorOptimizeResult result{mesh, mesh_loss(mesh, weights, reference_area), false, 0};
    Eigen::VectorXd x = pack(mesh);
    AdamState adam = AdamState::zeros(dof);
    DescentState descent{step_size};

    for (int step = 0; step < m_inner; ++step) {
        const Eigen::MatrixX2d g2 = mesh_loss_gradient_interior(result.mesh, weights, reference_area);
        Eigen::VectorXd g(dof);
        for (std::size_t r = 0; r < ids.size(); ++r) {
            g[2 * r] = g2(r, 0);
            g[2 * r + 1] = g2(r, 1);
        }
        const Eigen::VectorXd x_next = method == InteriorMethod::Adam
                                           ? adam_step(x, g, adam, step_size)
                                           : descent_step(x, g, descent);
        // A step that collapses or inverts a triangle is rejected; retry a
        // geometrically shrunk version of it before giving up on the stage.
        const Eigen::VectorXd direction = x_next - x;
        bool accepted = false;
        double scale = 1.0;
        for (int halving = 0; halving <= 8; ++halving, scale *= 0.5) {
            Mesh candidate = unpack(result.mesh, x + scale * direction);
            if (min_triangle_area(candidate) >= area_guard) {
                x += scale * direction;
                result.mesh = std::move(candidate);
                accepted = true;
                break;
            }
        }
        if (!accepted) {
            result.degenerate = true;
            break;
        }
        result.steps_taken = step + 1;
    }
    result.report = mesh_loss(result.mesh, weights, reference_area);
    return result;
}

} // namespace acoustics
