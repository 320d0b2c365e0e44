#pragma once

#include <cstddef>
#include <filesystem>
#include <string>
#include <utility>
#include <vector>

namespace acoustics {

struct Point2 {
    double x = 0.0;
    double y = 0.0;
};

struct Triangle {
    int a = 0;
    int b = 0;
    int c = 0;
};

struct MeshCounts {
    int n_vertices = 0;
    int n_boundary = 0;
    int n_interior = 0;
    int n_triangles = 0;

    bool operator==(const MeshCounts&) const = default;
};

/// Planar triangulation with an explicit boundary loop. Immutable after
/// construction; deformations produce a new Mesh via with_vertices().
struct Mesh {
    std::vector<Point2> vertices;
    std::vector<Triangle> triangles;
    /// Counterclockwise along the boundary, starting at the min-(x,y) corner.
    std::vector<int> boundary_vertex_ids;
    /// Closed loop: boundary_edges[i] = (boundary_vertex_ids[i], next).
    std::vector<std::pair<int, int>> boundary_edges;
    std::vector<int> interior_vertex_ids;

    MeshCounts counts() const;

    /// New mesh with replaced coordinates, same connectivity.
    Mesh with_vertices(std::vector<Point2> new_vertices) const;
};

double triangle_signed_area(const Point2& a, const Point2& b, const Point2& c);

/// Sum of triangle signed areas; equals the shoelace area of the boundary
/// polygon for a consistent triangulation.
double signed_area(const Mesh& mesh);

/// Shoelace area of the boundary polygon (independent route for checking).
double boundary_polygon_area(const Mesh& mesh);

/// Checks all Mesh invariants (index ranges, positive orientation, single
/// closed boundary loop, vertex partition, Euler relation). Throws
/// std::runtime_error describing the first violation.
void validate_mesh(const Mesh& mesh);

/// Structured grid of (nx+1)*(ny+1) vertices on [0,width]x[0,height], split
/// into 2*nx*ny triangles with alternating diagonals per cell.
Mesh generate_rect_mesh(double width, double height, int nx, int ny);

/// True if segments (p1,p2) and (q1,q2) properly intersect or overlap;
/// a shared endpoint alone does not count.
bool segments_cross(const Point2& p1, const Point2& p2, const Point2& q1, const Point2& q2);

/// True if the boundary polygon is simple (no two non-adjacent edges cross).
bool boundary_is_simple(const Mesh& mesh);

/// Unique undirected edges (i < j), sorted lexicographically.
std::vector<std::pair<int, int>> unique_edges(const Mesh& mesh);

void write_mesh(const Mesh& mesh, const std::filesystem::path& path);
Mesh read_mesh(const std::filesystem::path& path);

/// OBJ export with z = 0, for third-party viewers.
void write_obj(const Mesh& mesh, const std::filesystem::path& path);

} // namespace acoustics
