#include "acoustics/geometry.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <set>
#include <sstream>
#include <stdexcept>

#include "acoustics/atomic_write.hpp"

namespace acoustics {

MeshCounts Mesh::counts() const {
    return MeshCounts{static_cast<int>(vertices.size()),
                      static_cast<int>(boundary_vertex_ids.size()),
                      static_cast<int>(interior_vertex_ids.size()),
                      static_cast<int>(triangles.size())};
}

Mesh Mesh::with_vertices(std::vector<Point2> new_vertices) const {
    if (new_vertices.size() != vertices.size())
        throw std::invalid_argument("with_vertices: vertex count mismatch");
    Mesh out = *this;
    out.vertices = std::move(new_vertices);
    return out;
}

double triangle_signed_area(const Point2& a, const Point2& b, const Point2& c) {
    return 0.5 * ((b.x - a.x) * (c.y - a.y) - (c.x - a.x) * (b.y - a.y));
}

double signed_area(const Mesh& mesh) {
    double area = 0.0;
    for (const auto& t : mesh.triangles)
        area += triangle_signed_area(mesh.vertices[t.a], mesh.vertices[t.b], mesh.vertices[t.c]);
    return area;
}

double boundary_polygon_area(const Mesh& mesh) {
    double twice = 0.0;
    const auto& loop = mesh.boundary_vertex_ids;
    const auto n = loop.size();
    for (std::size_t i = 0; i < n; ++i) {
        const Point2& p = mesh.vertices[loop[i]];
        const Point2& q = mesh.vertices[loop[(i + 1) % n]];
        twice += p.x * q.y - q.x * p.y;
    }
    return 0.5 * twice;
}

void validate_mesh(const Mesh& mesh) {
    const int n = static_cast<int>(mesh.vertices.size());
    for (const auto& v : mesh.vertices)
        if (!std::isfinite(v.x) || !std::isfinite(v.y))
            throw std::runtime_error("mesh: non-finite vertex coordinate");
    for (std::size_t i = 0; i < mesh.triangles.size(); ++i) {
        const auto& t = mesh.triangles[i];
        if (t.a < 0 || t.a >= n || t.b < 0 || t.b >= n || t.c < 0 || t.c >= n)
            throw std::runtime_error("mesh: triangle " + std::to_string(i) + " has out-of-range vertex index");
        const double area =
            triangle_signed_area(mesh.vertices[t.a], mesh.vertices[t.b], mesh.vertices[t.c]);
        if (!(area > 0.0))
            throw std::runtime_error("mesh: triangle " + std::to_string(i) + " has non-positive signed area");
    }

    if (mesh.boundary_vertex_ids.size() < 3)
        throw std::runtime_error("mesh: boundary loop needs at least 3 vertices");
    if (mesh.boundary_edges.size() != mesh.boundary_vertex_ids.size())
        throw std::runtime_error("mesh: boundary edge count must equal boundary vertex count");
    const auto m = mesh.boundary_vertex_ids.size();
    for (std::size_t i = 0; i < m; ++i) {
        const auto& e = mesh.boundary_edges[i];
        if (e.first != mesh.boundary_vertex_ids[i] ||
            e.second != mesh.boundary_vertex_ids[(i + 1) % m])
            throw std::runtime_error("mesh: boundary edges do not form the boundary loop in order");
    }

    std::set<int> boundary_set(mesh.boundary_vertex_ids.begin(), mesh.boundary_vertex_ids.end());
    if (boundary_set.size() != mesh.boundary_vertex_ids.size())
        throw std::runtime_error("mesh: boundary loop visits a vertex twice");
    std::set<int> interior_set(mesh.interior_vertex_ids.begin(), mesh.interior_vertex_ids.end());
    if (interior_set.size() != mesh.interior_vertex_ids.size())
        throw std::runtime_error("mesh: duplicate interior vertex id");
    if (boundary_set.size() + interior_set.size() != static_cast<std::size_t>(n))
        throw std::runtime_error("mesh: boundary/interior partition does not cover all vertices");
    for (int id : mesh.interior_vertex_ids)
        if (boundary_set.count(id))
            throw std::runtime_error("mesh: vertex " + std::to_string(id) + " is both boundary and interior");

    // Euler relation V - E + F = 2, counting the outer face.
    const auto edges = unique_edges(mesh);
    const long long euler = static_cast<long long>(n) - static_cast<long long>(edges.size()) +
                            static_cast<long long>(mesh.triangles.size()) + 1;
    if (euler != 2)
        throw std::runtime_error("mesh: Euler relation violated (V - E + F = " + std::to_string(euler) + ")");
}

Mesh generate_rect_mesh(double width, double height, int nx, int ny) {
    if (!(width > 0.0) || !(height > 0.0))
        throw std::invalid_argument("generate_rect_mesh: dimensions must be positive");
    if (nx < 1 || ny < 1)
        throw std::invalid_argument("generate_rect_mesh: divisions must be at least 1");

    Mesh mesh;
    mesh.vertices.reserve(static_cast<std::size_t>(nx + 1) * (ny + 1));
    for (int iy = 0; iy <= ny; ++iy)
        for (int ix = 0; ix <= nx; ++ix)
            mesh.vertices.push_back({width * ix / nx, height * iy / ny});

    auto vid = [nx](int ix, int iy) { return iy * (nx + 1) + ix; };

    mesh.triangles.reserve(static_cast<std::size_t>(2) * nx * ny);
    for (int iy = 0; iy < ny; ++iy) {
        for (int ix = 0; ix < nx; ++ix) {
            const int a = vid(ix, iy);
            const int b = vid(ix + 1, iy);
            const int c = vid(ix + 1, iy + 1);
            const int d = vid(ix, iy + 1);
            if ((ix + iy) % 2 == 0) {
                mesh.triangles.push_back({a, b, c});
                mesh.triangles.push_back({a, c, d});
            } else {
                mesh.triangles.push_back({a, b, d});
                mesh.triangles.push_back({b, c, d});
            }
        }
    }

    // Counterclockwise boundary loop starting at the (0,0) corner.
    for (int ix = 0; ix < nx; ++ix) mesh.boundary_vertex_ids.push_back(vid(ix, 0));
    for (int iy = 0; iy < ny; ++iy) mesh.boundary_vertex_ids.push_back(vid(nx, iy));
    for (int ix = nx; ix > 0; --ix) mesh.boundary_vertex_ids.push_back(vid(ix, ny));
    for (int iy = ny; iy > 0; --iy) mesh.boundary_vertex_ids.push_back(vid(0, iy));

    const auto m = mesh.boundary_vertex_ids.size();
    for (std::size_t i = 0; i < m; ++i)
        mesh.boundary_edges.emplace_back(mesh.boundary_vertex_ids[i],
                                         mesh.boundary_vertex_ids[(i + 1) % m]);

    std::set<int> boundary_set(mesh.boundary_vertex_ids.begin(), mesh.boundary_vertex_ids.end());
    for (int i = 0; i < static_cast<int>(mesh.vertices.size()); ++i)
        if (!boundary_set.count(i)) mesh.interior_vertex_ids.push_back(i);

    validate_mesh(mesh);
    return mesh;
}

// Proper segment intersection test, excluding shared endpoints.
bool segments_cross(const Point2& p1, const Point2& p2, const Point2& q1, const Point2& q2) {
    auto orient = [](const Point2& a, const Point2& b, const Point2& c) {
        const double v = (b.x - a.x) * (c.y - a.y) - (b.y - a.y) * (c.x - a.x);
        if (v > 0) return 1;
        if (v < 0) return -1;
        return 0;
    };
    const int o1 = orient(p1, p2, q1);
    const int o2 = orient(p1, p2, q2);
    const int o3 = orient(q1, q2, p1);
    const int o4 = orient(q1, q2, p2);
    if (o1 != o2 && o3 != o4 && o1 != 0 && o2 != 0 && o3 != 0 && o4 != 0) return true;

    auto on_segment = [](const Point2& a, const Point2& b, const Point2& c) {
        return std::min(a.x, b.x) <= c.x && c.x <= std::max(a.x, b.x) &&
               std::min(a.y, b.y) <= c.y && c.y <= std::max(a.y, b.y);
    };
    // Collinear overlap counts as a crossing.
    if (o1 == 0 && on_segment(p1, p2, q1)) return true;
    if (o2 == 0 && on_segment(p1, p2, q2)) return true;
    if (o3 == 0 && on_segment(q1, q2, p1)) return true;
    if (o4 == 0 && on_segment(q1, q2, p2)) return true;
    return false;
}

bool boundary_is_simple(const Mesh& mesh) {
    const auto& loop = mesh.boundary_vertex_ids;
    const auto n = loop.size();
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = i + 1; j < n; ++j) {
            // Skip adjacent edges (they share an endpoint).
            if (j == i + 1 || (i == 0 && j == n - 1)) continue;
            if (segments_cross(mesh.vertices[loop[i]], mesh.vertices[loop[(i + 1) % n]],
                               mesh.vertices[loop[j]], mesh.vertices[loop[(j + 1) % n]]))
                return false;
        }
    }
    return true;
}

std::vector<std::pair<int, int>> unique_edges(const Mesh& mesh) {
    std::set<std::pair<int, int>> edges;
    for (const auto& t : mesh.triangles) {
        edges.emplace(std::min(t.a, t.b), std::max(t.a, t.b));
        edges.emplace(std::min(t.b, t.c), std::max(t.b, t.c));
        edges.emplace(std::min(t.a, t.c), std::max(t.a, t.c));
    }
    return {edges.begin(), edges.end()};
}

void write_mesh(const Mesh& mesh, const std::filesystem::path& path) {
    std::ostringstream out;
    out << "mesh2d 1\n";
    char buf[64];
    for (const auto& v : mesh.vertices) {
        std::snprintf(buf, sizeof(buf), "v %.17g %.17g\n", v.x, v.y);
        out << buf;
    }
    for (const auto& t : mesh.triangles)
        out << "t " << t.a << ' ' << t.b << ' ' << t.c << '\n';
    out << 'b';
    for (int id : mesh.boundary_vertex_ids) out << ' ' << id;
    out << '\n';
    atomic_write_text(path, out.str());
}

Mesh read_mesh(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("read_mesh: cannot open " + path.string());

    auto fail = [&](int line_no, const std::string& what) -> void {
        throw std::runtime_error("read_mesh: " + path.string() + ":" + std::to_string(line_no) +
                                 ": " + what);
    };

    Mesh mesh;
    std::string line;
    int line_no = 0;
    bool have_header = false;
    bool have_boundary = false;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty() || line[0] == '#') continue;
        std::istringstream ls(line);
        if (!have_header) {
            std::string magic;
            int version = 0;
            if (!(ls >> magic >> version) || magic != "mesh2d" || version != 1)
                fail(line_no, "expected header 'mesh2d 1'");
            have_header = true;
            continue;
        }
        std::string tag;
        ls >> tag;
        if (tag == "v") {
            Point2 p;
            if (!(ls >> p.x >> p.y)) fail(line_no, "malformed vertex line");
            mesh.vertices.push_back(p);
        } else if (tag == "t") {
            Triangle t;
            if (!(ls >> t.a >> t.b >> t.c)) fail(line_no, "malformed triangle line");
            const int n = static_cast<int>(mesh.vertices.size());
            if (t.a < 0 || t.a >= n || t.b < 0 || t.b >= n || t.c < 0 || t.c >= n)
                fail(line_no, "triangle vertex index out of range");
            mesh.triangles.push_back(t);
        } else if (tag == "b") {
            if (have_boundary) fail(line_no, "duplicate boundary line");
            int id;
            while (ls >> id) mesh.boundary_vertex_ids.push_back(id);
            if (mesh.boundary_vertex_ids.empty()) fail(line_no, "empty boundary line");
            have_boundary = true;
        } else {
            fail(line_no, "unknown record '" + tag + "'");
        }
    }
    if (!have_header) throw std::runtime_error("read_mesh: " + path.string() + ": empty file");
    if (!have_boundary) throw std::runtime_error("read_mesh: " + path.string() + ": missing boundary line");

    const int n = static_cast<int>(mesh.vertices.size());
    for (int id : mesh.boundary_vertex_ids)
        if (id < 0 || id >= n)
            throw std::runtime_error("read_mesh: " + path.string() + ": boundary index out of range");

    const auto m = mesh.boundary_vertex_ids.size();
    for (std::size_t i = 0; i < m; ++i)
        mesh.boundary_edges.emplace_back(mesh.boundary_vertex_ids[i],
                                         mesh.boundary_vertex_ids[(i + 1) % m]);
    std::set<int> boundary_set(mesh.boundary_vertex_ids.begin(), mesh.boundary_vertex_ids.end());
    for (int i = 0; i < n; ++i)
        if (!boundary_set.count(i)) mesh.interior_vertex_ids.push_back(i);

    validate_mesh(mesh);
    return mesh;
}

void write_obj(const Mesh& mesh, const std::filesystem::path& path) {
    std::ostringstream out;
    char buf[80];
    for (const auto& v : mesh.vertices) {
        std::snprintf(buf, sizeof(buf), "v %.17g %.17g 0\n", v.x, v.y);
        out << buf;
    }
    for (const auto& t : mesh.triangles)
        out << "f " << t.a + 1 << ' ' << t.b + 1 << ' ' << t.c + 1 << '\n';
    atomic_write_text(path, out.str());
}

} // namespace acoustics
