#include <doctest.h>

#include <cstdio>
#include <filesystem>
#include <fstream>

#include "acoustics/geometry.hpp"

using namespace acoustics;
namespace fs = std::filesystem;

namespace {

fs::path temp_file(const std::string& name) {
    return fs::temp_directory_path() / name;
}

} // namespace

TEST_CASE("single-cell square mesh counts") {
    const Mesh mesh = generate_rect_mesh(1.0, 1.0, 1, 1);
    CHECK(mesh.counts() == MeshCounts{4, 4, 0, 2});
}

TEST_CASE("counting formulas for larger grids") {
    const Mesh room = generate_rect_mesh(4.0, 4.0, 16, 16);
    CHECK(room.counts() == MeshCounts{289, 64, 225, 512});

    const Mesh strip = generate_rect_mesh(2.0, 2.0, 2, 1);
    CHECK(strip.counts() == MeshCounts{6, 6, 0, 4});
}

TEST_CASE("generator rejects bad input") {
    CHECK_THROWS_AS(generate_rect_mesh(0.0, 1.0, 2, 2), std::invalid_argument);
    CHECK_THROWS_AS(generate_rect_mesh(1.0, -1.0, 2, 2), std::invalid_argument);
    CHECK_THROWS_AS(generate_rect_mesh(1.0, 1.0, 0, 2), std::invalid_argument);
}

TEST_CASE("all generated triangles are counterclockwise") {
    for (auto [nx, ny] : {std::pair{1, 1}, {3, 2}, {16, 16}, {7, 13}}) {
        const Mesh mesh = generate_rect_mesh(2.0, 3.0, nx, ny);
        for (const auto& t : mesh.triangles)
            CHECK(triangle_signed_area(mesh.vertices[t.a], mesh.vertices[t.b],
                                       mesh.vertices[t.c]) > 0.0);
    }
}

TEST_CASE("signed area is exact for rectangles") {
    CHECK(signed_area(generate_rect_mesh(1.0, 1.0, 1, 1)) == doctest::Approx(1.0).epsilon(1e-14));
    CHECK(signed_area(generate_rect_mesh(1.0, 1.0, 5, 7)) == doctest::Approx(1.0).epsilon(1e-14));
    CHECK(signed_area(generate_rect_mesh(4.0, 4.0, 16, 16)) ==
          doctest::Approx(16.0).epsilon(1e-14));
}

TEST_CASE("signed area equals boundary shoelace after interior perturbation") {
    Mesh mesh = generate_rect_mesh(1.0, 1.0, 4, 4);
    auto verts = mesh.vertices;
    verts[mesh.interior_vertex_ids[0]].x += 0.03;
    verts[mesh.interior_vertex_ids[0]].y -= 0.02;
    mesh = mesh.with_vertices(verts);
    const double tri_sum = signed_area(mesh);
    const double shoelace = boundary_polygon_area(mesh);
    CHECK(std::abs(tri_sum - shoelace) <= 1e-12 * std::abs(shoelace));
}

TEST_CASE("boundary loop closes and starts at the origin corner") {
    const Mesh mesh = generate_rect_mesh(2.0, 2.0, 3, 3);
    CHECK(mesh.boundary_vertex_ids.front() == 0);
    CHECK(mesh.boundary_edges.back().second == mesh.boundary_edges.front().first);
    // Counterclockwise loop: positive shoelace area.
    CHECK(boundary_polygon_area(mesh) > 0.0);
}

TEST_CASE("mesh file round trip is exact") {
    for (auto [nx, ny] : {std::pair{1, 1}, {16, 16}}) {
        const Mesh mesh = generate_rect_mesh(2.0, 2.0, nx, ny);
        const auto path = temp_file("roundtrip_mesh.txt");
        write_mesh(mesh, path);
        const Mesh back = read_mesh(path);
        REQUIRE(back.counts() == mesh.counts());
        for (std::size_t i = 0; i < mesh.vertices.size(); ++i) {
            CHECK(back.vertices[i].x == mesh.vertices[i].x);
            CHECK(back.vertices[i].y == mesh.vertices[i].y);
        }
        for (std::size_t i = 0; i < mesh.triangles.size(); ++i) {
            CHECK(back.triangles[i].a == mesh.triangles[i].a);
            CHECK(back.triangles[i].b == mesh.triangles[i].b);
            CHECK(back.triangles[i].c == mesh.triangles[i].c);
        }
        CHECK(back.boundary_vertex_ids == mesh.boundary_vertex_ids);
        fs::remove(path);
    }
}

TEST_CASE("reader rejects out-of-range indices with a line number") {
    const auto path = temp_file("bad_mesh.txt");
    {
        std::ofstream out(path);
        out << "mesh2d 1\n"
            << "v 0 0\nv 1 0\nv 0 1\n"
            << "t 0 1 9\n"
            << "b 0 1 2\n";
    }
    CHECK_THROWS_WITH_AS(read_mesh(path), doctest::Contains(":5:"), std::runtime_error);
    fs::remove(path);
}

TEST_CASE("reader rejects garbage") {
    const auto path = temp_file("garbage_mesh.txt");
    {
        std::ofstream out(path);
        out << "not-a-mesh\n";
    }
    CHECK_THROWS_AS(read_mesh(path), std::runtime_error);
    fs::remove(path);
}

TEST_CASE("boundary simplicity detects a crossing") {
    Mesh mesh = generate_rect_mesh(1.0, 1.0, 2, 2);
    CHECK(boundary_is_simple(mesh));
    // Drag one boundary mid-edge vertex across the opposite side.
    auto verts = mesh.vertices;
    verts[mesh.boundary_vertex_ids[1]] = {0.5, 2.0};
    CHECK_FALSE(boundary_is_simple(mesh.with_vertices(verts)));
}

TEST_CASE("unique edge count satisfies the Euler relation") {
    const Mesh mesh = generate_rect_mesh(3.0, 2.0, 6, 4);
    const auto edges = unique_edges(mesh);
    const auto c = mesh.counts();
    CHECK(static_cast<long>(c.n_vertices) - static_cast<long>(edges.size()) + c.n_triangles + 1 ==
          2);
}

TEST_CASE("obj export lists every vertex and face") {
    const Mesh mesh = generate_rect_mesh(1.0, 1.0, 2, 2);
    const auto path = temp_file("mesh.obj");
    write_obj(mesh, path);
    std::ifstream in(path);
    int nv = 0, nf = 0;
    std::string line;
    while (std::getline(in, line)) {
        if (line.starts_with("v ")) ++nv;
        if (line.starts_with("f ")) ++nf;
    }
    CHECK(nv == mesh.counts().n_vertices);
    CHECK(nf == mesh.counts().n_triangles);
    fs::remove(path);
}
