#include "acoustics/io.hpp"

#include <cstdio>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include "acoustics/atomic_write.hpp"

namespace acoustics {

namespace {

std::string fmt(double v) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

} // namespace

void write_field_csv(const PressureField& field, const Mesh& mesh,
                     const std::filesystem::path& path) {
    std::ostringstream out;
    out << "x,y,re_p,im_p,abs_p\n";
    for (std::size_t i = 0; i < mesh.vertices.size(); ++i) {
        const Complex p = field.nodal[static_cast<Eigen::Index>(i)];
        out << fmt(mesh.vertices[i].x) << ',' << fmt(mesh.vertices[i].y) << ',' << fmt(p.real())
            << ',' << fmt(p.imag()) << ',' << fmt(std::abs(p)) << '\n';
    }
    atomic_write_text(path, out.str());
}

void write_measurements_csv(const MeasurementSet& meas, const std::filesystem::path& path) {
    std::ostringstream out;
    out << "x,y,re_p,im_p\n";
    for (std::size_t i = 0; i < meas.points.size(); ++i)
        out << fmt(meas.points[i].x) << ',' << fmt(meas.points[i].y) << ','
            << fmt(meas.values[i].real()) << ',' << fmt(meas.values[i].imag()) << '\n';
    atomic_write_text(path, out.str());
}

MeasurementSet read_measurements_csv(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open " + path.string());
    MeasurementSet meas;
    std::string line;
    int line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (line_no == 1) {
            if (line != "x,y,re_p,im_p")
                throw std::runtime_error(path.string() + ":1: expected header x,y,re_p,im_p");
            continue;
        }
        if (line.empty()) continue;
        std::istringstream ls(line);
        double x, y, re, im;
        char c1, c2, c3;
        if (!(ls >> x >> c1 >> y >> c2 >> re >> c3 >> im) || c1 != ',' || c2 != ',' || c3 != ',')
            throw std::runtime_error(path.string() + ":" + std::to_string(line_no) +
                                     ": malformed row");
        meas.points.push_back({x, y});
        meas.values.emplace_back(re, im);
    }
    return meas;
}

void write_estimation_trace_csv(const EstimationTrace& trace, const std::filesystem::path& path) {
    std::ostringstream out;
    out << "iter,loss,beta_r,beta_i,grad_r,grad_i\n";
    for (const auto& it : trace.iterations)
        out << it.iteration << ',' << fmt(it.loss) << ',' << fmt(it.beta_r) << ','
            << fmt(it.beta_i) << ',' << fmt(it.grad_r) << ',' << fmt(it.grad_i) << '\n';
    atomic_write_text(path, out.str());
}

void write_shapeopt_trace_csv(const ShapeOptTrace& trace, const std::filesystem::path& path) {
    std::ostringstream out;
    out << "iter,energy,energy_normalized,mesh_loss,area,grad_norm,pde_solves\n";
    const double norm = trace.initial_energy > 0.0 ? trace.initial_energy : 1.0;
    for (const auto& it : trace.iterations)
        out << it.iteration << ',' << fmt(it.energy) << ',' << fmt(it.energy / norm) << ','
            << fmt(it.mesh_loss_total) << ',' << fmt(it.area) << ',' << fmt(it.boundary_grad_norm)
            << ',' << it.cumulative_pde_solves << '\n';
    atomic_write_text(path, out.str());
}

} // namespace acoustics
