#pragma once

#include <filesystem>

#include "acoustics/inverse.hpp"
#include "acoustics/shapeopt.hpp"

namespace acoustics {

/// CSV `x,y,re_p,im_p,abs_p`, one row per vertex.
void write_field_csv(const PressureField& field, const Mesh& mesh,
                     const std::filesystem::path& path);

/// CSV `x,y,re_p,im_p`.
void write_measurements_csv(const MeasurementSet& meas, const std::filesystem::path& path);
MeasurementSet read_measurements_csv(const std::filesystem::path& path);

/// CSV `iter,loss,beta_r,beta_i,grad_r,grad_i`.
void write_estimation_trace_csv(const EstimationTrace& trace, const std::filesystem::path& path);

/// CSV `iter,energy,energy_normalized,mesh_loss,area,grad_norm,pde_solves`.
void write_shapeopt_trace_csv(const ShapeOptTrace& trace, const std::filesystem::path& path);

} // namespace acoustics
