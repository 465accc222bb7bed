#pragma once

// Legacy ASCII VTK output for triangular meshes, cell data (pressure,
// indicators, centroid velocity) and point data (nodal-averaged pressure).

#include "mfmfe/estimator.hpp"
#include "mfmfe/fem.hpp"
#include "mfmfe/mesh.hpp"

#include <ostream>
#include <string>
#include <vector>

namespace mfmfe {

namespace detail {

inline void write_vtk_header(std::ostream& os, const Mesh& mesh, const std::string& title) {
  os.precision(17);
  os << "# vtk DataFile Version 3.0\n" << title << "\nASCII\nDATASET UNSTRUCTURED_GRID\n";
  os << "POINTS " << mesh.num_vertices() << " double\n";
  for (int v = 0; v < mesh.num_vertices(); ++v)
    os << mesh.vertex(v).x() << ' ' << mesh.vertex(v).y() << " 0\n";
  os << "CELLS " << mesh.num_elements() << ' ' << 4 * mesh.num_elements() << '\n';
  for (int t = 0; t < mesh.num_elements(); ++t) {
    const auto& tr = mesh.tri(t);
    os << "3 " << tr[0] << ' ' << tr[1] << ' ' << tr[2] << '\n';
  }
  os << "CELL_TYPES " << mesh.num_elements() << '\n';
  for (int t = 0; t < mesh.num_elements(); ++t) os << "5\n";
}

}  // namespace detail

inline void write_mesh_vtk(std::ostream& os, const Mesh& mesh) {
  detail::write_vtk_header(os, mesh, "mesh");
  os << "CELL_DATA " << mesh.num_elements() << '\n';
  os << "SCALARS level int 1\nLOOKUP_TABLE default\n";
  for (int t = 0; t < mesh.num_elements(); ++t) os << mesh.refinement_level(t) << '\n';
}

/// Solution + indicator dump: pressure and eta^2 as CELL_DATA, velocity at
/// element centroids as CELL_DATA vectors, nodal-averaged pressure as
/// POINT_DATA.
inline void write_solution_vtk(std::ostream& os, const Mesh& mesh, const VelocityField& u,
                               const PressureField& p,
                               const EstimatorReport* rep = nullptr,
                               const std::vector<double>* nodal_p = nullptr) {
  detail::write_vtk_header(os, mesh, "solution");
  os << "CELL_DATA " << mesh.num_elements() << '\n';
  os << "SCALARS pressure double 1\nLOOKUP_TABLE default\n";
  for (int t = 0; t < mesh.num_elements(); ++t) os << p[t] << '\n';
  os << "VECTORS velocity double\n";
  for (int t = 0; t < mesh.num_elements(); ++t) {
    Vec2 v = u.eval(t, mesh.centroid(t));
    os << v.x() << ' ' << v.y() << " 0\n";
  }
  if (rep) {
    os << "SCALARS eta_sq double 1\nLOOKUP_TABLE default\n";
    for (int t = 0; t < mesh.num_elements(); ++t) os << rep->eta_sq[t] << '\n';
  }
  if (nodal_p) {
    os << "POINT_DATA " << mesh.num_vertices() << '\n';
    os << "SCALARS pressure_nodal double 1\nLOOKUP_TABLE default\n";
    for (int v = 0; v < mesh.num_vertices(); ++v) os << (*nodal_p)[v] << '\n';
  }
}

}  // namespace mfmfe
