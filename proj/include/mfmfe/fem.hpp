#pragma once

// Reference-free construction of the BDM1 and RT0 H(div) elements on
// physical triangles, piecewise-constant pressures, and the projection
// operators Q_h, Pi, Pi_0.
//
// A velocity DOF always carries the value of v.n_E with the *global* edge
// normal: BDM1 has one DOF per (edge, endpoint) pair, RT0 one per edge.
// Both incident elements evaluate the same functional, so normal-flux
// continuity holds by construction.

#include "mfmfe/mesh.hpp"
#include "mfmfe/quadrature.hpp"

#include <Eigen/Dense>

#include <array>
#include <memory>
#include <stdexcept>
#include <vector>

namespace mfmfe {

enum class SpaceKind { BDM1, RT0, P0 };

/// Affine vector polynomial v(x) = c + G (x - x0) on one element;
/// RT0 members have G = gamma * I.
struct LocalVectorPoly {
  Vec2 x0 = Vec2::Zero();
  Vec2 c = Vec2::Zero();
  Mat2 G = Mat2::Zero();

  Vec2 eval(const Vec2& x) const { return c + G * (x - x0); }
  double div() const { return G.trace(); }
};

namespace detail {

inline std::array<LocalVectorPoly, 6> build_bdm1_local_basis(const Mesh& mesh, int t) {
  const Vec2 x0 = mesh.centroid(t);
  Eigen::Matrix<double, 6, 6> M;
  for (int j = 0; j < 3; ++j) {
    const Edge& E = mesh.edge(mesh.element_edges(t)[j]);
    const Vec2 n = mesh.edge_normal(mesh.element_edges(t)[j]);
    const int vz[2] = {E.v0, E.v1};
    for (int k = 0; k < 2; ++k) {
      const Vec2 d = mesh.vertex(vz[k]) - x0;
      const int row = 2 * j + k;
      // unknowns [cx, cy, G00, G01, G10, G11]
      M(row, 0) = n.x();
      M(row, 1) = n.y();
      M(row, 2) = n.x() * d.x();
      M(row, 3) = n.x() * d.y();
      M(row, 4) = n.y() * d.x();
      M(row, 5) = n.y() * d.y();
    }
  }
  Eigen::Matrix<double, 6, 6> X = M.fullPivLu().inverse();
  std::array<LocalVectorPoly, 6> basis;
  for (int m = 0; m < 6; ++m) {
    LocalVectorPoly& p = basis[m];
    p.x0 = x0;
    p.c = Vec2(X(0, m), X(1, m));
    p.G << X(2, m), X(3, m), X(4, m), X(5, m);
  }
  return basis;
}

inline std::array<LocalVectorPoly, 3> build_rt0_local_basis(const Mesh& mesh, int t) {
  const auto& tr = mesh.tri(t);
  std::array<LocalVectorPoly, 3> basis;
  for (int j = 0; j < 3; ++j) {
    const int e = mesh.element_edges(t)[j];
    const Edge& E = mesh.edge(e);
    const Vec2 z_opp = mesh.vertex(tr[j]);  // local edge j is opposite vertex j
    // sign: +1 when the global normal is outward from this element
    const double s = (E.elem_plus == t) ? 1.0 : -1.0;
    const double factor = s * E.length / (2.0 * mesh.element_area(t));
    LocalVectorPoly& p = basis[j];
    p.x0 = z_opp;
    p.c = Vec2::Zero();
    p.G = factor * Mat2::Identity();
  }
  return basis;
}

}  // namespace detail

/// DOF layout, per-element local bases, and active-DOF bookkeeping for one
/// of the velocity spaces on a fixed mesh.
class VelocitySpace {
public:
  VelocitySpace(const Mesh& mesh, SpaceKind kind) : mesh_(&mesh), kind_(kind) {
    if (kind == SpaceKind::P0) throw std::invalid_argument("VelocitySpace: P0 is not a velocity space");
    const int ne = mesh.num_edges();
    const int nt = mesh.num_elements();
    if (kind == SpaceKind::BDM1) {
      ndof_ = 2 * ne;
      owner_vertex_.resize(ndof_);
      active_.assign(ndof_, true);
      for (int e = 0; e < ne; ++e) {
        owner_vertex_[2 * e] = mesh.edge(e).v0;
        owner_vertex_[2 * e + 1] = mesh.edge(e).v1;
        if (mesh.edge(e).tag == BoundaryTag::Neumann)
          active_[2 * e] = active_[2 * e + 1] = false;
      }
      bdm_basis_.resize(nt);
      loc2glob_.resize(nt);
      for (int t = 0; t < nt; ++t) {
        bdm_basis_[t] = detail::build_bdm1_local_basis(mesh, t);
        for (int j = 0; j < 3; ++j) {
          int e = mesh.element_edges(t)[j];
          loc2glob_[t][2 * j] = 2 * e;
          loc2glob_[t][2 * j + 1] = 2 * e + 1;
        }
      }
    } else {
      ndof_ = ne;
      owner_vertex_.assign(ndof_, -1);
      active_.assign(ndof_, true);
      for (int e = 0; e < ne; ++e)
        if (mesh.edge(e).tag == BoundaryTag::Neumann) active_[e] = false;
      rt_basis_.resize(nt);
      loc2glob_.resize(nt);
      for (int t = 0; t < nt; ++t) {
        rt_basis_[t] = detail::build_rt0_local_basis(mesh, t);
        for (int j = 0; j < 3; ++j) loc2glob_[t][j] = mesh.element_edges(t)[j];
      }
    }
  }

  const Mesh& mesh() const { return *mesh_; }
  SpaceKind kind() const { return kind_; }
  int ndof() const { return ndof_; }
  int dofs_per_element() const { return kind_ == SpaceKind::BDM1 ? 6 : 3; }
  int global_dof(int t, int local) const { return loc2glob_[t][local]; }
  bool active(int dof) const { return active_[dof]; }
  /// Owner vertex used for the vertex-block elimination (BDM1 only).
  int owner_vertex(int dof) const { return owner_vertex_[dof]; }

  const LocalVectorPoly& basis(int t, int local) const {
    return kind_ == SpaceKind::BDM1 ? bdm_basis_[t][local] : rt_basis_[t][local];
  }

private:
  const Mesh* mesh_;
  SpaceKind kind_;
  int ndof_ = 0;
  std::vector<std::array<int, 6>> loc2glob_;  // first 3 used for RT0
  std::vector<int> owner_vertex_;
  std::vector<bool> active_;
  std::vector<std::array<LocalVectorPoly, 6>> bdm_basis_;
  std::vector<std::array<LocalVectorPoly, 3>> rt_basis_;
};

class VelocityField {
public:
  VelocityField(std::shared_ptr<const VelocitySpace> space, Eigen::VectorXd coeffs)
      : space_(std::move(space)), coeffs_(std::move(coeffs)) {
    if (coeffs_.size() != space_->ndof())
      throw std::invalid_argument("VelocityField: coefficient size mismatch");
  }
  explicit VelocityField(std::shared_ptr<const VelocitySpace> space)
      : space_(std::move(space)), coeffs_(Eigen::VectorXd::Zero(space_->ndof())) {}

  const VelocitySpace& space() const { return *space_; }
  std::shared_ptr<const VelocitySpace> space_ptr() const { return space_; }
  const Eigen::VectorXd& coeffs() const { return coeffs_; }
  Eigen::VectorXd& coeffs() { return coeffs_; }

  /// Combined affine polynomial of the field restricted to one element.
  LocalVectorPoly local(int t) const {
    const int n = space_->dofs_per_element();
    LocalVectorPoly p;
    p.x0 = space_->mesh().centroid(t);
    for (int m = 0; m < n; ++m) {
      const double c = coeffs_[space_->global_dof(t, m)];
      if (c == 0.0) continue;
      const LocalVectorPoly& b = space_->basis(t, m);
      // re-center b at p.x0: b(x) = b.c + b.G (p.x0 - b.x0) + b.G (x - p.x0)
      p.c += c * (b.c + b.G * (p.x0 - b.x0));
      p.G += c * b.G;
    }
    return p;
  }

  Vec2 eval(int t, const Vec2& x) const { return local(t).eval(x); }
  double div(int t) const { return local(t).div(); }

private:
  std::shared_ptr<const VelocitySpace> space_;
  Eigen::VectorXd coeffs_;
};

using PressureField = Eigen::VectorXd;  // one constant per element

/// L^2 projection onto piecewise constants, per-element mean with the
/// degree-5 rule.
inline PressureField project_Q_h(const Mesh& mesh, const ScalarField& f) {
  PressureField p(mesh.num_elements());
  for (int t = 0; t < mesh.num_elements(); ++t)
    p[t] = integrate_element(mesh.geometry(t), triangle_gauss7(), f) / mesh.element_area(t);
  return p;
}

/// BDM1 interpolation: DOFs are v.n_E at both edge endpoints.
inline VelocityField interpolate_Pi(std::shared_ptr<const VelocitySpace> space,
                                    const VectorField& v) {
  if (space->kind() != SpaceKind::BDM1)
    throw std::invalid_argument("interpolate_Pi: BDM1 space required");
  const Mesh& mesh = space->mesh();
  Eigen::VectorXd c(space->ndof());
  for (int e = 0; e < mesh.num_edges(); ++e) {
    const Edge& E = mesh.edge(e);
    const Vec2 n = mesh.edge_normal(e);
    c[2 * e] = v(mesh.vertex(E.v0)).dot(n);
    c[2 * e + 1] = v(mesh.vertex(E.v1)).dot(n);
  }
  return VelocityField(std::move(space), std::move(c));
}

/// RT0 interpolation: DOF_e is the mean normal flux over e (3-pt Gauss).
inline VelocityField interpolate_Pi0(std::shared_ptr<const VelocitySpace> space,
                                     const VectorField& v) {
  if (space->kind() != SpaceKind::RT0)
    throw std::invalid_argument("interpolate_Pi0: RT0 space required");
  const Mesh& mesh = space->mesh();
  Eigen::VectorXd c(space->ndof());
  for (int e = 0; e < mesh.num_edges(); ++e) {
    const Edge& E = mesh.edge(e);
    const Vec2 a = mesh.vertex(E.v0), b = mesh.vertex(E.v1);
    const Vec2 n = mesh.edge_normal(e);
    c[e] = integrate_edge(a, b, edge_gauss(3),
                          [&](const Vec2& x) { return v(x).dot(n); }) /
           E.length;
  }
  return VelocityField(std::move(space), std::move(c));
}

/// Pi_0 applied to a discrete BDM1 field: the edge-mean of a linear trace
/// is the endpoint average.
inline VelocityField project_bdm1_to_rt0(std::shared_ptr<const VelocitySpace> rt0,
                                         const VelocityField& bdm) {
  if (bdm.space().kind() != SpaceKind::BDM1 || rt0->kind() != SpaceKind::RT0)
    throw std::invalid_argument("project_bdm1_to_rt0: wrong space kinds");
  const Mesh& mesh = rt0->mesh();
  Eigen::VectorXd c(mesh.num_edges());
  for (int e = 0; e < mesh.num_edges(); ++e)
    c[e] = 0.5 * (bdm.coeffs()[2 * e] + bdm.coeffs()[2 * e + 1]);
  return VelocityField(std::move(rt0), std::move(c));
}

/// Maximum mismatch of v.n_E between the two incident elements over shared
/// edges, sampled at 2-pt Gauss points. Zero (to roundoff) for any field
/// assembled from the shared DOFs.
inline double hdiv_conformity_defect(const VelocityField& u) {
  const Mesh& mesh = u.space().mesh();
  double worst = 0;
  for (int e = 0; e < mesh.num_edges(); ++e) {
    const Edge& E = mesh.edge(e);
    if (E.on_boundary()) continue;
    const Vec2 a = mesh.vertex(E.v0), b = mesh.vertex(E.v1);
    const Vec2 n = mesh.edge_normal(e);
    LocalVectorPoly up = u.local(E.elem_plus), um = u.local(E.elem_minus);
    for (const Vec2& q : edge_gauss(2).points) {
      Vec2 x = a + q.x() * (b - a);
      worst = std::max(worst, std::abs((up.eval(x) - um.eval(x)).dot(n)));
    }
  }
  return worst;
}

}  // namespace mfmfe
