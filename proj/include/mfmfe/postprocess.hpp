#pragma once

// Verification constructions: the auxiliary RT0 problem with element-mean
// coefficient, the postprocessed quadratic pressure l_h, and the
// nodal-averaged P1 pressure used for visualization.

#include "mfmfe/fem.hpp"
#include "mfmfe/problem.hpp"
#include "mfmfe/solver.hpp"

#include <cmath>
#include <memory>
#include <stdexcept>
#include <vector>

namespace mfmfe {

/// Per-element mean of K^{-1} (degree-5 rule, exact for the piecewise
/// polynomial coefficients used here).
inline std::vector<Mat2> mean_coefficient(const Mesh& mesh, const TensorField& K_inv) {
  std::vector<Mat2> kbar(mesh.num_elements());
  for (int t = 0; t < mesh.num_elements(); ++t) {
    const ElementGeometry& g = mesh.geometry(t);
    Mat2 m = Mat2::Zero();
    const QuadRule& rule = triangle_gauss7();
    for (std::size_t i = 0; i < rule.points.size(); ++i)
      m += rule.weights[i] * K_inv(g.map(rule.points[i]));
    kbar[t] = (g.J / g.area) * m;  // divide the integral by |T|
  }
  return kbar;
}

struct AuxiliarySolution {
  VelocityField u;   // RT0
  PressureField p;
  std::vector<Mat2> kbar_inv;  // element-mean K^{-1}
  SolverDiagnostics diag;
};

/// RT0/P0 mixed solve of the problem with the element-mean coefficient and
/// exactly-integrated bilinear form.
inline AuxiliarySolution solve_auxiliary_rt0(const Mesh& mesh, const Problem& problem) {
  auto space = std::make_shared<VelocitySpace>(mesh, SpaceKind::RT0);
  std::vector<Mat2> kbar = mean_coefficient(mesh, problem.K_inv);

  std::vector<int> reduced(space->ndof(), -1);
  std::vector<int> active;
  for (int d = 0; d < space->ndof(); ++d)
    if (space->active(d)) {
      reduced[d] = static_cast<int>(active.size());
      active.push_back(d);
    }
  const int nu = static_cast<int>(active.size());
  const int nt = mesh.num_elements();

  std::vector<Eigen::Triplet<double>> at, bt;
  Eigen::VectorXd G = Eigen::VectorXd::Zero(nu), F = Eigen::VectorXd::Zero(nt);

  for (int t = 0; t < nt; ++t) {
    const ElementGeometry& g = mesh.geometry(t);
    const Mat2& Ki = kbar[t];
    for (int m = 0; m < 3; ++m) {
      const int gm = reduced[space->global_dof(t, m)];
      if (gm < 0) continue;
      const LocalVectorPoly& bm = space->basis(t, m);
      for (int n = 0; n < 3; ++n) {
        const int gn = reduced[space->global_dof(t, n)];
        if (gn < 0) continue;
        const LocalVectorPoly& bn = space->basis(t, n);
        double a = integrate_element(g, triangle_gauss7(), [&](const Vec2& x) {
          return bn.eval(x).dot(Ki * bm.eval(x));
        });
        at.emplace_back(gm, gn, a);
      }
      bt.emplace_back(t, gm, -bm.div() * g.area);
    }
    F[t] = -integrate_element(g, triangle_gauss7(), problem.f);
  }
  // boundary term: the RT0 DOF of a Dirichlet edge has v.n = 1 on that edge
  for (int e = 0; e < mesh.num_edges(); ++e) {
    const Edge& E = mesh.edge(e);
    if (!E.on_boundary() || *E.tag != BoundaryTag::Dirichlet) continue;
    const int gd = reduced[e];
    if (gd < 0) continue;
    G[gd] -= integrate_edge(mesh.vertex(E.v0), mesh.vertex(E.v1), edge_gauss(3), problem.g);
  }

  SparseMat A(nu, nu), B(nt, nu);
  A.setFromTriplets(at.begin(), at.end());
  B.setFromTriplets(bt.begin(), bt.end());
  auto [U, P] = detail::solve_saddle_direct(A, B, G, F);

  SolverDiagnostics diag;
  diag.method = "rt0-auxiliary-sparselu";
  double rnorm = std::sqrt((A * U + B.transpose() * P - G).squaredNorm() +
                           (-B * U - F).squaredNorm());
  diag.saddle_residual = rnorm / std::max(std::sqrt(G.squaredNorm() + F.squaredNorm()), 1e-300);

  Eigen::VectorXd full = Eigen::VectorXd::Zero(space->ndof());
  for (std::size_t r = 0; r < active.size(); ++r) full[active[r]] = U[r];
  VelocityField u(space, std::move(full));
  diag.div_identity_defect = div_identity_relative_defect(B, U, F);
  return {std::move(u), std::move(P), std::move(kbar), std::move(diag)};
}

/// Per-element quadratic with grad l_h = -Kbar^{-1} u_tilde and element mean
/// p_tilde, stored in centroid-centered coordinates.
struct PostprocessedPressure {
  struct ElementPoly {
    Vec2 x0;
    double d = 0;
    Vec2 lin = Vec2::Zero();
    Mat2 M = Mat2::Zero();

    double eval(const Vec2& x) const {
      Vec2 y = x - x0;
      return d + lin.dot(y) + 0.5 * y.dot(M * y);
    }
    Vec2 grad(const Vec2& x) const { return lin + M * (x - x0); }
  };
  std::vector<ElementPoly> elems;

  double eval(int t, const Vec2& x) const { return elems[t].eval(x); }
};

inline PostprocessedPressure build_l_h(const Mesh& mesh, const AuxiliarySolution& aux) {
  PostprocessedPressure out;
  out.elems.resize(mesh.num_elements());
  for (int t = 0; t < mesh.num_elements(); ++t) {
    const ElementGeometry& g = mesh.geometry(t);
    const Mat2& Ki = aux.kbar_inv[t];
    LocalVectorPoly ut = aux.u.local(t);  // RT0: gradient is gamma*I
    const double gamma = 0.5 * ut.G.trace();

    auto& poly = out.elems[t];
    poly.x0 = mesh.centroid(t);
    poly.lin = -(Ki * ut.eval(poly.x0));
    poly.M = -gamma * Ki;
    double asym = std::abs(poly.M(0, 1) - poly.M(1, 0));
    if (asym > 1e-12 * (1.0 + poly.M.norm()))
      throw std::runtime_error("build_l_h: asymmetric Hessian, broken RT0 representation");
    poly.M = 0.5 * (poly.M + poly.M.transpose());

    // mean condition: the linear term averages to zero about the centroid
    poly.d = 0;
    double mean_quad =
        integrate_element(g, triangle_gauss7(), [&](const Vec2& x) { return poly.eval(x); }) /
        g.area;
    poly.d = aux.p[t] - mean_quad;
  }
  return out;
}

struct TraceAudit {
  double worst_interior = 0;   // max_E |int_E (l+ - l-)| / (h_E * scale)
  double worst_dirichlet = 0;  // max_E |int_E (l - g)| / (h_E * scale)
};

inline TraceAudit audit_l_h(const Mesh& mesh, const PostprocessedPressure& lh,
                            const Problem& problem, const PressureField& p_tilde) {
  double scale = 1.0;
  for (int t = 0; t < mesh.num_elements(); ++t) scale = std::max(scale, std::abs(p_tilde[t]));
  TraceAudit audit;
  const QuadRule& rule = edge_gauss(3);
  for (int e = 0; e < mesh.num_edges(); ++e) {
    const Edge& E = mesh.edge(e);
    const Vec2 a = mesh.vertex(E.v0), b = mesh.vertex(E.v1);
    if (E.on_boundary()) {
      if (*E.tag != BoundaryTag::Dirichlet) continue;
      double mis = integrate_edge(a, b, rule, [&](const Vec2& x) {
        return lh.eval(E.elem_plus, x) - problem.g(x);
      });
      audit.worst_dirichlet =
          std::max(audit.worst_dirichlet, std::abs(mis) / (E.length * scale));
    } else {
      double jump = integrate_edge(a, b, rule, [&](const Vec2& x) {
        return lh.eval(E.elem_plus, x) - lh.eval(E.elem_minus, x);
      });
      audit.worst_interior =
          std::max(audit.worst_interior, std::abs(jump) / (E.length * scale));
    }
  }
  return audit;
}

/// Vertexwise unweighted mean of the incident-element pressures; a
/// continuous P1 field for POINT_DATA visualization.
inline std::vector<double> nodal_average_pressure(const Mesh& mesh, const PressureField& p) {
  std::vector<double> sum(mesh.num_vertices(), 0.0);
  std::vector<int> count(mesh.num_vertices(), 0);
  for (int t = 0; t < mesh.num_elements(); ++t)
    for (int v : mesh.tri(t)) {
      sum[v] += p[t];
      ++count[v];
    }
  for (int v = 0; v < mesh.num_vertices(); ++v)
    if (count[v] > 0) sum[v] /= count[v];
  return sum;
}

/// ||Kbar^{-1/2}(u_tilde - Pi_0 u_h)||, the flux gap bounded by eta_Q
/// against eta_Q.
inline double aux_vs_projected_mfmfe(const Mesh& mesh, const AuxiliarySolution& aux,
                                     const VelocityField& u_mfmfe) {
  VelocityField pi0u = project_bdm1_to_rt0(aux.u.space_ptr(), u_mfmfe);
  double s = 0;
  for (int t = 0; t < mesh.num_elements(); ++t) {
    LocalVectorPoly a = aux.u.local(t), b = pi0u.local(t);
    const Mat2& Ki = aux.kbar_inv[t];
    s += integrate_element(mesh.geometry(t), triangle_gauss7(), [&](const Vec2& x) {
      Vec2 d = a.eval(x) - b.eval(x);
      return d.dot(Ki * d);
    });
  }
  return std::sqrt(s);
}

}  // namespace mfmfe
