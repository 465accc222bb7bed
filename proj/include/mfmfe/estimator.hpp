#pragma once

// Residual-type indicators for the MFMFE solution: the discretization
// indicator eta_h (element residual + tangential jumps), the quadrature
// indicator eta_Q, and both sides of the reliability/efficiency bounds.

#include "mfmfe/benchmarks.hpp"
#include "mfmfe/fem.hpp"
#include "mfmfe/problem.hpp"
#include "mfmfe/solver.hpp"

#include <cmath>
#include <ostream>
#include <vector>

namespace mfmfe {

struct EstimatorReport {
  // per element
  std::vector<double> residual_sq;  // h_T^2 ||f - div u_h||_T^2 (0 when hot omitted)
  std::vector<double> jump_sq;      // sum_{E in eps_T} h_E J_{t_E}^2
  std::vector<double> etaQ_sq;      // h_T^2 ||u_h||_{1,T}^2
  std::vector<double> eta_sq;       // marking indicator: residual + jump + etaQ
  // per edge
  std::vector<double> J_sq;

  // globals
  double eta_h = 0;
  double eta_Q = 0;
  double total() const { return std::sqrt(eta_h * eta_h + eta_Q * eta_Q); }

  // high-order terms, always reported
  double hot_residual = 0;  // ||h(f - div u_h)||
  double hot_g = 0;         // {sum_{E in eps_D} h_E^3 ||g''||_E^2}^{1/2}
};

/// J_{t_E}^2 for a single edge: squared L2 norm of the tangential jump of
/// K^{-1} u_h (interior), of the tangential flux residual plus the
/// h_E^2 ||g''||^2 term (Dirichlet), or 0 (Neumann).
inline double tangential_jump_sq(const Mesh& mesh, int e, const VelocityField& u,
                                 const Problem& problem, bool include_hot = true) {
  const Edge& E = mesh.edge(e);
  const Vec2 a = mesh.vertex(E.v0), b = mesh.vertex(E.v1);
  const Vec2 tg = mesh.edge_tangent(e);
  const QuadRule& rule = edge_gauss(3);

  if (E.on_boundary()) {
    if (*E.tag == BoundaryTag::Neumann) return 0.0;
    LocalVectorPoly up = u.local(E.elem_plus);
    double mis = integrate_edge(a, b, rule, [&](const Vec2& x) {
      // flux residual K^{-1}u + grad p has tangential trace
      // gamma_t(K^{-1}u_h) + dg/ds on a Dirichlet edge
      double gt = (problem.K_inv(x) * up.eval(x)).dot(tg);
      double dgds = problem.grad_g(x).dot(tg);
      double d = gt + dgds;
      return d * d;
    });
    double curv = 0;
    if (include_hot) {
      curv = E.length * E.length *
             integrate_edge(a, b, rule, [&](const Vec2& x) {
               double d2 = tg.dot(problem.hess_g(x) * tg);
               return d2 * d2;
             });
    }
    return mis + curv;
  }

  LocalVectorPoly up = u.local(E.elem_plus);
  LocalVectorPoly um = u.local(E.elem_minus);
  return integrate_edge(a, b, rule, [&](const Vec2& x) {
    double jump = (problem.K_inv(x) * (up.eval(x) - um.eval(x))).dot(tg);
    return jump * jump;
  });
}

inline EstimatorReport compute_report(const Mesh& mesh, const DiscreteSolution& sol,
                                      const Problem& problem, bool include_hot = true) {
  const int nt = mesh.num_elements();
  const int ne = mesh.num_edges();
  EstimatorReport rep;
  rep.residual_sq.assign(nt, 0.0);
  rep.jump_sq.assign(nt, 0.0);
  rep.etaQ_sq.assign(nt, 0.0);
  rep.eta_sq.assign(nt, 0.0);
  rep.J_sq.assign(ne, 0.0);

  for (int e = 0; e < ne; ++e)
    rep.J_sq[e] = tangential_jump_sq(mesh, e, sol.u, problem, include_hot);

  double hot_g_sq = 0;
  for (int e = 0; e < ne; ++e) {
    const Edge& E = mesh.edge(e);
    if (!E.on_boundary() || *E.tag != BoundaryTag::Dirichlet) continue;
    const Vec2 a = mesh.vertex(E.v0), b = mesh.vertex(E.v1);
    const Vec2 tg = mesh.edge_tangent(e);
    hot_g_sq += std::pow(E.length, 3) *
                integrate_edge(a, b, edge_gauss(3), [&](const Vec2& x) {
                  double d2 = tg.dot(problem.hess_g(x) * tg);
                  return d2 * d2;
                });
  }
  rep.hot_g = std::sqrt(hot_g_sq);

  double hot_res_sq = 0;
  for (int t = 0; t < nt; ++t) {
    const ElementGeometry& g = mesh.geometry(t);
    LocalVectorPoly uh = sol.u.local(t);
    const double div = uh.div();

    double res = integrate_element(g, triangle_gauss7(), [&](const Vec2& x) {
      double d = problem.f(x) - div;
      return d * d;
    });
    hot_res_sq += g.h * g.h * res;
    if (include_hot) rep.residual_sq[t] = g.h * g.h * res;

    // ||u_h||_{1,T}^2, exact: u_h is P1 per element, grad constant
    double l2 = integrate_element(g, triangle_gauss7(),
                                  [&](const Vec2& x) { return uh.eval(x).squaredNorm(); });
    rep.etaQ_sq[t] = g.h * g.h * (l2 + g.area * uh.G.squaredNorm());

    // interior-edge jumps counted once per incident element
    for (int j = 0; j < 3; ++j) {
      int e = mesh.element_edges(t)[j];
      rep.jump_sq[t] += mesh.edge(e).length * rep.J_sq[e];
    }
    rep.eta_sq[t] = rep.residual_sq[t] + rep.jump_sq[t] + rep.etaQ_sq[t];
  }
  rep.hot_residual = std::sqrt(hot_res_sq);

  double eta_h_sq = 0, eta_Q_sq = 0;
  for (int t = 0; t < nt; ++t) {
    eta_h_sq += rep.residual_sq[t] + rep.jump_sq[t];
    eta_Q_sq += rep.etaQ_sq[t];
  }
  rep.eta_h = std::sqrt(eta_h_sq);
  rep.eta_Q = std::sqrt(eta_Q_sq);
  return rep;
}

/// Reliability constant of the velocity bound: err_u / (eta_h^2+eta_Q^2)^{1/2},
/// with the 0/0 case defined as 0.
inline double reliability_check(const EstimatorReport& rep, double err_u) {
  double total = rep.total();
  if (total == 0.0) return 0.0;
  return err_u / total;
}

struct EfficiencyCheck {
  double lhs = 0;          // eta_h + eta_Q + h_max^{-1} ||h K^{-1} u_h||
  double rhs = 0;          // err_u + ||h^{-1}(p - p_h)|| + h.o.t.
  double ratio = 0;        // lhs / rhs
  double pressure_ratio = 0;  // ||Q_h p - p_h|| / (h_max(eta_h+eta_Q) + ||h(f-div u_h)||)
};

inline EfficiencyCheck efficiency_check(const Mesh& mesh, const DiscreteSolution& sol,
                                        const Problem& problem, const EstimatorReport& rep,
                                        const ExactErrors& err) {
  EfficiencyCheck ec;
  const double hmax = mesh.h_max();

  double hKu_sq = 0, hp_err_sq = 0, osc_sq = 0;
  for (int t = 0; t < mesh.num_elements(); ++t) {
    const ElementGeometry& g = mesh.geometry(t);
    LocalVectorPoly uh = sol.u.local(t);
    hKu_sq += g.h * g.h * integrate_element(g, triangle_gauss7(), [&](const Vec2& x) {
                return (problem.K_inv(x) * uh.eval(x)).squaredNorm();
              });
    hp_err_sq += integrate_element(g, triangle_gauss7(), [&](const Vec2& x) {
                   double d = problem.exact_p(x) - sol.p[t];
                   return d * d;
                 }) /
                 (g.h * g.h);
    double qhf = integrate_element(g, triangle_gauss7(), problem.f) / g.area;
    osc_sq += g.h * g.h * integrate_element(g, triangle_gauss7(), [&](const Vec2& x) {
                double d = problem.f(x) - qhf;
                return d * d;
              });
  }
  double hot = std::sqrt(osc_sq) + rep.hot_g;

  ec.lhs = rep.eta_h + rep.eta_Q + std::sqrt(hKu_sq) / hmax;
  ec.rhs = err.err_u + std::sqrt(hp_err_sq) + hot;
  ec.ratio = (ec.rhs > 0) ? ec.lhs / ec.rhs : 0.0;

  double denom = hmax * (rep.eta_h + rep.eta_Q) + rep.hot_residual;
  ec.pressure_ratio = (denom > 0) ? err.err_Qhp / denom : 0.0;
  return ec;
}

/// CSV export: one row per element plus a summary row.
inline void write_report_csv(std::ostream& os, const Mesh& mesh, const EstimatorReport& rep) {
  os.precision(17);
  os << "id,h_T,residual_sq,jump_sq,etaQ_sq,eta_T\n";
  for (int t = 0; t < mesh.num_elements(); ++t)
    os << t << ',' << mesh.element_diameter(t) << ',' << rep.residual_sq[t] << ','
       << rep.jump_sq[t] << ',' << rep.etaQ_sq[t] << ',' << std::sqrt(rep.eta_sq[t]) << '\n';
  os << "summary," << mesh.h_max() << ',' << rep.eta_h << ',' << rep.eta_Q << ','
     << rep.total() << ",-\n";
}

}  // namespace mfmfe
