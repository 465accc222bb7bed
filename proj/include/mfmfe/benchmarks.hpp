#pragma once

// Manufactured Darcy problems: corner-singularity solution on the L-shape,
// the four-quadrant discontinuous-permeability problem, and two trivially
// exact patch problems. Exact-error evaluation with the degree-5 rule.

#include "mfmfe/fem.hpp"
#include "mfmfe/problem.hpp"
#include "mfmfe/solver.hpp"

#include <cmath>
#include <complex>
#include <numbers>
#include <stdexcept>

namespace mfmfe {

namespace detail {

// p = Re(c w^r) on a sector, w = x+iy with the polar angle taken in the
// branch [theta0, theta0 + extent). p is region-wise harmonic; derivatives
// come from the complex derivative c r w^{r-1}.
struct SectorHarmonic {
  std::complex<double> c;
  double r;

  static double branch_angle(const Vec2& x, double period_start = 0.0) {
    double th = std::atan2(x.y(), x.x());
    if (th < period_start) th += 2.0 * std::numbers::pi;
    return th;
  }

  std::complex<double> wpow(const Vec2& x, double expo) const {
    double rho = x.norm();
    double th = branch_angle(x);
    return std::pow(rho, expo) * std::complex<double>(std::cos(expo * th), std::sin(expo * th));
  }

  double p(const Vec2& x) const { return (c * wpow(x, r)).real(); }
  Vec2 grad(const Vec2& x) const {
    std::complex<double> d = c * r * wpow(x, r - 1.0);
    return Vec2(d.real(), -d.imag());
  }
  Mat2 hess(const Vec2& x) const {
    std::complex<double> d2 = c * r * (r - 1.0) * wpow(x, r - 2.0);
    Mat2 H;
    H << d2.real(), -d2.imag(), -d2.imag(), -d2.real();
    return H;
  }
};

}  // namespace detail

/// L-shape corner singularity, K = I, f = 0, p = rho^r sin(r theta) with
/// theta in [0, 3pi/2].
inline Problem example_71(double r) {
  if (!(r > 0.0 && r < 1.0)) throw std::invalid_argument("example_71: r must lie in (0,1)");
  detail::SectorHarmonic s{std::complex<double>(0.0, -1.0), r};  // Re(-i w^r) = rho^r sin(r th)
  Problem pr;
  pr.name = "example71_r" + std::to_string(r);
  pr.domain = DomainSpec::l_shape();
  pr.K = [](const Vec2&) { return Mat2::Identity(); };
  pr.K_inv = [](const Vec2&) { return Mat2::Identity(); };
  pr.f = [](const Vec2&) { return 0.0; };
  pr.g = [s](const Vec2& x) { return s.p(x); };
  pr.grad_g = [s](const Vec2& x) { return s.grad(x); };
  pr.hess_g = [s](const Vec2& x) { return s.hess(x); };
  pr.exact_p = [s](const Vec2& x) { return s.p(x); };
  pr.exact_u = [s](const Vec2& x) -> Vec2 { return -s.grad(x); };
  return pr;
}

/// Four-quadrant problem on (-1,1)^2 with K = s_i I per quadrant and
/// p = rho^r (a_i sin(r th) + b_i cos(r th)); the coefficients make p and
/// the normal velocity continuous across the interfaces while grad p jumps.
inline Problem example_72() {
  constexpr double r = 0.53544095;
  constexpr double si[4] = {5.0, 1.0, 5.0, 1.0};
  constexpr double ai[4] = {0.44721360, -0.74535599, -0.94411759, -2.40170264};
  constexpr double bi[4] = {1.00000000, 2.33333333, 0.55555555, -0.48148148};

  struct Quadrants {
    detail::SectorHarmonic s[4];
    double perm[4];

    int region(const Vec2& x) const {
      double th = detail::SectorHarmonic::branch_angle(x);
      int i = static_cast<int>(th / (0.5 * std::numbers::pi));
      return std::clamp(i, 0, 3);
    }
  };
  Quadrants q;
  for (int i = 0; i < 4; ++i) {
    q.s[i] = {std::complex<double>(bi[i], -ai[i]), r};
    q.perm[i] = si[i];
  }

  Problem pr;
  pr.name = "example72";
  pr.domain = DomainSpec::square_4quadrant();
  pr.K = [q](const Vec2& x) -> Mat2 { return q.perm[q.region(x)] * Mat2::Identity(); };
  pr.K_inv = [q](const Vec2& x) -> Mat2 {
    return (1.0 / q.perm[q.region(x)]) * Mat2::Identity();
  };
  pr.f = [](const Vec2&) { return 0.0; };
  pr.g = [q](const Vec2& x) { return q.s[q.region(x)].p(x); };
  pr.grad_g = [q](const Vec2& x) { return q.s[q.region(x)].grad(x); };
  pr.hess_g = [q](const Vec2& x) { return q.s[q.region(x)].hess(x); };
  pr.exact_p = [q](const Vec2& x) { return q.s[q.region(x)].p(x); };
  pr.exact_u = [q](const Vec2& x) -> Vec2 {
    int i = q.region(x);
    return -q.perm[i] * q.s[i].grad(x);
  };
  return pr;
}

/// K = I, g = 1 on the whole boundary, f = 0: u = 0, p = 1.
inline Problem constant_patch() {
  Problem pr;
  pr.name = "constant_patch";
  pr.domain = DomainSpec::l_shape();
  pr.K = [](const Vec2&) { return Mat2::Identity(); };
  pr.K_inv = [](const Vec2&) { return Mat2::Identity(); };
  pr.f = [](const Vec2&) { return 0.0; };
  pr.g = [](const Vec2&) { return 1.0; };
  pr.grad_g = [](const Vec2&) { return Vec2::Zero(); };
  pr.hess_g = [](const Vec2&) { return Mat2::Zero(); };
  pr.exact_p = [](const Vec2&) { return 1.0; };
  pr.exact_u = [](const Vec2&) { return Vec2::Zero(); };
  return pr;
}

/// K = I, p = x1 + x2, u = (-1,-1), f = 0.
inline Problem linear_patch() {
  Problem pr;
  pr.name = "linear_patch";
  pr.domain = DomainSpec::l_shape();
  pr.K = [](const Vec2&) { return Mat2::Identity(); };
  pr.K_inv = [](const Vec2&) { return Mat2::Identity(); };
  pr.f = [](const Vec2&) { return 0.0; };
  pr.g = [](const Vec2& x) { return x.x() + x.y(); };
  pr.grad_g = [](const Vec2&) { return Vec2(1.0, 1.0); };
  pr.hess_g = [](const Vec2&) { return Mat2::Zero(); };
  pr.exact_p = [](const Vec2& x) { return x.x() + x.y(); };
  pr.exact_u = [](const Vec2&) { return Vec2(-1.0, -1.0); };
  return pr;
}

inline Problem problem_by_name(const std::string& name) {
  if (name == "example71_r04") return example_71(0.4);
  if (name == "example71_r01") return example_71(0.1);
  if (name == "example72") return example_72();
  if (name == "linear_patch") return linear_patch();
  if (name == "constant_patch") return constant_patch();
  throw std::invalid_argument("unknown problem: " + name);
}

struct ExactErrors {
  double err_u = 0;     // ||K^{-1/2}(u - u_h)||
  double err_p = 0;     // ||p - p_h||
  double err_Qhp = 0;   // ||Q_h p - p_h||
};

inline ExactErrors exact_errors(const Mesh& mesh, const DiscreteSolution& sol,
                                const Problem& problem) {
  if (!problem.has_exact()) throw std::invalid_argument("exact_errors: no exact solution");
  ExactErrors e;
  for (int t = 0; t < mesh.num_elements(); ++t) {
    const ElementGeometry& g = mesh.geometry(t);
    LocalVectorPoly uh = sol.u.local(t);
    e.err_u += integrate_element(g, triangle_gauss7(), [&](const Vec2& x) {
      Vec2 d = problem.exact_u(x) - uh.eval(x);
      return d.dot(problem.K_inv(x) * d);
    });
    e.err_p += integrate_element(g, triangle_gauss7(), [&](const Vec2& x) {
      double d = problem.exact_p(x) - sol.p[t];
      return d * d;
    });
    double qhp = integrate_element(g, triangle_gauss7(), problem.exact_p) / g.area;
    e.err_Qhp += g.area * (qhp - sol.p[t]) * (qhp - sol.p[t]);
  }
  e.err_u = std::sqrt(e.err_u);
  e.err_p = std::sqrt(e.err_p);
  e.err_Qhp = std::sqrt(e.err_Qhp);
  return e;
}

}  // namespace mfmfe
