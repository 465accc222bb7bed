#pragma once

// Data of one Darcy boundary value problem: permeability, source, Dirichlet
// data with tangential derivatives, and (optionally) the exact solution.

#include "mfmfe/mesh.hpp"
#include "mfmfe/quadrature.hpp"

#include <functional>
#include <optional>
#include <string>

namespace mfmfe {

struct Problem {
  std::string name;
  DomainSpec domain;

  TensorField K;      // permeability K(x)
  TensorField K_inv;  // K^{-1}(x)
  ScalarField f;      // source
  ScalarField g;      // Dirichlet data (trace of its analytic extension)

  // Analytic extension of g near the boundary; tangential derivatives along
  // a straight edge with unit tangent t are grad_g.t and t^T hess_g t.
  std::function<Vec2(const Vec2&)> grad_g;
  std::function<Mat2(const Vec2&)> hess_g;

  // exact solution, when known
  std::function<double(const Vec2&)> exact_p;  // may be empty
  std::function<Vec2(const Vec2&)> exact_u;    // u = -K grad p

  bool has_exact() const { return static_cast<bool>(exact_p); }
};

}  // namespace mfmfe
