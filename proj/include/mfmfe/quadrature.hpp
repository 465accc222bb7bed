#pragma once

// Quadrature rules on the reference triangle and unit edge, the MFMFE
// vertex rule for the weighted velocity pairing, and the quadrature-error
// functional sigma.

#include "mfmfe/mesh.hpp"

#include <functional>
#include <stdexcept>
#include <vector>

namespace mfmfe {

struct QuadRule {
  std::vector<Vec2> points;     // reference coordinates
  std::vector<double> weights;  // sum to the reference measure
};

/// Nodes at the vertices of the unit triangle, weight |T_hat|/3 each.
/// Exact on P1.
inline const QuadRule& triangle_vertex_rule() {
  static const QuadRule r{{{0, 0}, {1, 0}, {0, 1}},
                          {1.0 / 6.0, 1.0 / 6.0, 1.0 / 6.0}};
  return r;
}

/// 7-point degree-5 rule on the unit triangle.
inline const QuadRule& triangle_gauss7() {
  static const QuadRule r = [] {
    QuadRule q;
    const double a1 = (6.0 + std::sqrt(15.0)) / 21.0;  // multiplicity-3 points
    const double a2 = (6.0 - std::sqrt(15.0)) / 21.0;
    const double w1 = (155.0 + std::sqrt(15.0)) / 2400.0;
    const double w2 = (155.0 - std::sqrt(15.0)) / 2400.0;
    q.points = {{1.0 / 3.0, 1.0 / 3.0},
                {a1, a1}, {1 - 2 * a1, a1}, {a1, 1 - 2 * a1},
                {a2, a2}, {1 - 2 * a2, a2}, {a2, 1 - 2 * a2}};
    q.weights = {9.0 / 80.0, w1, w1, w1, w2, w2, w2};
    return q;
  }();
  return r;
}

/// k-point Gauss-Legendre on [0,1], k = 1..5.
inline const QuadRule& edge_gauss(int k) {
  static const auto make = [](std::vector<double> x, std::vector<double> w) {
    QuadRule q;
    for (std::size_t i = 0; i < x.size(); ++i) {
      q.points.push_back({0.5 * (1.0 + x[i]), 0.0});
      q.weights.push_back(0.5 * w[i]);
    }
    return q;
  };
  static const QuadRule rules[5] = {
      make({0.0}, {2.0}),
      make({-1.0 / std::sqrt(3.0), 1.0 / std::sqrt(3.0)}, {1.0, 1.0}),
      make({-std::sqrt(0.6), 0.0, std::sqrt(0.6)},
           {5.0 / 9.0, 8.0 / 9.0, 5.0 / 9.0}),
      make({-std::sqrt((3 + 2 * std::sqrt(1.2)) / 7), -std::sqrt((3 - 2 * std::sqrt(1.2)) / 7),
            std::sqrt((3 - 2 * std::sqrt(1.2)) / 7), std::sqrt((3 + 2 * std::sqrt(1.2)) / 7)},
           {0.5 - std::sqrt(30.0) / 36.0, 0.5 + std::sqrt(30.0) / 36.0,
            0.5 + std::sqrt(30.0) / 36.0, 0.5 - std::sqrt(30.0) / 36.0}),
      make({-std::sqrt(5 + 2 * std::sqrt(10.0 / 7.0)) / 3.0,
            -std::sqrt(5 - 2 * std::sqrt(10.0 / 7.0)) / 3.0, 0.0,
            std::sqrt(5 - 2 * std::sqrt(10.0 / 7.0)) / 3.0,
            std::sqrt(5 + 2 * std::sqrt(10.0 / 7.0)) / 3.0},
           {(322.0 - 13.0 * std::sqrt(70.0)) / 900.0, (322.0 + 13.0 * std::sqrt(70.0)) / 900.0,
            128.0 / 225.0, (322.0 + 13.0 * std::sqrt(70.0)) / 900.0,
            (322.0 - 13.0 * std::sqrt(70.0)) / 900.0})};
  if (k < 1 || k > 5) throw std::invalid_argument("edge_gauss: k out of range");
  return rules[k - 1];
}

/// Integral of f over element T: J_T * sum w_i f(F_T(r_i)).
template <class F>
double integrate_element(const ElementGeometry& g, const QuadRule& rule, F&& f) {
  double s = 0;
  for (std::size_t i = 0; i < rule.points.size(); ++i)
    s += rule.weights[i] * f(g.map(rule.points[i]));
  return g.J * s;
}

/// Integral of f along the segment [a,b].
template <class F>
double integrate_edge(const Vec2& a, const Vec2& b, const QuadRule& rule, F&& f) {
  double s = 0;
  for (std::size_t i = 0; i < rule.points.size(); ++i)
    s += rule.weights[i] * f(a + rule.points[i].x() * (b - a));
  return (b - a).norm() * s;
}

using ScalarField = std::function<double(const Vec2&)>;
using TensorField = std::function<Mat2(const Vec2&)>;   // K^{-1}(x)
using VectorField = std::function<Vec2(const Vec2&)>;   // physical vector field

/// Inverse of the mapped tensor KK = J DF^{-1} K (DF^{-1})^T evaluated via
/// the explicit 2x2 adjugate; K_inv is the evaluator of K^{-1}(x).
inline Mat2 mapped_tensor_inverse(const ElementGeometry& g, const TensorField& K_inv,
                                  const Vec2& x) {
  Mat2 Kx = K_inv(x);  // K^{-1}(x)
  // K = adj(K^{-1}) / det(K^{-1})
  double det = Kx(0, 0) * Kx(1, 1) - Kx(0, 1) * Kx(1, 0);
  if (!(det > 0.0) || !std::isfinite(det))
    throw std::runtime_error("mapped tensor: K singular or indefinite at quadrature point");
  Mat2 K;
  K << Kx(1, 1), -Kx(0, 1), -Kx(1, 0), Kx(0, 0);
  K /= det;
  Mat2 DFinv = g.DF.inverse();
  Mat2 KK = g.J * DFinv * K * DFinv.transpose();
  double detKK = KK(0, 0) * KK(1, 1) - KK(0, 1) * KK(1, 0);
  if (!(detKK > 0.0) || !std::isfinite(detKK))
    throw std::runtime_error("mapped tensor: singular mapped tensor");
  Mat2 inv;
  inv << KK(1, 1), -KK(0, 1), -KK(1, 0), KK(0, 0);
  inv /= detKK;
  return inv;
}

/// MFMFE vertex quadrature on one element:
///   (K^{-1} q, v)_{Q,T} = (|T_hat|/3) sum_i KK^{-1}(r_i) q_hat(r_i) . v_hat(r_i)
/// where q_hat = J DF^{-1} q o F is the inverse Piola image of q.
inline double vertex_quadrature_pairing(const ElementGeometry& g, const TensorField& K_inv,
                                        const VectorField& q, const VectorField& v) {
  const QuadRule& rule = triangle_vertex_rule();
  Mat2 DFinv = g.DF.inverse();
  double s = 0;
  for (std::size_t i = 0; i < rule.points.size(); ++i) {
    Vec2 x = g.map(rule.points[i]);
    Mat2 KKinv = mapped_tensor_inverse(g, K_inv, x);
    Vec2 qh = g.J * (DFinv * q(x));
    Vec2 vh = g.J * (DFinv * v(x));
    s += rule.weights[i] * qh.dot(KKinv * vh);
  }
  return s;
}

/// Exactly-integrated pairing (K^{-1} q, v)_T with the degree-5 rule.
inline double exact_pairing(const ElementGeometry& g, const TensorField& K_inv,
                            const VectorField& q, const VectorField& v) {
  return integrate_element(g, triangle_gauss7(),
                           [&](const Vec2& x) { return q(x).dot(K_inv(x) * v(x)); });
}

/// sigma_T(K^{-1} q, v) = (K^{-1} q, v)_T - (K^{-1} q, v)_{Q,T}
inline double sigma_T(const ElementGeometry& g, const TensorField& K_inv,
                      const VectorField& q, const VectorField& v) {
  return exact_pairing(g, K_inv, q, v) - vertex_quadrature_pairing(g, K_inv, q, v);
}

}  // namespace mfmfe
