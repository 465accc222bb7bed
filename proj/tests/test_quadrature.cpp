#include "mfmfe/fem.hpp"
#include "mfmfe/mesh.hpp"
#include "mfmfe/quadrature.hpp"

#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <random>
#include <memory>

using namespace mfmfe;

namespace {

const TensorField kIdentity = [](const Vec2&) { return Mat2::Identity(); };

// smooth SPD coefficient with smooth inverse, used by the sigma studies
const TensorField kSmoothInv = [](const Vec2& x) {
  Mat2 m;
  m << 1.0 + 0.25 * x.x() * x.x(), 0.1 * x.x() * x.y(),
       0.1 * x.x() * x.y(), 1.0 + 0.25 * x.y() * x.y();
  return m;
};

Mesh reference_mesh() { return build_initial_mesh(DomainSpec::reference_triangle()); }

}  // namespace

TEST_CASE("rule weights sum to the reference measures") {
  double s = 0;
  for (double w : triangle_vertex_rule().weights) s += w;
  CHECK(s == Catch::Approx(0.5));
  s = 0;
  for (double w : triangle_gauss7().weights) s += w;
  CHECK(s == Catch::Approx(0.5));
  for (int k = 1; k <= 5; ++k) {
    s = 0;
    for (double w : edge_gauss(k).weights) s += w;
    CHECK(s == Catch::Approx(1.0));
    for (double w : edge_gauss(k).weights) CHECK(w > 0);
  }
  CHECK_THROWS(edge_gauss(0));
  CHECK_THROWS(edge_gauss(6));
}

TEST_CASE("7-point rule integrates degree-5 monomials exactly") {
  Mesh ref = reference_mesh();
  const ElementGeometry& g = ref.geometry(0);
  // exact integrals over the unit triangle: x^a y^b -> a! b! / (a+b+2)!
  auto exact = [](int a, int b) {
    auto fact = [](int n) { double f = 1; for (int i = 2; i <= n; ++i) f *= i; return f; };
    return fact(a) * fact(b) / fact(a + b + 2);
  };
  for (int a = 0; a <= 5; ++a)
    for (int b = 0; a + b <= 5; ++b) {
      double got = integrate_element(g, triangle_gauss7(), [&](const Vec2& x) {
        return std::pow(x.x(), a) * std::pow(x.y(), b);
      });
      CHECK(got == Catch::Approx(exact(a, b)).margin(1e-15));
    }
}

TEST_CASE("vertex rule pairing: constant field on the reference triangle") {
  Mesh ref = reference_mesh();
  VectorField e1 = [](const Vec2&) { return Vec2(1, 0); };
  double got = vertex_quadrature_pairing(ref.geometry(0), kIdentity, e1, e1);
  CHECK(got == Catch::Approx(0.5));  // area of the reference triangle
}

TEST_CASE("vertex rule is exact when the integrand is P1") {
  Mesh ref = reference_mesh();
  VectorField c = [](const Vec2&) { return Vec2(0.7, -0.3); };
  VectorField lin = [](const Vec2& x) { return Vec2(x.x() + 2 * x.y(), 1 - x.x()); };
  double q = vertex_quadrature_pairing(ref.geometry(0), kIdentity, c, lin);
  double e = exact_pairing(ref.geometry(0), kIdentity, c, lin);
  CHECK(q == Catch::Approx(e).epsilon(1e-13));
  CHECK(std::abs(sigma_T(ref.geometry(0), kIdentity, c, lin)) < 1e-14);
}

TEST_CASE("vertex rule vs exact rule on a vertex-supported linear field") {
  Mesh ref = reference_mesh();
  // q = v vanishing at (1,0),(0,1), value (1,0) at (0,0): q = (1-x-y, 0)
  VectorField q = [](const Vec2& x) { return Vec2(1.0 - x.x() - x.y(), 0.0); };
  double vq = vertex_quadrature_pairing(ref.geometry(0), kIdentity, q, q);
  CHECK(vq == Catch::Approx(1.0 / 6.0));  // (1/6) * 1 at the supporting vertex
  double ex = exact_pairing(ref.geometry(0), kIdentity, q, q);
  CHECK(ex == Catch::Approx(1.0 / 12.0));  // int (1-x-y)^2 over T_hat
  CHECK(sigma_T(ref.geometry(0), kIdentity, q, q) == Catch::Approx(1.0 / 12.0 - 1.0 / 6.0));
}

TEST_CASE("exact pairing: K=I, q=v=(x,0) on the reference triangle") {
  Mesh ref = reference_mesh();
  VectorField q = [](const Vec2& x) { return Vec2(x.x(), 0.0); };
  CHECK(exact_pairing(ref.geometry(0), kIdentity, q, q) == Catch::Approx(1.0 / 12.0));
}

TEST_CASE("pairings are symmetric and bilinear") {
  DomainSpec spec;
  spec.kind = DomainSpec::Kind::UserMesh;
  spec.vertices = {{0.1, -0.2}, {1.3, 0.4}, {0.2, 1.1}};
  spec.triangles = {{0, 1, 2}};
  Mesh m = build_initial_mesh(spec);
  VectorField q = [](const Vec2& x) { return Vec2(x.x() - 2 * x.y(), 0.5 + x.y()); };
  VectorField v = [](const Vec2& x) { return Vec2(1 - x.y(), x.x()); };
  VectorField qv = [&](const Vec2& x) -> Vec2 { return 2.0 * q(x) + 3.0 * v(x); };
  for (auto pairing : {vertex_quadrature_pairing, exact_pairing}) {
    double qv_v = pairing(m.geometry(0), kSmoothInv, q, v);
    double vq = pairing(m.geometry(0), kSmoothInv, v, q);
    CHECK(qv_v == Catch::Approx(vq).epsilon(1e-14));
    double comb = pairing(m.geometry(0), kSmoothInv, qv, v);
    double expect = 2.0 * pairing(m.geometry(0), kSmoothInv, q, v) +
                    3.0 * pairing(m.geometry(0), kSmoothInv, v, v);
    CHECK(comb == Catch::Approx(expect).epsilon(1e-13));
  }
}

TEST_CASE("singular permeability at a vertex is reported") {
  Mesh ref = reference_mesh();
  TensorField singular = [](const Vec2& x) {
    Mat2 m;
    m << x.x(), 0, 0, x.x();  // singular at x=0, i.e. at two vertices
    return m;
  };
  VectorField c = [](const Vec2&) { return Vec2(1, 0); };
  CHECK_THROWS(vertex_quadrature_pairing(ref.geometry(0), singular, c, c));
}

namespace {

// Measured constant in |sigma| <= C sum h_T ||q||_{1,T} ||v||_T over a mesh,
// with q BDM1 and v RT0 interpolants of fixed smooth fields.
struct SigmaStudy {
  double c_rt0;   // first-order bound constant
  double c_bdm1;  // second-order bound constant
};

SigmaStudy measure_sigma_constants(const Mesh& mesh, std::mt19937& rng) {
  auto bdm = std::make_shared<VelocitySpace>(mesh, SpaceKind::BDM1);
  auto rt0 = std::make_shared<VelocitySpace>(mesh, SpaceKind::RT0);
  std::uniform_real_distribution<double> dist(-1.0, 1.0);
  Eigen::VectorXd qc(bdm->ndof()), v0c(rt0->ndof()), v1c(bdm->ndof());
  for (auto* c : {&qc, &v1c})
    for (Eigen::Index i = 0; i < c->size(); ++i) (*c)[i] = dist(rng);
  for (Eigen::Index i = 0; i < v0c.size(); ++i) v0c[i] = dist(rng);
  VelocityField q(bdm, qc);
  VelocityField v0(rt0, v0c);
  VelocityField v1(bdm, v1c);

  double sig_rt0 = 0, sig_bdm = 0, bound_rt0 = 0, bound_bdm = 0;
  for (int t = 0; t < mesh.num_elements(); ++t) {
    const ElementGeometry& g = mesh.geometry(t);
    LocalVectorPoly ql = q.local(t), v0l = v0.local(t), v1l = v1.local(t);
    auto field = [](const LocalVectorPoly& p) {
      return VectorField([p](const Vec2& x) { return p.eval(x); });
    };
    // elementwise absolute sums: cancellation-free upper surrogate for
    // the global |sigma|
    sig_rt0 += std::abs(sigma_T(g, kSmoothInv, field(ql), field(v0l)));
    sig_bdm += std::abs(sigma_T(g, kSmoothInv, field(ql), field(v1l)));

    auto h1 = [&](const LocalVectorPoly& p) {
      double l2 = integrate_element(g, triangle_gauss7(),
                                    [&](const Vec2& x) { return p.eval(x).squaredNorm(); });
      return std::sqrt(l2 + g.area * p.G.squaredNorm());
    };
    auto l2 = [&](const LocalVectorPoly& p) {
      return std::sqrt(integrate_element(
          g, triangle_gauss7(), [&](const Vec2& x) { return p.eval(x).squaredNorm(); }));
    };
    bound_rt0 += g.h * h1(ql) * l2(v0l);
    bound_bdm += g.h * g.h * h1(ql) * h1(v1l);
  }
  return {sig_rt0 / bound_rt0, sig_bdm / bound_bdm};
}

}  // namespace

TEST_CASE("sigma bound constants stay bounded under uniform refinement") {
  Mesh mesh = build_initial_mesh(DomainSpec::l_shape());
  std::mt19937 rng(12345);
  std::vector<SigmaStudy> studies;
  for (int level = 0; level < 5; ++level) {
    mesh = uniform_refine(mesh).mesh;
    studies.push_back(measure_sigma_constants(mesh, rng));
  }
  double max_rt0 = 0, min_rt0 = 1e300, max_bdm = 0, min_bdm = 1e300;
  for (const auto& s : studies) {
    max_rt0 = std::max(max_rt0, s.c_rt0);
    min_rt0 = std::min(min_rt0, s.c_rt0);
    max_bdm = std::max(max_bdm, s.c_bdm1);
    min_bdm = std::min(min_bdm, s.c_bdm1);
  }
  CHECK(max_rt0 / min_rt0 < 3.0);
  CHECK(max_bdm / min_bdm < 3.0);
}
