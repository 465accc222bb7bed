#pragma once

// Assembly of the MFMFE saddle system, vertex-block velocity elimination to
// the SPD cell-centered pressure system, and the exactly-integrated mixed
// FEM reference solver.

#include "mfmfe/fem.hpp"
#include "mfmfe/problem.hpp"

#include <Eigen/Dense>
#include <Eigen/Sparse>
#include <Eigen/SparseCholesky>
#include <Eigen/SparseLU>
#include <Eigen/IterativeLinearSolvers>

#include <map>
#include <memory>
#include <numeric>
#include <set>
#include <stdexcept>
#include <string>
#include <vector>

namespace mfmfe {

using SparseMat = Eigen::SparseMatrix<double>;

struct MfmfeSystem {
  std::shared_ptr<const VelocitySpace> space;  // BDM1, inactive DOFs eliminated
  std::vector<int> active_dofs;                // reduced index -> space dof
  std::vector<int> reduced_index;              // space dof -> reduced index or -1

  SparseMat A;        // velocity pairing (vertex rule), reduced x reduced
  SparseMat B;        // divergence matrix, nt x reduced, b_lj = -(div v_j, w_l)
  Eigen::VectorXd G;  // -<g, v.n>_GammaD
  Eigen::VectorXd F;  // -(f, w)

  // owner-vertex partition of the reduced velocity DOFs
  std::vector<std::vector<int>> vertex_blocks;  // reduced indices, grouped
  double off_block_max = 0;                     // |A_ij| across different blocks
  double a_max = 0;                             // max |A_ij|
  double symmetry_defect = 0;                   // max |A_ij - A_ji|
};

struct SolverDiagnostics {
  double saddle_residual = 0;  // relative algebraic residual of the full system
  double div_identity_defect = 0;  // relative defect of div u_h = Q_h f, rowwise
  int schur_cg_iters = -1;         // -1 when the direct path was used
  std::string method;
};

struct DiscreteSolution {
  VelocityField u;
  PressureField p;
  SolverDiagnostics diag;
};

inline MfmfeSystem assemble(const Mesh& mesh, const Problem& problem) {
  auto space = std::make_shared<VelocitySpace>(mesh, SpaceKind::BDM1);
  MfmfeSystem sys;
  sys.space = space;

  sys.reduced_index.assign(space->ndof(), -1);
  for (int d = 0; d < space->ndof(); ++d)
    if (space->active(d)) {
      sys.reduced_index[d] = static_cast<int>(sys.active_dofs.size());
      sys.active_dofs.push_back(d);
    }
  const int nu = static_cast<int>(sys.active_dofs.size());
  const int nt = mesh.num_elements();

  std::vector<Eigen::Triplet<double>> at, bt;
  sys.G = Eigen::VectorXd::Zero(nu);
  sys.F = Eigen::VectorXd::Zero(nt);

  const QuadRule& vrule = triangle_vertex_rule();
  for (int t = 0; t < nt; ++t) {
    const ElementGeometry& g = mesh.geometry(t);
    const Mat2 DFinv = g.DF.inverse();
    // reference-vertex images and mapped inverse tensors
    Mat2 KKinv[3];
    Vec2 xs[3];
    for (int i = 0; i < 3; ++i) {
      xs[i] = g.map(vrule.points[i]);
      KKinv[i] = mapped_tensor_inverse(g, problem.K_inv, xs[i]);
    }
    // inverse-Piola images of the 6 local basis functions at the 3 vertices
    Vec2 bhat[6][3];
    for (int m = 0; m < 6; ++m) {
      const LocalVectorPoly& b = space->basis(t, m);
      for (int i = 0; i < 3; ++i) bhat[m][i] = g.J * (DFinv * b.eval(xs[i]));
    }
    for (int m = 0; m < 6; ++m) {
      const int gm = sys.reduced_index[space->global_dof(t, m)];
      if (gm < 0) continue;
      for (int n = 0; n < 6; ++n) {
        const int gn = sys.reduced_index[space->global_dof(t, n)];
        if (gn < 0) continue;
        double a = 0;
        for (int i = 0; i < 3; ++i)
          a += vrule.weights[i] * bhat[n][i].dot(KKinv[i] * bhat[m][i]);
        if (a != 0.0) at.emplace_back(gm, gn, a);
      }
      bt.emplace_back(t, gm, -space->basis(t, m).div() * g.area);
    }
    sys.F[t] = -integrate_element(g, triangle_gauss7(), problem.f);
  }

  // Dirichlet boundary term: v.n of the edge's own DOFs restricted to the
  // edge are the two linear hat functions.
  for (int e = 0; e < mesh.num_edges(); ++e) {
    const Edge& E = mesh.edge(e);
    if (!E.on_boundary() || *E.tag != BoundaryTag::Dirichlet) continue;
    const Vec2 a = mesh.vertex(E.v0), b = mesh.vertex(E.v1);
    for (int k = 0; k < 2; ++k) {
      const int gd = sys.reduced_index[2 * e + k];
      if (gd < 0) continue;
      sys.G[gd] -= integrate_edge(a, b, edge_gauss(3), [&](const Vec2& x) {
        double s = (x - a).norm() / E.length;  // arclength coordinate in [0,1]
        double hat = (k == 0) ? 1.0 - s : s;
        return problem.g(x) * hat;
      });
    }
  }

  sys.A.resize(nu, nu);
  sys.A.setFromTriplets(at.begin(), at.end());
  sys.B.resize(nt, nu);
  sys.B.setFromTriplets(bt.begin(), bt.end());

  // owner-vertex partition + structural audits
  std::map<int, std::vector<int>> blocks;
  std::vector<int> owner(nu);
  for (int r = 0; r < nu; ++r) {
    owner[r] = space->owner_vertex(sys.active_dofs[r]);
    blocks[owner[r]].push_back(r);
  }
  for (auto& [v, rows] : blocks) sys.vertex_blocks.push_back(rows);

  for (int col = 0; col < sys.A.outerSize(); ++col)
    for (SparseMat::InnerIterator it(sys.A, col); it; ++it) {
      sys.a_max = std::max(sys.a_max, std::abs(it.value()));
      if (owner[it.row()] != owner[it.col()])
        sys.off_block_max = std::max(sys.off_block_max, std::abs(it.value()));
      sys.symmetry_defect =
          std::max(sys.symmetry_defect, std::abs(it.value() - sys.A.coeff(it.col(), it.row())));
    }
  return sys;
}

namespace detail {

/// Blockwise application of A^{-1} via cached per-vertex Cholesky factors.
class BlockInverse {
public:
  BlockInverse(const MfmfeSystem& sys) {
    Eigen::MatrixXd dense;
    for (const auto& rows : sys.vertex_blocks) {
      const int k = static_cast<int>(rows.size());
      dense.setZero(k, k);
      for (int i = 0; i < k; ++i)
        for (int j = 0; j < k; ++j) dense(i, j) = sys.A.coeff(rows[i], rows[j]);
      Eigen::LLT<Eigen::MatrixXd> llt(dense);
      if (llt.info() != Eigen::Success)
        throw std::runtime_error("vertex block is not SPD");
      blocks_.push_back({rows, llt});
    }
  }

  Eigen::VectorXd apply(const Eigen::VectorXd& x) const {
    Eigen::VectorXd y(x.size());
    Eigen::VectorXd loc;
    for (const auto& b : blocks_) {
      const int k = static_cast<int>(b.rows.size());
      loc.resize(k);
      for (int i = 0; i < k; ++i) loc[i] = x[b.rows[i]];
      loc = b.llt.solve(loc);
      for (int i = 0; i < k; ++i) y[b.rows[i]] = loc[i];
    }
    return y;
  }

  struct Block {
    std::vector<int> rows;
    Eigen::LLT<Eigen::MatrixXd> llt;
  };
  const std::vector<Block>& blocks() const { return blocks_; }

private:
  std::vector<Block> blocks_;
};

}  // namespace detail

/// Componentwise relative defect of the divergence rows -B U = F. The identity
/// div u_h = Q_h f is enforced row by row in the flux variables; dividing by
/// element areas first would amplify roundoff on strongly graded meshes, so
/// the audit compares each flux sum against its own magnitude.
inline double div_identity_relative_defect(const SparseMat& B, const Eigen::VectorXd& U,
                                           const Eigen::VectorXd& F) {
  Eigen::VectorXd resid = B * U + F;
  Eigen::VectorXd scale = B.cwiseAbs() * U.cwiseAbs() + F.cwiseAbs();
  double worst = 0;
  for (Eigen::Index t = 0; t < resid.size(); ++t)
    if (scale[t] > 0) worst = std::max(worst, std::abs(resid[t]) / scale[t]);
  return worst;
}

struct SchurOptions {
  // direct sparse Cholesky up to this many pressure unknowns, CG above
  int direct_limit = 200000;
  double cg_tol = 1e-12;
};

/// Local flux elimination around grid vertices and solve of the SPD
/// cell-centered pressure system  S P = B A^{-1} G - F,  then
/// U = A^{-1}(G - B^T P).  (Second block row is -B U = F.)
inline DiscreteSolution eliminate_and_solve(const MfmfeSystem& sys,
                                            const SchurOptions& opt = {}) {
  const int nt = static_cast<int>(sys.B.rows());
  detail::BlockInverse Ainv(sys);

  // S = sum over vertex blocks of (B_v) A_v^{-1} (B_v)^T, assembled from
  // small dense blocks over the elements touching each vertex.
  std::vector<Eigen::Triplet<double>> st;
  {
    SparseMat Bc = sys.B;  // column-compressed access to B's columns
    for (const auto& blk : Ainv.blocks()) {
      const int k = static_cast<int>(blk.rows.size());
      std::vector<int> elems;
      for (int i = 0; i < k; ++i)
        for (SparseMat::InnerIterator it(Bc, blk.rows[i]); it; ++it)
          elems.push_back(static_cast<int>(it.row()));
      std::sort(elems.begin(), elems.end());
      elems.erase(std::unique(elems.begin(), elems.end()), elems.end());
      const int m = static_cast<int>(elems.size());
      Eigen::MatrixXd Bv = Eigen::MatrixXd::Zero(m, k);
      for (int i = 0; i < k; ++i)
        for (SparseMat::InnerIterator it(Bc, blk.rows[i]); it; ++it) {
          int r = static_cast<int>(
              std::lower_bound(elems.begin(), elems.end(), it.row()) - elems.begin());
          Bv(r, i) = it.value();
        }
      Eigen::MatrixXd Sv = Bv * blk.llt.solve(Bv.transpose());
      for (int i = 0; i < m; ++i)
        for (int j = 0; j < m; ++j)
          if (Sv(i, j) != 0.0) st.emplace_back(elems[i], elems[j], Sv(i, j));
    }
  }
  SparseMat S(nt, nt);
  S.setFromTriplets(st.begin(), st.end());

  Eigen::VectorXd rhs = sys.B * Ainv.apply(sys.G) - sys.F;

  Eigen::VectorXd P;
  SolverDiagnostics diag;
  if (nt <= opt.direct_limit) {
    Eigen::SimplicialLLT<SparseMat> llt(S);
    if (llt.info() != Eigen::Success)
      throw std::runtime_error("Schur complement Cholesky failed (not SPD?)");
    P = llt.solve(rhs);
    diag.method = "schur-cholesky";
  } else {
    Eigen::ConjugateGradient<SparseMat, Eigen::Lower | Eigen::Upper,
                             Eigen::DiagonalPreconditioner<double>>
        cg(S);
    cg.setTolerance(opt.cg_tol);
    cg.setMaxIterations(20 * nt);
    P = cg.solve(rhs);
    if (cg.info() != Eigen::Success)
      throw std::runtime_error("Schur complement CG did not converge");
    diag.schur_cg_iters = static_cast<int>(cg.iterations());
    diag.method = "schur-cg-jacobi";
  }

  Eigen::VectorXd U = Ainv.apply(sys.G - sys.B.transpose() * P);

  double rnorm = std::sqrt((sys.A * U + sys.B.transpose() * P - sys.G).squaredNorm() +
                           (-sys.B * U - sys.F).squaredNorm());
  double scale = std::sqrt(sys.G.squaredNorm() + sys.F.squaredNorm());
  diag.saddle_residual = rnorm / std::max(scale, 1e-300);

  Eigen::VectorXd full = Eigen::VectorXd::Zero(sys.space->ndof());
  for (std::size_t r = 0; r < sys.active_dofs.size(); ++r) full[sys.active_dofs[r]] = U[r];
  VelocityField u(sys.space, std::move(full));

  diag.div_identity_defect = div_identity_relative_defect(sys.B, U, sys.F);
  return {std::move(u), std::move(P), std::move(diag)};
}

inline DiscreteSolution solve_mfmfe(const Mesh& mesh, const Problem& problem,
                                    const SchurOptions& opt = {}) {
  return eliminate_and_solve(assemble(mesh, problem), opt);
}

namespace detail {

/// Direct factorization of the indefinite saddle system
/// [A B^T; -B 0][U;P] = [G;F].
inline std::pair<Eigen::VectorXd, Eigen::VectorXd> solve_saddle_direct(
    const SparseMat& A, const SparseMat& B, const Eigen::VectorXd& G,
    const Eigen::VectorXd& F) {
  const int nu = static_cast<int>(A.rows());
  const int np = static_cast<int>(B.rows());
  std::vector<Eigen::Triplet<double>> tr;
  for (int c = 0; c < A.outerSize(); ++c)
    for (SparseMat::InnerIterator it(A, c); it; ++it)
      tr.emplace_back(static_cast<int>(it.row()), static_cast<int>(it.col()), it.value());
  for (int c = 0; c < B.outerSize(); ++c)
    for (SparseMat::InnerIterator it(B, c); it; ++it) {
      tr.emplace_back(static_cast<int>(it.col()), nu + static_cast<int>(it.row()), it.value());
      tr.emplace_back(nu + static_cast<int>(it.row()), static_cast<int>(it.col()), -it.value());
    }
  SparseMat M(nu + np, nu + np);
  M.setFromTriplets(tr.begin(), tr.end());
  Eigen::VectorXd rhs(nu + np);
  rhs << G, F;
  Eigen::SparseLU<SparseMat> lu(M);
  if (lu.info() != Eigen::Success)
    throw std::runtime_error("saddle point factorization failed");
  Eigen::VectorXd sol = lu.solve(rhs);
  return {sol.head(nu), sol.tail(np)};
}

}  // namespace detail

/// BDM1/P0 mixed FEM with exactly-integrated velocity pairing (no vertex
/// quadrature); the sigma-free reference discretization.
inline DiscreteSolution solve_mixed_exact(const Mesh& mesh, const Problem& problem) {
  MfmfeSystem sys = assemble(mesh, problem);  // reuse B, G, F and DOF layout
  const int nu = static_cast<int>(sys.active_dofs.size());

  std::vector<Eigen::Triplet<double>> at;
  for (int t = 0; t < mesh.num_elements(); ++t) {
    const ElementGeometry& g = mesh.geometry(t);
    for (int m = 0; m < 6; ++m) {
      const int gm = sys.reduced_index[sys.space->global_dof(t, m)];
      if (gm < 0) continue;
      const LocalVectorPoly& bm = sys.space->basis(t, m);
      for (int n = 0; n < 6; ++n) {
        const int gn = sys.reduced_index[sys.space->global_dof(t, n)];
        if (gn < 0) continue;
        const LocalVectorPoly& bn = sys.space->basis(t, n);
        double a = integrate_element(g, triangle_gauss7(), [&](const Vec2& x) {
          return bn.eval(x).dot(problem.K_inv(x) * bm.eval(x));
        });
        at.emplace_back(gm, gn, a);
      }
    }
  }
  SparseMat A(nu, nu);
  A.setFromTriplets(at.begin(), at.end());

  auto [U, P] = detail::solve_saddle_direct(A, sys.B, sys.G, sys.F);

  SolverDiagnostics diag;
  diag.method = "mixed-exact-sparselu";
  double rnorm = std::sqrt((A * U + sys.B.transpose() * P - sys.G).squaredNorm() +
                           (-sys.B * U - sys.F).squaredNorm());
  double scale = std::sqrt(sys.G.squaredNorm() + sys.F.squaredNorm());
  diag.saddle_residual = rnorm / std::max(scale, 1e-300);

  Eigen::VectorXd full = Eigen::VectorXd::Zero(sys.space->ndof());
  for (std::size_t r = 0; r < sys.active_dofs.size(); ++r) full[sys.active_dofs[r]] = U[r];
  VelocityField u(sys.space, std::move(full));
  diag.div_identity_defect = div_identity_relative_defect(sys.B, U, sys.F);
  return {std::move(u), std::move(P), std::move(diag)};
}

}  // namespace mfmfe
