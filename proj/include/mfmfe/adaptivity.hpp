#pragma once

// Dorfler marking and the solve-estimate-mark-refine driver.

#include "mfmfe/benchmarks.hpp"
#include "mfmfe/estimator.hpp"
#include "mfmfe/mesh.hpp"
#include "mfmfe/solver.hpp"

#include <algorithm>
#include <chrono>
#include <functional>
#include <numeric>
#include <ostream>
#include <stdexcept>
#include <vector>

namespace mfmfe {

struct AdaptiveConfig {
  double theta = 0.5;        // Dorfler parameter in (0,1]
  int max_iterations = 25;
  int max_elements = 100000;
  bool uniform = false;      // uniform mode marks every element
  bool include_hot = true;
  SchurOptions schur;

  void validate() const {
    if (!(theta > 0.0 && theta <= 1.0))
      throw std::invalid_argument("AdaptiveConfig: theta must lie in (0,1]");
    if (max_iterations < 1 || max_elements < 1)
      throw std::invalid_argument("AdaptiveConfig: iteration/element limits must be positive");
  }
};

/// Minimal prefix of elements, sorted by squared indicator descending (ties
/// by index ascending), whose squared sum reaches theta * total.
inline MarkedSet dorfler_mark(const EstimatorReport& rep, double theta) {
  const int nt = static_cast<int>(rep.eta_sq.size());
  double total = std::accumulate(rep.eta_sq.begin(), rep.eta_sq.end(), 0.0);
  MarkedSet marked;
  if (total <= 0.0) return marked;

  std::vector<int> order(nt);
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](int a, int b) {
    if (rep.eta_sq[a] != rep.eta_sq[b]) return rep.eta_sq[a] > rep.eta_sq[b];
    return a < b;
  });

  double acc = 0;
  for (int t : order) {
    if (acc >= theta * total) break;
    if (rep.eta_sq[t] <= 0.0) break;
    marked.elements.push_back(t);
    acc += rep.eta_sq[t];
  }
  std::sort(marked.elements.begin(), marked.elements.end());
  return marked;
}

struct HistoryRow {
  int iter = 0;
  int n_elements = 0;
  int ndof_u = 0;
  int ndof_p = 0;
  double h_max = 0, h_min = 0;
  double eta_h = 0, eta_Q = 0, eta_total = 0;
  double err_u = 0, err_p = 0, err_Qhp = 0;  // 0 when no exact solution
  double eff_index = 0;                       // eta_total / err_u
  double seconds = 0;
};

struct ConvergenceHistory {
  std::vector<HistoryRow> rows;
};

inline void write_history_csv(std::ostream& os, const ConvergenceHistory& hist) {
  os.precision(17);
  os << "iter,N,ndof_u,ndof_p,h_max,h_min,eta_h,eta_Q,eta_total,"
        "err_u,err_p,err_Qhp,eff_index,seconds\n";
  for (const auto& r : hist.rows)
    os << r.iter << ',' << r.n_elements << ',' << r.ndof_u << ',' << r.ndof_p << ','
       << r.h_max << ',' << r.h_min << ',' << r.eta_h << ',' << r.eta_Q << ','
       << r.eta_total << ',' << r.err_u << ',' << r.err_p << ',' << r.err_Qhp << ','
       << r.eff_index << ',' << r.seconds << '\n';
}

/// Called once per iteration after solve+estimate, before refinement.
using IterationObserver = std::function<void(int iter, const Mesh&, const DiscreteSolution&,
                                             const EstimatorReport&)>;

struct AdaptiveResult {
  ConvergenceHistory history;
  Mesh final_mesh;
};

inline AdaptiveResult run_adaptive(const Problem& problem, const AdaptiveConfig& config,
                                   const IterationObserver& observer = {}) {
  config.validate();
  Mesh mesh = build_initial_mesh(problem.domain);
  ConvergenceHistory hist;

  for (int iter = 0;; ++iter) {
    auto t0 = std::chrono::steady_clock::now();
    DiscreteSolution sol = solve_mfmfe(mesh, problem, config.schur);
    EstimatorReport rep = compute_report(mesh, sol, problem, config.include_hot);

    HistoryRow row;
    row.iter = iter;
    row.n_elements = mesh.num_elements();
    row.ndof_u = 2 * mesh.num_edges();
    row.ndof_p = mesh.num_elements();
    row.h_max = mesh.h_max();
    row.h_min = mesh.h_min();
    row.eta_h = rep.eta_h;
    row.eta_Q = rep.eta_Q;
    row.eta_total = rep.total();
    if (problem.has_exact()) {
      ExactErrors err = exact_errors(mesh, sol, problem);
      row.err_u = err.err_u;
      row.err_p = err.err_p;
      row.err_Qhp = err.err_Qhp;
      row.eff_index = (err.err_u > 0) ? rep.total() / err.err_u : 0.0;
    }
    row.seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    hist.rows.push_back(row);

    if (observer) observer(iter, mesh, sol, rep);

    if (iter + 1 >= config.max_iterations || mesh.num_elements() >= config.max_elements)
      break;

    MarkedSet marked;
    if (config.uniform) {
      marked.elements.resize(mesh.num_elements());
      std::iota(marked.elements.begin(), marked.elements.end(), 0);
    } else {
      marked = dorfler_mark(rep, config.theta);
      if (marked.elements.empty()) break;  // estimator vanished
    }
    mesh = refine(mesh, marked).mesh;
  }
  return {std::move(hist), std::move(mesh)};
}

}  // namespace mfmfe
