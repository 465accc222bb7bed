// Command-line driver: single solves, adaptive runs, and the self-audit
// suite. Exit codes: 0 ok, 1 usage, 2 bad configuration, 3 numerical
// failure or failed audit.

#include "mfmfe/adaptivity.hpp"
#include "mfmfe/benchmarks.hpp"
#include "mfmfe/estimator.hpp"
#include "mfmfe/matrix_market.hpp"
#include "mfmfe/postprocess.hpp"
#include "mfmfe/solver.hpp"
#include "mfmfe/vtk.hpp"

#include <CLI11.hpp>
#include <Eigen/Core>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <random>
#include <sstream>
#include <string>

namespace fs = std::filesystem;
using namespace mfmfe;

namespace {

constexpr const char* kVersion = "mfmfe 1.0.0";

struct RunConfig {
  std::string problem;
  std::string out_dir = "out";
  std::string solver = "mfmfe";  // mfmfe | mixed_exact
  double theta = 0.5;
  int max_iterations = 25;
  int max_elements = 100000;
  bool uniform = false;
  bool include_hot = true;
  int uniform_levels = 0;  // solve subcommand only

  void validate() const {
    if (solver != "mfmfe" && solver != "mixed_exact")
      throw CLI::ValidationError("solver", "must be 'mfmfe' or 'mixed_exact'");
    AdaptiveConfig ac;
    ac.theta = theta;
    ac.max_iterations = max_iterations;
    ac.max_elements = max_elements;
    ac.validate();  // throws std::invalid_argument on bad values
    if (uniform_levels < 0)
      throw CLI::ValidationError("uniform-levels", "must be non-negative");
  }
};

void add_common_options(CLI::App* cmd, RunConfig& cfg) {
  cmd->add_option("-p,--problem", cfg.problem,
                  "problem id: example71_r04 | example71_r01 | example72 | "
                  "linear_patch | constant_patch")
      ->required();
  cmd->add_option("-o,--out", cfg.out_dir, "output directory");
  cmd->add_option("--solver", cfg.solver, "mfmfe | mixed_exact");
  cmd->add_option("--theta", cfg.theta, "bulk marking parameter in (0,1]");
  cmd->add_option("--max-iterations", cfg.max_iterations, "iteration cap");
  cmd->add_option("--max-elements", cfg.max_elements, "element cap");
  cmd->add_flag("--uniform,!--adaptive", cfg.uniform, "mark every element each iteration");
  cmd->add_flag("--include-hot,!--no-include-hot", cfg.include_hot,
                "include high-order terms in the indicators");
  cmd->fallthrough();  // lets --config reach the root app after the subcommand
}

void write_manifest(const RunConfig& cfg, const std::string& command) {
  std::ofstream os(fs::path(cfg.out_dir) / "manifest");
  os.precision(17);
  os << "version = " << kVersion << '\n'
     << "command = " << command << '\n'
     << "problem = " << cfg.problem << '\n'
     << "solver = " << cfg.solver << '\n'
     << "theta = " << cfg.theta << '\n'
     << "max_iterations = " << cfg.max_iterations << '\n'
     << "max_elements = " << cfg.max_elements << '\n'
     << "uniform = " << (cfg.uniform ? "true" : "false") << '\n'
     << "include_hot = " << (cfg.include_hot ? "true" : "false") << '\n'
     << "uniform_levels = " << cfg.uniform_levels << '\n';
}

void make_output_dirs(const RunConfig& cfg) {
  fs::create_directories(fs::path(cfg.out_dir) / "meshes");
  fs::create_directories(fs::path(cfg.out_dir) / "solutions");
  fs::create_directories(fs::path(cfg.out_dir) / "reports");
}

std::string iter_tag(int iter) {
  std::ostringstream ss;
  ss << std::setw(6) << std::setfill('0') << iter;
  return ss.str();
}

void emit_iteration(const RunConfig& cfg, int iter, const Mesh& mesh,
                    const DiscreteSolution& sol, const EstimatorReport& rep) {
  const std::string tag = iter_tag(iter);
  {
    std::ofstream os(fs::path(cfg.out_dir) / "meshes" / ("mesh_" + tag + ".vtk"));
    write_mesh_vtk(os, mesh);
  }
  {
    std::ofstream os(fs::path(cfg.out_dir) / "solutions" / ("solution_" + tag + ".vtk"));
    std::vector<double> nodal = nodal_average_pressure(mesh, sol.p);
    write_solution_vtk(os, mesh, sol.u, sol.p, &rep, &nodal);
  }
  {
    std::ofstream os(fs::path(cfg.out_dir) / "reports" / ("estimator_" + tag + ".csv"));
    write_report_csv(os, mesh, rep);
  }
}

HistoryRow make_row(int iter, const Mesh& mesh, const DiscreteSolution& sol,
                    const EstimatorReport& rep, const Problem& pr, double seconds) {
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
  if (pr.has_exact()) {
    ExactErrors err = exact_errors(mesh, sol, pr);
    row.err_u = err.err_u;
    row.err_p = err.err_p;
    row.err_Qhp = err.err_Qhp;
    row.eff_index = (err.err_u > 0) ? rep.total() / err.err_u : 0.0;
  }
  row.seconds = seconds;
  return row;
}

void print_row(const HistoryRow& r) {
  std::cout.precision(17);
  std::cout << "iter=" << r.iter << " N=" << r.n_elements << " h_max=" << r.h_max
            << " eta_h=" << r.eta_h << " eta_Q=" << r.eta_Q
            << " eta_total=" << r.eta_total << " err_u=" << r.err_u
            << " eff=" << r.eff_index << '\n';
}

int cmd_solve(const RunConfig& cfg, const std::string& cmdline) {
  Problem pr = problem_by_name(cfg.problem);
  Mesh mesh = build_initial_mesh(pr.domain);
  for (int i = 0; i < cfg.uniform_levels; ++i) mesh = uniform_refine(mesh).mesh;

  auto t0 = std::chrono::steady_clock::now();
  DiscreteSolution sol = (cfg.solver == "mixed_exact") ? solve_mixed_exact(mesh, pr)
                                                       : solve_mfmfe(mesh, pr);
  EstimatorReport rep = compute_report(mesh, sol, pr, cfg.include_hot);
  double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();

  make_output_dirs(cfg);
  write_manifest(cfg, cmdline);
  emit_iteration(cfg, 0, mesh, sol, rep);
  {
    std::ofstream os(fs::path(cfg.out_dir) / "history.csv");
    ConvergenceHistory hist;
    hist.rows.push_back(make_row(0, mesh, sol, rep, pr, secs));
    write_history_csv(os, hist);
    print_row(hist.rows[0]);
  }
  return 0;
}

int cmd_adapt(const RunConfig& cfg, const std::string& cmdline) {
  Problem pr = problem_by_name(cfg.problem);
  AdaptiveConfig ac;
  ac.theta = cfg.theta;
  ac.max_iterations = cfg.max_iterations;
  ac.max_elements = cfg.max_elements;
  ac.uniform = cfg.uniform;
  ac.include_hot = cfg.include_hot;

  make_output_dirs(cfg);
  write_manifest(cfg, cmdline);
  AdaptiveResult res =
      run_adaptive(pr, ac, [&](int iter, const Mesh& mesh, const DiscreteSolution& sol,
                               const EstimatorReport& rep) {
        emit_iteration(cfg, iter, mesh, sol, rep);
      });
  {
    std::ofstream os(fs::path(cfg.out_dir) / "history.csv");
    write_history_csv(os, res.history);
  }
  for (const auto& row : res.history.rows) print_row(row);
  return 0;
}

// ---------------------------------------------------------------------------
// self-audit suite

struct AuditLog {
  int failures = 0;

  void record(const std::string& id, bool ok, const std::string& detail = "") {
    std::cout << (ok ? "[PASS] " : "[FAIL] ") << id;
    if (!detail.empty()) std::cout << " (" << detail << ')';
    std::cout << '\n';
    if (!ok) ++failures;
  }
};

void audit_structure(AuditLog& log) {
  Problem pr = example_71(0.4);
  Mesh mesh = build_initial_mesh(pr.domain);
  for (int i = 0; i < 2; ++i) mesh = uniform_refine(mesh).mesh;
  MfmfeSystem sys = assemble(mesh, pr);
  log.record("matrix_symmetry", sys.symmetry_defect <= 1e-13 * sys.a_max);
  log.record("vertex_block_structure", sys.off_block_max <= 1e-13 * sys.a_max);
  bool spd = true;
  try {
    detail::BlockInverse inv(sys);
  } catch (const std::exception&) {
    spd = false;
  }
  log.record("vertex_blocks_spd", spd);
  DiscreteSolution sol = eliminate_and_solve(sys);
  log.record("saddle_residual", sol.diag.saddle_residual < 1e-10);
  log.record("divergence_identity", sol.diag.div_identity_defect < 1e-10);
}

void audit_patches(AuditLog& log) {
  {
    Problem pr = constant_patch();
    Mesh mesh = uniform_refine(build_initial_mesh(pr.domain)).mesh;
    DiscreteSolution sol = solve_mfmfe(mesh, pr);
    EstimatorReport rep = compute_report(mesh, sol, pr);
    log.record("constant_patch_velocity", sol.u.coeffs().lpNorm<Eigen::Infinity>() < 1e-10);
    log.record("constant_patch_estimator", rep.total() < 1e-9);
  }
  {
    Problem pr = linear_patch();
    Mesh mesh = uniform_refine(build_initial_mesh(pr.domain)).mesh;
    DiscreteSolution sol = solve_mfmfe(mesh, pr);
    ExactErrors err = exact_errors(mesh, sol, pr);
    EstimatorReport rep = compute_report(mesh, sol, pr);
    log.record("linear_patch_velocity", err.err_u < 1e-10);
    log.record("linear_patch_eta_h", rep.eta_h < 1e-9);
  }
}

void audit_duality(AuditLog& log) {
  DomainSpec spec;
  spec.kind = DomainSpec::Kind::UserMesh;
  spec.vertices = {{0.13, -0.27}, {1.42, 0.31}, {0.33, 1.18}};
  spec.triangles = {{0, 1, 2}};
  Mesh mesh = build_initial_mesh(spec);
  VelocitySpace space(mesh, SpaceKind::BDM1);
  double worst = 0;
  for (int m = 0; m < 6; ++m)
    for (int j = 0; j < 3; ++j) {
      int e = mesh.element_edges(0)[j];
      const Edge& E = mesh.edge(e);
      Vec2 n = mesh.edge_normal(e);
      const int vz[2] = {E.v0, E.v1};
      for (int k = 0; k < 2; ++k) {
        double val = space.basis(0, m).eval(mesh.vertex(vz[k])).dot(n);
        double expect = (space.global_dof(0, m) == 2 * e + k) ? 1.0 : 0.0;
        worst = std::max(worst, std::abs(val - expect));
      }
    }
  log.record("basis_duality", worst < 1e-12);
}

void audit_sigma(AuditLog& log, bool perturb_weights) {
  // vertex rule must agree with the exact rule on P1 integrands; with a
  // deliberately perturbed weight the agreement breaks (mutation check)
  Mesh ref = build_initial_mesh(DomainSpec::reference_triangle());
  const ElementGeometry& g = ref.geometry(0);
  TensorField id = [](const Vec2&) { return Mat2::Identity(); };
  VectorField c = [](const Vec2&) { return Vec2(0.7, -0.3); };
  VectorField lin = [](const Vec2& x) { return Vec2(x.x() + 2 * x.y(), 1 - x.x()); };

  double q;
  if (perturb_weights) {
    QuadRule rule = triangle_vertex_rule();
    rule.weights[0] *= 1.01;
    double s = 0;
    const Mat2 DFinv = g.DF.inverse();
    for (std::size_t i = 0; i < rule.points.size(); ++i) {
      Vec2 x = g.map(rule.points[i]);
      Mat2 KKinv = mapped_tensor_inverse(g, id, x);
      Vec2 qh = g.J * (DFinv * c(x)), vh = g.J * (DFinv * lin(x));
      s += rule.weights[i] * vh.dot(KKinv * qh);
    }
    q = s;
  } else {
    q = vertex_quadrature_pairing(g, id, c, lin);
  }
  double e = exact_pairing(g, id, c, lin);
  log.record(perturb_weights ? "sigma_exactness_mutated" : "sigma_exactness_p1",
             perturb_weights ? std::abs(q - e) > 1e-10 : std::abs(q - e) < 1e-13);
}

void audit_postprocess(AuditLog& log) {
  for (const char* name : {"example71_r04", "example72"}) {
    Problem pr = problem_by_name(name);
    Mesh mesh = build_initial_mesh(pr.domain);
    for (int i = 0; i < 2; ++i) mesh = uniform_refine(mesh).mesh;
    AuxiliarySolution aux = solve_auxiliary_rt0(mesh, pr);
    PostprocessedPressure lh = build_l_h(mesh, aux);
    TraceAudit audit = audit_l_h(mesh, lh, pr, aux.p);
    log.record(std::string("lh_trace_continuity_") + name,
               audit.worst_interior < 1e-10 && audit.worst_dirichlet < 1e-10);
  }
}

void audit_marking(AuditLog& log) {
  std::mt19937 rng(5);
  std::uniform_real_distribution<double> d(0.0, 1.0);
  bool ok = true;
  for (int trial = 0; trial < 10 && ok; ++trial) {
    EstimatorReport rep;
    rep.eta_sq.resize(40);
    for (double& v : rep.eta_sq) v = d(rng);
    double theta = 0.2 + 0.6 * d(rng);
    double total = std::accumulate(rep.eta_sq.begin(), rep.eta_sq.end(), 0.0);
    MarkedSet m = dorfler_mark(rep, theta);
    double acc = 0, smallest = 1e300;
    for (int t : m.elements) {
      acc += rep.eta_sq[t];
      smallest = std::min(smallest, rep.eta_sq[t]);
    }
    if (acc < theta * total - 1e-12) ok = false;
    if (acc - smallest >= theta * total) ok = false;
  }
  log.record("marking_minimality", ok);
}

int cmd_verify() {
  AuditLog log;
  audit_structure(log);
  audit_patches(log);
  audit_duality(log);
  audit_sigma(log, false);
  audit_sigma(log, true);
  audit_postprocess(log);
  audit_marking(log);
  if (log.failures > 0) {
    std::cout << log.failures << " audit(s) failed\n";
    return 3;
  }
  std::cout << "all audits passed\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  if (const char* env = std::getenv("MFMFE_MAX_THREADS"))
    Eigen::setNbThreads(std::max(1, std::atoi(env)));

  CLI::App app{"multipoint flux mixed FEM driver"};
  app.require_subcommand(1);
  // key = value file with a [solve] or [adapt] section per subcommand
  app.set_config("--config", "", "configuration file ([solve]/[adapt] sections, key = value)");
  app.allow_config_extras(CLI::config_extras_mode::error);

  RunConfig solve_cfg, adapt_cfg;
  CLI::App* solve = app.add_subcommand("solve", "single solve on a (uniformly refined) mesh");
  add_common_options(solve, solve_cfg);
  solve->add_option("--uniform-levels", solve_cfg.uniform_levels,
                    "uniform refinements before solving");

  CLI::App* adapt = app.add_subcommand("adapt", "adaptive solve-estimate-mark-refine run");
  add_common_options(adapt, adapt_cfg);

  CLI::App* verify = app.add_subcommand("verify", "run the self-audit suite");

  std::string cmdline;
  for (int i = 0; i < argc; ++i) {
    if (i) cmdline += ' ';
    cmdline += argv[i];
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ConfigError& e) {
    std::cerr << "configuration error: " << e.what() << '\n';
    return 2;
  } catch (const CLI::ValidationError& e) {
    std::cerr << "configuration error: " << e.what() << '\n';
    return 2;
  } catch (const CLI::ExtrasError& e) {
    std::cerr << "configuration error: " << e.what() << '\n';
    return 2;
  } catch (const CLI::ParseError& e) {
    std::cerr << "usage error: " << e.what() << '\n';
    return 1;
  }

  try {
    if (solve->parsed()) {
      solve_cfg.validate();
      return cmd_solve(solve_cfg, cmdline);
    }
    if (adapt->parsed()) {
      adapt_cfg.validate();
      return cmd_adapt(adapt_cfg, cmdline);
    }
    if (verify->parsed()) return cmd_verify();
  } catch (const CLI::ValidationError& e) {
    std::cerr << "configuration error: " << e.what() << '\n';
    return 2;
  } catch (const std::invalid_argument& e) {
    std::cerr << "configuration error: " << e.what() << '\n';
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "numerical failure: " << e.what() << '\n';
    return 3;
  }
  return 1;
}
