// Command-line front end: distances, plans, interpolations, barycenters,
// stippling and cross-solver comparison on measure files (.json atoms,
// .csv / .pgm grids).  Exit codes: 0 converged, 1 usage or input error,
// 2 numerical non-convergence (partial result still printed).

#include <chrono>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "ot/dynamic.hpp"
#include "ot/error.hpp"
#include "ot/heat.hpp"
#include "ot/io.hpp"
#include "ot/lp.hpp"
#include "ot/measures.hpp"
#include "ot/oracle1d.hpp"
#include "ot/semidiscrete.hpp"
#include "ot/sinkhorn.hpp"

namespace {

using nlohmann::json;

constexpr int kOk = 0;
constexpr int kUsage = 1;
constexpr int kNoConverge = 2;

// All floating output is rounded to 12 significant digits so regression
// diffs stay meaningful across platforms.
std::string fmt12(double v) {
  std::ostringstream os;
  os << std::setprecision(12) << v;
  return os.str();
}

double round12(double v) { return std::stod(fmt12(v)); }

json jnum(double v) { return json(round12(v)); }

json jvec(const ot::Vector& v) {
  json arr = json::array();
  for (ot::Index i = 0; i < v.size(); ++i) arr.push_back(jnum(v[i]));
  return arr;
}

// ---------------------------------------------------------------------
// Input loading

struct Input {
  std::string path;
  std::optional<ot::DiscreteMeasure> atoms;
  std::optional<ot::GridDensity> grid;

  bool isGrid() const { return grid.has_value(); }
  ot::Index dim() const { return grid ? grid->dim() : atoms->dim(); }
};

Input load_input(const std::string& path, const std::string& flag) {
  try {
    Input in;
    in.path = path;
    const auto dot = path.find_last_of('.');
    const std::string ext =
        dot == std::string::npos ? std::string() : path.substr(dot);
    if (ext == ".json") {
      in.atoms = ot::read_discrete_json(path);
    } else if (ext == ".csv" || ext == ".pgm") {
      in.grid = ot::read_grid_auto(path);
    } else {
      throw ot::InvalidInputError(
          path + ": unsupported measure format (want .json, .csv or .pgm)");
    }
    return in;
  } catch (const ot::Error&) {
    throw;
  } catch (const std::exception& e) {
    throw ot::InvalidInputError(flag + ": " + e.what());
  }
}

Input load_flagged(const std::string& path, const std::string& flag) {
  try {
    return load_input(path, flag);
  } catch (const ot::Error& e) {
    throw ot::InvalidInputError(flag + ": " + e.what());
  }
}

ot::DiscreteMeasure as_atoms(const Input& in) {
  return in.atoms ? *in.atoms : ot::grid_to_discrete(*in.grid);
}

void require_grids(const Input& a, const Input& b, const std::string& what) {
  if (!a.isGrid())
    throw ot::InvalidInputError(what + ": --a must be a grid file (.csv/.pgm)");
  if (!b.isGrid())
    throw ot::InvalidInputError(what + ": --b must be a grid file (.csv/.pgm)");
  if (a.grid->shape() != b.grid->shape())
    throw ot::DimensionError(what + ": --a and --b grid shapes differ");
  for (ot::Index d = 0; d < a.grid->dim(); ++d)
    if (std::abs(a.grid->extent()[d] - b.grid->extent()[d]) >
        1e-12 * (1.0 + a.grid->extent()[d]))
      throw ot::DimensionError(what + ": --a and --b grid extents differ");
}

double grid_diameter_sq(const ot::GridDensity& g) {
  double s = 0.0;
  for (ot::Index d = 0; d < g.dim(); ++d) s += g.extent()[d] * g.extent()[d];
  return s;
}

// ---------------------------------------------------------------------
// Method runners shared by `dist` and `compare`

struct Settings {
  double p = 2.0;
  double alpha = 0.01;
  bool relativeAlpha = false;
  bool logDomain = false;
  double tol = -1.0;  // <0: per-method default
  int maxIter = -1;
  int nt = 16;
  double r = 1.0;
  bool periodic = false;
};

struct MethodRun {
  std::string method;
  double value = 0.0;  // W_p distance estimate
  double cost = 0.0;   // raw objective the solver minimizes
  double seconds = 0.0;
  int iterations = 0;
  double residual = 0.0;
  bool converged = true;
  json extra = json::object();
};

class Stopwatch {
 public:
  Stopwatch() : begin_(std::chrono::steady_clock::now()) {}
  double seconds() const {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() -
                                         begin_)
        .count();
  }

 private:
  std::chrono::steady_clock::time_point begin_;
};

void check_lp_size(const ot::DiscreteMeasure& mu,
                   const ot::DiscreteMeasure& nu, const std::string& what) {
  if (mu.size() * nu.size() > 4000000)
    throw ot::InvalidInputError(
        what + ": instance too large (more than 4e6 cost entries)");
}

MethodRun run_lp(const Input& a, const Input& b, const Settings& s) {
  const ot::DiscreteMeasure mu = as_atoms(a);
  const ot::DiscreteMeasure nu = as_atoms(b);
  check_lp_size(mu, nu, "--method lp");
  Stopwatch clock;
  const ot::CostMatrix cost = ot::build_cost_matrix(mu, nu, s.p);
  const ot::LpResult lp = ot::solve_lp(mu, nu, cost);
  const ot::OptimalityReport rep = ot::verify_optimality(
      lp.plan, lp.duals, cost, mu.weights(), nu.weights());
  MethodRun out;
  out.method = "lp";
  out.cost = lp.plan.attainedCost;
  out.value = std::pow(std::max(out.cost, 0.0), 1.0 / s.p);
  out.seconds = clock.seconds();
  out.iterations = lp.pivots;
  out.residual = rep.dualityGap;
  out.converged = rep.optimal;
  out.extra = {{"duality_gap", jnum(rep.dualityGap)},
               {"pivots", lp.pivots},
               {"plan_entries", static_cast<int>(lp.plan.entries.size())}};
  return out;
}

MethodRun run_cdf1d(const Input& a, const Input& b, const Settings& s) {
  // Grid inputs are treated as atoms at cell centers, matching the other
  // discrete solvers bit for bit.
  if (a.dim() != 1 || b.dim() != 1)
    throw ot::UnsupportedError("--method cdf1d: inputs must be 1D");
  Stopwatch clock;
  const double value = ot::wp_quantile(as_atoms(a), as_atoms(b), s.p);
  MethodRun out;
  out.method = "cdf1d";
  out.value = value;
  out.cost = std::pow(value, s.p);
  out.seconds = clock.seconds();
  return out;
}

MethodRun run_sinkhorn(const Input& a, const Input& b, const Settings& s) {
  const ot::DiscreteMeasure mu = as_atoms(a);
  const ot::DiscreteMeasure nu = as_atoms(b);
  check_lp_size(mu, nu, "--method sinkhorn");
  Stopwatch clock;
  const ot::CostMatrix cost = ot::build_cost_matrix(mu, nu, s.p);
  const double alpha =
      s.relativeAlpha ? s.alpha * cost.c.maxCoeff() : s.alpha;
  ot::SinkhornOptions opt;
  if (s.tol > 0.0) opt.tol = s.tol;
  if (s.maxIter > 0) opt.maxIter = s.maxIter;
  bool logDomain = s.logDomain;
  std::optional<ot::SinkhornResult> res;
  if (!logDomain) {
    try {
      res = ot::sinkhorn(mu.weights(), nu.weights(), cost, alpha, opt);
    } catch (const ot::UnderflowError&) {
      logDomain = true;  // retry stably
    }
  }
  if (!res)
    res = ot::sinkhorn_log_domain(mu.weights(), nu.weights(), cost, alpha,
                                  opt);
  MethodRun out;
  out.method = "sinkhorn";
  out.cost = res->transportCost;
  out.value = std::pow(std::max(out.cost, 0.0), 1.0 / s.p);
  out.seconds = clock.seconds();
  out.iterations = res->state.iterations;
  out.residual = res->state.marginalError;
  out.converged = res->state.converged;
  out.extra = {{"alpha", jnum(alpha)},
               {"regularized_cost", jnum(res->regularizedCost)},
               {"marginal_error", jnum(res->state.marginalError)},
               {"log_domain", logDomain}};
  return out;
}

MethodRun run_conv(const Input& a, const Input& b, const Settings& s) {
  require_grids(a, b, "--method conv");
  Stopwatch clock;
  const double alpha =
      s.relativeAlpha ? s.alpha * grid_diameter_sq(*a.grid) : s.alpha;
  const ot::HeatOperator op(*a.grid, 0.5 * alpha);
  ot::ConvolutionalOptions opt;
  if (s.tol > 0.0) opt.tol = s.tol;
  if (s.maxIter > 0) opt.maxIter = s.maxIter;
  const ot::ConvolutionalResult res =
      ot::convolutional_sinkhorn(op, *a.grid, *b.grid, opt);
  MethodRun out;
  out.method = "conv";
  out.cost = std::max(res.transportCost, 0.0);
  out.value = std::sqrt(out.cost);
  out.seconds = clock.seconds();
  out.iterations = res.iterations;
  out.residual = res.marginalError;
  out.converged = res.converged;
  out.extra = {{"alpha", jnum(alpha)},
               {"marginal_error", jnum(res.marginalError)},
               {"regularized_objective", jnum(res.regularizedObjective)}};
  return out;
}

MethodRun run_conv_mesh(const std::string& meshPath, const std::string& aPath,
                        const std::string& bPath, const Settings& s) {
  const ot::MeshDensity ma = ot::read_mesh_off(meshPath, aPath);
  const ot::MeshDensity mb = ot::read_mesh_off(meshPath, bPath);
  Stopwatch clock;
  const double diam = ma.diameter();
  const double alpha = s.relativeAlpha ? s.alpha * diam * diam : s.alpha;
  const ot::HeatOperator op(ma, 0.5 * alpha);
  ot::ConvolutionalOptions opt;
  if (s.tol > 0.0) opt.tol = s.tol;
  if (s.maxIter > 0) opt.maxIter = s.maxIter;
  const ot::ConvolutionalResult res =
      ot::convolutional_sinkhorn(op, ma.density(), mb.density(), opt);
  MethodRun out;
  out.method = "conv";
  out.cost = std::max(res.transportCost, 0.0);
  out.value = std::sqrt(out.cost);
  out.seconds = clock.seconds();
  out.iterations = res.iterations;
  out.residual = res.marginalError;
  out.converged = res.converged;
  out.extra = {{"alpha", jnum(alpha)},
               {"mesh", meshPath},
               {"marginal_error", jnum(res.marginalError)},
               {"regularized_objective", jnum(res.regularizedObjective)}};
  return out;
}

MethodRun run_dynamic(const Input& a, const Input& b, const Settings& s) {
  require_grids(a, b, "--method dynamic");
  Stopwatch clock;
  ot::DynamicOptions opt;
  opt.nt = s.nt;
  opt.r = s.r;
  opt.periodic = s.periodic;
  if (s.tol > 0.0) opt.tol = s.tol;
  if (s.maxIter > 0) opt.maxIter = s.maxIter;
  const ot::DynamicResult res = ot::solve_dynamic(*a.grid, *b.grid, opt);
  MethodRun out;
  out.method = "dynamic";
  out.cost = std::max(res.w2sq, 0.0);
  out.value = std::sqrt(out.cost);
  out.seconds = clock.seconds();
  out.iterations = res.report.iterations;
  out.residual = res.report.constraintResidual;
  out.converged = res.report.converged;
  out.extra = {{"continuity_residual", jnum(res.report.continuityResidual)},
               {"dual_value", jnum(res.report.dualValue)},
               {"frame_mass_drift", jnum(res.report.maxFrameMassDrift)},
               {"stagnated", res.report.stagnated}};
  return out;
}

MethodRun run_beckmann(const Input& a, const Input& b, const Settings& s) {
  require_grids(a, b, "--method beckmann");
  Stopwatch clock;
  ot::BeckmannOptions opt;
  opt.r = s.r;
  opt.periodic = s.periodic;
  if (s.tol > 0.0) opt.tol = s.tol;
  if (s.maxIter > 0) opt.maxIter = s.maxIter;
  const ot::BeckmannResult res = ot::beckmann_w1(*a.grid, *b.grid, opt);
  MethodRun out;
  out.method = "beckmann";
  out.cost = res.w1;
  out.value = res.w1;  // W1 regardless of --p
  out.seconds = clock.seconds();
  out.iterations = res.report.iterations;
  out.residual = res.report.constraintResidual;
  out.converged = res.report.converged;
  out.extra = {{"dual_value", jnum(res.report.dualValue)}};
  return out;
}

MethodRun run_method(const std::string& method, const Input& a,
                     const Input& b, const Settings& s) {
  if (method == "lp") return run_lp(a, b, s);
  if (method == "cdf1d") return run_cdf1d(a, b, s);
  if (method == "sinkhorn") return run_sinkhorn(a, b, s);
  if (method == "conv") return run_conv(a, b, s);
  if (method == "dynamic") return run_dynamic(a, b, s);
  if (method == "beckmann") return run_beckmann(a, b, s);
  throw ot::InvalidInputError("--method: unknown method '" + method + "'");
}

json run_to_json(const MethodRun& r) {
  return {{"method", r.method},
          {"value", jnum(r.value)},
          {"cost", jnum(r.cost)},
          {"seconds", jnum(r.seconds)},
          {"iterations", r.iterations},
          {"residual", jnum(r.residual)},
          {"converged", r.converged},
          {"diagnostics", r.extra}};
}

void print_run_text(const MethodRun& r) {
  std::cout << "method " << r.method << "\n"
            << "value " << fmt12(r.value) << "\n"
            << "cost " << fmt12(r.cost) << "\n"
            << "iterations " << r.iterations << "\n"
            << "residual " << fmt12(r.residual) << "\n"
            << "converged " << (r.converged ? "yes" : "no") << "\n";
  for (const auto& [key, val] : r.extra.items())
    std::cout << key << " " << (val.is_number_float()
                                    ? fmt12(val.get<double>())
                                    : val.dump())
              << "\n";
}

// ---------------------------------------------------------------------
// Subcommand state

struct CommonArgs {
  bool jsonOut = false;
  int threads = 1;
};

struct DistArgs {
  std::string method = "lp";
  std::string aPath;
  std::string bPath;
  std::string meshPath;
  Settings settings;
};

struct PlanArgs {
  std::string method = "lp";
  std::string aPath;
  std::string bPath;
  double p = 2.0;
  std::string outPath;
};

struct CompareArgs {
  std::string aPath;
  std::string bPath;
  Settings settings;
  bool alphaGiven = false;
};

struct InterpolateArgs {
  std::string aPath;
  std::string bPath;
  int frames = 16;
  double r = 1.0;
  bool periodic = false;
  int iters = -1;
  double tol = -1.0;
  std::string outDir = ".";
  std::string reportPath;
};

struct BarycenterArgs {
  std::vector<std::string> inputs;
  std::vector<double> weights;
  double alpha = 0.01;
  bool relativeAlpha = true;
  std::string method = "conv";
  int iters = -1;
  std::string outPath;
};

struct StippleArgs {
  std::string densityPath;
  int n = 256;
  std::uint64_t seed = 1;
  int iters = 50;
  double tol = 1e-6;
  std::string outPath = "points.json";
  std::string svgPath;
};

struct SemidiscreteArgs {
  std::string sitesPath;
  std::string densityPath;
  std::string method = "newton";
  double tol = 1e-7;
  int iters = 500;
  std::string outPath;
};

// ---------------------------------------------------------------------
// Subcommands

int cmd_dist(const DistArgs& a, const CommonArgs& common) {
  MethodRun run;
  if (!a.meshPath.empty()) {
    if (a.method != "conv")
      throw ot::UnsupportedError("--mesh requires --method conv");
    run = run_conv_mesh(a.meshPath, a.aPath, a.bPath, a.settings);
  } else {
    const Input ia = load_flagged(a.aPath, "--a");
    const Input ib = load_flagged(a.bPath, "--b");
    run = run_method(a.method, ia, ib, a.settings);
  }
  if (common.jsonOut)
    std::cout << run_to_json(run).dump(2) << "\n";
  else
    print_run_text(run);
  return run.converged ? kOk : kNoConverge;
}

int cmd_plan(const PlanArgs& a, const CommonArgs& common) {
  if (a.method != "lp")
    throw ot::InvalidInputError("--method: plan export supports only 'lp'");
  const Input ia = load_flagged(a.aPath, "--a");
  const Input ib = load_flagged(a.bPath, "--b");
  const ot::DiscreteMeasure mu = as_atoms(ia);
  const ot::DiscreteMeasure nu = as_atoms(ib);
  check_lp_size(mu, nu, "--method lp");
  const ot::CostMatrix cost = ot::build_cost_matrix(mu, nu, a.p);
  const ot::LpResult lp = ot::solve_lp(mu, nu, cost);
  if (!a.outPath.empty()) ot::write_plan_csv(lp.plan, a.outPath);
  json out = {{"method", "lp"},
              {"cost", jnum(lp.plan.attainedCost)},
              {"entries", static_cast<int>(lp.plan.entries.size())},
              {"pivots", lp.pivots}};
  if (common.jsonOut) {
    json entries = json::array();
    for (const auto& e : lp.plan.entries)
      entries.push_back({{"i", e.i}, {"j", e.j}, {"mass", jnum(e.mass)}});
    out["plan"] = entries;
    std::cout << out.dump(2) << "\n";
  } else {
    std::cout << "cost " << fmt12(lp.plan.attainedCost) << "\n"
              << "entries " << lp.plan.entries.size() << "\n";
    if (a.outPath.empty())
      for (const auto& e : lp.plan.entries)
        std::cout << e.i << "," << e.j << "," << fmt12(e.mass) << "\n";
  }
  return kOk;
}

int cmd_compare(const CompareArgs& a, const CommonArgs& common) {
  const Input ia = load_flagged(a.aPath, "--a");
  const Input ib = load_flagged(a.bPath, "--b");
  Settings s = a.settings;
  if (!a.alphaGiven) {  // scale-free default for a mixed table
    s.alpha = 0.01;
    s.relativeAlpha = true;
  }

  const bool grids = ia.isGrid() && ib.isGrid() &&
                     ia.grid->shape() == ib.grid->shape();
  const bool oneD = ia.dim() == 1 && ib.dim() == 1;
  std::vector<std::string> methods;
  methods.push_back("lp");
  if (oneD) methods.push_back("cdf1d");
  methods.push_back("sinkhorn");
  if (grids && s.p == 2.0) methods.push_back("conv");
  if (grids && s.p == 2.0) methods.push_back("dynamic");
  if (grids && s.p == 1.0) methods.push_back("beckmann");

  std::vector<MethodRun> runs;
  json errors = json::array();
  for (const std::string& m : methods) {
    try {
      runs.push_back(run_method(m, ia, ib, s));
    } catch (const ot::Error& e) {
      errors.push_back({{"method", m}, {"error", e.what()}});
    }
  }
  if (runs.size() < 2) {
    std::cerr << "error: fewer than 2 methods apply to this instance\n";
    return kUsage;
  }

  json rows = json::array();
  for (const MethodRun& r : runs) rows.push_back(run_to_json(r));
  json deviations = json::array();
  for (size_t i = 0; i < runs.size(); ++i)
    for (size_t j = i + 1; j < runs.size(); ++j) {
      const double scale = std::max(
          {std::abs(runs[i].value), std::abs(runs[j].value), 1e-12});
      deviations.push_back(
          {{"a", runs[i].method},
           {"b", runs[j].method},
           {"relative", jnum(std::abs(runs[i].value - runs[j].value) /
                             scale)}});
    }
  json out = {{"p", jnum(s.p)},
              {"rows", rows},
              {"deviations", deviations},
              {"skipped", errors}};
  if (common.jsonOut) {
    std::cout << out.dump(2) << "\n";
  } else {
    std::cout << std::left << std::setw(10) << "method" << std::setw(18)
              << "value" << std::setw(12) << "seconds" << std::setw(12)
              << "iterations" << std::setw(14) << "residual"
              << "converged\n";
    for (const MethodRun& r : runs)
      std::cout << std::left << std::setw(10) << r.method << std::setw(18)
                << fmt12(r.value) << std::setw(12) << fmt12(r.seconds)
                << std::setw(12) << r.iterations << std::setw(14)
                << fmt12(r.residual) << (r.converged ? "yes" : "no") << "\n";
    for (const auto& d : deviations)
      std::cout << d["a"].get<std::string>() << " vs "
                << d["b"].get<std::string>() << ": relative deviation "
                << fmt12(d["relative"].get<double>()) << "\n";
  }
  for (const MethodRun& r : runs)
    if (!r.converged) return kNoConverge;
  return kOk;
}

int cmd_interpolate(const InterpolateArgs& a, const CommonArgs& common) {
  const Input ia = load_flagged(a.aPath, "--a");
  const Input ib = load_flagged(a.bPath, "--b");
  require_grids(ia, ib, "interpolate");
  if (a.frames < 1)
    throw ot::InvalidInputError("--frames: need at least one time step");
  ot::DynamicOptions opt;
  opt.nt = a.frames;
  opt.r = a.r;
  opt.periodic = a.periodic;
  if (a.tol > 0.0) opt.tol = a.tol;
  if (a.iters > 0) opt.maxIter = a.iters;
  const ot::DynamicResult res = ot::solve_dynamic(*ia.grid, *ib.grid, opt);

  std::filesystem::create_directories(a.outDir);
  std::vector<std::string> files;
  for (size_t k = 0; k < res.interpolation.frames.size(); ++k) {
    char name[32];
    std::snprintf(name, sizeof(name), "frame_%04zu.pgm", k);
    const std::string path =
        (std::filesystem::path(a.outDir) / name).string();
    ot::write_grid_pgm(res.interpolation.frames[k], path);
    files.push_back(path);
  }

  json report = {
      {"w2sq", jnum(res.w2sq)},
      {"residuals",
       {{"constraint", jnum(res.report.constraintResidual)},
        {"continuity", jnum(res.report.continuityResidual)},
        {"frame_mass_drift", jnum(res.report.maxFrameMassDrift)}}},
      {"iterations", res.report.iterations},
      {"converged", res.report.converged},
      {"frames", files}};
  if (!a.reportPath.empty()) {
    std::ofstream out(a.reportPath);
    out << report.dump(2) << "\n";
  }
  if (common.jsonOut)
    std::cout << report.dump(2) << "\n";
  else
    std::cout << "w2sq " << fmt12(res.w2sq) << "\n"
              << "iterations " << res.report.iterations << "\n"
              << "constraint_residual "
              << fmt12(res.report.constraintResidual) << "\n"
              << "frames " << files.size() << "\n";
  return res.report.converged ? kOk : kNoConverge;
}

int cmd_barycenter(const BarycenterArgs& a, const CommonArgs& common) {
  if (a.inputs.size() < 1)
    throw ot::InvalidInputError("--input: need at least one input grid");
  std::vector<ot::GridDensity> grids;
  for (const std::string& path : a.inputs) {
    Input in = load_flagged(path, "--input");
    if (!in.isGrid())
      throw ot::InvalidInputError("--input: " + path +
                                  " is not a grid file (.csv/.pgm)");
    grids.push_back(std::move(*in.grid));
  }
  for (size_t k = 1; k < grids.size(); ++k)
    if (grids[k].shape() != grids[0].shape())
      throw ot::DimensionError("--input: grids must share one shape");

  ot::Vector lambda;
  if (a.weights.empty()) {
    lambda = ot::Vector::Constant(static_cast<ot::Index>(grids.size()),
                                  1.0 / static_cast<double>(grids.size()));
  } else {
    if (a.weights.size() != grids.size())
      throw ot::InvalidInputError(
          "--weights: need exactly one weight per --input");
    lambda = Eigen::Map<const ot::Vector>(
        a.weights.data(), static_cast<ot::Index>(a.weights.size()));
    const double sum = lambda.sum();
    if (!(sum > 0.0) || (lambda.array() < 0.0).any())
      throw ot::InvalidInputError(
          "--weights: weights must be nonnegative with positive sum");
    lambda /= sum;
  }

  const double alpha = a.relativeAlpha
                           ? a.alpha * grid_diameter_sq(grids[0])
                           : a.alpha;
  ot::Vector bary;
  int usedIters = a.iters > 0 ? a.iters : 2000;
  if (a.method == "conv") {
    const ot::HeatOperator op(grids[0], 0.5 * alpha);
    std::vector<ot::Vector> densities;
    for (const ot::GridDensity& g : grids) densities.push_back(g.values());
    bary = ot::convolutional_barycenter(op, densities, lambda, usedIters);
  } else if (a.method == "sinkhorn") {
    const ot::Index n = grids[0].cellCount();
    check_lp_size(ot::grid_to_discrete(grids[0]),
                  ot::grid_to_discrete(grids[0]), "--method sinkhorn");
    ot::Matrix centers(n, grids[0].dim());
    for (ot::Index c = 0; c < n; ++c)
      centers.row(c) = grids[0].center(c).transpose();
    ot::CostMatrix cost;
    cost.c.resize(n, n);
    for (ot::Index i = 0; i < n; ++i)
      for (ot::Index j = 0; j < n; ++j)
        cost.c(i, j) = (centers.row(i) - centers.row(j)).squaredNorm();
    cost.exponent = 2.0;
    const double vol = grids[0].cellVolume();
    std::vector<ot::Vector> histograms;
    for (const ot::GridDensity& g : grids)
      histograms.push_back(g.values() * vol);
    const ot::Vector hist = ot::entropic_barycenter(histograms, lambda, cost,
                                                    alpha, usedIters);
    bary = hist / vol;
  } else {
    throw ot::InvalidInputError("--method: barycenter supports conv|sinkhorn");
  }

  const ot::GridDensity result(grids[0].shape(), bary, grids[0].extent());
  if (!a.outPath.empty()) {
    const auto dot = a.outPath.find_last_of('.');
    const std::string ext =
        dot == std::string::npos ? std::string() : a.outPath.substr(dot);
    if (ext == ".pgm")
      ot::write_grid_pgm(result, a.outPath);
    else
      ot::write_grid_csv(result, a.outPath);
  }
  json out = {{"inputs", static_cast<int>(grids.size())},
              {"weights", jvec(lambda)},
              {"alpha", jnum(alpha)},
              {"method", a.method},
              {"total_mass", jnum(result.totalMass())}};
  if (!a.outPath.empty()) out["out"] = a.outPath;
  if (common.jsonOut)
    std::cout << out.dump(2) << "\n";
  else
    std::cout << "barycenter of " << grids.size() << " inputs written"
              << (a.outPath.empty() ? " (no --out given)" : " to " + a.outPath)
              << "\n";
  return kOk;
}

void write_svg(const std::string& path, const ot::DiscreteMeasure& points,
               const std::vector<double>& extent) {
  std::ofstream out(path);
  if (!out)
    throw ot::InvalidInputError("--svg: cannot open " + path +
                                " for writing");
  const double ex = extent[0];
  const double ey = extent.size() > 1 ? extent[1] : extent[0] * 0.05;
  const double radius = 0.004 * std::max(ex, ey);
  out << "<svg xmlns=\"http://www.w3.org/2000/svg\" viewBox=\"0 0 "
      << fmt12(ex) << " " << fmt12(ey) << "\">\n";
  for (ot::Index i = 0; i < points.size(); ++i) {
    const double x = points.points()(i, 0);
    const double y =
        points.dim() > 1 ? ey - points.points()(i, 1) : 0.5 * ey;
    out << "  <circle cx=\"" << fmt12(x) << "\" cy=\"" << fmt12(y)
        << "\" r=\"" << fmt12(radius) << "\"/>\n";
  }
  out << "</svg>\n";
}

int cmd_stipple(const StippleArgs& a, const CommonArgs& common) {
  const Input in = load_flagged(a.densityPath, "--density");
  if (!in.isGrid() || in.grid->dim() != 2)
    throw ot::InvalidInputError("--density: need a 2D grid file (.csv/.pgm)");
  const ot::StippleResult res =
      ot::lloyd_stipple(*in.grid, a.n, a.iters, a.tol, a.seed);
  ot::write_discrete_json(res.points, a.outPath);
  if (!a.svgPath.empty()) {
    std::vector<double> extent(in.grid->extent().begin(),
                               in.grid->extent().end());
    write_svg(a.svgPath, res.points, extent);
  }
  json history = json::array();
  for (double v : res.w2sqHistory) history.push_back(jnum(v));
  json out = {{"n", a.n},
              {"seed", a.seed},
              {"outer_iterations", res.outerIterations},
              {"max_move", jnum(res.maxMove)},
              {"w2sq_history", history},
              {"points", a.outPath}};
  if (common.jsonOut)
    std::cout << out.dump(2) << "\n";
  else
    std::cout << "stipple points " << a.n << " -> " << a.outPath
              << " (outer iterations " << res.outerIterations
              << ", final w2sq "
              << fmt12(res.w2sqHistory.empty() ? 0.0
                                               : res.w2sqHistory.back())
              << ")\n";
  return kOk;
}

int cmd_semidiscrete(const SemidiscreteArgs& a, const CommonArgs& common) {
  const ot::DiscreteMeasure sites = [&] {
    try {
      return ot::read_discrete_json(a.sitesPath);
    } catch (const std::exception& e) {
      throw ot::InvalidInputError(std::string("--sites: ") + e.what());
    }
  }();
  if (sites.dim() != 2)
    throw ot::InvalidInputError("--sites: sites must be 2D points");
  const Input in = load_flagged(a.densityPath, "--density");
  if (!in.isGrid() || in.grid->dim() != 2)
    throw ot::InvalidInputError("--density: need a 2D grid file (.csv/.pgm)");
  ot::SemidiscreteOptions opt;
  opt.tol = a.tol;
  opt.maxIter = a.iters;
  if (a.method == "newton")
    opt.method = ot::SemidiscreteMethod::newton;
  else if (a.method == "ascent")
    opt.method = ot::SemidiscreteMethod::ascent;
  else
    throw ot::InvalidInputError("--method: expected newton|ascent");
  const ot::SemidiscreteResult res =
      ot::solve_semidiscrete(sites.points(), sites.weights(), *in.grid, opt);

  json cells = json::array();
  for (const auto& cell : res.diagram.cells) {
    json poly = json::array();
    for (const auto& v : cell)
      poly.push_back({jnum(v.x()), jnum(v.y())});
    cells.push_back(poly);
  }
  json out = {{"phi", jvec(res.phi)},
              {"masses", jvec(res.masses)},
              {"w2sq", jnum(res.w2sq)},
              {"iterations", res.iterations},
              {"converged", res.converged},
              {"gradient_norm", jnum(res.gradientNorm)},
              {"used_fallback", res.usedFallback},
              {"cells", cells}};
  if (!a.outPath.empty()) {
    std::ofstream file(a.outPath);
    if (!file)
      throw ot::InvalidInputError("--out: cannot open " + a.outPath);
    file << out.dump(2) << "\n";
  }
  if (common.jsonOut || a.outPath.empty())
    std::cout << out.dump(2) << "\n";
  else
    std::cout << "w2sq " << fmt12(res.w2sq) << "\niterations "
              << res.iterations << "\nconverged "
              << (res.converged ? "yes" : "no") << "\n";
  return res.converged ? kOk : kNoConverge;
}

void add_settings_options(CLI::App* cmd, Settings* s) {
  cmd->add_option("--p", s->p, "ground cost exponent p >= 1 (default 2)")
      ->envname("OT_P");
  cmd->add_option("--alpha", s->alpha,
                  "entropic regularization strength (cost units; default "
                  "0.01)")
      ->envname("OT_ALPHA");
  cmd->add_flag("--relative-alpha", s->relativeAlpha,
                "interpret --alpha as a fraction of max cost (sinkhorn) or "
                "squared diameter (conv)");
  cmd->add_flag("--log-domain", s->logDomain,
                "force the log-domain sinkhorn updates");
  cmd->add_option("--tol", s->tol, "convergence tolerance (method default)")
      ->envname("OT_TOL");
  cmd->add_option("--max-iters", s->maxIter,
                  "iteration budget (method default)")
      ->envname("OT_MAX_ITERS");
  cmd->add_option("--nt", s->nt, "dynamic solver: time steps (default 16)")
      ->envname("OT_NT");
  cmd->add_option("--r", s->r,
                  "dynamic/beckmann solver: augmentation strength (default 1)")
      ->envname("OT_R");
  cmd->add_flag("--periodic", s->periodic,
                "dynamic/beckmann solver: periodic spatial box");
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"optimal transport toolkit"};
  app.require_subcommand(1);
  app.fallthrough(true);

  CommonArgs common;
  app.add_flag("--json", common.jsonOut, "machine-readable JSON output");
  app.add_option("--threads", common.threads,
                 "solver threads (default 1 for determinism)")
      ->envname("OT_THREADS");

  DistArgs dist;
  CLI::App* distCmd =
      app.add_subcommand("dist", "transport distance between two measures");
  distCmd->add_option("--method", dist.method,
                      "lp|cdf1d|sinkhorn|conv|dynamic|beckmann")
      ->required();
  distCmd->add_option("--a", dist.aPath, "first measure file")->required();
  distCmd->add_option("--b", dist.bPath, "second measure file")->required();
  distCmd->add_option(
      "--mesh", dist.meshPath,
      "triangle mesh (.off); --a/--b become per-vertex density CSVs");
  add_settings_options(distCmd, &dist.settings);

  PlanArgs plan;
  CLI::App* planCmd =
      app.add_subcommand("plan", "optimal coupling as i,j,mass triples");
  planCmd->add_option("--method", plan.method, "lp");
  planCmd->add_option("--a", plan.aPath, "first measure file")->required();
  planCmd->add_option("--b", plan.bPath, "second measure file")->required();
  planCmd->add_option("--p", plan.p, "ground cost exponent (default 2)");
  planCmd->add_option("--out", plan.outPath, "write CSV here");

  CompareArgs compare;
  CLI::App* compareCmd = app.add_subcommand(
      "compare", "run every applicable method on one instance");
  compareCmd->add_option("--a", compare.aPath, "first measure file")
      ->required();
  compareCmd->add_option("--b", compare.bPath, "second measure file")
      ->required();
  add_settings_options(compareCmd, &compare.settings);

  InterpolateArgs interp;
  CLI::App* interpCmd = app.add_subcommand(
      "interpolate", "displacement interpolation frames between two grids");
  interpCmd->add_option("--a", interp.aPath, "start grid")->required();
  interpCmd->add_option("--b", interp.bPath, "end grid")->required();
  interpCmd->add_option("--frames", interp.frames,
                        "time steps nt (writes nt+1 frames; default 16)")
      ->envname("OT_NT");
  interpCmd->add_option("--r", interp.r, "augmentation strength (default 1)")
      ->envname("OT_R");
  interpCmd->add_flag("--periodic", interp.periodic, "periodic spatial box");
  interpCmd->add_option("--iters", interp.iters, "iteration budget");
  interpCmd->add_option("--tol", interp.tol, "convergence tolerance");
  interpCmd->add_option("--out-dir", interp.outDir,
                        "directory for frame_%04d.pgm (default .)");
  interpCmd->add_option("--report", interp.reportPath,
                        "also write the JSON report to this file");

  BarycenterArgs bary;
  CLI::App* baryCmd = app.add_subcommand(
      "barycenter", "weighted entropic barycenter of grids");
  baryCmd->add_option("--input", bary.inputs, "input grid (repeatable)")
      ->required();
  baryCmd->add_option("--weights", bary.weights,
                      "comma-separated weights, one per input")
      ->delimiter(',');
  baryCmd->add_option("--alpha", bary.alpha,
                      "regularization strength (default 0.01 relative)")
      ->envname("OT_ALPHA");
  baryCmd->add_flag("!--absolute-alpha", bary.relativeAlpha,
                    "treat --alpha as absolute cost units");
  baryCmd->add_option("--method", bary.method, "conv|sinkhorn (default conv)");
  baryCmd->add_option("--iters", bary.iters, "iteration budget");
  baryCmd->add_option("--out", bary.outPath, "output grid (.csv or .pgm)");

  StippleArgs stipple;
  CLI::App* stippleCmd = app.add_subcommand(
      "stipple", "blue-noise point set by Lloyd iteration on power cells");
  stippleCmd->add_option("--density", stipple.densityPath, "2D grid file")
      ->required();
  stippleCmd->add_option("--n", stipple.n, "number of points")->required();
  stippleCmd->add_option("--seed", stipple.seed, "RNG seed (deterministic)")
      ->envname("OT_SEED");
  stippleCmd->add_option("--iters", stipple.iters,
                         "max Lloyd iterations (default 50)");
  stippleCmd->add_option("--tol", stipple.tol,
                         "stop when max centroid move <= tol (default 1e-6)");
  stippleCmd->add_option("--out", stipple.outPath,
                         "points JSON (default points.json)");
  stippleCmd->add_option("--svg", stipple.svgPath, "also write an SVG scatter");

  SemidiscreteArgs semi;
  CLI::App* semiCmd = app.add_subcommand(
      "semidiscrete", "power-diagram transport from a density to sites");
  semiCmd->add_option("--sites", semi.sitesPath,
                      "sites JSON (weights = target masses)")
      ->required();
  semiCmd->add_option("--density", semi.densityPath, "2D grid file")
      ->required();
  semiCmd->add_option("--method", semi.method, "newton|ascent");
  semiCmd->add_option("--tol", semi.tol, "gradient tolerance (default 1e-7)");
  semiCmd->add_option("--iters", semi.iters, "iteration budget");
  semiCmd->add_option("--out", semi.outPath, "write the JSON result here");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kUsage;
  }

  compare.alphaGiven = compareCmd->count("--alpha") > 0 ||
                       std::getenv("OT_ALPHA") != nullptr;
  Eigen::setNbThreads(std::max(1, common.threads));

  try {
    if (distCmd->parsed()) return cmd_dist(dist, common);
    if (planCmd->parsed()) return cmd_plan(plan, common);
    if (compareCmd->parsed()) return cmd_compare(compare, common);
    if (interpCmd->parsed()) return cmd_interpolate(interp, common);
    if (baryCmd->parsed()) return cmd_barycenter(bary, common);
    if (stippleCmd->parsed()) return cmd_stipple(stipple, common);
    if (semiCmd->parsed()) return cmd_semidiscrete(semi, common);
  } catch (const ot::UnderflowError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kNoConverge;
  } catch (const ot::StateError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kNoConverge;
  } catch (const ot::Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kUsage;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kUsage;
  }
  return kUsage;
}
