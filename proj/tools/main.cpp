// mfgc: command-line front end.
//
// Exit codes: 0 ok, 1 input error, 2 hypothesis violation or refused
// assumption, 3 no convergence, 4 verification verdict false.

#include <CLI11.hpp>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <json.hpp>
#include <optional>
#include <sstream>

#include "mfgc/diagnostics.hpp"
#include "mfgc/error.hpp"
#include "mfgc/io.hpp"
#include "mfgc/model.hpp"
#include "mfgc/picard.hpp"
#include "mfgc/varsolve.hpp"
#include "mfgc/verify.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace mfgc;

namespace {

constexpr const char* kVersion = "mfgc 1.0.0";
constexpr int kPowerIterationSeed = 12345;

enum Exit { kOk = 0, kInput = 1, kHypothesis = 2, kNoConvergence = 3, kVerdictFalse = 4 };

int exit_code(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::HypothesisViolation:
    case ErrorKind::AssumptionRefused:
      return kHypothesis;
    case ErrorKind::NoConvergence:
      return kNoConvergence;
    default:
      return kInput;
  }
}

void print(const json& j) { std::cout << j.dump(2) << '\n'; }

std::vector<double> parse_list(const std::string& text) {
  std::vector<double> out;
  std::string t = text;
  for (char& ch : t)
    if (ch == ',') ch = ' ';
  std::istringstream is(t);
  std::string tok;
  while (is >> tok) {
    std::size_t used = 0;
    double v = 0.0;
    try {
      v = std::stod(tok, &used);
    } catch (const std::exception&) {
      used = 0;
    }
    if (used != tok.size()) throw Error(ErrorKind::ConfigParse, "'" + tok + "' is not a number");
    out.push_back(v);
  }
  return out;
}

// Throws HypothesisViolation naming the first failing hypothesis.
CaseInfo require_hypotheses(const ProblemSpec& spec) {
  const AssumptionReport rep = check_assumptions(spec);
  if (!rep.all_passed()) throw Error(ErrorKind::HypothesisViolation, rep.first_failure());
  return classify_exponents(spec);
}

json hypotheses_json(const AssumptionReport& rep) {
  json arr = json::array();
  for (const auto& c : rep.checks) arr.push_back({{"name", c.name}, {"passed", c.passed}, {"message", c.message}});
  return arr;
}

int cmd_classify(const std::string& config) {
  const ProblemSpec spec = load_config(config);
  const AssumptionReport rep = check_assumptions(spec);
  json out = {{"hypotheses", hypotheses_json(rep)}};
  if (!rep.all_passed()) {
    out["passed"] = false;
    print(out);
    std::cerr << rep.first_failure() << '\n';
    return kHypothesis;
  }
  out["case_info"] = to_json(classify_exponents(spec));
  out["passed"] = true;
  print(out);
  return kOk;
}

struct SolveArgs {
  std::string config;
  std::string method = "pd";
  std::string out = "out";
  std::uint64_t seed = 0;
  std::optional<double> tol;
  std::optional<int> max_iter;
};

constexpr double kDefaultPdTol = 1e-5;

int cmd_solve(const SolveArgs& a) {
  const ProblemSpec spec = load_config(a.config);
  const CaseInfo info = require_hypotheses(spec);
  const fs::path dir(a.out);
  fs::create_directories(dir);

  const auto t0 = std::chrono::steady_clock::now();
  Solution sol;
  ConvergenceLog log;
  bool converged = false;
  int iterations = 0;
  json options;
  std::string solver;
  if (a.method == "pd") {
    SolverOptions o;
    o.tol_gap = a.tol.value_or(kDefaultPdTol);
    if (a.max_iter) o.max_iter = *a.max_iter;
    std::optional<Solution> init;
    if (a.seed != 0) init = random_initial_guess(spec, a.seed);
    SolveResult r = solve_primal_dual(spec, o, init);
    sol = std::move(r.solution);
    log = std::move(r.log);
    converged = r.converged;
    iterations = r.iterations;
    options = to_json(o);
    options["tau"] = r.tau;
    options["sigma"] = r.sigma;
    options["operator_norm"] = r.op_norm;
    solver = "primal_dual";
  } else if (a.method == "picard") {
    PicardOptions o;
    if (a.tol) o.tol_fixed_point = *a.tol;
    if (a.max_iter) o.max_outer = *a.max_iter;
    PicardResult r = picard_iterate(spec, o);
    sol = std::move(r.solution);
    converged = r.converged;
    iterations = r.iterations;
    options = {{"scheme", o.scheme == TimeScheme::Implicit ? "implicit" : "explicit"},
               {"schedule", o.schedule == DampingSchedule::Harmonic ? "harmonic" : "constant"},
               {"damping", o.damping},
               {"max_outer", o.max_outer},
               {"tol_fixed_point", o.tol_fixed_point},
               {"sweep_tol", o.sweep_tol},
               {"max_sweeps", o.max_sweeps},
               {"last_change", r.last_change}};
    solver = "picard";
  } else {
    throw Error(ErrorKind::ConfigParse, "unknown method '" + a.method + "' (pd or picard)");
  }
  const double wall = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();

  const ResidualReport rep = residual_report(sol, spec);
  if (log.entries.empty()) {
    ConvergenceEntry e;
    e.iter = iterations;
    e.B = rep.primal_value;
    e.D = rep.duality_gap - rep.primal_value;
    e.gap = rep.duality_gap;
    e.fp_res = rep.fp_residual;
    e.price_res = rep.price_residual;
    log.entries.push_back(e);
  }
  write_solution(dir, sol);
  {
    std::ofstream f(dir / "log.csv");
    log.write_csv(f);
  }
  json manifest = {{"version", kVersion},
                   {"solver", solver},
                   {"config_path", fs::absolute(a.config).string()},
                   {"config", spec_to_json(spec)},
                   {"case_info", to_json(info)},
                   {"options", options},
                   {"seed", a.seed},
                   {"power_iteration_seed", kPowerIterationSeed},
                   {"iterations", iterations},
                   {"converged", converged},
                   {"wall_time_s", wall},
                   {"residuals", to_json(rep)},
                   {"artifacts", {"u.csv", "m.csv", "w.csv", "P.csv", "gamma.csv", "log.csv", "manifest.json"}}};
  {
    std::ofstream f(dir / "manifest.json");
    f << manifest.dump(2) << '\n';
  }
  print({{"solver", solver}, {"converged", converged}, {"iterations", iterations}, {"residuals", to_json(rep)}});
  if (!converged) {
    std::cerr << "no convergence after " << iterations << " iterations; artifacts written to " << dir.string() << '\n';
    return kNoConvergence;
  }
  return kOk;
}

ProblemSpec spec_of_solution(const fs::path& dir) {
  std::ifstream in(dir / "manifest.json");
  if (!in) throw Error(ErrorKind::MissingArtifact, "missing '" + (dir / "manifest.json").string() + "'");
  json j;
  try {
    in >> j;
  } catch (const json::exception& e) {
    throw Error(ErrorKind::ConfigParse, std::string("manifest.json: ") + e.what());
  }
  if (!j.contains("config")) throw Error(ErrorKind::ConfigParse, "manifest.json has no config echo");
  return spec_from_json(j["config"]);
}

int cmd_verify(const std::string& solution, double tol) {
  const ProblemSpec spec = spec_of_solution(solution);
  const Solution sol = read_solution(solution, spec);
  const Verdict v = weak_solution_report(sol, spec, tol);
  json out = to_json(v.report);
  out["verdict"] = v.passed;
  out["tol"] = tol;
  if (!v.passed) out["failure"] = v.failure;
  print(out);
  return v.passed ? kOk : kVerdictFalse;
}

int cmd_diagnose(const std::string& solution, const std::optional<std::string>& shifts, const std::optional<std::string>& deltas,
                 double norm_eps, const std::optional<std::string>& out_dir) {
  const ProblemSpec spec = spec_of_solution(solution);
  const Solution sol = read_solution(solution, spec);
  const double hx = spec.grid.hx();
  const std::vector<double> eps = shifts ? parse_list(*shifts) : std::vector<double>{0.02, 0.04, 0.08};
  const std::vector<double> dl = deltas ? parse_list(*deltas) : std::vector<double>{hx, 2 * hx, 4 * hx};
  const RegularityRecord rec = regularity_record(sol, spec, eps, dl, norm_eps, shifts.has_value());
  const fs::path dir = out_dir ? fs::path(*out_dir) : fs::path(solution);
  fs::create_directories(dir);
  {
    std::ofstream f(dir / "diagnostics.csv");
    f << "kind,shift,sum\n";
    for (const auto& [e, v] : rec.time_shift_sums) f << "time," << format_double(e) << ',' << format_double(v) << '\n';
    for (const auto& [d, v] : rec.space_shift_sums) f << "space," << format_double(d) << ',' << format_double(v) << '\n';
  }
  const json j = to_json(rec);
  {
    std::ofstream f(dir / "regularity.json");
    f << j.dump(2) << '\n';
  }
  print(j);
  return kOk;
}

int cmd_probe(const std::string& config, int inits, std::uint64_t seed, double tol, std::optional<int> max_iter) {
  const ProblemSpec spec = load_config(config);
  require_hypotheses(spec);
  SolverOptions o;
  o.tol_gap = tol;
  if (max_iter) o.max_iter = *max_iter;
  const UniquenessResult r = uniqueness_probe(spec, o, inits, seed);
  print({{"inits", inits},
         {"seed", seed},
         {"solves", r.solves},
         {"all_converged", r.all_converged},
         {"max_m_distance", r.max_m_distance},
         {"max_P_distance", r.max_P_distance},
         {"max_u_distance", r.max_u_distance}});
  return r.all_converged ? kOk : kNoConvergence;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Mean field games of controls: solvers, certification and diagnostics"};
  app.set_version_flag("--version", kVersion);
  app.require_subcommand(1);

  std::string classify_config;
  auto* classify = app.add_subcommand("classify", "Check hypotheses and print the exponent case");
  classify->add_option("config", classify_config, "Config file")->required();

  SolveArgs sa;
  double solve_tol = 0.0;
  int solve_max = 0;
  auto* solve = app.add_subcommand("solve", "Solve and write artifacts");
  solve->add_option("config", sa.config, "Config file")->required();
  solve->add_option("--method", sa.method, "pd or picard")->check(CLI::IsMember({"pd", "picard"}));
  solve->add_option("--out", sa.out, "Output directory");
  solve->add_option("--seed", sa.seed, "Initialization seed (0: deterministic default guess)");
  auto* tol_opt = solve->add_option("--tol", solve_tol, "pd: gap and FP tolerance (1e-5); picard: fixed-point tolerance (2e-3)");
  auto* max_opt = solve->add_option("--max-iter", solve_max, "Iteration budget")->check(CLI::PositiveNumber);

  std::string verify_dir;
  double verify_tol = 1e-3;
  auto* verify = app.add_subcommand("verify", "Certify a solution directory");
  verify->add_option("--solution", verify_dir, "Solution directory")->required();
  verify->add_option("--tol", verify_tol, "Residual tolerance")->capture_default_str();

  std::string diag_dir, diag_shifts, diag_deltas, diag_out;
  double norm_eps = 0.1;
  auto* diagnose = app.add_subcommand("diagnose", "Regularity norms and shift-quotient sums");
  diagnose->add_option("--solution", diag_dir, "Solution directory")->required();
  auto* shifts_opt = diagnose->add_option("--shifts", diag_shifts, "Time shifts eps (default 0.02,0.04,0.08)");
  auto* deltas_opt = diagnose->add_option("--deltas", diag_deltas, "Space shifts, multiples of hx (default hx,2hx,4hx)");
  diagnose->add_option("--norm-eps", norm_eps, "Margin for the time norms")->capture_default_str();
  auto* diag_out_opt = diagnose->add_option("--out", diag_out, "Output directory (default: the solution directory)");

  std::string probe_config;
  int probe_inits = 3;
  std::uint64_t probe_seed = 0;
  double probe_tol = kDefaultPdTol;
  int probe_max = 0;
  auto* probe = app.add_subcommand("probe-uniqueness", "Solve from several random initializations and compare");
  probe->add_option("config", probe_config, "Config file")->required();
  probe->add_option("--inits", probe_inits, "Number of initializations")->capture_default_str()->check(CLI::PositiveNumber);
  probe->add_option("--seed", probe_seed, "Base seed")->capture_default_str();
  probe->add_option("--tol", probe_tol, "Solver tolerance")->capture_default_str();
  auto* probe_max_opt = probe->add_option("--max-iter", probe_max, "Iteration budget per solve")->check(CLI::PositiveNumber);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kOk : kInput;
  }

  try {
    if (*classify) return cmd_classify(classify_config);
    if (*solve) {
      if (*tol_opt) sa.tol = solve_tol;
      if (*max_opt) sa.max_iter = solve_max;
      return cmd_solve(sa);
    }
    if (*verify) return cmd_verify(verify_dir, verify_tol);
    if (*diagnose)
      return cmd_diagnose(diag_dir, *shifts_opt ? std::optional(diag_shifts) : std::nullopt,
                          *deltas_opt ? std::optional(diag_deltas) : std::nullopt, norm_eps,
                          *diag_out_opt ? std::optional(diag_out) : std::nullopt);
    if (*probe)
      return cmd_probe(probe_config, probe_inits, probe_seed, probe_tol,
                       *probe_max_opt ? std::optional(probe_max) : std::nullopt);
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return exit_code(e.kind());
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kInput;
  }
  return kInput;
}
