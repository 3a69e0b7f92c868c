#include "mfgc/io.hpp"

#include <cmath>
#include <fstream>
#include <map>
#include <optional>
#include <sstream>

#include "mfgc/error.hpp"

namespace mfgc {

namespace fs = std::filesystem;

namespace {

[[noreturn]] void parse_error(int line, const std::string& msg) {
  throw Error(ErrorKind::ConfigParse, (line > 0 ? "line " + std::to_string(line) + ": " : std::string()) + msg);
}

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

std::optional<double> to_number(const std::string& tok) {
  if (tok.empty()) return std::nullopt;
  std::size_t used = 0;
  try {
    const double v = std::stod(tok, &used);
    if (used != tok.size()) return std::nullopt;
    return v;
  } catch (const std::exception&) {
    return std::nullopt;
  }
}

std::vector<std::string> tokens(const std::string& s) {
  std::string t = s;
  for (char& ch : t)
    if (ch == ',' || ch == ';') ch = ' ';
  std::istringstream is(t);
  std::vector<std::string> out;
  for (std::string w; is >> w;) out.push_back(w);
  return out;
}

std::vector<double> numbers(const std::string& value, int line, const std::string& key) {
  std::vector<double> out;
  for (const auto& tok : tokens(value)) {
    const auto v = to_number(tok);
    if (!v) parse_error(line, key + ": '" + tok + "' is not a number");
    out.push_back(*v);
  }
  return out;
}

double scalar(const std::string& value, int line, const std::string& key) {
  const auto v = numbers(value, line, key);
  if (v.size() != 1) parse_error(line, key + " expects a single number");
  if (!std::isfinite(v[0])) parse_error(line, key + " must be finite");
  return v[0];
}

int integer(const std::string& value, int line, const std::string& key) {
  const double v = scalar(value, line, key);
  if (v != std::floor(v)) parse_error(line, key + " must be an integer");
  return static_cast<int>(v);
}

// Numbers of a CSV file, skipping a non-numeric header line.
std::vector<double> read_numbers_file(const fs::path& path, const std::string& key) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorKind::ConfigParse, key + ": cannot open '" + path.string() + "'");
  std::vector<double> out;
  std::string line;
  bool first = true;
  while (std::getline(in, line)) {
    const auto toks = tokens(line);
    if (toks.empty()) continue;
    std::vector<double> row;
    bool numeric = true;
    for (const auto& t : toks) {
      const auto v = to_number(t);
      if (!v) {
        numeric = false;
        break;
      }
      row.push_back(*v);
    }
    if (!numeric) {
      if (first) {
        first = false;
        continue;
      }
      throw Error(ErrorKind::ConfigParse, key + ": non-numeric row in '" + path.string() + "'");
    }
    first = false;
    out.insert(out.end(), row.begin(), row.end());
  }
  return out;
}

double periodic_sq_distance(const Grid& g, std::size_t s, double mu) {
  double acc = 0.0;
  for (int a = 0; a < g.dim(); ++a) {
    double dx = std::abs(g.coordinate(s, a) - mu);
    dx = std::min(dx, 1.0 - dx);
    acc += dx * dx;
  }
  return acc;
}

struct Entry {
  std::string value;
  int line = 0;
};

const char* const kKeys[] = {"dimension", "nx", "nt", "horizon", "q", "r", "s", "kappa_phi",
                             "theta", "c", "phi", "A", "m0", "uT", "price_dim"};

}  // namespace

ProblemSpec parse_config(std::istream& is, const fs::path& base_dir) {
  std::map<std::string, Entry> entries;
  std::string raw;
  int lineno = 0;
  while (std::getline(is, raw)) {
    ++lineno;
    const auto hash = raw.find('#');
    const std::string line = trim(hash == std::string::npos ? raw : raw.substr(0, hash));
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) parse_error(lineno, "expected 'key = value'");
    const std::string key = trim(line.substr(0, eq));
    const std::string value = trim(line.substr(eq + 1));
    if (std::find(std::begin(kKeys), std::end(kKeys), key) == std::end(kKeys)) parse_error(lineno, "unknown key '" + key + "'");
    if (value.empty()) parse_error(lineno, "empty value for '" + key + "'");
    if (entries.count(key)) parse_error(lineno, "duplicate key '" + key + "'");
    entries[key] = {value, lineno};
  }
  for (const char* key : {"nx", "nt", "q", "r", "s"})
    if (!entries.count(key)) parse_error(0, std::string("missing required key '") + key + "'");

  auto get_int = [&](const char* key, int fallback) {
    auto it = entries.find(key);
    return it == entries.end() ? fallback : integer(it->second.value, it->second.line, key);
  };
  auto get_real = [&](const char* key, double fallback) {
    auto it = entries.find(key);
    return it == entries.end() ? fallback : scalar(it->second.value, it->second.line, key);
  };
  auto resolve = [&](const std::string& p) {
    const fs::path path(p);
    return path.is_absolute() || base_dir.empty() ? path : base_dir / path;
  };

  const int d = get_int("dimension", 1);
  const int nx = get_int("nx", 0);
  const int nt = get_int("nt", 0);
  const Grid grid(d, nx, nt, get_real("horizon", 1.0));
  ProblemSpec spec = ProblemSpec::constant(grid, get_real("q", 2.0), get_real("r", 2.0), get_real("s", 2.0));
  const std::size_t n = grid.space_size();
  spec.kappa_phi = get_real("kappa_phi", 1.0);

  spec.price_dim = get_int("price_dim", d);
  if (spec.price_dim < 0) parse_error(entries["price_dim"].line, "price_dim must be >= 0");
  const std::size_t block = static_cast<std::size_t>(spec.price_dim * d);
  spec.phi.assign(n * block, 0.0);
  if (auto it = entries.find("phi"); it != entries.end()) {
    const auto toks = tokens(it->second.value);
    std::vector<double> vals;
    if (toks.size() == 1 && !to_number(toks[0])) vals = read_numbers_file(resolve(toks[0]), "phi");
    else vals = numbers(it->second.value, it->second.line, "phi");
    if (vals.size() == block) {
      for (std::size_t x = 0; x < n; ++x) std::copy(vals.begin(), vals.end(), spec.phi.begin() + static_cast<long>(x * block));
    } else if (vals.size() == n * block) {
      spec.phi = vals;
    } else {
      parse_error(it->second.line, "phi needs " + std::to_string(block) + " or " + std::to_string(n * block) + " values");
    }
  } else {
    for (std::size_t x = 0; x < n; ++x)
      for (int k = 0; k < std::min(spec.price_dim, d); ++k) spec.phi[(x * spec.price_dim + k) * d + k] = 1.0;
  }

  auto per_node = [&](const char* key, std::vector<double>& target) {
    auto it = entries.find(key);
    if (it == entries.end()) return;
    const auto toks = tokens(it->second.value);
    if (toks.size() == 1 && to_number(toks[0])) {
      target.assign(n, scalar(it->second.value, it->second.line, key));
      return;
    }
    if (toks.size() != 1) parse_error(it->second.line, std::string(key) + " expects a number or a CSV path");
    const auto vals = read_numbers_file(resolve(toks[0]), key);
    if (vals.size() != n) parse_error(it->second.line, std::string(key) + " CSV needs " + std::to_string(n) + " values");
    target = vals;
  };
  per_node("theta", spec.theta);
  per_node("c", spec.c);

  if (auto it = entries.find("A"); it != entries.end()) {
    const auto vals = numbers(it->second.value, it->second.line, "A");
    if (vals.size() != static_cast<std::size_t>(d * d)) parse_error(it->second.line, "A needs d*d values");
    for (std::size_t i = 0; i < vals.size(); ++i) spec.diffusion.entries[i] = vals[i];
  }

  // m0 / uT expressions.
  auto field = [&](const char* key, std::vector<double>& target, bool density) {
    auto it = entries.find(key);
    if (it == entries.end()) return;
    const auto toks = tokens(it->second.value);
    const int line = it->second.line;
    const std::string& head = toks[0];
    auto args = [&](std::size_t count) {
      if (toks.size() != count + 1) parse_error(line, std::string(key) + ": '" + head + "' takes " + std::to_string(count) + " argument(s)");
      std::vector<double> v;
      for (std::size_t i = 1; i < toks.size(); ++i) {
        const auto x = to_number(toks[i]);
        if (!x) parse_error(line, std::string(key) + ": '" + toks[i] + "' is not a number");
        v.push_back(*x);
      }
      return v;
    };
    if (head == "uniform") {
      args(0);
      target.assign(n, 1.0);
    } else if (head == "zero" && !density) {
      args(0);
      target.assign(n, 0.0);
    } else if (head == "constant" && !density) {
      target.assign(n, args(1)[0]);
    } else if (head == "cosine" && !density) {
      const auto a = args(2);
      for (std::size_t x = 0; x < n; ++x) target[x] = a[0] * std::cos(2.0 * M_PI * a[1] * grid.coordinate(x, 0));
    } else if (head == "gaussian_bump") {
      const auto a = args(2);
      if (!(a[1] > 0.0)) parse_error(line, std::string(key) + ": sigma must be positive");
      double mass = 0.0;
      for (std::size_t x = 0; x < n; ++x) {
        target[x] = std::exp(-periodic_sq_distance(grid, x, a[0]) / (2.0 * a[1] * a[1]));
        mass += target[x] * grid.cell_volume();
      }
      if (density)
        for (auto& v : target) v /= mass;
    } else if (toks.size() == 1) {
      const auto vals = read_numbers_file(resolve(head), key);
      if (vals.size() != n) parse_error(line, std::string(key) + " CSV needs " + std::to_string(n) + " values");
      target = vals;
    } else {
      parse_error(line, std::string(key) + ": unknown expression '" + head + "'");
    }
  };
  field("m0", spec.m0, true);
  field("uT", spec.uT, false);
  return spec;
}

ProblemSpec load_config(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorKind::ConfigParse, "cannot open config '" + path.string() + "'");
  return parse_config(in, path.parent_path());
}

nlohmann::json number(double v) { return std::isfinite(v) ? nlohmann::json(v) : nlohmann::json(nullptr); }

nlohmann::json spec_to_json(const ProblemSpec& spec) {
  const Grid& g = spec.grid;
  std::vector<double> a(spec.diffusion.entries.begin(), spec.diffusion.entries.begin() + g.dim() * g.dim());
  return {{"dimension", g.dim()}, {"nx", g.nx()},     {"nt", g.nt()},       {"horizon", g.horizon()},
          {"q", spec.q},          {"r", spec.r},      {"s", spec.s},        {"kappa_phi", spec.kappa_phi},
          {"price_dim", spec.price_dim}, {"theta", spec.theta}, {"c", spec.c}, {"phi", spec.phi},
          {"A", a},               {"m0", spec.m0},    {"uT", spec.uT}};
}

ProblemSpec spec_from_json(const nlohmann::json& j) {
  try {
    const Grid g(j.at("dimension").get<int>(), j.at("nx").get<int>(), j.at("nt").get<int>(), j.at("horizon").get<double>());
    ProblemSpec spec = ProblemSpec::constant(g, j.at("q").get<double>(), j.at("r").get<double>(), j.at("s").get<double>());
    spec.kappa_phi = j.at("kappa_phi").get<double>();
    spec.price_dim = j.at("price_dim").get<int>();
    spec.theta = j.at("theta").get<std::vector<double>>();
    spec.c = j.at("c").get<std::vector<double>>();
    spec.phi = j.at("phi").get<std::vector<double>>();
    spec.m0 = j.at("m0").get<std::vector<double>>();
    spec.uT = j.at("uT").get<std::vector<double>>();
    const auto a = j.at("A").get<std::vector<double>>();
    const std::size_t n = g.space_size();
    if (spec.theta.size() != n || spec.c.size() != n || spec.m0.size() != n || spec.uT.size() != n ||
        spec.phi.size() != n * static_cast<std::size_t>(spec.price_dim * g.dim()) ||
        a.size() != static_cast<std::size_t>(g.dim() * g.dim()))
      throw Error(ErrorKind::ConfigParse, "spec JSON arrays do not match the grid");
    std::copy(a.begin(), a.end(), spec.diffusion.entries.begin());
    return spec;
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorKind::ConfigParse, std::string("spec JSON: ") + e.what());
  }
}

nlohmann::json to_json(const CaseInfo& info) {
  return {{"p", number(info.p)},         {"r_prime", number(info.r_prime)}, {"s_prime", number(info.s_prime)},
          {"sigma", number(info.sigma)}, {"case", info.case_label},         {"r_tilde", number(info.r_tilde)},
          {"kappa", info.kappa == kInfinity ? nlohmann::json("inf") : number(info.kappa)},
          {"eta", info.eta == kInfinity ? nlohmann::json("inf") : number(info.eta)}};
}

nlohmann::json to_json(const ResidualReport& r) {
  return {{"duality_gap", number(r.duality_gap)},
          {"hj_violation", number(r.hj_violation)},
          {"fp_residual", number(r.fp_residual)},
          {"price_residual", number(r.price_residual)},
          {"feedback_residual", number(r.feedback_residual)},
          {"complementarity", number(r.complementarity)},
          {"mass_drift", number(r.mass_drift)},
          {"m_min", number(r.m_min)}};
}

nlohmann::json to_json(const RegularityRecord& rec) {
  nlohmann::json time_sums = nlohmann::json::array(), space_sums = nlohmann::json::array();
  for (const auto& [e, v] : rec.time_shift_sums) time_sums.push_back({{"eps", e}, {"sum", number(v)}});
  for (const auto& [dl, v] : rec.space_shift_sums) space_sums.push_back({{"delta", dl}, {"sum", number(v)}});
  nlohmann::json j = {{"space_norm_m", number(rec.space_norm_m)},
                      {"space_norm_j", number(rec.space_norm_j)},
                      {"time_available", rec.time_available},
                      {"space_shift_sums", space_sums},
                      {"space_slope", number(rec.space_slope)}};
  if (rec.time_available) {
    j["norm_eps"] = rec.norm_eps;
    j["time_norm_m"] = number(rec.time_norm_m);
    j["time_norm_P"] = number(rec.time_norm_P);
    j["time_shift_sums"] = time_sums;
    j["time_slope"] = number(rec.time_slope);
  }
  return j;
}

nlohmann::json to_json(const SolverOptions& o) {
  return {{"tau", o.tau},           {"sigma", o.sigma_step},     {"max_iter", o.max_iter},
          {"tol_gap", o.tol_gap},   {"theta_pd", o.theta_pd},   {"newton_tol", o.newton_tol},
          {"newton_max", o.newton_max}, {"step_ratio", o.step_ratio}, {"power_iterations", o.power_iterations}};
}

void write_solution(const fs::path& dir, const Solution& sol) {
  fs::create_directories(dir);
  auto open = [&](const char* name) {
    std::ofstream out(dir / name);
    if (!out) throw Error(ErrorKind::MissingArtifact, "cannot write '" + (dir / name).string() + "'");
    return out;
  };
  {
    auto f = open("u.csv");
    write_csv(f, sol.u);
  }
  {
    auto f = open("m.csv");
    write_csv(f, sol.m);
  }
  {
    auto f = open("w.csv");
    write_csv(f, sol.w);
  }
  {
    auto f = open("P.csv");
    write_csv(f, sol.P);
  }
  {
    auto f = open("gamma.csv");
    write_csv(f, sol.gamma);
  }
}

Solution read_solution(const fs::path& dir, const ProblemSpec& spec) {
  auto open = [&](const char* name) {
    std::ifstream in(dir / name);
    if (!in) throw Error(ErrorKind::MissingArtifact, "missing '" + (dir / name).string() + "'");
    return in;
  };
  const Grid& g = spec.grid;
  auto fu = open("u.csv");
  auto fm = open("m.csv");
  auto fw = open("w.csv");
  auto fp = open("P.csv");
  auto fg = open("gamma.csv");
  Solution sol;
  sol.u = read_scalar_csv(fu, g);
  sol.m = read_scalar_csv(fm, g);
  sol.w = read_vector_csv(fw, g);
  sol.P = read_price_csv(fp, spec.price_dim, g.nt());
  sol.gamma = read_scalar_csv(fg, g);
  return sol;
}

}  // namespace mfgc
