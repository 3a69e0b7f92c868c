#pragma once

// Text configs, solution directories and the JSON forms of specs and reports.
//
// Config syntax: one `key = value` per line, `#` starts a comment.
//   dimension, nx, nt, horizon, q, r, s, kappa_phi, price_dim
//   theta, c   number, or path of a per-node CSV
//   phi        k*d numbers (row-major, constant in x), or path of a CSV with
//              k*d numbers per node
//   A          d*d numbers, row-major
//   m0         uniform | gaussian_bump MU SIGMA | path
//   uT         zero | uniform (= 1) | constant C | cosine AMP FREQ | gaussian_bump MU SIGMA | path
// Relative paths are resolved against the config's directory.

#include <filesystem>
#include <istream>
#include <string>

#include <json.hpp>

#include "mfgc/diagnostics.hpp"
#include "mfgc/model.hpp"
#include "mfgc/varsolve.hpp"
#include "mfgc/verify.hpp"

namespace mfgc {

/// Throws ConfigParse on syntax errors, unknown keys and bad values.
ProblemSpec parse_config(std::istream& is, const std::filesystem::path& base_dir = {});
ProblemSpec load_config(const std::filesystem::path& path);

nlohmann::json spec_to_json(const ProblemSpec& spec);
ProblemSpec spec_from_json(const nlohmann::json& j);

nlohmann::json to_json(const CaseInfo& info);
nlohmann::json to_json(const ResidualReport& report);
nlohmann::json to_json(const RegularityRecord& record);
nlohmann::json to_json(const SolverOptions& opts);

/// u.csv, m.csv, w.csv, P.csv, gamma.csv.
void write_solution(const std::filesystem::path& dir, const Solution& sol);
/// Throws MissingArtifact when a file is absent.
Solution read_solution(const std::filesystem::path& dir, const ProblemSpec& spec);

/// Finite JSON number, or null for NaN/inf.
nlohmann::json number(double v);

}  // namespace mfgc
