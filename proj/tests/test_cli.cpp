#include <doctest.h>

#include <sys/wait.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include <json.hpp>

namespace fs = std::filesystem;

namespace {

struct Run {
  int code = -1;
  std::string out;
  std::string err;
};

const fs::path& scratch() {
  static const fs::path dir = [] {
    const fs::path d = fs::temp_directory_path() / "mfgc_test_cli";
    fs::remove_all(d);
    fs::create_directories(d);
    return d;
  }();
  return dir;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

Run cli(const std::string& args) {
  const fs::path out = scratch() / "stdout.txt", err = scratch() / "stderr.txt";
  const std::string cmd = std::string("\"") + MFGC_CLI_PATH + "\" " + args + " > \"" + out.string() + "\" 2> \"" + err.string() + "\"";
  const int status = std::system(cmd.c_str());
  Run r;
  r.code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  r.out = slurp(out);
  r.err = slurp(err);
  return r;
}

std::string config(const std::string& name) { return std::string(MFGC_CONFIG_DIR) + "/" + name; }

fs::path write_config(const std::string& name, const std::string& text) {
  const fs::path p = scratch() / name;
  std::ofstream(p) << text;
  return p;
}

}  // namespace

TEST_CASE("classify") {
  const Run ok = cli("classify " + config("uniform.cfg"));
  REQUIRE(ok.code == 0);
  const auto j = nlohmann::json::parse(ok.out);
  CHECK(j["passed"].get<bool>());
  CHECK(j["case_info"]["case"] == "2B");
  CHECK(j["case_info"]["p"].get<double>() == doctest::Approx(2.0));

  const fs::path hole = scratch() / "hole.csv";
  {
    std::ofstream f(hole);
    for (int i = 0; i < 8; ++i) f << (i == 3 ? 0.0 : 8.0 / 7.0) << "\n";
  }
  const fs::path bad = write_config("hole.cfg", "nx = 8\nnt = 4\nq = 2\nr = 2\ns = 2\nm0 = hole.csv\n");
  const Run h4 = cli("classify " + bad.string());
  CHECK(h4.code == 2);
  CHECK(h4.err.find("(H4) violated") != std::string::npos);

  const fs::path broken = write_config("broken.cfg", "nx = 8\nnt = 4\nq = 2\nr = 2\n");
  CHECK(cli("classify " + broken.string()).code == 1);
  CHECK(cli("classify " + (scratch() / "absent.cfg").string()).code == 1);
  CHECK(cli("frobnicate").code == 1);
  CHECK(cli("--help").code == 0);
}

TEST_CASE("solve and verify the uniform instance") {
  const fs::path out = scratch() / "uniform_pd";
  const Run s = cli("solve " + config("uniform.cfg") + " --method pd --tol 1e-8 --out " + out.string());
  REQUIRE(s.code == 0);
  for (const char* f : {"u.csv", "m.csv", "w.csv", "P.csv", "gamma.csv", "log.csv", "manifest.json"}) CHECK(fs::exists(out / f));
  const auto manifest = nlohmann::json::parse(slurp(out / "manifest.json"));
  CHECK(manifest["solver"] == "primal_dual");
  CHECK(manifest["converged"].get<bool>());
  CHECK(manifest["power_iteration_seed"].get<int>() == 12345);
  CHECK(std::abs(manifest["residuals"]["duality_gap"].get<double>()) <= 1e-4);
  CHECK(cli("verify --solution " + out.string()).code == 0);

  const fs::path pic = scratch() / "uniform_picard";
  const Run p = cli("solve " + config("uniform.cfg") + " --method picard --out " + pic.string());
  REQUIRE(p.code == 0);
  const auto pm = nlohmann::json::parse(slurp(pic / "manifest.json"));
  CHECK(pm["solver"] == "picard");
  CHECK(pm["iterations"].get<int>() <= 3);
}

TEST_CASE("iteration budget exhaustion still writes artifacts") {
  const fs::path out = scratch() / "bump_short";
  const Run s = cli("solve " + config("bump.cfg") + " --max-iter 1 --out " + out.string());
  CHECK(s.code == 3);
  CHECK(fs::exists(out / "m.csv"));
  CHECK(fs::exists(out / "manifest.json"));
  CHECK_FALSE(nlohmann::json::parse(slurp(out / "manifest.json"))["converged"].get<bool>());
}

TEST_CASE("verify rejects corrupted and incomplete solutions") {
  const fs::path out = scratch() / "uniform_corrupt";
  REQUIRE(cli("solve " + config("uniform.cfg") + " --out " + out.string()).code == 0);
  {
    std::ifstream in(out / "P.csv");
    std::string header;
    std::getline(in, header);
    std::ofstream f(out / "P.csv");
    f << header << "\n";
    for (int t = 0; t <= 32; ++t) f << t << ",1\n";
  }
  const Run v = cli("verify --solution " + out.string());
  CHECK(v.code != 0);
  fs::remove(out / "m.csv");
  CHECK(cli("verify --solution " + out.string()).code == 1);
  CHECK(cli("verify --solution " + (scratch() / "nowhere").string()).code == 1);
}

TEST_CASE("diagnose") {
  const fs::path out = scratch() / "bump_diag";
  const Run s = cli("solve " + config("no_price.cfg") + " --out " + out.string());
  REQUIRE(s.code == 0);
  const Run d = cli("diagnose --solution " + out.string());
  REQUIRE(d.code == 0);
  std::ifstream in(out / "diagnostics.csv");
  std::string line;
  int rows = 0, time_rows = 0;
  std::getline(in, line);
  CHECK(line == "kind,shift,sum");
  while (std::getline(in, line)) {
    ++rows;
    if (line.rfind("time", 0) == 0) ++time_rows;
  }
  CHECK(time_rows == 3);
  CHECK(rows == 6);
  const auto reg = nlohmann::json::parse(slurp(out / "regularity.json"));
  CHECK(reg["time_available"].get<bool>());
  CHECK(reg.contains("space_slope"));

  const fs::path visc = scratch() / "viscous_diag";
  REQUIRE(cli("solve " + config("viscous.cfg") + " --out " + visc.string()).code == 0);
  CHECK(cli("diagnose --solution " + visc.string()).code == 0);
  const Run refused = cli("diagnose --solution " + visc.string() + " --shifts 0.02,0.04");
  CHECK(refused.code == 2);
  CHECK(refused.err.find("A_ij = 0") != std::string::npos);
  CHECK(cli("diagnose --solution " + out.string() + " --shifts 0.3").code != 0);
  CHECK(cli("diagnose --solution " + out.string() + " --deltas 0.01").code != 0);
}

TEST_CASE("seeded solves are reproducible") {
  const fs::path a = scratch() / "seed_a", b = scratch() / "seed_b";
  REQUIRE(cli("solve " + config("no_price.cfg") + " --seed 7 --out " + a.string()).code == 0);
  REQUIRE(cli("solve " + config("no_price.cfg") + " --seed 7 --out " + b.string()).code == 0);
  for (const char* f : {"u.csv", "m.csv", "w.csv", "P.csv", "gamma.csv", "log.csv"}) CHECK(slurp(a / f) == slurp(b / f));
}

TEST_CASE("probe-uniqueness") {
  const Run r = cli("probe-uniqueness " + config("uniform.cfg") + " --inits 2 --tol 1e-7");
  REQUIRE(r.code == 0);
  const auto j = nlohmann::json::parse(r.out);
  CHECK(j["max_m_distance"].get<double>() <= 1e-3);
}

TEST_CASE("every shipped config solves and verifies") {
  for (const auto& entry : fs::directory_iterator(MFGC_CONFIG_DIR)) {
    if (entry.path().extension() != ".cfg") continue;
    const fs::path out = scratch() / ("all_" + entry.path().stem().string());
    CAPTURE(entry.path().string());
    CHECK(cli("solve " + entry.path().string() + " --out " + out.string()).code == 0);
    CHECK(cli("verify --solution " + out.string()).code == 0);
  }
}
