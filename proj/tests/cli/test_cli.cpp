#include <doctest.h>

#include <sys/wait.h>

#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "gravalloc/geometry.hpp"
#include "gravalloc/serialization.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace gravalloc;

namespace {

const fs::path kFixtures{GRAVALLOC_FIXTURE_DIR};

fs::path scratch(const std::string& name) {
  const fs::path p = fs::temp_directory_path() / "gravalloc_cli_test" / name;
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

struct Run {
  int code = -1;
  std::string out;
};

Run run(const std::string& args, const fs::path& dir) {
  const fs::path log = dir / "stdout.txt";
  const std::string cmd = std::string("\"") + GRAVALLOC_CLI + "\" " + args + " > \"" + log.string() + "\" 2> \"" +
                          (dir / "stderr.txt").string() + "\"";
  const int raw = std::system(cmd.c_str());
  Run r;
  r.code = WIFEXITED(raw) ? WEXITSTATUS(raw) : -1;
  std::ifstream in(log);
  std::stringstream ss;
  ss << in.rdbuf();
  r.out = ss.str();
  return r;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p);
  REQUIRE(in.good());
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::vector<std::vector<std::string>> read_csv(const fs::path& p) {
  std::ifstream in(p);
  REQUIRE(in.good());
  std::vector<std::vector<std::string>> rows;
  for (std::string line; std::getline(in, line);) {
    std::vector<std::string> cells;
    std::stringstream ss(line);
    for (std::string c; std::getline(ss, c, ',');) cells.push_back(c);
    rows.push_back(cells);
  }
  return rows;
}

fs::path write_stars(const fs::path& dir, const std::vector<std::vector<double>>& stars, double window = 10.0) {
  std::vector<Point> pts;
  for (const auto& s : stars) {
    Point p(3);
    for (int k = 0; k < 3; ++k) p[k] = s[k];
    pts.push_back(p);
  }
  const StarConfig cfg = from_explicit(3, std::move(pts), Ball{Point::zeros(3), window});
  const fs::path path = dir / "stars.json";
  save_config(cfg, path);
  return path;
}

fs::path write_points(const fs::path& dir, const std::vector<std::vector<double>>& pts) {
  const fs::path path = dir / "points.csv";
  std::ofstream out(path);
  out << "x1,x2,x3\n";
  for (const auto& p : pts) out << format_real(p[0]) << ',' << format_real(p[1]) << ',' << format_real(p[2]) << '\n';
  return path;
}

std::string q(const fs::path& p) { return "\"" + p.string() + "\""; }

}  // namespace

TEST_CASE("field matches the independent direct-sum regression fixture") {
  const fs::path dir = scratch("field_golden");
  const Run r = run("field --stars " + q(kFixtures / "field_regression" / "stars.json") + " --points " +
                        q(kFixtures / "field_regression" / "points.csv") + " --out-dir " + q(dir),
                    dir);
  REQUIRE(r.code == 0);
  const auto got = read_csv(dir / "field.csv");
  const auto want = read_csv(kFixtures / "field_regression" / "expected.csv");
  REQUIRE(got.size() == want.size());
  CHECK(got[0] == std::vector<std::string>{"x1", "x2", "x3", "F1", "F2", "F3", "status"});
  for (std::size_t i = 1; i < want.size(); ++i) {
    CHECK(got[i].back() == "ok");
    for (std::size_t k = 0; k < 6; ++k) {
      const double a = std::stod(got[i][k]);
      const double b = std::stod(want[i][k]);
      CHECK(std::fabs(a - b) <= 1e-11 * std::max(1.0, std::fabs(b)));
    }
  }
}

TEST_CASE("field single-star, symmetric and out-of-domain rows") {
  const fs::path dir = scratch("field_small");
  const auto stars = write_stars(dir, {{0, 0, 0}});
  const auto pts = write_points(dir, {{1, 0, 0}});
  Run r = run("field --no-compensation --stars " + q(stars) + " --points " + q(pts) + " --out-dir " + q(dir), dir);
  REQUIRE(r.code == 0);
  auto rows = read_csv(dir / "field.csv");
  REQUIRE(rows.size() == 2);
  CHECK(std::stod(rows[1][3]) == doctest::Approx(-1.0).epsilon(1e-14));
  CHECK(std::stod(rows[1][4]) == 0.0);
  CHECK(std::stod(rows[1][5]) == 0.0);

  r = run("field --stars " + q(stars) + " --points " + q(pts) + " --out-dir " + q(dir), dir);
  REQUIRE(r.code == 0);
  rows = read_csv(dir / "field.csv");
  CHECK(std::stod(rows[1][3]) == doctest::Approx(4.0 * M_PI / 3.0 - 1.0).epsilon(1e-13));

  const fs::path dir2 = scratch("field_sym");
  const auto sym = write_stars(dir2, {{1, 0, 0}, {-1, 0, 0}});
  const auto origin = write_points(dir2, {{0, 0, 0}});
  r = run("field --stars " + q(sym) + " --points " + q(origin) + " --out-dir " + q(dir2), dir2);
  REQUIRE(r.code == 0);
  rows = read_csv(dir2 / "field.csv");
  for (int k = 3; k < 6; ++k) CHECK(std::fabs(std::stod(rows[1][k])) < 1e-14);

  const auto star_pt = write_points(dir2, {{1, 0, 0}, {0.5, 0, 0}});
  r = run("field --stars " + q(sym) + " --points " + q(star_pt) + " --out-dir " + q(dir2), dir2);
  CHECK(r.code == 3);
  rows = read_csv(dir2 / "field.csv");
  REQUIRE(rows.size() == 3);
  CHECK(rows[1].back() == "singular");
  CHECK(rows[2].back() == "ok");

  const auto inside = write_points(dir2, {{3, 0, 0}});
  r = run("field --stars " + q(sym) + " --points " + q(inside) + " --partial 2,4 --out-dir " + q(dir2), dir2);
  CHECK(r.code == 3);
  rows = read_csv(dir2 / "field.csv");
  CHECK(rows[0][3 + 3] == "U");
  CHECK(rows[1].back() == "outside");
  r = run("field --stars " + q(sym) + " --points " + q(inside) + " --partial 0,4 --out-dir " + q(dir2), dir2);
  CHECK(r.code == 0);
}

TEST_CASE("sample is reproducible and validates its window") {
  const fs::path a = scratch("sample_a");
  const fs::path b = scratch("sample_b");
  Run r = run("sample --seed 11 --window-radius 4 --out-dir " + q(a), a);
  REQUIRE(r.code == 0);
  r = run("sample --seed 11 --window-radius 4 --out-dir " + q(b), b);
  REQUIRE(r.code == 0);
  CHECK(slurp(a / "config.json") == slurp(b / "config.json"));
  const StarConfig cfg = load_config(a / "config.json");
  CHECK(r.out == std::to_string(cfg.size()) + " stars\n");
  CHECK(cfg.size() == sample_poisson(3, Ball{Point::zeros(3), 4.0}, 1.0, 11).size());

  CHECK(run("sample --window-radius 0 --out-dir " + q(a), a).code == 2);
  CHECK(run("sample --dim 2 --out-dir " + q(a), a).code == 2);
  CHECK(run("sample --no-such-flag --out-dir " + q(a), a).code == 2);
  CHECK(run("nonsense", a).code == 2);
}

TEST_CASE("help lists every subcommand and flag") {
  const fs::path dir = scratch("help");
  Run r = run("--help", dir);
  CHECK(r.code == 0);
  for (const char* s : {"sample", "field", "flow", "allocate", "diameter-tail", "crossing-tail", "crossing",
                        "liouville", "partial-tail", "validate", "Exit codes"}) {
    CHECK_MESSAGE(r.out.find(s) != std::string::npos, s);
  }
  r = run("field --help", dir);
  CHECK(r.code == 0);
  for (const char* s : {"--config", "--stars", "--seed", "--dim", "--window-radius", "--out-dir", "--threads",
                        "--hierarchical", "--order", "--rel-tol", "--abs-tol", "--max-time", "--points", "--partial"}) {
    CHECK_MESSAGE(r.out.find(s) != std::string::npos, s);
  }
}

TEST_CASE("run_config.json reproduces a run") {
  const fs::path s = scratch("cfg_sample");
  REQUIRE(run("sample --seed 5 --window-radius 5 --out-dir " + q(s), s).code == 0);
  const auto pts = write_points(s, {{0.3, 0.2, 0.1}, {-1.1, 0.4, 0.9}});
  const fs::path a = scratch("cfg_a");
  REQUIRE(run("field --hierarchical --stars " + q(s / "config.json") + " --points " + q(pts) + " --out-dir " + q(a),
              a)
              .code == 0);
  const json rc = json::parse(slurp(a / "run_config.json"));
  CHECK(rc.at("command") == "field");
  CHECK(rc.at("hierarchical") == true);
  CHECK(rc.at("seed") == 1);

  const fs::path b = scratch("cfg_b");
  json edited = rc;
  edited["out-dir"] = b.string();
  std::ofstream(b / "rc.json") << edited.dump();
  REQUIRE(run("field --config " + q(b / "rc.json"), b).code == 0);
  CHECK(slurp(a / "field.csv") == slurp(b / "field.csv"));

  std::ofstream(b / "bad.json") << R"({"bogus-key": 1})";
  CHECK(run("field --config " + q(b / "bad.json") + " --points " + q(pts), b).code == 2);
  CHECK(run("field --stars " + q(s / "config.json") + " --out-dir " + q(b), b).code == 2);
}

TEST_CASE("flow writes a trace") {
  const fs::path dir = scratch("flow");
  const auto stars = write_stars(dir, {{0, 0, 0}});
  const Run r = run("flow --no-compensation --stars " + q(stars) + " --start 1,0,0 --out-dir " + q(dir), dir);
  REQUIRE(r.code == 0);
  CHECK(r.out.rfind("captured star 0", 0) == 0);
  const auto rows = read_csv(dir / "trace.csv");
  REQUIRE(rows.size() >= 2);
  CHECK(rows[0] == std::vector<std::string>{"t", "x1", "x2", "x3"});
  CHECK(std::stod(rows[1][0]) == 0.0);
  for (std::size_t i = 2; i < rows.size(); ++i) CHECK(std::stod(rows[i][0]) > std::stod(rows[i - 1][0]));
  const json t = json::parse(slurp(dir / "trace.json"));
  CHECK(t.at("terminal") == "captured");
  CHECK(t.at("star") == 0);
  CHECK(t.at("tau").get<double>() == doctest::Approx(1.0 / 3.0).epsilon(0.01));
  for (const char* k : {"end_time", "steps", "rejected", "start", "end"}) CHECK(t.contains(k));
  CHECK(run("flow --stars " + q(stars) + " --start 1,0 --out-dir " + q(dir), dir).code == 2);
}

TEST_CASE("allocate exports map, header, slice and volumes") {
  const fs::path dir = scratch("alloc_single");
  const auto single = write_stars(dir, {{0, 0, 0}});
  Run r = run("allocate --no-compensation --stars " + q(single) + " --halfwidth 2 --resolution 6 --out-dir " + q(dir),
              dir);
  REQUIRE(r.code == 0);
  auto map = read_csv(dir / "map.csv");
  REQUIRE(map.size() == 1 + 216);
  CHECK(map[0] == std::vector<std::string>{"i1", "i2", "i3", "owner"});
  for (std::size_t i = 1; i < map.size(); ++i) CHECK(map[i].back() == "0");
  const json h = json::parse(slurp(dir / "map.json"));
  CHECK(h.at("cell_count") == 216);
  CHECK(h.at("resolved_fraction") == 1.0);
  auto vol = read_csv(dir / "volumes.csv");
  REQUIRE(vol.size() == 2);
  CHECK(std::stod(vol[1][2]) == doctest::Approx(64.0));

  const fs::path dir2 = scratch("alloc_pair");
  const auto pair = write_stars(dir2, {{1, 0, 0}, {-1, 0, 0}});
  r = run("allocate --no-compensation --stars " + q(pair) + " --halfwidth 2 --resolution 8 --out-dir " + q(dir2), dir2);
  REQUIRE(r.code == 0);
  const auto slice = read_csv(dir2 / "slice.csv");
  REQUIRE(slice.size() == 1 + 64);
  CHECK(slice[0] == std::vector<std::string>{"x", "y", "owner"});
  int left = 0, right = 0;
  for (std::size_t i = 1; i < slice.size(); ++i) {
    const double x = std::stod(slice[i][0]);
    const std::string owner = slice[i][2];
    CHECK(owner == (x > 0 ? "0" : "1"));
    (x > 0 ? right : left)++;
  }
  CHECK(left == right);

  const fs::path dir3 = scratch("alloc_sm");
  r = run("allocate --method stable-marriage --stars " + q(write_stars(dir3, {{1, 0, 0}, {-1, 0, 0}}, 2.0)) +
              " --halfwidth 1 --resolution 4 --out-dir " + q(dir3),
          dir3);
  REQUIRE(r.code == 0);
  CHECK(read_csv(dir3 / "map.csv").size() == 1 + 64);
  CHECK(run("allocate --method nope --stars " + q(pair) + " --out-dir " + q(dir3), dir3).code == 2);
  CHECK(run("allocate --slice-axes 0,0 --stars " + q(pair) + " --out-dir " + q(dir3), dir3).code == 2);
}

TEST_CASE("crossing on an empty configuration escapes") {
  const fs::path dir = scratch("crossing");
  const auto empty = write_stars(dir, {});
  const Run r = run("crossing --stars " + q(empty) + " -R 1 --seeds 20 --out-dir " + q(dir), dir);
  REQUIRE(r.code == 0);
  CHECK(r.out == "true\n");
  const json j = json::parse(slurp(dir / "crossing.json"));
  CHECK(j.at("crossed") == true);
  CHECK(j.at("R") == 1.0);
  CHECK(fs::exists(dir / "witness.csv"));
}

TEST_CASE("tail and liouville exports") {
  const fs::path dir = scratch("tail");
  Run r = run("diameter-tail --window-radius 8 --configs 2 --r-grid 0,0.5,1 --seed 3 --out-dir " + q(dir), dir);
  REQUIRE(r.code == 0);
  const json t = json::parse(slurp(dir / "tail.json"));
  for (const char* k : {"quantity", "thresholds", "trials", "hits", "estimate", "ci_lo", "ci_hi", "unresolved",
                        "monotone_non_increasing"}) {
    CHECK_MESSAGE(t.contains(k), k);
  }
  CHECK(t.at("thresholds").size() == 3);
  CHECK(t.at("trials") == json::array({2, 2, 2}));

  const fs::path dir2 = scratch("liouville");
  r = run("liouville --window-radius 8 --box-halfwidth 2 --points 400 --tolerance 1000 --out-dir " + q(dir2), dir2);
  REQUIRE(r.code == 0);
  const json f = json::parse(slurp(dir2 / "liouville_fit.json"));
  for (const char* k : {"t", "survival", "rate", "intercept", "reference_rate"}) CHECK_MESSAGE(f.contains(k), k);
  CHECK(f.at("reference_rate").get<double>() == doctest::Approx(4.0 * M_PI));
  CHECK(f.at("t").size() == f.at("survival").size());
  r = run("liouville --window-radius 8 --box-halfwidth 2 --points 400 --tolerance 0 --out-dir " + q(dir2), dir2);
  CHECK(r.code == 4);
}

TEST_CASE("validate runs a subset and writes a summary") {
  const fs::path dir = scratch("validate");
  Run r = run("validate --only poisson_tails,hadamard_variant --out-dir " + q(dir), dir);
  REQUIRE(r.code == 0);
  CHECK(r.out.find("PASS poisson_tails") != std::string::npos);
  const auto rows = read_csv(dir / "summary.csv");
  CHECK(rows.size() == 3);
  CHECK(json::parse(slurp(dir / "reports.json")).size() == 2);
  CHECK(run("validate --only nonexistent --out-dir " + q(dir), dir).code == 2);
}
