#include "gravalloc/serialization.hpp"

#include <cctype>
#include <cstdio>
#include <fstream>
#include <sstream>

namespace gravalloc {

std::string format_real(double x) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", x);
  return buf;
}

std::string format_row(std::span<const double> values) {
  std::string out;
  for (std::size_t i = 0; i < values.size(); ++i) {
    if (i) out += ',';
    out += format_real(values[i]);
  }
  return out;
}

json to_json(const Vec& v) {
  json a = json::array();
  for (int i = 0; i < v.dim(); ++i) a.push_back(v[i]);
  return a;
}

Vec vec_from_json(const json& j) {
  if (!j.is_array() || j.empty()) throw ValidationError("expected a non-empty array of reals");
  std::vector<double> c;
  c.reserve(j.size());
  for (const auto& x : j) {
    if (!x.is_number()) throw ValidationError("expected a real number");
    c.push_back(x.get<double>());
  }
  return Vec(std::span<const double>(c));
}

json to_json(const Region& r) {
  json j;
  j["type"] = r.kind();
  j["center"] = to_json(r.center());
  if (const auto* b = r.get_if<Ball>()) j["radius"] = b->radius;
  if (const auto* a = r.get_if<Annulus>()) {
    j["inner"] = a->inner;
    j["outer"] = a->outer;
  }
  if (const auto* b = r.get_if<Box>()) j["halfwidth"] = b->halfwidth;
  if (const auto* c = r.get_if<ComplementOfBall>()) j["radius"] = c->radius;
  return j;
}

Region region_from_json(const json& j) {
  try {
    const std::string type = j.at("type").get<std::string>();
    const Point c = vec_from_json(j.at("center"));
    if (type == "ball") return Region(Ball{c, j.at("radius").get<double>()});
    if (type == "annulus") return Region(Annulus{c, j.at("inner").get<double>(), j.at("outer").get<double>()});
    if (type == "box") return Region(Box{c, j.at("halfwidth").get<double>()});
    if (type == "complement_of_ball") return Region(ComplementOfBall{c, j.at("radius").get<double>()});
    throw ValidationError("unknown region type '" + type + "'");
  } catch (const json::exception& e) {
    throw ValidationError(std::string("malformed region: ") + e.what());
  }
}

json to_json(const StarConfig& config) {
  json j;
  j["dim"] = config.dim();
  j["intensity"] = config.intensity();
  j["seed"] = config.seed();
  j["window"] = to_json(config.window());
  json stars = json::array();
  for (const auto& z : config.stars()) stars.push_back(to_json(z));
  j["stars"] = std::move(stars);
  return j;
}

StarConfig config_from_json(const json& j) {
  try {
    const int dim = j.at("dim").get<int>();
    std::vector<Point> stars;
    for (const auto& s : j.at("stars")) {
      Point p = vec_from_json(s);
      if (p.dim() != dim) throw ValidationError("star dimension does not match 'dim'");
      stars.push_back(p);
    }
    return restore_config(dim, std::move(stars), region_from_json(j.at("window")), j.value("intensity", 1.0),
                          j.value("seed", std::uint64_t{0}));
  } catch (const json::exception& e) {
    throw ValidationError(std::string("malformed star configuration: ") + e.what());
  }
}

json read_json_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ValidationError("cannot open " + path.string());
  try {
    return json::parse(in);
  } catch (const json::exception& e) {
    throw ValidationError("invalid JSON in " + path.string() + ": " + e.what());
  }
}

void write_json_file(const json& j, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw Error("cannot write " + path.string());
  out << j.dump(2) << '\n';
}

void save_config(const StarConfig& config, const std::filesystem::path& path) {
  write_json_file(to_json(config), path);
}

StarConfig load_config(const std::filesystem::path& path) { return config_from_json(read_json_file(path)); }

std::vector<Point> read_points_csv(std::istream& in, int dim) {
  std::vector<Point> pts;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty() || line[0] == '#') continue;
    std::vector<double> vals;
    std::stringstream ss(line);
    std::string cell;
    bool numeric = true;
    while (std::getline(ss, cell, ',')) {
      try {
        std::size_t used = 0;
        vals.push_back(std::stod(cell, &used));
        while (used < cell.size() && std::isspace(static_cast<unsigned char>(cell[used]))) ++used;
        if (used != cell.size()) numeric = false;
      } catch (const std::exception&) {
        numeric = false;
      }
    }
    if (!numeric) {
      if (pts.empty() && lineno == 1) continue;  // header
      throw ValidationError("non-numeric value on line " + std::to_string(lineno));
    }
    if (static_cast<int>(vals.size()) != dim) {
      throw ValidationError("line " + std::to_string(lineno) + " has " + std::to_string(vals.size()) +
                            " columns, expected " + std::to_string(dim));
    }
    pts.emplace_back(std::span<const double>(vals));
  }
  return pts;
}

std::vector<Point> read_points_csv(const std::filesystem::path& path, int dim) {
  std::ifstream in(path);
  if (!in) throw ValidationError("cannot open " + path.string());
  return read_points_csv(in, dim);
}

}  // namespace gravalloc
