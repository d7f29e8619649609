#pragma once

#include <filesystem>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "gravalloc/geometry.hpp"

namespace gravalloc {

using json = nlohmann::json;

/// Shortest text that round-trips the double exactly (17 significant digits).
std::string format_real(double x);
/// Comma-joined format_real of each value.
std::string format_row(std::span<const double> values);

json to_json(const Vec& v);
Vec vec_from_json(const json& j);

json to_json(const Region& r);
Region region_from_json(const json& j);

/// {dim, intensity, seed, window, stars: [[x1..xd], ...]}
json to_json(const StarConfig& config);
StarConfig config_from_json(const json& j);

void save_config(const StarConfig& config, const std::filesystem::path& path);
StarConfig load_config(const std::filesystem::path& path);

json read_json_file(const std::filesystem::path& path);
void write_json_file(const json& j, const std::filesystem::path& path);

/// Parses a CSV of query points: one point per line, d comma-separated reals.
/// Blank lines and lines starting with '#' are skipped; a non-numeric first
/// line is treated as a header.
std::vector<Point> read_points_csv(std::istream& in, int dim);
std::vector<Point> read_points_csv(const std::filesystem::path& path, int dim);

}  // namespace gravalloc
