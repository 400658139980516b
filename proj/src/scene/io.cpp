#include <fstream>
#include <sstream>

#include <nlohmann/json.hpp>

#include "radiomap/encoding.hpp"
#include "radiomap/errors.hpp"
#include "radiomap/scene.hpp"

namespace radiomap::scene {
namespace {

using nlohmann::json;

std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw MalformedInput("cannot open scene file: " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

const json& require(const json& obj, const char* field) {
  if (!obj.contains(field)) throw MalformedInput(std::string("scene: missing field '") + field + "'");
  return obj.at(field);
}

double parse_number(const std::string& token, std::size_t line, const char* field) {
  try {
    std::size_t used = 0;
    const double v = std::stod(token, &used);
    while (used < token.size() && std::isspace(static_cast<unsigned char>(token[used]))) ++used;
    if (used != token.size()) throw std::invalid_argument(token);
    return v;
  } catch (const std::exception&) {
    throw MalformedInput("xyz-csv: line " + std::to_string(line) + ", field " + field +
                         ": not a number: '" + token + "'");
  }
}

}  // namespace

SceneFormat parse_scene_format(const std::string& name) {
  if (name == "occupancy-json") return SceneFormat::kOccupancyJson;
  if (name == "xyz-csv") return SceneFormat::kXyzCsv;
  throw DomainError("unknown scene format '" + name + "'");
}

std::string to_occupancy_json(const OccupancyGrid& grid) {
  const auto raw = grid.raw();
  std::vector<std::uint8_t> bits((raw.size() + 7) / 8, 0);
  for (std::size_t i = 0; i < raw.size(); ++i) {
    if (raw[i]) bits[i / 8] |= static_cast<std::uint8_t>(0x80u >> (i % 8));
  }
  json j;
  j["dims"] = {grid.dims()[0], grid.dims()[1], grid.dims()[2]};
  j["resolution"] = grid.resolution();
  j["origin"] = {grid.origin().x, grid.origin().y, grid.origin().z};
  j["occupancy"] = base64_encode(bits);
  return j.dump();
}

OccupancyGrid from_occupancy_json(const std::string& text) {
  if (text.find_first_not_of(" \t\r\n") == std::string::npos) {
    throw MalformedInput("occupancy-json: empty input");
  }
  json j;
  try {
    j = json::parse(text);
  } catch (const json::parse_error& e) {
    throw MalformedInput(std::string("occupancy-json: ") + e.what());
  }
  if (!j.is_object()) throw MalformedInput("occupancy-json: top level must be an object");
  std::array<int, 3> dims{};
  double resolution = 0.0;
  Vec3 origin;
  std::string payload;
  try {
    const auto& d = require(j, "dims");
    if (!d.is_array() || d.size() != 3) throw MalformedInput("occupancy-json: field 'dims' must have 3 entries");
    for (int a = 0; a < 3; ++a) dims[a] = d.at(a).get<int>();
    resolution = require(j, "resolution").get<double>();
    const auto& o = require(j, "origin");
    if (!o.is_array() || o.size() != 3) throw MalformedInput("occupancy-json: field 'origin' must have 3 entries");
    origin = {o.at(0).get<double>(), o.at(1).get<double>(), o.at(2).get<double>()};
    payload = require(j, "occupancy").get<std::string>();
  } catch (const json::exception& e) {
    throw MalformedInput(std::string("occupancy-json: wrong field type: ") + e.what());
  }
  if (dims[0] < 1 || dims[1] < 1 || dims[2] < 1) throw StructuralError("occupancy-json: dims must be >= 1");
  if (!(resolution > 0.0)) throw StructuralError("occupancy-json: resolution must be > 0");
  const auto bytes = base64_decode(payload);
  const std::size_t n = static_cast<std::size_t>(dims[0]) * dims[1] * dims[2];
  if (bytes.size() != (n + 7) / 8) {
    throw StructuralError("occupancy-json: payload has " + std::to_string(bytes.size()) +
                          " bytes, dims require " + std::to_string((n + 7) / 8));
  }
  std::vector<std::uint8_t> occ(n, 0);
  for (std::size_t i = 0; i < n; ++i) occ[i] = (bytes[i / 8] >> (7 - i % 8)) & 1u;
  return OccupancyGrid(dims, resolution, origin, std::move(occ));
}

OccupancyGrid load_scene(const std::filesystem::path& path, SceneFormat format, double resolution) {
  const std::string text = read_file(path);
  if (format == SceneFormat::kOccupancyJson) return from_occupancy_json(text);

  std::vector<Vec3> points;
  std::istringstream in(text);
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.find_first_not_of(" \t") == std::string::npos) continue;
    std::vector<std::string> fields;
    std::stringstream ls(line);
    std::string tok;
    while (std::getline(ls, tok, ',')) fields.push_back(tok);
    if (points.empty() && line_no == 1 && !fields.empty()) {
      // Optional header: a first line whose first field is not numeric.
      bool numeric = true;
      try {
        (void)std::stod(fields[0]);
      } catch (const std::exception&) {
        numeric = false;
      }
      if (!numeric) continue;
    }
    if (fields.size() != 3) {
      throw MalformedInput("xyz-csv: line " + std::to_string(line_no) + ": expected 3 fields, got " +
                           std::to_string(fields.size()));
    }
    points.push_back({parse_number(fields[0], line_no, "x"), parse_number(fields[1], line_no, "y"),
                      parse_number(fields[2], line_no, "z")});
  }
  if (points.empty()) throw MalformedInput("xyz-csv: no points in " + path.string());
  return voxelize_point_cloud(points, resolution);
}

void save_scene(const OccupancyGrid& grid, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DomainError("cannot write scene file: " + path.string());
  out << to_occupancy_json(grid) << '\n';
}

}  // namespace radiomap::scene
