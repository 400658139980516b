#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <sstream>
#include <tuple>

#include "radiomap/errors.hpp"
#include "radiomap/fieldsim.hpp"

namespace radiomap::fieldsim {
namespace {

using nlohmann::json;

json vec_json(const Vec3& v) { return json::array({v.x, v.y, v.z}); }

Vec3 vec_from(const json& j, const char* field) {
  if (!j.contains(field) || !j[field].is_array() || j[field].size() != 3) {
    throw MalformedInput(std::string("field ") + field + " must be a 3-element array");
  }
  Vec3 v{j[field][0].get<double>(), j[field][1].get<double>(), j[field][2].get<double>()};
  if (!v.is_finite()) throw MalformedInput(std::string("field ") + field + " is not finite");
  return v;
}

auto key_of(const Vec3& tx, const Vec3& rx) { return std::make_tuple(tx.x, tx.y, tx.z, rx.x, rx.y, rx.z); }

double median(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  const std::size_t n = v.size();
  return n % 2 == 1 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

}  // namespace

void save_dataset(const Dataset& dataset, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write dataset: " + path.string());
  json meta = dataset.meta;
  meta["schema_version"] = kDatasetSchemaVersion;
  meta["count"] = dataset.size();
  out << json{{"meta", meta}}.dump() << '\n';
  for (const auto& m : dataset.measurements) {
    json rec{{"tx", vec_json(m.tx)}, {"rx", vec_json(m.rx)}, {"rssi_dbm", m.rssi_dbm}};
    if (m.pair) rec["pair"] = json::array({m.pair->first, m.pair->second});
    out << rec.dump() << '\n';
  }
}

Dataset load_dataset(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw MalformedInput("cannot open dataset: " + path.string());
  Dataset ds;
  std::string line;
  std::size_t line_no = 0;
  bool header_seen = false;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty() || line == "\r") continue;
    try {
      const json j = json::parse(line);
      if (!header_seen && j.contains("meta")) {
        ds.meta = j["meta"];
        if (ds.meta.value("schema_version", kDatasetSchemaVersion) != kDatasetSchemaVersion) {
          throw MalformedInput("unsupported dataset schema version");
        }
        header_seen = true;
        continue;
      }
      header_seen = true;
      Measurement m;
      m.tx = vec_from(j, "tx");
      m.rx = vec_from(j, "rx");
      if (!j.contains("rssi_dbm") || !j["rssi_dbm"].is_number()) throw MalformedInput("field rssi_dbm missing");
      m.rssi_dbm = j["rssi_dbm"].get<double>();
      if (!std::isfinite(m.rssi_dbm)) throw MalformedInput("field rssi_dbm is not finite");
      if (j.contains("pair") && !j["pair"].is_null()) {
        const auto& p = j["pair"];
        if (!p.is_array() || p.size() != 2) throw MalformedInput("field pair must be [i, j]");
        m.pair = planner::make_region_pair(p[0].get<int>(), p[1].get<int>());
      }
      ds.measurements.push_back(m);
    } catch (const json::exception& e) {
      throw MalformedInput(path.string() + " line " + std::to_string(line_no) + ": " + e.what());
    } catch (const Error& e) {
      throw MalformedInput(path.string() + " line " + std::to_string(line_no) + ": " + e.what());
    }
  }
  return ds;
}

std::vector<Vec3> free_lattice(const scene::OccupancyGrid& grid, double spacing, double height) {
  if (!(spacing > 0.0)) throw DomainError("free_lattice: spacing must be positive");
  std::vector<Vec3> out;
  const Vec3 lo = grid.origin();
  const Vec3 hi = grid.upper_corner();
  const auto first = [&](double v) { return static_cast<long>(std::ceil(v / spacing - 0.5)); };
  const auto last = [&](double v) { return static_cast<long>(std::floor(v / spacing - 0.5)); };
  for (long iy = first(lo.y); iy <= last(hi.y); ++iy)
    for (long ix = first(lo.x); ix <= last(hi.x); ++ix) {
      const Vec3 p{(ix + 0.5) * spacing, (iy + 0.5) * spacing, height};
      if (grid.free_at(p)) out.push_back(p);
    }
  return out;
}

Dataset survey(const scene::OccupancyGrid& grid, const OracleParams& params, const std::vector<Vec3>& txs,
               const std::vector<Vec3>& rxs) {
  Dataset ds;
  ds.meta["source"] = "survey";
  ds.meta["oracle"] = to_json(params);
  for (const auto& tx : txs) {
    const OracleField field(grid, params, tx);
    for (const auto& rx : rxs) {
      if (rx == tx) continue;
      ds.measurements.push_back({tx, rx, field.rssi(rx), std::nullopt});
    }
  }
  return ds;
}

Dataset preprocess(const Dataset& dataset, double filter_radius, double floor_dbm,
                   const std::vector<FillRequest>& fills) {
  if (!(filter_radius >= 0.0)) throw DomainError("preprocess: filter_radius must be non-negative");
  const auto& ms = dataset.measurements;
  const std::size_t n = ms.size();

  // Bucket by tx cell so the neighbor search stays near-linear.
  const double cell = std::max(filter_radius, 1e-6);
  using Cell = std::tuple<long, long, long>;
  std::map<Cell, std::vector<std::size_t>> buckets;
  const auto cell_of = [&](const Vec3& p) {
    return Cell{static_cast<long>(std::floor(p.x / cell)), static_cast<long>(std::floor(p.y / cell)),
                static_cast<long>(std::floor(p.z / cell))};
  };
  for (std::size_t i = 0; i < n; ++i) buckets[cell_of(ms[i].tx)].push_back(i);

  const double r2 = filter_radius * filter_radius;
  Dataset out;
  out.meta = dataset.meta;
  out.meta["preprocess"] = {{"filter_radius", filter_radius}, {"floor_dbm", floor_dbm}};
  std::map<decltype(key_of(Vec3{}, Vec3{})), std::size_t> seen;
  for (std::size_t i = 0; i < n; ++i) {
    const auto key = key_of(ms[i].tx, ms[i].rx);
    if (seen.contains(key)) continue;
    std::vector<double> vals;
    const auto [cx, cy, cz] = cell_of(ms[i].tx);
    for (long dz = -1; dz <= 1; ++dz)
      for (long dy = -1; dy <= 1; ++dy)
        for (long dx = -1; dx <= 1; ++dx) {
          const auto it = buckets.find({cx + dx, cy + dy, cz + dz});
          if (it == buckets.end()) continue;
          for (auto k : it->second) {
            if ((ms[k].tx - ms[i].tx).squared_norm() <= r2 && (ms[k].rx - ms[i].rx).squared_norm() <= r2) {
              vals.push_back(ms[k].rssi_dbm);
            }
          }
        }
    Measurement m = ms[i];
    m.rssi_dbm = median(std::move(vals));
    seen.emplace(key, out.measurements.size());
    out.measurements.push_back(m);
  }
  for (const auto& f : fills) {
    const auto key = key_of(f.tx, f.rx);
    if (seen.contains(key)) continue;
    seen.emplace(key, out.measurements.size());
    out.measurements.push_back({f.tx, f.rx, floor_dbm, f.pair});
  }
  return out;
}

}  // namespace radiomap::fieldsim
