#include "radiomap/planner.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <limits>
#include <numeric>
#include <queue>
#include <string>

#include "radiomap/errors.hpp"
#include "radiomap/log.hpp"

namespace radiomap::planner {
namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

Configuration sorted(Configuration c) {
  std::sort(c.begin(), c.end());
  return c;
}

void validate_travel(const CostMatrix& travel, int m) {
  if (static_cast<int>(travel.size()) < m) throw DomainError("travel matrix smaller than region count");
  for (const auto& row : travel) {
    if (row.size() != travel.size()) throw DomainError("travel matrix is not square");
  }
}

/// Hungarian algorithm on a square cost matrix; returns col_of_row.
std::vector<int> hungarian(const std::vector<std::vector<double>>& cost) {
  const int n = static_cast<int>(cost.size());
  std::vector<double> u(n + 1, 0.0);
  std::vector<double> v(n + 1, 0.0);
  std::vector<int> p(n + 1, 0);
  std::vector<int> way(n + 1, 0);
  for (int i = 1; i <= n; ++i) {
    p[0] = i;
    int j0 = 0;
    std::vector<double> minv(n + 1, kInf);
    std::vector<char> used(n + 1, 0);
    do {
      used[j0] = 1;
      const int i0 = p[j0];
      double delta = kInf;
      int j1 = 0;
      for (int j = 1; j <= n; ++j) {
        if (used[j]) continue;
        const double cur = cost[i0 - 1][j - 1] - u[i0] - v[j];
        if (cur < minv[j]) {
          minv[j] = cur;
          way[j] = j0;
        }
        if (minv[j] < delta) {
          delta = minv[j];
          j1 = j;
        }
      }
      for (int j = 0; j <= n; ++j) {
        if (used[j]) {
          u[p[j]] += delta;
          v[j] -= delta;
        } else {
          minv[j] -= delta;
        }
      }
      j0 = j1;
    } while (p[j0] != 0);
    do {
      const int j1 = way[j0];
      p[j0] = p[j1];
      j0 = j1;
    } while (j0 != 0);
  }
  std::vector<int> col_of_row(n, 0);
  for (int j = 1; j <= n; ++j) col_of_row[p[j] - 1] = j - 1;
  return col_of_row;
}

std::vector<std::size_t> held_karp(const std::vector<std::vector<double>>& d, std::size_t k) {
  // Node 0 is the start; nodes 1..k are configs. Open path from 0.
  const std::size_t full = std::size_t{1} << k;
  std::vector<double> dp(full * k, kInf);
  std::vector<int> parent(full * k, -1);
  for (std::size_t j = 0; j < k; ++j) dp[(std::size_t{1} << j) * k + j] = d[0][j + 1];
  for (std::size_t mask = 1; mask < full; ++mask) {
    for (std::size_t last = 0; last < k; ++last) {
      if (!(mask >> last & 1U)) continue;
      const double base = dp[mask * k + last];
      if (base == kInf) continue;
      for (std::size_t nxt = 0; nxt < k; ++nxt) {
        if (mask >> nxt & 1U) continue;
        const std::size_t nm = mask | (std::size_t{1} << nxt);
        const double c = base + d[last + 1][nxt + 1];
        if (c < dp[nm * k + nxt]) {
          dp[nm * k + nxt] = c;
          parent[nm * k + nxt] = static_cast<int>(last);
        }
      }
    }
  }
  std::size_t best = 0;
  for (std::size_t j = 1; j < k; ++j)
    if (dp[(full - 1) * k + j] < dp[(full - 1) * k + best]) best = j;
  std::vector<std::size_t> order;
  std::size_t mask = full - 1;
  int cur = static_cast<int>(best);
  while (cur >= 0) {
    order.push_back(static_cast<std::size_t>(cur) + 1);
    const int prev = parent[mask * k + static_cast<std::size_t>(cur)];
    mask &= ~(std::size_t{1} << cur);
    cur = prev;
  }
  std::reverse(order.begin(), order.end());
  return order;
}

double path_cost(const std::vector<std::vector<double>>& d, const std::vector<std::size_t>& path) {
  double c = 0.0;
  std::size_t prev = 0;
  for (auto node : path) {
    c += d[prev][node];
    prev = node;
  }
  return c;
}

std::vector<std::size_t> nearest_neighbor_two_opt(const std::vector<std::vector<double>>& d, std::size_t k) {
  std::vector<std::size_t> path;
  std::vector<char> used(k + 1, 0);
  std::size_t cur = 0;
  for (std::size_t step = 0; step < k; ++step) {
    std::size_t best = 0;
    for (std::size_t j = 1; j <= k; ++j) {
      if (used[j]) continue;
      if (best == 0 || d[cur][j] < d[cur][best]) best = j;
    }
    used[best] = 1;
    path.push_back(best);
    cur = best;
  }
  // Full sequence with the fixed start in front; reversals only touch positions >= 1.
  std::vector<std::size_t> seq{0};
  seq.insert(seq.end(), path.begin(), path.end());
  const std::size_t len = seq.size();
  bool improved = true;
  while (improved) {
    improved = false;
    for (std::size_t i = 1; i + 1 < len; ++i) {
      for (std::size_t j = i + 1; j < len; ++j) {
        const double before = d[seq[i - 1]][seq[i]] + (j + 1 < len ? d[seq[j]][seq[j + 1]] : 0.0);
        const double after = d[seq[i - 1]][seq[j]] + (j + 1 < len ? d[seq[i]][seq[j + 1]] : 0.0);
        if (after < before - 1e-9) {
          std::reverse(seq.begin() + static_cast<std::ptrdiff_t>(i), seq.begin() + static_cast<std::ptrdiff_t>(j) + 1);
          improved = true;
        }
      }
    }
  }
  return {seq.begin() + 1, seq.end()};
}

constexpr std::size_t kExactTspLimit = 10;

}  // namespace

RegionPair make_region_pair(int a, int b) {
  if (a == b) throw DomainError("self-pair (" + std::to_string(a) + "," + std::to_string(b) + ")");
  return a < b ? RegionPair{a, b} : RegionPair{b, a};
}

CollectionMatrix::CollectionMatrix(int m) : m_(m) {
  if (m < 2) throw DomainError("collection matrix needs at least 2 regions");
  state_.assign(static_cast<std::size_t>(m) * static_cast<std::size_t>(m), 0);
  for (int i = 0; i < m; ++i) state_[static_cast<std::size_t>(i) * m + i] = 1;
}

int CollectionMatrix::at(int i, int j) const {
  if (i < 0 || j < 0 || i >= m_ || j >= m_) throw DomainError("matrix index out of range");
  return state_[static_cast<std::size_t>(i) * m_ + j];
}

void CollectionMatrix::mark(int i, int j, int value) {
  if (i < 0 || j < 0 || i >= m_ || j >= m_) throw DomainError("matrix index out of range");
  if (i == j) throw DomainError("cannot mark diagonal entry " + std::to_string(i));
  if (value != 1 && value != -1) throw DomainError("mark value must be 1 or -1");
  auto& a = state_[static_cast<std::size_t>(i) * m_ + j];
  auto& b = state_[static_cast<std::size_t>(j) * m_ + i];
  if (a != 0 && a != value) {
    throw ConflictError("pair (" + std::to_string(i) + "," + std::to_string(j) + ") already marked " +
                        std::to_string(a));
  }
  a = static_cast<std::int8_t>(value);
  b = static_cast<std::int8_t>(value);
}

PairSet CollectionMatrix::pairs_with(int value) const {
  PairSet out;
  for (int i = 0; i < m_; ++i)
    for (int j = i + 1; j < m_; ++j)
      if (state_[static_cast<std::size_t>(i) * m_ + j] == value) out.insert({i, j});
  return out;
}

CollectionMatrix init_matrix(int m) { return CollectionMatrix(m); }

void validate_configuration(const Configuration& config, int m) {
  if (config.size() < 2) throw DomainError("configuration needs at least 2 robots");
  const auto s = sorted(config);
  for (std::size_t p = 0; p < s.size(); ++p) {
    if (s[p] < 0 || s[p] >= m) throw DomainError("configuration region id " + std::to_string(s[p]) + " out of range");
    if (p > 0 && s[p] == s[p - 1]) throw DomainError("configuration repeats region " + std::to_string(s[p]));
  }
}

PairSet pairs_of(const Configuration& config) {
  PairSet out;
  for (std::size_t p = 0; p < config.size(); ++p)
    for (std::size_t q = p + 1; q < config.size(); ++q) out.insert(make_region_pair(config[p], config[q]));
  return out;
}

Transition transition_cost(const Configuration& a, const Configuration& b, const CostMatrix& travel) {
  if (a.size() != b.size()) throw DomainError("transition between configurations of different size");
  const std::size_t n = a.size();
  const auto m = static_cast<int>(travel.size());
  for (const auto& c : {&a, &b})
    for (int r : *c)
      if (r < 0 || r >= m) throw DomainError("region id " + std::to_string(r) + " outside travel matrix");
  std::vector<std::vector<double>> cost(n, std::vector<double>(n));
  for (std::size_t p = 0; p < n; ++p)
    for (std::size_t q = 0; q < n; ++q)
      cost[p][q] = travel[static_cast<std::size_t>(a[p])][static_cast<std::size_t>(b[q])];
  const auto col = hungarian(cost);
  Transition t;
  t.assignment.resize(n);
  for (std::size_t p = 0; p < n; ++p) {
    t.assignment[p] = b[static_cast<std::size_t>(col[p])];
    t.cost += cost[p][static_cast<std::size_t>(col[p])];
  }
  return t;
}

std::vector<Configuration> greedy_set_cover(const PairSet& U, int m, int n) {
  if (n < 2) throw DomainError("greedy_set_cover: n must be at least 2");
  if (n > m) throw DomainError("greedy_set_cover: n exceeds region count");
  const auto mm = static_cast<std::size_t>(m);
  std::vector<char> rem(mm * mm, 0);
  std::size_t remaining = 0;
  for (const auto& [i, j] : U) {
    if (i < 0 || j < 0 || i >= m || j >= m) {
      throw DomainError("pair (" + std::to_string(i) + "," + std::to_string(j) + ") has an id >= m");
    }
    if (i == j) throw DomainError("self-pair in U");
    if (!rem[i * mm + j]) ++remaining;
    rem[i * mm + j] = rem[j * mm + i] = 1;
  }

  std::vector<Configuration> out;
  while (remaining > 0) {
    std::vector<int> degree(mm, 0);
    for (std::size_t i = 0; i < mm; ++i)
      for (std::size_t j = 0; j < mm; ++j) degree[i] += rem[i * mm + j];
    const int first = static_cast<int>(std::max_element(degree.begin(), degree.end()) - degree.begin());
    Configuration chosen{first};
    std::vector<char> in(mm, 0);
    in[first] = 1;
    while (static_cast<int>(chosen.size()) < n) {
      int best = -1;
      int best_gain = -1;
      for (int r = 0; r < m; ++r) {
        if (in[r]) continue;
        int gain = 0;
        for (int c : chosen) gain += rem[r * mm + c];
        if (gain > best_gain) {
          best_gain = gain;
          best = r;
        }
      }
      chosen.push_back(best);
      in[best] = 1;
    }
    for (std::size_t p = 0; p < chosen.size(); ++p)
      for (std::size_t q = p + 1; q < chosen.size(); ++q) {
        const auto i = static_cast<std::size_t>(chosen[p]);
        const auto j = static_cast<std::size_t>(chosen[q]);
        if (rem[i * mm + j]) {
          rem[i * mm + j] = rem[j * mm + i] = 0;
          --remaining;
        }
      }
    out.push_back(sorted(std::move(chosen)));
  }
  return out;
}

Plan order_configs_tsp(const std::vector<Configuration>& configs, const Configuration& start,
                       const CostMatrix& travel) {
  Plan plan;
  plan.start = start;
  if (configs.empty()) return plan;
  const std::size_t k = configs.size();
  std::vector<Configuration> sets;
  for (const auto& c : configs) {
    if (c.size() != start.size()) throw DomainError("configuration size differs from team size");
    sets.push_back(sorted(c));
  }
  {
    auto check = sets;
    std::sort(check.begin(), check.end());
    if (std::adjacent_find(check.begin(), check.end()) != check.end()) {
      throw DomainError("duplicate configuration in TSP input");
    }
  }

  std::vector<std::vector<double>> d(k + 1, std::vector<double>(k + 1, 0.0));
  for (std::size_t j = 0; j < k; ++j) d[0][j + 1] = transition_cost(start, sets[j], travel).cost;
  for (std::size_t i = 0; i < k; ++i)
    for (std::size_t j = i + 1; j < k; ++j) {
      const double c = transition_cost(sets[i], sets[j], travel).cost;
      d[i + 1][j + 1] = d[j + 1][i + 1] = c;
    }
  for (std::size_t j = 0; j < k; ++j) d[j + 1][0] = d[0][j + 1];

  const auto order = k <= kExactTspLimit ? held_karp(d, k) : nearest_neighbor_two_opt(d, k);
  log::debug("order_configs_tsp: ", k, " configs, path cost ", path_cost(d, order));

  Configuration current = start;
  for (auto node : order) {
    const auto t = transition_cost(current, sets[node - 1], travel);
    plan.configs.push_back(t.assignment);
    plan.step_costs.push_back(t.cost);
    plan.total_cost += t.cost;
    for (const auto& pr : pairs_of(t.assignment)) plan.covered_pairs.insert(pr);
    current = t.assignment;
  }
  return plan;
}

Plan plan_two_robots(const CollectionMatrix& matrix, const Configuration& start, const CostMatrix& travel) {
  validate_configuration(start, matrix.size());
  if (start.size() != 2) throw DomainError("plan_two_robots needs a 2-robot start");
  validate_travel(travel, matrix.size());
  std::vector<Configuration> configs;
  for (const auto& [i, j] : matrix.zeros()) configs.push_back({i, j});
  return order_configs_tsp(configs, start, travel);
}

Plan plan_multi(const CollectionMatrix& matrix, int n, const Configuration& start, const CostMatrix& travel) {
  if (n <= 2) throw DomainError("plan_multi needs more than 2 robots");
  validate_configuration(start, matrix.size());
  if (static_cast<int>(start.size()) != n) throw DomainError("start configuration size differs from n");
  validate_travel(travel, matrix.size());
  const auto configs = greedy_set_cover(matrix.zeros(), matrix.size(), n);
  return order_configs_tsp(configs, start, travel);
}

Plan plan_collection(const CollectionMatrix& matrix, int n, const Configuration& start,
                     const CostMatrix& travel) {
  return n == 2 ? plan_two_robots(matrix, start, travel) : plan_multi(matrix, n, start, travel);
}

Plan replan_on_failure(const CollectionMatrix& matrix, const Configuration& previous, int n,
                       const CostMatrix& travel) {
  const auto plan = plan_collection(matrix, n, previous, travel);
  if (plan.empty()) log::info("replan: no uncollected pairs remain, collection complete");
  return plan;
}

BaselineResult baseline_greedy(const CollectionMatrix& matrix, int n, const Configuration& start,
                               const CostMatrix& travel, const BaselineOptions& options) {
  const int m = matrix.size();
  if (m > 63) throw DomainError("baseline_greedy supports at most 63 regions");
  if (n < 2 || n > m) throw DomainError("baseline_greedy: n must be in [2, m]");
  validate_configuration(start, m);
  if (static_cast<int>(start.size()) != n) throw DomainError("start configuration size differs from n");
  validate_travel(travel, m);

  std::vector<std::uint64_t> adj(static_cast<std::size_t>(m), 0);
  for (const auto& [i, j] : matrix.zeros()) {
    adj[i] |= std::uint64_t{1} << j;
    adj[j] |= std::uint64_t{1} << i;
  }
  const auto coverage = [&](std::uint64_t s) {
    int c = 0;
    for (std::uint64_t t = s; t != 0; t &= t - 1) c += std::popcount(adj[std::countr_zero(t)] & s);
    return c / 2;
  };
  const auto members = [](std::uint64_t s) {
    Configuration c;
    for (std::uint64_t t = s; t != 0; t &= t - 1) c.push_back(std::countr_zero(t));
    return c;
  };
  const std::uint64_t limit = std::uint64_t{1} << m;
  const auto next_subset = [](std::uint64_t x) {
    const std::uint64_t c = x & (~x + 1);
    const std::uint64_t r = x + c;
    return (((r ^ x) >> 2) / c) | r;
  };

  BaselineResult result;
  Plan& plan = result.plan;
  plan.start = start;
  Configuration current = start;
  int remaining = static_cast<int>(matrix.zeros().size());

  while (remaining > 0) {
    std::uint64_t enumerated = 0;
    std::uint64_t best_set = 0;
    int best_cov = 0;
    double best_cost = kInf;
    Transition best_t;

    // Cheap lower bound on the matching cost: every target region needs some robot.
    const auto cost_lower_bound = [&](std::uint64_t s) {
      double lb = 0.0;
      for (std::uint64_t t = s; t != 0; t &= t - 1) {
        const auto q = static_cast<std::size_t>(std::countr_zero(t));
        double mn = kInf;
        for (int r : current) mn = std::min(mn, travel[static_cast<std::size_t>(r)][q]);
        lb += mn;
      }
      return lb;
    };

    if (options.objective == BaselineObjective::kCoverageThenCost) {
      std::vector<std::uint64_t> ties;
      for (std::uint64_t s = (std::uint64_t{1} << n) - 1; s < limit; s = next_subset(s)) {
        if (++enumerated > options.candidate_cap) {
          result.truncated = true;
          break;
        }
        const int cov = coverage(s);
        if (cov == 0 || cov < best_cov) continue;
        if (cov > best_cov) {
          best_cov = cov;
          ties.clear();
        }
        ties.push_back(s);
      }
      for (auto s : ties) {
        if (cost_lower_bound(s) >= best_cost) continue;
        auto t = transition_cost(current, members(s), travel);
        if (t.cost < best_cost) {
          best_cost = t.cost;
          best_set = s;
          best_t = std::move(t);
        }
      }
    } else {
      for (std::uint64_t s = (std::uint64_t{1} << n) - 1; s < limit; s = next_subset(s)) {
        if (++enumerated > options.candidate_cap) {
          result.truncated = true;
          break;
        }
        const int cov = coverage(s);
        if (cov == 0) continue;
        const double lb = cost_lower_bound(s);
        if (lb > best_cost || (lb == best_cost && cov <= best_cov)) continue;
        auto t = transition_cost(current, members(s), travel);
        if (t.cost < best_cost || (t.cost == best_cost && cov > best_cov)) {
          best_cost = t.cost;
          best_cov = cov;
          best_set = s;
          best_t = std::move(t);
        }
      }
    }

    if (best_set == 0) {
      // Only reachable after truncation: fall back to one region-growth configuration.
      PairSet u;
      for (int i = 0; i < m; ++i)
        for (std::uint64_t t = adj[static_cast<std::size_t>(i)]; t != 0; t &= t - 1)
          if (std::countr_zero(t) > i) u.insert({i, std::countr_zero(t)});
      const auto c = greedy_set_cover(u, m, n).front();
      best_t = transition_cost(current, c, travel);
      for (int r : c) best_set |= std::uint64_t{1} << r;
    }
    if (result.truncated && plan.configs.empty()) {
      log::warn("baseline_greedy: candidate cap ", options.candidate_cap, " reached; search truncated");
    }

    for (std::uint64_t t = best_set; t != 0; t &= t - 1) {
      const int i = std::countr_zero(t);
      const std::uint64_t hit = adj[static_cast<std::size_t>(i)] & best_set;
      for (std::uint64_t h = hit; h != 0; h &= h - 1) {
        const int j = std::countr_zero(h);
        adj[static_cast<std::size_t>(j)] &= ~(std::uint64_t{1} << i);
        if (j > i) --remaining;
      }
      adj[static_cast<std::size_t>(i)] &= ~hit;
    }
    plan.configs.push_back(best_t.assignment);
    plan.step_costs.push_back(best_t.cost);
    plan.total_cost += best_t.cost;
    for (const auto& pr : pairs_of(best_t.assignment)) plan.covered_pairs.insert(pr);
    current = best_t.assignment;
  }
  return result;
}

std::vector<double> free_space_distances(const scene::OccupancyGrid& grid, const Vec3& source) {
  const auto& d = grid.dims();
  std::vector<double> dist(grid.voxel_count(), kInf);
  const VoxelIndex s = grid.voxel_of(source);
  if (!grid.in_bounds(s) || grid.occupied(s)) return dist;
  const double res = grid.resolution();
  const double step_len[4] = {0.0, res, res * std::sqrt(2.0), res * std::sqrt(3.0)};
  using Item = std::pair<double, std::size_t>;
  std::priority_queue<Item, std::vector<Item>, std::greater<>> pq;
  dist[grid.linear(s)] = 0.0;
  pq.push({0.0, grid.linear(s)});
  while (!pq.empty()) {
    const auto [du, u] = pq.top();
    pq.pop();
    if (du > dist[u]) continue;
    const VoxelIndex v = grid.unlinear(u);
    for (int dk = -1; dk <= 1; ++dk)
      for (int dj = -1; dj <= 1; ++dj)
        for (int di = -1; di <= 1; ++di) {
          const int nz = std::abs(di) + std::abs(dj) + std::abs(dk);
          if (nz == 0) continue;
          const VoxelIndex w{v.i + di, v.j + dj, v.k + dk};
          if (w.i < 0 || w.j < 0 || w.k < 0 || w.i >= d[0] || w.j >= d[1] || w.k >= d[2]) continue;
          if (grid.occupied(w)) continue;
          const std::size_t lw = grid.linear(w);
          const double nd = du + step_len[nz];
          if (nd < dist[lw]) {
            dist[lw] = nd;
            pq.push({nd, lw});
          }
        }
  }
  return dist;
}

std::vector<Vec3> region_anchors(const partition::Partition& partition,
                                 const std::vector<std::vector<Vec3>>& waypoints) {
  if (waypoints.size() != partition.size()) throw DomainError("waypoint list does not match partition");
  std::vector<Vec3> anchors;
  for (std::size_t r = 0; r < partition.size(); ++r) {
    if (waypoints[r].empty()) throw EmptyRegion("region " + std::to_string(r) + " has no waypoints");
    const Vec3 c = partition.regions[r].center;
    anchors.push_back(*std::min_element(waypoints[r].begin(), waypoints[r].end(), [&](const Vec3& a, const Vec3& b) {
      return distance(a, c) < distance(b, c);
    }));
  }
  return anchors;
}

CostMatrix travel_cost_matrix(const partition::Partition& partition,
                              const std::vector<std::vector<Vec3>>& waypoints,
                              const scene::OccupancyGrid& grid) {
  const auto anchors = region_anchors(partition, waypoints);
  const std::size_t m = anchors.size();
  CostMatrix cost(m, std::vector<double>(m, 0.0));
  for (std::size_t i = 0; i < m; ++i) {
    const auto dist = free_space_distances(grid, anchors[i]);
    for (std::size_t j = i + 1; j < m; ++j) {
      const double dij = dist[grid.linear(grid.voxel_of(anchors[j]))];
      cost[i][j] = cost[j][i] = std::isfinite(dij) ? dij : kUnreachable;
    }
  }
  return cost;
}

CostMatrix travel_cost_matrix(const partition::Partition& partition, const scene::OccupancyGrid& grid,
                              const partition::WaypointParams& params) {
  return travel_cost_matrix(partition, partition::all_region_waypoints(partition, grid, params), grid);
}

}  // namespace radiomap::planner
