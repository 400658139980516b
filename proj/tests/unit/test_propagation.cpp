#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <numbers>

#include "radiomap/errors.hpp"
#include "radiomap/propagation.hpp"
#include "radiomap/random.hpp"
#include "radiomap/scenes.hpp"

using namespace radiomap;
using namespace radiomap::propagation;

namespace {

/// Returns the same delta and signal everywhere.
class ConstantModel : public MultipathModel {
 public:
  ConstantModel(double delta, ComplexSignal s) : delta_(delta), s_(s) {}
  void evaluate(std::span<const Vec3> tx, const Vec3&, double& delta,
                std::vector<ComplexSignal>& signals) const override {
    delta = delta_;
    signals.assign(tx.size(), s_);
  }

 private:
  double delta_;
  ComplexSignal s_;
};

/// Smooth position-dependent fixture: delta >= 0 and signals vary with both ends.
class WavyModel : public MultipathModel {
 public:
  explicit WavyModel(std::uint64_t seed) {
    Rng rng(seed);
    for (auto& c : c_) c = rng.uniform(-2.0, 2.0);
  }
  void evaluate(std::span<const Vec3> tx, const Vec3& rx, double& delta,
                std::vector<ComplexSignal>& signals) const override {
    delta = 3.0 * (1.0 + std::sin(c_[0] * rx.x + c_[1] * rx.y + c_[2] * rx.z));
    signals.clear();
    for (const auto& t : tx) {
      const double a = 0.5 + 0.4 * std::cos(c_[3] * t.x + c_[4] * rx.y);
      const double th = c_[5] * (t.y - rx.x) + t.z;
      signals.push_back(std::polar(a, th));
    }
  }

 private:
  double c_[6]{};
};

class NanModel : public MultipathModel {
 public:
  void evaluate(std::span<const Vec3> tx, const Vec3&, double& delta,
                std::vector<ComplexSignal>& signals) const override {
    delta = std::nan("");
    signals.assign(tx.size(), {0.0, 0.0});
  }
};

RenderConfig one_ray() {
  RenderConfig c;
  c.k_tx = 1;
  c.k_rx = 1;
  c.s = 1;
  return c;
}

LosPointSet single_tx() {
  LosPointSet t;
  t.role = Role::kTx;
  t.tx_points.push_back({{1, 1, 1}, 1.0});
  return t;
}

LosPointSet ray_with(std::vector<double> sigma) {
  LosPointSet r;
  r.role = Role::kRx;
  RxRay ray{{1, 0, 0}, 0, {}};
  double x = 3.0;
  for (double s : sigma) {
    ray.samples.push_back({{x, 0, 0}, s});
    x += s;
  }
  r.rays.push_back(ray);
  return r;
}

}  // namespace

TEST_CASE("closed room: every ray hits and Tx weights are normalized") {
  const auto grid = scene::make_closed_room({6, 5, 3});
  RenderConfig cfg;
  const auto tx = sample_los_points(grid, {3, 2.5, 1.5}, Role::kTx, cfg);
  CHECK(tx.tx_points.size() == static_cast<std::size_t>(cfg.k_tx));
  double sum = 0.0;
  for (const auto& p : tx.tx_points) {
    CHECK(p.alpha > 0.0);
    sum += p.alpha;
  }
  CHECK(sum == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(std::is_sorted(tx.tx_points.begin(), tx.tx_points.end(),
                       [](const TxPoint& a, const TxPoint& b) { return lex_less(a.pos, b.pos); }));

  const auto rx = sample_los_points(grid, {3, 2.5, 1.5}, Role::kRx, cfg);
  CHECK(rx.rays.size() == static_cast<std::size_t>(cfg.k_rx));
  CHECK(rx.rx_sample_count() == static_cast<std::size_t>(cfg.k_rx * cfg.s));
}

TEST_CASE("Rx sub-samples are spread evenly over the sub range") {
  const auto grid = scene::make_closed_room({8, 4, 3});
  auto cfg = one_ray();
  cfg.s = 4;
  cfg.sub_range = 0.5;
  // The single Fibonacci direction is +x; the wall face is at x = 8.
  const auto rx = sample_los_points(grid, {5.0, 2.0, 1.5}, Role::kRx, cfg);
  REQUIRE(rx.rays.size() == 1);
  const auto& smp = rx.rays[0].samples;
  REQUIRE(smp.size() == 4);
  const double expect[] = {3.0, 3.0 + 0.5 / 3, 3.0 + 1.0 / 3, 3.5};
  for (int i = 0; i < 4; ++i) {
    CHECK(smp[i].pos.x - 5.0 == doctest::Approx(expect[i]).epsilon(1e-12));
    CHECK(smp[i].sigma == doctest::Approx(0.5 / 3).epsilon(1e-12));
  }
}

TEST_CASE("Rx samples lie along the ray within the sub range beyond the hit") {
  const auto grid = scene::make_random_rooms(4);
  RenderConfig cfg;
  cfg.k_rx = 32;
  Rng rng(2);
  for (int t = 0; t < 10; ++t) {
    Vec3 p;
    do p = {rng.uniform(0.5, 19.5), rng.uniform(0.5, 14.5), rng.uniform(0.5, 2.5)};
    while (!grid.free_at(p));
    const auto rx = sample_los_points(grid, p, Role::kRx, cfg);
    for (const auto& ray : rx.rays) {
      const auto hit = scene::raycast(grid, p, ray.dir, 1e3);
      REQUIRE(hit);
      double prev = -1.0;
      for (const auto& s : ray.samples) {
        const double t_along = (s.pos - p).dot(ray.dir);
        CHECK(t_along > prev);
        CHECK(t_along >= hit->distance - 1e-9);
        CHECK(t_along <= hit->distance + cfg.sub_range + 1e-9);
        prev = t_along;
      }
    }
  }
}

TEST_CASE("sampling errors") {
  const scene::OccupancyGrid open({20, 20, 20}, 0.25, {0, 0, 0});
  CHECK_THROWS_AS(sample_los_points(open, {2.5, 2.5, 2.5}, Role::kTx, {}), DegenerateScene);
  CHECK_THROWS_AS(sample_los_points(open, {2.5, 2.5, 2.5}, Role::kRx, {}), DegenerateScene);
  const auto grid = scene::make_closed_room({4, 4, 3});
  CHECK_THROWS_AS(sample_los_points(grid, {-0.1, 2, 1}, Role::kTx, {}), DomainError);
  RenderConfig bad;
  bad.sub_range = 0.0;
  CHECK_THROWS_AS(sample_los_points(grid, {2, 2, 1}, Role::kRx, bad), DomainError);
}

TEST_CASE("direct path weights") {
  RenderConfig cfg;
  const Vec3 tx{0, 0, 0};
  const std::vector<Vec3> ring{{3, 0, 0}, {0, 3, 0}, {-3, 0, 0}, {0, 0, 3}};
  for (double a : direct_path_weights(tx, ring, cfg)) CHECK(a == doctest::Approx(0.25).epsilon(1e-15));

  const std::vector<Vec3> two{{1, 0, 0}, {0, 2, 0}};
  const auto w = direct_path_weights(tx, two, cfg);
  CHECK(w[0] == doctest::Approx(0.8).epsilon(1e-15));
  CHECK(w[1] == doctest::Approx(0.2).epsilon(1e-15));

  const std::vector<Vec3> one{{0.2, 0, 0}};
  CHECK(direct_path_weights(tx, one, cfg)[0] == 1.0);
  CHECK_THROWS_AS(direct_path_weights(tx, std::vector<Vec3>{}, cfg), DomainError);
}

TEST_CASE("rendering a zero-density model gives zero") {
  const auto cfg = one_ray();
  const ConstantModel m(0.0, {1.0, 0.0});
  CHECK(render_rx(single_tx(), ray_with({0.2, 0.2, 0.2}), m, cfg).magnitude == 0.0);
}

TEST_CASE("an opaque first sample passes its signal through unchanged") {
  const auto cfg = one_ray();
  const ConstantModel m(1e6, {1.0, 0.0});
  const auto r = render_rx(single_tx(), ray_with({0.1}), m, cfg);
  CHECK(r.magnitude == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("two half-opaque samples render to three quarters") {
  const auto cfg = one_ray();
  const double sigma = 0.25;
  const ConstantModel m(std::log(2.0) / sigma, {1.0, 0.0});
  const auto r = render_rx(single_tx(), ray_with({sigma, sigma}), m, cfg);
  CHECK(r.magnitude == doctest::Approx(0.75).epsilon(1e-12));
  CHECK(r.per_ray.size() == 1);
}

TEST_CASE("non-finite model output is a numeric fault") {
  const NanModel m;
  CHECK_THROWS_AS(render_rx(single_tx(), ray_with({0.1}), m, one_ray()), NumericFault);
}

TEST_CASE("ray weights form a partition of at most one") {
  Rng rng(6);
  for (int t = 0; t < 500; ++t) {
    const int n = 1 + static_cast<int>(rng.below(8));
    std::vector<double> sigma(n);
    std::vector<double> delta(n);
    for (int i = 0; i < n; ++i) {
      sigma[i] = rng.uniform(0.01, 1.0);
      delta[i] = rng.uniform() < 0.2 ? 0.0 : std::exp(rng.uniform(-5.0, 5.0));
    }
    const auto w = ray_weights(sigma, delta);
    CHECK(w.transmittance[0] == 1.0);
    double sum = 0.0;
    for (int i = 0; i < n; ++i) {
      if (i > 0) CHECK(w.transmittance[i] <= w.transmittance[i - 1]);
      CHECK(w.weight[i] >= 0.0);
      CHECK(w.weight[i] <= 1.0);
      sum += w.weight[i];
    }
    CHECK(sum <= 1.0 + 1e-9);
    // The weights telescope to one minus the final transmittance.
    double optical = 0.0;
    for (int i = 0; i < n; ++i) optical += sigma[i] * delta[i];
    CHECK(sum == doctest::Approx(1.0 - std::exp(-optical)).epsilon(1e-9));
  }
}

TEST_CASE("render output ignores the order of Tx points") {
  const auto grid = scene::make_two_room_corridor();
  RenderConfig cfg;
  cfg.k_tx = 32;
  cfg.k_rx = 16;
  const auto tx = sample_los_points(grid, {4.5, 1.5, 1.25}, Role::kTx, cfg);
  const auto rx = sample_los_points(grid, {12.5, 1.5, 1.25}, Role::kRx, cfg);
  const WavyModel m(3);
  const auto base = render_rx(tx, rx, m, cfg);
  Rng rng(9);
  for (int t = 0; t < 5; ++t) {
    auto shuffled = tx;
    rng.shuffle(shuffled.tx_points.begin(), shuffled.tx_points.end());
    const auto r = render_rx(shuffled, rx, m, cfg);
    CHECK(r.received == base.received);
  }
}

TEST_CASE("LOS compensation") {
  const auto grid = scene::make_two_rooms();
  RenderConfig cfg;
  CHECK(los_compensate(0.3, {2, 2, 1.25}, {3, 2, 1.25}, grid, cfg) == -30.0);
  CHECK(los_compensate(0.0, {2, 2, 1.25}, {9, 2, 1.25}, grid, cfg) == -80.0);
  CHECK(los_compensate(0.5, {2, 2, 1.25}, {9, 2, 1.25}, grid, cfg) == doctest::Approx(-55.0).epsilon(1e-12));
  CHECK(los_alpha({2, 2, 1.25}, {4, 2, 1.25}, grid, cfg) == doctest::Approx(0.25));
  CHECK(los_alpha({2, 2, 1.25}, {9, 2, 1.25}, grid, cfg) == 0.0);
  cfg.los_compensation = false;
  CHECK(los_compensate(0.5, {2, 2, 1.25}, {3, 2, 1.25}, grid, cfg) == doctest::Approx(-55.0).epsilon(1e-12));
  CHECK(dbm_to_level(level_to_dbm(0.37, cfg), cfg) == doctest::Approx(0.37));
}

TEST_CASE("predictions stay between floor and reference") {
  RenderConfig cfg;
  cfg.k_tx = 16;
  cfg.k_rx = 16;
  const auto grid = scene::make_two_rooms();
  const ConstantModel zero(0.0, {0.0, 0.0});
  CHECK(predict_rssi(zero, grid, {2, 2, 1.25}, {2.3, 2.1, 1.25}, cfg) == -30.0);
  CHECK(predict_rssi(zero, grid, {2, 2, 1.25}, {9, 2, 1.25}, cfg) == -80.0);

  for (std::uint64_t seed = 0; seed < 4; ++seed) {
    const auto rooms = scene::make_random_rooms(seed);
    const WavyModel m(seed);
    const ConstantModel hot(50.0, {3.0, 0.0});
    Rng rng(seed + 100);
    for (int t = 0; t < 6; ++t) {
      Vec3 a;
      Vec3 b;
      do a = {rng.uniform(0.3, 19.7), rng.uniform(0.3, 14.7), 1.25};
      while (!rooms.free_at(a));
      do b = {rng.uniform(0.3, 19.7), rng.uniform(0.3, 14.7), 1.25};
      while (!rooms.free_at(b) || b == a);
      for (const MultipathModel* model : {static_cast<const MultipathModel*>(&m),
                                          static_cast<const MultipathModel*>(&hot)}) {
        const double v = predict_rssi(*model, rooms, a, b, cfg);
        CHECK(v >= cfg.noise_floor_dbm);
        CHECK(v <= cfg.ref_power_dbm);
      }
    }
  }
}

TEST_CASE("render config validation and JSON") {
  RenderConfig c;
  c.k_rx = 2;
  c.gain = {0.7, 0.3};
  const auto back = render_config_from_json(to_json(c));
  CHECK(back.gain == c.gain);
  CHECK(back.gain_at(0) == 0.7);
  c.gain = {0.7, 0.2};
  CHECK_THROWS_AS(validate(c), DomainError);
  c.gain.clear();
  CHECK(c.gain_at(1) == 0.5);
  c.s = 0;
  CHECK_THROWS_AS(validate(c), DomainError);
  CHECK_THROWS_AS(render_config_from_json({{"k_tx", "many"}}), MalformedInput);
}

TEST_CASE("heatmap export") {
  const auto grid = scene::make_closed_room({4, 3, 3});
  RenderConfig cfg;
  cfg.k_tx = 8;
  cfg.k_rx = 8;
  const ConstantModel m(5.0, {0.5, 0.0});
  const auto map = render_heatmap(m, grid, {0.5, 0.5, 1.25}, 1.25, 1.0, cfg);
  CHECK(map.nx == 4);
  CHECK(map.ny == 3);
  CHECK(std::isnan(map.at(0, 0)));
  CHECK(map.at(3, 2) > -80.0);
  const auto dir = std::filesystem::temp_directory_path();
  write_heatmap_csv(map, dir / "radiomap_hm.csv");
  write_heatmap_pgm(map, cfg, dir / "radiomap_hm.pgm");
  std::ifstream csv(dir / "radiomap_hm.csv");
  int lines = 0;
  for (std::string l; std::getline(csv, l);) ++lines;
  CHECK(lines == 1 + 12);
  CHECK(std::filesystem::file_size(dir / "radiomap_hm.pgm") == std::string("P5\n4 3\n255\n").size() + 12);
}
