#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <numbers>

#include "eegstack/topomap.hpp"
#include "test_support.hpp"

using namespace eegstack;
using namespace testing_support;

namespace {

std::vector<Position> ring(std::size_t n, double radius) {
  std::vector<Position> p(n);
  for (std::size_t i = 0; i < n; ++i) {
    const double a = 2.0 * std::numbers::pi * static_cast<double>(i) / static_cast<double>(n) + 0.1;
    p[i] = {radius * std::cos(a), radius * std::sin(a)};
  }
  return p;
}

TrialSet erp_set(std::size_t n_trials, std::size_t n_ch, std::size_t n_samples) {
  TrialSet ts;
  ts.subject_id = "t";
  ts.sample_rate = 256.0;
  ts.class_names = {"a", "b"};
  for (std::size_t c = 0; c < n_ch; ++c) ts.channel_names.push_back("c" + std::to_string(c));
  ts.n_trials = n_trials;
  ts.n_samples = n_samples;
  ts.intervals = {{"action", 0, static_cast<std::uint32_t>(n_samples)}};
  for (std::size_t t = 0; t < n_trials; ++t) ts.labels.push_back(static_cast<int>(t % 2));
  ts.data.assign(n_trials * n_ch * n_samples, 0.0f);
  return ts;
}

}  // namespace

TEST_CASE("opposite trials cancel in the ERP") {
  auto ts = erp_set(4, 3, 64);
  Rng rng(1);
  for (std::size_t c = 0; c < 3; ++c) {
    const auto x = gaussian(rng, 64);
    for (std::size_t t = 0; t < 4; ++t)
      for (std::size_t s = 0; s < 64; ++s) ts.signal(t, c)[s] = static_cast<float>(t % 2 ? -x[s] : x[s]);
  }
  for (double v : compute_erp(ts, std::nullopt, "action")) CHECK(std::abs(v) < 1e-12);
}

TEST_CASE("single-trial ERP is that trial's RMS") {
  auto ts = erp_set(1, 3, 50);
  Rng rng(2);
  std::vector<double> expect;
  for (std::size_t c = 0; c < 3; ++c) {
    double acc = 0.0;
    for (auto& v : ts.signal(0, c)) {
      v = static_cast<float>(rng.normal());
      acc += double(v) * double(v);
    }
    expect.push_back(std::sqrt(acc / 50.0));
  }
  const auto erp = compute_erp(ts, std::nullopt, "action");
  for (std::size_t c = 0; c < 3; ++c) CHECK(erp[c] == doctest::Approx(expect[c]).epsilon(1e-12));
  const auto mean = compute_erp(ts, 0, "action", ErpSummary::mean);
  CHECK(mean.size() == 3);
  CHECK_THROWS_AS(compute_erp(ts, 1, "action"), DataError);
  CHECK_THROWS_AS(compute_erp(ts, std::nullopt, "cue"), DataError);
}

TEST_CASE("class signature channels dominate the ERP") {
  SyntheticConfig cfg;
  cfg.n_trials = 80;
  cfg.n_channels = 8;
  cfg.n_samples = 640;
  cfg.class_freqs = {8.0, 12.0};
  cfg.class_channels = {{0, 7}, {2, 5}};
  const auto data = generate_synthetic(cfg, 3);
  const auto erp = compute_erp(data.trials, 1, "action");
  const double lo = std::min(erp[2], erp[5]);
  for (std::size_t c = 0; c < 8; ++c)
    if (c != 2 && c != 5) CHECK(lo >= 3.0 * erp[c]);
}

TEST_CASE("uniform values give a uniform field") {
  const auto pos = ring(6, 0.7);
  const std::vector<double> v(6, 2.5);
  const auto f = render_topomap(v, pos, 32);
  for (std::size_t i = 0; i < 32; ++i)
    for (std::size_t j = 0; j < 32; ++j) {
      if (f.inside(i, j))
        CHECK(f.at(i, j) == doctest::Approx(2.5).epsilon(1e-12));
      else
        CHECK(std::isnan(f.at(i, j)));
    }
  const auto pgm = encode_pgm(f);
  const std::string header = "P5\n32 32\n255\n";
  CHECK(std::string(pgm.begin(), pgm.begin() + static_cast<long>(header.size())) == header);
  CHECK(pgm.size() == header.size() + 32 * 32);
}

TEST_CASE("a single hot channel peaks at its nearest cell") {
  const auto pos = ring(8, 0.6);
  for (std::size_t hot = 0; hot < 8; ++hot) {
    std::vector<double> v(8, 0.0);
    v[hot] = 1.0;
    const std::size_t G = 48;
    const auto f = render_topomap(v, pos, G);
    std::size_t best_i = 0, best_j = 0, near_i = 0, near_j = 0;
    double best = -1.0, near_d = 1e9;
    for (std::size_t i = 0; i < G; ++i)
      for (std::size_t j = 0; j < G; ++j) {
        if (!f.inside(i, j)) continue;
        if (f.at(i, j) > best) {
          best = f.at(i, j);
          best_i = i;
          best_j = j;
        }
        const double dx = grid_coord(j, G) - pos[hot].x, dy = -grid_coord(i, G) - pos[hot].y;
        if (dx * dx + dy * dy < near_d) {
          near_d = dx * dx + dy * dy;
          near_i = i;
          near_j = j;
        }
      }
    CHECK(best_i == near_i);
    CHECK(best_j == near_j);
  }
}

TEST_CASE("a mirrored dipole gives an antisymmetric field") {
  const std::vector<Position> pos = {{-0.5, 0.2}, {0.5, 0.2}, {0.0, 0.6}, {0.0, -0.6}};
  const std::vector<double> v = {1.0, -1.0, 0.0, 0.0};
  const std::size_t G = 40;
  const auto f = render_topomap(v, pos, G);
  for (std::size_t i = 0; i < G; ++i)
    for (std::size_t j = 0; j < G; ++j) {
      if (!f.inside(i, j)) continue;
      CHECK(std::abs(f.at(i, j) + f.at(i, G - 1 - j)) < 1e-9);
    }
}

TEST_CASE("field properties over random montages") {
  Rng rng(4);
  for (int trial = 0; trial < 15; ++trial) {
    const std::size_t n = 3 + rng.below(20);
    std::vector<Position> pos(n);
    std::vector<double> v(n);
    for (std::size_t c = 0; c < n; ++c) {
      const double r = std::sqrt(rng.uniform()), a = rng.uniform(0.0, 2.0 * std::numbers::pi);
      pos[c] = {r * std::cos(a), r * std::sin(a)};
      v[c] = rng.normal() * 5.0;
    }
    const std::size_t G = 16 + rng.below(40);
    const auto f = render_topomap(v, pos, G);
    const double lo = *std::min_element(v.begin(), v.end()), hi = *std::max_element(v.begin(), v.end());
    for (std::size_t i = 0; i < G; ++i)
      for (std::size_t j = 0; j < G; ++j)
        if (f.inside(i, j)) {
          CHECK(std::isfinite(f.at(i, j)));
          CHECK(f.at(i, j) >= lo - 1e-12);
          CHECK(f.at(i, j) <= hi + 1e-12);
        }
    // Permuting channels with their positions changes nothing.
    std::vector<std::size_t> perm(n);
    for (std::size_t c = 0; c < n; ++c) perm[c] = c;
    rng.shuffle(perm.begin(), perm.end());
    std::vector<Position> pp(n);
    std::vector<double> vp(n);
    for (std::size_t c = 0; c < n; ++c) {
      pp[c] = pos[perm[c]];
      vp[c] = v[perm[c]];
    }
    const auto g = render_topomap(vp, pp, G);
    for (std::size_t k = 0; k < f.grid.size(); ++k)
      if (!std::isnan(f.grid[k])) CHECK(std::abs(f.grid[k] - g.grid[k]) < 1e-12);
    CHECK(encode_pgm(f) == encode_pgm(render_topomap(v, pos, G)));
  }
}

TEST_CASE("render errors") {
  const auto pos = ring(4, 0.5);
  CHECK_THROWS_AS(render_topomap(std::vector<double>(4, 1.0), std::vector<Position>{}, 32), DataError);
  CHECK_THROWS_AS(render_topomap(std::vector<double>(2, 1.0), std::span(pos).first(2), 32), DataError);
  CHECK_THROWS(render_topomap(std::vector<double>(4, 1.0), pos, 8));
}

TEST_CASE("position and field files") {
  TempDir dir("topo");
  const std::vector<std::string> names = {"Fz", "Cz", "Pz"};
  const std::vector<Position> pos = {{0.0, 0.5}, {0.0, 0.0}, {0.0, -0.5}};
  write_positions_csv(names, pos, dir / "pos.csv");
  const auto back = read_positions_csv(dir / "pos.csv");
  REQUIRE(back.size() == 3);
  CHECK(back[0].first == "Fz");
  CHECK(back[2].second == pos[2]);

  std::ofstream(dir / "bad.csv") << "channel_name,x,y\nA,0.9,0.9\n";
  CHECK_THROWS_AS(read_positions_csv(dir / "bad.csv"), DataError);

  const auto f = render_topomap(std::vector<double>{1.0, 2.0, 3.0}, pos, 16);
  write_field_csv(f, dir / "field.csv");
  const auto csv = slurp(dir / "field.csv");
  CHECK(std::count(csv.begin(), csv.end(), '\n') == 16);
  CHECK(csv.rfind("nan,", 0) == 0);
  write_pgm(f, dir / "map.pgm");
  CHECK(slurp(dir / "map.pgm").size() == std::string("P5\n16 16\n255\n").size() + 256);
}
