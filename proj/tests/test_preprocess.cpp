// SPDX-License-Identifier: Apache-2.0
// Copyright Contributors to the qtrack project.

#include <catch_amalgamated.hpp>

#include <algorithm>
#include <cmath>
#include <map>
#include <numbers>
#include <numeric>
#include <random>
#include <set>
#include <sstream>

#include "qtrack/error.hpp"
#include "qtrack/preprocess.hpp"
#include "support.hpp"

using namespace qtrack;
using testing::cyl;

namespace {

constexpr double kPi = std::numbers::pi;

// Plain Gaussian product-kernel sum over every sample.
double direct_density(const KdeModel& m, double z, double angle) {
  const auto& h = m.bandwidth();
  double sum = 0.0;
  for (const auto& s : m.samples()) {
    const double u = (z - s[0]) / h[0];
    const double v = (angle - s[1]) / h[1];
    sum += std::exp(-0.5 * (u * u + v * v));
  }
  return sum / (static_cast<double>(m.samples().size()) * 2.0 * kPi * h[0] * h[1]);
}

std::vector<Event> generated(int count, std::uint64_t first_seed, int n_particles = 100) {
  std::vector<Event> out;
  for (int i = 0; i < count; ++i) {
    GeneratorConfig g;
    g.n_particles = n_particles;
    g.seed = first_seed + static_cast<std::uint64_t>(i);
    out.push_back(generate_event(g));
  }
  return out;
}

// Hits a and b on the rz-line with the given intercept and angle.
std::pair<Hit, Hit> segment_with(double z0, double angle, double phi = 0.3) {
  const double cot = std::cos(angle) / std::sin(angle);
  return {cyl(1, 100.0, phi, z0 + 100.0 * cot), cyl(2, 200.0, phi, z0 + 200.0 * cot)};
}

std::vector<Edge> chain(std::vector<HitId> hits, EdgeId first_id) {
  std::vector<Edge> out;
  for (std::size_t i = 1; i < hits.size(); ++i) out.push_back({first_id++, hits[i - 1], hits[i], 1.0});
  return out;
}

EdgeBias flat_bias(const std::vector<Edge>& edges) {
  EdgeBias b;
  for (const Edge& e : edges) b[e.id] = 1.0;
  return b;
}

}  // namespace

// --- sectors ---------------------------------------------------------------

TEST_CASE("sector geometry") {
  const Event e = testing::event_of({cyl(1, 50.0, 0.0, 0.0), cyl(2, 50.0, kPi, 0.0), cyl(3, 50.0, -3.0, 0.0)});
  const auto sectors = sectorize(e);
  REQUIRE(sectors.size() == 32);
  for (const Sector& s : sectors) CHECK(s.phi_max - s.phi_min == Catch::Approx(2.0 * kPi / 16.0));
  for (std::size_t k = 1; k < sectors.size(); ++k) {
    CHECK(sectors[k].phi_min - sectors[k - 1].phi_min == Catch::Approx(2.0 * kPi / 32.0));
  }

  SECTION("phi = 0 lies in exactly the two sectors whose intervals hold it") {
    std::vector<int> holders;
    for (const Sector& s : sectors) {
      const bool listed = std::count(s.hit_ids.begin(), s.hit_ids.end(), HitId{1}) == 1;
      CHECK(listed == s.contains(0.0));
      if (listed) holders.push_back(s.index);
    }
    CHECK(holders == std::vector<int>{15, 16});
  }

  SECTION("phi = pi wraps into the first and last sectors") {
    const auto ks = sectors_of(kPi);
    CHECK(std::set<int>(ks.begin(), ks.end()) == std::set<int>{0, 31});
  }
}

TEST_CASE("every hit sits in exactly two sectors") {
  const Event e = generated(1, 11).front();
  const auto sectors = sectorize(e);
  std::map<HitId, int> count;
  std::size_t total = 0;
  for (const Sector& s : sectors) {
    total += s.hit_ids.size();
    for (HitId id : s.hit_ids) {
      ++count[id];
      CHECK(s.contains(e.hit(id).phi));
    }
  }
  CHECK(total == 2 * e.hits().size());
  CHECK(count.size() == e.hits().size());
  for (const auto& [id, n] : count) CHECK(n == 2);
}

TEST_CASE("true edges share a sector") {
  std::size_t contained = 0;
  std::size_t total = 0;
  for (const Event& e : generated(3, 21)) {
    for (const auto& [a, b] : e.true_edges()) {
      const auto sa = sectors_of(e.hit(a).phi);
      const auto sb = sectors_of(e.hit(b).phi);
      ++total;
      if (std::find_first_of(sa.begin(), sa.end(), sb.begin(), sb.end()) != sa.end()) ++contained;
    }
  }
  CHECK(static_cast<double>(contained) / static_cast<double>(total) > 0.99);
}

TEST_CASE("sectorize rejects an empty event") { CHECK_THROWS_AS(sectorize(Event{}), Error); }

// --- kernel density --------------------------------------------------------

TEST_CASE("segment features") {
  const auto f = segment_features(cyl(1, 1.0, 0.0, 3.0), cyl(2, 2.0, 0.0, 4.0));
  CHECK(f.z_intercept == Catch::Approx(2.0));
  CHECK(f.rz_angle == Catch::Approx(kPi / 4.0));
  CHECK_THROWS_AS(segment_features(cyl(1, 1.0, 0.0, 3.0), cyl(2, 1.0, 1.0, 4.0)), Error);
}

TEST_CASE("kde agrees with a direct Gaussian sum") {
  std::mt19937_64 rng(5);
  std::normal_distribution<double> z(0.0, 5.0);
  std::normal_distribution<double> a(1.2, 0.2);
  std::vector<std::array<double, 2>> samples;
  for (int i = 0; i < 500; ++i) samples.push_back({z(rng), a(rng)});
  const KdeModel m = KdeModel::fit(samples);
  const double n = 500.0;

  SECTION("Scott bandwidths") {
    CHECK(m.bandwidth()[0] == Catch::Approx(5.0 * std::pow(n, -1.0 / 6.0)).epsilon(0.15));
    CHECK(m.bandwidth()[1] == Catch::Approx(0.2 * std::pow(n, -1.0 / 6.0)).epsilon(0.15));
  }

  SECTION("pointwise, up to the documented truncation") {
    const double slack = std::exp(-0.5 * KdeModel::kCutoff * KdeModel::kCutoff) * m.normalization() * n;
    std::uniform_real_distribution<double> qz(-20.0, 20.0);
    std::uniform_real_distribution<double> qa(0.5, 1.9);
    for (int i = 0; i < 200; ++i) {
      const double x = qz(rng);
      const double y = qa(rng);
      const double d = m.density(x, y);
      CHECK(d >= 0.0);
      CHECK(std::abs(d - direct_density(m, x, y)) <= slack);
    }
  }

  SECTION("ten bandwidths from every sample the density is negligible") {
    double far_z = samples[0][0];
    for (const auto& s : samples) far_z = std::max(far_z, s[0]);
    far_z += 10.0 * m.bandwidth()[0];
    const double oracle = direct_density(m, far_z, 1.2);
    CHECK(oracle < 1e-6 * m.peak_density());
    CHECK(m.density(far_z, 1.2) < 1e-6 * m.peak_density());
  }

  SECTION("integrates to one on a bounded grid") {
    const double z0 = -45.0;
    const double z1 = 45.0;
    const double a0 = 0.0;
    const double a1 = 2.4;
    const int nz = 400;
    const int na = 400;
    const double dz = (z1 - z0) / nz;
    const double da = (a1 - a0) / na;
    double mass = 0.0;
    for (int i = 0; i < nz; ++i) {
      for (int j = 0; j < na; ++j) mass += m.density(z0 + (i + 0.5) * dz, a0 + (j + 0.5) * da);
    }
    CHECK(std::abs(mass * dz * da - 1.0) < 0.01);
  }

  SECTION("peak is the largest value seen") {
    for (const auto& s : samples) CHECK(m.density(s[0], s[1]) <= m.peak_density() * (1.0 + 1e-12));
  }

  SECTION("save and load round trip") {
    std::stringstream buffer;
    m.save(buffer);
    const KdeModel back = KdeModel::load(buffer);
    CHECK(back.samples() == m.samples());
    CHECK(back.bandwidth() == m.bandwidth());
    CHECK(back.peak_density() == m.peak_density());
    CHECK(back.density(1.0, 1.1) == m.density(1.0, 1.1));
  }
}

TEST_CASE("training on segments aimed at the origin peaks at zero intercept") {
  std::vector<Event> events;
  for (std::uint64_t seed = 1; seed <= 3; ++seed) {
    GeneratorConfig g;
    g.n_particles = 50;
    g.noise_fraction = 0.0;
    g.smearing_sigma = 0.0;
    g.pt_min = 1000.0;
    g.pt_max = 1000.0;
    g.beamspot_sigma_z = 1e-9;
    g.seed = seed;
    events.push_back(generate_event(g));
  }
  const KdeModel m = train_kde(events);
  CHECK(std::abs(m.mode()[0]) < 1e-3);
  for (double off : {0.1, 0.5, 2.0}) {
    CHECK(m.density(0.0, m.mode()[1]) > m.density(off, m.mode()[1]));
    CHECK(m.density(0.0, m.mode()[1]) > m.density(-off, m.mode()[1]));
  }
}

TEST_CASE("train_kde needs enough true segments") {
  GeneratorConfig g;
  g.n_particles = 2;
  const std::vector<Event> few{generate_event(g)};
  CHECK_THROWS_AS(train_kde(few), Error);
}

TEST_CASE("edge prior") {
  const auto train = generated(3, 100);
  const KdeModel m = train_kde(train);

  SECTION("a segment on the mode scores one") {
    const auto [a, b] = segment_with(m.mode()[0], m.mode()[1]);
    CHECK(edge_prior(m, a, b) == Catch::Approx(1.0).epsilon(1e-9));
  }

  SECTION("pure and bounded") {
    const Event& e = train.front();
    for (const auto& [ia, ib] : e.true_edges()) {
      const double p = edge_prior(m, e.hit(ia), e.hit(ib));
      CHECK(p == edge_prior(m, e.hit(ia), e.hit(ib)));
      CHECK(p >= 0.0);
      CHECK(p <= 1.0);
    }
  }

  SECTION("a true segment outranks one that misses the beamspot by 500 mm") {
    const Event& e = train.front();
    const auto [ia, ib] = e.true_edges().front();
    const Hit& a = e.hit(ia);
    const Hit& b = e.hit(ib);
    const double angle = segment_features(a, b).rz_angle;
    const auto [fa, fb] = segment_with(500.0, angle);
    const double truth = edge_prior(m, a, b);
    const double off = edge_prior(m, fa, fb);
    CHECK(truth > off);
    CHECK(direct_density(m, segment_features(a, b).z_intercept, angle) > direct_density(m, 500.0, angle));
  }

  SECTION("inner hit must be closer to the beam") {
    CHECK_THROWS_AS(edge_prior(m, cyl(1, 200.0, 0.0, 0.0), cyl(2, 100.0, 0.0, 0.0)), Error);
  }
}

// --- candidates ------------------------------------------------------------

TEST_CASE("candidate selection") {
  const auto train = generated(4, 200);
  const auto calib = generated(3, 300);
  const KdeModel m = train_kde(train);

  SECTION("calibrated cut keeps the target recall on the calibration set") {
    const CandidateCut cut = calibrate_cut(m, calib, 0.93);
    CHECK(cut.calibration_recall >= 0.93);
    std::size_t kept = 0;
    std::size_t total = 0;
    for (const Event& e : calib) {
      for (const auto& [a, b] : e.true_edges()) {
        ++total;
        if (edge_prior(m, e.hit(a), e.hit(b)) >= cut.threshold) ++kept;
      }
    }
    CHECK(static_cast<double>(kept) / static_cast<double>(total) >= 0.93);
    CHECK(cut.calibration_edges == total);
  }

  SECTION("target recall outside (0, 1] is rejected") {
    CHECK_THROWS_AS(calibrate_cut(m, calib, 0.0), Error);
    CHECK_THROWS_AS(calibrate_cut(m, calib, 1.5), Error);
  }

  SECTION("a zero threshold keeps every r-ordered pair, visited once each") {
    const Event& e = calib.front();
    const auto sectors = sectorize(e);
    const Sector& s = sectors[3];
    PairCounter counter;
    const auto edges = select_candidates(e, s, m, CandidateCut{0.0, 1.0, 1.0, 0}, &counter);
    std::size_t ordered = 0;
    for (HitId a : s.hit_ids) {
      for (HitId b : s.hit_ids) {
        if (e.hit(a).r < e.hit(b).r) ++ordered;
      }
    }
    CHECK(edges.size() == ordered);
    const std::uint64_t h = s.hit_ids.size();
    CHECK(counter.pair_visits == h * (h - 1) / 2);
    for (std::size_t i = 0; i < edges.size(); ++i) {
      CHECK(edges[i].id == static_cast<EdgeId>(i));
      CHECK(e.hit(edges[i].a).r < e.hit(edges[i].b).r);
    }
  }

  SECTION("candidates are O(1%) pure at the calibrated cut") {
    const CandidateCut cut = calibrate_cut(m, calib, 0.93);
    const Event e = generated(1, 400).front();
    std::set<std::pair<HitId, HitId>> unique;
    for (const Sector& s : sectorize(e)) {
      for (const Edge& c : select_candidates(e, s, m, cut)) unique.insert({c.a, c.b});
    }
    std::size_t good = 0;
    for (const auto& [a, b] : unique) good += e.is_true_edge(a, b) ? 1 : 0;
    const double purity = static_cast<double>(good) / static_cast<double>(unique.size());
    CHECK(purity >= 0.001);
    CHECK(purity <= 0.10);
  }
}

TEST_CASE("edges csv round trip") {
  const std::vector<Edge> edges{{0, 4, 9, 0.125}, {1, 4, 11, 1.0 / 3.0}, {2, 9, 12, 1e-17}};
  std::stringstream buffer;
  write_edges_csv(buffer, edges);
  const auto back = read_edges_csv(buffer);
  REQUIRE(back.size() == edges.size());
  for (std::size_t i = 0; i < edges.size(); ++i) {
    CHECK(back[i].id == edges[i].id);
    CHECK(back[i].a == edges[i].a);
    CHECK(back[i].b == edges[i].b);
    CHECK(back[i].prior == edges[i].prior);
  }
  std::stringstream bad("edge_id,hit_a,hit_b,prior\n0,1,2\n");
  CHECK_THROWS_WITH(read_edges_csv(bad), Catch::Matchers::ContainsSubstring(":2"));
}

// --- sub-graphs ------------------------------------------------------------

TEST_CASE("sub-graph decomposition") {
  SECTION("two chains without shared hits give two sub-graphs") {
    auto edges = chain({1, 2, 3}, 0);
    const auto second = chain({10, 11, 12, 13}, 2);
    edges.insert(edges.end(), second.begin(), second.end());
    const auto gs = subgraph(edges, flat_bias(edges));
    REQUIRE(gs.size() == 2);
    CHECK(gs[0].m() == 3);
    CHECK(gs[1].m() == 2);
    CHECK(gs[0].index == 0);
  }

  SECTION("one chain of four edges is one sub-graph") {
    const auto edges = chain({1, 2, 3, 4, 5}, 0);
    const auto gs = subgraph(edges, flat_bias(edges));
    REQUIRE(gs.size() == 1);
    CHECK(gs[0].m() == 4);
  }

  SECTION("a star of eight keeps the five highest biases") {
    std::vector<Edge> edges;
    EdgeBias bias;
    const std::vector<double> values{0.3, 2.0, -1.0, 0.9, 5.0, 0.9, 0.1, 3.3};
    for (std::size_t i = 0; i < values.size(); ++i) {
      edges.push_back({static_cast<EdgeId>(i), 0, static_cast<HitId>(i + 1), 1.0});
      bias[static_cast<EdgeId>(i)] = values[i];
    }
    std::vector<std::size_t> order(values.size());
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](std::size_t x, std::size_t y) { return values[x] > values[y]; });
    std::vector<EdgeId> expected;
    for (std::size_t k = 0; k < 5; ++k) expected.push_back(static_cast<EdgeId>(order[k]));
    std::sort(expected.begin(), expected.end());

    CHECK(prune_by_degree(edges, bias, 5) == expected);
    const auto gs = subgraph(edges, bias, 5);
    REQUIRE(gs.size() == 1);
    CHECK(gs[0].edge_ids == expected);
  }

  SECTION("bias ties go to the smaller edge id") {
    std::vector<Edge> edges;
    for (EdgeId i = 0; i < 4; ++i) edges.push_back({i, 0, i + 1, 1.0});
    CHECK(prune_by_degree(edges, flat_bias(edges), 2) == std::vector<EdgeId>{0, 1});
  }

  SECTION("missing bias is an error") {
    const auto edges = chain({1, 2, 3}, 0);
    CHECK_THROWS_AS(subgraph(edges, EdgeBias{{0, 1.0}}), Error);
  }
}

TEST_CASE("sub-graphs partition the pruned edges regardless of input order") {
  std::mt19937_64 rng(9);
  std::uniform_int_distribution<HitId> hit(1, 60);
  std::uniform_real_distribution<double> value(-1.0, 1.0);
  std::vector<Edge> edges;
  EdgeBias bias;
  std::set<std::pair<HitId, HitId>> seen;
  while (edges.size() < 150) {
    HitId a = hit(rng);
    HitId b = hit(rng);
    if (a == b) continue;
    if (a > b) std::swap(a, b);
    if (!seen.insert({a, b}).second) continue;
    const auto id = static_cast<EdgeId>(edges.size());
    edges.push_back({id, a, b, 0.5});
    bias[id] = std::round(value(rng) * 4.0) / 4.0;  // plenty of ties
  }

  const auto survivors = prune_by_degree(edges, bias, 3);
  const auto gs = subgraph(edges, bias, 3);
  std::vector<EdgeId> all;
  for (const SubGraph& g : gs) all.insert(all.end(), g.edge_ids.begin(), g.edge_ids.end());
  std::sort(all.begin(), all.end());
  CHECK(all == survivors);
  CHECK(std::adjacent_find(all.begin(), all.end()) == all.end());
  for (std::size_t k = 1; k < gs.size(); ++k) CHECK(gs[k - 1].m() >= gs[k].m());

  std::map<HitId, int> degree;
  for (EdgeId id : survivors) {
    ++degree[edges[static_cast<std::size_t>(id)].a];
    ++degree[edges[static_cast<std::size_t>(id)].b];
  }
  for (const auto& [h, d] : degree) CHECK(d <= 3);

  std::vector<Edge> shuffled = edges;
  std::shuffle(shuffled.begin(), shuffled.end(), rng);
  const auto again = subgraph(shuffled, bias, 3);
  REQUIRE(again.size() == gs.size());
  for (std::size_t k = 0; k < gs.size(); ++k) CHECK(again[k].edge_ids == gs[k].edge_ids);
}

TEST_CASE("link-restricted flood fill follows only the given links") {
  const auto edges = chain({1, 2, 3, 4}, 0);
  const std::vector<std::pair<EdgeId, EdgeId>> links{{0, 1}};
  const auto gs = subgraph(edges, flat_bias(edges), 5, links);
  REQUIRE(gs.size() == 2);
  CHECK(gs[0].edge_ids == std::vector<EdgeId>{0, 1});
  CHECK(gs[1].edge_ids == std::vector<EdgeId>{2});
}
