// SPDX-License-Identifier: Apache-2.0
// Copyright Contributors to the qtrack project.

#include <catch_amalgamated.hpp>

#include <algorithm>
#include <cmath>
#include <map>
#include <numbers>
#include <random>
#include <sstream>

#include "qtrack/error.hpp"
#include "qtrack/pipeline.hpp"
#include "qtrack/qubo.hpp"
#include "support.hpp"

using namespace qtrack;
using testing::cyl;

namespace {

constexpr double kPi = std::numbers::pi;

double cosine(double ux, double uy, double uz, double vx, double vy, double vz) {
  return (ux * vx + uy * vy + uz * vz) /
         (std::sqrt(ux * ux + uy * uy + uz * uz) * std::sqrt(vx * vx + vy * vy + vz * vz));
}

// Independent evaluation of the standardized cylindrical turning angle.
double theta_oracle(const Hit& a, const Hit& b, const Hit& c) {
  const auto d = [](const Hit& p, const Hit& q) {
    return std::array<double, 3>{(q.r - p.r) / 1000.0, std::remainder(q.phi - p.phi, 2.0 * kPi) / kPi,
                                 (q.z - p.z) / 1000.0};
  };
  const auto u = d(a, b);
  const auto v = d(b, c);
  return cosine(u[0], u[1], u[2], v[0], v[1], v[2]);
}

double length_oracle(const Hit& p, const Hit& q) {
  const double dr = (q.r - p.r) / 1000.0;
  const double dp = std::remainder(q.phi - p.phi, 2.0 * kPi) / kPi;
  const double dz = (q.z - p.z) / 1000.0;
  return std::sqrt(dr * dr + dp * dp + dz * dz);
}

std::map<std::pair<EdgeId, EdgeId>, double> by_edge(const Qubo& q) {
  std::map<std::pair<EdgeId, EdgeId>, double> out;
  for (const auto& [key, v] : q.quadratic) {
    EdgeId x = q.var_to_edge[key.first];
    EdgeId y = q.var_to_edge[key.second];
    out[{std::min(x, y), std::max(x, y)}] = v;
  }
  return out;
}

}  // namespace

TEST_CASE("angle kernel") {
  SECTION("collinear hits give +1") {
    const Hit a = cyl(1, 1.0, 0.0, 0.0);
    const Hit b = cyl(2, 2.0, 0.0, 1.0);
    const Hit c = cyl(3, 3.0, 0.0, 2.0);
    const auto k = angle_kernel(a, b, c);
    CHECK(k.cos_theta == Catch::Approx(1.0).epsilon(1e-12));
    CHECK(k.cos_phi == Catch::Approx(1.0).epsilon(1e-12));
  }

  SECTION("a right-angle kink gives 0") {
    const auto k = angle_kernel(cyl(1, 1000.0, 0.0, 0.0), cyl(2, 2000.0, 0.0, 1000.0), cyl(3, 3000.0, 0.0, 0.0));
    CHECK(std::abs(k.cos_theta) < 1e-12);
  }

  SECTION("transverse cosine on a circle through the origin") {
    const double radius = 800.0;
    const auto on_circle = [&](HitId id, double t) {
      return Hit::at(id, radius * (1.0 - std::cos(t)), radius * std::sin(t), 10.0 * static_cast<double>(id));
    };
    for (double t0 : {0.05, 0.1, 0.2}) {
      const Hit a = on_circle(1, t0);
      const Hit b = on_circle(2, 1.6 * t0);
      const Hit c = on_circle(3, 2.3 * t0);
      const double expected = cosine(b.x - a.x, b.y - a.y, 0.0, c.x - b.x, c.y - b.y, 0.0);
      CHECK(std::abs(angle_kernel(a, b, c).cos_phi - expected) < 1e-12);
      CHECK(std::abs(angle_kernel(a, b, c).cos_theta - theta_oracle(a, b, c)) < 1e-12);
    }
  }

  SECTION("the azimuth difference wraps across pi") {
    const Hit a = cyl(1, 100.0, kPi - 0.01, 0.0);
    const Hit b = cyl(2, 200.0, -kPi + 0.01, 10.0);
    const Hit c = cyl(3, 300.0, -kPi + 0.03, 20.0);
    CHECK(std::abs(angle_kernel(a, b, c).cos_theta - theta_oracle(a, b, c)) < 1e-12);
    CHECK(angle_kernel(a, b, c).cos_theta > 0.99);
  }

  SECTION("zero-length segments are rejected") {
    const Hit a = cyl(1, 100.0, 0.0, 0.0);
    CHECK_THROWS_AS(angle_kernel(a, a, cyl(3, 300.0, 0.0, 0.0)), Error);
  }
}

TEST_CASE("z intercept") {
  CHECK(z_intercept(cyl(1, 1.0, 0.0, 2.0), cyl(2, 2.0, 0.0, 4.0)) == Catch::Approx(0.0).margin(1e-12));
  CHECK(z_intercept(cyl(1, 1.0, 0.0, 3.0), cyl(2, 2.0, 0.0, 4.0)) == Catch::Approx(2.0));
  CHECK_THROWS_AS(z_intercept(cyl(1, 1.0, 0.0, 3.0), cyl(2, 1.0, 0.5, 4.0)), Error);
}

TEST_CASE("default parameters") {
  const QuboParams p;
  CHECK(p.lambda == 13.17);
  CHECK(p.rho == 5.00);
  CHECK(p.eta_bias == 14.41);
  CHECK(p.zeta == 1.79);
  CHECK(p.alpha == 86.20);
  CHECK(p.beta == 20.91);
  CHECK(p.gamma == 9.79);
  CHECK(p.tau == 0.996);
  CHECK(p.scale_r == 1000.0);
  CHECK(p.scale_phi == kPi);
  CHECK(p.scale_z == 1000.0);
  QuboParams bad;
  bad.tau = -1.0;
  CHECK_THROWS_AS(bad.validate(), Error);
}

TEST_CASE("build_qubo, full mode") {
  const QuboParams p;

  SECTION("edges sharing no hit only carry the prior term") {
    const Event e = testing::event_of(
        {cyl(1, 100, 0.0, 0), cyl(2, 200, 0.0, 0), cyl(3, 100, 1.0, 0), cyl(4, 200, 1.0, 0)});
    const std::vector<Edge> edges{{7, 1, 2, 0.8}, {9, 3, 4, 0.25}};
    const Qubo q = build_qubo(edges, e, p);
    CHECK(q.n == 2);
    CHECK(q.quadratic.empty());
    CHECK(q.linear.at(0) == -(p.beta * 0.8 - p.gamma));
    CHECK(q.linear.at(1) == -(p.beta * 0.25 - p.gamma));
    CHECK(q.var_to_edge == std::vector<EdgeId>{7, 9});
    CHECK(energy(q, std::vector<std::uint8_t>{0, 0}) == 0.0);
  }

  SECTION("edges sharing a start hit pay alpha") {
    const Event e = testing::event_of({cyl(1, 100, 0.0, 0), cyl(2, 200, 0.0, 0), cyl(3, 200, 0.2, 0)});
    const std::vector<Edge> edges{{0, 1, 2, 1.0}, {1, 1, 3, 1.0}};
    const Qubo q = build_qubo(edges, e, p);
    REQUIRE(q.quadratic.size() == 1);
    CHECK(q.quadratic.at({0, 1}) == 86.20);
  }

  SECTION("edges sharing an end hit pay alpha") {
    const Event e = testing::event_of({cyl(1, 100, 0.0, 0), cyl(2, 120, 0.2, 0), cyl(3, 200, 0.1, 0)});
    const Qubo q = build_qubo(std::vector<Edge>{{0, 1, 3, 1.0}, {1, 2, 3, 1.0}}, e, p);
    CHECK(q.quadratic.at({0, 1}) == 86.20);
  }

  SECTION("three collinear hits through the origin") {
    const Hit a = cyl(1, 1000.0, 0.0, 1000.0);
    const Hit b = cyl(2, 2000.0, 0.0, 2000.0);
    const Hit c = cyl(3, 3000.0, 0.0, 3000.0);
    const Event e = testing::event_of({a, b, c});
    const Qubo q = build_qubo(std::vector<Edge>{{0, 1, 2, 1.0}, {1, 2, 3, 1.0}}, e, p);

    const double len = std::sqrt(2.0);
    const double coupling = -(1.0 + p.rho) / (len + len) + 0.0;
    REQUIRE(q.quadratic.size() == 1);
    CHECK(q.quadratic.at({0, 1}) == Catch::Approx(coupling).epsilon(1e-12));
    CHECK(q.linear.at(0) == -(p.beta - p.gamma));
    CHECK(q.linear.at(1) == -(p.beta - p.gamma));

    const double hand = 2.0 * -(20.91 - 9.79) + -(1.0 + 5.0) / (2.0 * std::sqrt(2.0));
    CHECK(std::abs(energy(q, std::vector<std::uint8_t>{1, 1}) - hand) <= 1e-9 * std::abs(hand));
  }

  SECTION("generic chained pair matches a term-by-term evaluation") {
    const Hit a = cyl(1, 100.0, 0.30, 12.0);
    const Hit b = cyl(2, 180.0, 0.31, 40.0);
    const Hit c = cyl(3, 260.0, 0.325, 69.0);
    const Event e = testing::event_of({a, b, c});
    QuboParams loose = p;
    loose.lambda = 2.0;
    loose.tau = 0.5;
    const Qubo q = build_qubo(std::vector<Edge>{{0, 1, 2, 0.5}, {1, 2, 3, 0.5}}, e, loose);

    const double ct = theta_oracle(a, b, c);
    const double cp = cosine(b.x - a.x, b.y - a.y, 0.0, c.x - b.x, c.y - b.y, 0.0);
    const double reward = (std::pow(ct, 2.0) + loose.rho * std::pow(cp, 2.0)) / (length_oracle(a, b) + length_oracle(b, c));
    const double zi = c.z - (c.z - a.z) / (c.r - a.r) * c.r;
    const double penalty = loose.eta_bias * std::pow(std::abs(zi) / 1000.0, loose.zeta);
    CHECK(q.quadratic.at({0, 1}) == Catch::Approx(-reward + penalty).epsilon(1e-12));

    SECTION("below tau the reward vanishes but the intercept penalty stays") {
      loose.tau = 1.0;
      const Qubo gated = build_qubo(std::vector<Edge>{{0, 1, 2, 0.5}, {1, 2, 3, 0.5}}, e, loose);
      CHECK(gated.quadratic.at({0, 1}) == Catch::Approx(penalty).epsilon(1e-12));
    }
  }

  SECTION("unknown hits are rejected") {
    const Event e = testing::event_of({cyl(1, 100, 0.0, 0)});
    CHECK_THROWS_WITH(build_qubo(std::vector<Edge>{{0, 1, 5, 1.0}}, e, p),
                      Catch::Matchers::ContainsSubstring("unknown hit"));
  }
}

TEST_CASE("build_qubo, partial and classic modes") {
  const Hit a = cyl(1, 100.0, 0.30, 1.0);
  const Hit b = cyl(2, 180.0, 0.30, 2.0);
  const Hit c = cyl(3, 260.0, 0.30, 3.0);
  const Hit d = cyl(4, 260.0, 0.35, 3.0);
  const Event e = testing::event_of({a, b, c, d});
  const std::vector<Edge> edges{{0, 1, 2, 0.9}, {1, 2, 3, 0.9}, {2, 2, 4, 0.4}, {3, 1, 3, 0.2}};
  const QuboParams p;

  SECTION("partial keeps only chained geometry") {
    const Qubo full = build_qubo(edges, e, p, QuboMode::full);
    const Qubo part = build_qubo(edges, e, p, QuboMode::partial);
    CHECK(part.linear.empty());
    for (const auto& [key, v] : part.quadratic) {
      const bool chained = edges[key.first].b == edges[key.second].a || edges[key.second].b == edges[key.first].a;
      CHECK(chained);
      CHECK(full.quadratic.count(key) == 1);
    }
  }

  SECTION("classic energy equals its defining sum on every assignment") {
    const Qubo q = build_qubo(edges, e, p, QuboMode::classic_dp);
    const double big_n = static_cast<double>(edges.size());
    for (std::uint64_t mask = 0; mask < 16; ++mask) {
      const auto s = testing::bits_of(mask, 4);
      double expected = 0.0;
      double selected = 0.0;
      for (std::size_t i = 0; i < 4; ++i) {
        selected += s[i];
        for (std::size_t j = 0; j < 4; ++j) {
          if (i == j || s[i] == 0 || s[j] == 0) continue;
          if (edges[i].b == edges[j].a) {
            const Hit& ha = e.hit(edges[i].a);
            const Hit& hb = e.hit(edges[i].b);
            const Hit& hc = e.hit(edges[j].b);
            const double ct = std::max(0.0, theta_oracle(ha, hb, hc));
            expected += -0.5 * std::pow(ct, p.lambda) / (length_oracle(ha, hb) + length_oracle(hb, hc));
          }
          if (i < j && (edges[i].a == edges[j].a || edges[i].b == edges[j].b)) expected += p.alpha;
        }
      }
      expected += 0.5 * p.beta * (selected - big_n) * (selected - big_n);
      CHECK(energy(q, s) == Catch::Approx(expected).epsilon(1e-12));
    }
  }
}

TEST_CASE("build_qubo is invariant under edge order") {
  GeneratorConfig g;
  g.n_particles = 30;
  const Event e = generate_event(g);
  std::vector<Edge> edges;
  for (const Particle& part : e.particles()) {
    for (std::size_t k = 1; k < part.hit_ids.size(); ++k) {
      edges.push_back({static_cast<EdgeId>(edges.size()), part.hit_ids[k - 1], part.hit_ids[k], 0.7});
      if (k >= 2) edges.push_back({static_cast<EdgeId>(edges.size()), part.hit_ids[k - 2], part.hit_ids[k], 0.3});
    }
  }
  const Qubo q = build_qubo(edges, e, QuboParams{});
  std::vector<Edge> shuffled = edges;
  std::mt19937_64 rng(2);
  std::shuffle(shuffled.begin(), shuffled.end(), rng);
  const Qubo r = build_qubo(shuffled, e, QuboParams{});
  CHECK(by_edge(q) == by_edge(r));
  std::map<EdgeId, double> lq;
  std::map<EdgeId, double> lr;
  for (const auto& [i, v] : q.linear) lq[q.var_to_edge[i]] = v;
  for (const auto& [i, v] : r.linear) lr[r.var_to_edge[i]] = v;
  CHECK(lq == lr);
}

TEST_CASE("reward cross terms thin out as tau rises") {
  PipelineConfig config;
  config.train_events = 4;
  config.calibration_events = 2;
  const Calibration cal = calibrate(config);
  const Event raw = generate_stream_event(config, EventStream::evaluation, 0);
  const Preprocessed pre = preprocess(raw, cal, config);

  std::size_t previous = static_cast<std::size_t>(-1);
  for (double tau : {0.5, 0.9, 0.99, 0.996, 0.999, 0.9997}) {
    QuboParams p;
    p.tau = tau;
    p.eta_bias = 0.0;
    std::size_t count = 0;
    for (const SectorGraph& s : pre.sectors) count += build_qubo(s.edges, pre.event, p, QuboMode::partial).quadratic.size();
    CHECK(count <= previous);
    previous = count;
  }
}

TEST_CASE("energy") {
  SECTION("all-zero bits give the offset") {
    Qubo q;
    q.n = 3;
    q.add_linear(0, 2.0);
    q.add_quadratic(1, 2, -1.0);
    q.offset = 4.5;
    CHECK(energy(q, std::vector<std::uint8_t>{0, 0, 0}) == 4.5);
  }

  SECTION("single negative field") {
    Qubo q;
    q.n = 1;
    q.add_linear(0, -1.0);
    CHECK(energy(q, std::vector<std::uint8_t>{1}) == -1.0);
  }

  SECTION("random instances agree with a dense double loop") {
    std::mt19937_64 rng(17);
    for (int t = 0; t < 50; ++t) {
      const Qubo q = testing::random_qubo(10, rng);
      std::uniform_int_distribution<std::uint64_t> mask(0, 1023);
      const auto bits = testing::bits_of(mask(rng), 10);
      CHECK(std::abs(energy(q, bits) - testing::dense_energy(q, bits)) < 1e-12);
    }
  }

  SECTION("length mismatch is an error") {
    Qubo q;
    q.n = 2;
    CHECK_THROWS_AS(energy(q, std::vector<std::uint8_t>{1}), Error);
  }

  SECTION("diagonal quadratic folds into the linear term") {
    Qubo q;
    q.n = 2;
    q.add_quadratic(1, 1, 3.0);
    CHECK(q.quadratic.empty());
    CHECK(q.linear.at(1) == 3.0);
  }
}

TEST_CASE("ising conversion") {
  SECTION("single field") {
    Qubo q;
    q.n = 1;
    q.add_linear(0, 2.0);
    const IsingModel m = qubo_to_ising(q);
    CHECK(m.h[0] == 1.0);
    CHECK(m.offset == 1.0);
    CHECK(m.energy(std::vector<int>{1}) == 2.0);
    CHECK(m.energy(std::vector<int>{-1}) == 0.0);
  }

  SECTION("single coupling, all four states") {
    Qubo q;
    q.n = 2;
    q.add_quadratic(0, 1, 4.0);
    const IsingModel m = qubo_to_ising(q);
    CHECK(m.couplings.at({0, 1}) == 1.0);
    CHECK(m.h[0] == 1.0);
    CHECK(m.h[1] == 1.0);
    CHECK(m.offset == 1.0);
    for (std::uint64_t mask = 0; mask < 4; ++mask) {
      const auto x = testing::bits_of(mask, 2);
      CHECK(m.energy(to_spins(x)) == energy(q, x));
    }
  }

  SECTION("empty model keeps the offset") {
    Qubo q;
    q.offset = -3.25;
    const IsingModel m = qubo_to_ising(q);
    CHECK(m.n == 0);
    CHECK(m.couplings.empty());
    CHECK(m.offset == -3.25);
  }

  SECTION("exhaustive agreement on random instances") {
    std::mt19937_64 rng(23);
    for (std::size_t n = 1; n <= 9; ++n) {
      const Qubo q = testing::random_qubo(n, rng, -5.0, 5.0, 0.6);
      const IsingModel m = qubo_to_ising(q);
      for (std::uint64_t mask = 0; mask < (1ULL << n); ++mask) {
        const auto x = testing::bits_of(mask, n);
        const double eq = energy(q, x);
        CHECK(std::abs(m.energy(to_spins(x)) - eq) <= 1e-9 * std::max(1.0, std::abs(eq)));
      }
    }
  }
}

TEST_CASE("qubo text round trip") {
  std::mt19937_64 rng(31);
  Qubo q = testing::random_qubo(7, rng, -1.0, 1.0, 0.5);
  q.var_to_edge = {10, 11, 12, 13, 14, 15, 16};
  q.add_linear(3, 1.0 / 3.0);
  std::stringstream buffer;
  write_qubo(buffer, q);
  const Qubo back = read_qubo(buffer);
  CHECK(back.n == q.n);
  CHECK(back.offset == q.offset);
  CHECK(back.linear == q.linear);
  CHECK(back.quadratic == q.quadratic);
  CHECK(back.var_to_edge == q.var_to_edge);

  std::stringstream bad("# qtrack-qubo 1\nn 2\nquad 0 5 1.0\n");
  CHECK_THROWS_WITH(read_qubo(bad), Catch::Matchers::ContainsSubstring("qubo:3:"));
}
