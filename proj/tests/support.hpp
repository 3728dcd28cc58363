// SPDX-License-Identifier: Apache-2.0
// Copyright Contributors to the qtrack project.

#pragma once

#include <cmath>
#include <cstdint>
#include <filesystem>
#include <random>
#include <string>
#include <vector>

#include "qtrack/event.hpp"
#include "qtrack/qubo.hpp"

namespace qtrack::testing {

inline Hit cyl(HitId id, double r, double phi, double z, ParticleId pid = 0, int layer = 0) {
  Hit h = Hit::at(id, r * std::cos(phi), r * std::sin(phi), z);
  h.particle_id = pid;
  h.volume_id = 1;
  h.layer_id = layer;
  return h;
}

// Hits with every particle's hit list filled in r order.
inline Event event_of(std::vector<Hit> hits) { return Event::from_truth(std::move(hits)); }

// Dense QUBO with coefficients uniform in [lo, hi].
inline Qubo random_qubo(std::size_t n, std::mt19937_64& rng, double lo = -1.0, double hi = 1.0,
                        double density = 1.0) {
  std::uniform_real_distribution<double> coef(lo, hi);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  Qubo q;
  q.n = n;
  for (std::size_t i = 0; i < n; ++i) {
    q.var_to_edge.push_back(static_cast<EdgeId>(i));
    q.add_linear(i, coef(rng));
  }
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = i + 1; j < n; ++j) {
      if (unit(rng) < density) q.add_quadratic(i, j, coef(rng));
    }
  }
  q.offset = coef(rng);
  return q;
}

// Naive dense evaluation, independent of the library's energy().
inline double dense_energy(const Qubo& q, const std::vector<std::uint8_t>& x) {
  std::vector<std::vector<double>> m(q.n, std::vector<double>(q.n, 0.0));
  for (const auto& [i, v] : q.linear) m[i][i] += v;
  for (const auto& [key, v] : q.quadratic) m[key.first][key.second] += v;
  double e = q.offset;
  for (std::size_t i = 0; i < q.n; ++i) {
    for (std::size_t j = 0; j < q.n; ++j) e += m[i][j] * x[i] * x[j];
  }
  return e;
}

inline std::vector<std::uint8_t> bits_of(std::uint64_t mask, std::size_t n) {
  std::vector<std::uint8_t> x(n);
  for (std::size_t i = 0; i < n; ++i) x[i] = static_cast<std::uint8_t>((mask >> i) & 1U);
  return x;
}

inline std::filesystem::path scratch_dir(const std::string& name) {
  auto dir = std::filesystem::temp_directory_path() / ("qtrack-test-" + name);
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  return dir;
}

}  // namespace qtrack::testing
