// SPDX-License-Identifier: Apache-2.0
// Copyright Contributors to the qtrack project.

#include <algorithm>
#include <cmath>
#include <string>
#include <unordered_map>

#include "qtrack/error.hpp"
#include "qtrack/qubo.hpp"

namespace qtrack {

namespace {

struct Vec3 {
  double x = 0.0;
  double y = 0.0;
  double z = 0.0;
};

double dot(const Vec3& u, const Vec3& v) { return u.x * v.x + u.y * v.y + u.z * v.z; }
double norm(const Vec3& u) { return std::sqrt(dot(u, u)); }

double wrapped_dphi(double from, double to) { return std::remainder(to - from, 2.0 * std::numbers::pi); }

// Segment in standardized cylindrical coordinates (r, phi, z).
Vec3 standardized_segment(const Hit& a, const Hit& b, const QuboParams& p) {
  return {(b.r - a.r) / p.scale_r, wrapped_dphi(a.phi, b.phi) / p.scale_phi, (b.z - a.z) / p.scale_z};
}

double clamped_power(double cosine, double exponent) { return cosine > 0.0 ? std::pow(cosine, exponent) : 0.0; }

const Hit& lookup(const Event& event, HitId id) {
  const Hit* h = event.find_hit(id);
  if (h == nullptr) throw Error("build_qubo: edge references unknown hit " + std::to_string(id));
  return *h;
}

}  // namespace

void QuboParams::validate() const {
  const double weights[] = {lambda, rho, eta_bias, zeta, alpha, beta, gamma, tau, scale_r, scale_phi, scale_z};
  for (double w : weights) {
    if (!std::isfinite(w)) throw Error("qubo params: all weights must be finite");
  }
  if (!(tau > -1.0 && tau <= 1.0)) throw Error("qubo params: tau must lie in (-1, 1]");
  if (!(scale_r > 0.0 && scale_phi > 0.0 && scale_z > 0.0)) throw Error("qubo params: scales must be positive");
}

std::string to_string(QuboMode mode) {
  switch (mode) {
    case QuboMode::full:
      return "full";
    case QuboMode::partial:
      return "partial";
    case QuboMode::classic_dp:
      return "classic_dp";
  }
  return "full";
}

QuboMode parse_qubo_mode(const std::string& text) {
  if (text == "full") return QuboMode::full;
  if (text == "partial") return QuboMode::partial;
  if (text == "classic_dp") return QuboMode::classic_dp;
  throw Error("unknown qubo mode '" + text + "' (expected full, partial or classic_dp)");
}

void Qubo::add_linear(VarIndex i, double value) {
  if (i >= n) throw Error("qubo: variable " + std::to_string(i) + " out of range");
  linear[i] += value;
}

void Qubo::add_quadratic(VarIndex i, VarIndex j, double value) {
  if (i >= n || j >= n) throw Error("qubo: variable pair out of range");
  if (i == j) {
    linear[i] += value;
    return;
  }
  quadratic[{std::min(i, j), std::max(i, j)}] += value;
}

void Qubo::prune_zeros() {
  std::erase_if(linear, [](const auto& kv) { return kv.second == 0.0; });
  std::erase_if(quadratic, [](const auto& kv) { return kv.second == 0.0; });
}

double IsingModel::energy(std::span<const int> spins) const {
  if (spins.size() != n) throw Error("ising energy: expected " + std::to_string(n) + " spins");
  double e = offset;
  for (std::size_t i = 0; i < n; ++i) e += h[i] * spins[i];
  for (const auto& [key, v] : couplings) e += v * spins[key.first] * spins[key.second];
  return e;
}

AngleCosines angle_kernel(const Hit& a, const Hit& b, const Hit& c, const QuboParams& params) {
  const Vec3 u = standardized_segment(a, b, params);
  const Vec3 v = standardized_segment(b, c, params);
  const double nu = norm(u);
  const double nv = norm(v);
  if (nu == 0.0 || nv == 0.0) throw Error("angle_kernel: zero-length segment");

  const Vec3 ut{b.x - a.x, b.y - a.y, 0.0};
  const Vec3 vt{c.x - b.x, c.y - b.y, 0.0};
  const double nut = norm(ut);
  const double nvt = norm(vt);
  if (nut == 0.0 || nvt == 0.0) throw Error("angle_kernel: zero-length transverse segment");

  AngleCosines out;
  out.cos_theta = std::clamp(dot(u, v) / (nu * nv), -1.0, 1.0);
  out.cos_phi = std::clamp(dot(ut, vt) / (nut * nvt), -1.0, 1.0);
  return out;
}

double z_intercept(const Hit& a, const Hit& c) {
  if (a.r == c.r) throw Error("z_intercept: hits share the same radius");
  return c.z - (c.z - a.z) / (c.r - a.r) * c.r;
}

double chain_reward(const Hit& a, const Hit& b, const Hit& c, const QuboParams& params, bool gated) {
  const AngleCosines k = angle_kernel(a, b, c, params);
  const double ct = clamped_power(k.cos_theta, params.lambda);
  if (gated && ct < params.tau) return 0.0;
  const double cp = clamped_power(k.cos_phi, params.lambda);
  const double length = norm(standardized_segment(a, b, params)) + norm(standardized_segment(b, c, params));
  return (ct + params.rho * cp) / length;
}

double chain_penalty(const Hit& a, const Hit& c, const QuboParams& params) {
  return params.eta_bias * std::pow(std::abs(z_intercept(a, c) / params.scale_z), params.zeta);
}

std::vector<std::pair<std::size_t, std::size_t>> chained_pairs(std::span<const Edge> edges) {
  std::unordered_map<HitId, std::vector<std::size_t>> starting_at;
  for (std::size_t k = 0; k < edges.size(); ++k) starting_at[edges[k].a].push_back(k);
  std::vector<std::pair<std::size_t, std::size_t>> out;
  for (std::size_t k = 0; k < edges.size(); ++k) {
    auto it = starting_at.find(edges[k].b);
    if (it == starting_at.end()) continue;
    for (std::size_t next : it->second) out.emplace_back(k, next);
  }
  std::sort(out.begin(), out.end());
  return out;
}

Qubo build_qubo(std::span<const Edge> edges, const Event& event, const QuboParams& params, QuboMode mode) {
  params.validate();
  Qubo q;
  q.n = edges.size();
  q.var_to_edge.reserve(edges.size());
  for (const Edge& e : edges) {
    const Hit& a = lookup(event, e.a);
    const Hit& b = lookup(event, e.b);
    if (!(a.r < b.r)) throw Error("build_qubo: edge " + std::to_string(e.id) + " is not ordered in r");
    q.var_to_edge.push_back(e.id);
  }

  for (const auto& [i, j] : chained_pairs(edges)) {
    const Hit& a = event.hit(edges[i].a);
    const Hit& b = event.hit(edges[i].b);
    const Hit& c = event.hit(edges[j].b);
    if (mode == QuboMode::classic_dp) {
      const AngleCosines k = angle_kernel(a, b, c, params);
      const double length = norm(standardized_segment(a, b, params)) + norm(standardized_segment(b, c, params));
      q.add_quadratic(i, j, -0.5 * clamped_power(k.cos_theta, params.lambda) / length);
    } else {
      q.add_quadratic(i, j, -chain_reward(a, b, c, params, true) + chain_penalty(a, c, params));
    }
  }

  if (mode != QuboMode::partial) {
    std::unordered_map<HitId, std::vector<std::size_t>> by_start;
    std::unordered_map<HitId, std::vector<std::size_t>> by_end;
    for (std::size_t k = 0; k < edges.size(); ++k) {
      by_start[edges[k].a].push_back(k);
      by_end[edges[k].b].push_back(k);
    }
    for (const auto* groups : {&by_start, &by_end}) {
      for (const auto& [hit, list] : *groups) {
        for (std::size_t x = 0; x < list.size(); ++x) {
          for (std::size_t y = x + 1; y < list.size(); ++y) q.add_quadratic(list[x], list[y], params.alpha);
        }
      }
    }
  }

  if (mode == QuboMode::full) {
    for (std::size_t k = 0; k < edges.size(); ++k) q.add_linear(k, -(params.beta * edges[k].prior - params.gamma));
  } else if (mode == QuboMode::classic_dp && q.n > 0) {
    // beta/2 (sum s - N)^2 with N the candidate count, expanded for binary s.
    const double big_n = static_cast<double>(q.n);
    for (std::size_t i = 0; i < q.n; ++i) {
      q.add_linear(i, 0.5 * params.beta * (1.0 - 2.0 * big_n));
      for (std::size_t j = i + 1; j < q.n; ++j) q.add_quadratic(i, j, params.beta);
    }
    q.offset += 0.5 * params.beta * big_n * big_n;
  }

  q.prune_zeros();
  return q;
}

double energy(const Qubo& q, std::span<const std::uint8_t> bits) {
  if (bits.size() != q.n) {
    throw Error("energy: expected " + std::to_string(q.n) + " bits, got " + std::to_string(bits.size()));
  }
  double e = q.offset;
  for (const auto& [i, v] : q.linear) {
    if (bits[i] != 0) e += v;
  }
  for (const auto& [key, v] : q.quadratic) {
    if (bits[key.first] != 0 && bits[key.second] != 0) e += v;
  }
  return e;
}

IsingModel qubo_to_ising(const Qubo& q) {
  IsingModel m;
  m.n = q.n;
  m.h.assign(q.n, 0.0);
  m.offset = q.offset;
  for (const auto& [i, v] : q.linear) {
    m.h[i] += 0.5 * v;
    m.offset += 0.5 * v;
  }
  for (const auto& [key, v] : q.quadratic) {
    m.couplings[key] = 0.25 * v;
    m.h[key.first] += 0.25 * v;
    m.h[key.second] += 0.25 * v;
    m.offset += 0.25 * v;
  }
  return m;
}

std::vector<int> to_spins(std::span<const std::uint8_t> bits) {
  std::vector<int> s(bits.size());
  for (std::size_t i = 0; i < bits.size(); ++i) s[i] = bits[i] != 0 ? 1 : -1;
  return s;
}

}  // namespace qtrack
