// SPDX-License-Identifier: Apache-2.0
// Copyright Contributors to the qtrack project.

#pragma once

#include <cstdint>
#include <iosfwd>
#include <map>
#include <numbers>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "qtrack/event.hpp"
#include "qtrack/preprocess.hpp"

namespace qtrack {

struct QuboParams {
  double lambda = 13.17;
  double rho = 5.00;
  double eta_bias = 14.41;
  double zeta = 1.79;
  double alpha = 86.20;
  double beta = 20.91;
  double gamma = 9.79;
  double tau = 0.996;
  double scale_r = 1000.0;
  double scale_phi = std::numbers::pi;
  double scale_z = 1000.0;

  void validate() const;
};

enum class QuboMode { full, partial, classic_dp };

std::string to_string(QuboMode mode);
QuboMode parse_qubo_mode(const std::string& text);

using VarIndex = std::size_t;

/// min  offset + sum_i h_i x_i + sum_{i<j} J_ij x_i x_j  over x in {0,1}^n.
struct Qubo {
  std::size_t n = 0;
  std::map<VarIndex, double> linear;
  std::map<std::pair<VarIndex, VarIndex>, double> quadratic;  // keys i < j
  double offset = 0.0;
  std::vector<EdgeId> var_to_edge;

  void add_linear(VarIndex i, double value);
  /// Accumulates into the (min, max) key; i == j folds into the linear term.
  void add_quadratic(VarIndex i, VarIndex j, double value);
  /// Drops coefficients that accumulated to exactly zero.
  void prune_zeros();
};

/// Spin form under x = (s + 1) / 2, offset kept so energies agree exactly.
struct IsingModel {
  std::size_t n = 0;
  std::vector<double> h;
  std::map<std::pair<VarIndex, VarIndex>, double> couplings;
  double offset = 0.0;

  double energy(std::span<const int> spins) const;
};

struct Assignment {
  std::vector<std::uint8_t> bits;
  double energy = 0.0;
};

struct AngleCosines {
  double cos_theta = 0.0;
  double cos_phi = 0.0;
};

/// Cosines of the turning angle at b: cos_theta in standardized (r, phi, z)
/// space, cos_phi from the transverse (x, y) segments. Collinear gives +1.
AngleCosines angle_kernel(const Hit& a, const Hit& b, const Hit& c, const QuboParams& params = {});

/// z at r = 0 of the straight rz-line through a and c [mm].
double z_intercept(const Hit& a, const Hit& c);

/// Geometric reward of the chained pair (ab, bc), as a positive number:
/// (cos^lambda theta + rho cos^lambda phi) / (|ab| + |bc|), lengths in
/// standardized units and negative cosines clamped to 0. With `gated`, zero
/// whenever cos^lambda theta < tau.
double chain_reward(const Hit& a, const Hit& b, const Hit& c, const QuboParams& params, bool gated = true);

/// eta_bias * |z_intercept(a, c) / scale_z|^zeta.
double chain_penalty(const Hit& a, const Hit& c, const QuboParams& params);

/// Pairs (in, out) of edge positions whose edges meet head to tail.
std::vector<std::pair<std::size_t, std::size_t>> chained_pairs(std::span<const Edge> edges);

/// One variable per edge, in input order.
Qubo build_qubo(std::span<const Edge> edges, const Event& event, const QuboParams& params,
                QuboMode mode = QuboMode::full);

double energy(const Qubo& q, std::span<const std::uint8_t> bits);

IsingModel qubo_to_ising(const Qubo& q);

/// Spins from bits: 0 -> -1, 1 -> +1.
std::vector<int> to_spins(std::span<const std::uint8_t> bits);

void write_qubo(std::ostream& out, const Qubo& q);
Qubo read_qubo(std::istream& in);

}  // namespace qtrack
