// SPDX-License-Identifier: Apache-2.0
// Copyright Contributors to the qtrack project.

#pragma once

#include <cmath>
#include <cstdint>
#include <functional>
#include <iosfwd>
#include <map>
#include <optional>
#include <random>
#include <span>
#include <vector>

#include "qtrack/qubo.hpp"

namespace qtrack {

/// Linear inverse-temperature ramp; sweep k runs at beta_init + k * step.
struct Schedule {
  double beta_init = 0.1;
  double beta_fin = 10.0;
  std::int64_t sweeps = 1000;

  void validate() const;
  double step() const { return (beta_fin - beta_init) / static_cast<double>(sweeps); }
  double beta_at(std::int64_t sweep) const { return beta_init + static_cast<double>(sweep) * step(); }
};

/// Symmetric CSR view of a Qubo with per-variable local fields.
class CompiledQubo {
 public:
  explicit CompiledQubo(const Qubo& q);

  std::size_t n() const { return h_.size(); }
  double offset() const { return offset_; }
  double linear(std::size_t i) const { return h_[i]; }
  std::span<const std::uint32_t> neighbours(std::size_t i) const {
    return {col_.data() + start_[i], col_.data() + start_[i + 1]};
  }
  std::span<const double> weights(std::size_t i) const {
    return {w_.data() + start_[i], w_.data() + start_[i + 1]};
  }

  double energy(std::span<const std::uint8_t> bits) const;
  /// f_i = h_i + sum_j J_ij x_j, so flipping i changes the energy by (1 - 2 x_i) f_i.
  std::vector<double> local_fields(std::span<const std::uint8_t> bits) const;

 private:
  std::vector<double> h_;
  std::vector<std::size_t> start_;
  std::vector<std::uint32_t> col_;
  std::vector<double> w_;
  double offset_ = 0.0;
};

/// Mersenne Twister keyed by (seed, stream index), with portable helpers
/// in place of the implementation-defined standard distributions.
class Rng {
 public:
  Rng(std::uint64_t seed, std::uint64_t stream);
  std::uint64_t next() { return engine_(); }
  /// Uniform in [0, 1) with 53 random bits.
  double uniform();
  /// Uniform integer in [0, bound).
  std::uint64_t below(std::uint64_t bound);

 private:
  std::mt19937_64 engine_;
};

std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t a, std::uint64_t b = 0);

/// Metropolis rule: downhill always, uphill with probability exp(-beta * delta).
inline bool metropolis_accept(double delta, double beta, double u) {
  return delta <= 0.0 || u < std::exp(-beta * delta);
}

/// Called at the end of each sweep with the current state.
using SweepObserver = std::function<void(int run, std::int64_t sweep, std::span<const std::uint8_t> bits, double energy)>;

/// Best assignment over `runs` independent restarts. Ties between runs go to
/// the lexicographically smallest bit vector. The energy is recomputed exactly.
Assignment simulated_anneal(const Qubo& q, const Schedule& schedule, int runs, std::uint64_t seed,
                            const SweepObserver& observer = {});

/// Single run on a precompiled model; `stream` selects the random stream.
Assignment anneal_once(const CompiledQubo& q, const Schedule& schedule, std::uint64_t seed, std::uint64_t stream,
                       const SweepObserver& observer = {}, int run = 0);

inline constexpr std::size_t kBruteForceLimit = 25;

/// Exhaustive ground state; ties go to the lexicographically smallest vector.
Assignment brute_force(const Qubo& q);

/// I.i.d. Bernoulli(true_fraction) bits.
std::vector<std::uint8_t> random_baseline(std::size_t n_vars, double true_fraction, std::uint64_t seed);

/// True when `lhs` ranks strictly ahead of `rhs`: lower energy, then smaller bits.
bool better(const Assignment& lhs, const Assignment& rhs);

// --- convergence time ------------------------------------------------------

struct ConvergenceProtocol {
  std::int64_t long_sweeps = 15000;
  int long_runs = 5;
  int samples = 5;
  std::optional<double> epsilon;       // relative; unset means automatic
  std::size_t relax_above_vars = 2000;  // automatic epsilon switches on above this size
  double relaxed_epsilon = 1e-3;
  double beta_init = 0.1;
  double beta_fin = 10.0;

  void validate() const;
  double epsilon_for(std::size_t n_vars) const;
  std::int64_t max_sweeps() const { return 4 * long_sweeps; }
};

struct ConvergenceStats {
  double reference_energy = 0.0;
  std::vector<std::int64_t> sweeps_to_converge;
  double mean = 0.0;
  double ci_low = 0.0;
  double ci_high = 0.0;
  double epsilon = 0.0;
  bool capped = false;  // some sample hit max_sweeps without converging
};

ConvergenceStats measure_convergence(const Qubo& q, const ConvergenceProtocol& protocol, std::uint64_t seed);

struct BootstrapResult {
  double mean = 0.0;
  double ci_low = 0.0;
  double ci_high = 0.0;
  std::vector<double> pseudo_sums;
};

/// Per pseudo-sample, one uniform draw per sub-QUBO, summed. The interval is
/// the central 68% of the pseudo-sums.
BootstrapResult bootstrap_mean(const std::map<int, std::vector<double>>& per_subqubo_samples, int n_pseudo,
                               std::uint64_t seed);

struct ConvergenceRow {
  int subqubo_id = 0;
  std::size_t m = 0;
  ConvergenceStats stats;
};

void write_convergence_csv(std::ostream& out, std::span<const ConvergenceRow> rows);

}  // namespace qtrack
