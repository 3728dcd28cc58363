// SPDX-License-Identifier: Apache-2.0
// Copyright Contributors to the qtrack project.

#include <algorithm>
#include <bit>
#include <limits>
#include <string>

#include "qtrack/anneal.hpp"
#include "qtrack/error.hpp"

namespace qtrack {

namespace {

// Beyond this beta * delta the acceptance probability is below 2^-70.
constexpr double kRejectExponent = 48.0;

}  // namespace

void Schedule::validate() const {
  if (!(beta_init > 0.0)) throw Error("schedule: beta_init must be positive");
  if (!(beta_fin > beta_init)) throw Error("schedule: beta_fin must exceed beta_init");
  if (sweeps < 1) throw Error("schedule: sweeps must be >= 1");
}

CompiledQubo::CompiledQubo(const Qubo& q) : h_(q.n, 0.0), start_(q.n + 1, 0), offset_(q.offset) {
  if (q.n > std::numeric_limits<std::uint32_t>::max()) throw Error("qubo too large to compile");
  for (const auto& [i, v] : q.linear) h_[i] = v;
  for (const auto& [key, v] : q.quadratic) {
    ++start_[key.first + 1];
    ++start_[key.second + 1];
  }
  for (std::size_t i = 0; i < q.n; ++i) start_[i + 1] += start_[i];
  col_.resize(start_[q.n]);
  w_.resize(start_[q.n]);
  std::vector<std::size_t> fill(start_.begin(), start_.end() - 1);
  for (const auto& [key, v] : q.quadratic) {
    col_[fill[key.first]] = static_cast<std::uint32_t>(key.second);
    w_[fill[key.first]++] = v;
    col_[fill[key.second]] = static_cast<std::uint32_t>(key.first);
    w_[fill[key.second]++] = v;
  }
}

double CompiledQubo::energy(std::span<const std::uint8_t> bits) const {
  if (bits.size() != n()) throw Error("energy: bit count does not match the qubo");
  // Same summation order as qtrack::energy on the source Qubo.
  double e = offset_;
  for (std::size_t i = 0; i < n(); ++i) {
    if (bits[i] != 0 && h_[i] != 0.0) e += h_[i];
  }
  for (std::size_t i = 0; i < n(); ++i) {
    if (bits[i] == 0) continue;
    for (std::size_t k = start_[i]; k < start_[i + 1]; ++k) {
      if (col_[k] > i && bits[col_[k]] != 0) e += w_[k];
    }
  }
  return e;
}

std::vector<double> CompiledQubo::local_fields(std::span<const std::uint8_t> bits) const {
  std::vector<double> f(h_);
  for (std::size_t i = 0; i < n(); ++i) {
    if (bits[i] == 0) continue;
    for (std::size_t k = start_[i]; k < start_[i + 1]; ++k) f[col_[k]] += w_[k];
  }
  return f;
}

std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t a, std::uint64_t b) {
  // splitmix64 finalizer over a running combination.
  auto mix = [](std::uint64_t z) {
    z += 0x9e3779b97f4a7c15ULL;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
  };
  return mix(mix(mix(seed) ^ a) ^ b);
}

Rng::Rng(std::uint64_t seed, std::uint64_t stream) : engine_(mix_seed(seed, stream)) {}

double Rng::uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

std::uint64_t Rng::below(std::uint64_t bound) {
  if (bound == 0) throw Error("Rng::below: empty range");
  // Rejection keeps the draw unbiased.
  const std::uint64_t limit = std::numeric_limits<std::uint64_t>::max() - std::numeric_limits<std::uint64_t>::max() % bound;
  std::uint64_t x = engine_();
  while (x >= limit) x = engine_();
  return x % bound;
}

bool better(const Assignment& lhs, const Assignment& rhs) {
  if (lhs.energy != rhs.energy) return lhs.energy < rhs.energy;
  return lhs.bits < rhs.bits;
}

Assignment anneal_once(const CompiledQubo& q, const Schedule& schedule, std::uint64_t seed, std::uint64_t stream,
                       const SweepObserver& observer, int run) {
  schedule.validate();
  const std::size_t n = q.n();
  Rng rng(seed, stream);

  std::vector<std::uint8_t> x(n);
  for (std::size_t i = 0; i < n; i += 64) {
    const std::uint64_t word = rng.next();
    for (std::size_t k = 0; k < 64 && i + k < n; ++k) x[i + k] = static_cast<std::uint8_t>((word >> k) & 1U);
  }
  std::vector<double> field = q.local_fields(x);
  double current = q.energy(x);

  std::vector<std::uint8_t> best = x;
  double best_energy = current;

  for (std::int64_t sweep = 0; sweep < schedule.sweeps; ++sweep) {
    const double beta = schedule.beta_at(sweep);
    for (std::size_t i = 0; i < n; ++i) {
      const double delta = x[i] != 0 ? -field[i] : field[i];
      if (delta > 0.0) {
        if (beta * delta > kRejectExponent) continue;
        if (!metropolis_accept(delta, beta, rng.uniform())) continue;
      }
      x[i] ^= 1U;
      current += delta;
      const double sign = x[i] != 0 ? 1.0 : -1.0;
      const auto nb = q.neighbours(i);
      const auto w = q.weights(i);
      for (std::size_t k = 0; k < nb.size(); ++k) field[nb[k]] += sign * w[k];
    }
    if (current < best_energy) {
      best_energy = current;
      best = x;
    }
    if (observer) observer(run, sweep, x, current);
  }
  return {best, q.energy(best)};
}

Assignment simulated_anneal(const Qubo& q, const Schedule& schedule, int runs, std::uint64_t seed,
                            const SweepObserver& observer) {
  if (runs < 1) throw Error("simulated_anneal: runs must be >= 1");
  schedule.validate();
  if (q.n == 0) return {{}, q.offset};
  const CompiledQubo compiled(q);
  Assignment best;
  for (int r = 0; r < runs; ++r) {
    Assignment a = anneal_once(compiled, schedule, seed, static_cast<std::uint64_t>(r), observer, r);
    a.energy = energy(q, a.bits);
    if (r == 0 || better(a, best)) best = std::move(a);
  }
  return best;
}

Assignment brute_force(const Qubo& q) {
  if (q.n > kBruteForceLimit) {
    throw Error("brute_force: " + std::to_string(q.n) + " variables exceeds the limit of " +
                std::to_string(kBruteForceLimit));
  }
  const std::size_t n = q.n;
  if (n == 0) return {{}, q.offset};
  const CompiledQubo compiled(q);
  std::vector<std::uint8_t> x(n, 0);
  std::vector<double> field = compiled.local_fields(x);
  double current = q.offset;
  std::vector<std::uint8_t> best = x;
  double best_energy = current;

  const std::uint64_t states = std::uint64_t{1} << n;
  for (std::uint64_t k = 1; k < states; ++k) {
    // Gray code: step k flips the lowest set bit of k.
    const auto i = static_cast<std::size_t>(std::countr_zero(k));
    const double delta = x[i] != 0 ? -field[i] : field[i];
    x[i] ^= 1U;
    current += delta;
    const double sign = x[i] != 0 ? 1.0 : -1.0;
    const auto nb = compiled.neighbours(i);
    const auto w = compiled.weights(i);
    for (std::size_t j = 0; j < nb.size(); ++j) field[nb[j]] += sign * w[j];

    const double tol = 1e-9 * std::max(1.0, std::abs(best_energy));
    if (current < best_energy - tol || (current <= best_energy + tol && x < best)) {
      best = x;
      best_energy = std::min(best_energy, current);
    }
  }
  return {best, energy(q, best)};
}

std::vector<std::uint8_t> random_baseline(std::size_t n_vars, double true_fraction, std::uint64_t seed) {
  if (!(true_fraction >= 0.0 && true_fraction <= 1.0)) throw Error("random_baseline: true_fraction must lie in [0, 1]");
  Rng rng(seed, 0);
  std::vector<std::uint8_t> bits(n_vars);
  for (auto& b : bits) b = rng.uniform() < true_fraction ? 1 : 0;
  return bits;
}

}  // namespace qtrack
