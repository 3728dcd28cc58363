// SPDX-License-Identifier: Apache-2.0
// Copyright Contributors to the qtrack project.

#include <algorithm>
#include <cmath>
#include <numeric>
#include <ostream>
#include <string>

#include "qtrack/anneal.hpp"
#include "qtrack/error.hpp"
#include "qtrack/text.hpp"

namespace qtrack {

namespace {

constexpr int kConvergencePseudoSamples = 250;
constexpr int kMaxReferenceRestarts = 8;

double quantile(const std::vector<double>& sorted, double p) {
  const double pos = p * static_cast<double>(sorted.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(pos));
  const std::size_t hi = std::min(lo + 1, sorted.size() - 1);
  const double frac = pos - static_cast<double>(lo);
  return sorted[lo] + frac * (sorted[hi] - sorted[lo]);
}

}  // namespace

void ConvergenceProtocol::validate() const {
  if (long_sweeps < 1) throw Error("convergence: long_sweeps must be >= 1");
  if (long_runs < 1) throw Error("convergence: long_runs must be >= 1");
  if (samples < 1) throw Error("convergence: samples must be >= 1");
  if (epsilon && !(*epsilon >= 0.0)) throw Error("convergence: epsilon must be non-negative");
  if (!(relaxed_epsilon >= 0.0)) throw Error("convergence: relaxed_epsilon must be non-negative");
  Schedule{beta_init, beta_fin, 1}.validate();
}

double ConvergenceProtocol::epsilon_for(std::size_t n_vars) const {
  if (epsilon) return *epsilon;
  return n_vars > relax_above_vars ? relaxed_epsilon : 0.0;
}

ConvergenceStats measure_convergence(const Qubo& q, const ConvergenceProtocol& protocol, std::uint64_t seed) {
  protocol.validate();
  if (q.n == 0) throw Error("measure_convergence: qubo has no variables");
  const CompiledQubo compiled(q);

  ConvergenceStats stats;
  stats.epsilon = protocol.epsilon_for(q.n);

  const Schedule long_schedule{protocol.beta_init, protocol.beta_fin, protocol.long_sweeps};
  double reference = 0.0;
  for (int r = 0; r < protocol.long_runs; ++r) {
    const double e = energy(q, anneal_once(compiled, long_schedule, mix_seed(seed, 0), static_cast<std::uint64_t>(r)).bits);
    if (r == 0 || e < reference) reference = e;
  }

  // A trial that beats the reference lowers it and restarts the sampling, so
  // the reference stays the lowest energy seen.
  for (int attempt = 0;; ++attempt) {
    const double scale = std::max(1.0, std::abs(reference));
    const double tolerance = stats.epsilon * scale + 1e-9 * scale;
    bool improved = false;
    stats.sweeps_to_converge.clear();
    stats.capped = false;

    for (int s = 0; s < protocol.samples && !improved; ++s) {
      const auto converged = [&](std::int64_t sweeps) {
        const Schedule schedule{protocol.beta_init, protocol.beta_fin, sweeps};
        const auto stream = mix_seed(static_cast<std::uint64_t>(s), static_cast<std::uint64_t>(sweeps));
        const double e = energy(q, anneal_once(compiled, schedule, mix_seed(seed, 1), stream).bits);
        if (e < reference - 1e-9 * scale && attempt < kMaxReferenceRestarts) {
          reference = e;
          improved = true;
        }
        return e <= reference + tolerance;
      };

      const std::int64_t cap = protocol.max_sweeps();
      std::int64_t failing = 0;
      std::int64_t sweeps = 1;
      bool ok = converged(sweeps);
      while (!ok && sweeps < cap && !improved) {
        failing = sweeps;
        sweeps = std::min(2 * sweeps, cap);
        ok = converged(sweeps);
      }
      if (improved) break;
      if (!ok) {
        stats.capped = true;
      } else {
        while (sweeps - failing > 1 && !improved) {
          const std::int64_t mid = failing + (sweeps - failing) / 2;
          if (converged(mid)) {
            sweeps = mid;
          } else {
            failing = mid;
          }
        }
        if (improved) break;
      }
      stats.sweeps_to_converge.push_back(sweeps);
    }
    if (!improved) break;
  }
  stats.reference_energy = reference;

  std::map<int, std::vector<double>> single;
  auto& list = single[0];
  for (std::int64_t s : stats.sweeps_to_converge) list.push_back(static_cast<double>(s));
  const BootstrapResult boot = bootstrap_mean(single, kConvergencePseudoSamples, mix_seed(seed, 2));
  stats.mean = boot.mean;
  stats.ci_low = boot.ci_low;
  stats.ci_high = boot.ci_high;
  return stats;
}

BootstrapResult bootstrap_mean(const std::map<int, std::vector<double>>& per_subqubo_samples, int n_pseudo,
                               std::uint64_t seed) {
  if (per_subqubo_samples.empty()) throw Error("bootstrap_mean: no sub-QUBOs");
  if (n_pseudo < 1) throw Error("bootstrap_mean: n_pseudo must be >= 1");
  for (const auto& [id, samples] : per_subqubo_samples) {
    if (samples.empty()) throw Error("bootstrap_mean: sub-QUBO " + std::to_string(id) + " has no samples");
  }

  Rng rng(seed, 0);
  BootstrapResult out;
  out.pseudo_sums.reserve(static_cast<std::size_t>(n_pseudo));
  for (int k = 0; k < n_pseudo; ++k) {
    double sum = 0.0;
    for (const auto& [id, samples] : per_subqubo_samples) sum += samples[rng.below(samples.size())];
    out.pseudo_sums.push_back(sum);
  }
  out.mean = std::accumulate(out.pseudo_sums.begin(), out.pseudo_sums.end(), 0.0) / n_pseudo;
  std::vector<double> sorted = out.pseudo_sums;
  std::sort(sorted.begin(), sorted.end());
  out.ci_low = std::min(quantile(sorted, 0.16), out.mean);
  out.ci_high = std::max(quantile(sorted, 0.84), out.mean);
  return out;
}

void write_convergence_csv(std::ostream& out, std::span<const ConvergenceRow> rows) {
  std::size_t width = 5;
  for (const auto& row : rows) width = std::max(width, row.stats.sweeps_to_converge.size());
  out << "subqubo_id,m";
  for (std::size_t k = 1; k <= width; ++k) out << ",sample_" << k;
  out << ",mean,ci_low,ci_high\n";
  for (const auto& row : rows) {
    out << row.subqubo_id << ',' << row.m;
    for (std::size_t k = 0; k < width; ++k) {
      out << ',';
      if (k < row.stats.sweeps_to_converge.size()) out << row.stats.sweeps_to_converge[k];
    }
    out << ',' << format_double(row.stats.mean) << ',' << format_double(row.stats.ci_low) << ','
        << format_double(row.stats.ci_high) << '\n';
  }
}

}  // namespace qtrack
