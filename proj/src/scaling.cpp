// SPDX-License-Identifier: Apache-2.0
// Copyright Contributors to the qtrack project.

#include <algorithm>
#include <cmath>
#include <cstdio>

#include "qtrack/error.hpp"
#include "qtrack/pipeline.hpp"

namespace qtrack {

namespace {

constexpr int kPseudoSamples = 250;

// log sum_i exp(c m_i) and the softmax-weighted mean of m.
std::pair<double, double> log_sum_exp(const std::vector<double>& m, double c) {
  double top = c * m.front();
  for (double v : m) top = std::max(top, c * v);
  double sum = 0.0;
  double weighted = 0.0;
  for (double v : m) {
    const double w = std::exp(c * v - top);
    sum += w;
    weighted += w * v;
  }
  return {top + std::log(sum), weighted / sum};
}

double residual_sum(std::span<const ExpFitPoint> points, double c) {
  double rss = 0.0;
  for (const ExpFitPoint& p : points) {
    const double r = std::log(p.time) - log_sum_exp(p.m, c).first;
    rss += r * r;
  }
  return rss;
}

}  // namespace

ExpFit fit_exponential(std::span<const ExpFitPoint> points) {
  if (points.size() < 3) throw Error("fit_exponential: need at least 3 points, got " + std::to_string(points.size()));
  for (const ExpFitPoint& p : points) {
    if (!(p.time > 0.0)) throw Error("fit_exponential: times must be positive");
    if (p.m.empty()) throw Error("fit_exponential: a point has no sub-graphs");
  }

  // Gauss-Newton on the single parameter with step halving.
  double c = 0.0;
  double rss = residual_sum(points, c);
  for (int iter = 0; iter < 500; ++iter) {
    double num = 0.0;
    double den = 0.0;
    for (const ExpFitPoint& p : points) {
      const auto [lse, mbar] = log_sum_exp(p.m, c);
      num += (std::log(p.time) - lse) * mbar;
      den += mbar * mbar;
    }
    if (den <= 0.0) break;
    double step = num / den;
    double trial = residual_sum(points, c + step);
    int halvings = 0;
    while (trial > rss && halvings < 60) {
      step *= 0.5;
      trial = residual_sum(points, c + step);
      ++halvings;
    }
    if (trial > rss) break;
    c += step;
    const bool done = std::abs(step) <= 1e-15 * (1.0 + std::abs(c)) || rss - trial <= 1e-30;
    rss = trial;
    if (done) break;
  }

  ExpFit fit;
  fit.c = c;
  double jtj = 0.0;
  for (const ExpFitPoint& p : points) {
    const auto [lse, mbar] = log_sum_exp(p.m, c);
    fit.residuals.push_back(std::log(p.time) - lse);
    jtj += mbar * mbar;
  }
  const double dof = static_cast<double>(points.size() - 1);
  fit.c_stderr = jtj > 0.0 ? std::sqrt(rss / dof / jtj) : 0.0;
  if (!std::isfinite(fit.c)) throw Error("fit_exponential: fit diverged");
  return fit;
}

std::string format_fit(const ExpFit& fit) {
  char buffer[96];
  std::snprintf(buffer, sizeof buffer, "c = %.4g ± %.2g", fit.c, fit.c_stderr);
  return buffer;
}

ScalingFit scaling_benchmark(std::span<const int> track_counts, const PipelineConfig& config,
                             const Calibration& calibration, int events_per_point) {
  config.validate();
  if (track_counts.size() < 3) throw Error("scaling_benchmark: need at least 3 track counts");
  for (std::size_t k = 0; k < track_counts.size(); ++k) {
    if (track_counts[k] < 1) throw Error("scaling_benchmark: track counts must be positive");
    if (k > 0 && track_counts[k] <= track_counts[k - 1]) {
      throw Error("scaling_benchmark: track counts must be strictly ascending");
    }
  }
  if (events_per_point < 1) throw Error("scaling_benchmark: events_per_point must be >= 1");

  ScalingFit out;
  std::vector<ExpFitPoint> fit_points;
  for (std::size_t k = 0; k < track_counts.size(); ++k) {
    ScalingPoint point;
    point.track_count = track_counts[k];
    for (int e = 0; e < events_per_point; ++e) {
      const std::uint64_t index = k * 100000 + static_cast<std::uint64_t>(e);
      const Event event = generate_stream_event(config, EventStream::scaling, index, track_counts[k]);
      const Preprocessed pre = preprocess(event, calibration, config);

      std::vector<std::pair<std::size_t, std::size_t>> units;
      for (std::size_t s = 0; s < pre.sectors.size(); ++s) {
        for (std::size_t g = 0; g < pre.sectors[s].subgraphs.size(); ++g) units.emplace_back(s, g);
      }
      std::vector<ConvergenceStats> stats(units.size());
      parallel_for(units.size(), config.workers, [&](std::size_t u) {
        const SectorGraph& sector = pre.sectors[units[u].first];
        const SubGraph& g = sector.subgraphs[units[u].second];
        try {
          const Qubo q = build_qubo(subgraph_edges(sector, g), pre.event, config.qubo, QuboMode::full);
          stats[u] = measure_convergence(q, config.protocol,
                                         mix_seed(config.seed, index, (static_cast<std::uint64_t>(sector.sector) << 32) |
                                                                          static_cast<std::uint64_t>(g.index)));
        } catch (const Error& err) {
          throw Error("convergence stage, sector " + std::to_string(sector.sector) + ", sub-graph " +
                      std::to_string(g.index) + ": " + err.what());
        }
      });

      ScalingEvent se;
      std::map<int, std::vector<double>> samples;
      ExpFitPoint fp;
      for (std::size_t u = 0; u < units.size(); ++u) {
        const std::size_t m = pre.sectors[units[u].first].subgraphs[units[u].second].m();
        se.subgraph_sizes.push_back(m);
        ++point.size_histogram[m];
        fp.m.push_back(static_cast<double>(m));
        if (stats[u].capped) ++se.n_capped;
        auto& list = samples[static_cast<int>(u)];
        for (std::int64_t s : stats[u].sweeps_to_converge) list.push_back(static_cast<double>(s) * static_cast<double>(m));
      }
      if (samples.empty()) throw Error("scaling_benchmark: event produced no sub-graphs");
      const BootstrapResult boot = bootstrap_mean(samples, kPseudoSamples, mix_seed(config.seed, index, 9));
      se.mean_time = boot.mean;
      se.ci_low = boot.ci_low;
      se.ci_high = boot.ci_high;
      std::sort(se.subgraph_sizes.begin(), se.subgraph_sizes.end(), std::greater<>());
      fp.time = boot.mean;
      fit_points.push_back(std::move(fp));

      double sum_m = 0.0;
      for (std::size_t m : se.subgraph_sizes) sum_m += static_cast<double>(m);
      point.sum_m += sum_m / events_per_point;
      point.mean_time += se.mean_time / events_per_point;
      point.ci_low += se.ci_low / events_per_point;
      point.ci_high += se.ci_high / events_per_point;
      point.events.push_back(std::move(se));
    }
    out.points.push_back(std::move(point));
  }
  out.fit = fit_exponential(fit_points);
  return out;
}

}  // namespace qtrack
