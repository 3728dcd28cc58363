// SPDX-License-Identifier: Apache-2.0
// Copyright Contributors to the qtrack project.

#include <algorithm>
#include <cmath>
#include <functional>
#include <numbers>
#include <ostream>
#include <set>
#include <string>

#include "qtrack/error.hpp"
#include "qtrack/text.hpp"
#include "qtrack/tracking.hpp"

namespace qtrack {

namespace {

struct Reconstructed {
  bool is_true = false;
  const Particle* owner = nullptr;  // matched, else majority; null when all noise
  double phi = 0.0;
};

struct Classification {
  std::vector<Reconstructed> candidates;
  std::set<ParticleId> matched;
};

Classification classify(std::span<const TrackCandidate> candidates, const Event& event, const ScoreOptions& options) {
  if (!event.has_truth()) throw Error("score: event carries no truth particles");
  if (options.min_hits < 1) throw Error("score: min_hits must be >= 1");
  Classification out;
  for (const TrackCandidate& c : candidates) {
    if (c.hit_ids.size() < static_cast<std::size_t>(options.min_hits)) continue;
    std::map<ParticleId, std::size_t> counts;
    for (HitId h : c.hit_ids) ++counts[event.hit(h).particle_id];

    Reconstructed r;
    r.phi = event.hit(c.hit_ids.front()).phi;
    ParticleId majority = 0;
    std::size_t best = 0;
    for (const auto& [pid, n] : counts) {
      if (pid != 0 && n > best) {
        best = n;
        majority = pid;
      }
    }
    if (majority != 0) {
      r.owner = event.find_particle(majority);
      r.phi = r.owner->phi;
    }
    if (counts.size() == 1 && majority != 0) {
      const std::size_t total = r.owner->hit_ids.size();
      r.is_true = options.rule == MatchRule::exact ? best == total : 2 * best >= total;
      if (r.is_true) out.matched.insert(majority);
    }
    out.candidates.push_back(r);
  }
  return out;
}

int phi_sector(double phi) {
  const double stride = 2.0 * std::numbers::pi / kSectorCount;
  const int k = static_cast<int>(std::floor((phi + std::numbers::pi) / stride));
  return std::clamp(k, 0, kSectorCount - 1);
}

std::optional<double> spread(const std::vector<double>& values) {
  if (values.size() < 2) return std::nullopt;
  double mean = 0.0;
  for (double v : values) mean += v;
  mean /= static_cast<double>(values.size());
  double var = 0.0;
  for (double v : values) var += (v - mean) * (v - mean);
  return std::sqrt(var / static_cast<double>(values.size() - 1));
}

using ParticleFilter = std::function<bool(const Particle&)>;

Metrics tally(const Classification& cls, const Event& event, const ScoreOptions& options,
              const ParticleFilter& particle_in, bool keep_unowned) {
  struct Counts {
    std::size_t reco = 0;
    std::size_t true_reco = 0;
    std::size_t matched = 0;
    std::size_t n_true = 0;
  };
  Counts total;
  std::vector<Counts> sectors(kSectorCount);

  for (const Reconstructed& r : cls.candidates) {
    if (r.owner != nullptr ? !particle_in(*r.owner) : !keep_unowned) continue;
    Counts& s = sectors[static_cast<std::size_t>(phi_sector(r.phi))];
    ++total.reco;
    ++s.reco;
    if (r.is_true) {
      ++total.true_reco;
      ++s.true_reco;
    }
  }
  for (const Particle& p : event.particles()) {
    if (p.hit_ids.size() < static_cast<std::size_t>(options.min_hits) || !particle_in(p)) continue;
    Counts& s = sectors[static_cast<std::size_t>(phi_sector(p.phi))];
    ++total.n_true;
    ++s.n_true;
    if (cls.matched.count(p.particle_id) != 0) {
      ++total.matched;
      ++s.matched;
    }
  }

  Metrics m;
  m.n_reconstructed = total.reco;
  m.n_true_reconstructed = total.true_reco;
  m.n_matched_particles = total.matched;
  m.n_true = total.n_true;
  if (total.reco > 0) m.purity = static_cast<double>(total.true_reco) / static_cast<double>(total.reco);
  if (total.n_true > 0) m.efficiency = static_cast<double>(total.matched) / static_cast<double>(total.n_true);
  if (m.purity && m.efficiency) m.f1 = harmonic_mean(*m.purity, *m.efficiency);

  std::vector<double> purities;
  std::vector<double> efficiencies;
  for (const Counts& s : sectors) {
    if (s.reco > 0) purities.push_back(static_cast<double>(s.true_reco) / static_cast<double>(s.reco));
    if (s.n_true > 0) efficiencies.push_back(static_cast<double>(s.matched) / static_cast<double>(s.n_true));
  }
  m.purity_spread = spread(purities);
  m.efficiency_spread = spread(efficiencies);
  return m;
}

double variable_of(const Particle& p, BinVariable v) {
  switch (v) {
    case BinVariable::pt:
      return p.pt;
    case BinVariable::length:
      return static_cast<double>(p.hit_ids.size());
    case BinVariable::phi:
      return p.phi;
    case BinVariable::eta:
      return p.eta;
  }
  return 0.0;
}

}  // namespace

double harmonic_mean(double purity, double efficiency) {
  if (purity <= 0.0 || efficiency <= 0.0) return 0.0;
  return 2.0 * purity * efficiency / (purity + efficiency);
}

std::string to_string(MatchRule rule) { return rule == MatchRule::exact ? "exact" : "majority"; }

MatchRule parse_match_rule(const std::string& text) {
  if (text == "majority") return MatchRule::majority;
  if (text == "exact") return MatchRule::exact;
  throw Error("unknown match rule '" + text + "' (expected majority or exact)");
}

std::string to_string(BinVariable v) {
  switch (v) {
    case BinVariable::pt:
      return "pt";
    case BinVariable::length:
      return "length";
    case BinVariable::phi:
      return "phi";
    case BinVariable::eta:
      return "eta";
  }
  return "pt";
}

BinVariable parse_bin_variable(const std::string& text) {
  if (text == "pt") return BinVariable::pt;
  if (text == "length") return BinVariable::length;
  if (text == "phi") return BinVariable::phi;
  if (text == "eta") return BinVariable::eta;
  throw Error("unknown binning variable '" + text + "' (expected pt, length, phi or eta)");
}

Metrics score(std::span<const TrackCandidate> candidates, const Event& event, const ScoreOptions& options) {
  const Classification cls = classify(candidates, event, options);
  return tally(cls, event, options, [](const Particle&) { return true; }, true);
}

std::vector<BinMetrics> binned_metrics(std::span<const TrackCandidate> candidates, const Event& event,
                                       BinVariable variable, std::span<const double> bin_edges,
                                       const ScoreOptions& options) {
  if (bin_edges.size() < 2) throw Error("binned_metrics: need at least two bin edges");
  for (std::size_t k = 1; k < bin_edges.size(); ++k) {
    if (!(bin_edges[k] > bin_edges[k - 1])) throw Error("binned_metrics: bin edges must be strictly increasing");
  }
  const Classification cls = classify(candidates, event, options);
  std::vector<BinMetrics> out;
  for (std::size_t k = 0; k + 1 < bin_edges.size(); ++k) {
    const double lo = bin_edges[k];
    const double hi = bin_edges[k + 1];
    const auto in_bin = [&](const Particle& p) {
      const double v = variable_of(p, variable);
      return v >= lo && v < hi;
    };
    out.push_back({lo, hi, tally(cls, event, options, in_bin, false)});
  }
  return out;
}

std::vector<ScanRow> energy_scan(const Qubo& q, std::span<const ScanPoint> points) {
  const auto truth = std::count_if(points.begin(), points.end(), [](const ScanPoint& p) { return p.tag == "truth"; });
  if (truth != 1) throw Error("energy_scan: expected exactly one truth assignment, got " + std::to_string(truth));
  std::vector<ScanRow> rows;
  double lowest = 0.0;
  for (const ScanPoint& p : points) {
    ScanRow row;
    row.raw_energy = energy(q, p.bits);
    row.purity = p.metrics.purity;
    row.efficiency = p.metrics.efficiency;
    row.tag = p.tag;
    lowest = rows.empty() ? row.raw_energy : std::min(lowest, row.raw_energy);
    rows.push_back(std::move(row));
  }
  for (ScanRow& row : rows) row.energy = row.raw_energy - lowest + 1000.0;
  return rows;
}

void write_energy_scan_csv(std::ostream& out, std::span<const ScanRow> rows) {
  out << "energy,purity,efficiency,tag\n";
  for (const ScanRow& r : rows) {
    out << format_double(r.energy) << ',' << (r.purity ? format_double(*r.purity) : "") << ','
        << (r.efficiency ? format_double(*r.efficiency) : "") << ',' << r.tag << '\n';
  }
}

}  // namespace qtrack
