// SPDX-License-Identifier: Apache-2.0
// Copyright Contributors to the qtrack project.

#pragma once

#include <cstdint>
#include <iosfwd>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "qtrack/event.hpp"
#include "qtrack/preprocess.hpp"
#include "qtrack/qubo.hpp"

namespace qtrack {

struct TrackCandidate {
  std::vector<HitId> hit_ids;    // increasing r
  std::vector<EdgeId> edge_ids;  // hit_ids[k] -> hit_ids[k + 1]
};

/// Chains of selected edges. At a hit with several inbound or outbound edges
/// the pairing with the largest cos_theta wins (ties by edge ids); chains are
/// then claimed longest first and trimmed where they would reuse a hit, so
/// candidates are hit-disjoint and have at least two hits.
std::vector<TrackCandidate> assemble_tracks(std::span<const Edge> selected, const Event& event,
                                            const QuboParams& params = {});

/// How a reconstructed candidate is matched to a truth particle.
enum class MatchRule {
  majority,  // all hits from one particle, holding >= 50% of its hits
  exact,     // all hits from one particle, holding all of its hits
};

std::string to_string(MatchRule rule);
MatchRule parse_match_rule(const std::string& text);

struct Metrics {
  std::optional<double> purity;
  std::optional<double> efficiency;
  std::optional<double> f1;
  std::size_t n_reconstructed = 0;
  std::size_t n_true_reconstructed = 0;
  std::size_t n_matched_particles = 0;
  std::size_t n_true = 0;
  // 1 sigma over azimuthal sectors; absent with fewer than two populated sectors.
  std::optional<double> purity_spread;
  std::optional<double> efficiency_spread;
};

struct ScoreOptions {
  int min_hits = 3;
  MatchRule rule = MatchRule::majority;
};

Metrics score(std::span<const TrackCandidate> candidates, const Event& event, const ScoreOptions& options = {});

enum class BinVariable { pt, length, phi, eta };

std::string to_string(BinVariable v);
BinVariable parse_bin_variable(const std::string& text);

struct BinMetrics {
  double lo = 0.0;
  double hi = 0.0;
  Metrics metrics;

  double center() const { return 0.5 * (lo + hi); }
};

/// Particles are binned by `variable`; a candidate follows its matched
/// particle, or its majority particle when unmatched. Noise-only candidates
/// belong to no bin. Values outside [front, back) are dropped.
std::vector<BinMetrics> binned_metrics(std::span<const TrackCandidate> candidates, const Event& event,
                                       BinVariable variable, std::span<const double> bin_edges,
                                       const ScoreOptions& options = {});

/// Union over sectors, collapsed on (a, b); ids become positions in (a, b) order.
std::vector<Edge> merge_sectors(const std::map<int, std::vector<Edge>>& per_sector_selections);

struct ScanPoint {
  std::string tag;  // exactly one "truth" entry is required
  std::vector<std::uint8_t> bits;
  Metrics metrics;
};

struct ScanRow {
  double energy = 0.0;  // shifted so the lowest row reads 1000
  double raw_energy = 0.0;
  std::optional<double> purity;
  std::optional<double> efficiency;
  std::string tag;
};

std::vector<ScanRow> energy_scan(const Qubo& q, std::span<const ScanPoint> points);

void write_energy_scan_csv(std::ostream& out, std::span<const ScanRow> rows);

/// f1 from purity and efficiency, 0 when either is 0.
double harmonic_mean(double purity, double efficiency);

}  // namespace qtrack
