// SPDX-License-Identifier: Apache-2.0
// Copyright Contributors to the qtrack project.

#pragma once

#include <array>
#include <cstdint>
#include <iosfwd>
#include <optional>
#include <span>
#include <unordered_map>
#include <utility>
#include <vector>

#include "qtrack/event.hpp"

namespace qtrack {

// --- sectors ---------------------------------------------------------------

inline constexpr int kSectorCount = 32;

/// Azimuthal slice covering 1/16 of the circle; neighbours half-overlap.
/// Membership is the half-open interval [phi_min, phi_max) taken modulo 2*pi.
struct Sector {
  int index = 0;
  double phi_min = 0.0;
  double phi_max = 0.0;
  std::vector<HitId> hit_ids;

  bool contains(double phi) const;
};

/// The two sector indices whose intervals contain `phi`.
std::array<int, 2> sectors_of(double phi);

std::vector<Sector> sectorize(const Event& event);

// --- edges -----------------------------------------------------------------

using EdgeId = std::int64_t;

/// Candidate hit pair, inner hit `a` strictly closer to the beam than `b`.
struct Edge {
  EdgeId id = 0;
  HitId a = 0;
  HitId b = 0;
  double prior = 0.0;
};

// --- kernel density prior --------------------------------------------------

/// (z-intercept [mm], angle of the segment in the rz-plane [rad]).
struct SegmentFeatures {
  double z_intercept = 0.0;
  double rz_angle = 0.0;
};

SegmentFeatures segment_features(const Hit& inner, const Hit& outer);

/// Two-dimensional Gaussian product-kernel density estimate.
///
/// Evaluation sums only samples within kCutoff bandwidths (Mahalanobis) of the
/// query; the omitted mass per sample is below exp(-kCutoff^2 / 2).
class KdeModel {
 public:
  static constexpr double kCutoff = 7.0;
  static constexpr int kFormatVersion = 1;

  KdeModel() = default;

  /// Bandwidths default to Scott's rule, sigma_d * n^(-1/6).
  static KdeModel fit(std::vector<std::array<double, 2>> samples,
                      std::optional<std::array<double, 2>> bandwidth = std::nullopt);

  double density(double z_intercept, double rz_angle) const;
  double density(const SegmentFeatures& f) const { return density(f.z_intercept, f.rz_angle); }

  /// Largest density, located by mean-shift from the densest grid cell.
  double peak_density() const { return peak_; }
  const std::array<double, 2>& mode() const { return mode_; }

  const std::vector<std::array<double, 2>>& samples() const { return samples_; }
  const std::array<double, 2>& bandwidth() const { return bandwidth_; }
  double normalization() const { return norm_; }

  void save(std::ostream& out) const;
  static KdeModel load(std::istream& in);

 private:
  void build_index();
  void locate_mode();

  std::vector<std::array<double, 2>> samples_;
  std::array<double, 2> bandwidth_{1.0, 1.0};
  double norm_ = 0.0;
  double peak_ = 0.0;
  std::array<double, 2> mode_{0.0, 0.0};

  // Samples bucketed on a grid of one bandwidth per cell.
  std::array<double, 2> origin_{0.0, 0.0};
  std::array<double, 2> cell_width_{1.0, 1.0};
  std::array<int, 2> cells_{0, 0};
  std::vector<std::uint32_t> cell_start_;
  std::vector<std::array<double, 2>> sorted_;
};

struct KdeOptions {
  std::optional<std::array<double, 2>> bandwidth;
  std::size_t max_samples = 4000;  // evenly strided subsample above this size
};

/// Fits the prior on consecutive same-particle segments of truth-labelled events.
KdeModel train_kde(std::span<const Event> events, const KdeOptions& options = {});

/// Density at the segment's features divided by the peak density, in [0, 1].
double edge_prior(const KdeModel& model, const Hit& a, const Hit& b);

// --- candidate selection ---------------------------------------------------

/// Frozen prior threshold, chosen once on a calibration set.
struct CandidateCut {
  double threshold = 0.0;
  double target_recall = 0.93;
  double calibration_recall = 1.0;
  std::size_t calibration_edges = 0;
};

/// Largest threshold that keeps at least `target_recall` of the true edges of
/// the calibration events.
CandidateCut calibrate_cut(const KdeModel& model, std::span<const Event> events, double target_recall = 0.93);

struct PairCounter {
  std::uint64_t pair_visits = 0;
};

/// Every r-ordered hit pair in the sector with prior >= cut.threshold.
/// Edge ids are positions in (a, b) order.
std::vector<Edge> select_candidates(const Event& event, const Sector& sector, const KdeModel& model,
                                    const CandidateCut& cut, PairCounter* counter = nullptr);

// --- sub-graphs ------------------------------------------------------------

struct SubGraph {
  int index = 0;
  std::vector<EdgeId> edge_ids;  // ascending

  std::size_t m() const { return edge_ids.size(); }
};

using EdgeBias = std::unordered_map<EdgeId, double>;

/// Keeps, per hit, the `max_degree` incident edges with the highest bias
/// (ties by id) and returns the surviving ids in ascending order.
std::vector<EdgeId> prune_by_degree(std::span<const Edge> edges, const EdgeBias& bias, int max_degree);

/// Degree pruning followed by a flood fill over edges that share a hit.
/// Components are sorted by descending size, then by smallest edge id.
std::vector<SubGraph> subgraph(std::span<const Edge> edges, const EdgeBias& bias, int max_degree = 5);

/// Same pruning, but the flood fill only follows the given edge-to-edge links.
std::vector<SubGraph> subgraph(std::span<const Edge> edges, const EdgeBias& bias, int max_degree,
                               std::span<const std::pair<EdgeId, EdgeId>> links);

// --- serialization ---------------------------------------------------------

void write_edges_csv(std::ostream& out, std::span<const Edge> edges);
std::vector<Edge> read_edges_csv(std::istream& in);

}  // namespace qtrack
