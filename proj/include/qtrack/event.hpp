// SPDX-License-Identifier: Apache-2.0
// Copyright Contributors to the qtrack project.

#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <unordered_map>
#include <utility>
#include <vector>

namespace qtrack {

using HitId = std::int64_t;
using ParticleId = std::int64_t;

/// One detector measurement. Cylindrical coordinates are derived from x and y
/// on construction; the truth block mirrors the TrackML truth file.
struct Hit {
  HitId id = 0;
  double x = 0.0;
  double y = 0.0;
  double z = 0.0;
  double r = 0.0;
  double phi = 0.0;
  int volume_id = 0;
  int layer_id = 0;
  int module_id = 0;
  ParticleId particle_id = 0;  // 0 marks noise

  double tx = 0.0;
  double ty = 0.0;
  double tz = 0.0;
  double tpx = 0.0;
  double tpy = 0.0;
  double tpz = 0.0;
  double weight = 0.0;

  static Hit at(HitId id, double x, double y, double z);

  bool is_noise() const { return particle_id == 0; }
  std::pair<int, int> layer_key() const { return {volume_id, layer_id}; }
};

struct Particle {
  ParticleId particle_id = 0;
  double vertex_z = 0.0;
  double pt = 0.0;
  double eta = 0.0;
  double phi = 0.0;
  std::vector<HitId> hit_ids;  // increasing r
};

/// Immutable collection of hits and truth particles.
///
/// Construction validates id uniqueness and the hit/particle linkage; after
/// that the event is read-only and safe to share between threads.
class Event {
 public:
  Event() = default;
  Event(std::vector<Hit> hits, std::vector<Particle> particles);

  /// Builds the particle list by grouping non-noise hits on their truth label.
  static Event from_truth(std::vector<Hit> hits);

  const std::vector<Hit>& hits() const { return hits_; }
  const std::vector<Particle>& particles() const { return particles_; }
  double noise_fraction() const;
  bool empty() const { return hits_.empty(); }

  const Hit& hit(HitId id) const;
  const Hit* find_hit(HitId id) const;
  const Particle* find_particle(ParticleId id) const;

  /// True when `a` and `b` are consecutive hits of the same truth particle.
  bool is_true_edge(HitId a, HitId b) const;

  /// Ordered (inner, outer) pairs of consecutive hits over all particles.
  std::vector<std::pair<HitId, HitId>> true_edges() const;

  bool has_truth() const { return !particles_.empty(); }

 private:
  void index();

  std::vector<Hit> hits_;
  std::vector<Particle> particles_;
  std::unordered_map<HitId, std::size_t> hit_index_;
  std::unordered_map<ParticleId, std::size_t> particle_index_;
  std::unordered_map<HitId, HitId> next_on_track_;
};

/// Per particle, keeps one hit per detector layer: the smallest r, ties by id.
/// Noise hits pass through untouched.
Event dedup_hits(const Event& event);

struct GeneratorConfig {
  int n_particles = 100;
  double noise_fraction = 0.15;
  double beamspot_sigma_z = 5.5;  // mm
  double pt_min = 1.0;            // GeV
  double pt_max = 20.0;           // GeV
  double eta_max = 1.0;
  std::vector<double> layer_radii = default_layer_radii();  // mm
  double half_length = 1200.0;                               // mm
  double field_strength = 2.0;                               // T
  double smearing_sigma = 0.05;                              // mm
  double duplicate_fraction = 0.0;
  std::uint64_t seed = 1;

  void validate() const;

  static std::vector<double> default_layer_radii();
};

/// Helical tracks from a beamspot through a barrel of concentric layers, plus
/// uniform noise. Identical configs give bit-identical events.
Event generate_event(const GeneratorConfig& config);

/// Reads a TrackML hits/truth file pair.
Event read_trackml(const std::filesystem::path& hits_file,
                   const std::filesystem::path& truth_file);

/// Writes the two-file TrackML layout with shortest round-trip decimals.
void write_trackml(const Event& event, const std::filesystem::path& hits_file,
                   const std::filesystem::path& truth_file);

}  // namespace qtrack
