// SPDX-License-Identifier: Apache-2.0
// Copyright Contributors to the qtrack project.

#include <algorithm>
#include <cmath>
#include <numbers>
#include <random>
#include <string>

#include "qtrack/error.hpp"
#include "qtrack/event.hpp"

namespace qtrack {

namespace {

constexpr double kPi = std::numbers::pi;
constexpr int kPhiModules = 64;
constexpr int kZModules = 20;
constexpr double kDuplicateOffset = 1.5;  // mm, radial offset of an overlapping module

// R[mm] = 1000 * pT[GeV] / (0.3 * B[T])
double curvature_radius(double pt, double field) { return 1000.0 * pt / (0.3 * field); }

int module_of(double phi, double z, double half_length) {
  const int phi_bin = std::clamp(static_cast<int>((phi + kPi) / (2.0 * kPi) * kPhiModules), 0, kPhiModules - 1);
  const int z_bin =
      std::clamp(static_cast<int>((z + half_length) / (2.0 * half_length) * kZModules), 0, kZModules - 1);
  return 1 + phi_bin + kPhiModules * z_bin;
}

struct Draft {
  Hit hit;
  std::size_t particle_slot = 0;  // index into the particle list, or npos for noise
};

}  // namespace

std::vector<double> GeneratorConfig::default_layer_radii() {
  return {32.0, 52.0, 72.0, 94.0, 116.0, 144.0, 172.0, 216.0, 260.0,
          310.0, 360.0, 430.0, 500.0, 580.0, 660.0, 820.0, 1020.0};
}

void GeneratorConfig::validate() const {
  if (n_particles < 1) throw Error("generator: n_particles must be >= 1");
  if (!(noise_fraction >= 0.0 && noise_fraction < 1.0)) throw Error("generator: noise_fraction must be in [0, 1)");
  if (!(beamspot_sigma_z > 0.0)) throw Error("generator: beamspot_sigma_z must be positive");
  if (!(pt_min > 0.0 && pt_max >= pt_min)) throw Error("generator: pt range must satisfy 0 < pt_min <= pt_max");
  if (!(eta_max >= 0.0)) throw Error("generator: eta_max must be non-negative");
  if (!(half_length > 0.0)) throw Error("generator: half_length must be positive");
  if (!(field_strength > 0.0)) throw Error("generator: field_strength must be positive");
  if (!(smearing_sigma >= 0.0)) throw Error("generator: smearing_sigma must be non-negative");
  if (!(duplicate_fraction >= 0.0 && duplicate_fraction <= 1.0)) {
    throw Error("generator: duplicate_fraction must be in [0, 1]");
  }
  if (layer_radii.empty()) throw Error("generator: at least one layer is required");
  for (std::size_t i = 0; i < layer_radii.size(); ++i) {
    if (!(layer_radii[i] > 0.0)) throw Error("generator: layer radii must be positive");
    if (i > 0 && !(layer_radii[i] > layer_radii[i - 1])) {
      throw Error("generator: layer radii must be strictly increasing");
    }
  }
  const double reach = 2.0 * curvature_radius(pt_min, field_strength);
  if (reach < layer_radii.front()) {
    throw Error("generator: tracks with pt " + std::to_string(pt_min) + " GeV curl at r = " +
                std::to_string(reach) + " mm, inside the first layer at " +
                std::to_string(layer_radii.front()) + " mm");
  }
}

Event generate_event(const GeneratorConfig& config) {
  config.validate();

  std::mt19937_64 rng(config.seed);
  std::normal_distribution<double> vertex(0.0, config.beamspot_sigma_z);
  std::uniform_real_distribution<double> pt_dist(config.pt_min, config.pt_max);
  std::uniform_real_distribution<double> phi_dist(-kPi, kPi);
  std::uniform_real_distribution<double> eta_dist(-config.eta_max, config.eta_max);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::normal_distribution<double> smear(0.0, config.smearing_sigma);

  const auto draw_smear = [&] { return config.smearing_sigma > 0.0 ? smear(rng) : 0.0; };

  std::vector<Particle> particles;
  std::vector<Draft> drafts;
  const auto n_layers = static_cast<int>(config.layer_radii.size());

  for (int p = 0; p < config.n_particles; ++p) {
    Particle particle;
    particle.particle_id = p + 1;
    particle.vertex_z = vertex(rng);
    particle.pt = pt_dist(rng);
    particle.phi = phi_dist(rng);
    particle.eta = eta_dist(rng);
    const double charge = unit(rng) < 0.5 ? -1.0 : 1.0;

    const double radius = curvature_radius(particle.pt, config.field_strength);
    const double cot_theta = std::sinh(particle.eta);
    const std::size_t slot = particles.size();
    bool any = false;

    for (int layer = 0; layer < n_layers; ++layer) {
      const double r = config.layer_radii[static_cast<std::size_t>(layer)];
      if (r > 2.0 * radius) break;
      const double half_turn = std::asin(r / (2.0 * radius));
      const double z = particle.vertex_z + 2.0 * radius * half_turn * cot_theta;
      if (std::abs(z) > config.half_length) break;

      const double phi = particle.phi - charge * half_turn;
      const double momentum_phi = particle.phi - charge * 2.0 * half_turn;
      const double tx = r * std::cos(phi);
      const double ty = r * std::sin(phi);

      auto emit = [&](double radial_offset) {
        const double rr = r + radial_offset;
        const double sx = rr * std::cos(phi) + draw_smear();
        const double sy = rr * std::sin(phi) + draw_smear();
        const double sz = z + draw_smear();
        Hit h = Hit::at(0, sx, sy, sz);
        h.volume_id = 1;
        h.layer_id = 2 * (layer + 1);
        h.module_id = module_of(h.phi, h.z, config.half_length);
        h.particle_id = particle.particle_id;
        h.tx = rr / r * tx;
        h.ty = rr / r * ty;
        h.tz = z;
        h.tpx = particle.pt * std::cos(momentum_phi);
        h.tpy = particle.pt * std::sin(momentum_phi);
        h.tpz = particle.pt * cot_theta;
        drafts.push_back({h, slot});
      };

      emit(0.0);
      any = true;
      if (config.duplicate_fraction > 0.0 && unit(rng) < config.duplicate_fraction) emit(kDuplicateOffset);
    }
    if (any) particles.push_back(std::move(particle));
  }

  const std::size_t n_signal = drafts.size();
  const auto n_noise = static_cast<std::size_t>(
      std::llround(config.noise_fraction / (1.0 - config.noise_fraction) * static_cast<double>(n_signal)));
  std::uniform_int_distribution<int> layer_dist(0, n_layers - 1);
  std::uniform_real_distribution<double> z_dist(-config.half_length, config.half_length);
  constexpr std::size_t npos = static_cast<std::size_t>(-1);
  for (std::size_t i = 0; i < n_noise; ++i) {
    const int layer = layer_dist(rng);
    const double r = config.layer_radii[static_cast<std::size_t>(layer)];
    const double phi = phi_dist(rng);
    const double z = z_dist(rng);
    Hit h = Hit::at(0, r * std::cos(phi), r * std::sin(phi), z);
    h.volume_id = 1;
    h.layer_id = 2 * (layer + 1);
    h.module_id = module_of(h.phi, h.z, config.half_length);
    h.tx = h.x;
    h.ty = h.y;
    h.tz = h.z;
    drafts.push_back({h, npos});
  }

  // Ids follow detector order so they carry no truth information.
  std::stable_sort(drafts.begin(), drafts.end(), [](const Draft& a, const Draft& b) {
    if (a.hit.layer_id != b.hit.layer_id) return a.hit.layer_id < b.hit.layer_id;
    if (a.hit.phi != b.hit.phi) return a.hit.phi < b.hit.phi;
    return a.hit.z < b.hit.z;
  });

  std::vector<std::size_t> hits_per_particle(particles.size(), 0);
  for (const Draft& d : drafts) {
    if (d.particle_slot != npos) ++hits_per_particle[d.particle_slot];
  }

  std::vector<Hit> hits;
  hits.reserve(drafts.size());
  for (std::size_t i = 0; i < drafts.size(); ++i) {
    Hit h = drafts[i].hit;
    h.id = static_cast<HitId>(i + 1);
    if (drafts[i].particle_slot != npos) {
      h.weight = 1.0 / static_cast<double>(hits_per_particle[drafts[i].particle_slot]);
    }
    hits.push_back(h);
  }

  // Kinematics come from the truth rows, exactly as on ingest, so a written
  // and re-read event scores identically. Only the vertex stays exact.
  std::vector<Particle> derived = Event::from_truth(hits).particles();
  for (std::size_t p = 0; p < derived.size(); ++p) {
    if (derived[p].particle_id != particles[p].particle_id) throw Error("generator: particle bookkeeping mismatch");
    derived[p].vertex_z = particles[p].vertex_z;
  }
  return Event(std::move(hits), std::move(derived));
}

}  // namespace qtrack
