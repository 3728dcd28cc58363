// SPDX-License-Identifier: Apache-2.0
// Copyright Contributors to the qtrack project.

#include "qtrack/event.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <map>
#include <numbers>
#include <string>

#include "qtrack/error.hpp"
#include "qtrack/text.hpp"

namespace qtrack {

Hit Hit::at(HitId id, double x, double y, double z) {
  Hit h;
  h.id = id;
  h.x = x;
  h.y = y;
  h.z = z;
  h.r = std::hypot(x, y);
  h.phi = std::atan2(y, x);
  if (h.phi <= -std::numbers::pi) h.phi = std::numbers::pi;
  return h;
}

Event::Event(std::vector<Hit> hits, std::vector<Particle> particles)
    : hits_(std::move(hits)), particles_(std::move(particles)) {
  index();
}

void Event::index() {
  hit_index_.reserve(hits_.size());
  for (std::size_t i = 0; i < hits_.size(); ++i) {
    auto [it, inserted] = hit_index_.emplace(hits_[i].id, i);
    if (!inserted) {
      throw Error("duplicate hit id " + std::to_string(hits_[i].id));
    }
  }

  std::size_t linked = 0;
  for (std::size_t p = 0; p < particles_.size(); ++p) {
    const Particle& particle = particles_[p];
    if (particle.particle_id == 0) throw Error("particle id 0 is reserved for noise");
    if (!particle_index_.emplace(particle.particle_id, p).second) {
      throw Error("duplicate particle id " + std::to_string(particle.particle_id));
    }
    const Hit* previous = nullptr;
    for (HitId id : particle.hit_ids) {
      const Hit* h = find_hit(id);
      if (h == nullptr) {
        throw Error("particle " + std::to_string(particle.particle_id) +
                    " references unknown hit " + std::to_string(id));
      }
      if (h->particle_id != particle.particle_id) {
        throw Error("hit " + std::to_string(id) + " is labelled particle " +
                    std::to_string(h->particle_id) + " but listed under " +
                    std::to_string(particle.particle_id));
      }
      if (previous != nullptr) {
        if (previous->r > h->r) {
          throw Error("particle " + std::to_string(particle.particle_id) +
                      " hits are not ordered by radius");
        }
        next_on_track_.emplace(previous->id, id);
      }
      previous = h;
      ++linked;
    }
  }

  const auto labelled = static_cast<std::size_t>(
      std::count_if(hits_.begin(), hits_.end(), [](const Hit& h) { return !h.is_noise(); }));
  if (labelled != linked) {
    throw Error("every labelled hit must belong to exactly one particle (" +
                std::to_string(labelled) + " labelled, " + std::to_string(linked) + " linked)");
  }
}

Event Event::from_truth(std::vector<Hit> hits) {
  std::map<ParticleId, std::vector<const Hit*>> groups;
  for (const Hit& h : hits) {
    if (!h.is_noise()) groups[h.particle_id].push_back(&h);
  }

  std::vector<Particle> particles;
  particles.reserve(groups.size());
  for (auto& [pid, members] : groups) {
    std::sort(members.begin(), members.end(), [](const Hit* a, const Hit* b) {
      return a->r != b->r ? a->r < b->r : a->id < b->id;
    });
    const Hit& inner = *members.front();
    Particle p;
    p.particle_id = pid;
    p.pt = std::hypot(inner.tpx, inner.tpy);
    p.phi = std::atan2(inner.tpy, inner.tpx);
    if (p.pt > 0.0) {
      p.eta = std::asinh(inner.tpz / p.pt);
      // Straight-line extrapolation from the innermost truth point.
      p.vertex_z = inner.tz - inner.tpz / p.pt * std::hypot(inner.tx, inner.ty);
    } else {
      p.vertex_z = inner.tz;
    }
    p.hit_ids.reserve(members.size());
    for (const Hit* h : members) p.hit_ids.push_back(h->id);
    particles.push_back(std::move(p));
  }
  return Event(std::move(hits), std::move(particles));
}

double Event::noise_fraction() const {
  if (hits_.empty()) return 0.0;
  const auto noise = std::count_if(hits_.begin(), hits_.end(), [](const Hit& h) { return h.is_noise(); });
  return static_cast<double>(noise) / static_cast<double>(hits_.size());
}

const Hit* Event::find_hit(HitId id) const {
  auto it = hit_index_.find(id);
  return it == hit_index_.end() ? nullptr : &hits_[it->second];
}

const Hit& Event::hit(HitId id) const {
  const Hit* h = find_hit(id);
  if (h == nullptr) throw Error("unknown hit id " + std::to_string(id));
  return *h;
}

const Particle* Event::find_particle(ParticleId id) const {
  auto it = particle_index_.find(id);
  return it == particle_index_.end() ? nullptr : &particles_[it->second];
}

bool Event::is_true_edge(HitId a, HitId b) const {
  auto it = next_on_track_.find(a);
  return it != next_on_track_.end() && it->second == b;
}

std::vector<std::pair<HitId, HitId>> Event::true_edges() const {
  std::vector<std::pair<HitId, HitId>> out;
  for (const Particle& p : particles_) {
    for (std::size_t i = 1; i < p.hit_ids.size(); ++i) out.emplace_back(p.hit_ids[i - 1], p.hit_ids[i]);
  }
  return out;
}

Event dedup_hits(const Event& event) {
  std::vector<HitId> dropped;
  std::vector<Particle> particles = event.particles();
  for (Particle& p : particles) {
    // Best hit per layer; r then id.
    std::map<std::pair<int, int>, const Hit*> best;
    for (HitId id : p.hit_ids) {
      const Hit& h = event.hit(id);
      auto [it, inserted] = best.emplace(h.layer_key(), &h);
      if (inserted) continue;
      const Hit* kept = it->second;
      if (h.r < kept->r || (h.r == kept->r && h.id < kept->id)) {
        dropped.push_back(kept->id);
        it->second = &h;
      } else {
        dropped.push_back(h.id);
      }
    }
    if (dropped.empty()) continue;
    std::erase_if(p.hit_ids, [&](HitId id) {
      return std::find(dropped.begin(), dropped.end(), id) != dropped.end();
    });
  }
  if (dropped.empty()) return event;

  std::sort(dropped.begin(), dropped.end());
  std::vector<Hit> hits;
  hits.reserve(event.hits().size() - dropped.size());
  for (const Hit& h : event.hits()) {
    if (!std::binary_search(dropped.begin(), dropped.end(), h.id)) hits.push_back(h);
  }
  return Event(std::move(hits), std::move(particles));
}

// --- text helpers ----------------------------------------------------------

std::string format_double(double value) {
  char buffer[64];
  auto [ptr, ec] = std::to_chars(buffer, buffer + sizeof(buffer), value);
  if (ec != std::errc()) throw Error("cannot format floating point value");
  return std::string(buffer, ptr);
}

double parse_double(std::string_view text) {
  double value = 0.0;
  const char* first = text.data();
  const char* last = text.data() + text.size();
  if (first != last && *first == '+') ++first;
  auto [ptr, ec] = std::from_chars(first, last, value);
  if (ec != std::errc() || ptr != last || first == last) {
    throw Error("invalid number '" + std::string(text) + "'");
  }
  return value;
}

std::int64_t parse_int(std::string_view text) {
  std::int64_t value = 0;
  auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), value);
  if (ec != std::errc() || ptr != text.data() + text.size() || text.empty()) {
    throw Error("invalid integer '" + std::string(text) + "'");
  }
  return value;
}

std::vector<std::string_view> split(std::string_view line, char sep) {
  std::vector<std::string_view> fields;
  std::size_t start = 0;
  while (true) {
    const std::size_t pos = line.find(sep, start);
    if (pos == std::string_view::npos) {
      fields.push_back(line.substr(start));
      return fields;
    }
    fields.push_back(line.substr(start, pos - start));
    start = pos + 1;
  }
}

std::string_view chomp(std::string_view line) {
  if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
  return line;
}

}  // namespace qtrack
