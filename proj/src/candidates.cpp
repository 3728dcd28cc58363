// SPDX-License-Identifier: Apache-2.0
// Copyright Contributors to the qtrack project.

#include <algorithm>
#include <cmath>
#include <functional>
#include <istream>
#include <ostream>
#include <string>

#include "qtrack/error.hpp"
#include "qtrack/preprocess.hpp"
#include "qtrack/text.hpp"

namespace qtrack {

CandidateCut calibrate_cut(const KdeModel& model, std::span<const Event> events, double target_recall) {
  if (!(target_recall > 0.0 && target_recall <= 1.0)) {
    throw Error("calibrate_cut: target_recall must lie in (0, 1], got " + std::to_string(target_recall));
  }
  std::vector<double> priors;
  for (const Event& event : events) {
    for (const auto& [a, b] : event.true_edges()) {
      const Hit& inner = event.hit(a);
      const Hit& outer = event.hit(b);
      if (!(inner.r < outer.r)) continue;
      priors.push_back(edge_prior(model, inner, outer));
    }
  }
  if (priors.empty()) throw Error("calibrate_cut: calibration events contain no true edges");

  std::sort(priors.begin(), priors.end(), std::greater<>());
  const double wanted = target_recall * static_cast<double>(priors.size());
  const auto keep = std::clamp<std::size_t>(static_cast<std::size_t>(std::ceil(wanted - 1e-9)), 1, priors.size());

  CandidateCut cut;
  cut.target_recall = target_recall;
  cut.threshold = priors[keep - 1];
  const auto kept = std::count_if(priors.begin(), priors.end(), [&](double p) { return p >= cut.threshold; });
  cut.calibration_recall = static_cast<double>(kept) / static_cast<double>(priors.size());
  cut.calibration_edges = priors.size();
  return cut;
}

std::vector<Edge> select_candidates(const Event& event, const Sector& sector, const KdeModel& model,
                                    const CandidateCut& cut, PairCounter* counter) {
  std::vector<const Hit*> hits;
  hits.reserve(sector.hit_ids.size());
  for (HitId id : sector.hit_ids) hits.push_back(&event.hit(id));
  std::sort(hits.begin(), hits.end(), [](const Hit* a, const Hit* b) { return a->r != b->r ? a->r < b->r : a->id < b->id; });

  const double peak = model.peak_density();
  std::vector<Edge> edges;
  std::uint64_t visits = 0;
  for (std::size_t i = 0; i < hits.size(); ++i) {
    for (std::size_t j = i + 1; j < hits.size(); ++j) {
      ++visits;
      const Hit& a = *hits[i];
      const Hit& b = *hits[j];
      if (!(a.r < b.r)) continue;
      double prior = 0.0;
      if (peak > 0.0) prior = std::min(1.0, model.density(segment_features(a, b)) / peak);
      if (prior >= cut.threshold) edges.push_back({0, a.id, b.id, prior});
    }
  }
  if (counter != nullptr) counter->pair_visits += visits;

  std::sort(edges.begin(), edges.end(), [](const Edge& x, const Edge& y) { return std::tie(x.a, x.b) < std::tie(y.a, y.b); });
  for (std::size_t i = 0; i < edges.size(); ++i) edges[i].id = static_cast<EdgeId>(i);
  return edges;
}

void write_edges_csv(std::ostream& out, std::span<const Edge> edges) {
  out << "edge_id,hit_a,hit_b,prior\n";
  for (const Edge& e : edges) out << e.id << ',' << e.a << ',' << e.b << ',' << format_double(e.prior) << '\n';
}

std::vector<Edge> read_edges_csv(std::istream& in) {
  std::string raw;
  if (!std::getline(in, raw) || chomp(raw) != "edge_id,hit_a,hit_b,prior") {
    throw Error("edges csv: expected header 'edge_id,hit_a,hit_b,prior'");
  }
  std::vector<Edge> edges;
  std::size_t line_no = 1;
  while (std::getline(in, raw)) {
    ++line_no;
    const auto line = chomp(raw);
    if (line.empty()) continue;
    const auto f = split(line, ',');
    if (f.size() != 4) throw Error("edges csv:" + std::to_string(line_no) + ": expected 4 fields");
    try {
      edges.push_back({parse_int(f[0]), parse_int(f[1]), parse_int(f[2]), parse_double(f[3])});
    } catch (const Error& e) {
      throw Error("edges csv:" + std::to_string(line_no) + ": " + e.what());
    }
  }
  return edges;
}

}  // namespace qtrack
