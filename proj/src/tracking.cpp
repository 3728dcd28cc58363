// SPDX-License-Identifier: Apache-2.0
// Copyright Contributors to the qtrack project.

#include <algorithm>
#include <string>
#include <tuple>
#include <unordered_map>
#include <unordered_set>

#include "qtrack/error.hpp"
#include "qtrack/tracking.hpp"

namespace qtrack {

namespace {

struct Link {
  double cos_theta = 0.0;
  EdgeId in = 0;
  EdgeId out = 0;
  std::size_t in_pos = 0;
  std::size_t out_pos = 0;
};

}  // namespace

std::vector<TrackCandidate> assemble_tracks(std::span<const Edge> selected, const Event& event,
                                            const QuboParams& params) {
  for (const Edge& e : selected) {
    if (event.find_hit(e.a) == nullptr || event.find_hit(e.b) == nullptr) {
      throw Error("assemble_tracks: edge " + std::to_string(e.id) + " references an unknown hit");
    }
  }

  std::vector<Link> links;
  for (const auto& [i, j] : chained_pairs(selected)) {
    const double c = angle_kernel(event.hit(selected[i].a), event.hit(selected[i].b), event.hit(selected[j].b), params)
                         .cos_theta;
    links.push_back({c, selected[i].id, selected[j].id, i, j});
  }
  std::sort(links.begin(), links.end(), [](const Link& x, const Link& y) {
    if (x.cos_theta != y.cos_theta) return x.cos_theta > y.cos_theta;
    return std::tie(x.in, x.out) < std::tie(y.in, y.out);
  });

  constexpr std::size_t kNone = static_cast<std::size_t>(-1);
  std::vector<std::size_t> next(selected.size(), kNone);
  std::vector<std::size_t> prev(selected.size(), kNone);
  for (const Link& l : links) {
    if (next[l.in_pos] == kNone && prev[l.out_pos] == kNone) {
      next[l.in_pos] = l.out_pos;
      prev[l.out_pos] = l.in_pos;
    }
  }

  std::vector<TrackCandidate> chains;
  for (std::size_t k = 0; k < selected.size(); ++k) {
    if (prev[k] != kNone) continue;
    TrackCandidate chain;
    chain.hit_ids.push_back(selected[k].a);
    for (std::size_t at = k; at != kNone; at = next[at]) {
      chain.hit_ids.push_back(selected[at].b);
      chain.edge_ids.push_back(selected[at].id);
    }
    chains.push_back(std::move(chain));
  }
  std::sort(chains.begin(), chains.end(), [](const TrackCandidate& x, const TrackCandidate& y) {
    if (x.hit_ids.size() != y.hit_ids.size()) return x.hit_ids.size() > y.hit_ids.size();
    return x.edge_ids < y.edge_ids;
  });

  std::unordered_set<HitId> used;
  std::vector<TrackCandidate> out;
  for (const TrackCandidate& chain : chains) {
    // Split at hits already claimed by a longer chain.
    TrackCandidate piece;
    const auto flush = [&] {
      if (piece.hit_ids.size() >= 2) out.push_back(piece);
      piece = {};
    };
    for (std::size_t k = 0; k < chain.hit_ids.size(); ++k) {
      const HitId h = chain.hit_ids[k];
      if (used.count(h) != 0) {
        flush();
        continue;
      }
      if (!piece.hit_ids.empty()) piece.edge_ids.push_back(chain.edge_ids[k - 1]);
      piece.hit_ids.push_back(h);
    }
    flush();
    for (const HitId h : chain.hit_ids) used.insert(h);
  }
  std::sort(out.begin(), out.end(),
            [](const TrackCandidate& x, const TrackCandidate& y) { return x.hit_ids < y.hit_ids; });
  return out;
}

std::vector<Edge> merge_sectors(const std::map<int, std::vector<Edge>>& per_sector_selections) {
  std::vector<Edge> all;
  for (const auto& [sector, edges] : per_sector_selections) all.insert(all.end(), edges.begin(), edges.end());
  std::sort(all.begin(), all.end(), [](const Edge& x, const Edge& y) {
    if (x.a != y.a) return x.a < y.a;
    if (x.b != y.b) return x.b < y.b;
    return x.prior > y.prior;
  });
  all.erase(std::unique(all.begin(), all.end(), [](const Edge& x, const Edge& y) { return x.a == y.a && x.b == y.b; }),
            all.end());
  for (std::size_t i = 0; i < all.size(); ++i) all[i].id = static_cast<EdgeId>(i);
  return all;
}

}  // namespace qtrack
