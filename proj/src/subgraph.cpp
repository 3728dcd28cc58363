// SPDX-License-Identifier: Apache-2.0
// Copyright Contributors to the qtrack project.

#include <algorithm>
#include <deque>
#include <map>
#include <string>
#include <unordered_map>

#include "qtrack/error.hpp"
#include "qtrack/preprocess.hpp"

namespace qtrack {

namespace {

double bias_of(const EdgeBias& bias, EdgeId id) {
  auto it = bias.find(id);
  if (it == bias.end()) throw Error("subgraph: no bias for edge " + std::to_string(id));
  return it->second;
}

std::vector<SubGraph> label_components(const std::vector<EdgeId>& survivors,
                                       const std::unordered_map<EdgeId, std::vector<EdgeId>>& adjacency) {
  std::unordered_map<EdgeId, bool> seen;
  seen.reserve(survivors.size());
  std::vector<SubGraph> out;
  for (EdgeId start : survivors) {
    if (seen[start]) continue;
    SubGraph g;
    std::deque<EdgeId> frontier{start};
    seen[start] = true;
    while (!frontier.empty()) {
      const EdgeId e = frontier.front();
      frontier.pop_front();
      g.edge_ids.push_back(e);
      auto it = adjacency.find(e);
      if (it == adjacency.end()) continue;
      for (EdgeId n : it->second) {
        if (!seen[n]) {
          seen[n] = true;
          frontier.push_back(n);
        }
      }
    }
    std::sort(g.edge_ids.begin(), g.edge_ids.end());
    out.push_back(std::move(g));
  }
  std::sort(out.begin(), out.end(), [](const SubGraph& x, const SubGraph& y) {
    return x.m() != y.m() ? x.m() > y.m() : x.edge_ids.front() < y.edge_ids.front();
  });
  for (std::size_t i = 0; i < out.size(); ++i) out[i].index = static_cast<int>(i);
  return out;
}

}  // namespace

std::vector<EdgeId> prune_by_degree(std::span<const Edge> edges, const EdgeBias& bias, int max_degree) {
  if (max_degree < 1) throw Error("subgraph: max_degree must be >= 1");
  std::map<HitId, std::vector<const Edge*>> incident;
  for (const Edge& e : edges) {
    incident[e.a].push_back(&e);
    incident[e.b].push_back(&e);
  }

  std::unordered_map<EdgeId, int> votes;
  votes.reserve(edges.size());
  for (auto& [hit, list] : incident) {
    std::sort(list.begin(), list.end(), [&](const Edge* x, const Edge* y) {
      const double bx = bias_of(bias, x->id);
      const double by = bias_of(bias, y->id);
      return bx != by ? bx > by : x->id < y->id;
    });
    const std::size_t keep = std::min(list.size(), static_cast<std::size_t>(max_degree));
    for (std::size_t i = 0; i < keep; ++i) ++votes[list[i]->id];
  }

  std::vector<EdgeId> survivors;
  for (const Edge& e : edges) {
    (void)bias_of(bias, e.id);
    if (votes[e.id] == 2) survivors.push_back(e.id);
  }
  std::sort(survivors.begin(), survivors.end());
  return survivors;
}

std::vector<SubGraph> subgraph(std::span<const Edge> edges, const EdgeBias& bias, int max_degree) {
  const std::vector<EdgeId> survivors = prune_by_degree(edges, bias, max_degree);
  std::unordered_map<EdgeId, const Edge*> by_id;
  for (const Edge& e : edges) by_id.emplace(e.id, &e);

  std::map<HitId, std::vector<EdgeId>> at_hit;
  for (EdgeId id : survivors) {
    const Edge* e = by_id.at(id);
    at_hit[e->a].push_back(id);
    at_hit[e->b].push_back(id);
  }
  std::unordered_map<EdgeId, std::vector<EdgeId>> adjacency;
  for (const auto& [hit, list] : at_hit) {
    for (EdgeId x : list) {
      for (EdgeId y : list) {
        if (x != y) adjacency[x].push_back(y);
      }
    }
  }
  return label_components(survivors, adjacency);
}

std::vector<SubGraph> subgraph(std::span<const Edge> edges, const EdgeBias& bias, int max_degree,
                               std::span<const std::pair<EdgeId, EdgeId>> links) {
  const std::vector<EdgeId> survivors = prune_by_degree(edges, bias, max_degree);
  std::unordered_map<EdgeId, bool> alive;
  for (EdgeId id : survivors) alive[id] = true;
  std::unordered_map<EdgeId, std::vector<EdgeId>> adjacency;
  for (const auto& [x, y] : links) {
    auto ix = alive.find(x);
    auto iy = alive.find(y);
    if (ix == alive.end() || iy == alive.end() || x == y) continue;
    adjacency[x].push_back(y);
    adjacency[y].push_back(x);
  }
  return label_components(survivors, adjacency);
}

}  // namespace qtrack
