// SPDX-License-Identifier: Apache-2.0
// Copyright Contributors to the qtrack project.

#include <algorithm>

#include "qtrack/error.hpp"
#include "qtrack/pipeline.hpp"

namespace qtrack {

namespace {

struct StageUnit {
  std::size_t sector = 0;
  std::vector<Edge> edges;
  int id = 0;
};

std::optional<double> edge_recall(const Event& event, std::span<const Edge> selected) {
  const std::size_t total = event.true_edges().size();
  if (total == 0) return std::nullopt;
  const auto hits = std::count_if(selected.begin(), selected.end(),
                                  [&](const Edge& e) { return event.is_true_edge(e.a, e.b); });
  return static_cast<double>(hits) / static_cast<double>(total);
}

// Anneals every unit and returns the selected edges grouped by sector position.
std::vector<std::vector<Edge>> anneal_units(const std::vector<StageUnit>& units, std::size_t n_sectors,
                                            const Event& event, const PipelineConfig& config, QuboMode mode,
                                            int stage, const std::vector<int>& sector_index) {
  std::vector<std::vector<Edge>> chosen(units.size());
  parallel_for(units.size(), config.workers, [&](std::size_t u) {
    const StageUnit& unit = units[u];
    try {
      const Qubo q = build_qubo(unit.edges, event, config.qubo, mode);
      const auto seed = mix_seed(mix_seed(config.seed, 200 + static_cast<std::uint64_t>(stage),
                                          static_cast<std::uint64_t>(sector_index[unit.sector])),
                                 static_cast<std::uint64_t>(unit.id));
      const Assignment a = simulated_anneal(q, config.schedule, config.runs, seed);
      for (std::size_t i = 0; i < unit.edges.size(); ++i) {
        if (a.bits[i] != 0) chosen[u].push_back(unit.edges[i]);
      }
    } catch (const Error& e) {
      throw Error("staged stage " + std::to_string(stage) + ", sector " +
                  std::to_string(sector_index[unit.sector]) + ", sub-graph " + std::to_string(unit.id) + ": " +
                  e.what());
    }
  });
  std::vector<std::vector<Edge>> per_sector(n_sectors);
  for (std::size_t u = 0; u < units.size(); ++u) {
    auto& bucket = per_sector[units[u].sector];
    bucket.insert(bucket.end(), chosen[u].begin(), chosen[u].end());
  }
  for (auto& bucket : per_sector) {
    std::sort(bucket.begin(), bucket.end(), [](const Edge& x, const Edge& y) { return x.id < y.id; });
  }
  return per_sector;
}

StageReport summarize(const std::string& name, std::size_t n_input, std::size_t n_subgraphs,
                      const std::vector<std::vector<Edge>>& per_sector, const std::vector<int>& sector_index,
                      const Event& event, const PipelineConfig& config, std::vector<TrackCandidate>* tracks_out) {
  std::map<int, std::vector<Edge>> selections;
  for (std::size_t s = 0; s < per_sector.size(); ++s) selections[sector_index[s]] = per_sector[s];
  const std::vector<Edge> merged = merge_sectors(selections);
  std::vector<TrackCandidate> tracks = assemble_tracks(merged, event, config.qubo);
  StageReport r;
  r.name = name;
  r.n_input_edges = n_input;
  r.n_subgraphs = n_subgraphs;
  r.n_selected = merged.size();
  r.edge_recall = edge_recall(event, merged);
  r.metrics = score(tracks, event, config.scoring);
  if (tracks_out != nullptr) *tracks_out = std::move(tracks);
  return r;
}

}  // namespace

StagedReport run_staged_sparse(const Event& event, const Calibration& calibration, const PipelineConfig& config) {
  config.validate();
  StagedReport report;
  report.config_hash = config_hash(config);
  const Preprocessed pre = preprocess(event, calibration, config);
  const Event& ev = pre.event;
  std::vector<Edge> unique;
  report.candidates = candidate_stats(pre, unique);

  const std::size_t n_sectors = pre.sectors.size();
  std::vector<int> sector_index(n_sectors);
  for (std::size_t s = 0; s < n_sectors; ++s) sector_index[s] = pre.sectors[s].sector;

  // Stage 1: partial QUBOs on sub-graphs joined only by tau-gated rewards.
  std::vector<StageUnit> units;
  std::size_t n_input = 0;
  for (std::size_t s = 0; s < n_sectors; ++s) {
    const SectorGraph& g = pre.sectors[s];
    n_input += g.edges.size();
    const auto links = reward_links(g.edges, ev, config.qubo);
    for (const SubGraph& sg : subgraph(g.edges, g.bias, config.max_degree, links)) {
      units.push_back({s, subgraph_edges(g, sg), sg.index});
    }
  }
  const std::size_t n_stage1 = units.size();
  const auto stage1 = anneal_units(units, n_sectors, ev, config, QuboMode::partial, 1, sector_index);
  report.stages.push_back(summarize("partial", n_input, n_stage1, stage1, sector_index, ev, config, nullptr));

  // Stage 2: full QUBOs on the survivors, re-split into sub-graphs.
  units.clear();
  n_input = 0;
  for (std::size_t s = 0; s < n_sectors; ++s) {
    const std::vector<Edge>& survivors = stage1[s];
    n_input += survivors.size();
    if (survivors.empty()) continue;
    const EdgeBias bias = linear_bias(survivors, ev, config.qubo);
    for (const SubGraph& sg : subgraph(survivors, bias, config.max_degree)) {
      std::vector<Edge> edges;
      for (EdgeId id : sg.edge_ids) {
        const auto it = std::lower_bound(survivors.begin(), survivors.end(), id,
                                         [](const Edge& e, EdgeId v) { return e.id < v; });
        edges.push_back(*it);
      }
      units.push_back({s, std::move(edges), sg.index});
    }
  }
  const std::size_t n_stage2 = units.size();
  const auto stage2 = anneal_units(units, n_sectors, ev, config, QuboMode::full, 2, sector_index);
  report.stages.push_back(summarize("full_subgraph", n_input, n_stage2, stage2, sector_index, ev, config, nullptr));

  // Stage 3: one full QUBO per sector over every survivor, so all remaining
  // bifurcations are coupled.
  units.clear();
  n_input = 0;
  for (std::size_t s = 0; s < n_sectors; ++s) {
    n_input += stage2[s].size();
    if (!stage2[s].empty()) units.push_back({s, stage2[s], 0});
  }
  const std::size_t n_stage3 = units.size();
  const auto stage3 = anneal_units(units, n_sectors, ev, config, QuboMode::full, 3, sector_index);
  report.stages.push_back(
      summarize("full_sector", n_input, n_stage3, stage3, sector_index, ev, config, &report.tracks));
  return report;
}

}  // namespace qtrack
