// SPDX-License-Identifier: Apache-2.0
// Copyright Contributors to the qtrack project.

#include <algorithm>
#include <atomic>
#include <exception>
#include <fstream>
#include <istream>
#include <numbers>
#include <ostream>
#include <thread>

#include "qtrack/error.hpp"
#include "qtrack/pipeline.hpp"
#include "qtrack/text.hpp"

namespace qtrack {

namespace {

std::vector<double> default_bins(BinVariable v) {
  switch (v) {
    case BinVariable::pt:
      return {0.0, 1.0, 2.0, 3.0, 5.0, 10.0, 20.0, 100.0};
    case BinVariable::length:
      return {3.0, 6.0, 9.0, 12.0, 15.0, 18.0, 30.0};
    case BinVariable::phi: {
      std::vector<double> edges;
      for (int k = 0; k <= 16; ++k) edges.push_back(-std::numbers::pi + k * std::numbers::pi / 8.0);
      edges.back() = std::numbers::pi + 1e-9;
      return edges;
    }
    case BinVariable::eta:
      return {-4.0, -1.0, -0.75, -0.5, -0.25, 0.0, 0.25, 0.5, 0.75, 1.0, 4.0};
  }
  return {};
}

std::string where(const char* stage, int sector, int subgraph = -1) {
  std::string s = std::string(stage) + " stage, sector " + std::to_string(sector);
  if (subgraph >= 0) s += ", sub-graph " + std::to_string(subgraph);
  return s;
}

std::vector<Edge> selected_edges(std::span<const Edge> edges, std::span<const std::uint8_t> bits) {
  std::vector<Edge> out;
  for (std::size_t i = 0; i < edges.size(); ++i) {
    if (bits[i] != 0) out.push_back(edges[i]);
  }
  return out;
}

}  // namespace

// --- calibration -----------------------------------------------------------

Event generate_stream_event(const PipelineConfig& config, EventStream stream, std::uint64_t index, int n_particles) {
  GeneratorConfig g = config.generator;
  g.seed = mix_seed(config.seed, static_cast<std::uint64_t>(stream), index);
  if (n_particles > 0) g.n_particles = n_particles;
  return generate_event(g);
}

Calibration calibrate(const PipelineConfig& config) {
  config.validate();
  std::vector<Event> train;
  for (int k = 0; k < config.train_events; ++k) {
    train.push_back(dedup_hits(generate_stream_event(config, EventStream::train, static_cast<std::uint64_t>(k))));
  }
  std::vector<Event> calib;
  for (int k = 0; k < config.calibration_events; ++k) {
    calib.push_back(
        dedup_hits(generate_stream_event(config, EventStream::calibration, static_cast<std::uint64_t>(k))));
  }
  Calibration c;
  c.model = train_kde(train, config.kde);
  c.cut = calibrate_cut(c.model, calib, config.target_recall);
  return c;
}

void save_calibration(const Calibration& calibration, std::ostream& out) {
  calibration.model.save(out);
  const CandidateCut& cut = calibration.cut;
  out << "cut " << format_double(cut.threshold) << ' ' << format_double(cut.target_recall) << ' '
      << format_double(cut.calibration_recall) << ' ' << cut.calibration_edges << '\n';
}

Calibration load_calibration(std::istream& in) {
  Calibration c;
  c.model = KdeModel::load(in);
  std::string word;
  std::string threshold;
  std::string target;
  std::string recall;
  std::size_t edges = 0;
  if (!(in >> word >> threshold >> target >> recall >> edges) || word != "cut") {
    throw Error("calibration: missing cut line after the kde block");
  }
  c.cut = {parse_double(threshold), parse_double(target), parse_double(recall), edges};
  return c;
}

void save_calibration(const Calibration& calibration, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw Error("calibration: cannot write " + path.string());
  save_calibration(calibration, out);
}

Calibration load_calibration(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error("calibration: cannot open " + path.string());
  try {
    return load_calibration(in);
  } catch (const Error& e) {
    throw Error(path.string() + ": " + e.what());
  }
}

// --- pre-processing --------------------------------------------------------

EdgeBias linear_bias(std::span<const Edge> edges, const Event& event, const QuboParams& params) {
  std::vector<double> best_in(edges.size(), 0.0);
  std::vector<double> best_out(edges.size(), 0.0);
  for (const auto& [i, j] : chained_pairs(edges)) {
    const Hit& a = event.hit(edges[i].a);
    const Hit& b = event.hit(edges[i].b);
    const Hit& c = event.hit(edges[j].b);
    const double affinity = chain_reward(a, b, c, params, false) - chain_penalty(a, c, params);
    best_out[i] = std::max(best_out[i], affinity);
    best_in[j] = std::max(best_in[j], affinity);
  }
  EdgeBias bias;
  bias.reserve(edges.size());
  for (std::size_t k = 0; k < edges.size(); ++k) {
    bias[edges[k].id] = params.beta * edges[k].prior - params.gamma + best_in[k] + best_out[k];
  }
  return bias;
}

std::vector<std::pair<EdgeId, EdgeId>> reward_links(std::span<const Edge> edges, const Event& event,
                                                    const QuboParams& params) {
  std::vector<std::pair<EdgeId, EdgeId>> links;
  for (const auto& [i, j] : chained_pairs(edges)) {
    const double r =
        chain_reward(event.hit(edges[i].a), event.hit(edges[i].b), event.hit(edges[j].b), params, true);
    if (r > 0.0) links.emplace_back(edges[i].id, edges[j].id);
  }
  return links;
}

void parallel_for(std::size_t n, int workers, const std::function<void(std::size_t)>& fn) {
  std::vector<std::exception_ptr> errors(n);
  const auto guarded = [&](std::size_t i) {
    try {
      fn(i);
    } catch (...) {
      errors[i] = std::current_exception();
    }
  };
  const std::size_t threads = std::min<std::size_t>(n, static_cast<std::size_t>(std::max(1, workers)));
  if (threads <= 1) {
    for (std::size_t i = 0; i < n; ++i) guarded(i);
  } else {
    std::atomic<std::size_t> next{0};
    std::vector<std::thread> pool;
    for (std::size_t t = 0; t < threads; ++t) {
      pool.emplace_back([&] {
        for (std::size_t i = next++; i < n; i = next++) guarded(i);
      });
    }
    for (auto& th : pool) th.join();
  }
  for (auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }
}

Preprocessed preprocess(const Event& raw, const Calibration& calibration, const PipelineConfig& config) {
  Preprocessed out;
  try {
    out.event = dedup_hits(raw);
  } catch (const Error& e) {
    throw Error(std::string("dedup stage: ") + e.what());
  }
  std::vector<Sector> sectors;
  try {
    sectors = sectorize(out.event);
  } catch (const Error& e) {
    throw Error(std::string("sectorize stage: ") + e.what());
  }

  out.sectors.resize(sectors.size());
  std::vector<std::uint64_t> visits(sectors.size(), 0);
  parallel_for(sectors.size(), config.workers, [&](std::size_t k) {
    SectorGraph& g = out.sectors[k];
    g.sector = sectors[k].index;
    PairCounter counter;
    try {
      g.edges = select_candidates(out.event, sectors[k], calibration.model, calibration.cut, &counter);
    } catch (const Error& e) {
      throw Error(where("candidate", g.sector) + ": " + e.what());
    }
    visits[k] = counter.pair_visits;
    try {
      g.bias = linear_bias(g.edges, out.event, config.qubo);
      g.subgraphs = subgraph(g.edges, g.bias, config.max_degree);
    } catch (const Error& e) {
      throw Error(where("subgraph", g.sector) + ": " + e.what());
    }
  });
  for (std::uint64_t v : visits) out.pair_visits += v;
  return out;
}

std::vector<Edge> subgraph_edges(const SectorGraph& sector, const SubGraph& g) {
  std::vector<Edge> out;
  out.reserve(g.m());
  for (EdgeId id : g.edge_ids) out.push_back(sector.edges.at(static_cast<std::size_t>(id)));
  return out;
}

std::optional<double> CandidateStats::purity() const {
  if (n_candidates == 0) return std::nullopt;
  return static_cast<double>(n_true_candidates) / static_cast<double>(n_candidates);
}

std::optional<double> CandidateStats::recall() const {
  if (n_true_edges == 0) return std::nullopt;
  return static_cast<double>(n_true_candidates) / static_cast<double>(n_true_edges);
}

// --- reconstruction --------------------------------------------------------

CandidateStats candidate_stats(const Preprocessed& pre, std::vector<Edge>& unique_out) {
  std::map<int, std::vector<Edge>> all;
  for (const SectorGraph& s : pre.sectors) all[s.sector] = s.edges;
  unique_out = merge_sectors(all);
  CandidateStats stats;
  stats.n_candidates = unique_out.size();
  for (const Edge& e : unique_out) {
    if (pre.event.is_true_edge(e.a, e.b)) ++stats.n_true_candidates;
  }
  stats.n_true_edges = pre.event.true_edges().size();
  stats.pair_visits = pre.pair_visits;
  stats.n_hits = pre.event.hits().size();
  return stats;
}

PipelineReport run_pipeline(const Event& event, const Calibration& calibration, const PipelineConfig& config) {
  config.validate();
  PipelineReport report;
  report.config_hash = config_hash(config);
  report.n_hits_raw = event.hits().size();
  report.threshold = calibration.cut.threshold;
  report.calibration_recall = calibration.cut.calibration_recall;

  const Preprocessed pre = preprocess(event, calibration, config);
  const Event& ev = pre.event;
  report.n_hits = ev.hits().size();
  report.n_particles = ev.particles().size();
  std::vector<Edge> all_candidates;
  report.candidates = candidate_stats(pre, all_candidates);

  std::map<int, std::vector<Edge>> selections;
  if (config.full_event) {
    if (all_candidates.size() > PipelineConfig::kFullEventLimit) {
      throw Error("full-event annealing refused: " + std::to_string(all_candidates.size()) +
                  " variables exceeds the limit of " + std::to_string(PipelineConfig::kFullEventLimit));
    }
    const Qubo q = build_qubo(all_candidates, ev, config.qubo, config.mode);
    const Assignment a = simulated_anneal(q, config.schedule, config.runs, mix_seed(config.seed, 100));
    selections[-1] = selected_edges(all_candidates, a.bits);
    report.subgraph_sizes.push_back(q.n);
    report.n_variables = q.n;
    report.total_energy = a.energy;
    report.sweep_variable_products =
        static_cast<std::uint64_t>(config.runs) * static_cast<std::uint64_t>(config.schedule.sweeps) * q.n;
  } else {
    struct Unit {
      std::size_t sector = 0;
      std::size_t subgraph = 0;
    };
    std::vector<Unit> units;
    for (std::size_t s = 0; s < pre.sectors.size(); ++s) {
      for (std::size_t g = 0; g < pre.sectors[s].subgraphs.size(); ++g) units.push_back({s, g});
    }
    std::vector<std::vector<Edge>> chosen(units.size());
    std::vector<double> energies(units.size(), 0.0);
    parallel_for(units.size(), config.workers, [&](std::size_t u) {
      const SectorGraph& sector = pre.sectors[units[u].sector];
      const SubGraph& g = sector.subgraphs[units[u].subgraph];
      try {
        const std::vector<Edge> edges = subgraph_edges(sector, g);
        const Qubo q = build_qubo(edges, ev, config.qubo, config.mode);
        const auto seed = mix_seed(config.seed, 100 + static_cast<std::uint64_t>(sector.sector),
                                   static_cast<std::uint64_t>(g.index));
        const Assignment a = simulated_anneal(q, config.schedule, config.runs, seed);
        chosen[u] = selected_edges(edges, a.bits);
        energies[u] = a.energy;
      } catch (const Error& e) {
        throw Error(where("anneal", sector.sector, g.index) + ": " + e.what());
      }
    });
    for (std::size_t u = 0; u < units.size(); ++u) {
      const SectorGraph& sector = pre.sectors[units[u].sector];
      auto& bucket = selections[sector.sector];
      bucket.insert(bucket.end(), chosen[u].begin(), chosen[u].end());
      report.subgraph_sizes.push_back(sector.subgraphs[units[u].subgraph].m());
      report.total_energy += energies[u];
    }
    std::sort(report.subgraph_sizes.begin(), report.subgraph_sizes.end(), std::greater<>());
    for (std::size_t m : report.subgraph_sizes) {
      report.n_variables += m;
      report.sweep_variable_products +=
          static_cast<std::uint64_t>(config.runs) * static_cast<std::uint64_t>(config.schedule.sweeps) * m;
    }
  }

  try {
    report.selected = merge_sectors(selections);
    report.tracks = assemble_tracks(report.selected, ev, config.qubo);
    report.metrics = score(report.tracks, ev, config.scoring);
    for (BinVariable v : {BinVariable::pt, BinVariable::eta, BinVariable::phi, BinVariable::length}) {
      const std::vector<double> bins = default_bins(v);
      report.binned[to_string(v)] = binned_metrics(report.tracks, ev, v, bins, config.scoring);
    }
  } catch (const Error& e) {
    throw Error(std::string("scoring stage: ") + e.what());
  }

  // Random selection over the same candidate set at its true-edge fraction.
  report.baseline_true_fraction = report.candidates.purity().value_or(0.0);
  const auto bits = random_baseline(all_candidates.size(), report.baseline_true_fraction, mix_seed(config.seed, 7));
  const std::vector<Edge> random_pick = merge_sectors({{0, selected_edges(all_candidates, bits)}});
  report.baseline = score(assemble_tracks(random_pick, ev, config.qubo), ev, config.scoring);
  return report;
}

}  // namespace qtrack
