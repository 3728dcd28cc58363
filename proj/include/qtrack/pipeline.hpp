// SPDX-License-Identifier: Apache-2.0
// Copyright Contributors to the qtrack project.

#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <iosfwd>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "qtrack/anneal.hpp"
#include "qtrack/event.hpp"
#include "qtrack/preprocess.hpp"
#include "qtrack/qubo.hpp"
#include "qtrack/tracking.hpp"

namespace qtrack {

inline constexpr const char* kVersion = "0.1.0";

struct PipelineConfig {
  static constexpr int kFormatVersion = 1;

  QuboParams qubo;
  Schedule schedule;
  int runs = 1000;
  ConvergenceProtocol protocol;
  int sector_count = kSectorCount;
  double target_recall = 0.93;
  int max_degree = 5;
  QuboMode mode = QuboMode::full;
  ScoreOptions scoring;
  std::uint64_t seed = 1;
  int workers = 1;

  GeneratorConfig generator;
  int train_events = 20;
  int calibration_events = 10;
  KdeOptions kde;

  // Anneal every candidate of the event as one QUBO, skipping the sub-graph
  // split. Refused above kFullEventLimit variables.
  bool full_event = false;

  std::string input_hits;
  std::string input_truth;
  std::string calibration_path;
  std::string output_dir;

  static constexpr std::size_t kFullEventLimit = 2000;

  void validate() const;
};

std::string config_to_json(const PipelineConfig& config);
PipelineConfig config_from_json(const std::string& text);
PipelineConfig load_config(const std::filesystem::path& path);
void save_config(const PipelineConfig& config, const std::filesystem::path& path);

/// SHA-256 of the canonical JSON form, lowercase hex.
std::string config_hash(const PipelineConfig& config);

// --- calibration -----------------------------------------------------------

struct Calibration {
  KdeModel model;
  CandidateCut cut;
};

/// Generated event streams, disjoint by purpose.
enum class EventStream : std::uint64_t { train = 1, calibration = 2, evaluation = 3, scaling = 4, tuning = 5 };

Event generate_stream_event(const PipelineConfig& config, EventStream stream, std::uint64_t index,
                            int n_particles = -1);

/// Trains the prior on the train stream and freezes the cut on the
/// calibration stream.
Calibration calibrate(const PipelineConfig& config);

void save_calibration(const Calibration& calibration, std::ostream& out);
Calibration load_calibration(std::istream& in);
void save_calibration(const Calibration& calibration, const std::filesystem::path& path);
Calibration load_calibration(const std::filesystem::path& path);

// --- pre-processing --------------------------------------------------------

/// beta * P - gamma plus the strongest ungated chain reward into and out of
/// the edge. Degree pruning on the bare prior term would drop consecutive
/// edges in favour of skip edges, which carry the same prior.
EdgeBias linear_bias(std::span<const Edge> edges, const Event& event, const QuboParams& params);

/// Chained edge pairs whose tau-gated reward is non-zero.
std::vector<std::pair<EdgeId, EdgeId>> reward_links(std::span<const Edge> edges, const Event& event,
                                                    const QuboParams& params);

struct SectorGraph {
  int sector = 0;
  std::vector<Edge> edges;  // ids are positions
  EdgeBias bias;
  std::vector<SubGraph> subgraphs;
};

struct Preprocessed {
  Event event;  // deduplicated
  std::vector<SectorGraph> sectors;
  std::uint64_t pair_visits = 0;
};

/// dedup, sectorize, select candidates, bias and split into sub-graphs.
Preprocessed preprocess(const Event& raw, const Calibration& calibration, const PipelineConfig& config);

/// Edges of one sub-graph, in ascending id order.
std::vector<Edge> subgraph_edges(const SectorGraph& sector, const SubGraph& g);

/// Runs fn(0..n-1) on `workers` threads; each index runs exactly once.
void parallel_for(std::size_t n, int workers, const std::function<void(std::size_t)>& fn);

// --- reconstruction --------------------------------------------------------

struct CandidateStats {
  std::size_t n_candidates = 0;       // unique over sectors
  std::size_t n_true_candidates = 0;
  std::size_t n_true_edges = 0;       // in the deduplicated event
  std::uint64_t pair_visits = 0;
  std::size_t n_hits = 0;

  std::optional<double> purity() const;
  std::optional<double> recall() const;
};

struct PipelineReport {
  std::string config_hash;
  std::string mode = "reconstruct";
  std::size_t n_hits_raw = 0;
  std::size_t n_hits = 0;
  std::size_t n_particles = 0;
  CandidateStats candidates;
  double threshold = 0.0;
  double calibration_recall = 0.0;
  std::vector<std::size_t> subgraph_sizes;  // descending
  std::size_t n_variables = 0;
  double total_energy = 0.0;
  std::vector<Edge> selected;
  std::vector<TrackCandidate> tracks;
  Metrics metrics;
  double baseline_true_fraction = 0.0;
  Metrics baseline;
  std::map<std::string, std::vector<BinMetrics>> binned;
  std::uint64_t sweep_variable_products = 0;  // machine-independent cost
};

/// Candidate counts over the union of all sectors, written to `unique_out`.
CandidateStats candidate_stats(const Preprocessed& pre, std::vector<Edge>& unique_out);

PipelineReport run_pipeline(const Event& event, const Calibration& calibration, const PipelineConfig& config);

struct StageReport {
  std::string name;
  std::size_t n_input_edges = 0;
  std::size_t n_subgraphs = 0;
  std::size_t n_selected = 0;
  std::optional<double> edge_recall;  // of true edges in the event
  Metrics metrics;
};

struct StagedReport {
  std::string config_hash;
  CandidateStats candidates;
  std::vector<StageReport> stages;  // stage 1, 2, 3
  std::vector<TrackCandidate> tracks;
};

StagedReport run_staged_sparse(const Event& event, const Calibration& calibration, const PipelineConfig& config);

// --- scaling ---------------------------------------------------------------

struct ExpFitPoint {
  std::vector<double> m;  // sub-graph sizes
  double time = 0.0;
};

struct ExpFit {
  double c = 0.0;
  double c_stderr = 0.0;
  std::vector<double> residuals;  // log t - log sum exp(c m)
};

ExpFit fit_exponential(std::span<const ExpFitPoint> points);

/// "c = <value> ± <stderr>"
std::string format_fit(const ExpFit& fit);

struct ScalingEvent {
  std::vector<std::size_t> subgraph_sizes;
  double mean_time = 0.0;  // sweeps x variables, bootstrap mean of the summed sub-QUBO times
  double ci_low = 0.0;
  double ci_high = 0.0;
  std::size_t n_capped = 0;
};

struct ScalingPoint {
  int track_count = 0;
  double sum_m = 0.0;  // mean over events of sum_i m_i
  double mean_time = 0.0;
  double ci_low = 0.0;
  double ci_high = 0.0;
  std::map<std::size_t, std::size_t> size_histogram;
  std::vector<ScalingEvent> events;
};

struct ScalingFit {
  std::vector<ScalingPoint> points;
  ExpFit fit;
};

ScalingFit scaling_benchmark(std::span<const int> track_counts, const PipelineConfig& config,
                             const Calibration& calibration, int events_per_point);

// --- tuning ----------------------------------------------------------------

struct ParamRange {
  double lo = 0.0;
  double hi = 0.0;
};

using SearchSpace = std::map<std::string, ParamRange>;

enum class TuneObjective { f1 };

void set_param(QuboParams& params, const std::string& name, double value);
double get_param(const QuboParams& params, const std::string& name);

struct TuneTrial {
  QuboParams params;
  double objective = 0.0;
};

struct TuneResult {
  QuboParams best;
  double best_objective = 0.0;
  std::vector<TuneTrial> trials;
};

/// Random search maximizing the mean F1 of run_pipeline over `events`.
TuneResult tune_params(const SearchSpace& space, TuneObjective objective, int budget, std::uint64_t seed,
                       std::span<const Event> events, const Calibration& calibration, const PipelineConfig& config);

// --- serialization ---------------------------------------------------------

std::string report_to_json(const PipelineReport& report);
std::string staged_to_json(const StagedReport& report);
std::string scaling_to_json(const ScalingFit& fit);
std::string tune_to_json(const TuneResult& result, const SearchSpace& space);
std::string metrics_to_json(const Metrics& m);

void write_binned_csv(std::ostream& out, const std::map<std::string, std::vector<BinMetrics>>& binned);
void write_tracks_csv(std::ostream& out, std::span<const TrackCandidate> tracks);

/// Human-readable summary of a report.json file's content.
std::string summarize_report(const std::string& json_text);

}  // namespace qtrack
