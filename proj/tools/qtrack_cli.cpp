// SPDX-License-Identifier: Apache-2.0
// Copyright Contributors to the qtrack project.
//
// Command-line front end. Every subcommand reads and writes plain files so a
// run can be resumed from any intermediate artifact.

#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <sstream>
#include <string>

#include "CLI11.hpp"
#include "json.hpp"
#include "qtrack/anneal.hpp"
#include "qtrack/error.hpp"
#include "qtrack/pipeline.hpp"
#include "qtrack/text.hpp"

namespace fs = std::filesystem;
using namespace qtrack;

namespace {

struct Common {
  std::string config_path;
  std::int64_t seed = -1;
  int workers = 0;
};

void add_common(CLI::App* cmd, Common& common) {
  cmd->add_option("-c,--config", common.config_path, "JSON configuration file")->check(CLI::ExistingFile);
  cmd->add_option("--seed", common.seed, "override the configured top-level seed");
  cmd->add_option("--workers", common.workers, "override the worker count");
}

PipelineConfig resolve_config(const Common& common) {
  PipelineConfig config = common.config_path.empty() ? PipelineConfig{} : load_config(common.config_path);
  if (common.seed >= 0) config.seed = static_cast<std::uint64_t>(common.seed);
  if (common.workers > 0) config.workers = common.workers;
  config.validate();
  return config;
}

void ensure_dir(const fs::path& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw Error("cannot create directory " + dir.string() + ": " + ec.message());
}

std::ofstream open_out(const fs::path& path) {
  std::ofstream out(path);
  if (!out) throw Error("cannot write " + path.string());
  return out;
}

void write_text(const fs::path& path, const std::string& text) { open_out(path) << text; }

std::string event_stem(std::size_t index) {
  char buffer[32];
  std::snprintf(buffer, sizeof buffer, "event%09zu", index);
  return buffer;
}

void write_manifest(const fs::path& dir, const std::string& command, const PipelineConfig& config,
                    std::initializer_list<std::string> files) {
  nlohmann::ordered_json j;
  j["tool"] = "qtrack";
  j["version"] = kVersion;
  j["command"] = command;
  j["config_hash"] = config_hash(config);
  j["files"] = std::vector<std::string>(files);
  write_text(dir / "manifest.json", j.dump(2) + "\n");
  save_config(config, dir / "config.json");
}

void write_timing(const fs::path& dir, double seconds) {
  nlohmann::ordered_json j;
  j["wall_seconds"] = seconds;
  write_text(dir / "timing.json", j.dump(2) + "\n");
}

double seconds_since(std::chrono::steady_clock::time_point start) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
}

Calibration obtain_calibration(const std::string& path, const PipelineConfig& config) {
  if (!path.empty()) return load_calibration(fs::path(path));
  if (!config.calibration_path.empty()) return load_calibration(fs::path(config.calibration_path));
  std::cerr << "no calibration file given; training on " << config.train_events << " generated events\n";
  return calibrate(config);
}

struct EventSource {
  std::string hits;
  std::string truth;
  std::uint64_t index = 0;
};

void add_event_source(CLI::App* cmd, EventSource& src) {
  cmd->add_option("--hits", src.hits, "TrackML hits CSV (default: generate)");
  cmd->add_option("--truth", src.truth, "TrackML truth CSV");
  cmd->add_option("--event-index", src.index, "index of the generated evaluation event");
}

Event load_event(const EventSource& src, const PipelineConfig& config) {
  std::string hits = src.hits.empty() ? config.input_hits : src.hits;
  std::string truth = src.truth.empty() ? config.input_truth : src.truth;
  if (hits.empty() != truth.empty()) throw Error("--hits and --truth must be given together");
  if (!hits.empty()) return read_trackml(hits, truth);
  return generate_stream_event(config, EventStream::evaluation, src.index);
}

std::vector<int> parse_int_list(const std::string& text) {
  std::vector<int> out;
  for (std::string_view field : split(text, ',')) out.push_back(static_cast<int>(parse_int(field)));
  return out;
}

SearchSpace parse_space(const std::string& text) {
  // name=lo:hi[,name=lo:hi...]
  SearchSpace space;
  for (std::string_view item : split(text, ',')) {
    const auto eq = item.find('=');
    const auto colon = item.find(':');
    if (eq == std::string_view::npos || colon == std::string_view::npos || colon < eq) {
      throw Error("bad search-space entry '" + std::string(item) + "' (expected name=lo:hi)");
    }
    space[std::string(item.substr(0, eq))] = {parse_double(item.substr(eq + 1, colon - eq - 1)),
                                             parse_double(item.substr(colon + 1))};
  }
  return space;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"qtrack: track reconstruction as QUBO optimization with simulated annealing"};
  app.require_subcommand(1);
  app.set_version_flag("--version", kVersion);

  // generate
  Common gen_common;
  std::string gen_out;
  int gen_events = 1;
  int gen_tracks = 0;
  double gen_noise = -1.0;
  auto* gen = app.add_subcommand("generate", "write synthetic events in TrackML layout");
  add_common(gen, gen_common);
  gen->add_option("-o,--out", gen_out, "output directory")->required();
  gen->add_option("-n,--events", gen_events, "number of events")->check(CLI::PositiveNumber);
  gen->add_option("--tracks", gen_tracks, "particles per event (overrides config)");
  gen->add_option("--noise", gen_noise, "noise fraction (overrides config)");

  // ingest
  std::string ing_hits;
  std::string ing_truth;
  std::string ing_out;
  auto* ing = app.add_subcommand("ingest", "validate and deduplicate a TrackML hits/truth pair");
  ing->add_option("--hits", ing_hits, "hits CSV")->required()->check(CLI::ExistingFile);
  ing->add_option("--truth", ing_truth, "truth CSV")->required()->check(CLI::ExistingFile);
  ing->add_option("-o,--out", ing_out, "output directory")->required();

  // calibrate-kde
  Common cal_common;
  std::string cal_out;
  auto* cal = app.add_subcommand("calibrate-kde", "train the segment prior and freeze the candidate cut");
  add_common(cal, cal_common);
  cal->add_option("-o,--out", cal_out, "calibration file")->required();

  // preprocess
  Common pre_common;
  EventSource pre_src;
  std::string pre_cal;
  std::string pre_out;
  auto* pre = app.add_subcommand("preprocess", "select candidate edges and split sectors into sub-graphs");
  add_common(pre, pre_common);
  add_event_source(pre, pre_src);
  pre->add_option("--calibration", pre_cal, "calibration file")->check(CLI::ExistingFile);
  pre->add_option("-o,--out", pre_out, "output directory")->required();

  // build-qubo
  Common bq_common;
  EventSource bq_src;
  std::string bq_edges;
  std::string bq_subgraphs;
  int bq_sector = -1;
  int bq_index = -1;
  std::string bq_mode;
  std::string bq_out;
  auto* bq = app.add_subcommand("build-qubo", "build the QUBO over an edge list");
  add_common(bq, bq_common);
  add_event_source(bq, bq_src);
  bq->add_option("--edges", bq_edges, "edge CSV (edge_id,hit_a,hit_b,prior)")->required()->check(CLI::ExistingFile);
  bq->add_option("--subgraphs", bq_subgraphs, "subgraphs.csv from preprocess")->check(CLI::ExistingFile);
  bq->add_option("--sector", bq_sector, "sector of the sub-graph to extract");
  bq->add_option("--subgraph", bq_index, "sub-graph index within the sector");
  bq->add_option("--mode", bq_mode, "full, partial or classic_dp (default: config)");
  bq->add_option("-o,--out", bq_out, "output .qubo file")->required();

  // solve
  std::string sv_qubo;
  std::string sv_out;
  int sv_runs = 1000;
  std::int64_t sv_sweeps = 1000;
  std::uint64_t sv_seed = 1;
  bool sv_brute = false;
  std::string sv_convergence;
  auto* sv = app.add_subcommand("solve", "minimize a QUBO file");
  sv->add_option("--qubo", sv_qubo, "input .qubo file")->required()->check(CLI::ExistingFile);
  sv->add_option("--runs", sv_runs, "independent restarts")->check(CLI::PositiveNumber);
  sv->add_option("--sweeps", sv_sweeps, "sweeps per restart")->check(CLI::PositiveNumber);
  sv->add_option("--seed", sv_seed, "random seed");
  sv->add_flag("--brute-force", sv_brute, "exhaustive search (at most 25 variables)");
  sv->add_option("--convergence", sv_convergence, "also measure convergence time, CSV output path");
  sv->add_option("-o,--out", sv_out, "solution CSV (default: stdout)");

  // reconstruct
  Common rc_common;
  EventSource rc_src;
  std::string rc_cal;
  std::string rc_out;
  auto* rc = app.add_subcommand("reconstruct", "full pipeline on one event");
  add_common(rc, rc_common);
  add_event_source(rc, rc_src);
  rc->add_option("--calibration", rc_cal, "calibration file")->check(CLI::ExistingFile);
  rc->add_option("-o,--out", rc_out, "run directory")->required();

  // staged
  Common st_common;
  EventSource st_src;
  std::string st_cal;
  std::string st_out;
  auto* st = app.add_subcommand("staged", "three-stage sparse pipeline on one event");
  add_common(st, st_common);
  add_event_source(st, st_src);
  st->add_option("--calibration", st_cal, "calibration file")->check(CLI::ExistingFile);
  st->add_option("-o,--out", st_out, "run directory")->required();

  // bench-scaling
  Common bs_common;
  std::string bs_cal;
  std::string bs_tracks = "50,100,200,300,500";
  int bs_events = 1;
  std::string bs_out;
  auto* bs = app.add_subcommand("bench-scaling", "convergence time against sub-graph sizes");
  add_common(bs, bs_common);
  bs->add_option("--calibration", bs_cal, "calibration file")->check(CLI::ExistingFile);
  bs->add_option("--tracks", bs_tracks, "comma-separated ascending track counts");
  bs->add_option("--events-per-point", bs_events, "events per track count")->check(CLI::PositiveNumber);
  bs->add_option("-o,--out", bs_out, "run directory")->required();

  // tune
  Common tn_common;
  std::string tn_cal;
  std::string tn_space = "alpha=50:120,beta=10:30,gamma=5:15";
  std::string tn_objective = "f1";
  int tn_budget = 10;
  int tn_events = 2;
  std::string tn_out;
  auto* tn = app.add_subcommand("tune", "random search over QUBO weights");
  add_common(tn, tn_common);
  tn->add_option("--calibration", tn_cal, "calibration file")->check(CLI::ExistingFile);
  tn->add_option("--space", tn_space, "name=lo:hi,... over lambda rho eta_bias zeta alpha beta gamma tau");
  tn->add_option("--objective", tn_objective, "objective to maximize")->check(CLI::IsMember({"f1"}));
  tn->add_option("--budget", tn_budget, "number of trials")->check(CLI::PositiveNumber);
  tn->add_option("--events", tn_events, "generated tuning events")->check(CLI::PositiveNumber);
  tn->add_option("-o,--out", tn_out, "run directory")->required();

  // report
  std::string rp_path;
  auto* rp = app.add_subcommand("report", "summarize a run directory or report file");
  rp->add_option("path", rp_path, "run directory or JSON report")->required()->check(CLI::ExistingPath);

  CLI11_PARSE(app, argc, argv);

  try {
    const auto start = std::chrono::steady_clock::now();

    if (gen->parsed()) {
      PipelineConfig config = resolve_config(gen_common);
      if (gen_tracks > 0) config.generator.n_particles = gen_tracks;
      if (gen_noise >= 0.0) config.generator.noise_fraction = gen_noise;
      config.validate();
      ensure_dir(gen_out);
      for (int k = 0; k < gen_events; ++k) {
        const Event event = generate_stream_event(config, EventStream::evaluation, static_cast<std::uint64_t>(k));
        const std::string stem = event_stem(static_cast<std::size_t>(k));
        write_trackml(event, fs::path(gen_out) / (stem + "-hits.csv"), fs::path(gen_out) / (stem + "-truth.csv"));
        std::cout << stem << ": " << event.hits().size() << " hits, " << event.particles().size() << " particles\n";
      }
      write_manifest(gen_out, "generate", config, {"event*-hits.csv", "event*-truth.csv"});
    } else if (ing->parsed()) {
      const Event raw = read_trackml(ing_hits, ing_truth);
      const Event clean = dedup_hits(raw);
      ensure_dir(ing_out);
      write_trackml(clean, fs::path(ing_out) / "event-hits.csv", fs::path(ing_out) / "event-truth.csv");
      nlohmann::ordered_json j;
      j["n_hits"] = raw.hits().size();
      j["n_hits_dedup"] = clean.hits().size();
      j["n_particles"] = clean.particles().size();
      j["noise_fraction"] = clean.noise_fraction();
      write_text(fs::path(ing_out) / "summary.json", j.dump(2) + "\n");
      std::cout << j.dump(2) << '\n';
    } else if (cal->parsed()) {
      const PipelineConfig config = resolve_config(cal_common);
      const Calibration c = calibrate(config);
      save_calibration(c, fs::path(cal_out));
      std::cout << "threshold " << format_double(c.cut.threshold) << ", calibration recall "
                << format_double(c.cut.calibration_recall) << " over " << c.cut.calibration_edges << " true edges\n";
    } else if (pre->parsed()) {
      const PipelineConfig config = resolve_config(pre_common);
      const Calibration c = obtain_calibration(pre_cal, config);
      const Preprocessed p = preprocess(load_event(pre_src, config), c, config);
      ensure_dir(pre_out);
      write_trackml(p.event, fs::path(pre_out) / "event-hits.csv", fs::path(pre_out) / "event-truth.csv");
      std::ofstream subs = open_out(fs::path(pre_out) / "subgraphs.csv");
      subs << "sector,subgraph,edge_id\n";
      for (const SectorGraph& s : p.sectors) {
        char name[32];
        std::snprintf(name, sizeof name, "sector%02d-edges.csv", s.sector);
        std::ofstream edges = open_out(fs::path(pre_out) / name);
        write_edges_csv(edges, s.edges);
        for (const SubGraph& g : s.subgraphs) {
          for (EdgeId id : g.edge_ids) subs << s.sector << ',' << g.index << ',' << id << '\n';
        }
      }
      std::vector<Edge> unique;
      const CandidateStats stats = candidate_stats(p, unique);
      std::cout << stats.n_candidates << " candidate edges, " << stats.n_true_candidates << " true, recall "
                << format_double(stats.recall().value_or(0.0)) << '\n';
      write_manifest(pre_out, "preprocess", config, {"event-hits.csv", "event-truth.csv", "sector*-edges.csv", "subgraphs.csv"});
    } else if (bq->parsed()) {
      PipelineConfig config = resolve_config(bq_common);
      if (!bq_mode.empty()) config.mode = parse_qubo_mode(bq_mode);
      const Event event = load_event(bq_src, config);
      std::ifstream in(bq_edges);
      std::vector<Edge> edges = read_edges_csv(in);
      if (!bq_subgraphs.empty()) {
        if (bq_sector < 0 || bq_index < 0) throw Error("--subgraphs needs --sector and --subgraph");
        std::ifstream sin(bq_subgraphs);
        std::string line;
        std::getline(sin, line);
        std::vector<Edge> keep;
        while (std::getline(sin, line)) {
          const auto f = split(chomp(line), ',');
          if (f.size() != 3) continue;
          if (parse_int(f[0]) == bq_sector && parse_int(f[1]) == bq_index) {
            keep.push_back(edges.at(static_cast<std::size_t>(parse_int(f[2]))));
          }
        }
        edges = std::move(keep);
      }
      const Qubo q = build_qubo(edges, event, config.qubo, config.mode);
      std::ofstream out = open_out(bq_out);
      write_qubo(out, q);
      std::cout << q.n << " variables, " << q.quadratic.size() << " couplings\n";
    } else if (sv->parsed()) {
      std::ifstream in(sv_qubo);
      const Qubo q = read_qubo(in);
      const Assignment a = sv_brute ? brute_force(q) : simulated_anneal(q, Schedule{0.1, 10.0, sv_sweeps}, sv_runs, sv_seed);
      std::ostringstream text;
      text << "# energy " << format_double(a.energy) << '\n' << "var,edge_id,bit\n";
      for (std::size_t i = 0; i < a.bits.size(); ++i) {
        text << i << ',' << (i < q.var_to_edge.size() ? q.var_to_edge[i] : static_cast<EdgeId>(i)) << ','
             << int{a.bits[i]} << '\n';
      }
      if (sv_out.empty()) {
        std::cout << text.str();
      } else {
        write_text(sv_out, text.str());
        std::cout << "energy " << format_double(a.energy) << '\n';
      }
      if (!sv_convergence.empty()) {
        ConvergenceProtocol protocol;
        const ConvergenceRow row{0, q.n, measure_convergence(q, protocol, sv_seed)};
        std::ofstream out = open_out(sv_convergence);
        write_convergence_csv(out, std::span<const ConvergenceRow>(&row, 1));
      }
    } else if (rc->parsed()) {
      const PipelineConfig config = resolve_config(rc_common);
      const Calibration c = obtain_calibration(rc_cal, config);
      const PipelineReport r = run_pipeline(load_event(rc_src, config), c, config);
      const fs::path dir(rc_out);
      ensure_dir(dir);
      write_text(dir / "report.json", report_to_json(r));
      std::ofstream binned = open_out(dir / "binned.csv");
      write_binned_csv(binned, r.binned);
      std::ofstream tracks = open_out(dir / "tracks.csv");
      write_tracks_csv(tracks, r.tracks);
      std::ofstream selected = open_out(dir / "selected-edges.csv");
      write_edges_csv(selected, r.selected);
      write_manifest(dir, "reconstruct", config,
                     {"report.json", "binned.csv", "tracks.csv", "selected-edges.csv", "config.json", "timing.json"});
      write_timing(dir, seconds_since(start));
      std::cout << summarize_report(report_to_json(r));
    } else if (st->parsed()) {
      const PipelineConfig config = resolve_config(st_common);
      const Calibration c = obtain_calibration(st_cal, config);
      const StagedReport r = run_staged_sparse(load_event(st_src, config), c, config);
      const fs::path dir(st_out);
      ensure_dir(dir);
      write_text(dir / "staged.json", staged_to_json(r));
      std::ofstream tracks = open_out(dir / "tracks.csv");
      write_tracks_csv(tracks, r.tracks);
      write_manifest(dir, "staged", config, {"staged.json", "tracks.csv", "config.json", "timing.json"});
      write_timing(dir, seconds_since(start));
      std::cout << summarize_report(staged_to_json(r));
    } else if (bs->parsed()) {
      const PipelineConfig config = resolve_config(bs_common);
      const Calibration c = obtain_calibration(bs_cal, config);
      const std::vector<int> counts = parse_int_list(bs_tracks);
      const ScalingFit fit = scaling_benchmark(counts, config, c, bs_events);
      const fs::path dir(bs_out);
      ensure_dir(dir);
      write_text(dir / "scaling.json", scaling_to_json(fit));
      write_manifest(dir, "bench-scaling", config, {"scaling.json", "config.json", "timing.json"});
      write_timing(dir, seconds_since(start));
      std::cout << summarize_report(scaling_to_json(fit));
    } else if (tn->parsed()) {
      const PipelineConfig config = resolve_config(tn_common);
      const Calibration c = obtain_calibration(tn_cal, config);
      const SearchSpace space = parse_space(tn_space);
      std::vector<Event> events;
      for (int k = 0; k < tn_events; ++k) {
        events.push_back(generate_stream_event(config, EventStream::tuning, static_cast<std::uint64_t>(k)));
      }
      const TuneResult result = tune_params(space, TuneObjective::f1, tn_budget, config.seed, events, c, config);
      const fs::path dir(tn_out);
      ensure_dir(dir);
      write_text(dir / "tune.json", tune_to_json(result, space));
      PipelineConfig best = config;
      best.qubo = result.best;
      save_config(best, dir / "best-config.json");
      write_manifest(dir, "tune", config, {"tune.json", "best-config.json", "config.json", "timing.json"});
      write_timing(dir, seconds_since(start));
      std::cout << summarize_report(tune_to_json(result, space));
    } else if (rp->parsed()) {
      fs::path path(rp_path);
      if (fs::is_directory(path)) {
        for (const char* name : {"report.json", "staged.json", "scaling.json", "tune.json"}) {
          if (fs::exists(path / name)) {
            path /= name;
            break;
          }
        }
      }
      std::ifstream in(path);
      if (!in || fs::is_directory(path)) throw Error("no report found at " + rp_path);
      std::stringstream buffer;
      buffer << in.rdbuf();
      std::cout << summarize_report(buffer.str());
    }
  } catch (const Error& e) {
    std::cerr << "qtrack: " << e.what() << '\n';
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "qtrack: unexpected failure: " << e.what() << '\n';
    return 2;
  }
  return 0;
}
