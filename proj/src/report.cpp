// SPDX-License-Identifier: Apache-2.0
// Copyright Contributors to the qtrack project.

#include <ostream>
#include <sstream>

#include "json.hpp"
#include "qtrack/error.hpp"
#include "qtrack/pipeline.hpp"
#include "qtrack/text.hpp"

namespace qtrack {

namespace {

using ojson = nlohmann::ordered_json;

ojson optional_value(const std::optional<double>& v) { return v ? ojson(*v) : ojson(nullptr); }

ojson metrics_object(const Metrics& m) {
  return {{"purity", optional_value(m.purity)},
          {"efficiency", optional_value(m.efficiency)},
          {"f1", optional_value(m.f1)},
          {"n_reconstructed", m.n_reconstructed},
          {"n_true_reconstructed", m.n_true_reconstructed},
          {"n_matched_particles", m.n_matched_particles},
          {"n_true", m.n_true},
          {"purity_spread", optional_value(m.purity_spread)},
          {"efficiency_spread", optional_value(m.efficiency_spread)}};
}

ojson candidates_object(const CandidateStats& c) {
  return {{"n_hits", c.n_hits},
          {"n_candidates", c.n_candidates},
          {"n_true_candidates", c.n_true_candidates},
          {"n_true_edges", c.n_true_edges},
          {"purity", optional_value(c.purity())},
          {"recall", optional_value(c.recall())},
          {"pair_visits", c.pair_visits}};
}

ojson binned_object(const std::map<std::string, std::vector<BinMetrics>>& binned) {
  ojson out = ojson::object();
  for (const auto& [variable, bins] : binned) {
    ojson series = ojson::array();
    for (const BinMetrics& b : bins) {
      series.push_back({{"lo", b.lo},
                        {"hi", b.hi},
                        {"bin_center", b.center()},
                        {"purity", optional_value(b.metrics.purity)},
                        {"efficiency", optional_value(b.metrics.efficiency)},
                        {"n", b.metrics.n_true},
                        {"n_reconstructed", b.metrics.n_reconstructed},
                        {"sigma_purity", optional_value(b.metrics.purity_spread)},
                        {"sigma_efficiency", optional_value(b.metrics.efficiency_spread)}});
    }
    out[variable] = series;
  }
  return out;
}

ojson params_object(const QuboParams& p) {
  return {{"lambda", p.lambda}, {"rho", p.rho},     {"eta_bias", p.eta_bias}, {"zeta", p.zeta},
          {"alpha", p.alpha},   {"beta", p.beta},   {"gamma", p.gamma},       {"tau", p.tau}};
}

std::string fraction_text(const nlohmann::json& v) {
  if (v.is_null()) return "n/a";
  char buffer[32];
  std::snprintf(buffer, sizeof buffer, "%.4f", v.get<double>());
  return buffer;
}

}  // namespace

std::string metrics_to_json(const Metrics& m) { return metrics_object(m).dump(2) + "\n"; }

std::string report_to_json(const PipelineReport& r) {
  ojson j;
  j["format_version"] = 1;
  j["kind"] = r.mode;
  j["version"] = kVersion;
  j["config_hash"] = r.config_hash;
  j["event"] = {{"n_hits_raw", r.n_hits_raw}, {"n_hits", r.n_hits}, {"n_particles", r.n_particles}};
  j["candidates"] = candidates_object(r.candidates);
  j["calibration"] = {{"threshold", r.threshold}, {"recall", r.calibration_recall}};
  j["subgraphs"] = {{"count", r.subgraph_sizes.size()},
                    {"n_variables", r.n_variables},
                    {"sizes", r.subgraph_sizes},
                    {"total_energy", r.total_energy},
                    {"sweep_variable_products", r.sweep_variable_products}};
  j["n_selected"] = r.selected.size();
  j["n_tracks"] = r.tracks.size();
  j["metrics"] = metrics_object(r.metrics);
  j["baseline"] = {{"true_fraction", r.baseline_true_fraction}, {"metrics", metrics_object(r.baseline)}};
  j["binned"] = binned_object(r.binned);
  return j.dump(2) + "\n";
}

std::string staged_to_json(const StagedReport& r) {
  ojson j;
  j["format_version"] = 1;
  j["kind"] = "staged";
  j["version"] = kVersion;
  j["config_hash"] = r.config_hash;
  j["candidates"] = candidates_object(r.candidates);
  ojson stages = ojson::array();
  for (const StageReport& s : r.stages) {
    stages.push_back({{"name", s.name},
                      {"n_input_edges", s.n_input_edges},
                      {"n_subgraphs", s.n_subgraphs},
                      {"n_selected", s.n_selected},
                      {"edge_recall", optional_value(s.edge_recall)},
                      {"metrics", metrics_object(s.metrics)}});
  }
  j["stages"] = stages;
  j["n_tracks"] = r.tracks.size();
  return j.dump(2) + "\n";
}

std::string scaling_to_json(const ScalingFit& fit) {
  ojson j;
  j["format_version"] = 1;
  j["kind"] = "scaling";
  j["version"] = kVersion;
  ojson points = ojson::array();
  for (const ScalingPoint& p : fit.points) {
    ojson hist = ojson::array();
    for (const auto& [m, count] : p.size_histogram) hist.push_back({{"m", m}, {"count", count}});
    ojson events = ojson::array();
    for (const ScalingEvent& e : p.events) {
      events.push_back({{"subgraph_sizes", e.subgraph_sizes},
                        {"mean_time", e.mean_time},
                        {"ci_low", e.ci_low},
                        {"ci_high", e.ci_high},
                        {"n_capped", e.n_capped}});
    }
    points.push_back({{"track_count", p.track_count},
                      {"sum_m", p.sum_m},
                      {"mean_time", p.mean_time},
                      {"ci_low", p.ci_low},
                      {"ci_high", p.ci_high},
                      {"size_histogram", hist},
                      {"events", events}});
  }
  j["points"] = points;
  j["fit"] = {{"c", fit.fit.c}, {"c_stderr", fit.fit.c_stderr}, {"residuals", fit.fit.residuals},
              {"text", format_fit(fit.fit)}};
  j["time_unit"] = "sweeps x variables";
  return j.dump(2) + "\n";
}

std::string tune_to_json(const TuneResult& result, const SearchSpace& space) {
  ojson j;
  j["format_version"] = 1;
  j["kind"] = "tune";
  j["version"] = kVersion;
  ojson s = ojson::object();
  for (const auto& [name, range] : space) s[name] = {range.lo, range.hi};
  j["space"] = s;
  j["objective"] = "f1";
  ojson trials = ojson::array();
  for (const TuneTrial& t : result.trials) trials.push_back({{"params", params_object(t.params)}, {"f1", t.objective}});
  j["trials"] = trials;
  j["best"] = {{"params", params_object(result.best)}, {"f1", result.best_objective}};
  return j.dump(2) + "\n";
}

void write_binned_csv(std::ostream& out, const std::map<std::string, std::vector<BinMetrics>>& binned) {
  out << "variable,bin_center,purity,efficiency,n,sigma_purity,sigma_efficiency\n";
  const auto opt = [](const std::optional<double>& v) { return v ? format_double(*v) : std::string(); };
  for (const auto& [variable, bins] : binned) {
    for (const BinMetrics& b : bins) {
      out << variable << ',' << format_double(b.center()) << ',' << opt(b.metrics.purity) << ','
          << opt(b.metrics.efficiency) << ',' << b.metrics.n_true << ',' << opt(b.metrics.purity_spread) << ','
          << opt(b.metrics.efficiency_spread) << '\n';
    }
  }
}

void write_tracks_csv(std::ostream& out, std::span<const TrackCandidate> tracks) {
  out << "track_id,hit_id\n";
  for (std::size_t t = 0; t < tracks.size(); ++t) {
    for (HitId h : tracks[t].hit_ids) out << t << ',' << h << '\n';
  }
}

std::string summarize_report(const std::string& json_text) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(json_text);
  } catch (const nlohmann::json::parse_error& e) {
    throw Error(std::string("report: invalid JSON: ") + e.what());
  }
  const std::string kind = j.value("kind", std::string("unknown"));
  std::ostringstream out;
  out << "kind: " << kind << '\n';
  if (j.contains("config_hash")) out << "config: " << j["config_hash"].get<std::string>() << '\n';
  if (kind == "reconstruct") {
    const auto& c = j["candidates"];
    out << "candidates: " << c["n_candidates"] << " (purity " << fraction_text(c["purity"]) << ", recall "
        << fraction_text(c["recall"]) << ")\n";
    out << "sub-graphs: " << j["subgraphs"]["count"] << ", variables " << j["subgraphs"]["n_variables"] << '\n';
    const auto& m = j["metrics"];
    out << "tracks: purity " << fraction_text(m["purity"]) << ", efficiency " << fraction_text(m["efficiency"])
        << ", f1 " << fraction_text(m["f1"]) << '\n';
    const auto& b = j["baseline"]["metrics"];
    out << "random baseline: purity " << fraction_text(b["purity"]) << ", efficiency "
        << fraction_text(b["efficiency"]) << '\n';
  } else if (kind == "staged") {
    for (const auto& s : j["stages"]) {
      out << s["name"].get<std::string>() << ": " << s["n_selected"] << " edges, purity "
          << fraction_text(s["metrics"]["purity"]) << ", efficiency " << fraction_text(s["metrics"]["efficiency"])
          << '\n';
    }
  } else if (kind == "scaling") {
    for (const auto& p : j["points"]) {
      out << "tracks " << p["track_count"] << ": sum m " << p["sum_m"] << ", time " << p["mean_time"] << '\n';
    }
    out << j["fit"]["text"].get<std::string>() << '\n';
  } else if (kind == "tune") {
    out << "trials: " << j["trials"].size() << ", best f1 " << fraction_text(j["best"]["f1"]) << '\n';
  } else {
    throw Error("report: unrecognized report kind '" + kind + "'");
  }
  return out.str();
}

}  // namespace qtrack
