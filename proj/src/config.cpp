// SPDX-License-Identifier: Apache-2.0
// Copyright Contributors to the qtrack project.

#include <fstream>
#include <iomanip>
#include <set>
#include <sstream>

#include <openssl/evp.h>

#include "json.hpp"
#include "qtrack/error.hpp"
#include "qtrack/pipeline.hpp"

namespace qtrack {

namespace {

using nlohmann::json;

// Rejects keys the reader does not know, so a typo cannot silently fall back
// to a default.
void check_keys(const json& object, const std::string& where, std::initializer_list<const char*> known) {
  if (!object.is_object()) throw Error("config: '" + where + "' must be an object");
  const std::set<std::string> allowed(known.begin(), known.end());
  for (const auto& [key, value] : object.items()) {
    if (allowed.count(key) == 0) throw Error("config: unknown key '" + where + "." + key + "'");
  }
}

template <typename T>
void read(const json& object, const char* key, T& target) {
  if (!object.contains(key)) return;
  try {
    target = object.at(key).get<T>();
  } catch (const json::exception& e) {
    throw Error(std::string("config: bad value for '") + key + "': " + e.what());
  }
}

json qubo_json(const QuboParams& p) {
  return {{"lambda", p.lambda}, {"rho", p.rho},       {"eta_bias", p.eta_bias}, {"zeta", p.zeta},
          {"alpha", p.alpha},   {"beta", p.beta},     {"gamma", p.gamma},       {"tau", p.tau},
          {"scale_r", p.scale_r}, {"scale_phi", p.scale_phi}, {"scale_z", p.scale_z}};
}

QuboParams qubo_from(const json& j) {
  check_keys(j, "qubo",
             {"lambda", "rho", "eta_bias", "zeta", "alpha", "beta", "gamma", "tau", "scale_r", "scale_phi", "scale_z"});
  QuboParams p;
  read(j, "lambda", p.lambda);
  read(j, "rho", p.rho);
  read(j, "eta_bias", p.eta_bias);
  read(j, "zeta", p.zeta);
  read(j, "alpha", p.alpha);
  read(j, "beta", p.beta);
  read(j, "gamma", p.gamma);
  read(j, "tau", p.tau);
  read(j, "scale_r", p.scale_r);
  read(j, "scale_phi", p.scale_phi);
  read(j, "scale_z", p.scale_z);
  return p;
}

json generator_json(const GeneratorConfig& g) {
  return {{"n_particles", g.n_particles},
          {"noise_fraction", g.noise_fraction},
          {"beamspot_sigma_z", g.beamspot_sigma_z},
          {"pt_min", g.pt_min},
          {"pt_max", g.pt_max},
          {"eta_max", g.eta_max},
          {"layer_radii", g.layer_radii},
          {"half_length", g.half_length},
          {"field_strength", g.field_strength},
          {"smearing_sigma", g.smearing_sigma},
          {"duplicate_fraction", g.duplicate_fraction}};
}

GeneratorConfig generator_from(const json& j) {
  check_keys(j, "generator",
             {"n_particles", "noise_fraction", "beamspot_sigma_z", "pt_min", "pt_max", "eta_max", "layer_radii",
              "half_length", "field_strength", "smearing_sigma", "duplicate_fraction"});
  GeneratorConfig g;
  read(j, "n_particles", g.n_particles);
  read(j, "noise_fraction", g.noise_fraction);
  read(j, "beamspot_sigma_z", g.beamspot_sigma_z);
  read(j, "pt_min", g.pt_min);
  read(j, "pt_max", g.pt_max);
  read(j, "eta_max", g.eta_max);
  read(j, "layer_radii", g.layer_radii);
  read(j, "half_length", g.half_length);
  read(j, "field_strength", g.field_strength);
  read(j, "smearing_sigma", g.smearing_sigma);
  read(j, "duplicate_fraction", g.duplicate_fraction);
  return g;
}

json to_json_object(const PipelineConfig& c) {
  json kde_bandwidth = nullptr;
  if (c.kde.bandwidth) kde_bandwidth = json::array({(*c.kde.bandwidth)[0], (*c.kde.bandwidth)[1]});
  json epsilon = nullptr;
  if (c.protocol.epsilon) epsilon = *c.protocol.epsilon;
  return {
      {"format_version", PipelineConfig::kFormatVersion},
      {"seed", c.seed},
      {"workers", c.workers},
      {"qubo", qubo_json(c.qubo)},
      {"mode", to_string(c.mode)},
      {"schedule", {{"beta_init", c.schedule.beta_init}, {"beta_fin", c.schedule.beta_fin}, {"sweeps", c.schedule.sweeps}}},
      {"runs", c.runs},
      {"convergence",
       {{"long_sweeps", c.protocol.long_sweeps},
        {"long_runs", c.protocol.long_runs},
        {"samples", c.protocol.samples},
        {"epsilon", epsilon},
        {"relax_above_vars", c.protocol.relax_above_vars},
        {"relaxed_epsilon", c.protocol.relaxed_epsilon}}},
      {"sector_count", c.sector_count},
      {"target_recall", c.target_recall},
      {"max_degree", c.max_degree},
      {"scoring", {{"min_hits", c.scoring.min_hits}, {"match", to_string(c.scoring.rule)}}},
      {"generator", generator_json(c.generator)},
      {"train_events", c.train_events},
      {"calibration_events", c.calibration_events},
      {"kde", {{"bandwidth", kde_bandwidth}, {"max_samples", c.kde.max_samples}}},
      {"full_event", c.full_event},
      {"paths",
       {{"hits", c.input_hits}, {"truth", c.input_truth}, {"calibration", c.calibration_path}, {"output", c.output_dir}}},
  };
}

}  // namespace

void PipelineConfig::validate() const {
  qubo.validate();
  schedule.validate();
  protocol.validate();
  generator.validate();
  if (runs < 1) throw Error("config: runs must be >= 1");
  if (sector_count != kSectorCount) {
    throw Error("config: sector_count must be " + std::to_string(kSectorCount) + " (sector geometry is fixed)");
  }
  if (!(target_recall > 0.0 && target_recall <= 1.0)) throw Error("config: target_recall must lie in (0, 1]");
  if (max_degree < 1) throw Error("config: max_degree must be >= 1");
  if (scoring.min_hits < 1) throw Error("config: scoring.min_hits must be >= 1");
  if (workers < 1) throw Error("config: workers must be >= 1");
  if (train_events < 1 || calibration_events < 1) throw Error("config: train and calibration event counts must be >= 1");
}

std::string config_to_json(const PipelineConfig& config) { return to_json_object(config).dump(2) + "\n"; }

PipelineConfig config_from_json(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::parse_error& e) {
    throw Error(std::string("config: invalid JSON: ") + e.what());
  }
  check_keys(j, "config",
             {"format_version", "seed", "workers", "qubo", "mode", "schedule", "runs", "convergence", "sector_count",
              "target_recall", "max_degree", "scoring", "generator", "train_events", "calibration_events", "kde",
              "full_event", "paths"});
  int version = 0;
  read(j, "format_version", version);
  if (version != PipelineConfig::kFormatVersion) {
    throw Error("config: unsupported format_version " + std::to_string(version) + " (expected " +
                std::to_string(PipelineConfig::kFormatVersion) + ")");
  }

  PipelineConfig c;
  read(j, "seed", c.seed);
  read(j, "workers", c.workers);
  if (j.contains("qubo")) c.qubo = qubo_from(j.at("qubo"));
  if (j.contains("mode")) c.mode = parse_qubo_mode(j.at("mode").get<std::string>());
  if (j.contains("schedule")) {
    const json& s = j.at("schedule");
    check_keys(s, "schedule", {"beta_init", "beta_fin", "sweeps"});
    read(s, "beta_init", c.schedule.beta_init);
    read(s, "beta_fin", c.schedule.beta_fin);
    read(s, "sweeps", c.schedule.sweeps);
  }
  read(j, "runs", c.runs);
  if (j.contains("convergence")) {
    const json& p = j.at("convergence");
    check_keys(p, "convergence",
               {"long_sweeps", "long_runs", "samples", "epsilon", "relax_above_vars", "relaxed_epsilon"});
    read(p, "long_sweeps", c.protocol.long_sweeps);
    read(p, "long_runs", c.protocol.long_runs);
    read(p, "samples", c.protocol.samples);
    if (p.contains("epsilon") && !p.at("epsilon").is_null()) c.protocol.epsilon = p.at("epsilon").get<double>();
    read(p, "relax_above_vars", c.protocol.relax_above_vars);
    read(p, "relaxed_epsilon", c.protocol.relaxed_epsilon);
  }
  c.protocol.beta_init = c.schedule.beta_init;
  c.protocol.beta_fin = c.schedule.beta_fin;
  read(j, "sector_count", c.sector_count);
  read(j, "target_recall", c.target_recall);
  read(j, "max_degree", c.max_degree);
  if (j.contains("scoring")) {
    const json& s = j.at("scoring");
    check_keys(s, "scoring", {"min_hits", "match"});
    read(s, "min_hits", c.scoring.min_hits);
    if (s.contains("match")) c.scoring.rule = parse_match_rule(s.at("match").get<std::string>());
  }
  if (j.contains("generator")) c.generator = generator_from(j.at("generator"));
  read(j, "train_events", c.train_events);
  read(j, "calibration_events", c.calibration_events);
  if (j.contains("kde")) {
    const json& k = j.at("kde");
    check_keys(k, "kde", {"bandwidth", "max_samples"});
    if (k.contains("bandwidth") && !k.at("bandwidth").is_null()) {
      c.kde.bandwidth = k.at("bandwidth").get<std::array<double, 2>>();
    }
    read(k, "max_samples", c.kde.max_samples);
  }
  read(j, "full_event", c.full_event);
  if (j.contains("paths")) {
    const json& p = j.at("paths");
    check_keys(p, "paths", {"hits", "truth", "calibration", "output"});
    read(p, "hits", c.input_hits);
    read(p, "truth", c.input_truth);
    read(p, "calibration", c.calibration_path);
    read(p, "output", c.output_dir);
  }
  c.validate();
  return c;
}

PipelineConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error("config: cannot open " + path.string());
  std::stringstream buffer;
  buffer << in.rdbuf();
  try {
    return config_from_json(buffer.str());
  } catch (const Error& e) {
    throw Error(path.string() + ": " + e.what());
  }
}

void save_config(const PipelineConfig& config, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw Error("config: cannot write " + path.string());
  out << config_to_json(config);
}

std::string config_hash(const PipelineConfig& config) {
  const std::string canonical = to_json_object(config).dump();
  unsigned char digest[EVP_MAX_MD_SIZE];
  unsigned int length = 0;
  if (EVP_Digest(canonical.data(), canonical.size(), digest, &length, EVP_sha256(), nullptr) != 1) {
    throw Error("config: SHA-256 failed");
  }
  std::ostringstream hex;
  for (unsigned int i = 0; i < length; ++i) hex << std::hex << std::setw(2) << std::setfill('0') << int{digest[i]};
  return hex.str();
}

}  // namespace qtrack
