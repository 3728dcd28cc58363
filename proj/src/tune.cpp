// SPDX-License-Identifier: Apache-2.0
// Copyright Contributors to the qtrack project.

#include "qtrack/error.hpp"
#include "qtrack/pipeline.hpp"

namespace qtrack {

namespace {

double* field(QuboParams& p, const std::string& name) {
  if (name == "lambda") return &p.lambda;
  if (name == "rho") return &p.rho;
  if (name == "eta_bias") return &p.eta_bias;
  if (name == "zeta") return &p.zeta;
  if (name == "alpha") return &p.alpha;
  if (name == "beta") return &p.beta;
  if (name == "gamma") return &p.gamma;
  if (name == "tau") return &p.tau;
  throw Error("unknown tunable parameter '" + name + "'");
}

}  // namespace

void set_param(QuboParams& params, const std::string& name, double value) { *field(params, name) = value; }

double get_param(const QuboParams& params, const std::string& name) {
  QuboParams copy = params;
  return *field(copy, name);
}

TuneResult tune_params(const SearchSpace& space, TuneObjective objective, int budget, std::uint64_t seed,
                       std::span<const Event> events, const Calibration& calibration, const PipelineConfig& config) {
  if (space.empty()) throw Error("tune_params: empty search space");
  if (budget < 1) throw Error("tune_params: budget must be >= 1");
  if (events.empty()) throw Error("tune_params: no calibration events");
  for (const auto& [name, range] : space) {
    QuboParams probe;
    (void)field(probe, name);
    if (!(range.lo <= range.hi)) throw Error("tune_params: range for '" + name + "' has lo > hi");
  }
  (void)objective;  // f1 is the only objective

  Rng rng(seed, 0);
  TuneResult result;
  for (int t = 0; t < budget; ++t) {
    PipelineConfig trial = config;
    for (const auto& [name, range] : space) {
      set_param(trial.qubo, name, range.lo + (range.hi - range.lo) * rng.uniform());
    }
    trial.qubo.validate();

    double sum = 0.0;
    for (const Event& event : events) sum += run_pipeline(event, calibration, trial).metrics.f1.value_or(0.0);
    const double mean = sum / static_cast<double>(events.size());
    result.trials.push_back({trial.qubo, mean});
    if (t == 0 || mean > result.best_objective) {
      result.best = trial.qubo;
      result.best_objective = mean;
    }
  }
  return result;
}

}  // namespace qtrack
