// SPDX-License-Identifier: Apache-2.0
//
// Latency-aware architecture search over a block-choice space: a soft-exp
// reward folds estimated latency into a quality score, candidates come from
// uniform sampling or aging evolution, and every evaluation lands in an
// append-only trial log plus a quality/latency pareto archive. Fixed seed
// plus serial evaluation reproduces a run byte for byte; "timestamps" are
// therefore logical completion indices, never wall-clock.
#pragma once

#include <cstdint>
#include <deque>
#include <functional>
#include <string>
#include <vector>

#include "nasforge/cost.hpp"
#include "nasforge/space.hpp"

namespace nasforge::search {

// ---------------------------------------------------------------- reward --

// Size-derived stand-in for accuracy: log-saturating in both weight count
// and compute, so added capacity is worth less on an already-large model.
double quality_proxy(std::uint64_t params, std::uint64_t macs);

struct Objective {
  double latency_target_us = 0.0;
  double exponent = -0.07;  // w in quality * (latency/target)^w
};

// Soft latency penalty; w < 0 makes slower-than-target models pay.
double reward(double quality, double latency_us, const Objective& obj);

using QualityFn =
    std::function<double(const ir::ModelIr&, const cost::ModelMetrics&)>;
QualityFn default_quality();

// ---------------------------------------------------------------- pareto --

struct ParetoPoint {
  double quality = 0.0;
  double latency_us = 0.0;
  space::Candidate candidate;
};

enum class InsertOutcome : std::uint8_t { kKept, kDominated };

// Nondominated set under (quality max, latency min). Weak dominance: at
// least as good on both axes and strictly better on one. Exact ties on
// both axes keep the incumbent.
class ParetoArchive {
 public:
  InsertOutcome insert(const ParetoPoint& p);
  const std::vector<ParetoPoint>& points() const { return points_; }

 private:
  std::vector<ParetoPoint> points_;
};

// ---------------------------------------------------------------- trials --

struct TrialRecord {
  std::uint64_t trial_id = 0;   // 1-based issue order
  std::uint64_t timestamp = 0;  // logical completion index, reproducible
  int worker_id = 0;
  space::Candidate candidate;
  bool ok = false;
  std::string error;           // failed trials only
  cost::ModelTotals metrics;   // successful trials only
  double quality = 0.0;
  double reward = 0.0;         // -inf for failed trials
};

// Metrics provider. The in-process implementation closes over an
// accelerator config; the remote one proxies a prediction service.
class Evaluator {
 public:
  virtual ~Evaluator() = default;
  virtual cost::ModelMetrics evaluate(const ir::ModelIr& model) = 0;
};

class CostModelEvaluator : public Evaluator {
 public:
  explicit CostModelEvaluator(cost::AcceleratorConfig cfg)
      : cfg_(std::move(cfg)) {}
  cost::ModelMetrics evaluate(const ir::ModelIr& model) override {
    return cost::model_metrics(model, cfg_);
  }

 private:
  cost::AcceleratorConfig cfg_;
};

struct SearchResult {
  std::vector<TrialRecord> log;  // trial-id order
  ParetoArchive archive;
  std::uint64_t best_trial = 0;  // 0 when every trial failed
};

// Uniform sampling with memoized duplicate lookups. workers > 1 evaluates
// distinct models concurrently; the candidate sequence, log content and
// archive stay seed-deterministic either way (worker_id records the
// scheduling that happened).
SearchResult run_random_search(const space::SearchSpace& s,
                               std::uint64_t budget, const Objective& obj,
                               Evaluator& eval, std::uint64_t seed,
                               const QualityFn& quality = default_quality(),
                               int workers = 1);

// Aging evolution: seed `population` random candidates, then repeatedly
// sample `sample_size` members, mutate the best by reward, evaluate the
// child, enqueue it and retire the oldest member. Serial and
// seed-deterministic. budget counts all evaluations including the seed
// population.
SearchResult run_evolution(const space::SearchSpace& s, std::uint64_t budget,
                           int population, int sample_size,
                           const Objective& obj, Evaluator& eval,
                           std::uint64_t seed,
                           const QualityFn& quality = default_quality());

// ------------------------------------------------------------------- log --

// One JSON record per line, trial-id order.
std::string log_to_lines(const std::vector<TrialRecord>& log);
void persist_log(const std::vector<TrialRecord>& log, const std::string& path);

struct LoadedLog {
  std::vector<TrialRecord> records;
  std::vector<std::string> warnings;  // skipped lines with reasons
};

// Tolerates trailing garbage: a corrupt or truncated line becomes a
// warning, parsing continues on the next line.
LoadedLog load_log_text(const std::string& text);
LoadedLog load_log(const std::string& path);

// Archive reconstruction from successful trials, trial-id order.
ParetoArchive archive_from_log(const std::vector<TrialRecord>& log);

}  // namespace nasforge::search
