// SPDX-License-Identifier: Apache-2.0
#include "nasforge/engine.hpp"

#include <algorithm>
#include <cmath>
#include <condition_variable>
#include <limits>
#include <mutex>
#include <sstream>
#include <thread>
#include <unordered_map>

#include "nasforge/errors.hpp"
#include "nasforge/json_strict.hpp"
#include "nasforge/rng.hpp"
#include "nasforge/serde.hpp"

namespace nasforge::search {

double quality_proxy(std::uint64_t params, std::uint64_t macs) {
  return 10.0 * std::log1p(static_cast<double>(params) / 1e6) +
         5.0 * std::log1p(static_cast<double>(macs) / 1e9);
}

double reward(double quality, double latency_us, const Objective& obj) {
  if (obj.latency_target_us <= 0)
    throw std::invalid_argument("latency target must be positive");
  if (latency_us <= 0)
    throw std::invalid_argument("latency must be positive");
  return quality * std::pow(latency_us / obj.latency_target_us, obj.exponent);
}

QualityFn default_quality() {
  return [](const ir::ModelIr&, const cost::ModelMetrics& m) {
    return quality_proxy(m.totals.params, m.totals.macs);
  };
}

// ---------------------------------------------------------------- pareto --

InsertOutcome ParetoArchive::insert(const ParetoPoint& p) {
  for (const ParetoPoint& q : points_) {
    const bool weakly_better =
        q.quality >= p.quality && q.latency_us <= p.latency_us;
    const bool strictly_somewhere =
        q.quality > p.quality || q.latency_us < p.latency_us;
    if (weakly_better && strictly_somewhere) return InsertOutcome::kDominated;
    if (q.quality == p.quality && q.latency_us == p.latency_us)
      return InsertOutcome::kDominated;  // exact tie, first point wins
  }
  std::erase_if(points_, [&](const ParetoPoint& q) {
    const bool weakly_worse =
        p.quality >= q.quality && p.latency_us <= q.latency_us;
    const bool strictly_somewhere =
        p.quality > q.quality || p.latency_us < q.latency_us;
    return weakly_worse && strictly_somewhere;
  });
  points_.push_back(p);
  return InsertOutcome::kKept;
}

// ---------------------------------------------------------------- trials --

namespace {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();

struct EvalOutcome {
  bool ok = false;
  std::string error;
  cost::ModelTotals totals;
  double quality = 0.0;
  double rew = kNegInf;
};

EvalOutcome evaluate_model(const ir::ModelIr& model, const Objective& obj,
                           Evaluator& eval, const QualityFn& quality) {
  EvalOutcome out;
  try {
    cost::ModelMetrics metrics = eval.evaluate(model);
    // Snap reals to the serialization precision before scoring, so an
    // estimate that traveled the wire and one computed in-process yield
    // bit-identical rewards.
    metrics.totals.latency_us = serde::round6(metrics.totals.latency_us);
    metrics.totals.utilization = serde::round6(metrics.totals.utilization);
    metrics.totals.energy_mj = serde::round6(metrics.totals.energy_mj);
    out.totals = metrics.totals;
    out.quality = quality(model, metrics);
    out.rew = reward(out.quality, metrics.totals.latency_us, obj);
    out.ok = true;
  } catch (const NetworkError&) {
    throw;  // dead transport is not a property of the candidate
  } catch (const std::exception& ex) {
    out.error = ex.what();
  }
  return out;
}

TrialRecord make_record(std::uint64_t trial_id, int worker_id,
                        const space::Candidate& c, const EvalOutcome& eo) {
  TrialRecord r;
  r.trial_id = trial_id;
  r.timestamp = trial_id;  // logical time, see header
  r.worker_id = worker_id;
  r.candidate = c;
  r.ok = eo.ok;
  r.error = eo.error;
  r.metrics = eo.totals;
  r.quality = eo.quality;
  r.reward = eo.rew;
  return r;
}

void update_best(const TrialRecord& r, std::uint64_t& best_trial,
                 double& best_reward) {
  if (r.ok && (best_trial == 0 || r.reward > best_reward)) {
    best_trial = r.trial_id;
    best_reward = r.reward;
  }
}

ParetoArchive build_archive(const std::vector<TrialRecord>& log) {
  ParetoArchive archive;
  for (const TrialRecord& r : log) {
    if (!r.ok) continue;
    archive.insert({r.quality, r.metrics.latency_us, r.candidate});
  }
  return archive;
}

}  // namespace

SearchResult run_random_search(const space::SearchSpace& s,
                               std::uint64_t budget, const Objective& obj,
                               Evaluator& eval, std::uint64_t seed,
                               const QualityFn& quality, int workers) {
  if (budget == 0) throw std::invalid_argument("budget must be positive");
  if (workers < 1) throw std::invalid_argument("workers must be positive");

  // Candidate sequence is drawn serially up front so the trial set depends
  // only on the seed, not on evaluation scheduling.
  SplitMix64 rng(seed);
  std::vector<space::Candidate> candidates;
  std::vector<std::string> keys;
  candidates.reserve(budget);
  for (std::uint64_t i = 0; i < budget; ++i) {
    candidates.push_back(space::sample_random(s, rng.next()));
    keys.push_back(space::candidate_key(candidates.back()));
  }

  // Distinct models only; duplicates are memo lookups.
  std::unordered_map<std::string, EvalOutcome> memo;
  std::vector<std::string> order;
  for (const std::string& k : keys)
    if (memo.emplace(k, EvalOutcome{}).second) order.push_back(k);
  std::unordered_map<std::string, const space::Candidate*> unique_model;
  for (std::uint64_t i = 0; i < budget; ++i)
    unique_model.emplace(keys[i], &candidates[i]);

  std::vector<int> ran_on(order.size(), 0);
  if (workers == 1 || order.size() <= 1) {
    for (std::size_t i = 0; i < order.size(); ++i)
      memo[order[i]] =
          evaluate_model(space::materialize(*unique_model[order[i]], s), obj,
                         eval, quality);
  } else {
    std::mutex mu;
    std::size_t next = 0;
    std::exception_ptr first_error;
    const int n = std::min<std::size_t>(workers, order.size());
    std::vector<std::thread> pool;
    pool.reserve(n);
    for (int w = 0; w < n; ++w) {
      pool.emplace_back([&, w] {
        for (;;) {
          std::size_t i;
          {
            std::lock_guard<std::mutex> lock(mu);
            if (first_error || next >= order.size()) return;
            i = next++;
          }
          try {
            const EvalOutcome eo =
                evaluate_model(space::materialize(*unique_model[order[i]], s),
                               obj, eval, quality);
            std::lock_guard<std::mutex> lock(mu);
            memo[order[i]] = eo;
            ran_on[i] = w;
          } catch (...) {
            std::lock_guard<std::mutex> lock(mu);
            if (!first_error) first_error = std::current_exception();
            return;
          }
        }
      });
    }
    for (std::thread& t : pool) t.join();
    if (first_error) std::rethrow_exception(first_error);
  }

  std::unordered_map<std::string, int> worker_of;
  for (std::size_t i = 0; i < order.size(); ++i) worker_of[order[i]] = ran_on[i];

  SearchResult result;
  double best_reward = kNegInf;
  for (std::uint64_t i = 0; i < budget; ++i) {
    TrialRecord r = make_record(i + 1, worker_of[keys[i]], candidates[i],
                                memo[keys[i]]);
    update_best(r, result.best_trial, best_reward);
    result.log.push_back(std::move(r));
  }
  result.archive = build_archive(result.log);
  return result;
}

SearchResult run_evolution(const space::SearchSpace& s, std::uint64_t budget,
                           int population, int sample_size,
                           const Objective& obj, Evaluator& eval,
                           std::uint64_t seed, const QualityFn& quality) {
  if (budget == 0) throw std::invalid_argument("budget must be positive");
  if (population < 1 || sample_size < 1)
    throw std::invalid_argument("population and sample size must be positive");
  if (sample_size > population)
    throw std::invalid_argument("sample size cannot exceed population");

  SplitMix64 rng(seed);
  std::unordered_map<std::string, EvalOutcome> memo;
  auto evaluate_cached = [&](const space::Candidate& c) -> const EvalOutcome& {
    const std::string key = space::candidate_key(c);
    const auto it = memo.find(key);
    if (it != memo.end()) return it->second;
    return memo.emplace(key, evaluate_model(space::materialize(c, s), obj,
                                            eval, quality))
        .first->second;
  };

  struct Member {
    space::Candidate candidate;
    double rew = kNegInf;
  };
  std::deque<Member> pop;

  SearchResult result;
  double best_reward = kNegInf;
  auto record = [&](const space::Candidate& c) -> const EvalOutcome& {
    const EvalOutcome& eo = evaluate_cached(c);
    TrialRecord r = make_record(result.log.size() + 1, 0, c, eo);
    update_best(r, result.best_trial, best_reward);
    result.log.push_back(std::move(r));
    return eo;
  };

  const std::uint64_t seed_count =
      std::min<std::uint64_t>(budget, static_cast<std::uint64_t>(population));
  for (std::uint64_t i = 0; i < seed_count; ++i) {
    const space::Candidate c = space::sample_random(s, rng.next());
    pop.push_back({c, record(c).rew});
  }

  while (result.log.size() < budget) {
    // Tournament: sample_size draws with replacement, best reward wins,
    // earlier draw breaks ties.
    std::size_t winner = rng.bounded(pop.size());
    for (int i = 1; i < sample_size; ++i) {
      const std::size_t pick = rng.bounded(pop.size());
      if (pop[pick].rew > pop[winner].rew) winner = pick;
    }
    const space::Candidate child =
        space::mutate(pop[winner].candidate, s, rng.next());
    pop.push_back({child, record(child).rew});
    if (static_cast<int>(pop.size()) > population) pop.pop_front();
  }

  result.archive = build_archive(result.log);
  return result;
}

// ------------------------------------------------------------------- log --

namespace {

using json = nlohmann::json;

json record_to_json(const TrialRecord& r) {
  json doc;
  doc["trial_id"] = r.trial_id;
  doc["timestamp"] = r.timestamp;
  doc["worker_id"] = r.worker_id;
  doc["candidate"] = serde::candidate_to_json(r.candidate);
  doc["status"] = r.ok ? "ok" : "failed";
  if (r.ok) {
    doc["metrics"] = serde::totals_to_json(r.metrics);
    doc["quality"] = serde::round6(r.quality);
    doc["reward"] = serde::round6(r.reward);
  } else {
    doc["error"] = r.error;
  }
  return doc;
}

TrialRecord record_from_json(const json& doc) {
  jsonx::ObjectReader r(doc, "");
  TrialRecord out;
  out.trial_id = r.require_int("trial_id");
  out.timestamp = r.require_int("timestamp");
  out.worker_id = static_cast<int>(r.require_int("worker_id"));
  out.candidate =
      serde::candidate_from_json(r.require("candidate"), "/candidate");
  const std::string status = r.require_string("status");
  if (status == "ok") {
    out.ok = true;
    out.metrics = serde::totals_from_json(r.require("metrics"), "/metrics");
    out.quality = r.require_real("quality");
    out.reward = r.require_real("reward");
  } else if (status == "failed") {
    out.ok = false;
    out.error = r.require_string("error");
    out.reward = kNegInf;
  } else {
    jsonx::fail("/status", "unknown status " + status);
  }
  r.finish();
  return out;
}

}  // namespace

std::string log_to_lines(const std::vector<TrialRecord>& log) {
  std::string out;
  for (const TrialRecord& r : log) {
    out += record_to_json(r).dump();
    out += '\n';
  }
  return out;
}

void persist_log(const std::vector<TrialRecord>& log,
                 const std::string& path) {
  serde::write_file(path, log_to_lines(log));
}

LoadedLog load_log_text(const std::string& text) {
  LoadedLog out;
  std::istringstream in(text);
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    try {
      out.records.push_back(record_from_json(jsonx::parse_strict(line)));
    } catch (const std::exception& ex) {
      out.warnings.push_back("line " + std::to_string(lineno) +
                             " skipped: " + ex.what());
    }
  }
  return out;
}

LoadedLog load_log(const std::string& path) {
  return load_log_text(serde::read_file(path));
}

ParetoArchive archive_from_log(const std::vector<TrialRecord>& log) {
  return build_archive(log);
}

}  // namespace nasforge::search
