// SPDX-License-Identifier: Apache-2.0

#include "nasforge/cli.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cstdlib>
#include <filesystem>
#include <memory>
#include <sstream>
#include <thread>

#include "CLI11.hpp"

#include "nasforge/analyzer.hpp"
#include "nasforge/cost.hpp"
#include "nasforge/engine.hpp"
#include "nasforge/errors.hpp"
#include "nasforge/json_strict.hpp"
#include "nasforge/ppe_client.hpp"
#include "nasforge/ppe_server.hpp"
#include "nasforge/serde.hpp"
#include "nasforge/wire.hpp"

namespace nasforge::cli {
namespace {

namespace fs = std::filesystem;
using jsonx::json;

std::atomic<bool> g_serve_stop{false};

struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

cost::AcceleratorConfig resolve_config(const std::string& flag_path) {
  std::string path = flag_path;
  if (path.empty()) {
    const char* env = std::getenv("NAS_FORGE_CONFIG");
    if (env != nullptr && *env != '\0') path = env;
  }
  if (path.empty())
    throw UsageError(
        "no accelerator config: pass --config or set NAS_FORGE_CONFIG");
  return cost::load_accelerator_config(path);
}

void ensure_out_dir(const std::string& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw IoError("cannot create " + dir + ": " + ec.message());
}

std::pair<std::string, std::uint16_t> parse_host_port(const std::string& s) {
  const std::size_t colon = s.rfind(':');
  if (colon == std::string::npos || colon == 0 || colon + 1 == s.size())
    throw UsageError("expected HOST:PORT, got '" + s + "'");
  const std::string host = s.substr(0, colon);
  const std::string port_text = s.substr(colon + 1);
  std::size_t used = 0;
  int port = 0;
  try {
    port = std::stoi(port_text, &used);
  } catch (const std::exception&) {
    used = 0;
  }
  if (used != port_text.size() || port < 1 || port > 65535)
    throw UsageError("bad port '" + port_text + "'");
  return {host, static_cast<std::uint16_t>(port)};
}

// ----------------------------------------------------------------- shapes --

analyzer::SweepRequest parse_shapes_file(const std::string& text) {
  const json doc = jsonx::parse_strict(text);
  jsonx::ObjectReader r(doc, "shapes");
  analyzer::SweepRequest req = analyzer::default_sweep_request();
  req.shapes.clear();

  const json& shapes = r.require("shapes");
  if (!shapes.is_array() || shapes.empty())
    jsonx::fail(r.member_path("shapes"), "expected a nonempty array");
  for (const json& s : shapes) {
    if (!s.is_array() || s.size() != 3 || !s[0].is_number_integer() ||
        !s[1].is_number_integer() || !s[2].is_number_integer())
      jsonx::fail(r.member_path("shapes"), "each shape is [h, w, c]");
    req.shapes.push_back(
        {s[0].get<int>(), s[1].get<int>(), s[2].get<int>()});
  }

  if (const json* v = r.optional("variants")) {
    if (!v->is_array() || v->empty())
      jsonx::fail(r.member_path("variants"), "expected a nonempty array");
    req.variants.clear();
    for (const json& name : *v) {
      if (!name.is_string())
        jsonx::fail(r.member_path("variants"), "expected variant names");
      auto parsed = ir::parse_ibn_variant(name.get<std::string>());
      if (!parsed)
        jsonx::fail(r.member_path("variants"),
                    "unknown variant '" + name.get<std::string>() + "'");
      req.variants.push_back(*parsed);
    }
  }
  if (const json* v = r.optional("kernels")) {
    if (!v->is_array() || v->empty())
      jsonx::fail(r.member_path("kernels"), "expected a nonempty array");
    req.kernels.clear();
    for (const json& k : *v) {
      if (!k.is_number_integer())
        jsonx::fail(r.member_path("kernels"), "expected integers");
      req.kernels.push_back(k.get<int>());
    }
  }
  if (const json* v = r.optional("expansions")) {
    if (!v->is_array() || v->empty())
      jsonx::fail(r.member_path("expansions"), "expected a nonempty array");
    req.expansions.clear();
    for (const json& m : *v) {
      if (m.is_number_integer()) {
        req.expansions.push_back({m.get<std::int64_t>(), 1});
      } else if (m.is_string()) {
        auto parsed = ir::parse_rational(m.get<std::string>());
        if (!parsed)
          jsonx::fail(r.member_path("expansions"),
                      "bad ratio '" + m.get<std::string>() + "'");
        req.expansions.push_back(*parsed);
      } else {
        jsonx::fail(r.member_path("expansions"),
                    "expected integers or \"a/b\" strings");
      }
    }
  }
  req.min_group_size =
      static_cast<int>(r.optional_int("min_group_size", req.min_group_size));
  r.finish();
  return req;
}

// ---------------------------------------------------------------- reports --

// Reports snap reals to the serialization precision up front so a log
// round trip (search, then report --log) reproduces them byte for byte.
std::string archive_csv(const search::ParetoArchive& archive) {
  struct Row {
    std::string key;
    double quality;
    double latency_us;
  };
  std::vector<Row> rows;
  for (const search::ParetoPoint& p : archive.points())
    rows.push_back({space::candidate_key(p.candidate),
                    serde::round6(p.quality), serde::round6(p.latency_us)});
  std::sort(rows.begin(), rows.end(), [](const Row& a, const Row& b) {
    if (a.latency_us != b.latency_us) return a.latency_us < b.latency_us;
    if (a.quality != b.quality) return a.quality < b.quality;
    return a.key < b.key;
  });
  std::ostringstream os;
  os << "candidate,quality,latency_us\n";
  for (const Row& r : rows)
    os << r.key << "," << serde::format_real(r.quality) << ","
       << serde::format_real(r.latency_us) << "\n";
  return os.str();
}

std::string trials_svg(const std::vector<search::TrialRecord>& log) {
  std::vector<analyzer::ScatterPoint> pts;
  for (const search::TrialRecord& r : log) {
    if (!r.ok) continue;
    pts.push_back({serde::round6(r.metrics.latency_us),
                   serde::round6(r.quality),
                   space::candidate_key(r.candidate)});
  }
  return analyzer::scatter_svg(pts, "latency_us", "quality");
}

json best_json(const std::vector<search::TrialRecord>& log,
               std::uint64_t best_trial) {
  if (best_trial == 0) {
    json doc;
    doc["status"] = "no successful trials";
    return doc;
  }
  const search::TrialRecord& r = log[best_trial - 1];
  json doc;
  doc["trial_id"] = r.trial_id;
  doc["candidate"] = serde::candidate_to_json(r.candidate);
  doc["quality"] = serde::round6(r.quality);
  doc["reward"] = serde::round6(r.reward);
  doc["metrics"] = serde::totals_to_json(r.metrics);
  return doc;
}

void write_search_reports(const std::string& out_dir,
                          const std::vector<search::TrialRecord>& log,
                          const search::ParetoArchive& archive,
                          std::uint64_t best_trial) {
  serde::write_file(out_dir + "/archive.csv", archive_csv(archive));
  serde::write_file(out_dir + "/pareto.svg", trials_svg(log));
  serde::write_file(out_dir + "/best.json",
                    best_json(log, best_trial).dump(2) + "\n");
}

// ------------------------------------------------------------ subcommands --

int cmd_estimate(const std::string& model_path, const std::string& config_path,
                 bool per_op, std::ostream& out) {
  const ir::ModelIr model = serde::parse_model(serde::read_file(model_path));
  const cost::AcceleratorConfig cfg = resolve_config(config_path);
  const cost::ModelMetrics metrics = cost::model_metrics(model, cfg);
  out << serde::metrics_to_json(metrics, per_op).dump(2) << "\n";
  return kExitOk;
}

int cmd_analyze(const std::string& shapes_path, const std::string& config_path,
                const std::string& out_dir, double margin, std::ostream& out) {
  const analyzer::SweepRequest req =
      parse_shapes_file(serde::read_file(shapes_path));
  const cost::AcceleratorConfig cfg = resolve_config(config_path);
  const std::vector<analyzer::SweepPoint> table =
      analyzer::run_block_sweep(req, cfg);

  ensure_out_dir(out_dir);
  serde::write_file(out_dir + "/sweep.csv", analyzer::sweep_to_csv(table));

  const std::vector<space::FilterRule> rules =
      analyzer::recommend_filters(table, margin);
  const std::vector<ir::TensorShape> regimes = analyzer::filter_regimes(table);
  json filters;
  filters["regimes"] = json::array();
  for (const ir::TensorShape& s : regimes)
    filters["regimes"].push_back({s.h, s.w, s.c});
  filters["rules"] = serde::filter_rules_to_json(rules);
  serde::write_file(out_dir + "/filters.json", filters.dump(2) + "\n");

  std::vector<analyzer::ScatterPoint> pts;
  for (const analyzer::SweepPoint& pt : table) {
    std::ostringstream label;
    label << ir::ibn_variant_name(pt.variant) << " k" << pt.k << " m"
          << ir::to_string(pt.m);
    if (pt.group_count > 0) label << " g" << pt.group_count;
    pts.push_back({pt.latency_us, static_cast<double>(pt.params),
                   label.str()});
  }
  serde::write_file(out_dir + "/sweep.svg",
                    analyzer::scatter_svg(pts, "latency_us", "params"));

  out << "rows: " << table.size() << "\nrules: " << rules.size() << "\n";
  return kExitOk;
}

int cmd_search(const std::string& space_path, const std::string& algo,
               std::int64_t budget, double target_us, std::uint64_t seed,
               const std::string& out_dir, const std::string& config_path,
               const std::string& ppe, int population, int sample_size,
               int workers, std::ostream& out, std::ostream& err) {
  const serde::ParsedSpace parsed =
      serde::parse_space(serde::read_file(space_path));
  for (const std::string& w : parsed.warnings) err << "warning: " << w << "\n";

  std::unique_ptr<ppe::PpeClient> client;
  std::unique_ptr<search::Evaluator> evaluator;
  if (!ppe.empty()) {
    auto [host, port] = parse_host_port(ppe);
    client = std::make_unique<ppe::PpeClient>(host, port);
    evaluator = std::make_unique<ppe::PpeEvaluator>(*client);
  } else {
    evaluator =
        std::make_unique<search::CostModelEvaluator>(resolve_config(config_path));
  }

  const search::Objective obj{target_us, -0.07};
  search::SearchResult result;
  if (algo == "random") {
    result = search::run_random_search(parsed.space,
                                       static_cast<std::uint64_t>(budget), obj,
                                       *evaluator, seed,
                                       search::default_quality(), workers);
  } else {
    result = search::run_evolution(parsed.space,
                                   static_cast<std::uint64_t>(budget),
                                   population, sample_size, obj, *evaluator,
                                   seed);
  }

  ensure_out_dir(out_dir);
  search::persist_log(result.log, out_dir + "/trials.jsonl");
  write_search_reports(out_dir, result.log, result.archive,
                       result.best_trial);

  std::size_t ok = 0;
  for (const search::TrialRecord& r : result.log) ok += r.ok ? 1 : 0;
  out << "trials: " << result.log.size() << "\nsuccessful: " << ok
      << "\narchive: " << result.archive.points().size() << "\n";
  if (result.best_trial != 0) {
    const search::TrialRecord& best = result.log[result.best_trial - 1];
    out << "best: trial " << best.trial_id << " reward "
        << serde::format_real(best.reward) << " latency_us "
        << serde::format_real(best.metrics.latency_us) << "\n";
  }
  return kExitOk;
}

int cmd_report(const std::string& log_path, const std::string& out_dir,
               std::ostream& out, std::ostream& err) {
  const search::LoadedLog loaded = search::load_log(log_path);
  for (const std::string& w : loaded.warnings) err << "warning: " << w << "\n";
  if (loaded.records.empty())
    throw ValidationError("log holds no readable trials");

  std::uint64_t best_trial = 0;
  double best_reward = 0.0;
  for (const search::TrialRecord& r : loaded.records) {
    if (!r.ok) continue;
    if (best_trial == 0 || r.reward > best_reward) {
      best_trial = r.trial_id;
      best_reward = r.reward;
    }
  }
  // best.json indexes the log by trial id; a log with holes cannot use it.
  std::vector<search::TrialRecord> by_id = loaded.records;
  std::sort(by_id.begin(), by_id.end(),
            [](const search::TrialRecord& a, const search::TrialRecord& b) {
              return a.trial_id < b.trial_id;
            });
  json best;
  if (best_trial == 0) {
    best["status"] = "no successful trials";
  } else {
    for (const search::TrialRecord& r : by_id) {
      if (r.trial_id != best_trial) continue;
      best["trial_id"] = r.trial_id;
      best["candidate"] = serde::candidate_to_json(r.candidate);
      best["quality"] = serde::round6(r.quality);
      best["reward"] = serde::round6(r.reward);
      best["metrics"] = serde::totals_to_json(r.metrics);
    }
  }

  ensure_out_dir(out_dir);
  serde::write_file(out_dir + "/archive.csv",
                    archive_csv(search::archive_from_log(by_id)));
  serde::write_file(out_dir + "/pareto.svg", trials_svg(by_id));
  serde::write_file(out_dir + "/best.json", best.dump(2) + "\n");

  out << "trials: " << loaded.records.size() << "\nskipped: "
      << loaded.warnings.size() << "\n";
  return kExitOk;
}

int cmd_serve(const std::string& host, int port, const std::string& config_path,
              int max_concurrent, std::ostream& out) {
  ppe::ServerOptions options;
  options.host = host;
  options.port = static_cast<std::uint16_t>(port);
  options.config = resolve_config(config_path);
  options.max_concurrent = max_concurrent;

  ppe::PpeServer server(options);
  server.start();
  out << "listening on " << host << ":" << server.port() << "\n";
  out.flush();

  while (!g_serve_stop.load(std::memory_order_relaxed))
    std::this_thread::sleep_for(std::chrono::milliseconds(50));
  server.stop();
  out << "stopped\n";
  return kExitOk;
}

}  // namespace

void request_serve_stop() { g_serve_stop.store(true); }

int run_cli(const std::vector<std::string>& args, std::ostream& out,
            std::ostream& err) {
  CLI::App app{"block-level cost analysis and latency-aware model search"};
  app.name("nasforge");
  app.require_subcommand(1);

  std::string model_path, config_path, shapes_path, space_path, log_path;
  std::string out_dir, ppe, host = "127.0.0.1";
  std::string algo = "random";
  bool per_op = false;
  double margin = 1.0, target_us = 0.0;
  std::int64_t budget = 0;
  std::uint64_t seed = 1;
  int port = 0, max_concurrent = 4, population = 32, sample_size = 8;
  int workers = 1;

  CLI::App* est = app.add_subcommand("estimate", "cost one model");
  est->add_option("--model", model_path, "model JSON")->required();
  est->add_option("--config", config_path, "accelerator config JSON");
  est->add_flag("--per-op", per_op, "include per-op rows");

  CLI::App* ana = app.add_subcommand("analyze", "sweep block variants");
  ana->add_option("--shapes", shapes_path, "shapes JSON")->required();
  ana->add_option("--config", config_path, "accelerator config JSON");
  ana->add_option("--out", out_dir, "output directory")->required();
  ana->add_option("--margin", margin, "latency dominance margin (>= 1)");

  CLI::App* sea = app.add_subcommand("search", "run architecture search");
  sea->add_option("--space", space_path, "search space JSON")->required();
  sea->add_option("--algo", algo, "search algorithm")
      ->check(CLI::IsMember({"random", "evolution"}));
  sea->add_option("--budget", budget, "trial budget")
      ->required()
      ->check(CLI::Range(std::int64_t{1}, std::int64_t{1} << 40).description(
          "positive"));
  sea->add_option("--target-us", target_us, "latency target")
      ->required()
      ->check(CLI::PositiveNumber);
  sea->add_option("--seed", seed, "search seed");
  sea->add_option("--out", out_dir, "output directory")->required();
  sea->add_option("--config", config_path, "accelerator config JSON");
  sea->add_option("--ppe", ppe, "estimate service HOST:PORT");
  sea->add_option("--population", population, "evolution population")
      ->check(CLI::Range(1, 1 << 20).description("positive"));
  sea->add_option("--sample-size", sample_size, "evolution tournament size")
      ->check(CLI::Range(1, 1 << 20).description("positive"));
  sea->add_option("--workers", workers, "parallel evaluations (random only)")
      ->check(CLI::Range(1, 4096).description("positive"));

  CLI::App* srv = app.add_subcommand("serve", "run the estimate service");
  srv->add_option("--host", host, "listen address");
  srv->add_option("--port", port, "listen port, 0 for ephemeral")
      ->check(CLI::Range(0, 65535));
  srv->add_option("--config", config_path, "accelerator config JSON");
  srv->add_option("--max-concurrent", max_concurrent,
                  "parallel estimate limit")
      ->check(CLI::Range(1, 4096).description("positive"));

  CLI::App* rep = app.add_subcommand("report", "re-emit reports from a log");
  rep->add_option("--log", log_path, "trial log (one JSON record per line)")
      ->required();
  rep->add_option("--out", out_dir, "output directory")->required();

  try {
    std::vector<std::string> reversed(args.rbegin(), args.rend());
    app.parse(std::move(reversed));
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e, out, err);
    return rc == 0 ? kExitOk : kExitUsage;
  }

  try {
    if (est->parsed()) return cmd_estimate(model_path, config_path, per_op, out);
    if (ana->parsed())
      return cmd_analyze(shapes_path, config_path, out_dir, margin, out);
    if (sea->parsed())
      return cmd_search(space_path, algo, budget, target_us, seed, out_dir,
                        config_path, ppe, population, sample_size, workers,
                        out, err);
    if (srv->parsed())
      return cmd_serve(host, port, config_path, max_concurrent, out);
    if (rep->parsed()) return cmd_report(log_path, out_dir, out, err);
    err << "error: no subcommand\n";
    return kExitUsage;
  } catch (const UsageError& e) {
    err << "error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const SchemaError& e) {
    err << "error: " << e.what() << "\n";
    return kExitValidation;
  } catch (const ValidationError& e) {
    err << "error: " << e.what() << "\n";
    return kExitValidation;
  } catch (const IoError& e) {
    err << "error: " << e.what() << "\n";
    return kExitIo;
  } catch (const NetworkError& e) {
    err << "error: " << e.what() << "\n";
    return kExitNetwork;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kExitValidation;
  }
}

}  // namespace nasforge::cli
