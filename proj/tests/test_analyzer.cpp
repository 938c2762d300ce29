// SPDX-License-Identifier: Apache-2.0
#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <algorithm>
#include <map>
#include <set>
#include <string>
#include <vector>

#include "nasforge/analyzer.hpp"
#include "nasforge/cost.hpp"
#include "nasforge/errors.hpp"
#include "nasforge/ir.hpp"

using namespace nasforge;
using namespace nasforge::ir;
using namespace nasforge::analyzer;

namespace {

cost::AcceleratorConfig edge_cfg() {
  return cost::load_accelerator_config(NASFORGE_SOURCE_DIR
                                       "/configs/accelerator.json");
}

const std::vector<SweepPoint>& default_table() {
  static const std::vector<SweepPoint> table =
      run_block_sweep(default_sweep_request(), edge_cfg());
  return table;
}

SweepPoint row(IbnVariant v, std::uint64_t params, double latency) {
  SweepPoint p;
  p.variant = v;
  p.shape = {14, 14, 64};
  p.k = 3;
  p.m = {6, 1};
  p.params = params;
  p.macs = params * 196;
  p.latency_us = latency;
  return p;
}

}  // namespace

TEST_CASE("default sweep covers both reference shapes and all variants") {
  const SweepRequest req = default_sweep_request();
  REQUIRE(req.shapes.size() == 2);
  CHECK(req.shapes[0] == TensorShape{14, 14, 64});
  CHECK(req.shapes[1] == TensorShape{14, 14, 160});
  CHECK(req.variants.size() == 4);
  CHECK(req.kernels == std::vector<int>{3, 5});
  REQUIRE(req.expansions.size() == 2);
  CHECK(req.expansions[0] == Rational{3, 1});
  CHECK(req.expansions[1] == Rational{6, 1});
  CHECK(req.min_group_size == 32);

  const std::vector<TensorShape> regimes = filter_regimes(default_table());
  REQUIRE(regimes.size() == 2);
  CHECK(regimes[0] == TensorShape{14, 14, 64});
  CHECK(regimes[1] == TensorShape{14, 14, 160});
}

TEST_CASE("baseline rows sit at ratio one") {
  for (const SweepPoint& p : default_table()) {
    if (p.variant != IbnVariant::kDepthwise) continue;
    CHECK(p.param_ratio == doctest::Approx(1.0));
    CHECK(p.latency_ratio == doctest::Approx(1.0));
    CHECK(p.group_count == 0);
  }
}

TEST_CASE("one-group rows coincide with the fused rows") {
  std::map<std::string, const SweepPoint*> fused;
  auto key = [](const SweepPoint& p) {
    return to_string(p.shape) + "|" + std::to_string(p.k) + "|" +
           to_string(p.m);
  };
  for (const SweepPoint& p : default_table())
    if (p.variant == IbnVariant::kFused) fused[key(p)] = &p;

  int compared = 0;
  for (const SweepPoint& p : default_table()) {
    if (p.variant != IbnVariant::kGc || p.group_count != 1) continue;
    const SweepPoint* f = fused[key(p)];
    REQUIRE(f != nullptr);
    CHECK(p.params == f->params);
    CHECK(p.macs == f->macs);
    CHECK(p.latency_us == f->latency_us);
    CHECK(p.utilization == f->utilization);
    ++compared;
  }
  CHECK(compared == 8);  // 2 shapes x 2 kernels x 2 expansions
}

TEST_CASE("the frozen grouped row keeps its numbers") {
  bool found = false;
  for (const SweepPoint& p : default_table()) {
    if (p.variant != IbnVariant::kGc || p.shape.c != 64 || p.k != 3 ||
        !(p.m == Rational{6, 1}) || p.group_count != 2)
      continue;
    found = true;
    CHECK(p.group_size == 32);
    CHECK(p.params == 135168);
    CHECK(p.macs == 26492928);
    CHECK(p.latency_us == doctest::Approx(8.468));
    CHECK(p.utilization == doctest::Approx(0.763817).epsilon(1e-5));
    CHECK(p.param_ratio == doctest::Approx(2.56934).epsilon(1e-5));
    CHECK(p.latency_ratio == doctest::Approx(0.531376).epsilon(1e-5));
  }
  CHECK(found);
}

TEST_CASE("grouped rows enumerate exactly the legal divisor ladder") {
  // 160 channels expanded by 6: group counts 1, 2, 4 and 5 keep a group
  // size of at least 32; 8 would leave 20 lanes.
  std::set<int> counts;
  for (const SweepPoint& p : default_table())
    if (p.variant == IbnVariant::kGc && p.shape.c == 160 && p.k == 3 &&
        p.m == Rational{6, 1})
      counts.insert(p.group_count);
  CHECK(counts == std::set<int>{1, 2, 4, 5});

  std::set<int> at64;
  for (const SweepPoint& p : default_table())
    if (p.variant == IbnVariant::kGc && p.shape.c == 64 && p.k == 3 &&
        p.m == Rational{6, 1})
      at64.insert(p.group_count);
  CHECK(at64 == std::set<int>{1, 2});
}

TEST_CASE("utilization never rises along a divisor chain of group counts") {
  std::map<std::string, std::vector<const SweepPoint*>> families;
  for (const SweepPoint& p : default_table())
    if (p.variant == IbnVariant::kGc)
      families[to_string(p.shape) + "|" + std::to_string(p.k) + "|" +
               to_string(p.m)]
          .push_back(&p);
  int pairs = 0;
  for (const auto& [k, rows] : families)
    for (const SweepPoint* a : rows)
      for (const SweepPoint* b : rows) {
        if (a->group_count >= b->group_count) continue;
        if (b->group_count % a->group_count != 0) continue;  // not a chain
        CHECK(b->utilization <= a->utilization + 1e-12);
        ++pairs;
      }
  CHECK(pairs > 0);
}

TEST_CASE("sweep holds rows inside the target efficiency band") {
  bool tight = false;
  bool tighter = false;
  for (const SweepPoint& p : default_table()) {
    if (p.variant != IbnVariant::kGc && p.variant != IbnVariant::kGeneralizedGc)
      continue;
    if (p.shape.c == 64 && p.param_ratio >= 2.5 && p.latency_ratio <= 0.6)
      tight = true;
    if (p.latency_ratio <= 0.55) tighter = true;
  }
  CHECK(tight);
  CHECK(tighter);
}

TEST_CASE("generalized rows carry their stage split") {
  int with_split = 0;
  for (const SweepPoint& p : default_table()) {
    if (p.variant != IbnVariant::kGeneralizedGc) continue;
    CHECK(p.split_n >= 1);
    CHECK(p.split_p >= 1);
    CHECK(p.split_n * p.split_p == p.m.num);
    ++with_split;
  }
  CHECK(with_split > 0);
}

TEST_CASE("sweep validates its inputs") {
  const cost::AcceleratorConfig cfg = edge_cfg();
  SweepRequest req = default_sweep_request();
  req.shapes.clear();
  CHECK_THROWS_AS(run_block_sweep(req, cfg), ValidationError);

  req = default_sweep_request();
  req.kernels = {4};
  CHECK_THROWS_AS(run_block_sweep(req, cfg), ValidationError);

  req = default_sweep_request();
  req.min_group_size = 0;
  CHECK_THROWS_AS(run_block_sweep(req, cfg), ValidationError);

  cost::AcceleratorConfig bad = cfg;
  bad.mac_per_cycle = 0;
  CHECK_THROWS_AS(run_block_sweep(default_sweep_request(), bad),
                  ValidationError);
}

TEST_CASE("dominated variants are dropped, front variants survive") {
  std::vector<SweepPoint> table;
  table.push_back(row(IbnVariant::kFused, 100000, 10.0));
  table.push_back(row(IbnVariant::kGc, 120000, 4.0));

  const std::vector<space::FilterRule> rules = recommend_filters(table);
  REQUIRE(rules.size() == 1);
  CHECK(rules[0].block_index == 0);
  CHECK(rules[0].field == "variant");
  CHECK(rules[0].value == "fused_ibn");
  CHECK(rules[0].note.find("14x14x64") != std::string::npos);
  CHECK(rules[0].note.find("off the latency/params front") !=
        std::string::npos);

  // The margin makes drops strictly harder.
  CHECK(recommend_filters(table, 2.0).size() == 1);   // 10 > 2.0 * 4
  CHECK(recommend_filters(table, 2.6).empty());       // 10 <= 2.6 * 4
  CHECK_THROWS_AS(recommend_filters(table, 0.9), ValidationError);
}

TEST_CASE("a variant with any front row is never dropped") {
  // Second fused row holds the parameter crown, so fused stays.
  std::vector<SweepPoint> table;
  table.push_back(row(IbnVariant::kFused, 100000, 10.0));
  table.push_back(row(IbnVariant::kFused, 200000, 12.0));
  table.push_back(row(IbnVariant::kGc, 120000, 4.0));
  CHECK(recommend_filters(table).empty());
}

TEST_CASE("rules are per-regime") {
  std::vector<SweepPoint> table;
  table.push_back(row(IbnVariant::kFused, 100000, 10.0));
  table.push_back(row(IbnVariant::kGc, 120000, 4.0));
  SweepPoint far = row(IbnVariant::kFused, 100000, 10.0);
  far.shape = {7, 7, 192};
  table.push_back(far);  // alone in its regime, nothing beats it
  const std::vector<space::FilterRule> rules = recommend_filters(table);
  REQUIRE(rules.size() == 1);
  CHECK(rules[0].block_index == 0);

  const std::vector<TensorShape> regimes = filter_regimes(table);
  REQUIRE(regimes.size() == 2);
  CHECK(regimes[1] == TensorShape{7, 7, 192});
}

TEST_CASE("recommendations never touch the pareto front of the real sweep") {
  const std::vector<SweepPoint>& table = default_table();
  const std::vector<space::FilterRule> rules = recommend_filters(table);
  const std::vector<TensorShape> regimes = filter_regimes(table);

  for (std::size_t ri = 0; ri < regimes.size(); ++ri) {
    std::vector<const SweepPoint*> rows;
    for (const SweepPoint& p : table)
      if (p.shape == regimes[ri]) rows.push_back(&p);
    std::set<std::string> dropped;
    for (const space::FilterRule& r : rules)
      if (r.block_index == static_cast<int>(ri)) dropped.insert(r.value);

    for (const SweepPoint* p : rows) {
      bool dominated = false;
      for (const SweepPoint* q : rows)
        if (q->params >= p->params && q->latency_us < p->latency_us)
          dominated = true;
      if (!dominated)
        CHECK(dropped.count(ibn_variant_name(p->variant)) == 0);
    }
  }
}

TEST_CASE("csv emit and parse are inverse") {
  const std::vector<SweepPoint>& table = default_table();
  const std::string text = sweep_to_csv(table);
  const std::vector<SweepPoint> back = sweep_from_csv(text);
  CHECK(sweep_to_csv(back) == text);
  REQUIRE(back.size() == table.size());
  CHECK(back[0].variant == table[0].variant);
  CHECK(back[0].params == table[0].params);

  CHECK_THROWS_AS(sweep_from_csv("variant,h,w\n"), ValidationError);
  const std::string hdr = text.substr(0, text.find('\n') + 1);
  CHECK_THROWS_AS(sweep_from_csv(hdr + "only,three,fields\n"),
                  ValidationError);
  CHECK_THROWS_AS(
      sweep_from_csv(hdr +
                     "bottleneck,14,14,64,3,6,0,0,0,0,1,1,1.0,1.0,1.0,1.0,1.0\n"),
      ValidationError);
}

TEST_CASE("scatter plots the points and the efficient front") {
  std::vector<ScatterPoint> pts;
  pts.push_back({4.0, 120000.0, "grouped k3"});
  pts.push_back({10.0, 100000.0, "fused <k3> & co"});  // dominated
  pts.push_back({15.0, 200000.0, "fused k5"});
  const std::string svg = scatter_svg(pts, "latency_us", "params");

  CHECK(svg.find("<svg") != std::string::npos);
  CHECK(svg.find("width=\"640\"") != std::string::npos);
  CHECK(svg.find("height=\"480\"") != std::string::npos);
  std::size_t circles = 0;
  for (std::size_t at = svg.find("<circle"); at != std::string::npos;
       at = svg.find("<circle", at + 1))
    ++circles;
  CHECK(circles == 3);
  CHECK(svg.find("<polyline") != std::string::npos);
  CHECK(svg.find("latency_us") != std::string::npos);
  CHECK(svg.find("params") != std::string::npos);
  // Labels are escaped, never raw.
  CHECK(svg.find("fused &lt;k3&gt; &amp; co") != std::string::npos);
  CHECK(svg.find("fused <k3>") == std::string::npos);

  CHECK(scatter_svg(pts, "latency_us", "params") == svg);

  const std::string empty = scatter_svg({}, "x", "y");
  CHECK(empty.find("<circle") == std::string::npos);
}
