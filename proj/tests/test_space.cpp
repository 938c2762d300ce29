// SPDX-License-Identifier: Apache-2.0
#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <algorithm>
#include <map>
#include <set>
#include <string>
#include <vector>

#include "nasforge/errors.hpp"
#include "nasforge/ir.hpp"
#include "nasforge/serde.hpp"
#include "nasforge/space.hpp"

using namespace nasforge;
using namespace nasforge::ir;
using namespace nasforge::space;

namespace {

// One block, eight combinations, one multiplier.
SearchSpace tiny_space() {
  SearchSpace s;
  s.input = {32, 32, 16};
  s.stem = {16, 3, 2};
  s.multipliers = {Rational{1, 1}};
  BlockChoices b;
  b.variants = {IbnVariant::kDepthwise, IbnVariant::kFused};
  b.kernels = {3, 5};
  b.expansions = {Rational{3, 1}, Rational{6, 1}};
  b.out_c = 32;
  b.stride = 2;
  s.blocks = {b};
  return s;
}

SearchSpace wide_space() {
  SearchSpace s;
  s.input = {64, 64, 3};
  s.stem = {32, 3, 2};
  s.multipliers = {Rational{1, 4}, Rational{1, 2}, Rational{3, 4},
                   Rational{1, 1}, Rational{2, 1}};
  BlockChoices b;
  b.variants = {IbnVariant::kDepthwise, IbnVariant::kFused};
  b.kernels = {3, 5};
  b.expansions = {Rational{3, 1}, Rational{6, 1}};
  b.out_c = 32;
  b.stride = 2;
  s.blocks = {b, b, b};
  s.blocks[1].out_c = 64;
  s.blocks[2].out_c = 64;
  s.blocks[2].stride = 1;
  return s;
}

}  // namespace

TEST_CASE("expansion ratios factor into stage pairs") {
  const auto six = expansion_splits(Rational{6, 1});
  REQUIRE(six.size() == 4);
  CHECK(six[0] == std::pair<int, int>{1, 6});
  CHECK(six[1] == std::pair<int, int>{2, 3});
  CHECK(six[2] == std::pair<int, int>{3, 2});
  CHECK(six[3] == std::pair<int, int>{6, 1});

  const auto four = expansion_splits(Rational{4, 1});
  REQUIRE(four.size() == 3);
  CHECK(four[1] == std::pair<int, int>{2, 2});

  CHECK(expansion_splits(Rational{1, 2}).empty());
  const auto one = expansion_splits(Rational{1, 1});
  REQUIRE(one.size() == 1);
  CHECK(one[0] == std::pair<int, int>{1, 1});
}

TEST_CASE("scaled widths snap to the channel quantum") {
  CHECK(scale_channels(64, Rational{1, 2}) == 32);
  CHECK(scale_channels(64, Rational{2, 1}) == 128);
  CHECK(scale_channels(88, Rational{3, 4}) == 64);   // 66 rounds down
  CHECK(scale_channels(40, Rational{1, 2}) == 24);   // 20 rounds half away
  CHECK(scale_channels(8, Rational{1, 4}) == 8);     // floor
  CHECK(scale_channels(64, Rational{1, 1}) == 64);
}

TEST_CASE("space size multiplies block menus and multipliers") {
  CHECK(space_size(tiny_space()) == 8);
  // Three 8-way blocks under five usable multipliers.
  CHECK(space_size(wide_space()) == 2560);
}

TEST_CASE("index prunes undersized groups and drops dead multipliers") {
  SearchSpace s;
  s.input = {32, 32, 16};
  s.stem = {64, 3, 2};
  s.multipliers = {Rational{1, 4}, Rational{1, 1}};
  BlockChoices feed;
  feed.variants = {IbnVariant::kDepthwise};
  feed.kernels = {3};
  feed.expansions = {Rational{6, 1}};
  feed.out_c = 64;
  feed.stride = 2;
  BlockChoices gc;
  gc.variants = {IbnVariant::kGc};
  gc.kernels = {3};
  gc.expansions = {Rational{6, 1}};
  gc.group_sizes = {32, 64};
  gc.out_c = 64;
  s.blocks = {feed, gc};

  // The multiplier scales block widths, never the stem: quarter width
  // leaves the grouped block 16 input channels, below every group size.
  const SpaceIndex idx = build_index(s);
  REQUIRE(idx.mults.size() == 2);
  CHECK(!idx.mults[0].usable);
  CHECK(idx.mults[1].usable);
  CHECK(idx.mults[1].combos == 2);  // g in {64/32, 64/64}
  CHECK(space_size(s) == idx.mults[1].combos);

  bool dropped = false;
  for (const std::string& w : idx.warnings)
    if (w.find("multiplier 1/4 dropped") != std::string::npos) dropped = true;
  CHECK(dropped);

  CHECK(validate_space(s).size() == idx.warnings.size());

  s.multipliers = {Rational{1, 4}};
  CHECK_THROWS_AS(validate_space(s), ValidationError);
  CHECK(space_size(s) == 0);
}

TEST_CASE("menu validation rejects empty menus") {
  SearchSpace s = tiny_space();
  s.blocks[0].kernels.clear();
  CHECK_THROWS_AS(validate_space(s), ValidationError);

  s = tiny_space();
  s.multipliers.clear();
  CHECK_THROWS_AS(validate_space(s), ValidationError);

  // Grouped variants cannot work without a group size menu.
  s = tiny_space();
  s.blocks[0].variants = {IbnVariant::kGc};
  s.blocks[0].group_sizes.clear();
  CHECK_THROWS_AS(validate_space(s), ValidationError);
}

TEST_CASE("enumeration visits every candidate exactly once") {
  const SearchSpace s = wide_space();
  const std::vector<Candidate> all = enumerate_space(s);
  CHECK(all.size() == 2560);
  std::set<std::string> keys;
  for (const Candidate& c : all) keys.insert(candidate_key(c));
  CHECK(keys.size() == all.size());

  CHECK_THROWS_AS(enumerate_space(s, 100), ValidationError);
}

TEST_CASE("sampling stays inside the space and covers it uniformly") {
  const SearchSpace s = tiny_space();
  std::map<std::string, int> hits;
  for (int seed = 1; seed <= 4000; ++seed)
    ++hits[candidate_key(sample_random(s, seed))];
  REQUIRE(hits.size() == 8);
  for (const auto& [key, n] : hits) {
    CHECK(n > 4000 / 8 - 150);  // 12.5% +- ~3.75pp
    CHECK(n < 4000 / 8 + 150);
  }
}

TEST_CASE("sampled candidates always materialize into valid models") {
  const serde::ParsedSpace ps = serde::parse_space(
      serde::read_file(NASFORGE_SOURCE_DIR "/configs/space.json"));
  for (int seed = 1; seed <= 500; ++seed) {
    const Candidate c = sample_random(ps.space, seed);
    const ModelIr m = materialize(c, ps.space);
    CHECK(validate_model(m).empty());
  }
}

TEST_CASE("materialization scales widths and sets the skip where legal") {
  SearchSpace s = tiny_space();
  s.blocks[0].out_c = 16;  // matches the stem width
  s.blocks[0].stride = 1;

  Candidate c;
  c.multiplier = 0;
  c.blocks = {{0, 0, 0, kNoChoice, kNoChoice}};
  const ModelIr m = materialize(c, s);
  REQUIRE(m.items.size() == 2);
  const auto& stem = std::get<PlainConv>(m.items[0]);
  CHECK(stem.out_c == 16);
  CHECK(stem.stride == 2);
  const auto& blk = std::get<IbnSpec>(m.items[1]);
  CHECK(blk.variant == IbnVariant::kDepthwise);
  CHECK(blk.in_c == 16);
  CHECK(blk.out_c == 16);
  CHECK(blk.k == 3);
  CHECK(blk.expansion == Rational{3, 1});
  CHECK(blk.use_residual);  // stride 1, equal widths
  CHECK(validate_model(m).empty());

  s.blocks[0].allow_residual = false;
  CHECK(!std::get<IbnSpec>(materialize(c, s).items[1]).use_residual);

  s.blocks[0].allow_residual = true;
  s.blocks[0].stride = 2;
  CHECK(!std::get<IbnSpec>(materialize(c, s).items[1]).use_residual);

  Candidate bad = c;
  bad.blocks[0].kernel = 7;
  CHECK_THROWS_AS(materialize(bad, s), ValidationError);
}

TEST_CASE("candidate keys are positional and stable") {
  Candidate c;
  c.multiplier = 3;
  c.blocks = {{1, 0, 1, kNoChoice, kNoChoice}, {2, 0, 0, 1, 2}};
  CHECK(candidate_key(c) == "m3:v1k0e1:v2k0e0g1s2");
}

TEST_CASE("mutation changes exactly one searchable slot") {
  const SearchSpace s = wide_space();
  const Candidate parent = sample_random(s, 7);
  int mult_flips = 0;
  int block_flips = 0;
  for (int seed = 1; seed <= 300; ++seed) {
    const Candidate child = mutate(parent, s, seed);
    CHECK(mutate(parent, s, seed) == child);  // seed pins the move

    int blocks_changed = 0;
    for (std::size_t b = 0; b < parent.blocks.size(); ++b)
      if (!(parent.blocks[b] == child.blocks[b])) ++blocks_changed;
    if (child.multiplier != parent.multiplier) {
      ++mult_flips;
      CHECK(blocks_changed == 0);
    } else {
      ++block_flips;
      CHECK(blocks_changed == 1);
    }
    CHECK(validate_model(materialize(child, s)).empty());
  }
  // Both move kinds occur under this many seeds.
  CHECK(mult_flips > 0);
  CHECK(block_flips > 0);
}

TEST_CASE("mutation without alternatives returns the parent") {
  SearchSpace s = tiny_space();
  s.blocks[0].variants = {IbnVariant::kDepthwise};
  s.blocks[0].kernels = {3};
  s.blocks[0].expansions = {Rational{6, 1}};
  const Candidate only = sample_random(s, 1);
  for (int seed = 1; seed <= 20; ++seed)
    CHECK(mutate(only, s, seed) == only);
}

TEST_CASE("variant flips re-resolve the slots the new variant needs") {
  SearchSpace s = tiny_space();
  s.input = {32, 32, 64};
  s.stem = {64, 3, 2};
  s.blocks[0].variants = {IbnVariant::kDepthwise, IbnVariant::kGc};
  s.blocks[0].group_sizes = {32};
  s.blocks[0].out_c = 64;

  Candidate dw;
  dw.multiplier = 0;
  dw.blocks = {{0, 0, 0, kNoChoice, kNoChoice}};
  REQUIRE_NOTHROW(materialize(dw, s));

  bool saw_gc = false;
  for (int seed = 1; seed <= 60; ++seed) {
    const Candidate child = mutate(dw, s, seed);
    if (child.blocks[0].variant == 1) {
      saw_gc = true;
      CHECK(child.blocks[0].group_size == 0);  // resolved, not kNoChoice
      CHECK(validate_model(materialize(child, s)).empty());
    }
  }
  CHECK(saw_gc);
}

TEST_CASE("filter rules edit menus and reject nonsense") {
  const SearchSpace s = tiny_space();

  FilterRule drop_fused{0, "variant", "fused_ibn", ""};
  const SearchSpace cut = apply_block_filters(s, {drop_fused});
  CHECK(cut.blocks[0].variants ==
        std::vector<IbnVariant>{IbnVariant::kDepthwise});
  CHECK(space_size(cut) == 4);

  FilterRule drop_kernel{0, "kernel", "5", ""};
  CHECK(apply_block_filters(s, {drop_kernel}).blocks[0].kernels ==
        std::vector<int>{3});

  CHECK_THROWS_AS(apply_block_filters(s, {{4, "variant", "fused_ibn", ""}}),
                  ValidationError);
  CHECK_THROWS_AS(apply_block_filters(s, {{0, "variant", "gc_ibn", ""}}),
                  ValidationError);  // not in the menu
  CHECK_THROWS_AS(
      apply_block_filters(
          s, {{0, "variant", "fused_ibn", ""}, {0, "variant", "depthwise_ibn", ""}}),
      ValidationError);  // would empty the menu
}

TEST_CASE("space files parse with defaults and prune warnings") {
  const serde::ParsedSpace ps = serde::parse_space(R"({
    "input": [32, 32, 3],
    "stem": {"out_c": 64},
    "blocks": [
      {"variants": ["gc_ibn"], "kernels": [3], "expansions": [6],
       "group_sizes": [16, 32], "out_c": 64}
    ]
  })");
  CHECK(ps.space.stem.k == 3);
  CHECK(ps.space.stem.stride == 2);
  CHECK(ps.space.multipliers.size() == 5);  // default ladder
  CHECK(ps.space.blocks[0].group_sizes == std::vector<int>{32});
  bool warned = false;
  for (const std::string& w : ps.warnings)
    if (w.find("group size 16 below minimum 32, pruned") != std::string::npos)
      warned = true;
  CHECK(warned);

  // Emit -> parse keeps the space identical.
  const std::string text = serde::emit_space(ps.space);
  const serde::ParsedSpace again = serde::parse_space(text);
  CHECK(serde::emit_space(again.space) == text);

  CHECK_THROWS_AS(serde::parse_space("{\"input\": [32, 32, 3]}"), SchemaError);
  CHECK_THROWS_AS(serde::parse_space(R"({
    "input": [32, 32, 3],
    "stem": {"out_c": 8},
    "blocks": [
      {"variants": ["gc_ibn"], "kernels": [3], "expansions": [6],
       "out_c": 8}
    ]
  })"),
                  ValidationError);  // nothing survives pruning
}

TEST_CASE("shipped space file is usable and warns about its pruned corners") {
  const serde::ParsedSpace ps = serde::parse_space(
      serde::read_file(NASFORGE_SOURCE_DIR "/configs/space.json"));
  CHECK(space_size(ps.space) > 0);
  CHECK(!ps.warnings.empty());
  const std::vector<Candidate> some = enumerate_space(ps.space, 1u << 20);
  CHECK(some.size() == space_size(ps.space));
}
