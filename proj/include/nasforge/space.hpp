// SPDX-License-Identifier: Apache-2.0
//
// Factorized block-level search space: per block a menu of IBN variants,
// kernels, expansion ratios and group sizes, plus one global channel-width
// multiplier. Candidates are choice-index tuples; materialization turns a
// candidate into a concrete ModelIr, rounding scaled widths to multiples
// of 8 so grouped stages stay SIMD-aligned and divisible.
#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "nasforge/ir.hpp"

namespace nasforge::space {

// Group sizes below this carry too little reuse to be worth scheduling.
inline constexpr int kMinGroupSize = 32;
// Scaled block widths snap to this quantum.
inline constexpr int kChannelRound = 8;

struct BlockChoices {
  std::vector<ir::IbnVariant> variants;
  std::vector<int> kernels;             // odd, e.g. {3, 5, 7}
  std::vector<ir::Rational> expansions; // e.g. {3, 6}
  std::vector<int> group_sizes;         // >= kMinGroupSize, e.g. {32, 64}
  int out_c = 0;
  int stride = 1;
  bool allow_residual = true;
};

struct StemSpec {
  int out_c = 0;
  int k = 3;
  int stride = 2;
};

struct SearchSpace {
  ir::TensorShape input;
  StemSpec stem;
  std::vector<ir::Rational> multipliers;
  std::vector<BlockChoices> blocks;
};

// One block's resolved choice. Index fields point into the block's menus;
// kNoChoice marks slots the chosen variant does not use (group size for the
// ungrouped variants, split for everything but the generalized form).
inline constexpr int kNoChoice = -1;

struct BlockChoice {
  int variant = 0;
  int kernel = 0;
  int expansion = 0;
  int group_size = kNoChoice;
  int split = kNoChoice;

  bool operator==(const BlockChoice&) const = default;
};

struct Candidate {
  int multiplier = 0;
  std::vector<BlockChoice> blocks;

  bool operator==(const Candidate&) const = default;
};

// Ordered (n, p) factor pairs of an integer expansion, n ascending. Empty
// for non-integer ratios: the generalized grouped variant needs integer
// stage factors.
std::vector<std::pair<int, int>> expansion_splits(const ir::Rational& m);

// Scaled width: out_c * mult, rounded to the nearest multiple of 8
// (half away from zero), floor 8.
int scale_channels(int out_c, const ir::Rational& mult);

// ------------------------------------------------------------- the index --

// Enumeration cache: per multiplier, the chained input widths and every
// block's valid choice list. Invalid combinations (group size does not
// divide, non-integer expansion, ...) are pruned here; multipliers under
// which some block has no valid choice are dropped entirely.
struct SpaceIndex {
  struct PerMultiplier {
    bool usable = false;
    std::vector<int> in_c;                           // per block
    std::vector<std::vector<BlockChoice>> choices;   // per block
    unsigned long long combos = 0;                   // product, saturating
  };
  std::vector<PerMultiplier> mults;
  std::vector<std::string> warnings;
};

SpaceIndex build_index(const SearchSpace& s);

// Structural menu checks plus index construction; throws ValidationError
// when no candidate survives pruning. Returns pruning warnings.
std::vector<std::string> validate_space(const SearchSpace& s);

// Number of materializable candidates, saturating at the u64 ceiling.
unsigned long long space_size(const SearchSpace& s);

// Uniform over valid candidates (multiplier weighted by its combo count).
Candidate sample_random(const SearchSpace& s, std::uint64_t seed);

// Resamples one searchable parameter (multiplier, variant, kernel,
// expansion, group size, or split) from the values that keep the candidate
// valid, excluding the current one. No alternative leaves the candidate
// unchanged. A variant flip re-resolves the slots the new variant needs.
Candidate mutate(const Candidate& c, const SearchSpace& s, std::uint64_t seed);

// Candidate -> ModelIr: stem conv, scaled block widths, residual flags
// where legal. Throws ValidationError on an out-of-range or invalid
// candidate (a sampled or mutated candidate never is).
ir::ModelIr materialize(const Candidate& c, const SearchSpace& s);

// Compact stable identity for memo tables and logs, e.g. "m1:v0k1e0,...".
std::string candidate_key(const Candidate& c);

// Menu surgery driven by analyzer recommendations.
struct FilterRule {
  int block_index = 0;
  std::string field;  // "variant" | "kernel" | "group_size"
  std::string value;  // variant name or integer literal
  std::string note;   // optional justification, carried through reports
};

// Removes menu entries; throws ValidationError if a rule references a
// missing block/value or would empty a menu.
SearchSpace apply_block_filters(const SearchSpace& s,
                                const std::vector<FilterRule>& rules);

// Every candidate of the space, multiplier-major. Intended for small
// spaces (exhaustive baselines); throws ValidationError past `limit`.
std::vector<Candidate> enumerate_space(const SearchSpace& s,
                                       std::size_t limit = 1u << 20);

}  // namespace nasforge::space
