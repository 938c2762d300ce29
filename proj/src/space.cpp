// SPDX-License-Identifier: Apache-2.0
#include "nasforge/space.hpp"

#include <algorithm>
#include <limits>
#include <optional>

#include "nasforge/errors.hpp"
#include "nasforge/rng.hpp"

namespace nasforge::space {

namespace {

using u128 = unsigned __int128;

constexpr unsigned long long kSizeCeiling =
    std::numeric_limits<unsigned long long>::max();

// Resolves one block choice against concrete input/output widths. Returns
// nothing when the combination cannot materialize (group size does not
// divide the grouped stage, non-integer expansion, ...).
std::optional<ir::IbnSpec> resolve_choice(const BlockChoices& menu,
                                          const BlockChoice& ch, int in_c) {
  if (ch.variant < 0 || ch.variant >= static_cast<int>(menu.variants.size()))
    return std::nullopt;
  if (ch.kernel < 0 || ch.kernel >= static_cast<int>(menu.kernels.size()))
    return std::nullopt;
  if (ch.expansion < 0 ||
      ch.expansion >= static_cast<int>(menu.expansions.size()))
    return std::nullopt;

  ir::IbnSpec spec;
  spec.variant = menu.variants[ch.variant];
  spec.in_c = in_c;
  spec.out_c = in_c;  // placeholder, set by caller
  spec.k = menu.kernels[ch.kernel];
  spec.stride = menu.stride;
  spec.expansion = menu.expansions[ch.expansion];

  const bool grouped = ir::variant_uses_groups(spec.variant);
  if (grouped != (ch.group_size != kNoChoice)) return std::nullopt;
  const bool generalized = spec.variant == ir::IbnVariant::kGeneralizedGc;
  if (generalized != (ch.split != kNoChoice)) return std::nullopt;

  if (generalized) {
    const auto splits = expansion_splits(spec.expansion);
    if (ch.split < 0 || ch.split >= static_cast<int>(splits.size()))
      return std::nullopt;
    spec.split_n = splits[ch.split].first;
    spec.split_p = splits[ch.split].second;
  }
  if (grouped) {
    if (ch.group_size < 0 ||
        ch.group_size >= static_cast<int>(menu.group_sizes.size()))
      return std::nullopt;
    const int gs = menu.group_sizes[ch.group_size];
    const std::int64_t gc_in =
        generalized ? static_cast<std::int64_t>(spec.split_n) * in_c : in_c;
    if (gs <= 0 || gc_in % gs != 0) return std::nullopt;
    spec.groups = static_cast<int>(gc_in / gs);
  }
  return spec;
}

std::optional<ir::IbnSpec> resolve_block(const BlockChoices& menu,
                                         const BlockChoice& ch, int in_c,
                                         int out_c) {
  std::optional<ir::IbnSpec> spec = resolve_choice(menu, ch, in_c);
  if (!spec) return std::nullopt;
  spec->out_c = out_c;
  spec->use_residual =
      menu.allow_residual && menu.stride == 1 && in_c == out_c;
  if (!ir::validate_block(*spec, kMinGroupSize).empty()) return std::nullopt;
  return spec;
}

unsigned long long saturating_mul(unsigned long long a,
                                  unsigned long long b) {
  const u128 p = static_cast<u128>(a) * b;
  return p > kSizeCeiling ? kSizeCeiling : static_cast<unsigned long long>(p);
}

void check_menus(const SearchSpace& s) {
  if (s.input.h <= 0 || s.input.w <= 0 || s.input.c <= 0)
    throw ValidationError("input shape must be positive");
  if (s.stem.out_c <= 0 || s.stem.k <= 0 || s.stem.k % 2 == 0 ||
      (s.stem.stride != 1 && s.stem.stride != 2))
    throw ValidationError("stem spec is malformed");
  if (s.multipliers.empty()) throw ValidationError("empty multiplier menu");
  for (const ir::Rational& m : s.multipliers)
    if (m.num <= 0) throw ValidationError("multipliers must be positive");
  if (s.blocks.empty()) throw ValidationError("space has no blocks");
  for (std::size_t i = 0; i < s.blocks.size(); ++i) {
    const BlockChoices& b = s.blocks[i];
    const std::string at = "block " + std::to_string(i) + ": ";
    if (b.variants.empty()) throw ValidationError(at + "empty variant menu");
    if (b.kernels.empty()) throw ValidationError(at + "empty kernel menu");
    if (b.expansions.empty())
      throw ValidationError(at + "empty expansion menu");
    for (int k : b.kernels)
      if (k <= 0 || k % 2 == 0)
        throw ValidationError(at + "kernels must be odd and positive");
    for (const ir::Rational& e : b.expansions)
      if (e.num <= 0) throw ValidationError(at + "expansions must be positive");
    const bool wants_groups =
        std::any_of(b.variants.begin(), b.variants.end(),
                    [](ir::IbnVariant v) { return ir::variant_uses_groups(v); });
    if (wants_groups && b.group_sizes.empty())
      throw ValidationError(at + "grouped variants need a group size menu");
    for (int gs : b.group_sizes)
      if (gs < kMinGroupSize)
        throw ValidationError(at + "group size " + std::to_string(gs) +
                              " below minimum " +
                              std::to_string(kMinGroupSize));
    if (b.out_c <= 0) throw ValidationError(at + "out_c must be positive");
    if (b.stride != 1 && b.stride != 2)
      throw ValidationError(at + "stride must be 1 or 2");
  }
}

}  // namespace

std::vector<std::pair<int, int>> expansion_splits(const ir::Rational& m) {
  std::vector<std::pair<int, int>> out;
  if (!m.is_integer() || m.num <= 0) return out;
  const int value = static_cast<int>(m.num);
  for (int n = 1; n <= value; ++n)
    if (value % n == 0) out.emplace_back(n, value / n);
  return out;
}

int scale_channels(int out_c, const ir::Rational& mult) {
  // Nearest multiple of kChannelRound, half away from zero, floor at one
  // quantum. Exact in integers: round(x) = floor((2x + 1) / 2).
  const std::int64_t num = static_cast<std::int64_t>(out_c) * mult.num;
  const std::int64_t den = static_cast<std::int64_t>(mult.den) * kChannelRound;
  const std::int64_t rounded = (2 * num + den) / (2 * den);
  return static_cast<int>(std::max<std::int64_t>(1, rounded) * kChannelRound);
}

SpaceIndex build_index(const SearchSpace& s) {
  check_menus(s);
  SpaceIndex idx;
  idx.mults.resize(s.multipliers.size());

  for (std::size_t mi = 0; mi < s.multipliers.size(); ++mi) {
    SpaceIndex::PerMultiplier& pm = idx.mults[mi];
    pm.usable = true;
    pm.combos = 1;
    int in_c = s.stem.out_c;
    for (std::size_t bi = 0; bi < s.blocks.size(); ++bi) {
      const BlockChoices& menu = s.blocks[bi];
      const int out_c = scale_channels(menu.out_c, s.multipliers[mi]);
      std::vector<BlockChoice> valid;
      std::size_t tried = 0;

      for (int vi = 0; vi < static_cast<int>(menu.variants.size()); ++vi) {
        const ir::IbnVariant variant = menu.variants[vi];
        const bool grouped = ir::variant_uses_groups(variant);
        const bool generalized = variant == ir::IbnVariant::kGeneralizedGc;
        for (int ki = 0; ki < static_cast<int>(menu.kernels.size()); ++ki)
          for (int ei = 0; ei < static_cast<int>(menu.expansions.size());
               ++ei) {
            const int n_splits =
                generalized
                    ? static_cast<int>(
                          expansion_splits(menu.expansions[ei]).size())
                    : 0;
            const int si_hi = generalized ? n_splits : 1;
            const int gi_hi =
                grouped ? static_cast<int>(menu.group_sizes.size()) : 1;
            for (int si = 0; si < si_hi; ++si)
              for (int gi = 0; gi < gi_hi; ++gi) {
                BlockChoice ch;
                ch.variant = vi;
                ch.kernel = ki;
                ch.expansion = ei;
                ch.group_size = grouped ? gi : kNoChoice;
                ch.split = generalized ? si : kNoChoice;
                ++tried;
                if (resolve_block(menu, ch, in_c, out_c)) valid.push_back(ch);
              }
            if (generalized && n_splits == 0) ++tried;  // unusable ratio
          }
      }

      if (valid.size() < tried)
        idx.warnings.push_back(
            "multiplier " + ir::to_string(s.multipliers[mi]) + ", block " +
            std::to_string(bi) + ": pruned " +
            std::to_string(tried - valid.size()) + " of " +
            std::to_string(tried) + " combinations");
      if (valid.empty()) {
        pm.usable = false;
        idx.warnings.push_back("multiplier " +
                               ir::to_string(s.multipliers[mi]) +
                               " dropped: block " + std::to_string(bi) +
                               " has no valid choices");
        break;
      }
      pm.in_c.push_back(in_c);
      pm.choices.push_back(std::move(valid));
      pm.combos = saturating_mul(pm.combos, pm.choices.back().size());
      in_c = out_c;
    }
    if (!pm.usable) {
      pm.in_c.clear();
      pm.choices.clear();
      pm.combos = 0;
    }
  }
  return idx;
}

std::vector<std::string> validate_space(const SearchSpace& s) {
  SpaceIndex idx = build_index(s);
  const bool any =
      std::any_of(idx.mults.begin(), idx.mults.end(),
                  [](const SpaceIndex::PerMultiplier& m) { return m.usable; });
  if (!any)
    throw ValidationError("no candidate survives pruning: " +
                          (idx.warnings.empty() ? std::string("empty space")
                                                : idx.warnings.back()));
  return std::move(idx.warnings);
}

unsigned long long space_size(const SearchSpace& s) {
  const SpaceIndex idx = build_index(s);
  unsigned long long total = 0;
  for (const SpaceIndex::PerMultiplier& pm : idx.mults) {
    if (!pm.usable) continue;
    const unsigned long long next = total + pm.combos;
    total = next < total ? kSizeCeiling : next;  // saturate on wrap
  }
  return total;
}

Candidate sample_random(const SearchSpace& s, std::uint64_t seed) {
  const SpaceIndex idx = build_index(s);
  u128 total = 0;
  for (const SpaceIndex::PerMultiplier& pm : idx.mults)
    if (pm.usable) total += pm.combos;
  if (total == 0) throw ValidationError("space has no valid candidates");

  SplitMix64 rng(seed);
  // 128-bit rejection sampling keeps the multiplier weighting exact even
  // for astronomically large spaces.
  const u128 threshold = (-total) % total;
  u128 draw = 0;
  do {
    draw = (static_cast<u128>(rng.next()) << 64) | rng.next();
  } while (draw < threshold);
  u128 pick = draw % total;

  Candidate c;
  for (std::size_t mi = 0; mi < idx.mults.size(); ++mi) {
    const SpaceIndex::PerMultiplier& pm = idx.mults[mi];
    if (!pm.usable) continue;
    if (pick < pm.combos) {
      c.multiplier = static_cast<int>(mi);
      for (const std::vector<BlockChoice>& options : pm.choices)
        c.blocks.push_back(options[rng.bounded(options.size())]);
      return c;
    }
    pick -= pm.combos;
  }
  throw std::logic_error("sample walk exhausted multipliers");
}

namespace {

// Mutable slot descriptor: block < 0 means the global multiplier.
struct Slot {
  enum Kind { kMult, kVariant, kKernel, kExpansion, kGroupSize, kSplit };
  Kind kind = kMult;
  int block = -1;
};

std::vector<int> chain_in_c(const SearchSpace& s, int mult_idx) {
  std::vector<int> in_c(s.blocks.size());
  int cur = s.stem.out_c;
  for (std::size_t bi = 0; bi < s.blocks.size(); ++bi) {
    in_c[bi] = cur;
    cur = scale_channels(s.blocks[bi].out_c, s.multipliers[mult_idx]);
  }
  return in_c;
}

bool block_ok(const SearchSpace& s, const Candidate& c, int bi,
              const BlockChoice& ch) {
  const std::vector<int> in_c = chain_in_c(s, c.multiplier);
  const int out_c =
      scale_channels(s.blocks[bi].out_c, s.multipliers[c.multiplier]);
  return resolve_block(s.blocks[bi], ch, in_c[bi], out_c).has_value();
}

bool candidate_ok(const SearchSpace& s, const Candidate& c) {
  if (c.multiplier < 0 ||
      c.multiplier >= static_cast<int>(s.multipliers.size()))
    return false;
  if (c.blocks.size() != s.blocks.size()) return false;
  for (int bi = 0; bi < static_cast<int>(s.blocks.size()); ++bi)
    if (!block_ok(s, c, bi, c.blocks[bi])) return false;
  return true;
}

}  // namespace

Candidate mutate(const Candidate& c, const SearchSpace& s,
                 std::uint64_t seed) {
  check_menus(s);
  if (!candidate_ok(s, c))
    throw ValidationError("mutation parent is not valid in this space");

  std::vector<Slot> slots;
  slots.push_back({Slot::kMult, -1});
  for (int bi = 0; bi < static_cast<int>(c.blocks.size()); ++bi) {
    slots.push_back({Slot::kVariant, bi});
    slots.push_back({Slot::kKernel, bi});
    slots.push_back({Slot::kExpansion, bi});
    if (c.blocks[bi].group_size != kNoChoice)
      slots.push_back({Slot::kGroupSize, bi});
    if (c.blocks[bi].split != kNoChoice)
      slots.push_back({Slot::kSplit, bi});
  }

  SplitMix64 rng(seed);
  const Slot slot = slots[rng.bounded(slots.size())];

  if (slot.kind == Slot::kMult) {
    std::vector<int> alts;
    for (int mi = 0; mi < static_cast<int>(s.multipliers.size()); ++mi) {
      if (mi == c.multiplier) continue;
      Candidate probe = c;
      probe.multiplier = mi;
      if (candidate_ok(s, probe)) alts.push_back(mi);
    }
    if (alts.empty()) return c;
    Candidate out = c;
    out.multiplier = alts[rng.bounded(alts.size())];
    return out;
  }

  const int bi = slot.block;
  const BlockChoices& menu = s.blocks[bi];
  const BlockChoice& cur = c.blocks[bi];
  auto accepts = [&](const BlockChoice& ch) { return block_ok(s, c, bi, ch); };

  std::vector<BlockChoice> alts;
  switch (slot.kind) {
    case Slot::kKernel:
      for (int ki = 0; ki < static_cast<int>(menu.kernels.size()); ++ki) {
        if (ki == cur.kernel) continue;
        BlockChoice ch = cur;
        ch.kernel = ki;
        if (accepts(ch)) alts.push_back(ch);
      }
      break;
    case Slot::kGroupSize:
      for (int gi = 0; gi < static_cast<int>(menu.group_sizes.size()); ++gi) {
        if (gi == cur.group_size) continue;
        BlockChoice ch = cur;
        ch.group_size = gi;
        if (accepts(ch)) alts.push_back(ch);
      }
      break;
    case Slot::kSplit: {
      const auto splits = expansion_splits(menu.expansions[cur.expansion]);
      for (int si = 0; si < static_cast<int>(splits.size()); ++si) {
        if (si == cur.split) continue;
        BlockChoice ch = cur;
        ch.split = si;
        if (accepts(ch)) alts.push_back(ch);
      }
      break;
    }
    case Slot::kExpansion: {
      // New ratio first; the split slot, when present, is re-resolved
      // uniformly among the new ratio's workable factorizations.
      std::vector<int> ratio_alts;
      for (int ei = 0; ei < static_cast<int>(menu.expansions.size()); ++ei) {
        if (ei == cur.expansion) continue;
        if (cur.split == kNoChoice) {
          BlockChoice ch = cur;
          ch.expansion = ei;
          if (accepts(ch)) ratio_alts.push_back(ei);
        } else {
          const auto splits = expansion_splits(menu.expansions[ei]);
          for (int si = 0; si < static_cast<int>(splits.size()); ++si) {
            BlockChoice ch = cur;
            ch.expansion = ei;
            ch.split = si;
            if (accepts(ch)) {
              ratio_alts.push_back(ei);
              break;
            }
          }
        }
      }
      if (ratio_alts.empty()) return c;
      const int ei = ratio_alts[rng.bounded(ratio_alts.size())];
      if (cur.split == kNoChoice) {
        BlockChoice ch = cur;
        ch.expansion = ei;
        alts.push_back(ch);
      } else {
        const auto splits = expansion_splits(menu.expansions[ei]);
        for (int si = 0; si < static_cast<int>(splits.size()); ++si) {
          BlockChoice ch = cur;
          ch.expansion = ei;
          ch.split = si;
          if (accepts(ch)) alts.push_back(ch);
        }
      }
      break;
    }
    case Slot::kVariant:
      for (int vi = 0; vi < static_cast<int>(menu.variants.size()); ++vi) {
        if (vi == cur.variant) continue;
        const ir::IbnVariant v = menu.variants[vi];
        const bool grouped = ir::variant_uses_groups(v);
        const bool generalized = v == ir::IbnVariant::kGeneralizedGc;
        const int gi_hi = grouped ? static_cast<int>(menu.group_sizes.size())
                                  : 1;
        const int si_hi =
            generalized
                ? static_cast<int>(
                      expansion_splits(menu.expansions[cur.expansion]).size())
                : 1;
        for (int gi = 0; gi < gi_hi; ++gi)
          for (int si = 0; si < si_hi; ++si) {
            BlockChoice ch = cur;
            ch.variant = vi;
            ch.group_size = grouped ? gi : kNoChoice;
            ch.split = generalized ? si : kNoChoice;
            if (accepts(ch)) alts.push_back(ch);
          }
      }
      break;
    case Slot::kMult:
      break;  // handled above
  }

  if (alts.empty()) return c;
  Candidate out = c;
  out.blocks[bi] = alts[rng.bounded(alts.size())];
  return out;
}

ir::ModelIr materialize(const Candidate& c, const SearchSpace& s) {
  check_menus(s);
  if (c.multiplier < 0 ||
      c.multiplier >= static_cast<int>(s.multipliers.size()))
    throw ValidationError("candidate multiplier index out of range");
  if (c.blocks.size() != s.blocks.size())
    throw ValidationError("candidate block count does not match space");

  ir::ModelIr m;
  m.name = candidate_key(c);
  m.input = s.input;

  ir::PlainConv stem;
  stem.kind = s.stem.k == 1 ? ir::OpKind::kPointwise : ir::OpKind::kConv2d;
  stem.in_c = s.input.c;
  stem.out_c = s.stem.out_c;
  stem.k = s.stem.k;
  stem.stride = s.stem.stride;
  m.items.emplace_back(stem);

  int in_c = s.stem.out_c;
  for (std::size_t bi = 0; bi < s.blocks.size(); ++bi) {
    const int out_c =
        scale_channels(s.blocks[bi].out_c, s.multipliers[c.multiplier]);
    std::optional<ir::IbnSpec> spec =
        resolve_block(s.blocks[bi], c.blocks[bi], in_c, out_c);
    if (!spec)
      throw ValidationError("candidate choice invalid at block " +
                            std::to_string(bi));
    m.items.emplace_back(*spec);
    in_c = out_c;
  }
  return m;
}

std::string candidate_key(const Candidate& c) {
  std::string key = "m" + std::to_string(c.multiplier);
  for (const BlockChoice& b : c.blocks) {
    key += ":v" + std::to_string(b.variant) + "k" + std::to_string(b.kernel) +
           "e" + std::to_string(b.expansion);
    if (b.group_size != kNoChoice) key += "g" + std::to_string(b.group_size);
    if (b.split != kNoChoice) key += "s" + std::to_string(b.split);
  }
  return key;
}

SearchSpace apply_block_filters(const SearchSpace& s,
                                const std::vector<FilterRule>& rules) {
  SearchSpace out = s;
  for (const FilterRule& rule : rules) {
    if (rule.block_index < 0 ||
        rule.block_index >= static_cast<int>(out.blocks.size()))
      throw ValidationError("filter rule references missing block " +
                            std::to_string(rule.block_index));
    BlockChoices& menu = out.blocks[rule.block_index];
    const std::string at = "block " + std::to_string(rule.block_index) + ": ";

    if (rule.field == "variant") {
      const std::optional<ir::IbnVariant> v = ir::parse_ibn_variant(rule.value);
      if (!v) throw ValidationError(at + "unknown variant " + rule.value);
      const auto it = std::find(menu.variants.begin(), menu.variants.end(), *v);
      if (it == menu.variants.end())
        throw ValidationError(at + rule.value + " is not in the menu");
      menu.variants.erase(it);
      if (menu.variants.empty())
        throw ValidationError(at + "empty variant menu after filters");
    } else if (rule.field == "kernel" || rule.field == "group_size") {
      int value = 0;
      try {
        value = std::stoi(rule.value);
      } catch (const std::exception&) {
        throw ValidationError(at + "bad integer value " + rule.value);
      }
      std::vector<int>& list =
          rule.field == "kernel" ? menu.kernels : menu.group_sizes;
      const auto it = std::find(list.begin(), list.end(), value);
      if (it == list.end())
        throw ValidationError(at + rule.value + " is not in the menu");
      list.erase(it);
      if (list.empty())
        throw ValidationError(at + "empty " + rule.field +
                              " menu after filters");
    } else {
      throw ValidationError("unknown filter field " + rule.field);
    }
  }
  validate_space(out);
  return out;
}

std::vector<Candidate> enumerate_space(const SearchSpace& s,
                                       std::size_t limit) {
  const SpaceIndex idx = build_index(s);
  std::vector<Candidate> out;
  for (std::size_t mi = 0; mi < idx.mults.size(); ++mi) {
    const SpaceIndex::PerMultiplier& pm = idx.mults[mi];
    if (!pm.usable) continue;
    std::vector<std::size_t> pos(pm.choices.size(), 0);
    for (;;) {
      Candidate c;
      c.multiplier = static_cast<int>(mi);
      for (std::size_t bi = 0; bi < pm.choices.size(); ++bi)
        c.blocks.push_back(pm.choices[bi][pos[bi]]);
      out.push_back(std::move(c));
      if (out.size() > limit)
        throw ValidationError("space exceeds enumeration limit");
      // Odometer, last block fastest.
      std::size_t bi = pm.choices.size();
      while (bi > 0) {
        --bi;
        if (++pos[bi] < pm.choices[bi].size()) break;
        pos[bi] = 0;
        if (bi == 0) goto next_multiplier;
      }
    }
  next_multiplier:;
  }
  return out;
}

}  // namespace nasforge::space
