// SPDX-License-Identifier: Apache-2.0
#include "nasforge/serde.hpp"

#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <sstream>

#include "nasforge/errors.hpp"
#include "nasforge/json_strict.hpp"

namespace nasforge::serde {

using jsonx::ObjectReader;

double round6(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.6g", v);
  return std::strtod(buf, nullptr);
}

std::string format_real(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.6g", v);
  return buf;
}

namespace {

json real6(double v) { return json(round6(v)); }

int read_channels(ObjectReader& r, const std::string& key) {
  const std::int64_t v = r.require_int(key);
  if (v <= 0 || v > (1 << 24))
    jsonx::fail(r.member_path(key), "channel count out of range");
  return static_cast<int>(v);
}

ir::Rational rational_from_json(const json& v, const std::string& path) {
  if (v.is_number_integer() || v.is_number_unsigned()) {
    const std::int64_t n = v.get<std::int64_t>();
    if (n <= 0) jsonx::fail(path, "ratio must be positive");
    return ir::Rational{n, 1};
  }
  if (v.is_string()) {
    const auto r = ir::parse_rational(v.get<std::string>());
    if (!r || r->num <= 0)
      jsonx::fail(path, "expected a positive ratio like \"3\" or \"1/2\"");
    return *r;
  }
  jsonx::fail(path, "expected an integer or a \"num/den\" string");
}

json rational_to_json(const ir::Rational& r) {
  if (r.is_integer()) return json(r.num);
  return json(ir::to_string(r));
}

ir::TensorShape shape_from_json(const json& v, const std::string& path) {
  if (!v.is_array() || v.size() != 3)
    jsonx::fail(path, "expected [h, w, c]");
  int dims[3];
  for (int i = 0; i < 3; ++i) {
    if (!v[i].is_number_integer() && !v[i].is_number_unsigned())
      jsonx::fail(path, "expected [h, w, c] of integers");
    const std::int64_t d = v[i].get<std::int64_t>();
    if (d <= 0 || d > (1 << 20)) jsonx::fail(path, "shape dim out of range");
    dims[i] = static_cast<int>(d);
  }
  return ir::TensorShape{dims[0], dims[1], dims[2]};
}

json shape_to_json(const ir::TensorShape& s) {
  return json::array({s.h, s.w, s.c});
}

}  // namespace

// ----------------------------------------------------------------- model --

json model_to_json(const ir::ModelIr& m) {
  json blocks = json::array();
  for (const ir::ModelItem& item : m.items) {
    json b;
    if (std::holds_alternative<ir::PlainConv>(item)) {
      const ir::PlainConv& pc = std::get<ir::PlainConv>(item);
      b["variant"] =
          pc.kind == ir::OpKind::kPointwise ? "pointwise" : "conv2d";
      b["in_c"] = pc.in_c;
      b["out_c"] = pc.out_c;
      if (pc.kind != ir::OpKind::kPointwise) {
        b["k"] = pc.k;
        b["stride"] = pc.stride;
      }
    } else {
      const ir::IbnSpec& spec = std::get<ir::IbnSpec>(item);
      b["variant"] = ir::ibn_variant_name(spec.variant);
      b["in_c"] = spec.in_c;
      b["out_c"] = spec.out_c;
      b["k"] = spec.k;
      b["stride"] = spec.stride;
      b["m"] = rational_to_json(spec.expansion);
      if (spec.variant == ir::IbnVariant::kGeneralizedGc) {
        b["n"] = spec.split_n;
        b["p"] = spec.split_p;
      }
      if (ir::variant_uses_groups(spec.variant)) b["g"] = spec.groups;
      b["residual"] = spec.use_residual;
    }
    blocks.push_back(std::move(b));
  }
  json doc;
  doc["name"] = m.name;
  doc["input"] = shape_to_json(m.input);
  doc["blocks"] = std::move(blocks);
  return doc;
}

ir::ModelIr model_from_json(const json& doc, const std::string& path) {
  ObjectReader root(doc, path);
  ir::ModelIr m;
  m.name = root.require_string("name");
  m.input = shape_from_json(root.require("input"), root.member_path("input"));

  const json& blocks = root.require("blocks");
  if (!blocks.is_array())
    jsonx::fail(root.member_path("blocks"), "expected an array");
  for (std::size_t i = 0; i < blocks.size(); ++i) {
    const std::string bpath =
        root.member_path("blocks") + "/" + std::to_string(i);
    ObjectReader b(blocks[i], bpath);
    const std::string variant = b.require_string("variant");

    if (variant == "conv2d" || variant == "pointwise") {
      ir::PlainConv pc;
      pc.kind = variant == "pointwise" ? ir::OpKind::kPointwise
                                       : ir::OpKind::kConv2d;
      pc.in_c = read_channels(b, "in_c");
      pc.out_c = read_channels(b, "out_c");
      if (pc.kind == ir::OpKind::kPointwise) {
        pc.k = 1;
        pc.stride = 1;
      } else {
        pc.k = static_cast<int>(b.require_int("k"));
        pc.stride = static_cast<int>(b.require_int("stride"));
      }
      b.finish();
      m.items.emplace_back(pc);
      continue;
    }

    const auto v = ir::parse_ibn_variant(variant);
    if (!v) jsonx::fail(b.member_path("variant"), "unknown variant " + variant);
    ir::IbnSpec spec;
    spec.variant = *v;
    spec.in_c = read_channels(b, "in_c");
    spec.out_c = read_channels(b, "out_c");
    spec.k = static_cast<int>(b.require_int("k"));
    spec.stride = static_cast<int>(b.require_int("stride"));
    spec.expansion = rational_from_json(b.require("m"), b.member_path("m"));
    if (spec.variant == ir::IbnVariant::kGeneralizedGc) {
      spec.split_n = static_cast<int>(b.require_int("n"));
      spec.split_p = static_cast<int>(b.require_int("p"));
    }
    if (ir::variant_uses_groups(spec.variant))
      spec.groups = static_cast<int>(b.require_int("g"));
    spec.use_residual = b.optional_bool("residual", false);
    b.finish();
    m.items.emplace_back(spec);
  }
  root.finish();

  const std::vector<ir::Violation> violations = ir::validate_model(m);
  if (!violations.empty())
    throw ValidationError(violations.front().context + ": " +
                          violations.front().message);
  return m;
}

std::string emit_model(const ir::ModelIr& m) { return model_to_json(m).dump(); }

ir::ModelIr parse_model(const std::string& text) {
  return model_from_json(jsonx::parse_strict(text), "");
}

// ----------------------------------------------------------- accelerator --

json accel_to_json(const cost::AcceleratorConfig& cfg) {
  json doc;
  doc["mac_per_cycle"] = cfg.mac_per_cycle;
  doc["clock_ghz"] = real6(cfg.clock_ghz);
  doc["act_bw"] = cfg.act_bw;
  doc["param_bw"] = cfg.param_bw;
  doc["channel_tile"] = cfg.channel_tile;
  doc["op_overhead_cycles"] = cfg.op_overhead_cycles;
  doc["bytes_per_elem"] = cfg.bytes_per_elem;
  doc["e_mac"] = real6(cfg.e_mac);
  doc["e_act"] = real6(cfg.e_act);
  doc["e_param"] = real6(cfg.e_param);
  return doc;
}

cost::AcceleratorConfig accel_from_json(const json& doc,
                                        const std::string& path) {
  ObjectReader r(doc, path);
  cost::AcceleratorConfig cfg;
  cfg.mac_per_cycle = r.require_int("mac_per_cycle");
  cfg.clock_ghz = r.require_real("clock_ghz");
  cfg.act_bw = r.require_int("act_bw");
  cfg.param_bw = r.require_int("param_bw");
  cfg.channel_tile = r.require_int("channel_tile");
  cfg.op_overhead_cycles = r.require_int("op_overhead_cycles");
  cfg.bytes_per_elem = r.require_int("bytes_per_elem");
  cfg.e_mac = r.require_real("e_mac");
  cfg.e_act = r.require_real("e_act");
  cfg.e_param = r.require_real("e_param");
  r.finish();
  cfg.validate();
  return cfg;
}

// --------------------------------------------------------------- metrics --

json totals_to_json(const cost::ModelTotals& t) {
  json doc;
  doc["cycles"] = t.cycles;
  doc["latency_us"] = real6(t.latency_us);
  doc["macs"] = t.macs;
  doc["params"] = t.params;
  doc["act_bytes"] = t.act_bytes;
  doc["param_bytes"] = t.param_bytes;
  doc["utilization"] = real6(t.utilization);
  doc["energy_mj"] = real6(t.energy_mj);
  return doc;
}

json metrics_to_json(const cost::ModelMetrics& m, bool per_op) {
  json doc;
  doc["totals"] = totals_to_json(m.totals);
  if (per_op) {
    json ops = json::array();
    for (const cost::OpMetrics& op : m.per_op) {
      json o;
      o["name"] = op.name;
      o["kind"] = ir::op_kind_name(op.kind);
      o["cycles"] = op.cycles;
      o["latency_us"] = real6(op.latency_us);
      o["macs"] = op.macs;
      o["params"] = op.params;
      o["act_bytes"] = op.act_bytes;
      o["param_bytes"] = op.param_bytes;
      o["utilization"] = real6(op.utilization);
      o["energy_mj"] = real6(op.energy_mj);
      o["bound"] = cost::bound_kind_name(op.bound);
      ops.push_back(std::move(o));
    }
    doc["per_op"] = std::move(ops);
  }
  return doc;
}

namespace {

std::uint64_t read_u64(ObjectReader& r, const std::string& key) {
  const json& v = r.require(key);
  if (!v.is_number_integer() && !v.is_number_unsigned())
    jsonx::fail(r.member_path(key), "expected an integer");
  return v.get<std::uint64_t>();
}

}  // namespace

cost::ModelTotals totals_from_json(const json& doc, const std::string& path) {
  ObjectReader r(doc, path);
  cost::ModelTotals t;
  t.cycles = read_u64(r, "cycles");
  t.latency_us = r.require_real("latency_us");
  t.macs = read_u64(r, "macs");
  t.params = read_u64(r, "params");
  t.act_bytes = read_u64(r, "act_bytes");
  t.param_bytes = read_u64(r, "param_bytes");
  t.utilization = r.require_real("utilization");
  t.energy_mj = r.require_real("energy_mj");
  r.finish();
  return t;
}

cost::ModelMetrics metrics_from_json(const json& doc,
                                     const std::string& path) {
  ObjectReader r(doc, path);
  cost::ModelMetrics m;
  m.totals = totals_from_json(r.require("totals"), r.member_path("totals"));
  if (const json* ops = r.optional("per_op")) {
    if (!ops->is_array())
      jsonx::fail(r.member_path("per_op"), "expected an array");
    for (std::size_t i = 0; i < ops->size(); ++i) {
      const std::string opath =
          r.member_path("per_op") + "/" + std::to_string(i);
      ObjectReader o((*ops)[i], opath);
      cost::OpMetrics om;
      om.name = o.require_string("name");
      const std::string kind = o.require_string("kind");
      bool found = false;
      for (int k = 0; k <= static_cast<int>(ir::OpKind::kResidualAdd); ++k) {
        if (kind == ir::op_kind_name(static_cast<ir::OpKind>(k))) {
          om.kind = static_cast<ir::OpKind>(k);
          found = true;
          break;
        }
      }
      if (!found) jsonx::fail(o.member_path("kind"), "unknown op kind");
      om.cycles = read_u64(o, "cycles");
      om.latency_us = o.require_real("latency_us");
      om.macs = read_u64(o, "macs");
      om.params = read_u64(o, "params");
      om.act_bytes = read_u64(o, "act_bytes");
      om.param_bytes = read_u64(o, "param_bytes");
      om.utilization = o.require_real("utilization");
      om.energy_mj = o.require_real("energy_mj");
      const std::string bound = o.require_string("bound");
      if (bound == "compute")
        om.bound = cost::BoundKind::kCompute;
      else if (bound == "act_bw")
        om.bound = cost::BoundKind::kActBandwidth;
      else if (bound == "param_bw")
        om.bound = cost::BoundKind::kParamBandwidth;
      else
        jsonx::fail(o.member_path("bound"), "unknown bound kind");
      o.finish();
      m.per_op.push_back(std::move(om));
    }
  }
  r.finish();
  return m;
}

// ----------------------------------------------------------------- space --

ParsedSpace parse_space(const std::string& text) {
  const json doc = jsonx::parse_strict(text);
  ObjectReader root(doc, "");

  ParsedSpace out;
  space::SearchSpace& s = out.space;
  s.input = shape_from_json(root.require("input"), root.member_path("input"));

  {
    ObjectReader stem(root.require("stem"), root.member_path("stem"));
    s.stem.out_c = read_channels(stem, "out_c");
    s.stem.k = static_cast<int>(stem.optional_int("k", 3));
    s.stem.stride = static_cast<int>(stem.optional_int("stride", 2));
    stem.finish();
  }

  if (const json* mults = root.optional("multipliers")) {
    if (!mults->is_array() || mults->empty())
      jsonx::fail(root.member_path("multipliers"),
                  "expected a non-empty array");
    for (std::size_t i = 0; i < mults->size(); ++i)
      s.multipliers.push_back(rational_from_json(
          (*mults)[i],
          root.member_path("multipliers") + "/" + std::to_string(i)));
  } else {
    s.multipliers = {ir::Rational{1, 4}, ir::Rational{1, 2},
                     ir::Rational{3, 4}, ir::Rational{1, 1},
                     ir::Rational{2, 1}};
  }

  const json& blocks = root.require("blocks");
  if (!blocks.is_array() || blocks.empty())
    jsonx::fail(root.member_path("blocks"), "expected a non-empty array");
  for (std::size_t i = 0; i < blocks.size(); ++i) {
    const std::string bpath =
        root.member_path("blocks") + "/" + std::to_string(i);
    ObjectReader b(blocks[i], bpath);
    space::BlockChoices menu;

    const json& variants = b.require("variants");
    if (!variants.is_array() || variants.empty())
      jsonx::fail(b.member_path("variants"), "expected a non-empty array");
    for (const json& v : variants) {
      if (!v.is_string())
        jsonx::fail(b.member_path("variants"), "expected variant names");
      const auto parsed = ir::parse_ibn_variant(v.get<std::string>());
      if (!parsed)
        jsonx::fail(b.member_path("variants"),
                    "unknown variant " + v.get<std::string>());
      menu.variants.push_back(*parsed);
    }

    const json& kernels = b.require("kernels");
    if (!kernels.is_array() || kernels.empty())
      jsonx::fail(b.member_path("kernels"), "expected a non-empty array");
    for (const json& k : kernels) {
      if (!k.is_number_integer() && !k.is_number_unsigned())
        jsonx::fail(b.member_path("kernels"), "expected integers");
      menu.kernels.push_back(k.get<int>());
    }

    const json& expansions = b.require("expansions");
    if (!expansions.is_array() || expansions.empty())
      jsonx::fail(b.member_path("expansions"), "expected a non-empty array");
    for (std::size_t e = 0; e < expansions.size(); ++e)
      menu.expansions.push_back(rational_from_json(
          expansions[e], b.member_path("expansions") + "/" +
                             std::to_string(e)));

    if (const json* sizes = b.optional("group_sizes")) {
      if (!sizes->is_array())
        jsonx::fail(b.member_path("group_sizes"), "expected an array");
      for (const json& g : *sizes) {
        if (!g.is_number_integer() && !g.is_number_unsigned())
          jsonx::fail(b.member_path("group_sizes"), "expected integers");
        const int gs = g.get<int>();
        // Sub-minimum sizes are pruned, not fatal: the rest of the menu
        // may still be usable.
        if (gs < space::kMinGroupSize) {
          out.warnings.push_back("block " + std::to_string(i) +
                                 ": group size " + std::to_string(gs) +
                                 " below minimum " +
                                 std::to_string(space::kMinGroupSize) +
                                 ", pruned");
          continue;
        }
        menu.group_sizes.push_back(gs);
      }
    } else {
      menu.group_sizes = {32, 64};
    }

    menu.out_c = read_channels(b, "out_c");
    menu.stride = static_cast<int>(b.optional_int("stride", 1));
    menu.allow_residual = b.optional_bool("allow_residual", true);
    b.finish();
    s.blocks.push_back(std::move(menu));
  }
  root.finish();

  std::vector<std::string> more = space::validate_space(s);
  out.warnings.insert(out.warnings.end(), more.begin(), more.end());
  return out;
}

json space_to_json(const space::SearchSpace& s) {
  json doc;
  doc["input"] = shape_to_json(s.input);
  json stem;
  stem["out_c"] = s.stem.out_c;
  stem["k"] = s.stem.k;
  stem["stride"] = s.stem.stride;
  doc["stem"] = std::move(stem);
  json mults = json::array();
  for (const ir::Rational& m : s.multipliers)
    mults.push_back(rational_to_json(m));
  doc["multipliers"] = std::move(mults);
  json blocks = json::array();
  for (const space::BlockChoices& b : s.blocks) {
    json menu;
    json variants = json::array();
    for (ir::IbnVariant v : b.variants)
      variants.push_back(ir::ibn_variant_name(v));
    menu["variants"] = std::move(variants);
    menu["kernels"] = b.kernels;
    json expansions = json::array();
    for (const ir::Rational& e : b.expansions)
      expansions.push_back(rational_to_json(e));
    menu["expansions"] = std::move(expansions);
    menu["group_sizes"] = b.group_sizes;
    menu["out_c"] = b.out_c;
    menu["stride"] = b.stride;
    menu["allow_residual"] = b.allow_residual;
    blocks.push_back(std::move(menu));
  }
  doc["blocks"] = std::move(blocks);
  return doc;
}

std::string emit_space(const space::SearchSpace& s) {
  return space_to_json(s).dump(2) + "\n";
}

json candidate_to_json(const space::Candidate& c) {
  json blocks = json::array();
  for (const space::BlockChoice& b : c.blocks)
    blocks.push_back(
        json::array({b.variant, b.kernel, b.expansion, b.group_size, b.split}));
  json doc;
  doc["multiplier"] = c.multiplier;
  doc["blocks"] = std::move(blocks);
  return doc;
}

space::Candidate candidate_from_json(const json& doc,
                                     const std::string& path) {
  ObjectReader r(doc, path);
  space::Candidate c;
  c.multiplier = static_cast<int>(r.require_int("multiplier"));
  const json& blocks = r.require("blocks");
  if (!blocks.is_array())
    jsonx::fail(r.member_path("blocks"), "expected an array");
  for (const json& b : blocks) {
    if (!b.is_array() || b.size() != 5)
      jsonx::fail(r.member_path("blocks"),
                  "expected [variant, kernel, expansion, group_size, split]");
    space::BlockChoice ch;
    ch.variant = b[0].get<int>();
    ch.kernel = b[1].get<int>();
    ch.expansion = b[2].get<int>();
    ch.group_size = b[3].get<int>();
    ch.split = b[4].get<int>();
    c.blocks.push_back(ch);
  }
  r.finish();
  return c;
}

std::vector<space::FilterRule> filter_rules_from_json(
    const json& doc, const std::string& path) {
  if (!doc.is_array()) jsonx::fail(path, "expected an array of rules");
  std::vector<space::FilterRule> rules;
  for (std::size_t i = 0; i < doc.size(); ++i) {
    const std::string rpath = path + "/" + std::to_string(i);
    ObjectReader r(doc[i], rpath);
    space::FilterRule rule;
    rule.block_index = static_cast<int>(r.require_int("block_index"));
    const json& drop = r.require("drop");
    ObjectReader d(drop, r.member_path("drop"));
    int fields = 0;
    for (const char* field : {"variant", "kernel", "group_size"}) {
      if (!d.has(field)) continue;
      ++fields;
      rule.field = field;
      const json& v = d.require(field);
      if (v.is_string())
        rule.value = v.get<std::string>();
      else if (v.is_number_integer() || v.is_number_unsigned())
        rule.value = std::to_string(v.get<std::int64_t>());
      else
        jsonx::fail(d.member_path(field), "expected a string or integer");
    }
    if (fields != 1)
      jsonx::fail(r.member_path("drop"),
                  "expected exactly one of variant/kernel/group_size");
    d.finish();
    rule.note = r.optional_string("note", "");
    r.finish();
    rules.push_back(std::move(rule));
  }
  return rules;
}

json filter_rules_to_json(const std::vector<space::FilterRule>& rules) {
  json doc = json::array();
  for (const space::FilterRule& rule : rules) {
    json drop;
    if (rule.field == "variant")
      drop[rule.field] = rule.value;
    else
      drop[rule.field] = std::stoll(rule.value);
    json r;
    r["block_index"] = rule.block_index;
    r["drop"] = std::move(drop);
    if (!rule.note.empty()) r["note"] = rule.note;
    doc.push_back(std::move(r));
  }
  return doc;
}

// ------------------------------------------------------------------ file --

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path);
  std::ostringstream buf;
  buf << in.rdbuf();
  if (in.bad()) throw IoError("read failed for " + path);
  return buf.str();
}

void write_file(const std::string& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot create " + path);
  out << content;
  out.flush();
  if (!out) throw IoError("write failed for " + path);
}

}  // namespace nasforge::serde

namespace nasforge::cost {

AcceleratorConfig parse_accelerator_config(const std::string& json_text) {
  return serde::accel_from_json(jsonx::parse_strict(json_text), "");
}

AcceleratorConfig load_accelerator_config(const std::string& path) {
  return parse_accelerator_config(serde::read_file(path));
}

std::string emit_accelerator_config(const AcceleratorConfig& cfg) {
  return serde::accel_to_json(cfg).dump(2) + "\n";
}

}  // namespace nasforge::cost
