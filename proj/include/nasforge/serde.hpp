// SPDX-License-Identifier: Apache-2.0
//
// Structured-text (JSON) forms for the project's value types. Parsers are
// strict (unknown and duplicate fields rejected, see json_strict.hpp) and
// emitters are deterministic: object keys serialize in sorted order and
// every real number is first snapped to 6 significant digits, so identical
// values always produce identical bytes.
#pragma once

#include <string>
#include <vector>

#include "json.hpp"

#include "nasforge/cost.hpp"
#include "nasforge/ir.hpp"
#include "nasforge/space.hpp"

namespace nasforge::serde {

using json = nlohmann::json;

// Decimal formatting contract for reals: 6 significant digits. Integers
// stay exact. round6 is idempotent, so parse -> emit round-trips bytes.
double round6(double v);
std::string format_real(double v);

// ----------------------------------------------------------------- model --

json model_to_json(const ir::ModelIr& m);
ir::ModelIr model_from_json(const json& doc, const std::string& path);
std::string emit_model(const ir::ModelIr& m);
ir::ModelIr parse_model(const std::string& text);

// ------------------------------------------------------------ accelerator --

json accel_to_json(const cost::AcceleratorConfig& cfg);
cost::AcceleratorConfig accel_from_json(const json& doc,
                                        const std::string& path);

// --------------------------------------------------------------- metrics --

json totals_to_json(const cost::ModelTotals& t);
json metrics_to_json(const cost::ModelMetrics& m, bool per_op);
cost::ModelTotals totals_from_json(const json& doc, const std::string& path);
cost::ModelMetrics metrics_from_json(const json& doc, const std::string& path);

// ----------------------------------------------------------------- space --

struct ParsedSpace {
  space::SearchSpace space;
  std::vector<std::string> warnings;
};

// Parses, prunes sub-minimum group sizes with a warning, and validates
// that at least one candidate survives.
ParsedSpace parse_space(const std::string& text);
json space_to_json(const space::SearchSpace& s);
std::string emit_space(const space::SearchSpace& s);

json candidate_to_json(const space::Candidate& c);
space::Candidate candidate_from_json(const json& doc, const std::string& path);

std::vector<space::FilterRule> filter_rules_from_json(
    const json& doc, const std::string& path);
json filter_rules_to_json(const std::vector<space::FilterRule>& rules);

// ------------------------------------------------------------------ file --

std::string read_file(const std::string& path);           // throws IoError
void write_file(const std::string& path, const std::string& content);

}  // namespace nasforge::serde
