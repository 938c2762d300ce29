// SPDX-License-Identifier: Apache-2.0
//
// Strict JSON intake shared by every parser in the project: duplicate keys
// are rejected with a document path, unknown fields are rejected, required
// fields must be present with the right type. Lenient readers hide config
// mistakes until they surface as silently-wrong search results, so nothing
// here is optional.
#pragma once

#include <string>
#include <vector>

#include "json.hpp"

#include "nasforge/errors.hpp"

namespace nasforge::jsonx {

using json = nlohmann::json;

// Parses text, throwing SchemaError on malformed JSON or any duplicated
// object key anywhere in the document.
json parse_strict(const std::string& text);

// Field-by-field reader for one JSON object. Collects which keys were
// consumed; finish() rejects leftovers.
class ObjectReader {
 public:
  ObjectReader(const json& obj, std::string path);

  bool has(const std::string& key) const;

  const json& require(const std::string& key);
  const json* optional(const std::string& key);  // nullptr when absent

  std::int64_t require_int(const std::string& key);
  std::int64_t optional_int(const std::string& key, std::int64_t fallback);
  double require_real(const std::string& key);  // accepts integers too
  std::string require_string(const std::string& key);
  std::string optional_string(const std::string& key, std::string fallback);
  bool optional_bool(const std::string& key, bool fallback);

  // Throws if any key in the object was never consumed.
  void finish() const;

  std::string member_path(const std::string& key) const;
  const std::string& path() const { return path_; }

 private:
  const json& obj_;
  std::string path_;
  std::vector<std::string> seen_;
};

[[noreturn]] void fail(const std::string& path, const std::string& message);

}  // namespace nasforge::jsonx
