// SPDX-License-Identifier: Apache-2.0
#include "nasforge/json_strict.hpp"

#include <algorithm>

namespace nasforge::jsonx {

namespace {

// SAX walker that only tracks object keys per nesting level, building a
// JSON-pointer-ish path for error messages. The DOM is parsed separately;
// this pass exists because a DOM parser silently keeps one of two
// duplicate keys.
class DupKeyScanner {
 public:
  bool null() { return value(); }
  bool boolean(bool) { return value(); }
  bool number_integer(json::number_integer_t) { return value(); }
  bool number_unsigned(json::number_unsigned_t) { return value(); }
  bool number_float(json::number_float_t, const std::string&) {
    return value();
  }
  bool string(std::string&) { return value(); }
  bool binary(json::binary_t&) { return value(); }

  bool start_object(std::size_t) {
    frames_.push_back(Frame{false, {}, "", 0});
    return true;
  }
  bool key(std::string& k) {
    Frame& f = frames_.back();
    if (std::find(f.keys.begin(), f.keys.end(), k) != f.keys.end())
      fail(path() + "/" + k, "duplicate field");
    f.keys.push_back(k);
    f.pending_key = k;
    return true;
  }
  bool end_object() {
    frames_.pop_back();
    return value();
  }
  bool start_array(std::size_t) {
    frames_.push_back(Frame{true, {}, "", 0});
    return true;
  }
  bool end_array() {
    frames_.pop_back();
    return value();
  }
  bool parse_error(std::size_t position, const std::string&,
                   const nlohmann::detail::exception& ex) {
    fail("", std::string("parse error at byte ") + std::to_string(position) +
                 ": " + ex.what());
  }

 private:
  struct Frame {
    bool is_array = false;
    std::vector<std::string> keys;
    std::string pending_key;
    std::size_t index = 0;
  };

  // A completed value bumps the enclosing array index.
  bool value() {
    if (!frames_.empty() && frames_.back().is_array) ++frames_.back().index;
    return true;
  }

  std::string path() const {
    std::string p;
    for (const Frame& f : frames_) {
      if (f.is_array)
        p += "/" + std::to_string(f.index);
      else if (!f.pending_key.empty())
        p += "/" + f.pending_key;
    }
    return p;
  }

  std::vector<Frame> frames_;
};

const char* type_name(const json& v) { return v.type_name(); }

}  // namespace

void fail(const std::string& path, const std::string& message) {
  throw SchemaError(path, message);
}

json parse_strict(const std::string& text) {
  DupKeyScanner scanner;
  if (!json::sax_parse(text, &scanner))
    fail("", "malformed document");
  return json::parse(text);
}

ObjectReader::ObjectReader(const json& obj, std::string path)
    : obj_(obj), path_(std::move(path)) {
  if (!obj_.is_object()) fail(path_, "expected an object");
}

std::string ObjectReader::member_path(const std::string& key) const {
  return path_ + "/" + key;
}

bool ObjectReader::has(const std::string& key) const {
  return obj_.contains(key);
}

const json& ObjectReader::require(const std::string& key) {
  if (!obj_.contains(key)) fail(path_, "missing field \"" + key + "\"");
  seen_.push_back(key);
  return obj_.at(key);
}

const json* ObjectReader::optional(const std::string& key) {
  if (!obj_.contains(key)) return nullptr;
  seen_.push_back(key);
  return &obj_.at(key);
}

std::int64_t ObjectReader::require_int(const std::string& key) {
  const json& v = require(key);
  if (!v.is_number_integer() && !v.is_number_unsigned())
    fail(member_path(key),
         std::string("expected an integer, got ") + type_name(v));
  return v.get<std::int64_t>();
}

std::int64_t ObjectReader::optional_int(const std::string& key,
                                        std::int64_t fallback) {
  if (!has(key)) return fallback;
  return require_int(key);
}

double ObjectReader::require_real(const std::string& key) {
  const json& v = require(key);
  if (!v.is_number())
    fail(member_path(key),
         std::string("expected a number, got ") + type_name(v));
  return v.get<double>();
}

std::string ObjectReader::require_string(const std::string& key) {
  const json& v = require(key);
  if (!v.is_string())
    fail(member_path(key),
         std::string("expected a string, got ") + type_name(v));
  return v.get<std::string>();
}

std::string ObjectReader::optional_string(const std::string& key,
                                          std::string fallback) {
  const json* v = optional(key);
  if (v == nullptr) return fallback;
  if (!v->is_string())
    fail(member_path(key),
         std::string("expected a string, got ") + type_name(*v));
  return v->get<std::string>();
}

bool ObjectReader::optional_bool(const std::string& key, bool fallback) {
  const json* v = optional(key);
  if (v == nullptr) return fallback;
  if (!v->is_boolean())
    fail(member_path(key),
         std::string("expected a boolean, got ") + type_name(*v));
  return v->get<bool>();
}

void ObjectReader::finish() const {
  for (auto it = obj_.begin(); it != obj_.end(); ++it) {
    if (std::find(seen_.begin(), seen_.end(), it.key()) == seen_.end())
      fail(path_, "unknown field \"" + it.key() + "\"");
  }
}

}  // namespace nasforge::jsonx
