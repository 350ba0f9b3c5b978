#pragma once
// Strict JSON helpers shared by every file format: required fields raise
// missing_field, unknown fields raise malformed, and serialization is
// canonical (nlohmann keeps object keys sorted).

#include "knowflow/errors.hpp"

#include <json.hpp>

#include <initializer_list>
#include <string>

namespace knowflow {

using Json = nlohmann::json;

namespace jsonio {

// Parses a JSON document, mapping syntax errors to Errc::malformed.
Json parse_text(const std::string& text, const std::string& what = "document");

Json load_file(const std::string& path);
void write_file_atomic(const std::string& path, const std::string& content);
void append_file(const std::string& path, const std::string& content);

const Json& require(const Json& object, const std::string& field, const std::string& what);
void expect_object(const Json& value, const std::string& what);
void expect_array(const Json& value, const std::string& what);

// Rejects fields outside `allowed`.
void expect_keys(const Json& object, std::initializer_list<const char*> allowed,
                 const std::string& what);

std::string require_string(const Json& object, const std::string& field, const std::string& what);
bool require_bool(const Json& object, const std::string& field, const std::string& what);

std::string get_string(const Json& object, const std::string& field, const std::string& fallback);

}  // namespace jsonio

}  // namespace knowflow
