#pragma once

#include <optional>
#include <string>

#include <json.hpp>

#include "orthotune/common.hpp"

namespace orthotune {

/// Validator for the JSON Schema subset used by the report schemas shipped
/// in schemas/: type, properties, required, additionalProperties (boolean),
/// items, enum, const, minimum, maximum, minItems. Returns the first
/// violation found, or nullopt when the instance conforms.
inline std::optional<std::string> validate_schema(const nlohmann::json& schema,
                                                  const nlohmann::json& value,
                                                  const std::string& where = "$") {
  using nlohmann::json;

  if (schema.contains("const")) {
    if (value != schema["const"]) return where + ": does not match const";
  }
  if (schema.contains("enum")) {
    bool hit = false;
    for (const auto& v : schema["enum"]) hit = hit || v == value;
    if (!hit) return where + ": not in enum";
  }
  if (schema.contains("type")) {
    const std::string t = schema["type"].get<std::string>();
    const bool ok = (t == "object" && value.is_object()) || (t == "array" && value.is_array()) ||
                    (t == "string" && value.is_string()) ||
                    (t == "number" && value.is_number()) ||
                    (t == "integer" && value.is_number_integer()) ||
                    (t == "boolean" && value.is_boolean()) || (t == "null" && value.is_null());
    if (!ok) return where + ": expected type " + t;
  }
  if (value.is_number()) {
    if (schema.contains("minimum") && value.get<double>() < schema["minimum"].get<double>())
      return where + ": below minimum";
    if (schema.contains("maximum") && value.get<double>() > schema["maximum"].get<double>())
      return where + ": above maximum";
  }
  if (value.is_object()) {
    if (schema.contains("required"))
      for (const auto& key : schema["required"])
        if (!value.contains(key.get<std::string>()))
          return where + ": missing required key '" + key.get<std::string>() + "'";
    const json props = schema.value("properties", json::object());
    for (const auto& [key, sub] : value.items()) {
      if (props.contains(key)) {
        if (auto err = validate_schema(props[key], sub, where + "." + key)) return err;
      } else if (schema.contains("additionalProperties") &&
                 schema["additionalProperties"].is_boolean() &&
                 !schema["additionalProperties"].get<bool>()) {
        return where + ": unexpected key '" + key + "'";
      }
    }
  }
  if (value.is_array()) {
    if (schema.contains("minItems") && value.size() < schema["minItems"].get<std::size_t>())
      return where + ": fewer than minItems";
    if (schema.contains("items")) {
      std::size_t i = 0;
      for (const auto& item : value) {
        if (auto err = validate_schema(schema["items"], item,
                                       where + "[" + std::to_string(i) + "]"))
          return err;
        ++i;
      }
    }
  }
  return std::nullopt;
}

}  // namespace orthotune
