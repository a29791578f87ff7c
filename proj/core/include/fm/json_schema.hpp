#pragma once

// Validator for the JSON Schema subset used by the shipped report schema:
// type, properties, required, additionalProperties (boolean), items,
// enum, const, minimum, maximum, exclusiveMinimum, minItems, maxItems,
// minLength, $ref to "#/$defs/<name>" and anyOf.

#include <string>
#include <vector>

#include "json.hpp"

namespace fm {

struct SchemaViolation {
  std::string pointer;  // JSON pointer into the instance
  std::string message;
};

std::vector<SchemaViolation> schema_violations(const nlohmann::json& schema,
                                               const nlohmann::json& instance);

// Throws ValidationError describing the first violation.
void validate_against_schema(const nlohmann::json& schema, const nlohmann::json& instance);

}  // namespace fm
