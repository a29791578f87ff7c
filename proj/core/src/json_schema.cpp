#include "fm/json_schema.hpp"

#include <cmath>

#include "fm/error.hpp"

namespace fm {

namespace {

using nlohmann::json;

class Validator {
 public:
  explicit Validator(const json& root) : root_(root) {}

  void check(const json& schema, const json& value, const std::string& ptr) {
    if (schema.is_boolean()) {
      if (!schema.get<bool>()) fail(ptr, "no value allowed here");
      return;
    }
    if (auto it = schema.find("$ref"); it != schema.end()) {
      check(resolve(it->get<std::string>()), value, ptr);
      return;
    }
    if (auto it = schema.find("anyOf"); it != schema.end()) {
      bool ok = false;
      for (const auto& alt : *it) {
        Validator probe(root_);
        probe.check(alt, value, ptr);
        if (probe.out.empty()) {
          ok = true;
          break;
        }
      }
      if (!ok) fail(ptr, "matches no alternative of anyOf");
      return;
    }
    if (auto it = schema.find("type"); it != schema.end()) {
      bool ok = false;
      if (it->is_array()) {
        for (const auto& t : *it) ok = ok || has_type(value, t.get<std::string>());
      } else {
        ok = has_type(value, it->get<std::string>());
      }
      if (!ok) {
        fail(ptr, "expected type " + it->dump() + ", got " + value.type_name());
        return;
      }
    }
    if (auto it = schema.find("const"); it != schema.end() && *it != value)
      fail(ptr, "expected constant " + it->dump());
    if (auto it = schema.find("enum"); it != schema.end()) {
      bool found = false;
      for (const auto& e : *it) found = found || e == value;
      if (!found) fail(ptr, "value " + value.dump() + " not in enum");
    }
    if (value.is_number()) check_number(schema, value.get<double>(), ptr);
    if (value.is_string()) {
      if (auto it = schema.find("minLength");
          it != schema.end() && value.get<std::string>().size() < it->get<std::size_t>())
        fail(ptr, "string shorter than minLength");
    }
    if (value.is_array()) check_array(schema, value, ptr);
    if (value.is_object()) check_object(schema, value, ptr);
  }

  std::vector<SchemaViolation> out;

 private:
  static bool has_type(const json& v, const std::string& t) {
    if (t == "object") return v.is_object();
    if (t == "array") return v.is_array();
    if (t == "string") return v.is_string();
    if (t == "boolean") return v.is_boolean();
    if (t == "null") return v.is_null();
    if (t == "number") return v.is_number();
    if (t == "integer")
      return v.is_number_integer() ||
             (v.is_number_float() && std::floor(v.get<double>()) == v.get<double>());
    throw ValidationError("schema uses unknown type '" + t + "'");
  }

  const json& resolve(const std::string& ref) {
    const std::string prefix = "#/$defs/";
    if (ref.rfind(prefix, 0) != 0) throw ValidationError("unsupported $ref '" + ref + "'");
    const auto& defs = root_.at("$defs");
    auto it = defs.find(ref.substr(prefix.size()));
    if (it == defs.end()) throw ValidationError("unresolved $ref '" + ref + "'");
    return *it;
  }

  void check_number(const json& s, double x, const std::string& ptr) {
    if (!std::isfinite(x)) fail(ptr, "number is not finite");
    if (auto it = s.find("minimum"); it != s.end() && x < it->get<double>())
      fail(ptr, "below minimum " + it->dump());
    if (auto it = s.find("maximum"); it != s.end() && x > it->get<double>())
      fail(ptr, "above maximum " + it->dump());
    if (auto it = s.find("exclusiveMinimum"); it != s.end() && !(x > it->get<double>()))
      fail(ptr, "not above exclusiveMinimum " + it->dump());
  }

  void check_array(const json& s, const json& v, const std::string& ptr) {
    if (auto it = s.find("minItems"); it != s.end() && v.size() < it->get<std::size_t>())
      fail(ptr, "fewer than " + it->dump() + " items");
    if (auto it = s.find("maxItems"); it != s.end() && v.size() > it->get<std::size_t>())
      fail(ptr, "more than " + it->dump() + " items");
    if (auto it = s.find("items"); it != s.end())
      for (std::size_t i = 0; i < v.size(); ++i) check(*it, v[i], ptr + "/" + std::to_string(i));
  }

  void check_object(const json& s, const json& v, const std::string& ptr) {
    if (auto it = s.find("required"); it != s.end())
      for (const auto& key : *it)
        if (!v.contains(key.get<std::string>()))
          fail(ptr, "missing required property '" + key.get<std::string>() + "'");
    const auto props = s.find("properties");
    const auto extra = s.find("additionalProperties");
    for (auto it = v.begin(); it != v.end(); ++it) {
      const std::string child = ptr + "/" + it.key();
      if (props != s.end() && props->contains(it.key())) {
        check((*props)[it.key()], it.value(), child);
      } else if (extra != s.end()) {
        check(*extra, it.value(), child);
      }
    }
  }

  void fail(const std::string& ptr, std::string msg) {
    out.push_back({ptr.empty() ? "/" : ptr, std::move(msg)});
  }

  const json& root_;
};

}  // namespace

std::vector<SchemaViolation> schema_violations(const nlohmann::json& schema,
                                               const nlohmann::json& instance) {
  Validator v(schema);
  v.check(schema, instance, "");
  return std::move(v.out);
}

void validate_against_schema(const nlohmann::json& schema, const nlohmann::json& instance) {
  const auto violations = schema_violations(schema, instance);
  if (!violations.empty())
    throw ValidationError("schema violation at " + violations.front().pointer + ": " +
                          violations.front().message);
}

}  // namespace fm
