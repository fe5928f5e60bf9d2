// Schema contract between model output and executable actions: descriptors
// advertise tools to the model, calls and results cross back over the wire.
#pragma once

#include <json.hpp>

#include <map>
#include <string>
#include <vector>

namespace patchbench {

struct ParamSpec {
    std::string type;  // JSON-schema primitive: string, boolean, integer, number, array
    std::string description;
    bool operator==(const ParamSpec&) const = default;
};

struct ToolDescriptor {
    std::string name;
    std::string description;
    std::map<std::string, ParamSpec> properties;
    std::vector<std::string> required;  // every entry names a property
    bool operator==(const ToolDescriptor&) const = default;
};

// Function-calling wire shape:
// {"type":"function","function":{"name","description","parameters":
//   {"type":"object","properties":{...},"required":[...]}}}
nlohmann::json descriptor_to_json(const ToolDescriptor& d);
ToolDescriptor descriptor_from_json(const nlohmann::json& j);

struct ToolCall {
    std::string call_id;
    std::string name;
    nlohmann::json arguments;  // always an object
};

struct ToolResult {
    std::string call_id;
    bool ok = false;
    std::string payload;  // tool output, or the error message when !ok
};

}  // namespace patchbench
