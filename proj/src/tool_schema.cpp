#include "patchbench/tool_schema.hpp"

#include "patchbench/errors.hpp"

using nlohmann::json;

namespace patchbench {

json descriptor_to_json(const ToolDescriptor& d) {
    json properties = json::object();
    for (const auto& [name, spec] : d.properties)
        properties[name] = {{"type", spec.type}, {"description", spec.description}};
    return json{{"type", "function"},
                {"function",
                 {{"name", d.name},
                  {"description", d.description},
                  {"parameters",
                   {{"type", "object"}, {"properties", properties}, {"required", d.required}}}}}};
}

ToolDescriptor descriptor_from_json(const json& j) {
    try {
        if (j.value("type", "") != "function")
            throw ProtocolError("tool descriptor must have type 'function'");
        const json& fn = j.at("function");
        ToolDescriptor d;
        d.name = fn.at("name").get<std::string>();
        d.description = fn.at("description").get<std::string>();
        const json& params = fn.at("parameters");
        for (const auto& [name, spec] : params.at("properties").items())
            d.properties[name] = ParamSpec{spec.value("type", "string"),
                                           spec.value("description", "")};
        d.required = params.value("required", std::vector<std::string>{});
        return d;
    } catch (const json::exception& e) {
        throw ProtocolError(std::string("malformed tool descriptor: ") + e.what());
    }
}

}  // namespace patchbench
