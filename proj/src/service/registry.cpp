#include "pathkit/service/registry.hpp"

#include "pathkit/core/error.hpp"

namespace pathkit::service {

const char* to_string(ToolKind k) {
  switch (k) {
    case ToolKind::classify:
      return "classify";
    case ToolKind::detect:
      return "detect";
    case ToolKind::generate:
      return "generate";
    case ToolKind::segment:
      return "segment";
  }
  return "classify";
}

ToolKind tool_kind_from_string(const std::string& s) {
  if (s == "classify") return ToolKind::classify;
  if (s == "detect") return ToolKind::detect;
  if (s == "generate") return ToolKind::generate;
  if (s == "segment") return ToolKind::segment;
  throw Error("unknown tool kind: " + s);
}

ToolRegistry ToolRegistry::load(const std::string& path) {
  ToolRegistry registry;
  for_each_jsonl_file(path, [&](std::size_t offset, const ojson& obj) {
    if (!obj.contains("name") || !obj.contains("endpoint") ||
        !obj.contains("kind")) {
      throw FramingError("registry line missing name/endpoint/kind", offset);
    }
    ToolDescriptor d;
    d.name = obj["name"].get<std::string>();
    d.endpoint = obj["endpoint"].get<std::string>();
    d.kind = tool_kind_from_string(obj["kind"].get<std::string>());
    if (obj.contains("args")) d.arg_schema = obj["args"];
    registry.add(std::move(d));
  });
  return registry;
}

void ToolRegistry::add(ToolDescriptor descriptor) {
  if (descriptor.name.empty()) throw Error("tool name must be non-empty");
  if (find(descriptor.name)) {
    throw Error("duplicate tool name in registry: " + descriptor.name);
  }
  tools_.push_back(std::move(descriptor));
}

const ToolDescriptor* ToolRegistry::find(const std::string& name) const {
  for (const auto& t : tools_) {
    if (t.name == name) return &t;
  }
  return nullptr;
}

std::vector<std::string> ToolRegistry::names() const {
  std::vector<std::string> out;
  out.reserve(tools_.size());
  for (const auto& t : tools_) out.push_back(t.name);
  return out;
}

std::string validate_arguments(const ToolDescriptor& tool, const ojson& args) {
  if (!args.is_object()) return "arguments must be an object";
  for (auto it = args.begin(); it != args.end(); ++it) {
    if (!tool.arg_schema.contains(it.key())) {
      return "unknown argument \"" + it.key() + "\" for tool " + tool.name;
    }
    const auto& decl = tool.arg_schema.at(it.key());
    std::string type = decl.value("type", std::string("string"));
    const auto& v = it.value();
    bool ok = (type == "string" && v.is_string()) ||
              (type == "number" && v.is_number()) ||
              (type == "integer" && v.is_number_integer()) ||
              (type == "boolean" && v.is_boolean());
    if (!ok) {
      return "argument \"" + it.key() + "\" must be of type " + type;
    }
  }
  for (auto it = tool.arg_schema.begin(); it != tool.arg_schema.end(); ++it) {
    if (it.value().is_object() && it.value().value("required", false) &&
        !args.contains(it.key())) {
      return "missing required argument \"" + it.key() + "\"";
    }
  }
  return "";
}

}  // namespace pathkit::service
