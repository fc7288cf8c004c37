#pragma once

#include <optional>
#include <string>
#include <vector>

#include "pathkit/core/jsonl.hpp"

namespace pathkit::service {

enum class ToolKind { classify, detect, generate, segment };

const char* to_string(ToolKind k);
ToolKind tool_kind_from_string(const std::string& s);

// One registered sub-model endpoint. The argument schema maps argument name
// to {"type": "string"|"number"|"integer"|"boolean", "required": bool}.
struct ToolDescriptor {
  std::string name;
  std::string endpoint;
  ToolKind kind = ToolKind::classify;
  ojson arg_schema = ojson::object();
};

class ToolRegistry {
 public:
  // Registry file: line-delimited ToolDescriptor objects
  // {name, endpoint, kind, args}. Duplicate names are an error.
  static ToolRegistry load(const std::string& path);

  void add(ToolDescriptor descriptor);
  const ToolDescriptor* find(const std::string& name) const;
  std::vector<std::string> names() const;
  std::size_t size() const { return tools_.size(); }

 private:
  std::vector<ToolDescriptor> tools_;
};

// Empty string when the arguments satisfy the schema; otherwise a message
// naming the offending argument.
std::string validate_arguments(const ToolDescriptor& tool, const ojson& args);

}  // namespace pathkit::service
