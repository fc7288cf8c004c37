#include "pathkit/core/diagnostics.hpp"

#include "pathkit/core/jsonl.hpp"

namespace pathkit {

void DiagnosticsSink::write_file(const std::string& path) const {
  AtomicFileWriter writer(path);
  for (const auto& d : items_) {
    ojson obj;
    obj["stage"] = d.stage;
    obj["id"] = d.id;
    obj["message"] = d.message;
    writer.write_line(obj);
  }
  writer.commit();
}

}  // namespace pathkit
