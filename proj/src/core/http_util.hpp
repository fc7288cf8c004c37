#pragma once

#include <string>
#include <utility>

namespace pathkit {

// Splits "http://host:port/some/path" into {"http://host:port", "/some/path"}.
// httplib clients take scheme+host+port only; the path goes on each request.
inline std::pair<std::string, std::string> split_endpoint(
    const std::string& endpoint) {
  std::size_t scheme = endpoint.find("://");
  std::size_t path_start = scheme == std::string::npos
                               ? endpoint.find('/')
                               : endpoint.find('/', scheme + 3);
  if (path_start == std::string::npos) return {endpoint, "/"};
  return {endpoint.substr(0, path_start), endpoint.substr(path_start)};
}

}  // namespace pathkit
