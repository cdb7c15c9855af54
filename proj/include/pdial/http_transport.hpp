#pragma once

#include <chrono>
#include <optional>
#include <string>

namespace pdial::http {

struct Endpoint {
  std::string origin;  // scheme://host[:port]
  std::string path;    // always starts with '/'
};

/// Splits "http://host:port/v1/embeddings" into origin and path.
Endpoint parse_endpoint(const std::string& url);

struct Response {
  int status = 0;
  std::string body;
};

/// POSTs a JSON body. Adds `Authorization: Bearer $PD_API_KEY` when the
/// variable is set. Transport failures throw a retriable BackendError;
/// non-2xx statuses are returned to the caller.
Response post_json(const std::string& url, const std::string& body,
                   std::chrono::duration<double> timeout);

std::optional<std::string> api_key_from_env();

}  // namespace pdial::http
