#include "pdial/http_transport.hpp"

#include <cstdlib>

#include "httplib.h"
#include "pdial/errors.hpp"

namespace pdial::http {

Endpoint parse_endpoint(const std::string& url) {
  const auto scheme_end = url.find("://");
  if (scheme_end == std::string::npos) {
    throw ConfigError("endpoint URL '" + url + "' has no scheme (expected http:// or https://)");
  }
  const std::string scheme = url.substr(0, scheme_end);
  if (scheme != "http" && scheme != "https") {
    throw ConfigError("unsupported URL scheme '" + scheme + "' in '" + url + "'");
  }
  const auto path_start = url.find('/', scheme_end + 3);
  Endpoint ep;
  if (path_start == std::string::npos) {
    ep.origin = url;
    ep.path = "/";
  } else {
    ep.origin = url.substr(0, path_start);
    ep.path = url.substr(path_start);
  }
  if (ep.origin.size() <= scheme_end + 3) {
    throw ConfigError("endpoint URL '" + url + "' has no host");
  }
  return ep;
}

std::optional<std::string> api_key_from_env() {
  const char* key = std::getenv("PD_API_KEY");
  if (key == nullptr || *key == '\0') return std::nullopt;
  return std::string(key);
}

Response post_json(const std::string& url, const std::string& body,
                   std::chrono::duration<double> timeout) {
  const Endpoint ep = parse_endpoint(url);
  httplib::Client client(ep.origin);
  if (!client.is_valid()) {
    throw ConfigError("cannot create HTTP client for '" + ep.origin +
                      "' (https requires OpenSSL support)");
  }
  const auto usec = std::chrono::duration_cast<std::chrono::microseconds>(timeout);
  client.set_connection_timeout(usec);
  client.set_read_timeout(usec);
  client.set_write_timeout(usec);

  httplib::Headers headers;
  if (auto key = api_key_from_env()) headers.emplace("Authorization", "Bearer " + *key);

  auto res = client.Post(ep.path, headers, body, "application/json");
  if (!res) {
    throw BackendError("POST " + url + " failed: " + httplib::to_string(res.error()), 0, true);
  }
  return Response{res->status, res->body};
}

}  // namespace pdial::http
