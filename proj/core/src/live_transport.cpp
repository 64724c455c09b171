// HTTP transport for the live oracle, isolated here so httplib's header
// stays out of every other translation unit.

#ifdef RUMORGRAPH_HAVE_OPENSSL
#define CPPHTTPLIB_OPENSSL_SUPPORT
#endif
#include <httplib.h>

#include <cstdlib>

#include "rumorgraph/error.hpp"
#include "rumorgraph/oracle.hpp"

namespace rumorgraph {

namespace {

struct ParsedUrl {
  std::string scheme_host;  // e.g. "https://api.openai.com"
  std::string path;         // e.g. "/v1/chat/completions"
};

ParsedUrl parse_url(const std::string& url) {
  auto scheme_end = url.find("://");
  if (scheme_end == std::string::npos) {
    throw Error(ErrorCode::ConfigConflict, "endpoint must start with http:// or https://");
  }
  auto path_start = url.find('/', scheme_end + 3);
  if (path_start == std::string::npos) return {url, "/"};
  return {url.substr(0, path_start), url.substr(path_start)};
}

class HttpTransport final : public ChatTransport {
 public:
  explicit HttpTransport(const OracleConfig& config)
      : url_(parse_url(config.endpoint)), timeout_seconds_(config.timeout_seconds) {
    if (const char* key = std::getenv(config.api_key_env.c_str())) {
      api_key_ = key;
    }
#ifndef RUMORGRAPH_HAVE_OPENSSL
    if (url_.scheme_host.rfind("https://", 0) == 0) {
      throw Error(ErrorCode::ConfigConflict,
                  "built without TLS support; use an http:// endpoint or rebuild with OpenSSL");
    }
#endif
  }

  ChatResponse post(const std::string& request_body_json) override {
    // One client per request keeps concurrent calls independent.
    httplib::Client client(url_.scheme_host);
    client.set_connection_timeout(std::chrono::duration<double>(timeout_seconds_));
    client.set_read_timeout(std::chrono::duration<double>(timeout_seconds_));
    httplib::Headers headers;
    if (!api_key_.empty()) headers.emplace("Authorization", "Bearer " + api_key_);
    auto result = client.Post(url_.path, headers, request_body_json, "application/json");
    if (!result) return {0, httplib::to_string(result.error())};
    return {result->status, result->body};
  }

 private:
  ParsedUrl url_;
  double timeout_seconds_;
  std::string api_key_;
};

}  // namespace

std::unique_ptr<ChatTransport> make_http_transport(const OracleConfig& config) {
  return std::make_unique<HttpTransport>(config);
}

}  // namespace rumorgraph
