#pragma once
// HTTP-backed LLM client: POSTs the query as text/plain to a fixed endpoint
// and returns the response body. Kept in its own header so library users who
// never retrieve concepts over the network do not pull in httplib.

#include <httplib.h>

#include <string>

#include "pfdet/concept_bank.hpp"
#include "pfdet/errors.hpp"

namespace pfdet {

class HttpLlmClient : public LlmClient {
 public:
  // endpoint: "http://host:port/path"
  explicit HttpLlmClient(const std::string& endpoint, int timeout_seconds = 30)
      : timeout_seconds_(timeout_seconds) {
    const auto scheme = endpoint.find("://");
    if (scheme == std::string::npos)
      fail(ErrorKind::Validation, "llm.endpoint must look like http://host:port/path");
    const auto path_start = endpoint.find('/', scheme + 3);
    if (path_start == std::string::npos) {
      base_ = endpoint;
      path_ = "/";
    } else {
      base_ = endpoint.substr(0, path_start);
      path_ = endpoint.substr(path_start);
    }
  }

  std::string complete(const std::string& request) override {
    httplib::Client client(base_);
    client.set_connection_timeout(timeout_seconds_, 0);
    client.set_read_timeout(timeout_seconds_, 0);
    client.set_write_timeout(timeout_seconds_, 0);
    const auto res = client.Post(path_, request, "text/plain");
    if (!res)
      fail(ErrorKind::Retrieval,
           "LLM endpoint unreachable (" + base_ + path_ + "): " + httplib::to_string(res.error()));
    if (res->status != 200)
      fail(ErrorKind::Retrieval,
           "LLM endpoint returned HTTP " + std::to_string(res->status));
    return res->body;
  }

 private:
  std::string base_;
  std::string path_;
  int timeout_seconds_;
};

}  // namespace pfdet
