#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

// Minimal HTTP/1.1 message framing for the app endpoint. Only what the
// simulated app and cloud exchange: a request line or status line, headers,
// and a Content-Length delimited body.
namespace provlab::http {

struct Request {
  std::string method = "POST";
  std::string path = "/api.json";
  std::map<std::string, std::string> headers;
  std::string body;
};

struct Response {
  int status = 200;
  std::string reason = "OK";
  std::map<std::string, std::string> headers;
  std::string body;
};

std::vector<std::uint8_t> serialize(const Request& req);
std::vector<std::uint8_t> serialize(const Response& resp);

/// Accumulates stream bytes and yields complete messages. Header names are
/// stored lowercased. Throws Error(BadRequest) on malformed input.
class RequestParser {
 public:
  void feed(std::span<const std::uint8_t> bytes);
  std::optional<Request> next();

 private:
  std::string buffer_;
};

class ResponseParser {
 public:
  void feed(std::span<const std::uint8_t> bytes);
  std::optional<Response> next();

 private:
  std::string buffer_;
};

}  // namespace provlab::http
