#include "provlab/http_lite.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>

#include "provlab/error.hpp"

namespace provlab::http {

namespace {

constexpr std::size_t kMaxHead = 16 * 1024;
constexpr std::size_t kMaxBody = 4 * 1024 * 1024;

std::string lower(std::string s) {
  std::transform(s.begin(), s.end(), s.begin(), [](unsigned char c) { return std::tolower(c); });
  return s;
}

std::string trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t')) s.remove_suffix(1);
  return std::string(s);
}

std::vector<std::uint8_t> finish(std::string head, const std::map<std::string, std::string>& headers,
                                 const std::string& body) {
  for (const auto& [k, v] : headers) {
    if (lower(k) == "content-length") continue;
    head += k + ": " + v + "\r\n";
  }
  head += "Content-Length: " + std::to_string(body.size()) + "\r\n\r\n";
  head += body;
  return {head.begin(), head.end()};
}

struct Parsed {
  std::string start_line;
  std::map<std::string, std::string> headers;
  std::string body;
};

// Pops one message off the front of `buffer` when complete.
std::optional<Parsed> take_message(std::string& buffer) {
  const auto head_end = buffer.find("\r\n\r\n");
  if (head_end == std::string::npos) {
    if (buffer.size() > kMaxHead) throw Error(Errc::BadRequest, "header section too large");
    return std::nullopt;
  }
  Parsed p;
  std::string_view head(buffer.data(), head_end);
  auto eol = head.find("\r\n");
  p.start_line = std::string(head.substr(0, eol));
  while (eol != std::string_view::npos) {
    head.remove_prefix(eol + 2);
    eol = head.find("\r\n");
    const auto line = head.substr(0, eol);
    const auto colon = line.find(':');
    if (colon == std::string_view::npos || colon == 0) throw Error(Errc::BadRequest, "bad header line");
    p.headers[lower(std::string(line.substr(0, colon)))] = trim(line.substr(colon + 1));
  }
  std::size_t length = 0;
  if (auto it = p.headers.find("content-length"); it != p.headers.end()) {
    const auto& v = it->second;
    auto [ptr, ec] = std::from_chars(v.data(), v.data() + v.size(), length);
    if (ec != std::errc() || ptr != v.data() + v.size() || length > kMaxBody)
      throw Error(Errc::BadRequest, "bad Content-Length");
  }
  const std::size_t total = head_end + 4 + length;
  if (buffer.size() < total) return std::nullopt;
  p.body = buffer.substr(head_end + 4, length);
  buffer.erase(0, total);
  return p;
}

}  // namespace

std::vector<std::uint8_t> serialize(const Request& req) {
  return finish(req.method + " " + req.path + " HTTP/1.1\r\n", req.headers, req.body);
}

std::vector<std::uint8_t> serialize(const Response& resp) {
  return finish("HTTP/1.1 " + std::to_string(resp.status) + " " + resp.reason + "\r\n", resp.headers, resp.body);
}

void RequestParser::feed(std::span<const std::uint8_t> bytes) { buffer_.append(bytes.begin(), bytes.end()); }

std::optional<Request> RequestParser::next() {
  auto p = take_message(buffer_);
  if (!p) return std::nullopt;
  const auto sp1 = p->start_line.find(' ');
  const auto sp2 = p->start_line.rfind(' ');
  if (sp1 == std::string::npos || sp1 == sp2 || p->start_line.substr(sp2 + 1) != "HTTP/1.1")
    throw Error(Errc::BadRequest, "bad request line");
  Request r;
  r.method = p->start_line.substr(0, sp1);
  r.path = p->start_line.substr(sp1 + 1, sp2 - sp1 - 1);
  r.headers = std::move(p->headers);
  r.body = std::move(p->body);
  return r;
}

void ResponseParser::feed(std::span<const std::uint8_t> bytes) { buffer_.append(bytes.begin(), bytes.end()); }

std::optional<Response> ResponseParser::next() {
  auto p = take_message(buffer_);
  if (!p) return std::nullopt;
  const auto& line = p->start_line;
  if (line.rfind("HTTP/1.1 ", 0) != 0 || line.size() < 12) throw Error(Errc::BadRequest, "bad status line");
  Response r;
  auto [ptr, ec] = std::from_chars(line.data() + 9, line.data() + 12, r.status);
  if (ec != std::errc() || ptr != line.data() + 12) throw Error(Errc::BadRequest, "bad status code");
  r.reason = line.size() > 13 ? line.substr(13) : "";
  r.headers = std::move(p->headers);
  r.body = std::move(p->body);
  return r;
}

}  // namespace provlab::http
