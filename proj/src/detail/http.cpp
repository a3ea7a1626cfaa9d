#include "detail/http.hpp"

#include <httplib.h>

#include <fmt/format.h>

#include "geostory/error.hpp"

namespace geostory::detail {

namespace {

httplib::Headers to_headers(const HttpHeaders& headers) {
  httplib::Headers out;
  for (const auto& [k, v] : headers) out.emplace(k, v);
  out.emplace("User-Agent", "geostory/0.1");
  return out;
}

void configure(httplib::Client& client, int timeout_s) {
  client.set_connection_timeout(timeout_s, 0);
  client.set_read_timeout(timeout_s, 0);
  client.set_write_timeout(timeout_s, 0);
  client.set_follow_location(true);
}

}  // namespace

std::pair<std::string, std::string> split_url(const std::string& url) {
  const auto scheme = url.find("://");
  const auto host_start = scheme == std::string::npos ? 0 : scheme + 3;
  const auto slash = url.find('/', host_start);
  if (slash == std::string::npos) return {url, ""};
  std::string prefix = url.substr(slash);
  while (!prefix.empty() && prefix.back() == '/') prefix.pop_back();
  return {url.substr(0, slash), prefix};
}

std::string percent_encode(std::string_view text) {
  std::string out;
  for (unsigned char c : text) {
    if (std::isalnum(c) || c == '-' || c == '_' || c == '.' || c == '~') {
      out.push_back(static_cast<char>(c));
    } else {
      out += fmt::format("%{:02X}", c);
    }
  }
  return out;
}

HttpResponse http_get(const std::string& base_url, const std::string& path_and_query,
                      const HttpHeaders& headers, int timeout_s) {
  const auto [origin, prefix] = split_url(base_url);
  httplib::Client client(origin);
  configure(client, timeout_s);
  auto res = client.Get(prefix + path_and_query, to_headers(headers));
  if (!res) {
    throw Error(ErrorKind::Transport,
                fmt::format("GET {}{} failed: {}", base_url, path_and_query, httplib::to_string(res.error())));
  }
  return {res->status, res->body};
}

HttpResponse http_post(const std::string& base_url, const std::string& path,
                       const std::string& body, const std::string& content_type,
                       const HttpHeaders& headers, int timeout_s) {
  const auto [origin, prefix] = split_url(base_url);
  httplib::Client client(origin);
  configure(client, timeout_s);
  auto res = client.Post(prefix + path, to_headers(headers), body, content_type);
  if (!res) {
    throw Error(ErrorKind::Transport,
                fmt::format("POST {}{} failed: {}", base_url, path, httplib::to_string(res.error())));
  }
  return {res->status, res->body};
}

}  // namespace geostory::detail
