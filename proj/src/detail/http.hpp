#pragma once

// Thin blocking HTTP helpers over cpp-httplib, kept in one translation unit.

#include <string>
#include <utility>
#include <vector>

namespace geostory::detail {

struct HttpResponse {
  int status = 0;
  std::string body;
};

using HttpHeaders = std::vector<std::pair<std::string, std::string>>;

// Throws Error(Transport) when no response arrives.
HttpResponse http_get(const std::string& base_url, const std::string& path_and_query,
                      const HttpHeaders& headers, int timeout_s);

HttpResponse http_post(const std::string& base_url, const std::string& path,
                       const std::string& body, const std::string& content_type,
                       const HttpHeaders& headers, int timeout_s);

// Splits "http://host:port/prefix" into ("http://host:port", "/prefix").
std::pair<std::string, std::string> split_url(const std::string& url);

std::string percent_encode(std::string_view text);

}  // namespace geostory::detail
