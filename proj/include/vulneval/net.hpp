#pragma once

// Thin HTTP(S) client helpers shared by feed loading and the generation
// backend client.

#include <chrono>
#include <string>
#include <utility>
#include <vector>

namespace vulneval::net {

using Headers = std::vector<std::pair<std::string, std::string>>;

struct Response {
    int status = 0;
    std::string body;
};

// Splits "http://host:port/path?q" into ("http://host:port", "/path?q").
// Throws Error("InvalidUrl") for anything that is not http(s).
std::pair<std::string, std::string> split_url(const std::string& url);

bool is_url(const std::string& s) noexcept;

// Both throw BackendUnavailable on transport failure (connection refused,
// timeout). Non-2xx statuses are returned, not thrown.
Response get(const std::string& url, const Headers& headers = {},
             std::chrono::milliseconds timeout = std::chrono::seconds(30));
Response post_json(const std::string& url, const std::string& body, const Headers& headers = {},
                   std::chrono::milliseconds timeout = std::chrono::seconds(300));

}  // namespace vulneval::net
