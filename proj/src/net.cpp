#include "vulneval/net.hpp"

#include <httplib.h>

#include "vulneval/error.hpp"

namespace vulneval::net {

namespace {

httplib::Headers to_httplib(const Headers& headers) {
    httplib::Headers out;
    for (const auto& [k, v] : headers) out.emplace(k, v);
    return out;
}

httplib::Client make_client(const std::string& base, std::chrono::milliseconds timeout) {
    httplib::Client client(base);
    const auto secs = std::chrono::duration_cast<std::chrono::seconds>(timeout);
    const auto usecs = std::chrono::duration_cast<std::chrono::microseconds>(timeout - secs);
    client.set_connection_timeout(5, 0);
    client.set_read_timeout(secs.count(), usecs.count());
    client.set_write_timeout(secs.count(), usecs.count());
    client.set_follow_location(true);
    return client;
}

}  // namespace

bool is_url(const std::string& s) noexcept {
    return s.starts_with("http://") || s.starts_with("https://");
}

std::pair<std::string, std::string> split_url(const std::string& url) {
    if (!is_url(url)) throw Error("InvalidUrl", "not an http(s) URL: " + url);
    const auto scheme_end = url.find("://") + 3;
    const auto path_start = url.find('/', scheme_end);
    if (path_start == std::string::npos) return {url, "/"};
    return {url.substr(0, path_start), url.substr(path_start)};
}

Response get(const std::string& url, const Headers& headers, std::chrono::milliseconds timeout) {
    const auto [base, path] = split_url(url);
    auto client = make_client(base, timeout);
    auto res = client.Get(path, to_httplib(headers));
    if (!res) throw BackendUnavailable("GET " + url + ": " + httplib::to_string(res.error()));
    return {res->status, res->body};
}

Response post_json(const std::string& url, const std::string& body, const Headers& headers,
                   std::chrono::milliseconds timeout) {
    const auto [base, path] = split_url(url);
    auto client = make_client(base, timeout);
    auto res = client.Post(path, to_httplib(headers), body, "application/json");
    if (!res) throw BackendUnavailable("POST " + url + ": " + httplib::to_string(res.error()));
    return {res->status, res->body};
}

}  // namespace vulneval::net
