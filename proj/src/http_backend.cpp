#define CPPHTTPLIB_OPENSSL_SUPPORT
#include <httplib.h>

#include "rubricrl/backends.hpp"
#include "rubricrl/error.hpp"

#include <cstdlib>

namespace rubricrl {

HttpChatBackend::HttpChatBackend(BackendConfig config) : config_(std::move(config)) {
    config_.validate();
    const auto& url = config_.base_url;
    const auto scheme_end = url.find("://");
    if (scheme_end == std::string::npos) {
        throw std::invalid_argument("base URL needs a scheme: " + url);
    }
    const auto path_start = url.find('/', scheme_end + 3);
    scheme_host_port_ = url.substr(0, path_start);
    path_prefix_ = path_start == std::string::npos ? "" : url.substr(path_start);
    while (!path_prefix_.empty() && path_prefix_.back() == '/') {
        path_prefix_.pop_back();
    }
    if (const char* key = std::getenv(config_.api_key_env.c_str())) {
        api_key_ = key;
    }
}

std::string HttpChatBackend::complete(const ChatRequest& request) {
    httplib::Client client(scheme_host_port_);
    const auto timeout = std::chrono::duration_cast<std::chrono::seconds>(config_.request_timeout);
    client.set_connection_timeout(timeout);
    client.set_read_timeout(timeout);
    client.set_write_timeout(timeout);

    httplib::Headers headers;
    if (!api_key_.empty()) {
        headers.emplace("Authorization", "Bearer " + api_key_);
    }
    nlohmann::json body = {
        {"model", request.model},
        {"temperature", request.temperature},
        {"messages", nlohmann::json::array({{{"role", "user"}, {"content", request.rendered}}})},
    };
    auto res = client.Post(path_prefix_ + "/chat/completions", headers, body.dump(),
                           "application/json");
    if (!res) {
        throw BackendError("request to " + scheme_host_port_ + " failed: " +
                           httplib::to_string(res.error()));
    }
    if (res->status != 200) {
        throw BackendError("HTTP " + std::to_string(res->status) + " from " + scheme_host_port_ +
                           ": " + res->body.substr(0, 500));
    }
    try {
        const auto reply = nlohmann::json::parse(res->body);
        return reply.at("choices").at(0).at("message").at("content").get<std::string>();
    } catch (const nlohmann::json::exception& e) {
        throw BackendError(std::string("malformed chat-completions response: ") + e.what());
    }
}

} // namespace rubricrl
