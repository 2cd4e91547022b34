#include "easel/provider.hpp"

#include "easel/error.hpp"

#include <httplib.h>
#include <json.hpp>

#include <chrono>
#include <cstdlib>

namespace easel {

using nlohmann::json;

std::pair<std::string, std::string> split_url(std::string_view url) {
    const auto scheme_end = url.find("://");
    if (scheme_end == std::string_view::npos) throw Error(ErrorCode::InvalidConfig, "URL without scheme: " + std::string(url));
    const auto path_start = url.find('/', scheme_end + 3);
    if (path_start == std::string_view::npos) return {std::string(url), "/"};
    return {std::string(url.substr(0, path_start)), std::string(url.substr(path_start))};
}

HttpChatProvider::HttpChatProvider(std::string endpoint_url, std::optional<std::string> api_key, int timeout_seconds)
    : timeout_seconds_(timeout_seconds) {
    std::tie(base_, path_) = split_url(endpoint_url);
    if (api_key) {
        api_key_ = *api_key;
    } else if (const char* env = std::getenv("EASEL_PROVIDER_KEY")) {
        api_key_ = env;
    }
}

ProviderResponse HttpChatProvider::complete(const ProviderRequest& request) {
    validate_request(request);
    json body = {
        {"model", request.model_name},
        {"messages", json::array({{{"role", "user"}, {"content", request.prompt}}})},
        {"temperature", request.decoding.temperature},
        {"max_tokens", request.decoding.max_output_tokens},
    };

    // One client per call; httplib clients are not meant to be shared across threads.
    httplib::Client client(base_);
    client.set_connection_timeout(timeout_seconds_, 0);
    client.set_read_timeout(timeout_seconds_, 0);
    httplib::Headers headers;
    if (!api_key_.empty()) headers.emplace("Authorization", "Bearer " + api_key_);

    const auto start = std::chrono::steady_clock::now();
    auto res = client.Post(path_, headers, body.dump(), "application/json");
    const double latency =
        std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - start).count();
    if (!res) throw Error(ErrorCode::ProviderError, "transport: " + httplib::to_string(res.error()));
    if (res->status != 200) {
        throw Error(ErrorCode::ProviderError, "HTTP " + std::to_string(res->status) + ": " + res->body.substr(0, 200));
    }
    try {
        const json reply = json::parse(res->body);
        ProviderResponse out;
        out.text = reply.at("choices").at(0).at("message").at("content").get<std::string>();
        out.latency_ms = latency;
        out.provider_meta = reply.value("model", std::string{});
        return out;
    } catch (const json::exception& e) {
        throw Error(ErrorCode::ProviderError, std::string("malformed completion payload: ") + e.what());
    }
}

} // namespace easel
