#include "easel/embedding.hpp"

#include "easel/error.hpp"
#include "easel/provider.hpp"
#include "easel/util.hpp"

#include <httplib.h>
#include <json.hpp>

#include <cctype>
#include <cstdlib>

namespace easel {

namespace {

// Fills `dim` values in [-1, 1) from SHA-256 blocks of `seed`.
void add_hashed(std::vector<double>& acc, const std::string& seed, double weight) {
    const std::size_t dim = acc.size();
    std::size_t filled = 0;
    for (int block = 0; filled < dim; ++block) {
        const std::string hex = sha256_hex(seed + "#" + std::to_string(block));
        for (std::size_t off = 0; off + 8 <= hex.size() && filled < dim; off += 8) {
            const auto word = std::strtoul(hex.substr(off, 8).c_str(), nullptr, 16);
            acc[filled++] += weight * (static_cast<double>(word) / 2147483648.0 - 1.0);
        }
    }
}

std::vector<std::string> words_of(std::string_view text) {
    std::vector<std::string> out;
    std::string cur;
    for (char ch : text) {
        const auto c = static_cast<unsigned char>(ch);
        if (std::isalnum(c) || c >= 0x80) {
            cur += static_cast<char>(std::tolower(c));
        } else if (!cur.empty()) {
            out.push_back(std::move(cur));
            cur.clear();
        }
    }
    if (!cur.empty()) out.push_back(std::move(cur));
    return out;
}

} // namespace

HashEmbedder::HashEmbedder(std::size_t dimension) : dimension_(dimension) {
    if (dimension_ == 0) throw Error(ErrorCode::InvalidConfig, "embedding dimension must be positive");
}

std::vector<double> HashEmbedder::embed(std::string_view text) {
    if (trim(text).empty()) throw Error(ErrorCode::ProviderError, "cannot embed empty text");
    std::vector<double> v(dimension_, 0.0);
    const auto words = words_of(text);
    std::string normalized;
    for (const auto& w : words) {
        add_hashed(v, "w:" + w, 1.0);
        normalized += (normalized.empty() ? "" : " ") + w;
    }
    if (normalized.empty()) normalized = std::string(trim(text));
    add_hashed(v, "t:" + normalized, 0.5);
    return v;
}

HttpEmbedder::HttpEmbedder(std::string endpoint_url, std::string model, std::optional<std::string> api_key,
                           int timeout_seconds)
    : model_(std::move(model)), timeout_seconds_(timeout_seconds) {
    std::tie(base_, path_) = split_url(endpoint_url);
    if (api_key) {
        api_key_ = *api_key;
    } else if (const char* env = std::getenv("EASEL_PROVIDER_KEY")) {
        api_key_ = env;
    }
}

std::vector<double> HttpEmbedder::embed(std::string_view text) {
    if (trim(text).empty()) throw Error(ErrorCode::ProviderError, "cannot embed empty text");
    const nlohmann::json body = {{"model", model_}, {"input", std::string(text)}};
    httplib::Client client(base_);
    client.set_connection_timeout(timeout_seconds_, 0);
    client.set_read_timeout(timeout_seconds_, 0);
    httplib::Headers headers;
    if (!api_key_.empty()) headers.emplace("Authorization", "Bearer " + api_key_);
    auto res = client.Post(path_, headers, body.dump(), "application/json");
    if (!res) throw Error(ErrorCode::ProviderError, "transport: " + httplib::to_string(res.error()));
    if (res->status != 200) throw Error(ErrorCode::ProviderError, "HTTP " + std::to_string(res->status));
    try {
        auto v = nlohmann::json::parse(res->body).at("data").at(0).at("embedding").get<std::vector<double>>();
        if (v.empty()) throw Error(ErrorCode::ProviderError, "empty embedding");
        return v;
    } catch (const nlohmann::json::exception& e) {
        throw Error(ErrorCode::ProviderError, std::string("malformed embedding payload: ") + e.what());
    }
}

} // namespace easel
