#pragma once

#include <filesystem>
#include <fstream>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace easel {

struct DecodingParams {
    double temperature = 0.0;  // [0, 2]
    int max_output_tokens = 512;

    bool operator==(const DecodingParams&) const = default;
};

struct ProviderRequest {
    std::string prompt;
    DecodingParams decoding;
    std::string model_name;
    // Free-form label used for logs and script matching, e.g. "detection:A1",
    // "child:Drawing", "parent", "summary".
    std::string purpose;
};

struct ProviderResponse {
    std::string text;
    double latency_ms = 0.0;
    std::string provider_meta;
};

// Throws InvalidConfig for an empty prompt or temperature outside [0, 2].
void validate_request(const ProviderRequest& request);

// Chat-completion backend. Implementations must be callable from several
// threads at once. Transport failures are reported as Error(ProviderError).
class ChatProvider {
public:
    virtual ~ChatProvider() = default;
    virtual ProviderResponse complete(const ProviderRequest& request) = 0;
};

// Key used by mock scripts: SHA-256 of the exact prompt text.
std::string prompt_digest(std::string_view prompt);

// Deterministic provider driven by a JSON script:
//
//   { "default": "0",
//     "rules": [ { "digest": "<sha256 of prompt>", "responses": ["1, ..."] },
//                { "purpose": "detection:M2", "responses": ["garbage", "0"] },
//                { "contains": ["needle", ...], "responses": [{"error": "timeout"}] } ] }
//
// The first rule whose conditions all hold answers the call. Each distinct
// prompt walks its own cursor through `responses`; the last entry repeats.
// Unmatched prompts get `default`, or a ProviderError when there is none.
class ScriptedProvider : public ChatProvider {
public:
    struct Reply {
        std::optional<std::string> text;
        std::optional<std::string> error;
    };
    struct Rule {
        std::optional<std::string> digest;
        std::optional<std::string> purpose;  // exact, or prefix when ending in '*'
        std::vector<std::string> contains;
        std::vector<Reply> replies;
    };
    struct CallRecord {
        std::string purpose;
        std::string prompt_digest;
        std::optional<std::string> response;
        std::optional<std::string> error;
    };

    struct Script {
        std::vector<Rule> rules;
        std::optional<std::string> fallback;
    };

    ScriptedProvider() = default;
    explicit ScriptedProvider(std::vector<Rule> rules, std::optional<std::string> fallback = std::nullopt);
    explicit ScriptedProvider(Script script) : ScriptedProvider(std::move(script.rules), std::move(script.fallback)) {}

    static Script parse_script(std::string_view document);
    static ScriptedProvider from_json(std::string_view document);
    static std::unique_ptr<ScriptedProvider> from_file(const std::filesystem::path& path);

    ProviderResponse complete(const ProviderRequest& request) override;

    std::vector<CallRecord> calls() const;
    std::size_t call_count(std::string_view purpose) const;

private:
    std::vector<Rule> rules_;
    std::optional<std::string> fallback_;
    mutable std::mutex mu_;
    std::map<std::pair<std::size_t, std::string>, std::size_t> cursors_;
    std::vector<CallRecord> calls_;
};

// OpenAI-compatible chat completions over HTTP(S). The API key is read from
// EASEL_PROVIDER_KEY when not given explicitly.
class HttpChatProvider : public ChatProvider {
public:
    HttpChatProvider(std::string endpoint_url, std::optional<std::string> api_key = std::nullopt,
                     int timeout_seconds = 120);

    ProviderResponse complete(const ProviderRequest& request) override;

private:
    std::string base_;  // scheme://host[:port]
    std::string path_;
    std::string api_key_;
    int timeout_seconds_;
};

// Splits "http://host:port/path" into ("http://host:port", "/path").
std::pair<std::string, std::string> split_url(std::string_view url);

// Decorator appending one JSON line per call (request, response or error,
// latency) to an audit log.
class LoggingProvider : public ChatProvider {
public:
    LoggingProvider(ChatProvider& inner, const std::filesystem::path& log_path);

    ProviderResponse complete(const ProviderRequest& request) override;

private:
    ChatProvider& inner_;
    std::mutex mu_;
    std::ofstream log_;
};

} // namespace easel
