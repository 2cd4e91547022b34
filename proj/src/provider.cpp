#include "easel/provider.hpp"

#include "easel/error.hpp"
#include "easel/util.hpp"

#include <json.hpp>

#include <chrono>

namespace easel {

using nlohmann::json;

void validate_request(const ProviderRequest& request) {
    if (request.prompt.empty()) throw Error(ErrorCode::InvalidConfig, "empty prompt");
    if (!(request.decoding.temperature >= 0.0 && request.decoding.temperature <= 2.0)) {
        throw Error(ErrorCode::InvalidConfig, "temperature must be in [0, 2]");
    }
    if (request.decoding.max_output_tokens <= 0) throw Error(ErrorCode::InvalidConfig, "max_output_tokens must be positive");
}

std::string prompt_digest(std::string_view prompt) { return sha256_hex(prompt); }

ScriptedProvider::ScriptedProvider(std::vector<Rule> rules, std::optional<std::string> fallback)
    : rules_(std::move(rules)), fallback_(std::move(fallback)) {}

namespace {

ScriptedProvider::Reply parse_reply(const json& j) {
    ScriptedProvider::Reply r;
    if (j.is_string()) {
        r.text = j.get<std::string>();
    } else if (j.is_object() && j.contains("error")) {
        r.error = j.at("error").get<std::string>();
    } else if (j.is_object() && j.contains("text")) {
        r.text = j.at("text").get<std::string>();
    } else {
        throw Error(ErrorCode::Parse, "script reply must be a string or {\"error\": ...}");
    }
    return r;
}

bool purpose_matches(const std::string& pattern, const std::string& purpose) {
    if (!pattern.empty() && pattern.back() == '*') {
        return purpose.compare(0, pattern.size() - 1, pattern, 0, pattern.size() - 1) == 0;
    }
    return pattern == purpose;
}

} // namespace

ScriptedProvider ScriptedProvider::from_json(std::string_view document) { return ScriptedProvider(parse_script(document)); }

ScriptedProvider::Script ScriptedProvider::parse_script(std::string_view document) {
    json doc;
    try {
        doc = json::parse(document);
    } catch (const json::parse_error& e) {
        throw Error(ErrorCode::Parse, std::string("provider script: ") + e.what());
    }
    std::vector<Rule> rules;
    try {
        for (const auto& r : doc.value("rules", json::array())) {
            Rule rule;
            if (r.contains("digest")) rule.digest = r.at("digest").get<std::string>();
            if (r.contains("purpose")) rule.purpose = r.at("purpose").get<std::string>();
            if (r.contains("contains")) {
                const auto& c = r.at("contains");
                if (c.is_string()) {
                    rule.contains.push_back(c.get<std::string>());
                } else {
                    rule.contains = c.get<std::vector<std::string>>();
                }
            }
            if (r.contains("response")) rule.replies.push_back(parse_reply(r.at("response")));
            for (const auto& reply : r.value("responses", json::array())) rule.replies.push_back(parse_reply(reply));
            if (rule.replies.empty()) throw Error(ErrorCode::Parse, "script rule without responses");
            rules.push_back(std::move(rule));
        }
    } catch (const json::exception& e) {
        throw Error(ErrorCode::Parse, std::string("provider script: ") + e.what());
    }
    std::optional<std::string> fallback;
    if (doc.contains("default") && doc["default"].is_string()) fallback = doc["default"].get<std::string>();
    return Script{std::move(rules), std::move(fallback)};
}

std::unique_ptr<ScriptedProvider> ScriptedProvider::from_file(const std::filesystem::path& path) {
    return std::make_unique<ScriptedProvider>(parse_script(read_file(path)));
}

ProviderResponse ScriptedProvider::complete(const ProviderRequest& request) {
    validate_request(request);
    const std::string digest = prompt_digest(request.prompt);

    std::optional<Reply> reply;
    {
        std::lock_guard lock(mu_);
        for (std::size_t i = 0; i < rules_.size() && !reply; ++i) {
            const Rule& rule = rules_[i];
            if (rule.digest && *rule.digest != digest) continue;
            if (rule.purpose && !purpose_matches(*rule.purpose, request.purpose)) continue;
            bool all = true;
            for (const auto& needle : rule.contains) {
                if (request.prompt.find(needle) == std::string::npos) {
                    all = false;
                    break;
                }
            }
            if (!all) continue;
            auto& cursor = cursors_[{i, digest}];
            reply = rule.replies[std::min(cursor, rule.replies.size() - 1)];
            ++cursor;
        }
        if (!reply) {
            reply = Reply{};
            if (fallback_) {
                reply->text = fallback_;
            } else {
                reply->error = "no script rule matches prompt " + digest.substr(0, 12);
            }
        }
        calls_.push_back({request.purpose, digest, reply->text, reply->error});
    }
    if (reply->error) throw Error(ErrorCode::ProviderError, *reply->error);
    return ProviderResponse{*reply->text, 0.0, "scripted"};
}

std::vector<ScriptedProvider::CallRecord> ScriptedProvider::calls() const {
    std::lock_guard lock(mu_);
    return calls_;
}

std::size_t ScriptedProvider::call_count(std::string_view purpose) const {
    std::lock_guard lock(mu_);
    std::size_t n = 0;
    for (const auto& c : calls_) n += (c.purpose == purpose);
    return n;
}

LoggingProvider::LoggingProvider(ChatProvider& inner, const std::filesystem::path& log_path)
    : inner_(inner) {
    std::error_code ec;
    if (log_path.has_parent_path()) std::filesystem::create_directories(log_path.parent_path(), ec);
    log_.open(log_path, std::ios::app);
    if (!log_) throw Error(ErrorCode::Io, "cannot open session log " + log_path.string());
}

ProviderResponse LoggingProvider::complete(const ProviderRequest& request) {
    json entry = {
        {"ts", utc_timestamp()},
        {"purpose", request.purpose},
        {"model", request.model_name},
        {"temperature", request.decoding.temperature},
        {"max_output_tokens", request.decoding.max_output_tokens},
        {"prompt_digest", prompt_digest(request.prompt)},
        {"prompt", request.prompt},
    };
    const auto start = std::chrono::steady_clock::now();
    try {
        ProviderResponse response = inner_.complete(request);
        entry["response"] = response.text;
        entry["latency_ms"] = response.latency_ms;
        std::lock_guard lock(mu_);
        log_ << entry.dump() << '\n';
        log_.flush();
        return response;
    } catch (const std::exception& e) {
        entry["error"] = e.what();
        entry["latency_ms"] =
            std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - start).count();
        std::lock_guard lock(mu_);
        log_ << entry.dump() << '\n';
        log_.flush();
        throw;
    }
}

} // namespace easel
