#pragma once

#include "easel/pipeline.hpp"
#include "easel/provider.hpp"

#include <filesystem>
#include <map>
#include <memory>
#include <optional>
#include <string>

namespace easel {

// Flat view of a `key = value` file with `[section]` headers. Keys are stored
// as "section.key". Values may be bare or double-quoted; '#' starts a comment
// outside quotes.
class ConfigFile {
public:
    static ConfigFile parse(std::string_view text);
    static ConfigFile load(const std::filesystem::path& path);

    std::optional<std::string> get(const std::string& key) const;
    std::string get_or(const std::string& key, std::string fallback) const;
    std::optional<double> get_number(const std::string& key) const;
    std::optional<long long> get_integer(const std::string& key) const;
    std::optional<bool> get_bool(const std::string& key) const;

    const std::map<std::string, std::string>& values() const noexcept { return values_; }

private:
    std::map<std::string, std::string> values_;
};

struct ProviderConfig {
    std::string kind = "scripted";  // "scripted" or "http"
    std::string endpoint;           // http: chat completions URL
    std::optional<std::filesystem::path> script;
    std::optional<std::filesystem::path> log_path;
    int timeout_seconds = 120;
};

struct ServiceConfig {
    std::string host = "127.0.0.1";
    int port = 8080;
    std::filesystem::path root = "easel-data";
    std::string parent_secret;  // EASEL_PARENT_SECRET overrides
    bool explanation_for_text = true;
};

struct AppConfig {
    ProviderConfig provider;
    PipelineConfig pipeline;
    ServiceConfig service;
    std::filesystem::path assets_dir;
};

// Recognized keys:
//   [provider] kind, endpoint, script, log, timeout_seconds
//   [pipeline] model, seed, selection, activity_policy ("child_choice" or an
//              activity type), concurrency, detection_temperature,
//              generation_temperature, detection_max_tokens,
//              generation_max_tokens, retry_max_attempts, retry_backoff_ms,
//              retry_backoff_factor
//   [service]  host, port, root, parent_secret, explanation_for_text
//   [paths]    assets
// Relative paths resolve against `base_dir`. Unknown keys are InvalidConfig.
AppConfig app_config_from(const ConfigFile& file, const std::filesystem::path& base_dir = {});
AppConfig load_app_config(const std::optional<std::filesystem::path>& path);

std::unique_ptr<ChatProvider> make_provider(const ProviderConfig& config);

} // namespace easel
