#include "easel/config.hpp"

#include "easel/error.hpp"
#include "easel/prompting.hpp"
#include "easel/util.hpp"

#include <cstdlib>
#include <set>

namespace easel {

ConfigFile ConfigFile::parse(std::string_view text) {
    ConfigFile cfg;
    std::string section;
    std::size_t line_no = 0;
    for (std::size_t start = 0; start <= text.size();) {
        auto end = text.find('\n', start);
        if (end == std::string_view::npos) end = text.size();
        std::string_view line = text.substr(start, end - start);
        start = end + 1;
        ++line_no;
        const std::string where = "config line " + std::to_string(line_no);

        // Drop a comment that is not inside quotes.
        bool quoted = false;
        for (std::size_t i = 0; i < line.size(); ++i) {
            if (line[i] == '"') quoted = !quoted;
            if (line[i] == '#' && !quoted) {
                line = line.substr(0, i);
                break;
            }
        }
        line = trim(line);
        if (line.empty()) continue;
        if (line.front() == '[') {
            if (line.back() != ']') throw Error(ErrorCode::InvalidConfig, where + ": unterminated section header");
            section = std::string(trim(line.substr(1, line.size() - 2)));
            continue;
        }
        const auto eq = line.find('=');
        if (eq == std::string_view::npos) throw Error(ErrorCode::InvalidConfig, where + ": expected key = value");
        const std::string key(trim(line.substr(0, eq)));
        std::string_view value = trim(line.substr(eq + 1));
        if (key.empty()) throw Error(ErrorCode::InvalidConfig, where + ": empty key");
        std::string parsed;
        if (!value.empty() && value.front() == '"') {
            if (value.size() < 2 || value.back() != '"') throw Error(ErrorCode::InvalidConfig, where + ": unterminated string");
            value = value.substr(1, value.size() - 2);
            for (std::size_t i = 0; i < value.size(); ++i) {
                if (value[i] == '\\' && i + 1 < value.size()) {
                    const char n = value[++i];
                    parsed += n == 'n' ? '\n' : n == 't' ? '\t' : n;
                } else {
                    parsed += value[i];
                }
            }
        } else {
            parsed = std::string(value);
        }
        const std::string full = section.empty() ? key : section + "." + key;
        if (!cfg.values_.emplace(full, std::move(parsed)).second) {
            throw Error(ErrorCode::InvalidConfig, where + ": duplicate key " + full);
        }
    }
    return cfg;
}

ConfigFile ConfigFile::load(const std::filesystem::path& path) { return parse(read_file(path)); }

std::optional<std::string> ConfigFile::get(const std::string& key) const {
    const auto it = values_.find(key);
    if (it == values_.end()) return std::nullopt;
    return it->second;
}

std::string ConfigFile::get_or(const std::string& key, std::string fallback) const {
    return get(key).value_or(std::move(fallback));
}

std::optional<double> ConfigFile::get_number(const std::string& key) const {
    const auto v = get(key);
    if (!v) return std::nullopt;
    try {
        std::size_t used = 0;
        const double d = std::stod(*v, &used);
        if (used == v->size()) return d;
    } catch (const std::exception&) {
    }
    throw Error(ErrorCode::InvalidConfig, key + ": not a number: " + *v);
}

std::optional<long long> ConfigFile::get_integer(const std::string& key) const {
    const auto v = get(key);
    if (!v) return std::nullopt;
    try {
        std::size_t used = 0;
        const long long n = std::stoll(*v, &used);
        if (used == v->size()) return n;
    } catch (const std::exception&) {
    }
    throw Error(ErrorCode::InvalidConfig, key + ": not an integer: " + *v);
}

std::optional<bool> ConfigFile::get_bool(const std::string& key) const {
    const auto v = get(key);
    if (!v) return std::nullopt;
    const std::string s = to_lower_ascii(*v);
    if (s == "true" || s == "yes" || s == "1") return true;
    if (s == "false" || s == "no" || s == "0") return false;
    throw Error(ErrorCode::InvalidConfig, key + ": not a boolean: " + *v);
}

AppConfig app_config_from(const ConfigFile& file, const std::filesystem::path& base_dir) {
    static const std::set<std::string> known = {
        "provider.kind", "provider.endpoint", "provider.script", "provider.log", "provider.timeout_seconds",
        "pipeline.model", "pipeline.seed", "pipeline.selection", "pipeline.activity_policy", "pipeline.concurrency",
        "pipeline.detection_temperature", "pipeline.generation_temperature", "pipeline.detection_max_tokens",
        "pipeline.generation_max_tokens", "pipeline.retry_max_attempts", "pipeline.retry_backoff_ms",
        "pipeline.retry_backoff_factor", "service.host", "service.port", "service.root", "service.parent_secret",
        "service.explanation_for_text", "paths.assets",
    };
    for (const auto& [key, value] : file.values()) {
        if (!known.count(key)) throw Error(ErrorCode::InvalidConfig, "unknown config key " + key);
    }
    auto resolve = [&](const std::string& p) {
        std::filesystem::path path(p);
        return path.is_absolute() || base_dir.empty() ? path : base_dir / path;
    };

    AppConfig cfg;
    cfg.provider.kind = file.get_or("provider.kind", cfg.provider.kind);
    if (cfg.provider.kind != "scripted" && cfg.provider.kind != "http") {
        throw Error(ErrorCode::InvalidConfig, "provider.kind must be scripted or http");
    }
    cfg.provider.endpoint = file.get_or("provider.endpoint", "");
    if (auto s = file.get("provider.script")) cfg.provider.script = resolve(*s);
    if (auto s = file.get("provider.log")) cfg.provider.log_path = resolve(*s);
    if (auto n = file.get_integer("provider.timeout_seconds")) cfg.provider.timeout_seconds = static_cast<int>(*n);

    auto& p = cfg.pipeline;
    p.model_name = file.get_or("pipeline.model", p.model_name);
    if (auto n = file.get_integer("pipeline.seed")) p.seed = static_cast<std::uint64_t>(*n);
    if (auto s = file.get("pipeline.selection")) {
        const auto sel = parse_selection_policy(*s);
        if (!sel) throw Error(ErrorCode::InvalidConfig, "pipeline.selection: " + *s);
        p.selection = *sel;
    }
    if (auto s = file.get("pipeline.activity_policy")) {
        if (to_lower_ascii(*s) == "child_choice") {
            p.activity_policy = ActivityPolicy::ChildChoice();
        } else if (auto t = parse_activity_type(*s)) {
            p.activity_policy = ActivityPolicy::Fixed(*t);
        } else {
            throw Error(ErrorCode::InvalidConfig, "pipeline.activity_policy: " + *s);
        }
    }
    if (auto n = file.get_integer("pipeline.concurrency")) p.concurrency = static_cast<int>(*n);
    if (auto x = file.get_number("pipeline.detection_temperature")) p.detection_decoding.temperature = *x;
    if (auto x = file.get_number("pipeline.generation_temperature")) p.generation_decoding.temperature = *x;
    if (auto n = file.get_integer("pipeline.detection_max_tokens")) p.detection_decoding.max_output_tokens = static_cast<int>(*n);
    if (auto n = file.get_integer("pipeline.generation_max_tokens")) p.generation_decoding.max_output_tokens = static_cast<int>(*n);
    if (auto n = file.get_integer("pipeline.retry_max_attempts")) p.retry.max_attempts = static_cast<int>(*n);
    if (auto x = file.get_number("pipeline.retry_backoff_ms")) p.retry.backoff_initial_ms = *x;
    if (auto x = file.get_number("pipeline.retry_backoff_factor")) p.retry.backoff_factor = *x;
    p.validate();

    auto& s = cfg.service;
    s.host = file.get_or("service.host", s.host);
    if (auto n = file.get_integer("service.port")) s.port = static_cast<int>(*n);
    if (auto r = file.get("service.root")) s.root = resolve(*r);
    s.parent_secret = file.get_or("service.parent_secret", "");
    if (auto b = file.get_bool("service.explanation_for_text")) s.explanation_for_text = *b;
    if (const char* env = std::getenv("EASEL_PARENT_SECRET")) s.parent_secret = env;

    cfg.assets_dir = file.get("paths.assets") ? resolve(*file.get("paths.assets")) : default_asset_dir();
    return cfg;
}

AppConfig load_app_config(const std::optional<std::filesystem::path>& path) {
    if (!path) return app_config_from(ConfigFile{});
    return app_config_from(ConfigFile::load(*path), path->parent_path());
}

namespace {

class OwnedLoggingProvider : public ChatProvider {
public:
    OwnedLoggingProvider(std::unique_ptr<ChatProvider> inner, const std::filesystem::path& log)
        : inner_(std::move(inner)), logger_(*inner_, log) {}
    ProviderResponse complete(const ProviderRequest& request) override { return logger_.complete(request); }

private:
    std::unique_ptr<ChatProvider> inner_;
    LoggingProvider logger_;
};

} // namespace

std::unique_ptr<ChatProvider> make_provider(const ProviderConfig& config) {
    std::unique_ptr<ChatProvider> provider;
    if (config.kind == "http") {
        if (config.endpoint.empty()) throw Error(ErrorCode::InvalidConfig, "provider.endpoint is required for http");
        provider = std::make_unique<HttpChatProvider>(config.endpoint, std::nullopt, config.timeout_seconds);
    } else {
        if (!config.script) throw Error(ErrorCode::InvalidConfig, "provider.script is required for scripted");
        provider = ScriptedProvider::from_file(*config.script);
    }
    if (config.log_path) return std::make_unique<OwnedLoggingProvider>(std::move(provider), *config.log_path);
    return provider;
}

} // namespace easel
