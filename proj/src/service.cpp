#include "easel/service.hpp"

#include "easel/util.hpp"

#include <httplib.h>
#include <json.hpp>

namespace easel {

using nlohmann::json;

int http_status_for(ErrorCode code) noexcept {
    switch (code) {
    case ErrorCode::SessionNotFound:
    case ErrorCode::UnknownEpisode: return 404;
    case ErrorCode::SessionIncomplete:
    case ErrorCode::Conflict:
    case ErrorCode::ActivityNotSelected:
    case ErrorCode::ExplanationRequired: return 409;
    case ErrorCode::InvalidArtifact:
    case ErrorCode::MissingField:
    case ErrorCode::Parse:
    case ErrorCode::InvalidConfig: return 400;
    case ErrorCode::ProviderError:
    case ErrorCode::ProviderExhausted:
    case ErrorCode::EmptyGeneration: return 502;
    default: return 500;
    }
}

namespace {

void send_json(httplib::Response& res, int status, const json& body) {
    res.status = status;
    res.set_content(body.dump(), "application/json");
}

void send_error(httplib::Response& res, int status, std::string_view code, const std::string& message) {
    send_json(res, status, {{"error", code}, {"message", message}});
}

json parse_body(const httplib::Request& req) {
    try {
        json j = json::parse(req.body);
        if (!j.is_object()) throw Error(ErrorCode::Parse, "request body must be a JSON object");
        return j;
    } catch (const json::parse_error& e) {
        throw Error(ErrorCode::Parse, std::string("request body: ") + e.what());
    }
}

std::string required_string(const json& body, const char* key) {
    if (!body.contains(key) || !body.at(key).is_string()) throw Error(ErrorCode::MissingField, key);
    return body.at(key).get<std::string>();
}

bool secrets_equal(const std::string& a, const std::string& b) {
    if (a.size() != b.size()) return false;
    unsigned char diff = 0;
    for (std::size_t i = 0; i < a.size(); ++i) diff |= static_cast<unsigned char>(a[i] ^ b[i]);
    return diff == 0;
}

} // namespace

struct Service::Impl {
    Store& store;
    ServiceOptions options;
    httplib::Server server;

    Impl(Store& s, ServiceOptions o) : store(s), options(std::move(o)) {}

    using Handler = std::function<void(const httplib::Request&, httplib::Response&)>;

    // Wraps a handler so library errors become JSON error responses.
    Handler guarded(Handler inner) {
        return [inner = std::move(inner)](const httplib::Request& req, httplib::Response& res) {
            try {
                inner(req, res);
            } catch (const Error& e) {
                send_error(res, http_status_for(e.code()), to_string(e.code()), e.detail());
            } catch (const std::exception& e) {
                send_error(res, 500, "Internal", e.what());
            }
        };
    }

    Handler parent_only(Handler inner) {
        return guarded([this, inner = std::move(inner)](const httplib::Request& req, httplib::Response& res) {
            const std::string given = req.get_header_value("X-Easel-Parent");
            if (options.parent_secret.empty() || !secrets_equal(given, options.parent_secret)) {
                send_error(res, 401, "Unauthorized", "missing or wrong X-Easel-Parent header");
                return;
            }
            inner(req, res);
        });
    }

    json session_json(const SessionRecord& s) const {
        json j = to_json(s);
        j["needs_explanation"] = store.needs_explanation(s);
        return j;
    }

    void routes() {
        server.Get("/api/health", [](const httplib::Request&, httplib::Response& res) {
            send_json(res, 200, {{"status", "ok"}});
        });

        server.Get("/api/episodes", guarded([this](const httplib::Request&, httplib::Response& res) {
            json list = json::array();
            for (const auto& e : store.list_episodes()) {
                list.push_back({{"episode_id", e.transcript.episode_id},
                                {"title", e.transcript.title},
                                {"duration_minutes", e.transcript.duration_minutes ? json(*e.transcript.duration_minutes) : json(nullptr)},
                                {"video_url", e.video_url ? json(*e.video_url) : json(nullptr)}});
            }
            send_json(res, 200, {{"episodes", list}});
        }));

        server.Post("/api/sessions", guarded([this](const httplib::Request& req, httplib::Response& res) {
            const json body = parse_body(req);
            const auto cond_text = body.contains("condition") ? required_string(body, "condition") : std::string("EaselActivity");
            const auto cond = parse_condition(cond_text);
            if (!cond) throw Error(ErrorCode::Parse, "unknown condition " + cond_text);
            const auto s = store.create_session(required_string(body, "child_id"), required_string(body, "episode_id"), *cond);
            send_json(res, 201, session_json(s));
        }));

        server.Get("/api/sessions/:id", guarded([this](const httplib::Request& req, httplib::Response& res) {
            send_json(res, 200, session_json(store.get_session(req.path_params.at("id"))));
        }));

        server.Get("/api/sessions/:id/activities", guarded([this](const httplib::Request& req, httplib::Response& res) {
            const std::string id = req.path_params.at("id");
            const auto activities = store.activities(id);
            json list = json::array();
            for (const auto& a : activities) list.push_back(to_json(a));
            send_json(res, 200, {{"session_id", id}, {"activities", list}});
        }));

        server.Post("/api/sessions/:id/selection", guarded([this](const httplib::Request& req, httplib::Response& res) {
            const json body = parse_body(req);
            const std::string text = required_string(body, "activity_type");
            const auto type = parse_activity_type(text);
            if (!type) throw Error(ErrorCode::Parse, "unknown activity type " + text);
            send_json(res, 200, session_json(store.select_activity(req.path_params.at("id"), *type)));
        }));

        server.Post("/api/sessions/:id/artifact", guarded([this](const httplib::Request& req, httplib::Response& res) {
            if (!req.is_multipart_form_data()) throw Error(ErrorCode::InvalidArtifact, "expected multipart/form-data");
            if (!req.has_file("kind") || !req.has_file("file")) throw Error(ErrorCode::MissingField, "kind and file are required");
            const std::string kind_text = req.get_file_value("kind").content;
            const auto kind = parse_artifact_kind(kind_text);
            if (!kind) throw Error(ErrorCode::InvalidArtifact, "unknown artifact kind " + kind_text);
            std::optional<ArtifactRole> role;
            if (req.has_file("role")) {
                role = parse_artifact_role(req.get_file_value("role").content);
                if (!role) throw Error(ErrorCode::InvalidArtifact, "role must be response or explanation");
            }
            std::optional<double> duration;
            if (req.has_file("duration_seconds")) {
                try {
                    duration = std::stod(req.get_file_value("duration_seconds").content);
                } catch (const std::exception&) {
                    throw Error(ErrorCode::InvalidArtifact, "duration_seconds is not a number");
                }
            }
            const auto file = req.get_file_value("file");
            std::string media_type = file.content_type;
            if (media_type.empty() || media_type == "application/octet-stream") {
                if (req.has_file("media_type")) media_type = req.get_file_value("media_type").content;
            }
            const auto s = store.record_artifact(req.path_params.at("id"), *kind, file.content, media_type, role, duration);
            send_json(res, 200, session_json(s));
        }));

        server.Post("/api/sessions/:id/complete", guarded([this](const httplib::Request& req, httplib::Response& res) {
            send_json(res, 200, session_json(store.complete_session(req.path_params.at("id"))));
        }));

        server.Get("/api/parent/sessions", parent_only([this](const httplib::Request&, httplib::Response& res) {
            json list = json::array();
            for (const auto& s : store.list_sessions()) list.push_back(session_json(s));
            send_json(res, 200, {{"sessions", list}});
        }));

        server.Get("/api/parent/sessions/:id", parent_only([this](const httplib::Request& req, httplib::Response& res) {
            send_json(res, 200, to_json(store.parent_view(req.path_params.at("id"))));
        }));

        server.Get("/api/parent/sessions/:id/blobs/:name", parent_only([this](const httplib::Request& req, httplib::Response& res) {
            const std::string id = req.path_params.at("id");
            const auto s = store.get_session(id);
            const auto path = store.blob_file(id, req.path_params.at("name"));
            if (!path) throw Error(ErrorCode::SessionNotFound, "no such blob for " + id);
            std::string media_type = "application/octet-stream";
            for (const auto* ref : {&s.artifact, &s.verbal_explanation}) {
                if (*ref && std::filesystem::path((*ref)->blob_path).filename() == path->filename()) media_type = (*ref)->media_type;
            }
            res.status = 200;
            res.set_content(read_file(*path), media_type);
        }));

        if (options.media_dir) server.set_mount_point("/media", options.media_dir->string());
    }
};

Service::Service(Store& store, ServiceOptions options) : impl_(std::make_unique<Impl>(store, std::move(options))) {
    impl_->routes();
}

Service::~Service() { stop(); }

int Service::bind(const std::string& host, int port) {
    if (port == 0) {
        const int bound = impl_->server.bind_to_any_port(host);
        if (bound < 0) throw Error(ErrorCode::Io, "cannot bind " + host);
        return bound;
    }
    if (!impl_->server.bind_to_port(host, port)) {
        throw Error(ErrorCode::Io, "cannot bind " + host + ":" + std::to_string(port));
    }
    return port;
}

void Service::run() { impl_->server.listen_after_bind(); }

void Service::stop() {
    if (impl_ && impl_->server.is_running()) impl_->server.stop();
}

void Service::wait_until_ready() const { impl_->server.wait_until_ready(); }

} // namespace easel
