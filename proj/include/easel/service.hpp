#pragma once

#include "easel/error.hpp"
#include "easel/store.hpp"

#include <memory>
#include <string>

namespace easel {

struct ServiceOptions {
    // Required in the X-Easel-Parent header for /api/parent/*. An empty
    // secret disables the parent API.
    std::string parent_secret;
    // Served read-only under /media when set.
    std::optional<std::filesystem::path> media_dir;
};

// HTTP/JSON front end over a Store:
//
//   GET  /api/health
//   GET  /api/episodes
//   POST /api/sessions                      {"child_id", "episode_id", "condition"}
//   GET  /api/sessions/{id}
//   GET  /api/sessions/{id}/activities
//   POST /api/sessions/{id}/selection       {"activity_type"}
//   POST /api/sessions/{id}/artifact        multipart: kind, file, [role], [duration_seconds]
//   POST /api/sessions/{id}/complete
//   GET  /api/parent/sessions
//   GET  /api/parent/sessions/{id}
//   GET  /api/parent/sessions/{id}/blobs/{name}
//
// Errors are {"error": <code>, "message": <detail>} with a matching status.
class Service {
public:
    Service(Store& store, ServiceOptions options);
    ~Service();
    Service(const Service&) = delete;
    Service& operator=(const Service&) = delete;

    // Binds without serving; port 0 picks a free port. Returns the bound port.
    int bind(const std::string& host, int port);
    // Serves until stop(); call after bind().
    void run();
    void stop();
    // Blocks until the server accepts connections.
    void wait_until_ready() const;

private:
    struct Impl;
    std::unique_ptr<Impl> impl_;
};

// HTTP status used for an error code.
int http_status_for(ErrorCode code) noexcept;

} // namespace easel
