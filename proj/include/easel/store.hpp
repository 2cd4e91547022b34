#pragma once

#include "easel/error.hpp"
#include "easel/pipeline.hpp"
#include "easel/prompting.hpp"
#include "easel/provider.hpp"
#include "easel/taxonomy.hpp"

#include <json.hpp>

#include <filesystem>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <vector>

namespace easel {

enum class ArtifactKind { Drawing, Audio, Video, Text };
std::string_view to_string(ArtifactKind k) noexcept;
std::optional<ArtifactKind> parse_artifact_kind(std::string_view s) noexcept;

// Response is the child's activity output; Explanation is the spoken
// explanation of a drawing or text response.
enum class ArtifactRole { Response, Explanation };
std::string_view to_string(ArtifactRole r) noexcept;
std::optional<ArtifactRole> parse_artifact_role(std::string_view s) noexcept;

struct ArtifactRef {
    ArtifactKind kind{};
    std::string blob_path;  // relative to the store root
    std::string media_type;
    std::optional<double> duration_seconds;
    std::size_t size_bytes = 0;
    std::string sha256;

    bool operator==(const ArtifactRef&) const = default;
};

struct SessionRecord {
    std::string session_id;
    std::string child_id;
    std::string episode_id;
    Condition condition{};
    std::optional<ChildActivity> selected_activity;
    std::optional<ArtifactRef> artifact;
    std::optional<ArtifactRef> verbal_explanation;
    std::string created_at;
    std::optional<std::string> completed_at;

    bool operator==(const SessionRecord&) const = default;
};

struct EpisodeRecord {
    Transcript transcript;
    std::optional<std::string> video_url;
};

struct SkillInfo {
    SkillId id{};
    std::string description;
    std::string definition;
};

struct ParentView {
    std::string session_id;
    std::string child_id;
    std::string episode_id;
    std::string episode_title;
    Condition condition{};
    EpisodeSummary summary;
    std::optional<SkillInfo> skill;
    std::optional<ChildActivity> activity;
    std::optional<ArtifactRef> artifact;
    std::optional<ArtifactRef> verbal_explanation;
    std::optional<ParentStarter> conversation_starter;
    std::string completed_at;
};

nlohmann::json to_json(const ArtifactRef& a);
nlohmann::json to_json(const SessionRecord& s);
nlohmann::json to_json(const ParentView& v);
SessionRecord session_from_json(const nlohmann::json& j);

struct StoreOptions {
    // Text responses, like drawings, wait for a spoken explanation.
    bool explanation_for_text = true;
    std::size_t max_blob_bytes = 64u * 1024u * 1024u;
};

struct RecoveryReport {
    std::vector<std::string> removed_temp_files;
    std::vector<std::string> removed_orphan_blobs;
};

struct IntegrityReport {
    std::vector<std::string> unreadable_records;
    std::vector<std::string> dangling_refs;  // referenced blob missing or wrong size
    std::vector<std::string> orphan_blobs;   // blob not referenced by any session

    bool ok() const noexcept { return unreadable_records.empty() && dangling_refs.empty() && orphan_blobs.empty(); }
};

// File-backed store rooted at a directory:
//
//   episodes/<episode_id>.json      operator-provided transcripts
//   sessions/<session_id>.json      one record per session
//   pipeline/<session_id>.json      pipeline output for the session
//   blobs/<session_id>/<file>       uploaded artifacts
//
// Every document is written with write_file_atomic, and blobs are written
// before the record that references them. Writes to one session are
// serialized; reads take no lock.
class Store {
public:
    Store(std::filesystem::path root, const TaxonomyDataset& taxonomy, const TemplateLibrary& templates,
          ChatProvider& provider, PipelineConfig pipeline_config, StoreOptions options = {});

    const std::filesystem::path& root() const noexcept { return root_; }
    const StoreOptions& options() const noexcept { return options_; }

    // Removes leftover temp files and blobs that no record references. Call
    // before serving; an upload in flight would look like an orphan.
    RecoveryReport recover();
    IntegrityReport check_integrity() const;

    void put_episode(const EpisodeRecord& episode);
    std::vector<EpisodeRecord> list_episodes() const;
    EpisodeRecord get_episode(const std::string& episode_id) const;

    SessionRecord create_session(const std::string& child_id, const std::string& episode_id, Condition condition);
    SessionRecord get_session(const std::string& session_id) const;
    std::vector<SessionRecord> list_sessions() const;

    // Runs the pipeline on first use (EaselActivity only) and returns the
    // generated activities; empty when no skill was detected.
    std::vector<ChildActivity> activities(const std::string& session_id);
    std::optional<PipelineOutput> pipeline_output(const std::string& session_id) const;

    SessionRecord select_activity(const std::string& session_id, ActivityType type);

    // `role` defaults to Explanation when a response is waiting for one.
    SessionRecord record_artifact(const std::string& session_id, ArtifactKind kind, std::string_view blob,
                                  const std::string& media_type, std::optional<ArtifactRole> role = std::nullopt,
                                  std::optional<double> duration_seconds = std::nullopt);

    // Completes a session that has no activity to do: NoActivity sessions, or
    // EaselActivity sessions where no skill was detected.
    SessionRecord complete_session(const std::string& session_id);

    ParentView parent_view(const std::string& session_id) const;

    // Absolute path of a blob referenced by the session, if any.
    std::optional<std::filesystem::path> blob_file(const std::string& session_id, const std::string& name) const;

    bool needs_explanation(const SessionRecord& s) const;

private:
    std::filesystem::path session_path(const std::string& id) const;
    std::filesystem::path pipeline_path(const std::string& id) const;
    std::mutex& session_mutex(const std::string& id);
    void save_session(const SessionRecord& s);
    PipelineOutput ensure_pipeline(const SessionRecord& s);
    static void check_id(const std::string& id, ErrorCode code);

    std::filesystem::path root_;
    const TaxonomyDataset& taxonomy_;
    const TemplateLibrary& templates_;
    ChatProvider& provider_;
    PipelineConfig pipeline_config_;
    StoreOptions options_;

    std::mutex locks_mu_;
    std::map<std::string, std::unique_ptr<std::mutex>> locks_;
};

} // namespace easel
