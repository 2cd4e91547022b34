#include "easel/store.hpp"

#include "easel/error.hpp"
#include "easel/util.hpp"

#include <algorithm>
#include <random>
#include <set>

namespace easel {

namespace fs = std::filesystem;
using nlohmann::json;

std::string_view to_string(ArtifactKind k) noexcept {
    switch (k) {
    case ArtifactKind::Drawing: return "Drawing";
    case ArtifactKind::Audio: return "Audio";
    case ArtifactKind::Video: return "Video";
    case ArtifactKind::Text: return "Text";
    }
    return "?";
}

std::optional<ArtifactKind> parse_artifact_kind(std::string_view s) noexcept {
    const std::string n = to_lower_ascii(trim(s));
    for (auto k : {ArtifactKind::Drawing, ArtifactKind::Audio, ArtifactKind::Video, ArtifactKind::Text}) {
        if (to_lower_ascii(to_string(k)) == n) return k;
    }
    return std::nullopt;
}

std::string_view to_string(ArtifactRole r) noexcept { return r == ArtifactRole::Response ? "response" : "explanation"; }

std::optional<ArtifactRole> parse_artifact_role(std::string_view s) noexcept {
    const std::string n = to_lower_ascii(trim(s));
    if (n == "response") return ArtifactRole::Response;
    if (n == "explanation") return ArtifactRole::Explanation;
    return std::nullopt;
}

json to_json(const ArtifactRef& a) {
    return {{"kind", to_string(a.kind)},
            {"blob_path", a.blob_path},
            {"media_type", a.media_type},
            {"duration_seconds", a.duration_seconds ? json(*a.duration_seconds) : json(nullptr)},
            {"size_bytes", a.size_bytes},
            {"sha256", a.sha256}};
}

namespace {

ArtifactRef artifact_from_json(const json& j) {
    ArtifactRef a;
    const auto kind = parse_artifact_kind(j.at("kind").get<std::string>());
    if (!kind) throw Error(ErrorCode::Parse, "unknown artifact kind " + j.at("kind").dump());
    a.kind = *kind;
    a.blob_path = j.at("blob_path").get<std::string>();
    a.media_type = j.at("media_type").get<std::string>();
    if (j.contains("duration_seconds") && j.at("duration_seconds").is_number()) {
        a.duration_seconds = j.at("duration_seconds").get<double>();
    }
    a.size_bytes = j.value("size_bytes", std::size_t{0});
    a.sha256 = j.value("sha256", std::string{});
    return a;
}

template <typename T>
json opt_json(const std::optional<T>& v) {
    return v ? to_json(*v) : json(nullptr);
}

std::string new_session_id() {
    static std::mutex mu;
    static std::mt19937_64 gen{std::random_device{}()};
    std::lock_guard lock(mu);
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(gen()));
    return std::string("s-") + buf;
}

bool is_temp_name(const std::string& name) { return name.find(".tmp.") != std::string::npos; }

// File extension for a blob; media types outside the table get ".bin".
std::string extension_for(const std::string& media_type) {
    static const std::map<std::string, std::string> table = {
        {"image/png", "png"},   {"image/jpeg", "jpg"}, {"image/svg+xml", "svg"}, {"image/webp", "webp"},
        {"audio/webm", "webm"}, {"audio/ogg", "ogg"},  {"audio/wav", "wav"},      {"audio/x-wav", "wav"},
        {"audio/mpeg", "mp3"},  {"audio/mp4", "m4a"},  {"video/webm", "webm"},    {"video/mp4", "mp4"},
        {"text/plain", "txt"},
    };
    const auto semi = media_type.find(';');
    const auto base = to_lower_ascii(trim(std::string_view(media_type).substr(0, semi)));
    const auto it = table.find(base);
    return it == table.end() ? "bin" : it->second;
}

bool media_matches(ArtifactKind kind, const std::string& media_type) {
    const std::string m = to_lower_ascii(media_type);
    switch (kind) {
    case ArtifactKind::Drawing: return m.rfind("image/", 0) == 0;
    case ArtifactKind::Audio: return m.rfind("audio/", 0) == 0;
    case ArtifactKind::Video: return m.rfind("video/", 0) == 0;
    case ArtifactKind::Text: return m.rfind("text/", 0) == 0;
    }
    return false;
}

json read_json_file(const fs::path& path) {
    try {
        return json::parse(read_file(path));
    } catch (const json::parse_error& e) {
        throw Error(ErrorCode::Parse, path.string() + ": " + e.what());
    }
}

} // namespace

json to_json(const SessionRecord& s) {
    return {
        {"session_id", s.session_id},
        {"child_id", s.child_id},
        {"episode_id", s.episode_id},
        {"condition", to_string(s.condition)},
        {"selected_activity", opt_json(s.selected_activity)},
        {"artifact", opt_json(s.artifact)},
        {"verbal_explanation", opt_json(s.verbal_explanation)},
        {"created_at", s.created_at},
        {"completed_at", s.completed_at ? json(*s.completed_at) : json(nullptr)},
    };
}

SessionRecord session_from_json(const json& j) {
    try {
        SessionRecord s;
        s.session_id = j.at("session_id").get<std::string>();
        s.child_id = j.at("child_id").get<std::string>();
        s.episode_id = j.at("episode_id").get<std::string>();
        const auto cond = parse_condition(j.at("condition").get<std::string>());
        if (!cond) throw Error(ErrorCode::Parse, "unknown condition " + j.at("condition").dump());
        s.condition = *cond;
        if (!j.at("selected_activity").is_null()) s.selected_activity = child_activity_from_json(j.at("selected_activity"));
        if (!j.at("artifact").is_null()) s.artifact = artifact_from_json(j.at("artifact"));
        if (!j.at("verbal_explanation").is_null()) s.verbal_explanation = artifact_from_json(j.at("verbal_explanation"));
        s.created_at = j.at("created_at").get<std::string>();
        if (!j.at("completed_at").is_null()) s.completed_at = j.at("completed_at").get<std::string>();
        return s;
    } catch (const json::exception& e) {
        throw Error(ErrorCode::Parse, std::string("session record: ") + e.what());
    }
}

json to_json(const ParentView& v) {
    json skill = nullptr;
    if (v.skill) {
        skill = {{"id", to_string(v.skill->id)}, {"description", v.skill->description}, {"definition", v.skill->definition}};
    }
    return {
        {"session_id", v.session_id},
        {"child_id", v.child_id},
        {"episode_id", v.episode_id},
        {"episode_title", v.episode_title},
        {"condition", to_string(v.condition)},
        {"summary", to_json(v.summary)},
        {"skill", skill},
        {"activity", opt_json(v.activity)},
        {"artifact", opt_json(v.artifact)},
        {"verbal_explanation", opt_json(v.verbal_explanation)},
        {"conversation_starter", opt_json(v.conversation_starter)},
        {"completed_at", v.completed_at},
    };
}

Store::Store(fs::path root, const TaxonomyDataset& taxonomy, const TemplateLibrary& templates, ChatProvider& provider,
             PipelineConfig pipeline_config, StoreOptions options)
    : root_(std::move(root)),
      taxonomy_(taxonomy),
      templates_(templates),
      provider_(provider),
      pipeline_config_(std::move(pipeline_config)),
      options_(options) {
    pipeline_config_.validate();
    for (const char* sub : {"episodes", "sessions", "pipeline", "blobs"}) fs::create_directories(root_ / sub);
}

void Store::check_id(const std::string& id, ErrorCode code) {
    const bool ok = !id.empty() && id.size() <= 128 && std::all_of(id.begin(), id.end(), [](char c) {
        return std::isalnum(static_cast<unsigned char>(c)) || c == '-' || c == '_' || c == '.';
    }) && id.front() != '.';
    if (!ok) throw Error(code, "invalid id '" + id + "'");
}

fs::path Store::session_path(const std::string& id) const { return root_ / "sessions" / (id + ".json"); }
fs::path Store::pipeline_path(const std::string& id) const { return root_ / "pipeline" / (id + ".json"); }

std::mutex& Store::session_mutex(const std::string& id) {
    std::lock_guard lock(locks_mu_);
    auto& slot = locks_[id];
    if (!slot) slot = std::make_unique<std::mutex>();
    return *slot;
}

void Store::save_session(const SessionRecord& s) { write_file_atomic(session_path(s.session_id), to_json(s).dump(2) + "\n"); }

void Store::put_episode(const EpisodeRecord& episode) {
    check_id(episode.transcript.episode_id, ErrorCode::UnknownEpisode);
    json j = to_json(episode.transcript);
    if (episode.video_url) j["video_url"] = *episode.video_url;
    write_file_atomic(root_ / "episodes" / (episode.transcript.episode_id + ".json"), j.dump(2) + "\n");
}

std::vector<EpisodeRecord> Store::list_episodes() const {
    std::vector<std::string> ids;
    for (const auto& entry : fs::directory_iterator(root_ / "episodes")) {
        const auto name = entry.path().filename().string();
        if (entry.is_regular_file() && entry.path().extension() == ".json" && !is_temp_name(name)) {
            ids.push_back(entry.path().stem().string());
        }
    }
    std::sort(ids.begin(), ids.end());
    std::vector<EpisodeRecord> out;
    for (const auto& id : ids) out.push_back(get_episode(id));
    return out;
}

EpisodeRecord Store::get_episode(const std::string& episode_id) const {
    check_id(episode_id, ErrorCode::UnknownEpisode);
    const fs::path path = root_ / "episodes" / (episode_id + ".json");
    if (!fs::exists(path)) throw Error(ErrorCode::UnknownEpisode, episode_id);
    const json j = read_json_file(path);
    EpisodeRecord e;
    e.transcript = transcript_from_json(j, episode_id);
    if (j.contains("video_url") && j.at("video_url").is_string()) e.video_url = j.at("video_url").get<std::string>();
    return e;
}

SessionRecord Store::create_session(const std::string& child_id, const std::string& episode_id, Condition condition) {
    if (trim(child_id).empty()) throw Error(ErrorCode::MissingField, "child_id");
    get_episode(episode_id);
    SessionRecord s;
    do {
        s.session_id = new_session_id();
    } while (fs::exists(session_path(s.session_id)));
    s.child_id = child_id;
    s.episode_id = episode_id;
    s.condition = condition;
    s.created_at = utc_timestamp();
    std::lock_guard lock(session_mutex(s.session_id));
    save_session(s);
    return s;
}

SessionRecord Store::get_session(const std::string& session_id) const {
    check_id(session_id, ErrorCode::SessionNotFound);
    const fs::path path = session_path(session_id);
    if (!fs::exists(path)) throw Error(ErrorCode::SessionNotFound, session_id);
    return session_from_json(read_json_file(path));
}

std::vector<SessionRecord> Store::list_sessions() const {
    std::vector<std::string> ids;
    for (const auto& entry : fs::directory_iterator(root_ / "sessions")) {
        const auto name = entry.path().filename().string();
        if (entry.is_regular_file() && entry.path().extension() == ".json" && !is_temp_name(name)) {
            ids.push_back(entry.path().stem().string());
        }
    }
    std::sort(ids.begin(), ids.end());
    std::vector<SessionRecord> out;
    for (const auto& id : ids) out.push_back(get_session(id));
    return out;
}

std::optional<PipelineOutput> Store::pipeline_output(const std::string& session_id) const {
    check_id(session_id, ErrorCode::SessionNotFound);
    const fs::path path = pipeline_path(session_id);
    if (!fs::exists(path)) return std::nullopt;
    return pipeline_output_from_json(read_json_file(path));
}

PipelineOutput Store::ensure_pipeline(const SessionRecord& s) {
    if (auto existing = pipeline_output(s.session_id)) return *existing;
    const EpisodeRecord episode = get_episode(s.episode_id);
    Pipeline pipeline(taxonomy_, templates_, provider_, pipeline_config_);
    PipelineOutput out;
    if (s.condition == Condition::EaselActivity) {
        out = pipeline.run(episode.transcript);
    } else {
        out.report.episode_id = episode.transcript.episode_id;
        out.summary = pipeline.summarize_episode(episode.transcript);
        out.seed = pipeline_config_.seed;
        out.config_digest = pipeline_config_.digest();
    }
    write_file_atomic(pipeline_path(s.session_id), to_json(out).dump(2) + "\n");
    return out;
}

std::vector<ChildActivity> Store::activities(const std::string& session_id) {
    check_id(session_id, ErrorCode::SessionNotFound);
    std::lock_guard lock(session_mutex(session_id));
    const SessionRecord s = get_session(session_id);
    if (s.condition != Condition::EaselActivity) {
        throw Error(ErrorCode::Conflict, session_id + " is a NoActivity session");
    }
    return ensure_pipeline(s).child_activities;
}

SessionRecord Store::select_activity(const std::string& session_id, ActivityType type) {
    check_id(session_id, ErrorCode::SessionNotFound);
    std::lock_guard lock(session_mutex(session_id));
    SessionRecord s = get_session(session_id);
    if (s.condition != Condition::EaselActivity) throw Error(ErrorCode::Conflict, session_id + " is a NoActivity session");
    if (s.completed_at) throw Error(ErrorCode::Conflict, session_id + " is already complete");
    if (s.artifact) throw Error(ErrorCode::Conflict, "activity cannot change after an artifact was recorded");
    const PipelineOutput out = ensure_pipeline(s);
    const ChildActivity* activity = out.activity(type);
    if (!activity) throw Error(ErrorCode::Conflict, std::string(to_string(type)) + " was not offered for " + session_id);
    s.selected_activity = *activity;
    save_session(s);
    return s;
}

bool Store::needs_explanation(const SessionRecord& s) const {
    if (!s.artifact || s.verbal_explanation) return false;
    return s.artifact->kind == ArtifactKind::Drawing ||
           (s.artifact->kind == ArtifactKind::Text && options_.explanation_for_text);
}

SessionRecord Store::record_artifact(const std::string& session_id, ArtifactKind kind, std::string_view blob,
                                     const std::string& media_type, std::optional<ArtifactRole> role,
                                     std::optional<double> duration_seconds) {
    check_id(session_id, ErrorCode::SessionNotFound);
    std::lock_guard lock(session_mutex(session_id));
    SessionRecord s = get_session(session_id);
    if (s.condition != Condition::EaselActivity || !s.selected_activity) {
        throw Error(ErrorCode::ActivityNotSelected, session_id + " has no selected activity");
    }
    if (s.completed_at) throw Error(ErrorCode::Conflict, session_id + " is already complete");
    if (blob.empty()) throw Error(ErrorCode::InvalidArtifact, "empty upload");
    if (blob.size() > options_.max_blob_bytes) throw Error(ErrorCode::InvalidArtifact, "upload exceeds size limit");
    if (!media_matches(kind, media_type)) {
        throw Error(ErrorCode::InvalidArtifact,
                    "media type '" + media_type + "' does not fit a " + std::string(to_string(kind)) + " artifact");
    }
    if (duration_seconds && !(*duration_seconds >= 0)) throw Error(ErrorCode::InvalidArtifact, "negative duration");

    const bool pending = needs_explanation(s);
    const ArtifactRole effective = role.value_or(pending ? ArtifactRole::Explanation : ArtifactRole::Response);
    if (pending && (effective != ArtifactRole::Explanation || kind != ArtifactKind::Audio)) {
        throw Error(ErrorCode::ExplanationRequired, "the " + std::string(to_string(s.artifact->kind)) +
                                                        " response still needs a spoken (Audio) explanation");
    }
    if (effective == ArtifactRole::Response && s.artifact) throw Error(ErrorCode::Conflict, "response already recorded");
    if (effective == ArtifactRole::Explanation && !pending) {
        throw Error(ErrorCode::Conflict, "no response is waiting for an explanation");
    }

    const std::string rel =
        "blobs/" + session_id + "/" + std::string(to_string(effective)) + "." + extension_for(media_type);
    fs::create_directories(root_ / "blobs" / session_id);
    write_file_atomic(root_ / rel, blob);

    ArtifactRef ref{kind, rel, media_type, duration_seconds, blob.size(), sha256_hex(blob)};
    if (effective == ArtifactRole::Response) {
        s.artifact = ref;
    } else {
        s.verbal_explanation = ref;
    }
    if (!needs_explanation(s)) s.completed_at = utc_timestamp();
    save_session(s);
    return s;
}

SessionRecord Store::complete_session(const std::string& session_id) {
    check_id(session_id, ErrorCode::SessionNotFound);
    std::lock_guard lock(session_mutex(session_id));
    SessionRecord s = get_session(session_id);
    if (s.completed_at) return s;
    const PipelineOutput out = ensure_pipeline(s);
    if (s.condition == Condition::EaselActivity && out.selected_skill) {
        throw Error(ErrorCode::Conflict, session_id + " has an activity to complete");
    }
    s.completed_at = utc_timestamp();
    save_session(s);
    return s;
}

ParentView Store::parent_view(const std::string& session_id) const {
    const SessionRecord s = get_session(session_id);
    if (!s.completed_at) throw Error(ErrorCode::SessionIncomplete, session_id);
    const auto out = pipeline_output(session_id);
    if (!out) throw Error(ErrorCode::Io, "pipeline output missing for " + session_id);

    ParentView v;
    v.session_id = s.session_id;
    v.child_id = s.child_id;
    v.episode_id = s.episode_id;
    v.episode_title = get_episode(s.episode_id).transcript.title;
    v.condition = s.condition;
    v.summary = out->summary;
    v.completed_at = *s.completed_at;
    if (s.condition == Condition::EaselActivity && out->selected_skill) {
        const SelSkill& skill = taxonomy_.lookup(*out->selected_skill);
        v.skill = SkillInfo{skill.id, skill.description, skill.definition};
        v.activity = s.selected_activity;
        v.artifact = s.artifact;
        v.verbal_explanation = s.verbal_explanation;
        v.conversation_starter = out->parent_starter;
    }
    return v;
}

std::optional<fs::path> Store::blob_file(const std::string& session_id, const std::string& name) const {
    const SessionRecord s = get_session(session_id);
    for (const auto* ref : {&s.artifact, &s.verbal_explanation}) {
        if (*ref && fs::path((*ref)->blob_path).filename() == name) return root_ / (*ref)->blob_path;
    }
    return std::nullopt;
}

RecoveryReport Store::recover() {
    RecoveryReport report;
    for (const auto& entry : fs::recursive_directory_iterator(root_)) {
        if (entry.is_regular_file() && is_temp_name(entry.path().filename().string())) {
            report.removed_temp_files.push_back(fs::relative(entry.path(), root_).generic_string());
        }
    }
    for (const auto& rel : report.removed_temp_files) fs::remove(root_ / rel);

    const auto integrity = check_integrity();
    for (const auto& rel : integrity.orphan_blobs) {
        fs::remove(root_ / rel);
        report.removed_orphan_blobs.push_back(rel);
    }
    for (const auto& dir : fs::directory_iterator(root_ / "blobs")) {
        if (dir.is_directory() && fs::is_empty(dir.path())) fs::remove(dir.path());
    }
    return report;
}

IntegrityReport Store::check_integrity() const {
    IntegrityReport report;
    std::set<std::string> referenced;
    for (const auto& entry : fs::directory_iterator(root_ / "sessions")) {
        const auto name = entry.path().filename().string();
        if (!entry.is_regular_file() || is_temp_name(name)) continue;
        SessionRecord s;
        try {
            s = session_from_json(read_json_file(entry.path()));
        } catch (const Error&) {
            report.unreadable_records.push_back("sessions/" + name);
            continue;
        }
        for (const auto* ref : {&s.artifact, &s.verbal_explanation}) {
            if (!*ref) continue;
            referenced.insert((*ref)->blob_path);
            const fs::path blob = root_ / (*ref)->blob_path;
            if (!fs::exists(blob) || fs::file_size(blob) != (*ref)->size_bytes) {
                report.dangling_refs.push_back(s.session_id + " -> " + (*ref)->blob_path);
            }
        }
    }
    for (const char* sub : {"pipeline", "episodes"}) {
        for (const auto& entry : fs::directory_iterator(root_ / sub)) {
            const auto name = entry.path().filename().string();
            if (!entry.is_regular_file() || is_temp_name(name)) continue;
            try {
                read_json_file(entry.path());
            } catch (const Error&) {
                report.unreadable_records.push_back(std::string(sub) + "/" + name);
            }
        }
    }
    for (const auto& entry : fs::recursive_directory_iterator(root_ / "blobs")) {
        if (!entry.is_regular_file() || is_temp_name(entry.path().filename().string())) continue;
        const auto rel = fs::relative(entry.path(), root_).generic_string();
        if (!referenced.count(rel)) report.orphan_blobs.push_back(rel);
    }
    std::sort(report.orphan_blobs.begin(), report.orphan_blobs.end());
    return report;
}

} // namespace easel
