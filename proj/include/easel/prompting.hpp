#pragma once

#include "easel/taxonomy.hpp"

#include <json.hpp>

#include <filesystem>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <string_view>

namespace easel {

struct Transcript {
    std::string episode_id;
    std::string title;
    std::string body;
    std::optional<double> duration_minutes;
    std::optional<std::string> source_note;
};

// Accepts a JSON document with the Transcript fields, or plain text (the file
// stem becomes episode_id and title).
Transcript load_transcript_file(const std::filesystem::path& path);

// `fallback_id` fills episode_id when the document has none.
Transcript transcript_from_json(const nlohmann::json& doc, const std::string& fallback_id = {});
nlohmann::json to_json(const Transcript& t);

enum class PromptKind { Detection, ChildActivity, ParentStarter, Summary };
std::string_view to_string(PromptKind kind) noexcept;

struct RenderedPrompt {
    PromptKind kind{};
    std::string template_id;
    std::string text;
    // SHA-256 over the template id and every substituted (name, value) pair.
    std::string inputs_digest;
};

// A template asset with `[UPPER_CASE]` placeholders. The placeholder set is
// whatever the asset text declares.
class PromptTemplate {
public:
    PromptTemplate() = default;
    PromptTemplate(std::string id, std::string text);

    const std::string& id() const noexcept { return id_; }
    const std::string& text() const noexcept { return text_; }
    const std::set<std::string>& placeholders() const noexcept { return placeholders_; }

    // Single left-to-right pass, so substituted values are never re-scanned.
    // Throws PlaceholderLeak if a declared placeholder has no value or if a
    // declared token survives in the output.
    std::string render(const std::map<std::string, std::string>& values) const;

private:
    std::string id_;
    std::string text_;
    std::set<std::string> placeholders_;
};

// Every `[NAME]` token (uppercase letters, digits, underscores) in `text`.
std::set<std::string> find_placeholder_tokens(std::string_view text);

// Number of occurrences in `text` of any token from `declared`.
std::size_t count_residual_placeholders(std::string_view text, const std::set<std::string>& declared);

class TemplateLibrary {
public:
    // Expects detection.txt, child_{drawing,imagine,story,act}.txt,
    // child_suffix.txt, parent.txt and summary.txt.
    static TemplateLibrary load(const std::filesystem::path& dir);

    const PromptTemplate& detection() const noexcept { return detection_; }
    const PromptTemplate& child(ActivityType type) const noexcept;
    const PromptTemplate& child_suffix() const noexcept { return child_suffix_; }
    const PromptTemplate& parent() const noexcept { return parent_; }
    const PromptTemplate& summary() const noexcept { return summary_; }

private:
    PromptTemplate detection_;
    PromptTemplate drawing_, imagine_, story_, act_;
    PromptTemplate child_suffix_;
    PromptTemplate parent_;
    PromptTemplate summary_;
};

// Asset root: $EASEL_ASSETS when set, otherwise the directory baked in at build time.
std::filesystem::path default_asset_dir();

RenderedPrompt render_detection_prompt(const TemplateLibrary& lib, const SelSkill& skill,
                                       const Transcript& transcript);

// The activity-type variant followed by the shared criteria suffix.
RenderedPrompt render_child_activity_prompt(const TemplateLibrary& lib, ActivityType type,
                                            const Transcript& transcript, const SelSkill& skill,
                                            std::string_view explanation);

RenderedPrompt render_parent_prompt(const TemplateLibrary& lib, const Transcript& transcript,
                                    const SelSkill& skill, std::string_view explanation);

RenderedPrompt render_summary_prompt(const TemplateLibrary& lib, const Transcript& transcript);

struct DetectionOutcome {
    SkillId skill_id{};
    bool present = false;
    std::optional<std::string> explanation;  // set exactly when present
    std::string raw_response;
    // Set when the pipeline gave up on this skill (provider exhausted).
    std::optional<std::string> diagnostic;

    bool operator==(const DetectionOutcome&) const = default;
};

// Accepts "0" or "1, <explanation>" with optional surrounding whitespace, a
// markdown code fence and a leading "Skill:" label. Explanations are split at
// the first comma only. Anything else is UnparseableResponse.
DetectionOutcome parse_detection_response(std::string_view raw, SkillId skill_id);

// "0" or "1, <explanation>".
std::string canonical_response(const DetectionOutcome& outcome);

} // namespace easel
