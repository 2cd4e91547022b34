#pragma once

#include "easel/prompting.hpp"
#include "easel/provider.hpp"
#include "easel/taxonomy.hpp"

#include <json.hpp>

#include <chrono>
#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

namespace easel {

struct RetryPolicy {
    int max_attempts = 3;
    double backoff_initial_ms = 500.0;
    double backoff_factor = 2.0;

    void validate() const;
    bool operator==(const RetryPolicy&) const = default;
};

enum class SelectionPolicy { FirstInOrder, SeededRandom };
std::string_view to_string(SelectionPolicy p) noexcept;
std::optional<SelectionPolicy> parse_selection_policy(std::string_view s) noexcept;

// Either one fixed activity type, or all four so the child can choose.
struct ActivityPolicy {
    bool child_choice = true;
    ActivityType fixed = ActivityType::Drawing;

    static ActivityPolicy ChildChoice() { return {}; }
    static ActivityPolicy Fixed(ActivityType t) { return {false, t}; }
    std::vector<ActivityType> types() const;

    bool operator==(const ActivityPolicy&) const = default;
};

struct PipelineConfig {
    ActivityPolicy activity_policy;
    SelectionPolicy selection = SelectionPolicy::SeededRandom;
    std::uint64_t seed = 0;
    DecodingParams detection_decoding{0.0, 256};
    DecodingParams generation_decoding{0.7, 512};
    std::string model_name = "gpt-4";
    RetryPolicy retry;
    int concurrency = 4;

    void validate() const;
    nlohmann::json to_json() const;
    // SHA-256 of the canonical JSON form.
    std::string digest() const;
};

struct DetectionReport {
    std::string episode_id;
    std::vector<DetectionOutcome> outcomes;  // taxonomy order, one per skill

    std::vector<SkillId> positives() const;
    const DetectionOutcome& outcome(SkillId id) const;
};

struct ChildActivity {
    std::string episode_id;
    SkillId skill_id{};
    ActivityType activity_type{};
    std::string prompt_text;

    bool operator==(const ChildActivity&) const = default;
};

struct ParentStarter {
    std::string episode_id;
    SkillId skill_id{};
    std::string prompt_text;
    std::optional<std::string> examples_text;

    bool operator==(const ParentStarter&) const = default;
};

struct EpisodeSummary {
    std::string episode_id;
    std::string summary_text;

    bool operator==(const EpisodeSummary&) const = default;
};

struct PipelineOutput {
    DetectionReport report;
    std::optional<SkillId> selected_skill;
    // One entry per generated activity type; empty iff no skill is selected.
    std::vector<ChildActivity> child_activities;
    std::optional<ParentStarter> parent_starter;
    EpisodeSummary summary;
    std::uint64_t seed = 0;
    std::string config_digest;
    std::vector<std::string> diagnostics;

    const ChildActivity* activity(ActivityType type) const;
};

std::optional<SkillId> select_skill(const DetectionReport& report, SelectionPolicy policy, std::uint64_t seed);

// Trims whitespace, a leading label ("Activity:", "Parent activity prompt:",
// "Summary:") and one pair of enclosing straight or curly double quotes.
std::string normalize_generation(std::string_view text);

// Splits a parent starter at the first "Examples:" marker.
ParentStarter split_parent_starter(std::string_view text, std::string episode_id, SkillId skill);

// True when the activity's first sentence refers back to the episode.
bool has_episode_reminder(std::string_view prompt_text);

// Sentence count used for summaries.
std::size_t count_sentences(std::string_view text);

// Orchestrates detection -> selection -> generation -> summary against one
// provider. Holds references only; the taxonomy, templates and provider must
// outlive it. A Pipeline may be shared across threads.
class Pipeline {
public:
    using Sleeper = std::function<void(std::chrono::milliseconds)>;

    Pipeline(const TaxonomyDataset& taxonomy, const TemplateLibrary& templates, ChatProvider& provider,
             PipelineConfig config = {});

    const PipelineConfig& config() const noexcept { return config_; }
    void set_sleeper(Sleeper sleeper) { sleeper_ = std::move(sleeper); }

    // Per-skill calls run concurrently up to config.concurrency. A skill whose
    // calls are exhausted is reported absent with a diagnostic.
    DetectionReport detect_skills(const Transcript& transcript) const;

    ChildActivity generate_child_activity(const Transcript& transcript, const SelSkill& skill,
                                          std::string_view explanation, ActivityType type) const;
    ParentStarter generate_parent_starter(const Transcript& transcript, const SelSkill& skill,
                                          std::string_view explanation) const;
    EpisodeSummary summarize_episode(const Transcript& transcript) const;

    // Only summary failures propagate; generation failures clear the
    // selection and are recorded in diagnostics.
    PipelineOutput run(const Transcript& transcript) const;

private:
    template <typename T, typename Accept>
    T call_with_retry(const ProviderRequest& request, Accept&& accept) const;

    const TaxonomyDataset& taxonomy_;
    const TemplateLibrary& templates_;
    ChatProvider& provider_;
    PipelineConfig config_;
    Sleeper sleeper_;
};

nlohmann::json to_json(const DetectionOutcome& o);
nlohmann::json to_json(const DetectionReport& r);
nlohmann::json to_json(const ChildActivity& a);
nlohmann::json to_json(const ParentStarter& p);
nlohmann::json to_json(const EpisodeSummary& s);
nlohmann::json to_json(const PipelineOutput& out);

DetectionReport detection_report_from_json(const nlohmann::json& j);
ChildActivity child_activity_from_json(const nlohmann::json& j);
ParentStarter parent_starter_from_json(const nlohmann::json& j);
PipelineOutput pipeline_output_from_json(const nlohmann::json& j);

} // namespace easel
