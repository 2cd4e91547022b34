#include "easel/pipeline.hpp"

#include "easel/error.hpp"
#include "easel/util.hpp"

#include <algorithm>
#include <atomic>
#include <exception>
#include <random>
#include <thread>

namespace easel {

using nlohmann::json;

void RetryPolicy::validate() const {
    if (max_attempts < 1) throw Error(ErrorCode::InvalidConfig, "retry.max_attempts must be >= 1");
    if (backoff_initial_ms < 0) throw Error(ErrorCode::InvalidConfig, "retry.backoff_initial_ms must be >= 0");
    if (backoff_factor < 1) throw Error(ErrorCode::InvalidConfig, "retry.backoff_factor must be >= 1");
}

std::string_view to_string(SelectionPolicy p) noexcept {
    return p == SelectionPolicy::FirstInOrder ? "first_in_order" : "seeded_random";
}

std::optional<SelectionPolicy> parse_selection_policy(std::string_view s) noexcept {
    const std::string norm = to_lower_ascii(trim(s));
    if (norm == "first_in_order" || norm == "firstinorder" || norm == "first") return SelectionPolicy::FirstInOrder;
    if (norm == "seeded_random" || norm == "seededrandom" || norm == "random") return SelectionPolicy::SeededRandom;
    return std::nullopt;
}

std::vector<ActivityType> ActivityPolicy::types() const {
    if (child_choice) return {kAllActivityTypes.begin(), kAllActivityTypes.end()};
    return {fixed};
}

void PipelineConfig::validate() const {
    retry.validate();
    if (concurrency < 1) throw Error(ErrorCode::InvalidConfig, "concurrency must be >= 1");
    for (const auto* d : {&detection_decoding, &generation_decoding}) {
        if (!(d->temperature >= 0.0 && d->temperature <= 2.0)) {
            throw Error(ErrorCode::InvalidConfig, "temperature must be in [0, 2]");
        }
        if (d->max_output_tokens <= 0) throw Error(ErrorCode::InvalidConfig, "max_output_tokens must be positive");
    }
    if (model_name.empty()) throw Error(ErrorCode::InvalidConfig, "model_name is empty");
}

json PipelineConfig::to_json() const {
    return {
        {"activity_policy", activity_policy.child_choice ? std::string("child_choice")
                                                         : "fixed:" + std::string(to_string(activity_policy.fixed))},
        {"selection", to_string(selection)},
        {"seed", seed},
        {"detection", {{"temperature", detection_decoding.temperature},
                       {"max_output_tokens", detection_decoding.max_output_tokens}}},
        {"generation", {{"temperature", generation_decoding.temperature},
                        {"max_output_tokens", generation_decoding.max_output_tokens}}},
        {"model_name", model_name},
        {"retry", {{"max_attempts", retry.max_attempts},
                   {"backoff_initial_ms", retry.backoff_initial_ms},
                   {"backoff_factor", retry.backoff_factor}}},
        // concurrency is deliberately excluded: it never changes the output
    };
}

std::string PipelineConfig::digest() const { return sha256_hex(to_json().dump()); }

std::vector<SkillId> DetectionReport::positives() const {
    std::vector<SkillId> out;
    for (const auto& o : outcomes) {
        if (o.present) out.push_back(o.skill_id);
    }
    return out;
}

const DetectionOutcome& DetectionReport::outcome(SkillId id) const {
    for (const auto& o : outcomes) {
        if (o.skill_id == id) return o;
    }
    throw Error(ErrorCode::UnknownSkill, std::string(to_string(id)) + " not in report");
}

const ChildActivity* PipelineOutput::activity(ActivityType type) const {
    for (const auto& a : child_activities) {
        if (a.activity_type == type) return &a;
    }
    return nullptr;
}

std::optional<SkillId> select_skill(const DetectionReport& report, SelectionPolicy policy, std::uint64_t seed) {
    const auto positives = report.positives();
    if (positives.empty()) return std::nullopt;
    if (policy == SelectionPolicy::FirstInOrder || positives.size() == 1) return positives.front();

    // seed_seq and mt19937_64 are fully specified by the standard, so the
    // choice is reproducible across platforms (unlike the distributions).
    std::uint32_t mask = 0;
    for (auto id : positives) mask |= 1u << static_cast<unsigned>(id);
    std::seed_seq seq{static_cast<std::uint32_t>(seed & 0xffffffffu), static_cast<std::uint32_t>(seed >> 32), mask};
    std::mt19937_64 gen(seq);
    return positives[gen() % positives.size()];
}

std::string normalize_generation(std::string_view text) {
    std::string_view s = trim(text);
    for (std::string_view label : {"parent activity prompt:", "activity:", "summary:", "conversation starter:"}) {
        if (starts_with_ci(s, label)) {
            s = trim(s.substr(label.size()));
            break;
        }
    }
    constexpr std::string_view open_curly = "\xE2\x80\x9C";   // “
    constexpr std::string_view close_curly = "\xE2\x80\x9D";  // ”
    if (s.size() >= 2 && s.front() == '"' && s.back() == '"') {
        s = trim(s.substr(1, s.size() - 2));
    } else if (s.size() >= 6 && s.substr(0, 3) == open_curly && s.substr(s.size() - 3) == close_curly) {
        s = trim(s.substr(3, s.size() - 6));
    }
    return std::string(s);
}

ParentStarter split_parent_starter(std::string_view text, std::string episode_id, SkillId skill) {
    ParentStarter out;
    out.episode_id = std::move(episode_id);
    out.skill_id = skill;
    constexpr std::string_view marker = "Examples:";
    const auto pos = text.find(marker);
    if (pos == std::string_view::npos) {
        out.prompt_text = std::string(trim(text));
        return out;
    }
    out.prompt_text = std::string(trim(text.substr(0, pos)));
    const auto rest = trim(text.substr(pos + marker.size()));
    if (!rest.empty()) out.examples_text = std::string(rest);
    return out;
}

bool has_episode_reminder(std::string_view prompt_text) {
    const auto sentences = split_sentences(prompt_text);
    if (sentences.empty()) return false;
    const std::string first = to_lower_ascii(sentences.front());
    for (const char* cue : {"video", "show", "episode", "story", "cartoon", "watched"}) {
        if (first.find(cue) != std::string::npos) return true;
    }
    return false;
}

std::size_t count_sentences(std::string_view text) { return split_sentences(text).size(); }

Pipeline::Pipeline(const TaxonomyDataset& taxonomy, const TemplateLibrary& templates, ChatProvider& provider,
                   PipelineConfig config)
    : taxonomy_(taxonomy),
      templates_(templates),
      provider_(provider),
      config_(std::move(config)),
      sleeper_([](std::chrono::milliseconds ms) { std::this_thread::sleep_for(ms); }) {
    config_.validate();
}

template <typename T, typename Accept>
T Pipeline::call_with_retry(const ProviderRequest& request, Accept&& accept) const {
    std::optional<Error> last;
    double backoff = config_.retry.backoff_initial_ms;
    for (int attempt = 1; attempt <= config_.retry.max_attempts; ++attempt) {
        if (attempt > 1) {
            if (backoff > 0) sleeper_(std::chrono::milliseconds(static_cast<long long>(backoff)));
            backoff *= config_.retry.backoff_factor;
        }
        try {
            return accept(provider_.complete(request));
        } catch (const Error& e) {
            switch (e.code()) {
            case ErrorCode::ProviderError:
            case ErrorCode::UnparseableResponse:
            case ErrorCode::EmptyGeneration:
                last = e;
                break;
            default:
                throw;
            }
        }
    }
    if (last && last->code() == ErrorCode::EmptyGeneration) {
        throw Error(ErrorCode::EmptyGeneration, request.purpose + ": provider returned only whitespace");
    }
    throw Error(ErrorCode::ProviderExhausted, request.purpose + " after " +
                                                  std::to_string(config_.retry.max_attempts) +
                                                  " attempt(s): " + (last ? last->what() : "no attempt"));
}

DetectionReport Pipeline::detect_skills(const Transcript& transcript) const {
    const auto& skills = taxonomy_.skills();
    DetectionReport report;
    report.episode_id = transcript.episode_id;
    report.outcomes.resize(skills.size());

    // Render up front so template errors surface before any provider traffic.
    std::vector<RenderedPrompt> prompts;
    prompts.reserve(skills.size());
    for (const auto& skill : skills) prompts.push_back(render_detection_prompt(templates_, skill, transcript));

    std::atomic<std::size_t> next{0};
    std::vector<std::exception_ptr> errors(skills.size());
    const auto worker = [&] {
        for (std::size_t i = next++; i < skills.size(); i = next++) {
            const SkillId id = skills[i].id;
            ProviderRequest req{prompts[i].text, config_.detection_decoding, config_.model_name,
                                "detection:" + std::string(to_string(id))};
            std::string last_raw;
            try {
                report.outcomes[i] = call_with_retry<DetectionOutcome>(req, [&](const ProviderResponse& r) {
                    last_raw = r.text;
                    return parse_detection_response(r.text, id);
                });
            } catch (const Error& e) {
                if (e.code() != ErrorCode::ProviderExhausted) {
                    errors[i] = std::current_exception();
                    continue;
                }
                DetectionOutcome failed;
                failed.skill_id = id;
                failed.present = false;
                failed.raw_response = last_raw;
                failed.diagnostic = e.what();
                report.outcomes[i] = std::move(failed);
            } catch (...) {
                errors[i] = std::current_exception();
            }
        }
    };

    const auto n_threads = std::min<std::size_t>(static_cast<std::size_t>(config_.concurrency), skills.size());
    std::vector<std::thread> threads;
    for (std::size_t t = 1; t < n_threads; ++t) threads.emplace_back(worker);
    worker();
    for (auto& t : threads) t.join();
    for (const auto& e : errors) {
        if (e) std::rethrow_exception(e);
    }
    return report;
}

ChildActivity Pipeline::generate_child_activity(const Transcript& transcript, const SelSkill& skill,
                                                std::string_view explanation, ActivityType type) const {
    const auto prompt = render_child_activity_prompt(templates_, type, transcript, skill, explanation);
    ProviderRequest req{prompt.text, config_.generation_decoding, config_.model_name,
                        "child:" + std::string(to_string(type))};
    auto text = call_with_retry<std::string>(req, [](const ProviderResponse& r) {
        auto cleaned = normalize_generation(r.text);
        if (cleaned.empty()) throw Error(ErrorCode::EmptyGeneration, "empty activity");
        return cleaned;
    });
    return ChildActivity{transcript.episode_id, skill.id, type, std::move(text)};
}

ParentStarter Pipeline::generate_parent_starter(const Transcript& transcript, const SelSkill& skill,
                                                std::string_view explanation) const {
    const auto prompt = render_parent_prompt(templates_, transcript, skill, explanation);
    ProviderRequest req{prompt.text, config_.generation_decoding, config_.model_name, "parent"};
    return call_with_retry<ParentStarter>(req, [&](const ProviderResponse& r) {
        auto starter = split_parent_starter(normalize_generation(r.text), transcript.episode_id, skill.id);
        if (starter.prompt_text.empty()) throw Error(ErrorCode::EmptyGeneration, "empty conversation starter");
        return starter;
    });
}

EpisodeSummary Pipeline::summarize_episode(const Transcript& transcript) const {
    const auto prompt = render_summary_prompt(templates_, transcript);
    ProviderRequest req{prompt.text, config_.generation_decoding, config_.model_name, "summary"};
    auto text = call_with_retry<std::string>(req, [](const ProviderResponse& r) {
        auto cleaned = normalize_generation(r.text);
        if (cleaned.empty()) throw Error(ErrorCode::EmptyGeneration, "empty summary");
        return cleaned;
    });
    return EpisodeSummary{transcript.episode_id, std::move(text)};
}

PipelineOutput Pipeline::run(const Transcript& transcript) const {
    PipelineOutput out;
    out.seed = config_.seed;
    out.config_digest = config_.digest();
    out.report = detect_skills(transcript);
    for (const auto& o : out.report.outcomes) {
        if (o.diagnostic) out.diagnostics.push_back("detection " + std::string(to_string(o.skill_id)) + ": " + *o.diagnostic);
    }

    out.selected_skill = select_skill(out.report, config_.selection, config_.seed);
    if (out.selected_skill) {
        const SelSkill& skill = taxonomy_.lookup(*out.selected_skill);
        const std::string explanation = out.report.outcome(skill.id).explanation.value_or("");
        try {
            for (auto type : config_.activity_policy.types()) {
                auto activity = generate_child_activity(transcript, skill, explanation, type);
                if (!has_episode_reminder(activity.prompt_text)) {
                    out.diagnostics.push_back("child activity " + std::string(to_string(type)) +
                                              ": no reminder of the episode in the first sentence");
                }
                out.child_activities.push_back(std::move(activity));
            }
            out.parent_starter = generate_parent_starter(transcript, skill, explanation);
        } catch (const Error& e) {
            if (e.code() != ErrorCode::ProviderExhausted && e.code() != ErrorCode::EmptyGeneration) throw;
            out.diagnostics.push_back(std::string("generation for ") + std::string(to_string(skill.id)) +
                                      " abandoned: " + e.what());
            out.selected_skill.reset();
            out.child_activities.clear();
            out.parent_starter.reset();
        }
    }

    out.summary = summarize_episode(transcript);
    return out;
}

// ---- serialization ---------------------------------------------------------

namespace {

json optional_text(const std::optional<std::string>& s) { return s ? json(*s) : json(nullptr); }

std::optional<std::string> optional_text(const json& j, const char* key) {
    if (!j.contains(key) || j.at(key).is_null()) return std::nullopt;
    return j.at(key).get<std::string>();
}

SkillId skill_from(const json& j, const char* key) {
    const auto text = j.at(key).get<std::string>();
    const auto id = parse_skill_id(text);
    if (!id) throw Error(ErrorCode::Parse, "unknown skill id " + text);
    return *id;
}

ActivityType activity_from(const json& j, const char* key) {
    const auto text = j.at(key).get<std::string>();
    const auto t = parse_activity_type(text);
    if (!t) throw Error(ErrorCode::Parse, "unknown activity type " + text);
    return *t;
}

} // namespace

json to_json(const DetectionOutcome& o) {
    json j = {
        {"skill_id", to_string(o.skill_id)},
        {"present", o.present},
        {"explanation", optional_text(o.explanation)},
        {"raw_response", o.raw_response},
    };
    if (o.diagnostic) j["diagnostic"] = *o.diagnostic;
    return j;
}

json to_json(const DetectionReport& r) {
    json outcomes = json::array();
    for (const auto& o : r.outcomes) outcomes.push_back(to_json(o));
    return {{"episode_id", r.episode_id}, {"outcomes", std::move(outcomes)}};
}

json to_json(const ChildActivity& a) {
    return {{"episode_id", a.episode_id},
            {"skill_id", to_string(a.skill_id)},
            {"activity_type", to_string(a.activity_type)},
            {"prompt_text", a.prompt_text}};
}

json to_json(const ParentStarter& p) {
    return {{"episode_id", p.episode_id},
            {"skill_id", to_string(p.skill_id)},
            {"prompt_text", p.prompt_text},
            {"examples_text", optional_text(p.examples_text)}};
}

json to_json(const EpisodeSummary& s) { return {{"episode_id", s.episode_id}, {"summary_text", s.summary_text}}; }

json to_json(const PipelineOutput& out) {
    json activities = json::array();
    for (const auto& a : out.child_activities) activities.push_back(to_json(a));
    return {
        {"report", to_json(out.report)},
        {"selected_skill", out.selected_skill ? json(to_string(*out.selected_skill)) : json(nullptr)},
        {"child_activities", std::move(activities)},
        {"parent_starter", out.parent_starter ? to_json(*out.parent_starter) : json(nullptr)},
        {"summary", to_json(out.summary)},
        {"seed", out.seed},
        {"config_digest", out.config_digest},
        {"diagnostics", out.diagnostics},
    };
}

DetectionReport detection_report_from_json(const json& j) {
    DetectionReport r;
    r.episode_id = j.at("episode_id").get<std::string>();
    for (const auto& o : j.at("outcomes")) {
        DetectionOutcome d;
        d.skill_id = skill_from(o, "skill_id");
        d.present = o.at("present").get<bool>();
        d.explanation = optional_text(o, "explanation");
        d.raw_response = o.value("raw_response", std::string{});
        d.diagnostic = optional_text(o, "diagnostic");
        r.outcomes.push_back(std::move(d));
    }
    return r;
}

ChildActivity child_activity_from_json(const json& j) {
    return ChildActivity{j.at("episode_id").get<std::string>(), skill_from(j, "skill_id"),
                         activity_from(j, "activity_type"), j.at("prompt_text").get<std::string>()};
}

ParentStarter parent_starter_from_json(const json& j) {
    ParentStarter p;
    p.episode_id = j.at("episode_id").get<std::string>();
    p.skill_id = skill_from(j, "skill_id");
    p.prompt_text = j.at("prompt_text").get<std::string>();
    p.examples_text = optional_text(j, "examples_text");
    return p;
}

PipelineOutput pipeline_output_from_json(const json& j) {
    try {
        PipelineOutput out;
        out.report = detection_report_from_json(j.at("report"));
        if (!j.at("selected_skill").is_null()) out.selected_skill = skill_from(j, "selected_skill");
        for (const auto& a : j.at("child_activities")) out.child_activities.push_back(child_activity_from_json(a));
        if (!j.at("parent_starter").is_null()) out.parent_starter = parent_starter_from_json(j.at("parent_starter"));
        out.summary.episode_id = j.at("summary").at("episode_id").get<std::string>();
        out.summary.summary_text = j.at("summary").at("summary_text").get<std::string>();
        out.seed = j.at("seed").get<std::uint64_t>();
        out.config_digest = j.at("config_digest").get<std::string>();
        out.diagnostics = j.value("diagnostics", std::vector<std::string>{});
        return out;
    } catch (const json::exception& e) {
        throw Error(ErrorCode::Parse, std::string("pipeline output: ") + e.what());
    }
}

} // namespace easel
