#include "easel/prompting.hpp"

#include "easel/error.hpp"
#include "easel/util.hpp"

#include <json.hpp>

#include <cctype>
#include <cstdlib>

#ifndef EASEL_ASSET_DIR
#define EASEL_ASSET_DIR "assets"
#endif

namespace easel {

using nlohmann::json;

std::string_view to_string(PromptKind kind) noexcept {
    switch (kind) {
    case PromptKind::Detection: return "Detection";
    case PromptKind::ChildActivity: return "ChildActivity";
    case PromptKind::ParentStarter: return "ParentStarter";
    case PromptKind::Summary: return "Summary";
    }
    return "?";
}

Transcript transcript_from_json(const json& doc, const std::string& fallback_id) {
    Transcript t;
    try {
        t.episode_id = doc.value("episode_id", fallback_id);
        t.title = doc.value("title", t.episode_id);
        t.body = doc.value("body", std::string{});
        if (doc.contains("duration_minutes") && doc["duration_minutes"].is_number()) {
            t.duration_minutes = doc["duration_minutes"].get<double>();
        }
        if (doc.contains("source_note") && doc["source_note"].is_string()) {
            t.source_note = doc["source_note"].get<std::string>();
        }
    } catch (const json::exception& e) {
        throw Error(ErrorCode::Parse, std::string("transcript: ") + e.what());
    }
    if (t.episode_id.empty()) throw Error(ErrorCode::MissingField, "transcript episode_id");
    if (trim(t.body).empty()) throw Error(ErrorCode::MissingField, t.episode_id + ": transcript body");
    return t;
}

json to_json(const Transcript& t) {
    json j = {{"episode_id", t.episode_id}, {"title", t.title}, {"body", t.body}};
    if (t.duration_minutes) j["duration_minutes"] = *t.duration_minutes;
    if (t.source_note) j["source_note"] = *t.source_note;
    return j;
}

Transcript load_transcript_file(const std::filesystem::path& path) {
    const std::string contents = read_file(path);
    if (path.extension() == ".json") {
        json doc;
        try {
            doc = json::parse(contents);
        } catch (const json::parse_error& e) {
            throw Error(ErrorCode::Parse, path.string() + ": " + e.what());
        }
        return transcript_from_json(doc, path.stem().string());
    }
    Transcript t;
    t.episode_id = path.stem().string();
    t.title = t.episode_id;
    t.body = std::string(trim(contents));
    if (t.body.empty()) throw Error(ErrorCode::MissingField, path.string() + ": transcript body");
    return t;
}

namespace {

bool is_token_char(char c) {
    return (c >= 'A' && c <= 'Z') || (c >= '0' && c <= '9') || c == '_';
}

// Scans `text` for `[TOKEN]` at position `i`; returns token length (without brackets) or 0.
std::size_t token_at(std::string_view text, std::size_t i) {
    if (text[i] != '[') return 0;
    std::size_t j = i + 1;
    while (j < text.size() && is_token_char(text[j])) ++j;
    if (j == i + 1 || j >= text.size() || text[j] != ']') return 0;
    if (!(text[i + 1] >= 'A' && text[i + 1] <= 'Z')) return 0;
    return j - i - 1;
}

} // namespace

std::set<std::string> find_placeholder_tokens(std::string_view text) {
    std::set<std::string> out;
    for (std::size_t i = 0; i < text.size(); ++i) {
        if (const auto n = token_at(text, i); n > 0) {
            out.emplace(text.substr(i + 1, n));
            i += n + 1;
        }
    }
    return out;
}

std::size_t count_residual_placeholders(std::string_view text, const std::set<std::string>& declared) {
    std::size_t hits = 0;
    for (std::size_t i = 0; i < text.size(); ++i) {
        if (const auto n = token_at(text, i); n > 0) {
            if (declared.count(std::string(text.substr(i + 1, n)))) ++hits;
        }
    }
    return hits;
}

PromptTemplate::PromptTemplate(std::string id, std::string text)
    : id_(std::move(id)), text_(std::move(text)), placeholders_(find_placeholder_tokens(text_)) {}

std::string PromptTemplate::render(const std::map<std::string, std::string>& values) const {
    for (const auto& name : placeholders_) {
        if (!values.count(name)) throw Error(ErrorCode::PlaceholderLeak, id_ + ": no value for [" + name + "]");
    }
    std::string out;
    out.reserve(text_.size() + 1024);
    const std::string_view text = text_;
    for (std::size_t i = 0; i < text.size(); ++i) {
        if (const auto n = token_at(text, i); n > 0) {
            const auto it = values.find(std::string(text.substr(i + 1, n)));
            if (it != values.end()) {
                out += it->second;
                i += n + 1;
                continue;
            }
        }
        out.push_back(text[i]);
    }
    if (const auto leaks = count_residual_placeholders(out, placeholders_); leaks > 0) {
        throw Error(ErrorCode::PlaceholderLeak,
                    id_ + ": " + std::to_string(leaks) + " placeholder token(s) remain after substitution");
    }
    return out;
}

TemplateLibrary TemplateLibrary::load(const std::filesystem::path& dir) {
    const auto read = [&](const char* name) {
        const auto path = dir / name;
        if (!std::filesystem::exists(path)) throw Error(ErrorCode::TemplateMissing, path.string());
        return PromptTemplate(std::filesystem::path(name).stem().string(), read_file(path));
    };
    TemplateLibrary lib;
    lib.detection_ = read("detection.txt");
    lib.drawing_ = read("child_drawing.txt");
    lib.imagine_ = read("child_imagine.txt");
    lib.story_ = read("child_story.txt");
    lib.act_ = read("child_act.txt");
    lib.child_suffix_ = read("child_suffix.txt");
    lib.parent_ = read("parent.txt");
    lib.summary_ = read("summary.txt");
    return lib;
}

const PromptTemplate& TemplateLibrary::child(ActivityType type) const noexcept {
    switch (type) {
    case ActivityType::Drawing: return drawing_;
    case ActivityType::ChangeStory: return imagine_;
    case ActivityType::PersonalStory: return story_;
    case ActivityType::RolePlay: return act_;
    }
    return drawing_;
}

std::filesystem::path default_asset_dir() {
    if (const char* env = std::getenv("EASEL_ASSETS"); env && *env) return env;
    return EASEL_ASSET_DIR;
}

namespace {

std::string inputs_digest(std::string_view template_id, const std::map<std::string, std::string>& values) {
    std::string canon(template_id);
    canon.push_back('\n');
    for (const auto& [name, value] : values) {
        canon += name;
        canon += '=';
        canon += std::to_string(value.size());
        canon += ':';
        canon += value;
        canon.push_back('\n');
    }
    return sha256_hex(canon);
}

RenderedPrompt render_with(PromptKind kind, const PromptTemplate& tpl, std::map<std::string, std::string> values) {
    RenderedPrompt out;
    out.kind = kind;
    out.template_id = tpl.id();
    out.text = tpl.render(values);
    out.inputs_digest = inputs_digest(out.template_id, values);
    return out;
}

void require_body(const Transcript& transcript) {
    if (trim(transcript.body).empty()) throw Error(ErrorCode::MissingField, "transcript.body");
}

} // namespace

RenderedPrompt render_detection_prompt(const TemplateLibrary& lib, const SelSkill& skill,
                                       const Transcript& transcript) {
    require_body(transcript);
    return render_with(PromptKind::Detection, lib.detection(),
                       {
                           {"SKILL", skill.description},
                           {"LACK_OF_SKILL", skill.lack_description},
                           {"SKILL_DEFINITION", skill.definition},
                           {"POSITIVE_EXAMPLE", skill.positive_example},
                           {"NEGATIVE_EXAMPLE", skill.negative_example},
                           {"TRANSCRIPT", transcript.body},
                       });
}

RenderedPrompt render_child_activity_prompt(const TemplateLibrary& lib, ActivityType type,
                                            const Transcript& transcript, const SelSkill& skill,
                                            std::string_view explanation) {
    require_body(transcript);
    if (trim(explanation).empty()) throw Error(ErrorCode::MissingField, "explanation");
    const PromptTemplate combined(lib.child(type).id() + "+" + lib.child_suffix().id(),
                                  lib.child(type).text() + lib.child_suffix().text());
    return render_with(PromptKind::ChildActivity, combined,
                       {
                           {"TRANSCRIPT", transcript.body},
                           {"SKILL_DESCRIPTION", skill.description},
                           {"SKILL_EXPLANATION", std::string(explanation)},
                       });
}

RenderedPrompt render_parent_prompt(const TemplateLibrary& lib, const Transcript& transcript,
                                    const SelSkill& skill, std::string_view explanation) {
    require_body(transcript);
    if (trim(explanation).empty()) throw Error(ErrorCode::MissingField, "explanation");
    return render_with(PromptKind::ParentStarter, lib.parent(),
                       {
                           {"TRANSCRIPT", transcript.body},
                           {"SKILL_DESCRIPTION", skill.description},
                           {"SKILL_EXPLANATION", std::string(explanation)},
                       });
}

RenderedPrompt render_summary_prompt(const TemplateLibrary& lib, const Transcript& transcript) {
    require_body(transcript);
    return render_with(PromptKind::Summary, lib.summary(), {{"TRANSCRIPT", transcript.body}});
}

namespace {

[[noreturn]] void unparseable(SkillId id, std::string_view why) {
    throw Error(ErrorCode::UnparseableResponse, std::string(to_string(id)) + ": " + std::string(why));
}

// Removes one enclosing ``` fence (with optional info string) if present.
std::string_view strip_fence(std::string_view s) {
    if (s.substr(0, 3) != "```") return s;
    const auto first_nl = s.find('\n');
    if (first_nl == std::string_view::npos) return s;
    s.remove_prefix(first_nl + 1);
    s = trim(s);
    if (s.size() >= 3 && s.substr(s.size() - 3) == "```") s.remove_suffix(3);
    return trim(s);
}

} // namespace

DetectionOutcome parse_detection_response(std::string_view raw, SkillId skill_id) {
    DetectionOutcome out;
    out.skill_id = skill_id;
    out.raw_response = std::string(raw);

    std::string_view s = trim(raw);
    if (s.empty()) unparseable(skill_id, "empty response");
    s = strip_fence(s);
    if (starts_with_ci(s, "skill:")) s = trim(s.substr(6));
    if (s.empty()) unparseable(skill_id, "no rating token");

    std::size_t end = 0;
    while (end < s.size() && s[end] != ',' && !std::isspace(static_cast<unsigned char>(s[end]))) ++end;
    const std::string_view token = s.substr(0, end);
    std::string_view rest = trim(s.substr(end));

    if (token == "0") {
        out.present = false;
        return out;
    }
    if (token != "1") unparseable(skill_id, "rating token is neither 0 nor 1");
    if (rest.empty() || rest.front() != ',') unparseable(skill_id, "rating 1 without a comma-separated explanation");
    const std::string_view explanation = trim(rest.substr(1));
    if (explanation.empty()) unparseable(skill_id, "rating 1 with an empty explanation");
    out.present = true;
    out.explanation = std::string(explanation);
    return out;
}

std::string canonical_response(const DetectionOutcome& outcome) {
    if (!outcome.present) return "0";
    return "1, " + outcome.explanation.value_or("");
}

} // namespace easel
