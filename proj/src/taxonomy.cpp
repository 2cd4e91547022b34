#include "easel/taxonomy.hpp"

#include "easel/error.hpp"
#include "easel/util.hpp"

#include <json.hpp>

#include <algorithm>
#include <set>

namespace easel {

using nlohmann::json;

std::string_view to_string(SkillId id) noexcept {
    switch (id) {
    case SkillId::A1: return "A1";
    case SkillId::A2: return "A2";
    case SkillId::M1: return "M1";
    case SkillId::M2: return "M2";
    case SkillId::S1: return "S1";
    case SkillId::S2: return "S2";
    case SkillId::S3: return "S3";
    case SkillId::R1: return "R1";
    case SkillId::R2: return "R2";
    case SkillId::D1: return "D1";
    }
    return "?";
}

std::optional<SkillId> parse_skill_id(std::string_view s) noexcept {
    for (auto id : kAllSkillIds) {
        if (to_string(id) == s) return id;
    }
    return std::nullopt;
}

std::string_view to_string(SkillCategory c) noexcept {
    switch (c) {
    case SkillCategory::SelfAwareness: return "self_awareness";
    case SkillCategory::SelfManagement: return "self_management";
    case SkillCategory::SocialAwareness: return "social_awareness";
    case SkillCategory::RelationshipSkills: return "relationship_skills";
    case SkillCategory::ResponsibleDecisionMaking: return "responsible_decision_making";
    }
    return "?";
}

std::optional<SkillCategory> parse_skill_category(std::string_view s) noexcept {
    // Accepts "self_awareness", "Self-awareness", "social awareness", ...
    std::string norm = to_lower_ascii(trim(s));
    std::replace(norm.begin(), norm.end(), '-', '_');
    std::replace(norm.begin(), norm.end(), ' ', '_');
    for (auto c : {SkillCategory::SelfAwareness, SkillCategory::SelfManagement, SkillCategory::SocialAwareness,
                   SkillCategory::RelationshipSkills, SkillCategory::ResponsibleDecisionMaking}) {
        if (to_string(c) == norm) return c;
    }
    return std::nullopt;
}

SkillCategory category_of(SkillId id) noexcept {
    switch (to_string(id)[0]) {
    case 'A': return SkillCategory::SelfAwareness;
    case 'M': return SkillCategory::SelfManagement;
    case 'S': return SkillCategory::SocialAwareness;
    case 'R': return SkillCategory::RelationshipSkills;
    default: return SkillCategory::ResponsibleDecisionMaking;
    }
}

std::string_view to_string(ActivityType t) noexcept {
    switch (t) {
    case ActivityType::Drawing: return "Drawing";
    case ActivityType::ChangeStory: return "ChangeStory";
    case ActivityType::PersonalStory: return "PersonalStory";
    case ActivityType::RolePlay: return "RolePlay";
    }
    return "?";
}

std::optional<ActivityType> parse_activity_type(std::string_view s) noexcept {
    const std::string norm = to_lower_ascii(trim(s));
    for (auto t : kAllActivityTypes) {
        if (to_lower_ascii(to_string(t)) == norm) return t;
    }
    return std::nullopt;
}

std::string_view to_string(Condition c) noexcept {
    return c == Condition::NoActivity ? "NoActivity" : "EaselActivity";
}

std::optional<Condition> parse_condition(std::string_view s) noexcept {
    const std::string norm = to_lower_ascii(trim(s));
    if (norm == "noactivity" || norm == "no_activity") return Condition::NoActivity;
    if (norm == "easelactivity" || norm == "easel_activity") return Condition::EaselActivity;
    return std::nullopt;
}

std::string default_lack_description(std::string_view description) {
    return "failing to " + to_lower_ascii(description);
}

TaxonomyDataset::TaxonomyDataset(std::string version, std::vector<SelSkill> skills)
    : version_(std::move(version)), skills_(std::move(skills)) {}

const SelSkill& TaxonomyDataset::lookup(SkillId id) const noexcept {
    // skills_ is stored in canonical order, so the enum value is the index.
    return skills_[static_cast<std::size_t>(id)];
}

namespace {

std::string required_text(const json& obj, const std::string& entry, const char* key) {
    const auto it = obj.find(key);
    if (it == obj.end() || !it->is_string() || trim(it->get_ref<const std::string&>()).empty()) {
        throw Error(ErrorCode::MissingField, entry + "." + key);
    }
    return it->get<std::string>();
}

} // namespace

TaxonomyDataset load_taxonomy(std::string_view document) {
    json doc;
    try {
        doc = json::parse(document);
    } catch (const json::parse_error& e) {
        throw Error(ErrorCode::Parse, std::string("taxonomy: ") + e.what());
    }
    if (!doc.is_object()) throw Error(ErrorCode::Parse, "taxonomy: expected an object");
    const std::string version = required_text(doc, "taxonomy", "version");
    const auto skills_it = doc.find("skills");
    if (skills_it == doc.end() || !skills_it->is_array()) throw Error(ErrorCode::MissingField, "taxonomy.skills");

    std::vector<SelSkill> skills;
    std::set<SkillId> seen;
    std::size_t index = 0;
    for (const auto& entry : *skills_it) {
        const std::string where = "skills[" + std::to_string(index++) + "]";
        if (!entry.is_object()) throw Error(ErrorCode::Parse, where + ": expected an object");
        const std::string id_text = required_text(entry, where, "id");
        const auto id = parse_skill_id(id_text);
        if (!id) throw Error(ErrorCode::Parse, where + ": unknown skill id '" + id_text + "'");
        const std::string name(to_string(*id));
        if (!seen.insert(*id).second) throw Error(ErrorCode::DuplicateId, name);

        SelSkill skill;
        skill.id = *id;
        const std::string category_text = required_text(entry, name, "category");
        const auto category = parse_skill_category(category_text);
        if (!category || *category != category_of(*id)) {
            throw Error(ErrorCode::CategoryMismatch, name + ": '" + category_text + "' does not match prefix");
        }
        skill.category = *category;
        skill.description = required_text(entry, name, "description");
        skill.definition = required_text(entry, name, "definition");
        if (entry.contains("lack_description")) {
            skill.lack_description = required_text(entry, name, "lack_description");
        } else {
            skill.lack_description = default_lack_description(skill.description);
        }
        skill.positive_example = required_text(entry, name, "positive_example");
        skill.negative_example = required_text(entry, name, "negative_example");
        if (const auto a = entry.find("authored"); a != entry.end()) {
            if (!a->is_boolean()) throw Error(ErrorCode::Parse, name + ".authored must be a boolean");
            skill.authored = a->get<bool>();
        }
        skills.push_back(std::move(skill));
    }
    if (skills.size() != kAllSkillIds.size()) {
        throw Error(ErrorCode::WrongSkillCount,
                    "expected 10 skills, found " + std::to_string(skills.size()));
    }
    std::sort(skills.begin(), skills.end(), [](const SelSkill& a, const SelSkill& b) { return a.id < b.id; });
    return TaxonomyDataset(version, std::move(skills));
}

TaxonomyDataset load_taxonomy_file(const std::filesystem::path& path) {
    return load_taxonomy(read_file(path));
}

std::string serialize_taxonomy(const TaxonomyDataset& dataset) {
    json skills = json::array();
    for (const auto& s : dataset.skills()) {
        json entry = json::object();
        entry["id"] = to_string(s.id);
        entry["category"] = to_string(s.category);
        entry["description"] = s.description;
        entry["definition"] = s.definition;
        entry["lack_description"] = s.lack_description;
        entry["positive_example"] = s.positive_example;
        entry["negative_example"] = s.negative_example;
        entry["authored"] = s.authored;
        skills.push_back(std::move(entry));
    }
    json doc = json::object();
    doc["version"] = dataset.version();
    doc["skills"] = std::move(skills);
    return doc.dump(2) + "\n";
}

} // namespace easel
