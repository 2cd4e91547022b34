#pragma once

#include <array>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace easel {

enum class SkillId { A1, A2, M1, M2, S1, S2, S3, R1, R2, D1 };

inline constexpr std::array<SkillId, 10> kAllSkillIds = {
    SkillId::A1, SkillId::A2, SkillId::M1, SkillId::M2, SkillId::S1,
    SkillId::S2, SkillId::S3, SkillId::R1, SkillId::R2, SkillId::D1,
};

// The five CASEL competency areas.
enum class SkillCategory {
    SelfAwareness,
    SelfManagement,
    SocialAwareness,
    RelationshipSkills,
    ResponsibleDecisionMaking,
};

enum class ActivityType { Drawing, ChangeStory, PersonalStory, RolePlay };

inline constexpr std::array<ActivityType, 4> kAllActivityTypes = {
    ActivityType::Drawing, ActivityType::ChangeStory, ActivityType::PersonalStory, ActivityType::RolePlay,
};

std::string_view to_string(SkillId id) noexcept;
std::optional<SkillId> parse_skill_id(std::string_view s) noexcept;

std::string_view to_string(SkillCategory c) noexcept;
std::optional<SkillCategory> parse_skill_category(std::string_view s) noexcept;

// Category implied by the id's prefix letter.
SkillCategory category_of(SkillId id) noexcept;

std::string_view to_string(ActivityType t) noexcept;
std::optional<ActivityType> parse_activity_type(std::string_view s) noexcept;

// Study condition a session or retelling belongs to.
enum class Condition { NoActivity, EaselActivity };
std::string_view to_string(Condition c) noexcept;
std::optional<Condition> parse_condition(std::string_view s) noexcept;

struct SelSkill {
    SkillId id{};
    SkillCategory category{};
    std::string description;
    std::string definition;
    std::string lack_description;
    std::string positive_example;
    std::string negative_example;
    bool authored = false;

    bool operator==(const SelSkill&) const = default;
};

// Validated, immutable list of the ten skills in canonical order. Safe to share
// across threads once constructed.
class TaxonomyDataset {
public:
    const std::string& version() const noexcept { return version_; }
    const std::vector<SelSkill>& skills() const noexcept { return skills_; }

    // Never fails: a validated dataset always holds every id.
    const SelSkill& lookup(SkillId id) const noexcept;

    bool operator==(const TaxonomyDataset&) const = default;

private:
    friend TaxonomyDataset load_taxonomy(std::string_view document);
    TaxonomyDataset(std::string version, std::vector<SelSkill> skills);

    std::string version_;
    std::vector<SelSkill> skills_;
};

// Parses and validates a taxonomy JSON document. Throws easel::Error with
// MissingField, DuplicateId, CategoryMismatch, WrongSkillCount or Parse.
TaxonomyDataset load_taxonomy(std::string_view document);
TaxonomyDataset load_taxonomy_file(const std::filesystem::path& path);

std::string serialize_taxonomy(const TaxonomyDataset& dataset);

inline const SelSkill& lookup_skill(const TaxonomyDataset& dataset, SkillId id) noexcept {
    return dataset.lookup(id);
}

// "failing to " + lowercase(description); used when the file omits lack_description.
std::string default_lack_description(std::string_view description);

} // namespace easel
