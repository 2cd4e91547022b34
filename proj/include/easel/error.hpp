#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace easel {

enum class ErrorCode {
    // taxonomy
    MissingField,
    DuplicateId,
    CategoryMismatch,
    WrongSkillCount,
    UnknownSkill,
    // prompting
    PlaceholderLeak,
    UnparseableResponse,
    TemplateMissing,
    // pipeline / providers
    ProviderError,
    ProviderExhausted,
    EmptyGeneration,
    InvalidConfig,
    // evaluation
    KeyMismatch,
    InsufficientRatings,
    NoVariance,
    ZeroVector,
    LengthMismatch,
    EmptyInput,
    SchemaViolation,
    // retelling
    EmptyText,
    AllZeroDifferences,
    UnpairedChild,
    InvalidLexicon,
    // store / service
    UnknownEpisode,
    SessionNotFound,
    ActivityNotSelected,
    ExplanationRequired,
    SessionIncomplete,
    InvalidArtifact,
    Conflict,
    Io,
    Parse,
};

std::string_view to_string(ErrorCode code) noexcept;

// Single exception type for the library; callers branch on code().
class Error : public std::runtime_error {
public:
    Error(ErrorCode code, const std::string& detail);

    ErrorCode code() const noexcept { return code_; }
    const std::string& detail() const noexcept { return detail_; }

private:
    ErrorCode code_;
    std::string detail_;
};

} // namespace easel
