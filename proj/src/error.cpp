#include "easel/error.hpp"

namespace easel {

std::string_view to_string(ErrorCode code) noexcept {
    switch (code) {
    case ErrorCode::MissingField: return "MissingField";
    case ErrorCode::DuplicateId: return "DuplicateId";
    case ErrorCode::CategoryMismatch: return "CategoryMismatch";
    case ErrorCode::WrongSkillCount: return "WrongSkillCount";
    case ErrorCode::UnknownSkill: return "UnknownSkill";
    case ErrorCode::PlaceholderLeak: return "PlaceholderLeak";
    case ErrorCode::UnparseableResponse: return "UnparseableResponse";
    case ErrorCode::TemplateMissing: return "TemplateMissing";
    case ErrorCode::ProviderError: return "ProviderError";
    case ErrorCode::ProviderExhausted: return "ProviderExhausted";
    case ErrorCode::EmptyGeneration: return "EmptyGeneration";
    case ErrorCode::InvalidConfig: return "InvalidConfig";
    case ErrorCode::KeyMismatch: return "KeyMismatch";
    case ErrorCode::InsufficientRatings: return "InsufficientRatings";
    case ErrorCode::NoVariance: return "NoVariance";
    case ErrorCode::ZeroVector: return "ZeroVector";
    case ErrorCode::LengthMismatch: return "LengthMismatch";
    case ErrorCode::EmptyInput: return "EmptyInput";
    case ErrorCode::SchemaViolation: return "SchemaViolation";
    case ErrorCode::EmptyText: return "EmptyText";
    case ErrorCode::AllZeroDifferences: return "AllZeroDifferences";
    case ErrorCode::UnpairedChild: return "UnpairedChild";
    case ErrorCode::InvalidLexicon: return "InvalidLexicon";
    case ErrorCode::UnknownEpisode: return "UnknownEpisode";
    case ErrorCode::SessionNotFound: return "SessionNotFound";
    case ErrorCode::ActivityNotSelected: return "ActivityNotSelected";
    case ErrorCode::ExplanationRequired: return "ExplanationRequired";
    case ErrorCode::SessionIncomplete: return "SessionIncomplete";
    case ErrorCode::InvalidArtifact: return "InvalidArtifact";
    case ErrorCode::Conflict: return "Conflict";
    case ErrorCode::Io: return "Io";
    case ErrorCode::Parse: return "Parse";
    }
    return "Unknown";
}

Error::Error(ErrorCode code, const std::string& detail)
    : std::runtime_error(std::string(to_string(code)) + ": " + detail), code_(code), detail_(detail) {}

} // namespace easel
