#pragma once

#include "easel/taxonomy.hpp"

#include <json.hpp>

#include <filesystem>
#include <map>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace easel {

inline constexpr std::string_view kAffect = "affect";
inline constexpr std::string_view kPositiveEmotion = "positive_emotion";
inline constexpr std::string_view kNegativeEmotion = "negative_emotion";

struct LexiconCategory {
    std::string name;
    std::vector<std::string> entries;  // lowercase literals or stems ending in '*'
};

// Emotion lexicon with the affect, positive_emotion and negative_emotion
// categories. The affect category always includes both valence categories.
class Lexicon {
public:
    // Native format: `%category:<name>` headers, one entry per line, '#'
    // comments. A LIWC 2015 style .dic (category table between '%' lines,
    // then `word<TAB>ids...`) is also accepted; its affect, posemo and
    // negemo categories are used.
    static Lexicon parse(std::string_view text);
    static Lexicon load(const std::filesystem::path& path);

    const LexiconCategory& category(std::string_view name) const;
    const std::vector<LexiconCategory>& categories() const noexcept { return categories_; }

private:
    std::vector<LexiconCategory> categories_;  // affect, positive_emotion, negative_emotion
};

// Lowercases, folds curly quotes to straight ones, splits on whitespace and
// strips leading/trailing punctuation. Internal apostrophes and hyphens stay.
std::vector<std::string> tokenize(std::string_view text);

bool entry_matches(std::string_view token, std::string_view entry);
std::set<std::string> match_lexicon(std::span<const std::string> tokens, const LexiconCategory& category);

struct CategoryFeatures {
    std::set<std::string> matched;
    double proportion = 0.0;  // |matched| / |unique tokens|
};

struct EmotionFeatures {
    std::size_t unique_tokens = 0;
    std::map<std::string, CategoryFeatures> categories;
};

// Throws EmptyText when the text has no tokens.
EmotionFeatures extract_emotion_features(std::string_view text, const Lexicon& lexicon);

enum class ZeroHandling { Discard, Pratt };

struct WilcoxonResult {
    double w = 0.0;  // min(W+, W-)
    double w_plus = 0.0;
    double w_minus = 0.0;
    double p_two_sided = 1.0;
    std::size_t n_used = 0;  // nonzero differences
    bool exact = false;
};

// Differences are a - b. Exact p (over all sign assignments) up to 20 nonzero
// differences, normal approximation with tie and continuity correction above.
// Throws AllZeroDifferences when every difference is zero.
WilcoxonResult wilcoxon_signed_rank(std::span<const std::pair<double, double>> pairs,
                                    ZeroHandling zeros = ZeroHandling::Discard);

// (#{x > y} - #{x < y}) / (|xs| |ys|). Throws EmptyInput.
double cliffs_delta(std::span<const double> xs, std::span<const double> ys);

struct RetellingRecord {
    std::string child_id;
    Condition condition{};
    std::string text;
};

// Rows `child_id, condition, text` (CSV) or a JSON array of such objects.
std::vector<RetellingRecord> load_retellings(const std::filesystem::path& path);
std::vector<RetellingRecord> parse_retellings_csv(std::string_view text);

struct ConditionSummary {
    double mean = 0.0;
    double sd = 0.0;  // sample standard deviation
};

struct PairedStats {
    ConditionSummary easel;
    ConditionSummary no_activity;
    std::size_t n_children = 0;
    // Unset when every paired difference is zero; `error` then says why.
    std::optional<WilcoxonResult> wilcoxon;
    double cliffs_delta = 0.0;  // EaselActivity vs NoActivity
    std::optional<std::string> error;
};

// Paired statistics for per-child values under the two conditions.
PairedStats compare_paired(std::span<const double> easel, std::span<const double> no_activity,
                           ZeroHandling zeros = ZeroHandling::Discard);

// Per category: proportions per child under each condition, then
// compare_paired. Throws UnpairedChild when a child lacks exactly one record
// per condition.
std::map<std::string, PairedStats> compare_conditions(const std::vector<RetellingRecord>& records,
                                                      const Lexicon& lexicon,
                                                      ZeroHandling zeros = ZeroHandling::Discard);

nlohmann::json to_json(const PairedStats& s);

} // namespace easel
