#pragma once

#include "easel/taxonomy.hpp"

#include <json.hpp>

#include <compare>
#include <filesystem>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace easel {

struct LabelKey {
    std::string episode_id;
    SkillId skill_id{};

    auto operator<=>(const LabelKey&) const = default;
};

struct Label {
    bool present = false;
    std::optional<std::string> explanation;

    bool operator==(const Label&) const = default;
};

using GoldLabelSet = std::map<LabelKey, Label>;
using PredictionSet = std::map<LabelKey, Label>;

// Reads `episode_id, skill_id, present, explanation` rows from a CSV file, or
// a JSON document holding either such records or detection reports / pipeline
// outputs (anything with "episode_id" + "outcomes").
std::map<LabelKey, Label> load_labels(const std::filesystem::path& path);
std::map<LabelKey, Label> parse_labels_csv(std::string_view text);
std::map<LabelKey, Label> parse_labels_json(const nlohmann::json& doc);

struct ConfusionCounts {
    std::size_t tp = 0, fp = 0, fn = 0, tn = 0;

    std::size_t total() const noexcept { return tp + fp + fn + tn; }
    bool operator==(const ConfusionCounts&) const = default;
};

struct BinaryScores {
    ConfusionCounts counts;
    double accuracy = 0.0;
    double precision = 0.0;
    double recall = 0.0;
    double f1 = 0.0;  // 0 when precision + recall == 0
};

// Present is the positive class. Ratios with a zero denominator are 0.
BinaryScores binary_scores(const ConfusionCounts& counts);

struct DetectionScores {
    std::vector<std::pair<SkillId, BinaryScores>> per_skill;  // canonical order, skills seen in gold only
    BinaryScores overall;                                    // pooled over all keys
};

// Throws KeyMismatch naming the gold keys missing from `predictions`.
// Predictions for keys outside the gold set are ignored.
DetectionScores score_detection(const PredictionSet& predictions, const GoldLabelSet& gold);

nlohmann::json to_json(const BinaryScores& s);
nlohmann::json to_json(const DetectionScores& s);

// Items x raters grid of nominal ratings; std::nullopt marks a missing cell.
struct RaterTable {
    std::vector<std::string> items;
    std::vector<std::string> raters;
    std::vector<std::vector<std::optional<int>>> values;  // [item][rater]

    void validate() const;
};

// Long format rows `item_id, rater_id, value`; blank value means missing.
RaterTable parse_rater_table_csv(std::string_view text);

// Fraction of items with at least two ratings on which every rating agrees.
double percent_agreement(const RaterTable& table);

struct AlphaResult {
    double alpha = 1.0;
    // Only one value occurs among pairable ratings; alpha is undefined and
    // reported as 1.0.
    bool no_variance = false;
    std::size_t pairable_values = 0;
};

// Nominal Krippendorff's alpha from the coincidence matrix; units with fewer
// than two ratings are dropped.
AlphaResult krippendorff_alpha(const RaterTable& table);

double cosine_similarity(std::span<const double> u, std::span<const double> v);

class EmbeddingProvider;

struct SimilarityReport {
    std::vector<double> per_pair;
    double mean = 0.0;
};

// Pairs are (gold explanation, predicted explanation); callers drop pairs
// where either side is missing.
SimilarityReport explanation_similarity(const std::vector<std::pair<std::string, std::string>>& pairs,
                                        EmbeddingProvider& embedder);

// Explanation pairs for keys where gold and prediction both say present and
// both carry an explanation.
std::vector<std::pair<std::string, std::string>> explanation_pairs(const PredictionSet& predictions,
                                                                   const GoldLabelSet& gold);

} // namespace easel
