#pragma once

#include <json.hpp>

#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <variant>
#include <vector>

namespace easel {

enum class MetricKind { Likert, Binary, Checklist };
std::string_view to_string(MetricKind k) noexcept;

struct MetricSpec {
    std::string id;
    MetricKind kind{};
    std::string label;
    std::vector<std::string> options;  // checklist criteria
};

struct AnnotationSchema {
    std::string name;
    std::vector<MetricSpec> metrics;

    const MetricSpec* find(const std::string& metric_id) const;
};

// {"name": ..., "metrics": [{"id", "kind": "likert"|"binary"|"checklist", "label", "options"}]}
AnnotationSchema parse_annotation_schema(const nlohmann::json& doc);
AnnotationSchema load_annotation_schema(const std::filesystem::path& path);

// Likert rating, yes/no, or the set of checked criteria.
using AnnotationValue = std::variant<int, bool, std::vector<std::string>>;

struct AnnotationRecord {
    std::string annotator_id;
    std::string item_id;
    std::string metric_id;
    AnnotationValue value;
};

// Values are read against the schema: Likert as 1..5, binary as
// yes/no/true/false/1/0, checklist as ';'-separated criteria (blank = none).
std::vector<AnnotationRecord> parse_annotations_csv(std::string_view text, const AnnotationSchema& schema);
std::vector<AnnotationRecord> parse_annotations_json(const nlohmann::json& doc, const AnnotationSchema& schema);
std::vector<AnnotationRecord> load_annotations(const std::filesystem::path& path, const AnnotationSchema& schema);

struct MetricReport {
    std::string metric_id;
    MetricKind kind{};
    std::size_t n_ratings = 0;
    std::size_t n_items = 0;

    // Likert and binary (binary scored 1 = yes). Pooled over all ratings.
    std::optional<double> mos;
    std::optional<double> sd;
    std::optional<double> ci_low;
    std::optional<double> ci_high;

    // Likert: "1".."5"; binary: "yes"/"no"; checklist: criterion -> share of
    // all checks. Percentages.
    std::map<std::string, double> percentages;
    std::optional<double> yes_rate_pct;

    // Checklist only.
    std::size_t total_checks = 0;
    std::optional<double> items_with_any_pct;

    std::map<std::string, double> per_item_mean;  // Likert and binary
};

struct QualityReport {
    std::string schema_name;
    std::vector<MetricReport> metrics;  // schema order; metrics without records are omitted

    const MetricReport* find(const std::string& metric_id) const;
};

// Throws SchemaViolation for unknown metrics, wrong value kinds, Likert values
// outside 1..5, unknown checklist criteria, or duplicate (annotator, item, metric).
QualityReport aggregate_annotations(const std::vector<AnnotationRecord>& records, const AnnotationSchema& schema);

nlohmann::json to_json(const QualityReport& report);

} // namespace easel
