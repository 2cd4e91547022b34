#include "easel/annotations.hpp"

#include "easel/error.hpp"
#include "easel/util.hpp"

#include <algorithm>
#include <cmath>
#include <set>
#include <tuple>

namespace easel {

using nlohmann::json;

std::string_view to_string(MetricKind k) noexcept {
    switch (k) {
    case MetricKind::Likert: return "likert";
    case MetricKind::Binary: return "binary";
    case MetricKind::Checklist: return "checklist";
    }
    return "?";
}

const MetricSpec* AnnotationSchema::find(const std::string& metric_id) const {
    for (const auto& m : metrics) {
        if (m.id == metric_id) return &m;
    }
    return nullptr;
}

AnnotationSchema parse_annotation_schema(const json& doc) {
    AnnotationSchema schema;
    try {
        schema.name = doc.value("name", std::string{});
        for (const auto& m : doc.at("metrics")) {
            MetricSpec spec;
            spec.id = m.at("id").get<std::string>();
            const std::string kind = m.at("kind").get<std::string>();
            if (kind == "likert") spec.kind = MetricKind::Likert;
            else if (kind == "binary") spec.kind = MetricKind::Binary;
            else if (kind == "checklist") spec.kind = MetricKind::Checklist;
            else throw Error(ErrorCode::SchemaViolation, "metric " + spec.id + ": unknown kind " + kind);
            spec.label = m.value("label", std::string{});
            spec.options = m.value("options", std::vector<std::string>{});
            if (spec.kind == MetricKind::Checklist && spec.options.empty()) {
                throw Error(ErrorCode::SchemaViolation, "checklist " + spec.id + " has no options");
            }
            if (schema.find(spec.id)) throw Error(ErrorCode::DuplicateId, "metric " + spec.id + " declared twice");
            schema.metrics.push_back(std::move(spec));
        }
    } catch (const json::exception& e) {
        throw Error(ErrorCode::Parse, std::string("annotation schema: ") + e.what());
    }
    return schema;
}

AnnotationSchema load_annotation_schema(const std::filesystem::path& path) {
    try {
        return parse_annotation_schema(json::parse(read_file(path)));
    } catch (const json::parse_error& e) {
        throw Error(ErrorCode::Parse, path.string() + ": " + e.what());
    }
}

namespace {

const MetricSpec& require_metric(const AnnotationSchema& schema, const std::string& id) {
    const MetricSpec* spec = schema.find(id);
    if (!spec) throw Error(ErrorCode::SchemaViolation, "unknown metric '" + id + "'");
    return *spec;
}

AnnotationValue value_from_text(std::string_view raw, const MetricSpec& spec, const std::string& where) {
    const auto text = trim(raw);
    switch (spec.kind) {
    case MetricKind::Likert: {
        if (text.size() == 1 && text[0] >= '1' && text[0] <= '5') return text[0] - '0';
        throw Error(ErrorCode::SchemaViolation, where + ": Likert value '" + std::string(text) + "'");
    }
    case MetricKind::Binary: {
        const std::string v = to_lower_ascii(text);
        if (v == "1" || v == "yes" || v == "true" || v == "y") return true;
        if (v == "0" || v == "no" || v == "false" || v == "n") return false;
        throw Error(ErrorCode::SchemaViolation, where + ": binary value '" + std::string(text) + "'");
    }
    case MetricKind::Checklist: {
        std::vector<std::string> picked;
        std::size_t start = 0;
        while (start <= text.size()) {
            const auto end = text.find_first_of(";|", start);
            const auto part = trim(text.substr(start, end == std::string_view::npos ? std::string_view::npos : end - start));
            if (!part.empty()) picked.emplace_back(part);
            if (end == std::string_view::npos) break;
            start = end + 1;
        }
        return picked;
    }
    }
    return 0;
}

AnnotationValue value_from_json(const json& v, const MetricSpec& spec, const std::string& where) {
    if (v.is_string()) return value_from_text(v.get<std::string>(), spec, where);
    switch (spec.kind) {
    case MetricKind::Likert:
        if (v.is_number_integer()) return value_from_text(std::to_string(v.get<long long>()), spec, where);
        break;
    case MetricKind::Binary:
        if (v.is_boolean()) return v.get<bool>();
        if (v.is_number_integer()) return value_from_text(std::to_string(v.get<long long>()), spec, where);
        break;
    case MetricKind::Checklist:
        if (v.is_array()) return v.get<std::vector<std::string>>();
        if (v.is_null()) return std::vector<std::string>{};
        break;
    }
    throw Error(ErrorCode::SchemaViolation, where + ": value " + v.dump() + " does not fit " + std::string(to_string(spec.kind)));
}

void check_record(const AnnotationRecord& r, const MetricSpec& spec) {
    const std::string where = r.annotator_id + "/" + r.item_id + "/" + r.metric_id;
    switch (spec.kind) {
    case MetricKind::Likert: {
        const int* v = std::get_if<int>(&r.value);
        if (!v || *v < 1 || *v > 5) throw Error(ErrorCode::SchemaViolation, where + ": expected Likert 1..5");
        break;
    }
    case MetricKind::Binary:
        if (!std::holds_alternative<bool>(r.value)) throw Error(ErrorCode::SchemaViolation, where + ": expected yes/no");
        break;
    case MetricKind::Checklist: {
        const auto* picked = std::get_if<std::vector<std::string>>(&r.value);
        if (!picked) throw Error(ErrorCode::SchemaViolation, where + ": expected a criteria list");
        std::set<std::string> seen;
        for (const auto& c : *picked) {
            if (std::find(spec.options.begin(), spec.options.end(), c) == spec.options.end()) {
                throw Error(ErrorCode::SchemaViolation, where + ": unknown criterion '" + c + "'");
            }
            if (!seen.insert(c).second) throw Error(ErrorCode::SchemaViolation, where + ": criterion listed twice");
        }
        break;
    }
    }
}

} // namespace

std::vector<AnnotationRecord> parse_annotations_csv(std::string_view text, const AnnotationSchema& schema) {
    const auto rows = parse_csv(text);
    if (rows.empty()) throw Error(ErrorCode::EmptyInput, "annotation file has no header");
    const auto& header = rows.front();
    auto column = [&](std::string_view name) {
        for (std::size_t i = 0; i < header.size(); ++i) {
            if (to_lower_ascii(trim(header[i])) == name) return i;
        }
        throw Error(ErrorCode::MissingField, "annotation header needs " + std::string(name));
    };
    const auto c_annotator = column("annotator_id");
    const auto c_item = column("item_id");
    const auto c_metric = column("metric_id");
    const auto c_value = column("value");
    const auto width = std::max({c_annotator, c_item, c_metric, c_value}) + 1;

    std::vector<AnnotationRecord> out;
    for (std::size_t r = 1; r < rows.size(); ++r) {
        const auto& row = rows[r];
        if (row.size() == 1 && trim(row[0]).empty()) continue;
        const std::string where = "row " + std::to_string(r + 1);
        if (row.size() < width) throw Error(ErrorCode::MissingField, where + ": too few columns");
        AnnotationRecord rec;
        rec.annotator_id = std::string(trim(row[c_annotator]));
        rec.item_id = std::string(trim(row[c_item]));
        rec.metric_id = std::string(trim(row[c_metric]));
        rec.value = value_from_text(row[c_value], require_metric(schema, rec.metric_id), where);
        out.push_back(std::move(rec));
    }
    return out;
}

std::vector<AnnotationRecord> parse_annotations_json(const json& doc, const AnnotationSchema& schema) {
    const json& list = doc.is_object() ? doc.at("records") : doc;
    std::vector<AnnotationRecord> out;
    try {
        for (std::size_t i = 0; i < list.size(); ++i) {
            const auto& j = list.at(i);
            AnnotationRecord rec;
            rec.annotator_id = j.at("annotator_id").get<std::string>();
            rec.item_id = j.at("item_id").get<std::string>();
            rec.metric_id = j.at("metric_id").get<std::string>();
            rec.value = value_from_json(j.at("value"), require_metric(schema, rec.metric_id),
                                        "record " + std::to_string(i));
            out.push_back(std::move(rec));
        }
    } catch (const json::exception& e) {
        throw Error(ErrorCode::Parse, std::string("annotation records: ") + e.what());
    }
    return out;
}

std::vector<AnnotationRecord> load_annotations(const std::filesystem::path& path, const AnnotationSchema& schema) {
    const std::string text = read_file(path);
    if (path.extension() == ".json") {
        try {
            return parse_annotations_json(json::parse(text), schema);
        } catch (const json::parse_error& e) {
            throw Error(ErrorCode::Parse, path.string() + ": " + e.what());
        }
    }
    return parse_annotations_csv(text, schema);
}

const MetricReport* QualityReport::find(const std::string& metric_id) const {
    for (const auto& m : metrics) {
        if (m.metric_id == metric_id) return &m;
    }
    return nullptr;
}

QualityReport aggregate_annotations(const std::vector<AnnotationRecord>& records, const AnnotationSchema& schema) {
    std::set<std::tuple<std::string, std::string, std::string>> seen;
    std::map<std::string, std::vector<const AnnotationRecord*>> by_metric;
    for (const auto& r : records) {
        const MetricSpec& spec = require_metric(schema, r.metric_id);
        check_record(r, spec);
        if (!seen.emplace(r.annotator_id, r.item_id, r.metric_id).second) {
            throw Error(ErrorCode::SchemaViolation,
                        "duplicate rating " + r.annotator_id + "/" + r.item_id + "/" + r.metric_id);
        }
        by_metric[r.metric_id].push_back(&r);
    }

    QualityReport report;
    report.schema_name = schema.name;
    for (const auto& spec : schema.metrics) {
        const auto it = by_metric.find(spec.id);
        if (it == by_metric.end()) continue;
        const auto& rs = it->second;
        MetricReport m;
        m.metric_id = spec.id;
        m.kind = spec.kind;
        m.n_ratings = rs.size();
        std::set<std::string> items;
        for (const auto* r : rs) items.insert(r->item_id);
        m.n_items = items.size();

        if (spec.kind == MetricKind::Checklist) {
            std::map<std::string, std::size_t> counts;
            std::set<std::string> items_with_any;
            for (const auto& opt : spec.options) counts[opt] = 0;
            for (const auto* r : rs) {
                const auto& picked = std::get<std::vector<std::string>>(r->value);
                for (const auto& c : picked) ++counts[c];
                m.total_checks += picked.size();
                if (!picked.empty()) items_with_any.insert(r->item_id);
            }
            for (const auto& [opt, n] : counts) {
                m.percentages[opt] = m.total_checks == 0 ? 0.0 : 100.0 * static_cast<double>(n) / static_cast<double>(m.total_checks);
            }
            m.items_with_any_pct = 100.0 * static_cast<double>(items_with_any.size()) / static_cast<double>(m.n_items);
            report.metrics.push_back(std::move(m));
            continue;
        }

        std::vector<double> scores;
        std::map<std::string, std::pair<double, std::size_t>> item_sums;
        for (const auto* r : rs) {
            const double s = spec.kind == MetricKind::Likert ? std::get<int>(r->value) : (std::get<bool>(r->value) ? 1.0 : 0.0);
            scores.push_back(s);
            auto& [sum, n] = item_sums[r->item_id];
            sum += s;
            ++n;
        }
        const double n = static_cast<double>(scores.size());
        double mean = 0;
        for (double s : scores) mean += s;
        mean /= n;
        double ss = 0;
        for (double s : scores) ss += (s - mean) * (s - mean);
        const double sd = scores.size() > 1 ? std::sqrt(ss / (n - 1)) : 0.0;
        const double half = 1.96 * sd / std::sqrt(n);
        m.mos = mean;
        m.sd = sd;
        m.ci_low = mean - half;
        m.ci_high = mean + half;
        for (const auto& [item, acc] : item_sums) m.per_item_mean[item] = acc.first / static_cast<double>(acc.second);

        if (spec.kind == MetricKind::Likert) {
            for (int level = 1; level <= 5; ++level) {
                const auto k = std::count(scores.begin(), scores.end(), static_cast<double>(level));
                m.percentages[std::to_string(level)] = 100.0 * static_cast<double>(k) / n;
            }
        } else {
            const auto yes = std::count(scores.begin(), scores.end(), 1.0);
            m.yes_rate_pct = 100.0 * static_cast<double>(yes) / n;
            m.percentages["yes"] = *m.yes_rate_pct;
            m.percentages["no"] = 100.0 - *m.yes_rate_pct;
        }
        report.metrics.push_back(std::move(m));
    }
    return report;
}

json to_json(const QualityReport& report) {
    json metrics = json::array();
    auto opt = [](const std::optional<double>& v) { return v ? json(*v) : json(nullptr); };
    for (const auto& m : report.metrics) {
        json j = {
            {"metric_id", m.metric_id},
            {"kind", to_string(m.kind)},
            {"n_ratings", m.n_ratings},
            {"n_items", m.n_items},
            {"percentages", m.percentages},
        };
        if (m.kind == MetricKind::Checklist) {
            j["total_checks"] = m.total_checks;
            j["items_with_any_pct"] = opt(m.items_with_any_pct);
        } else {
            j["mos"] = opt(m.mos);
            j["sd"] = opt(m.sd);
            j["ci95"] = {opt(m.ci_low), opt(m.ci_high)};
            j["per_item_mean"] = m.per_item_mean;
            if (m.yes_rate_pct) j["yes_rate_pct"] = *m.yes_rate_pct;
        }
        metrics.push_back(std::move(j));
    }
    return {{"schema", report.schema_name}, {"metrics", metrics}};
}

} // namespace easel
