#include "easel/evalharness.hpp"

#include "easel/embedding.hpp"
#include "easel/error.hpp"
#include "easel/util.hpp"

#include <algorithm>
#include <cmath>
#include <set>

namespace easel {

using nlohmann::json;

namespace {

bool parse_bool_field(std::string_view text, const std::string& where) {
    const std::string v = to_lower_ascii(trim(text));
    if (v == "1" || v == "true" || v == "yes" || v == "present") return true;
    if (v == "0" || v == "false" || v == "no" || v == "absent") return false;
    throw Error(ErrorCode::Parse, where + ": expected a boolean, got '" + std::string(text) + "'");
}

SkillId parse_skill_field(std::string_view text, const std::string& where) {
    const auto id = parse_skill_id(trim(text));
    if (!id) throw Error(ErrorCode::UnknownSkill, where + ": '" + std::string(text) + "'");
    return *id;
}

void insert_label(std::map<LabelKey, Label>& out, LabelKey key, Label label) {
    const std::string name = key.episode_id + "/" + std::string(to_string(key.skill_id));
    if (!out.emplace(std::move(key), std::move(label)).second) {
        throw Error(ErrorCode::DuplicateId, "label " + name + " appears twice");
    }
}

void add_json_labels(std::map<LabelKey, Label>& out, const json& node) {
    if (node.is_array()) {
        for (const auto& element : node) add_json_labels(out, element);
        return;
    }
    if (!node.is_object()) throw Error(ErrorCode::Parse, "label document: unexpected " + std::string(node.type_name()));
    if (node.contains("labels")) return add_json_labels(out, node.at("labels"));
    if (node.contains("report")) return add_json_labels(out, node.at("report"));
    const std::string episode = node.at("episode_id").get<std::string>();
    if (node.contains("outcomes")) {
        for (const auto& o : node.at("outcomes")) {
            Label label{o.at("present").get<bool>(), std::nullopt};
            if (o.contains("explanation") && o.at("explanation").is_string()) {
                label.explanation = o.at("explanation").get<std::string>();
            }
            insert_label(out, {episode, parse_skill_field(o.at("skill_id").get<std::string>(), episode)}, label);
        }
        return;
    }
    const json& p = node.at("present");
    Label label;
    label.present = p.is_boolean() ? p.get<bool>()
                    : p.is_number() ? p.get<double>() != 0.0
                                    : parse_bool_field(p.get<std::string>(), episode);
    if (node.contains("explanation") && node.at("explanation").is_string()) {
        const auto text = node.at("explanation").get<std::string>();
        if (!trim(text).empty()) label.explanation = text;
    }
    insert_label(out, {episode, parse_skill_field(node.at("skill_id").get<std::string>(), episode)}, label);
}

} // namespace

std::map<LabelKey, Label> parse_labels_csv(std::string_view text) {
    const auto rows = parse_csv(text);
    if (rows.empty()) throw Error(ErrorCode::EmptyInput, "label file has no header");
    const auto& header = rows.front();
    auto column = [&](std::string_view name) -> std::optional<std::size_t> {
        for (std::size_t i = 0; i < header.size(); ++i) {
            if (to_lower_ascii(trim(header[i])) == name) return i;
        }
        return std::nullopt;
    };
    const auto c_episode = column("episode_id");
    const auto c_skill = column("skill_id");
    const auto c_present = column("present");
    const auto c_expl = column("explanation");
    if (!c_episode || !c_skill || !c_present) {
        throw Error(ErrorCode::MissingField, "label header needs episode_id, skill_id, present");
    }

    std::map<LabelKey, Label> out;
    for (std::size_t r = 1; r < rows.size(); ++r) {
        const auto& row = rows[r];
        if (row.size() == 1 && trim(row[0]).empty()) continue;
        const std::string where = "row " + std::to_string(r + 1);
        auto cell = [&](std::size_t c) -> std::string_view {
            if (c >= row.size()) throw Error(ErrorCode::MissingField, where + ": too few columns");
            return row[c];
        };
        Label label{parse_bool_field(cell(*c_present), where), std::nullopt};
        if (c_expl && *c_expl < row.size() && !trim(row[*c_expl]).empty()) label.explanation = row[*c_expl];
        insert_label(out, {std::string(trim(cell(*c_episode))), parse_skill_field(cell(*c_skill), where)}, label);
    }
    return out;
}

std::map<LabelKey, Label> parse_labels_json(const json& doc) {
    std::map<LabelKey, Label> out;
    try {
        add_json_labels(out, doc);
    } catch (const json::exception& e) {
        throw Error(ErrorCode::Parse, std::string("label document: ") + e.what());
    }
    return out;
}

std::map<LabelKey, Label> load_labels(const std::filesystem::path& path) {
    const std::string text = read_file(path);
    if (path.extension() == ".json") {
        try {
            return parse_labels_json(json::parse(text));
        } catch (const json::parse_error& e) {
            throw Error(ErrorCode::Parse, path.string() + ": " + e.what());
        }
    }
    return parse_labels_csv(text);
}

BinaryScores binary_scores(const ConfusionCounts& c) {
    auto ratio = [](double num, double den) { return den == 0.0 ? 0.0 : num / den; };
    BinaryScores s;
    s.counts = c;
    s.accuracy = ratio(static_cast<double>(c.tp + c.tn), static_cast<double>(c.total()));
    s.precision = ratio(static_cast<double>(c.tp), static_cast<double>(c.tp + c.fp));
    s.recall = ratio(static_cast<double>(c.tp), static_cast<double>(c.tp + c.fn));
    s.f1 = ratio(2.0 * s.precision * s.recall, s.precision + s.recall);
    return s;
}

DetectionScores score_detection(const PredictionSet& predictions, const GoldLabelSet& gold) {
    if (gold.empty()) throw Error(ErrorCode::EmptyInput, "gold label set is empty");
    std::vector<std::string> missing;
    std::map<SkillId, ConfusionCounts> per_skill;
    ConfusionCounts overall;
    for (const auto& [key, label] : gold) {
        const auto it = predictions.find(key);
        if (it == predictions.end()) {
            missing.push_back(key.episode_id + "/" + std::string(to_string(key.skill_id)));
            continue;
        }
        const bool pred = it->second.present;
        auto& c = per_skill[key.skill_id];
        for (ConfusionCounts* target : {&c, &overall}) {
            if (pred && label.present) ++target->tp;
            else if (pred) ++target->fp;
            else if (label.present) ++target->fn;
            else ++target->tn;
        }
    }
    if (!missing.empty()) {
        std::string list;
        for (std::size_t i = 0; i < missing.size() && i < 20; ++i) list += (i ? ", " : "") + missing[i];
        if (missing.size() > 20) list += ", ... (" + std::to_string(missing.size()) + " total)";
        throw Error(ErrorCode::KeyMismatch, "predictions missing " + list);
    }
    DetectionScores out;
    for (auto id : kAllSkillIds) {
        if (auto it = per_skill.find(id); it != per_skill.end()) out.per_skill.emplace_back(id, binary_scores(it->second));
    }
    out.overall = binary_scores(overall);
    return out;
}

json to_json(const BinaryScores& s) {
    return {{"accuracy", s.accuracy},
            {"precision", s.precision},
            {"recall", s.recall},
            {"f1", s.f1},
            {"confusion", {{"tp", s.counts.tp}, {"fp", s.counts.fp}, {"fn", s.counts.fn}, {"tn", s.counts.tn}}}};
}

json to_json(const DetectionScores& s) {
    json per = json::object();
    for (const auto& [id, scores] : s.per_skill) per[std::string(to_string(id))] = to_json(scores);
    return {{"per_skill", per}, {"overall", to_json(s.overall)}};
}

void RaterTable::validate() const {
    if (raters.size() < 2) throw Error(ErrorCode::InsufficientRatings, "need at least two raters");
    if (values.size() != items.size()) throw Error(ErrorCode::LengthMismatch, "rater table rows != items");
    bool pairable = false;
    for (const auto& row : values) {
        if (row.size() != raters.size()) throw Error(ErrorCode::LengthMismatch, "rater table row width != raters");
        pairable = pairable || std::count_if(row.begin(), row.end(), [](auto v) { return v.has_value(); }) >= 2;
    }
    if (!pairable) throw Error(ErrorCode::InsufficientRatings, "no item has two or more ratings");
}

RaterTable parse_rater_table_csv(std::string_view text) {
    const auto rows = parse_csv(text);
    if (rows.empty()) throw Error(ErrorCode::EmptyInput, "rating file has no header");
    const auto& header = rows.front();
    auto column = [&](std::initializer_list<std::string_view> names) -> std::size_t {
        for (std::size_t i = 0; i < header.size(); ++i) {
            const std::string h = to_lower_ascii(trim(header[i]));
            for (auto n : names) {
                if (h == n) return i;
            }
        }
        throw Error(ErrorCode::MissingField, "rating header needs " + std::string(*names.begin()));
    };
    const std::size_t c_item = column({"item_id", "item"});
    const std::size_t c_rater = column({"rater_id", "rater", "annotator_id"});
    const std::size_t c_value = column({"value", "rating"});

    RaterTable t;
    std::map<std::string, std::size_t> item_index, rater_index;
    std::vector<std::tuple<std::size_t, std::size_t, std::optional<int>>> cells;
    for (std::size_t r = 1; r < rows.size(); ++r) {
        const auto& row = rows[r];
        if (row.size() == 1 && trim(row[0]).empty()) continue;
        if (row.size() <= std::max({c_item, c_rater, c_value})) {
            throw Error(ErrorCode::MissingField, "row " + std::to_string(r + 1) + ": too few columns");
        }
        const std::string item(trim(row[c_item]));
        const std::string rater(trim(row[c_rater]));
        auto [it, fresh_item] = item_index.emplace(item, t.items.size());
        if (fresh_item) t.items.push_back(item);
        auto [rt, fresh_rater] = rater_index.emplace(rater, t.raters.size());
        if (fresh_rater) t.raters.push_back(rater);
        std::optional<int> value;
        const auto v = trim(row[c_value]);
        if (!v.empty()) {
            try {
                std::size_t used = 0;
                value = std::stoi(std::string(v), &used);
                if (used != v.size()) throw std::invalid_argument("trailing");
            } catch (const std::exception&) {
                throw Error(ErrorCode::Parse, "row " + std::to_string(r + 1) + ": rating '" + std::string(v) + "'");
            }
        }
        cells.emplace_back(it->second, rt->second, value);
    }
    t.values.assign(t.items.size(), std::vector<std::optional<int>>(t.raters.size()));
    for (const auto& [i, r, v] : cells) t.values[i][r] = v;
    return t;
}

double percent_agreement(const RaterTable& table) {
    table.validate();
    std::size_t rated = 0, agreed = 0;
    for (const auto& row : table.values) {
        std::vector<int> present;
        for (const auto& v : row) {
            if (v) present.push_back(*v);
        }
        if (present.size() < 2) continue;
        ++rated;
        agreed += std::all_of(present.begin(), present.end(), [&](int x) { return x == present.front(); });
    }
    return static_cast<double>(agreed) / static_cast<double>(rated);
}

AlphaResult krippendorff_alpha(const RaterTable& table) {
    table.validate();
    // Coincidence matrix o[c][k]: each unit with m values contributes
    // (number of ordered c-k pairs) / (m - 1).
    std::map<int, std::map<int, double>> o;
    for (const auto& row : table.values) {
        std::map<int, double> counts;
        double m = 0;
        for (const auto& v : row) {
            if (v) {
                counts[*v] += 1;
                m += 1;
            }
        }
        if (m < 2) continue;
        for (const auto& [c, nc] : counts) {
            for (const auto& [k, nk] : counts) {
                o[c][k] += (c == k ? nc * (nc - 1) : nc * nk) / (m - 1);
            }
        }
    }
    std::map<int, double> marginal;
    double n = 0;
    for (const auto& [c, row] : o) {
        for (const auto& [k, val] : row) {
            marginal[c] += val;
            n += val;
        }
    }
    AlphaResult result;
    result.pairable_values = static_cast<std::size_t>(std::llround(n));
    if (marginal.size() < 2) {
        result.no_variance = true;
        result.alpha = 1.0;
        return result;
    }
    double observed = 0, expected = 0;
    for (const auto& [c, nc] : marginal) {
        for (const auto& [k, nk] : marginal) {
            if (c == k) continue;
            observed += o[c][k];
            expected += nc * nk;
        }
    }
    result.alpha = 1.0 - (n - 1.0) * observed / expected;
    return result;
}

double cosine_similarity(std::span<const double> u, std::span<const double> v) {
    if (u.empty() || v.empty()) throw Error(ErrorCode::EmptyInput, "cosine of an empty vector");
    if (u.size() != v.size()) {
        throw Error(ErrorCode::LengthMismatch,
                    "vector lengths " + std::to_string(u.size()) + " and " + std::to_string(v.size()));
    }
    double dot = 0, nu = 0, nv = 0;
    for (std::size_t i = 0; i < u.size(); ++i) {
        dot += u[i] * v[i];
        nu += u[i] * u[i];
        nv += v[i] * v[i];
    }
    if (nu == 0.0 || nv == 0.0) throw Error(ErrorCode::ZeroVector, "cosine of an all-zero vector");
    return std::clamp(dot / (std::sqrt(nu) * std::sqrt(nv)), -1.0, 1.0);
}

SimilarityReport explanation_similarity(const std::vector<std::pair<std::string, std::string>>& pairs,
                                        EmbeddingProvider& embedder) {
    if (pairs.empty()) throw Error(ErrorCode::EmptyInput, "no explanation pairs");
    SimilarityReport out;
    double sum = 0;
    for (const auto& [gold, pred] : pairs) {
        const auto a = embedder.embed(gold);
        const auto b = embedder.embed(pred);
        out.per_pair.push_back(cosine_similarity(a, b));
        sum += out.per_pair.back();
    }
    out.mean = sum / static_cast<double>(pairs.size());
    return out;
}

std::vector<std::pair<std::string, std::string>> explanation_pairs(const PredictionSet& predictions,
                                                                   const GoldLabelSet& gold) {
    std::vector<std::pair<std::string, std::string>> out;
    for (const auto& [key, g] : gold) {
        const auto it = predictions.find(key);
        if (it == predictions.end()) continue;
        if (g.present && it->second.present && g.explanation && it->second.explanation) {
            out.emplace_back(*g.explanation, *it->second.explanation);
        }
    }
    return out;
}

} // namespace easel
