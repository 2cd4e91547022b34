#include "easel/retelling.hpp"

#include "easel/error.hpp"
#include "easel/util.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <numeric>
#include <sstream>

namespace easel {

using nlohmann::json;

namespace {

std::optional<std::string> canonical_category(std::string_view name) {
    const std::string n = to_lower_ascii(trim(name));
    if (n == "affect") return std::string(kAffect);
    if (n == "positive_emotion" || n == "posemo") return std::string(kPositiveEmotion);
    if (n == "negative_emotion" || n == "negemo") return std::string(kNegativeEmotion);
    return std::nullopt;
}

bool valid_entry(std::string_view e) {
    if (e.empty() || e == "*") return false;
    for (std::size_t i = 0; i < e.size(); ++i) {
        const auto c = static_cast<unsigned char>(e[i]);
        if (std::isspace(c) || std::isupper(c)) return false;
        if (c == '*' && i + 1 != e.size()) return false;
    }
    return true;
}

std::vector<std::string> split_ws(std::string_view line) {
    std::vector<std::string> out;
    std::istringstream in{std::string(line)};
    for (std::string tok; in >> tok;) out.push_back(tok);
    return out;
}

} // namespace

Lexicon Lexicon::parse(std::string_view text) {
    std::map<std::string, std::vector<std::string>> entries;
    std::vector<std::string_view> lines;
    for (std::size_t start = 0; start <= text.size();) {
        auto end = text.find('\n', start);
        if (end == std::string_view::npos) end = text.size();
        auto line = text.substr(start, end - start);
        if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
        lines.push_back(line);
        start = end + 1;
    }

    std::size_t first = 0;
    while (first < lines.size() && trim(lines[first]).empty()) ++first;
    const bool liwc = first < lines.size() && trim(lines[first]) == "%";

    if (liwc) {
        std::map<std::string, std::string> id_to_category;
        std::size_t i = first + 1;
        for (; i < lines.size() && trim(lines[i]) != "%"; ++i) {
            const auto parts = split_ws(lines[i]);
            if (parts.size() < 2) continue;
            if (auto name = canonical_category(parts[1])) id_to_category[parts[0]] = *name;
        }
        if (i == lines.size()) throw Error(ErrorCode::InvalidLexicon, "unterminated LIWC category table");
        for (++i; i < lines.size(); ++i) {
            const auto line = lines[i];
            const auto tab = line.find('\t');
            if (tab == std::string_view::npos) continue;
            const std::string word = to_lower_ascii(trim(line.substr(0, tab)));
            if (!valid_entry(word)) continue;  // multi-word phrases are out of scope
            for (const auto& id : split_ws(line.substr(tab + 1))) {
                if (auto it = id_to_category.find(id); it != id_to_category.end()) entries[it->second].push_back(word);
            }
        }
    } else {
        std::optional<std::string> current;
        for (std::size_t i = 0; i < lines.size(); ++i) {
            const auto line = trim(lines[i]);
            if (line.empty() || line.front() == '#') continue;
            const std::string where = "lexicon line " + std::to_string(i + 1);
            if (line.front() == '%') {
                constexpr std::string_view tag = "%category:";
                if (!starts_with_ci(line, tag)) throw Error(ErrorCode::InvalidLexicon, where + ": expected %category:<name>");
                current = canonical_category(line.substr(tag.size()));
                if (!current) throw Error(ErrorCode::InvalidLexicon, where + ": unknown category " + std::string(line.substr(tag.size())));
                entries[*current];
                continue;
            }
            if (!current) throw Error(ErrorCode::InvalidLexicon, where + ": entry before any %category header");
            if (!valid_entry(line)) throw Error(ErrorCode::InvalidLexicon, where + ": bad entry '" + std::string(line) + "'");
            entries[*current].emplace_back(line);
        }
    }

    Lexicon lex;
    auto& affect = entries[std::string(kAffect)];
    for (auto name : {kPositiveEmotion, kNegativeEmotion}) {
        const auto& valence = entries[std::string(name)];
        affect.insert(affect.end(), valence.begin(), valence.end());
    }
    for (auto name : {kAffect, kPositiveEmotion, kNegativeEmotion}) {
        auto list = entries[std::string(name)];
        std::vector<std::string> unique;
        for (auto& e : list) {
            if (std::find(unique.begin(), unique.end(), e) == unique.end()) unique.push_back(std::move(e));
        }
        if (unique.empty()) throw Error(ErrorCode::InvalidLexicon, "category " + std::string(name) + " has no entries");
        lex.categories_.push_back({std::string(name), std::move(unique)});
    }
    return lex;
}

Lexicon Lexicon::load(const std::filesystem::path& path) { return parse(read_file(path)); }

const LexiconCategory& Lexicon::category(std::string_view name) const {
    const auto canonical = canonical_category(name);
    for (const auto& c : categories_) {
        if (canonical && c.name == *canonical) return c;
    }
    throw Error(ErrorCode::InvalidLexicon, "no category " + std::string(name));
}

std::vector<std::string> tokenize(std::string_view text) {
    std::string folded;
    folded.reserve(text.size());
    for (std::size_t i = 0; i < text.size(); ++i) {
        const auto c = static_cast<unsigned char>(text[i]);
        if (c == 0xE2 && i + 2 < text.size() && static_cast<unsigned char>(text[i + 1]) == 0x80) {
            const auto k = static_cast<unsigned char>(text[i + 2]);
            char replacement = 0;
            if (k == 0x98 || k == 0x99) replacement = '\'';       // ‘ ’
            else if (k == 0x9C || k == 0x9D) replacement = '"';   // “ ”
            else if (k == 0x93 || k == 0x94) replacement = ' ';   // en and em dash
            if (replacement) {
                folded += replacement;
                i += 2;
                continue;
            }
        }
        folded += static_cast<char>(c < 0x80 ? std::tolower(c) : c);
    }

    auto is_word_byte = [](char ch) {
        const auto c = static_cast<unsigned char>(ch);
        return std::isalnum(c) || c >= 0x80;
    };
    std::vector<std::string> tokens;
    for (auto& raw : split_ws(folded)) {
        std::size_t b = 0, e = raw.size();
        while (b < e && !is_word_byte(raw[b])) ++b;
        while (e > b && !is_word_byte(raw[e - 1])) --e;
        if (b < e) tokens.push_back(raw.substr(b, e - b));
    }
    return tokens;
}

bool entry_matches(std::string_view token, std::string_view entry) {
    if (!entry.empty() && entry.back() == '*') return token.substr(0, entry.size() - 1) == entry.substr(0, entry.size() - 1);
    return token == entry;
}

std::set<std::string> match_lexicon(std::span<const std::string> tokens, const LexiconCategory& category) {
    std::set<std::string> out;
    for (const auto& t : tokens) {
        for (const auto& e : category.entries) {
            if (entry_matches(t, e)) {
                out.insert(t);
                break;
            }
        }
    }
    return out;
}

EmotionFeatures extract_emotion_features(std::string_view text, const Lexicon& lexicon) {
    const auto tokens = tokenize(text);
    if (tokens.empty()) throw Error(ErrorCode::EmptyText, "retelling has no words");
    const std::set<std::string> unique(tokens.begin(), tokens.end());
    const std::vector<std::string> unique_list(unique.begin(), unique.end());
    EmotionFeatures f;
    f.unique_tokens = unique.size();
    for (const auto& cat : lexicon.categories()) {
        CategoryFeatures cf;
        cf.matched = match_lexicon(unique_list, cat);
        cf.proportion = static_cast<double>(cf.matched.size()) / static_cast<double>(unique.size());
        f.categories[cat.name] = std::move(cf);
    }
    return f;
}

WilcoxonResult wilcoxon_signed_rank(std::span<const std::pair<double, double>> pairs, ZeroHandling zeros) {
    std::vector<double> d;
    for (const auto& [a, b] : pairs) {
        const double diff = a - b;
        if (diff != 0.0 || zeros == ZeroHandling::Pratt) d.push_back(diff);
    }
    const auto nonzero = static_cast<std::size_t>(std::count_if(d.begin(), d.end(), [](double x) { return x != 0.0; }));
    if (nonzero == 0) throw Error(ErrorCode::AllZeroDifferences, "every paired difference is zero");

    // Midranks of |d|, kept doubled so they stay integral.
    std::vector<std::size_t> order(d.size());
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(), [&](auto i, auto j) { return std::fabs(d[i]) < std::fabs(d[j]); });
    std::vector<long long> rank2(d.size());
    for (std::size_t i = 0; i < order.size();) {
        std::size_t j = i;
        while (j + 1 < order.size() && std::fabs(d[order[j + 1]]) == std::fabs(d[order[i]])) ++j;
        const auto doubled = static_cast<long long>(i + 1 + j + 1);
        for (std::size_t k = i; k <= j; ++k) rank2[order[k]] = doubled;
        i = j + 1;
    }

    WilcoxonResult r;
    r.n_used = nonzero;
    long long plus2 = 0, minus2 = 0;
    std::vector<long long> used;
    for (std::size_t i = 0; i < d.size(); ++i) {
        if (d[i] > 0) plus2 += rank2[i];
        if (d[i] < 0) minus2 += rank2[i];
        if (d[i] != 0) used.push_back(rank2[i]);
    }
    r.w_plus = plus2 / 2.0;
    r.w_minus = minus2 / 2.0;
    const long long w2 = std::min(plus2, minus2);
    r.w = w2 / 2.0;

    if (nonzero <= 20) {
        r.exact = true;
        const long long total2 = plus2 + minus2;
        std::vector<double> ways(static_cast<std::size_t>(total2) + 1, 0.0);
        ways[0] = 1.0;
        for (long long rk : used) {
            for (long long s = total2; s >= rk; --s) ways[s] += ways[s - rk];
        }
        double tail = 0.0;
        for (long long s = 0; s <= w2; ++s) tail += ways[s];
        r.p_two_sided = std::min(1.0, 2.0 * tail / std::ldexp(1.0, static_cast<int>(nonzero)));
    } else {
        double mean = 0, var = 0;
        for (long long rk : used) {
            const double rank = rk / 2.0;
            mean += rank / 2.0;
            var += rank * rank / 4.0;
        }
        const double z = std::min(0.0, (r.w - mean + 0.5) / std::sqrt(var));
        r.p_two_sided = std::min(1.0, std::erfc(-z / std::sqrt(2.0)));
    }
    return r;
}

double cliffs_delta(std::span<const double> xs, std::span<const double> ys) {
    if (xs.empty() || ys.empty()) throw Error(ErrorCode::EmptyInput, "cliffs_delta needs two non-empty samples");
    std::vector<double> sorted(ys.begin(), ys.end());
    std::sort(sorted.begin(), sorted.end());
    long long dominance = 0;
    for (double x : xs) {
        const auto below = std::lower_bound(sorted.begin(), sorted.end(), x) - sorted.begin();
        const auto above = sorted.end() - std::upper_bound(sorted.begin(), sorted.end(), x);
        dominance += below - above;
    }
    return static_cast<double>(dominance) / (static_cast<double>(xs.size()) * static_cast<double>(ys.size()));
}

std::vector<RetellingRecord> parse_retellings_csv(std::string_view text) {
    const auto rows = parse_csv(text);
    if (rows.empty()) throw Error(ErrorCode::EmptyInput, "retelling file has no header");
    const auto& header = rows.front();
    auto column = [&](std::string_view name) {
        for (std::size_t i = 0; i < header.size(); ++i) {
            if (to_lower_ascii(trim(header[i])) == name) return i;
        }
        throw Error(ErrorCode::MissingField, "retelling header needs " + std::string(name));
    };
    const auto c_child = column("child_id");
    const auto c_cond = column("condition");
    const auto c_text = column("text");
    std::vector<RetellingRecord> out;
    for (std::size_t r = 1; r < rows.size(); ++r) {
        const auto& row = rows[r];
        if (row.size() == 1 && trim(row[0]).empty()) continue;
        const std::string where = "row " + std::to_string(r + 1);
        if (row.size() <= std::max({c_child, c_cond, c_text})) throw Error(ErrorCode::MissingField, where + ": too few columns");
        const auto cond = parse_condition(row[c_cond]);
        if (!cond) throw Error(ErrorCode::Parse, where + ": unknown condition '" + row[c_cond] + "'");
        out.push_back({std::string(trim(row[c_child])), *cond, row[c_text]});
    }
    return out;
}

std::vector<RetellingRecord> load_retellings(const std::filesystem::path& path) {
    const std::string text = read_file(path);
    if (path.extension() != ".json") return parse_retellings_csv(text);
    std::vector<RetellingRecord> out;
    try {
        for (const auto& j : json::parse(text)) {
            const auto cond = parse_condition(j.at("condition").get<std::string>());
            if (!cond) throw Error(ErrorCode::Parse, "unknown condition " + j.at("condition").dump());
            out.push_back({j.at("child_id").get<std::string>(), *cond, j.at("text").get<std::string>()});
        }
    } catch (const json::exception& e) {
        throw Error(ErrorCode::Parse, path.string() + ": " + e.what());
    }
    return out;
}

namespace {

ConditionSummary summarize(std::span<const double> v) {
    ConditionSummary s;
    for (double x : v) s.mean += x;
    s.mean /= static_cast<double>(v.size());
    if (v.size() > 1) {
        double ss = 0;
        for (double x : v) ss += (x - s.mean) * (x - s.mean);
        s.sd = std::sqrt(ss / static_cast<double>(v.size() - 1));
    }
    return s;
}

} // namespace

PairedStats compare_paired(std::span<const double> easel, std::span<const double> no_activity, ZeroHandling zeros) {
    if (easel.size() != no_activity.size()) throw Error(ErrorCode::LengthMismatch, "paired samples differ in length");
    if (easel.empty()) throw Error(ErrorCode::EmptyInput, "no pairs");
    PairedStats s;
    s.n_children = easel.size();
    s.easel = summarize(easel);
    s.no_activity = summarize(no_activity);
    s.cliffs_delta = cliffs_delta(easel, no_activity);
    std::vector<std::pair<double, double>> pairs;
    for (std::size_t i = 0; i < easel.size(); ++i) pairs.emplace_back(easel[i], no_activity[i]);
    try {
        s.wilcoxon = wilcoxon_signed_rank(pairs, zeros);
    } catch (const Error& e) {
        if (e.code() != ErrorCode::AllZeroDifferences) throw;
        s.error = e.what();
    }
    return s;
}

std::map<std::string, PairedStats> compare_conditions(const std::vector<RetellingRecord>& records,
                                                      const Lexicon& lexicon, ZeroHandling zeros) {
    std::map<std::string, std::array<const RetellingRecord*, 2>> by_child;
    for (const auto& r : records) {
        auto& slot = by_child[r.child_id][static_cast<std::size_t>(r.condition)];
        if (slot) throw Error(ErrorCode::UnpairedChild, r.child_id + " has two " + std::string(to_string(r.condition)) + " records");
        slot = &r;
    }
    if (by_child.empty()) throw Error(ErrorCode::EmptyInput, "no retellings");

    std::map<std::string, std::pair<std::vector<double>, std::vector<double>>> values;
    for (const auto& [child, slots] : by_child) {
        for (auto cond : {Condition::NoActivity, Condition::EaselActivity}) {
            if (!slots[static_cast<std::size_t>(cond)]) {
                throw Error(ErrorCode::UnpairedChild, child + " has no " + std::string(to_string(cond)) + " record");
            }
        }
        const auto easel = extract_emotion_features(slots[static_cast<std::size_t>(Condition::EaselActivity)]->text, lexicon);
        const auto none = extract_emotion_features(slots[static_cast<std::size_t>(Condition::NoActivity)]->text, lexicon);
        for (const auto& cat : lexicon.categories()) {
            values[cat.name].first.push_back(easel.categories.at(cat.name).proportion);
            values[cat.name].second.push_back(none.categories.at(cat.name).proportion);
        }
    }
    std::map<std::string, PairedStats> out;
    for (const auto& [name, v] : values) out[name] = compare_paired(v.first, v.second, zeros);
    return out;
}

json to_json(const PairedStats& s) {
    json j = {
        {"n_children", s.n_children},
        {"easel_activity", {{"mean", s.easel.mean}, {"sd", s.easel.sd}}},
        {"no_activity", {{"mean", s.no_activity.mean}, {"sd", s.no_activity.sd}}},
        {"cliffs_delta", s.cliffs_delta},
    };
    if (s.wilcoxon) {
        j["wilcoxon"] = {{"W", s.wilcoxon->w},
                         {"W_plus", s.wilcoxon->w_plus},
                         {"W_minus", s.wilcoxon->w_minus},
                         {"p_two_sided", s.wilcoxon->p_two_sided},
                         {"n_pairs_used", s.wilcoxon->n_used},
                         {"exact", s.wilcoxon->exact}};
    } else {
        j["wilcoxon"] = nullptr;
    }
    if (s.error) j["error"] = *s.error;
    return j;
}

} // namespace easel
