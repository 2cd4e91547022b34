#include "easel/annotations.hpp"

#include "support.hpp"
#include "synthetic.hpp"

#include <json.hpp>

#include <cmath>

using namespace easel;
using nlohmann::json;

namespace {

const AnnotationSchema& child_schema() {
    static const auto s = load_annotation_schema(test::assets() / "schemas" / "child_activity.json");
    return s;
}

std::vector<AnnotationRecord> likert(const std::vector<int>& ratings, const std::string& metric = "skill_relevance") {
    std::vector<AnnotationRecord> out;
    for (std::size_t i = 0; i < ratings.size(); ++i) out.push_back({"a" + std::to_string(i), "item", metric, ratings[i]});
    return out;
}

double pct_sum(const MetricReport& m) {
    double s = 0;
    for (const auto& [k, v] : m.percentages) s += v;
    return s;
}

} // namespace

TEST_CASE("shipped schemas") {
    const auto& c = child_schema();
    CHECK(c.metrics.size() == 11);
    const auto* reflection = c.find("reflection");
    REQUIRE(reflection);
    CHECK(reflection->kind == MetricKind::Checklist);
    CHECK(reflection->options.size() == 6);
    CHECK(c.find("not_yes_no")->kind == MetricKind::Binary);
    const auto p = load_annotation_schema(test::assets() / "schemas" / "parent_starter.json");
    CHECK(p.metrics.size() == 3);
    CHECK(p.find("meaningful_dialogue")->kind == MetricKind::Likert);
}

TEST_CASE("all fives") {
    const auto r = aggregate_annotations(likert({5, 5, 5}), child_schema());
    const auto& m = *r.find("skill_relevance");
    CHECK(*m.mos == 5.0);
    CHECK(*m.ci_low == 5.0);
    CHECK(*m.ci_high == 5.0);
    CHECK(m.percentages.at("5") == 100.0);
    CHECK(m.percentages.at("1") == 0.0);
}

TEST_CASE("mean opinion score with a confidence interval") {
    const auto r = aggregate_annotations(likert({5, 5, 4, 4, 4}), child_schema());
    const auto& m = *r.find("skill_relevance");
    CHECK(*m.mos == doctest::Approx(4.4));
    CHECK(*m.sd == doctest::Approx(0.547723).epsilon(1e-6));
    CHECK(*m.ci_low == doctest::Approx(4.4 - 1.96 * std::sqrt(0.3) / std::sqrt(5.0)).epsilon(1e-12));
    CHECK(*m.ci_low == doctest::Approx(3.920).epsilon(1e-3));
    CHECK(*m.ci_high == doctest::Approx(4.880).epsilon(1e-3));
    CHECK(m.percentages.at("5") == doctest::Approx(40.0));
    CHECK(m.percentages.at("4") == doctest::Approx(60.0));
    CHECK(m.n_ratings == 5);
    CHECK(m.n_items == 1);
}

TEST_CASE("reflection prevalence") {
    std::vector<AnnotationRecord> recs = {
        {"a", "i1", "reflection", std::vector<std::string>{"relates_to_experience", "basis_for_change"}},
        {"a", "i2", "reflection", std::vector<std::string>{}},
        {"a", "i3", "reflection", std::vector<std::string>{"relates_to_experience"}},
        {"a", "i4", "reflection", std::vector<std::string>{}},
    };
    const auto r = aggregate_annotations(recs, child_schema());
    const auto& m = *r.find("reflection");
    CHECK(*m.items_with_any_pct == doctest::Approx(50.0));
    CHECK(m.total_checks == 3);
    CHECK(m.percentages.at("relates_to_experience") == doctest::Approx(200.0 / 3));
    CHECK(m.percentages.at("alternative_actions") == 0.0);
    CHECK(pct_sum(m) == doctest::Approx(100.0));
    CHECK_FALSE(m.mos);
}

TEST_CASE("binary metric") {
    std::vector<AnnotationRecord> recs = {{"a", "i1", "not_yes_no", true}, {"b", "i1", "not_yes_no", false},
                                          {"a", "i2", "not_yes_no", true}, {"b", "i2", "not_yes_no", true}};
    const auto r = aggregate_annotations(recs, child_schema());
    const auto& m = *r.find("not_yes_no");
    CHECK(*m.yes_rate_pct == doctest::Approx(75.0));
    CHECK(m.percentages.at("no") == doctest::Approx(25.0));
    CHECK(*m.mos == doctest::Approx(0.75));
    CHECK(m.per_item_mean.at("i1") == doctest::Approx(0.5));
}

TEST_CASE("schema violations") {
    const auto& s = child_schema();
    CHECK_ERROR_CODE(aggregate_annotations({{"a", "i", "nope", 3}}, s), ErrorCode::SchemaViolation);
    CHECK_ERROR_CODE(aggregate_annotations({{"a", "i", "skill_relevance", 6}}, s), ErrorCode::SchemaViolation);
    CHECK_ERROR_CODE(aggregate_annotations({{"a", "i", "skill_relevance", true}}, s), ErrorCode::SchemaViolation);
    CHECK_ERROR_CODE(aggregate_annotations({{"a", "i", "reflection", std::vector<std::string>{"made_up"}}}, s),
                     ErrorCode::SchemaViolation);
    CHECK_ERROR_CODE(aggregate_annotations({{"a", "i", "skill_relevance", 3}, {"a", "i", "skill_relevance", 4}}, s),
                     ErrorCode::SchemaViolation);
    CHECK_ERROR_CODE(parse_annotations_csv("annotator_id,item_id,metric_id,value\na,i,skill_relevance,9\n", s),
                     ErrorCode::SchemaViolation);
}

TEST_CASE("CSV and JSON records") {
    const auto& s = child_schema();
    const auto csv = parse_annotations_csv(
        "annotator_id,item_id,metric_id,value\n"
        "a,i1,skill_relevance,4\n"
        "a,i1,not_yes_no,yes\n"
        "a,i1,reflection,relates_to_experience; basis_for_change\n"
        "a,i2,reflection,\n",
        s);
    REQUIRE(csv.size() == 4);
    CHECK(std::get<int>(csv[0].value) == 4);
    CHECK(std::get<bool>(csv[1].value));
    CHECK(std::get<std::vector<std::string>>(csv[2].value) ==
          std::vector<std::string>{"relates_to_experience", "basis_for_change"});
    CHECK(std::get<std::vector<std::string>>(csv[3].value).empty());

    const auto js = parse_annotations_json(json::parse(R"({"records": [
        {"annotator_id": "a", "item_id": "i1", "metric_id": "skill_relevance", "value": 4},
        {"annotator_id": "a", "item_id": "i1", "metric_id": "not_yes_no", "value": true},
        {"annotator_id": "a", "item_id": "i1", "metric_id": "reflection", "value": ["relates_to_experience"]}
    ]})"), s);
    CHECK(js.size() == 3);
    CHECK_ERROR_CODE(parse_annotations_json(json::parse(R"([{"annotator_id": "a", "item_id": "i", "metric_id": "skill_relevance", "value": [1]}])"), s),
                     ErrorCode::SchemaViolation);
}

TEST_CASE("synthetic 5 x 59 study") {
    using E = synthetic::Expected;
    const auto report = aggregate_annotations(synthetic::annotation_study(), child_schema());
    CHECK(report.metrics.size() == 4);

    const auto& rel = *report.find("skill_relevance");
    CHECK(rel.n_ratings == 295);
    CHECK(rel.n_items == 59);
    CHECK(*rel.mos == doctest::Approx(E::relevance_mos).epsilon(1e-12));
    const double rel_half = 1.96 * std::sqrt(E::relevance_ss / 294.0) / std::sqrt(295.0);
    CHECK(*rel.ci_low == doctest::Approx(E::relevance_mos - rel_half).epsilon(1e-12));
    CHECK(*rel.ci_high == doctest::Approx(E::relevance_mos + rel_half).epsilon(1e-12));
    CHECK(rel.percentages.at("5") == doctest::Approx(E::relevance_pct5).epsilon(1e-12));
    CHECK(rel.percentages.at("4") == doctest::Approx(E::relevance_pct4).epsilon(1e-12));
    CHECK(rel.percentages.at("3") == doctest::Approx(E::relevance_pct3).epsilon(1e-12));
    CHECK(std::abs(pct_sum(rel) - 100.0) <= 0.01);

    const auto& moment = *report.find("moment_relevance");
    CHECK(*moment.mos == doctest::Approx(E::moment_mos));
    const double m_half = 1.96 * std::sqrt(E::moment_ss / 294.0) / std::sqrt(295.0);
    CHECK(*moment.ci_high == doctest::Approx(3.0 + m_half).epsilon(1e-12));
    for (const char* k : {"1", "2", "3", "4", "5"}) CHECK(moment.percentages.at(k) == doctest::Approx(20.0));

    const auto& grounded = *report.find("activity_grounded");
    CHECK(*grounded.yes_rate_pct == doctest::Approx(E::grounded_yes_pct).epsilon(1e-12));

    const auto& refl = *report.find("reflection");
    CHECK(refl.total_checks == 88);
    CHECK(refl.percentages.at("relates_to_experience") == doctest::Approx(E::relates_pct).epsilon(1e-12));
    CHECK(refl.percentages.at("acknowledges_feelings") == doctest::Approx(E::feelings_pct).epsilon(1e-12));
    CHECK(*refl.items_with_any_pct == doctest::Approx(E::any_pct).epsilon(1e-12));

    for (const auto& m : report.metrics) {
        if (m.mos) {
            CHECK(*m.ci_low <= *m.mos);
            CHECK(*m.mos <= *m.ci_high);
        }
    }
    const auto j = to_json(report);
    CHECK(j["metrics"].size() == 4);
}
