// Acceptance checks: one PASS/FAIL line per criterion, exit status 1 if any
// fails. Tolerances are fixed here, not taken from the command line.

#include "easel/annotations.hpp"
#include "easel/evalharness.hpp"
#include "easel/pipeline.hpp"
#include "easel/prompting.hpp"
#include "easel/retelling.hpp"

#include "harness.hpp"
#include "oracles.hpp"
#include "synthetic.hpp"

#include <chrono>
#include <cmath>
#include <iostream>
#include <sstream>

using namespace easel;
using nlohmann::json;
namespace fs = std::filesystem;

namespace {

constexpr double kOracleTol = 1e-9;
constexpr double kPercentSumTol = 0.01;
constexpr double kPromptBudgetS = 1.0;
constexpr double kOracleBudgetS = 30.0;

const fs::path kData = EASEL_TEST_DATA;
const fs::path kAssets = EASEL_TEST_ASSETS;

using Clock = std::chrono::steady_clock;
double seconds_since(Clock::time_point t) { return std::chrono::duration<double>(Clock::now() - t).count(); }

// Collects failures for one criterion.
struct Check {
    std::vector<std::string> failures;
    void expect(bool ok, const std::string& what) {
        if (!ok && failures.size() < 5) failures.push_back(what);
        if (!ok) ++failed;
    }
    int failed = 0;
};

int g_failed = 0;

void report(const std::string& name, const Check& c, const std::string& detail) {
    const bool ok = c.failed == 0;
    if (!ok) ++g_failed;
    std::cout << (ok ? "PASS " : "FAIL ") << name << ": " << detail;
    if (!ok) {
        std::cout << " [" << c.failed << " failure(s):";
        for (const auto& f : c.failures) std::cout << " " << f << ";";
        std::cout << "]";
    }
    std::cout << "\n";
}

template <typename F>
void guarded(const std::string& name, F&& body) {
    try {
        body();
    } catch (const std::exception& e) {
        ++g_failed;
        std::cout << "FAIL " << name << ": threw " << e.what() << "\n";
    }
}

Transcript frog_toad() { return load_transcript_file(kData / "fixtures" / "frog_toad.json"); }

// ---------------------------------------------------------------------------

void prompt_fidelity() {
    const auto start = Clock::now();
    Check c;
    const auto taxonomy = load_taxonomy_file(kAssets / "taxonomy.json");
    const auto lib = TemplateLibrary::load(kAssets / "templates");
    const auto t = frog_toad();
    const auto golden = [&](const std::string& name) { return read_file(kData / "golden" / "frog_toad" / name); };
    const std::string expl = golden("explanation.txt");
    int files = 0;
    for (const auto& s : taxonomy.skills()) {
        const std::string id(to_string(s.id));
        c.expect(render_detection_prompt(lib, s, t).text == golden("detection_" + id + ".txt"), "detection " + id);
        ++files;
    }
    const auto& r2 = taxonomy.lookup(SkillId::R2);
    for (auto type : kAllActivityTypes) {
        const std::string name(to_string(type));
        c.expect(render_child_activity_prompt(lib, type, t, r2, expl).text == golden("child_" + name + ".txt"), "child " + name);
        ++files;
    }
    c.expect(render_parent_prompt(lib, t, r2, expl).text == golden("parent.txt"), "parent");
    c.expect(render_summary_prompt(lib, t).text == golden("summary.txt"), "summary");
    files += 2;

    std::set<std::string> declared;
    for (const auto* tpl : {&lib.detection(), &lib.child_suffix(), &lib.parent(), &lib.summary()})
        declared.insert(tpl->placeholders().begin(), tpl->placeholders().end());
    for (auto type : kAllActivityTypes) declared.insert(lib.child(type).placeholders().begin(), lib.child(type).placeholders().end());

    std::mt19937_64 rng(2024);
    const std::string alphabet = "abcdefghijklmnop QRSTUV,.;:'\"!?\n()[]{}*_-#\xE2\x80\x99";
    auto random_text = [&] {
        std::string s = "w";
        for (std::size_t i = 0, n = 1 + rng() % 120; i < n; ++i) s.push_back(alphabet[rng() % alphabet.size()]);
        return s;
    };
    std::size_t hits = 0;
    const int renders = 1000;
    for (int i = 0; i < renders; ++i) {
        SelSkill s = taxonomy.skills()[rng() % 10];
        s.description = random_text();
        s.definition = random_text();
        s.lack_description = random_text();
        s.positive_example = random_text();
        s.negative_example = random_text();
        const Transcript tr{"ep", "title", random_text(), std::nullopt, std::nullopt};
        std::string text;
        switch (i % 4) {
        case 0: text = render_detection_prompt(lib, s, tr).text; break;
        case 1: text = render_child_activity_prompt(lib, kAllActivityTypes[rng() % 4], tr, s, random_text()).text; break;
        case 2: text = render_parent_prompt(lib, tr, s, random_text()).text; break;
        default: text = render_summary_prompt(lib, tr).text; break;
        }
        hits += count_residual_placeholders(text, declared);
    }
    c.expect(hits == 0, std::to_string(hits) + " residual placeholder hits");
    const double elapsed = seconds_since(start);
    c.expect(elapsed < kPromptBudgetS, "runtime " + std::to_string(elapsed) + " s");
    std::ostringstream d;
    d << files << "/16 golden prompts byte-identical, " << hits << " residual hits in " << renders
      << " randomized renders, " << elapsed << " s (budget " << kPromptBudgetS << " s)";
    report("prompt_fidelity", c, d.str());
}

void parser() {
    Check c;
    const auto cases = json::parse(read_file(kData / "fixtures" / "parser_cases.json"));
    int good = 0, bad = 0;
    for (const auto& k : cases["well_formed"]) {
        const std::string raw = k["raw"];
        try {
            const auto o = parse_detection_response(raw, *parse_skill_id(k["skill"].get<std::string>()));
            const bool ok = o.present == k["present"].get<bool>() &&
                            (k["explanation"].is_null() ? !o.explanation
                                                        : o.explanation == k["explanation"].get<std::string>());
            c.expect(ok, "wrong parse of " + json(raw).dump());
            good += ok;
        } catch (const Error& e) {
            c.expect(false, "rejected " + json(raw).dump());
        }
    }
    for (const auto& k : cases["malformed"]) {
        const std::string raw = k;
        bool rejected = false;
        try {
            parse_detection_response(raw, SkillId::A1);
        } catch (const Error& e) {
            rejected = e.code() == ErrorCode::UnparseableResponse;
        }
        c.expect(rejected, "accepted " + json(raw).dump());
        bad += rejected;
    }
    c.expect(cases["well_formed"].size() == 50 && cases["malformed"].size() == 20, "fixture size");
    std::ostringstream d;
    d << good << "/" << cases["well_formed"].size() << " well-formed parsed correctly, " << bad << "/"
      << cases["malformed"].size() << " malformed rejected as UnparseableResponse";
    report("parser", c, d.str());
}

void metric_oracles() {
    const auto start = Clock::now();
    Check c;
    std::mt19937_64 rng(777);
    const int fixtures = 200;
    double worst = 0;
    auto diff = [&](double a, double b, const std::string& what) {
        worst = std::max(worst, std::abs(a - b));
        c.expect(std::abs(a - b) <= kOracleTol, what);
    };

    // score_detection against a direct per-skill recount.
    int bounds_checked = 0;
    for (int f = 0; f < fixtures; ++f) {
        GoldLabelSet gold, pred;
        const int eps = 1 + static_cast<int>(rng() % 8);
        for (int e = 0; e < eps; ++e)
            for (auto id : kAllSkillIds) {
                gold[{"e" + std::to_string(e), id}] = {rng() % 3 == 0, std::nullopt};
                pred[{"e" + std::to_string(e), id}] = {rng() % 3 == 0, std::nullopt};
            }
        const auto s = score_detection(pred, gold);
        for (const auto& [id, b] : s.per_skill) {
            double tp = 0, fp = 0, fn = 0, tn = 0;
            for (int e = 0; e < eps; ++e) {
                const LabelKey k{"e" + std::to_string(e), id};
                const bool p = pred[k].present, g = gold[k].present;
                tp += p && g, fp += p && !g, fn += !p && g, tn += !p && !g;
            }
            const double prec = tp + fp ? tp / (tp + fp) : 0, rec = tp + fn ? tp / (tp + fn) : 0;
            diff(b.accuracy, (tp + tn) / eps, "accuracy");
            diff(b.f1, prec + rec ? 2 * prec * rec / (prec + rec) : 0, "f1");
            for (double v : {b.accuracy, b.precision, b.recall, b.f1}) c.expect(v >= 0 && v <= 1, "score out of [0,1]");
            ++bounds_checked;
        }
        c.expect(score_detection(gold, pred).overall.accuracy == s.overall.accuracy, "accuracy symmetry");
    }

    // krippendorff_alpha against the pairwise definition.
    int alpha_compared = 0, perfect = 0;
    for (int f = 0; alpha_compared < fixtures; ++f) {
        const int items = 2 + static_cast<int>(rng() % 10), raters = 2 + static_cast<int>(rng() % 4);
        std::vector<std::vector<std::optional<int>>> v(items, std::vector<std::optional<int>>(raters));
        for (auto& row : v)
            for (auto& cell : row)
                if (rng() % 6) cell = static_cast<int>(rng() % 3);
        RaterTable t{{}, {}, v};
        for (int i = 0; i < items; ++i) t.items.push_back("i" + std::to_string(i));
        for (int r = 0; r < raters; ++r) t.raters.push_back("r" + std::to_string(r));
        const auto expected = oracle::alpha(v);
        try {
            const auto a = krippendorff_alpha(t);
            if (expected) {
                diff(a.alpha, *expected, "alpha");
                ++alpha_compared;
            }
        } catch (const Error& e) {
            c.expect(e.code() == ErrorCode::InsufficientRatings, "alpha error");
        }
        // Perfect agreement with values varying across items.
        std::vector<std::vector<std::optional<int>>> same(items, std::vector<std::optional<int>>(raters));
        for (int i = 0; i < items; ++i)
            for (int r = 0; r < raters; ++r) same[i][r] = i % 2;
        RaterTable pt{t.items, t.raters, same};
        c.expect(krippendorff_alpha(pt).alpha == 1.0, "alpha on perfect agreement");
        ++perfect;
    }

    // cosine_similarity.
    std::normal_distribution<double> g;
    for (int f = 0; f < fixtures; ++f) {
        const std::size_t n = 1 + rng() % 24;
        std::vector<double> u(n), v(n);
        for (std::size_t i = 0; i < n; ++i) u[i] = g(rng), v[i] = g(rng);
        diff(cosine_similarity(u, v), oracle::cosine(u, v), "cosine");
    }

    // wilcoxon_signed_rank, exact, n <= 12.
    int wilcoxon_compared = 0;
    for (int f = 0; wilcoxon_compared < fixtures; ++f) {
        std::vector<std::pair<double, double>> p(1 + rng() % 12);
        for (auto& [a, b] : p) a = static_cast<double>(rng() % 7), b = static_cast<double>(rng() % 7);
        const auto expected = oracle::signed_rank(p);
        if (expected.n == 0) continue;
        const auto r = wilcoxon_signed_rank(p);
        c.expect(r.exact, "exact mode");
        diff(r.w_plus, expected.w_plus, "W+");
        diff(r.w_minus, expected.w_minus, "W-");
        diff(r.p_two_sided, expected.p, "p");
        ++wilcoxon_compared;
    }

    // cliffs_delta.
    for (int f = 0; f < fixtures; ++f) {
        std::vector<double> xs(1 + rng() % 20), ys(1 + rng() % 20);
        for (auto& x : xs) x = static_cast<double>(rng() % 10);
        for (auto& y : ys) y = static_cast<double>(rng() % 10);
        diff(cliffs_delta(xs, ys), oracle::cliffs(xs, ys), "cliffs");
    }

    const double elapsed = seconds_since(start);
    c.expect(elapsed < kOracleBudgetS, "runtime");
    std::ostringstream d;
    d << fixtures << " fixtures each for score_detection/alpha/cosine/wilcoxon/cliffs, max |diff| " << worst
      << " (tol " << kOracleTol << "), " << perfect << " perfect-agreement tables, " << bounds_checked
      << " per-skill bound checks, " << elapsed << " s (budget " << kOracleBudgetS << " s)";
    report("metric_oracles", c, d.str());
}

void aggregation() {
    using E = synthetic::Expected;
    Check c;
    const auto schema = load_annotation_schema(kAssets / "schemas" / "child_activity.json");
    const auto records = synthetic::annotation_study();
    const auto r = aggregate_annotations(records, schema);
    auto near = [&](double a, double b, const std::string& what) { c.expect(std::abs(a - b) <= 1e-9, what); };

    const auto* rel = r.find("skill_relevance");
    const auto* mom = r.find("moment_relevance");
    const auto* grd = r.find("activity_grounded");
    const auto* refl = r.find("reflection");
    c.expect(rel && mom && grd && refl, "metrics present");
    if (rel && mom && grd && refl) {
        near(*rel->mos, E::relevance_mos, "skill_relevance MOS");
        const double half = 1.96 * std::sqrt(E::relevance_ss / 294.0) / std::sqrt(295.0);
        near(*rel->ci_low, E::relevance_mos - half, "skill_relevance CI low");
        near(*rel->ci_high, E::relevance_mos + half, "skill_relevance CI high");
        near(rel->percentages.at("5"), E::relevance_pct5, "pct 5");
        near(rel->percentages.at("4"), E::relevance_pct4, "pct 4");
        near(rel->percentages.at("3"), E::relevance_pct3, "pct 3");
        near(*mom->mos, E::moment_mos, "moment MOS");
        near(*mom->ci_high, 3.0 + 1.96 * std::sqrt(E::moment_ss / 294.0) / std::sqrt(295.0), "moment CI");
        near(*grd->yes_rate_pct, E::grounded_yes_pct, "binary yes rate");
        near(refl->percentages.at("relates_to_experience"), E::relates_pct, "reflection share");
        near(refl->percentages.at("acknowledges_feelings"), E::feelings_pct, "reflection share");
        near(*refl->items_with_any_pct, E::any_pct, "items with any criterion");
        for (const auto& m : r.metrics) {
            double sum = 0;
            for (const auto& [k, v] : m.percentages) sum += v;
            c.expect(std::abs(sum - 100.0) <= kPercentSumTol, m.metric_id + " percentages sum " + std::to_string(sum));
            if (m.mos) c.expect(*m.ci_low <= *m.mos && *m.mos <= *m.ci_high, m.metric_id + " CI order");
        }
    }
    std::ostringstream d;
    d.precision(6);
    d << records.size() << " records (5 annotators x 59 items): skill_relevance MOS " << (rel ? *rel->mos : NAN)
      << ", reflection any " << (refl ? *refl->items_with_any_pct : NAN) << "%, percentages sum to 100 +/- "
      << kPercentSumTol;
    report("aggregation", c, d.str());
}

void retelling() {
    Check c;
    const auto lexicon = Lexicon::load(kAssets / "lexicon" / "emotion.lex");
    const auto f = extract_emotion_features(
        "I think it was being kind to friends, and then they hugged and now the girl\xE2\x80\x99s it", lexicon);
    const auto& affect = f.categories.at(std::string(kAffect));
    c.expect(f.unique_tokens == 15, "C13 unique tokens " + std::to_string(f.unique_tokens));
    c.expect(std::abs(affect.proportion - 2.0 / 15.0) <= 1e-12, "C13 affect proportion");

    std::vector<double> easel, none;
    for (int i = 0; i < 20; ++i) {
        none.push_back(0.02 + 0.003 * i);
        easel.push_back(none.back() + 0.02);
    }
    const auto shift = compare_paired(easel, none);
    const double p_min = std::ldexp(2.0, -20);
    c.expect(shift.wilcoxon && shift.wilcoxon->w_minus == 0.0, "W- == 0");
    c.expect(shift.wilcoxon && shift.wilcoxon->w_plus == 210.0, "W+ == 210");
    c.expect(shift.wilcoxon && shift.wilcoxon->p_two_sided == p_min, "p == 2/2^20");
    c.expect(shift.cliffs_delta > 0, "delta > 0");

    std::mt19937_64 rng(4242);
    int symmetric = 0;
    for (int i = 0; i < 200;) {
        std::vector<std::pair<double, double>> p(1 + rng() % 30);
        for (auto& [a, b] : p) a = static_cast<double>(rng() % 9) / 100, b = static_cast<double>(rng() % 9) / 100;
        std::vector<std::pair<double, double>> neg;
        for (const auto& [a, b] : p) neg.emplace_back(b, a);
        try {
            const bool same = wilcoxon_signed_rank(p).p_two_sided == wilcoxon_signed_rank(neg).p_two_sided;
            c.expect(same, "negation symmetry");
            symmetric += same;
            ++i;
        } catch (const Error& e) {
            if (e.code() != ErrorCode::AllZeroDifferences) throw;
        }
    }
    std::ostringstream d;
    d << "C13 affect " << affect.matched.size() << "/" << f.unique_tokens << "; constant shift W-="
      << (shift.wilcoxon ? shift.wilcoxon->w_minus : NAN) << " p=" << (shift.wilcoxon ? shift.wilcoxon->p_two_sided : NAN)
      << " (2/2^20=" << p_min << "); negation symmetry " << symmetric << "/200";
    report("retelling", c, d.str());
}

void determinism() {
    Check c;
    const auto taxonomy = load_taxonomy_file(kAssets / "taxonomy.json");
    const auto lib = TemplateLibrary::load(kAssets / "templates");
    const auto t = frog_toad();
    const std::string golden = read_file(kData / "golden" / "frog_toad_pipeline.json");
    PipelineConfig cfg;
    cfg.seed = 20240301;
    auto no_sleep = [](std::chrono::milliseconds) {};

    int identical = 0;
    for (int run = 0; run < 10; ++run) {
        auto provider = ScriptedProvider::from_file(kData / "fixtures" / "frog_toad_script.json");
        Pipeline p(taxonomy, lib, *provider, cfg);
        p.set_sleeper(no_sleep);
        const bool same = to_json(p.run(t)).dump(2) + "\n" == golden;
        c.expect(same, "run " + std::to_string(run) + " differs from golden");
        identical += same;
    }

    const auto script_text = read_file(kData / "fixtures" / "frog_toad_script.json");
    DetectionReport baseline;
    {
        ScriptedProvider provider(ScriptedProvider::parse_script(script_text));
        Pipeline p(taxonomy, lib, provider, cfg);
        p.set_sleeper(no_sleep);
        baseline = p.detect_skills(t);
    }
    int isolated = 0, injections = 0;
    for (auto target : kAllSkillIds) {
        for (const auto& fault : {ScriptedProvider::Reply{std::nullopt, "injected transport failure"},
                                  ScriptedProvider::Reply{"not a detection answer", std::nullopt}}) {
            auto script = ScriptedProvider::parse_script(script_text);
            script.rules.insert(script.rules.begin(),
                                ScriptedProvider::Rule{std::nullopt, "detection:" + std::string(to_string(target)), {}, {fault}});
            ScriptedProvider provider(std::move(script));
            Pipeline p(taxonomy, lib, provider, cfg);
            p.set_sleeper(no_sleep);
            const auto r = p.detect_skills(t);
            bool ok = r.outcome(target).diagnostic.has_value() && !r.outcome(target).present;
            for (auto other : kAllSkillIds)
                if (other != target) ok = ok && r.outcome(other) == baseline.outcome(other);
            c.expect(ok, "fault on " + std::string(to_string(target)) + " leaked");
            isolated += ok;
            ++injections;
        }
    }
    std::ostringstream d;
    d << identical << "/10 runs byte-identical to the golden output (produced by an independent reference generator); "
      << isolated << "/" << injections << " single-call fault injections left the other 9 outcomes unchanged";
    report("determinism", c, d.str());
}

void service() {
    Check c;
    std::string panels;
    {
        harness::StoreEnv env;
        const std::string secret = "acceptance-secret";
        harness::ServiceEnv svc(*env.store, {secret, std::nullopt});
        auto http = svc.client();
        auto ok = [&](const httplib::Result& r, int status, const std::string& step) {
            const bool good = r && r->status == status;
            c.expect(good, step + " -> " + (r ? std::to_string(r->status) : std::string("no response")));
            return good ? json::parse(r->body) : json();
        };
        const auto created = ok(http.Post("/api/sessions", json{{"child_id", "c13"}, {"episode_id", "frog-toad-ice-cream"}}.dump(),
                                          "application/json"),
                                201, "create");
        const std::string id = created.value("session_id", "");
        const auto acts = ok(http.Get("/api/sessions/" + id + "/activities"), 200, "activities");
        c.expect(acts.value("activities", json::array()).size() == 4, "four activities offered");
        ok(http.Post("/api/sessions/" + id + "/selection", json{{"activity_type", "Drawing"}}.dump(), "application/json"), 200,
           "selection");
        ok(http.Post("/api/sessions/" + id + "/artifact",
                     httplib::MultipartFormDataItems{{"kind", "Drawing", "", ""}, {"file", "png bytes", "d.png", "image/png"}}),
           200, "artifact");
        ok(http.Post("/api/sessions/" + id + "/artifact",
                     httplib::MultipartFormDataItems{{"kind", "Audio", "", ""}, {"role", "explanation", "", ""},
                                                     {"file", "webm bytes", "e.webm", "audio/webm"}}),
           200, "explanation");
        const auto view = ok(http.Get("/api/parent/sessions/" + id, {{"X-Easel-Parent", secret}}), 200, "parent_view");
        auto has = [&](const char* k) { return view.contains(k) && !view.at(k).is_null(); };
        const bool summary = has("summary") && !view["summary"].value("summary_text", "").empty();
        const bool skill = has("skill");
        const bool activity = has("activity") && has("artifact") && has("verbal_explanation");
        const bool starter = has("conversation_starter") && !view["conversation_starter"].value("prompt_text", "").empty();
        c.expect(summary && skill && activity && starter, "parent view panels");
        panels = std::to_string(summary + skill + activity + starter) + "/4 parent-view panels";
        c.expect(env.store->check_integrity().ok(), "integrity after lifecycle");
    }
    const auto crash = harness::crash_trials(10, 99);
    c.expect(crash.problems_after_recovery == 0, "after recovery: " + crash.first_problem);
    c.expect(crash.killed_mid_run == crash.trials, "writer finished before the kill");
    std::ostringstream d;
    d << "HTTP lifecycle create->activities->selection->artifact->explanation->parent_view with " << panels
      << "; crash recovery: " << crash.killed_mid_run << " SIGKILLed writers, " << crash.temp_files_removed
      << " temp files and " << crash.orphans_removed << " orphan blobs cleaned, " << crash.problems_after_recovery
      << " torn records or orphans left";
    report("service", c, d.str());
}

} // namespace

int main() {
    guarded("prompt_fidelity", prompt_fidelity);
    guarded("parser", parser);
    guarded("metric_oracles", metric_oracles);
    guarded("aggregation", aggregation);
    guarded("retelling", retelling);
    guarded("determinism", determinism);
    guarded("service", service);
    std::cout << (g_failed ? "acceptance: FAILED (" + std::to_string(g_failed) + ")" : std::string("acceptance: all passed"))
              << "\n";
    return g_failed ? 1 : 0;
}
