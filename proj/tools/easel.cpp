// easel command-line tool: service, pipeline runs and evaluation reports.

#include "easel/annotations.hpp"
#include "easel/config.hpp"
#include "easel/embedding.hpp"
#include "easel/error.hpp"
#include "easel/evalharness.hpp"
#include "easel/pipeline.hpp"
#include "easel/prompting.hpp"
#include "easel/retelling.hpp"
#include "easel/service.hpp"
#include "easel/store.hpp"
#include "easel/util.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <csignal>
#include <iostream>

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

easel::Service* g_service = nullptr;

void on_signal(int) {
    if (g_service) g_service->stop();
}

void emit(const json& doc, const std::string& out_path) {
    const std::string text = doc.dump(2) + "\n";
    if (out_path.empty() || out_path == "-") {
        std::cout << text;
    } else {
        easel::write_file_atomic(out_path, text);
    }
}

struct Common {
    std::string config;
    std::string assets;
    std::optional<std::uint64_t> seed;

    easel::AppConfig load() const {
        auto cfg = easel::load_app_config(config.empty() ? std::nullopt : std::optional<fs::path>(config));
        if (!assets.empty()) cfg.assets_dir = assets;
        if (seed) cfg.pipeline.seed = *seed;
        return cfg;
    }
};

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"SEL moment detection, activity generation and evaluation"};
    app.require_subcommand(1);

    Common common;
    auto add_common = [&](CLI::App* sub) {
        sub->add_option("--config", common.config, "easel.toml-style config file");
        sub->add_option("--assets", common.assets, "asset directory (taxonomy, templates)");
    };

    // serve
    auto* serve = app.add_subcommand("serve", "run the HTTP API");
    add_common(serve);
    std::string root;
    int port = -1;
    std::string host;
    std::string media;
    serve->add_option("--root", root, "store root directory");
    serve->add_option("--port", port, "listen port");
    serve->add_option("--host", host, "listen address");
    serve->add_option("--media", media, "directory served under /media");

    // detect / generate
    auto* detect = app.add_subcommand("detect", "run skill detection on one transcript");
    auto* generate = app.add_subcommand("generate", "run the full pipeline on one transcript");
    std::string transcript_path, out_path;
    for (auto* sub : {detect, generate}) {
        add_common(sub);
        sub->add_option("--transcript", transcript_path, "transcript (.json or plain text)")->required();
        sub->add_option("--out", out_path, "output file (default stdout)");
        sub->add_option("--seed", common.seed, "selection seed");
    }

    // eval
    auto* eval = app.add_subcommand("eval", "score detection predictions against gold labels");
    std::string gold, pred, ratings, embed_endpoint, embed_model = "text-embedding-3-small";
    eval->add_option("--gold", gold, "gold labels (.csv or .json)")->required();
    eval->add_option("--pred", pred, "predictions (.csv, .json, detection reports or pipeline outputs)")->required();
    eval->add_option("--ratings", ratings, "rater table for agreement (item_id, rater_id, value)");
    eval->add_option("--embed-endpoint", embed_endpoint, "embeddings URL (default: offline hash embedder)");
    eval->add_option("--embed-model", embed_model, "embedding model name");
    eval->add_option("--out", out_path, "report file (default stdout)");

    // annotations
    auto* annotations = app.add_subcommand("annotations", "aggregate annotation ratings into a quality report");
    std::string schema_path, records_path;
    annotations->add_option("--schema", schema_path, "annotation schema (.json)")->required();
    annotations->add_option("--records", records_path, "annotation records (.csv or .json)")->required();
    annotations->add_option("--out", out_path, "report file (default stdout)");

    // retell-stats
    auto* retell = app.add_subcommand("retell-stats", "emotion-word statistics over paired retellings");
    std::string lexicon_path, data_path;
    bool pratt = false;
    retell->add_option("--lexicon", lexicon_path, "lexicon file (native or LIWC .dic)")->required();
    retell->add_option("--data", data_path, "retellings (.csv or .json: child_id, condition, text)")->required();
    retell->add_flag("--pratt", pratt, "keep zero differences in the ranking (Pratt)");
    retell->add_option("--out", out_path, "report file (default stdout)");

    CLI11_PARSE(app, argc, argv);

    try {
        if (serve->parsed()) {
            auto cfg = common.load();
            if (!root.empty()) cfg.service.root = root;
            if (port >= 0) cfg.service.port = port;
            if (!host.empty()) cfg.service.host = host;
            const auto taxonomy = easel::load_taxonomy_file(cfg.assets_dir / "taxonomy.json");
            const auto templates = easel::TemplateLibrary::load(cfg.assets_dir / "templates");
            auto provider = easel::make_provider(cfg.provider);
            easel::StoreOptions store_opts;
            store_opts.explanation_for_text = cfg.service.explanation_for_text;
            easel::Store store(cfg.service.root, taxonomy, templates, *provider, cfg.pipeline, store_opts);
            const auto recovered = store.recover();
            if (!recovered.removed_temp_files.empty() || !recovered.removed_orphan_blobs.empty()) {
                std::cerr << "recovery: removed " << recovered.removed_temp_files.size() << " temp file(s), "
                          << recovered.removed_orphan_blobs.size() << " orphan blob(s)\n";
            }
            easel::ServiceOptions svc_opts{cfg.service.parent_secret, std::nullopt};
            if (!media.empty()) svc_opts.media_dir = media;
            if (svc_opts.parent_secret.empty()) std::cerr << "warning: no parent secret set; parent API disabled\n";
            easel::Service service(store, svc_opts);
            const int bound = service.bind(cfg.service.host, cfg.service.port);
            std::cerr << "listening on " << cfg.service.host << ":" << bound << "\n";
            g_service = &service;
            std::signal(SIGINT, on_signal);
            std::signal(SIGTERM, on_signal);
            service.run();
            g_service = nullptr;
            return 0;
        }

        if (detect->parsed() || generate->parsed()) {
            const auto cfg = common.load();
            const auto taxonomy = easel::load_taxonomy_file(cfg.assets_dir / "taxonomy.json");
            const auto templates = easel::TemplateLibrary::load(cfg.assets_dir / "templates");
            auto provider = easel::make_provider(cfg.provider);
            const easel::Pipeline pipeline(taxonomy, templates, *provider, cfg.pipeline);
            const auto transcript = easel::load_transcript_file(transcript_path);
            if (detect->parsed()) {
                emit(easel::to_json(pipeline.detect_skills(transcript)), out_path);
            } else {
                emit(easel::to_json(pipeline.run(transcript)), out_path);
            }
            return 0;
        }

        if (eval->parsed()) {
            const auto gold_set = easel::load_labels(gold);
            const auto pred_set = easel::load_labels(pred);
            json report = {{"detection", easel::to_json(easel::score_detection(pred_set, gold_set))}};
            const auto pairs = easel::explanation_pairs(pred_set, gold_set);
            if (!pairs.empty()) {
                std::unique_ptr<easel::EmbeddingProvider> embedder;
                if (embed_endpoint.empty()) {
                    embedder = std::make_unique<easel::HashEmbedder>();
                } else {
                    embedder = std::make_unique<easel::HttpEmbedder>(embed_endpoint, embed_model);
                }
                const auto sim = easel::explanation_similarity(pairs, *embedder);
                report["explanation_similarity"] = {{"n_pairs", pairs.size()},
                                                    {"mean", sim.mean},
                                                    {"per_pair", sim.per_pair},
                                                    {"embedder", embed_endpoint.empty() ? "hash-16" : embed_model}};
            }
            if (!ratings.empty()) {
                const auto table = easel::parse_rater_table_csv(easel::read_file(ratings));
                const auto alpha = easel::krippendorff_alpha(table);
                report["agreement"] = {{"percent_agreement", easel::percent_agreement(table)},
                                       {"krippendorff_alpha", alpha.alpha},
                                       {"no_variance", alpha.no_variance},
                                       {"pairable_values", alpha.pairable_values}};
            }
            emit(report, out_path);
            return 0;
        }

        if (annotations->parsed()) {
            const auto schema = easel::load_annotation_schema(schema_path);
            const auto records = easel::load_annotations(records_path, schema);
            emit(easel::to_json(easel::aggregate_annotations(records, schema)), out_path);
            return 0;
        }

        if (retell->parsed()) {
            const auto lexicon = easel::Lexicon::load(lexicon_path);
            const auto records = easel::load_retellings(data_path);
            const auto stats = easel::compare_conditions(records, lexicon,
                                                         pratt ? easel::ZeroHandling::Pratt : easel::ZeroHandling::Discard);
            json report = json::object();
            for (const auto& [category, s] : stats) report[category] = easel::to_json(s);
            emit(report, out_path);
            return 0;
        }
    } catch (const easel::Error& e) {
        std::cerr << "easel: " << e.what() << "\n";
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "easel: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
