#include "easel/config.hpp"

#include "support.hpp"

#include <cstdlib>

using namespace easel;

TEST_CASE("config file syntax") {
    const auto f = ConfigFile::parse(R"(
# top comment
top = 1
[pipeline]
model = "gpt-4o"   # trailing comment
seed = 42
[service]
parent_secret = "a#b \"quoted\" \\ done"
explanation_for_text = no
)");
    CHECK(f.get("top") == "1");
    CHECK(f.get("pipeline.model") == "gpt-4o");
    CHECK(f.get_integer("pipeline.seed") == 42);
    CHECK(f.get("service.parent_secret") == "a#b \"quoted\" \\ done");
    CHECK(f.get_bool("service.explanation_for_text") == false);
    CHECK_FALSE(f.get("missing"));
    CHECK(f.get_or("missing", "x") == "x");

    CHECK_ERROR_CODE(ConfigFile::parse("[open\n"), ErrorCode::InvalidConfig);
    CHECK_ERROR_CODE(ConfigFile::parse("novalue\n"), ErrorCode::InvalidConfig);
    CHECK_ERROR_CODE(ConfigFile::parse("a = \"unterminated\n"), ErrorCode::InvalidConfig);
    CHECK_ERROR_CODE(ConfigFile::parse("a = 1\na = 2\n"), ErrorCode::InvalidConfig);
    CHECK_ERROR_CODE(ConfigFile::parse("a = x\n").get_integer("a"), ErrorCode::InvalidConfig);
    CHECK_ERROR_CODE(ConfigFile::parse("a = maybe\n").get_bool("a"), ErrorCode::InvalidConfig);
}

TEST_CASE("app config from a file") {
    ::unsetenv("EASEL_PARENT_SECRET");
    const auto f = ConfigFile::parse(R"(
[provider]
kind = "scripted"
script = "script.json"
[pipeline]
seed = 7
selection = "first_in_order"
activity_policy = "RolePlay"
retry_max_attempts = 5
generation_temperature = 0.2
[service]
port = 9000
root = "/abs/data"
parent_secret = "s3"
[paths]
assets = "assets"
)");
    const auto cfg = app_config_from(f, "/base");
    CHECK(cfg.provider.script == std::filesystem::path("/base/script.json"));
    CHECK(cfg.pipeline.seed == 7);
    CHECK(cfg.pipeline.selection == SelectionPolicy::FirstInOrder);
    CHECK(cfg.pipeline.activity_policy == ActivityPolicy::Fixed(ActivityType::RolePlay));
    CHECK(cfg.pipeline.retry.max_attempts == 5);
    CHECK(cfg.pipeline.generation_decoding.temperature == 0.2);
    CHECK(cfg.service.port == 9000);
    CHECK(cfg.service.root == std::filesystem::path("/abs/data"));
    CHECK(cfg.service.parent_secret == "s3");
    CHECK(cfg.assets_dir == std::filesystem::path("/base/assets"));

    ::setenv("EASEL_PARENT_SECRET", "from-env", 1);
    CHECK(app_config_from(f, "/base").service.parent_secret == "from-env");
    ::unsetenv("EASEL_PARENT_SECRET");
}

TEST_CASE("app config rejects bad values") {
    CHECK_ERROR_CODE(app_config_from(ConfigFile::parse("[pipeline]\nsede = 1\n")), ErrorCode::InvalidConfig);
    CHECK_ERROR_CODE(app_config_from(ConfigFile::parse("[provider]\nkind = carrier_pigeon\n")), ErrorCode::InvalidConfig);
    CHECK_ERROR_CODE(app_config_from(ConfigFile::parse("[pipeline]\nselection = lottery\n")), ErrorCode::InvalidConfig);
    CHECK_ERROR_CODE(app_config_from(ConfigFile::parse("[pipeline]\nactivity_policy = Dance\n")), ErrorCode::InvalidConfig);
    CHECK_ERROR_CODE(app_config_from(ConfigFile::parse("[pipeline]\ngeneration_temperature = 2.5\n")), ErrorCode::InvalidConfig);
}

TEST_CASE("defaults") {
    const auto cfg = load_app_config(std::nullopt);
    CHECK(cfg.provider.kind == "scripted");
    CHECK(cfg.service.host == "127.0.0.1");
    CHECK(cfg.pipeline.selection == SelectionPolicy::SeededRandom);
    CHECK(std::filesystem::exists(cfg.assets_dir / "taxonomy.json"));
}

TEST_CASE("provider factory") {
    ProviderConfig pc;
    CHECK_ERROR_CODE(make_provider(pc), ErrorCode::InvalidConfig);
    pc.kind = "http";
    CHECK_ERROR_CODE(make_provider(pc), ErrorCode::InvalidConfig);

    test::TempDir dir;
    ProviderConfig scripted;
    scripted.script = test::fixture("frog_toad_script.json");
    scripted.log_path = dir.path() / "calls.jsonl";
    auto p = make_provider(scripted);
    CHECK(p->complete({"prompt", {}, "gpt-4", "summary"}).text.find("Frog") == 0);
    CHECK(read_file(dir.path() / "calls.jsonl").find("\"purpose\":\"summary\"") != std::string::npos);
}
