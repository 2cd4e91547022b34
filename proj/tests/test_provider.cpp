#include "easel/provider.hpp"

#include "support.hpp"

#include <httplib.h>
#include <json.hpp>

#include <thread>

using namespace easel;
using nlohmann::json;

namespace {

ProviderRequest req(std::string prompt, std::string purpose = "detection:A1") {
    return ProviderRequest{std::move(prompt), DecodingParams{}, "gpt-4", std::move(purpose)};
}

// Local stand-in for a chat-completions endpoint.
struct FakeChatServer {
    httplib::Server server;
    int port = 0;
    std::thread thread;
    json last_request;
    std::string last_auth;
    int status = 200;
    std::string reply_body = R"({"model":"fake","choices":[{"message":{"role":"assistant","content":"1, ok"}}]})";

    FakeChatServer() {
        server.Post("/v1/chat/completions", [this](const httplib::Request& r, httplib::Response& res) {
            last_request = json::parse(r.body);
            last_auth = r.get_header_value("Authorization");
            res.status = status;
            res.set_content(reply_body, "application/json");
        });
        port = server.bind_to_any_port("127.0.0.1");
        thread = std::thread([this] { server.listen_after_bind(); });
        server.wait_until_ready();
    }
    ~FakeChatServer() {
        server.stop();
        thread.join();
    }
    std::string url() const { return "http://127.0.0.1:" + std::to_string(port) + "/v1/chat/completions"; }
};

} // namespace

TEST_CASE("request validation") {
    ScriptedProvider p({}, "0");
    CHECK_ERROR_CODE(p.complete(req("")), ErrorCode::InvalidConfig);
    auto r = req("x");
    r.decoding.temperature = 2.5;
    CHECK_ERROR_CODE(p.complete(r), ErrorCode::InvalidConfig);
    r.decoding.temperature = 2.0;
    CHECK(p.complete(r).text == "0");
}

TEST_CASE("scripted replies walk a per-prompt cursor and repeat the last entry") {
    auto sp = ScriptedProvider::from_json(R"({
        "rules": [{"purpose": "detection:M2", "responses": ["garbage", "0"]}]
    })");
    CHECK(sp.complete(req("a", "detection:M2")).text == "garbage");
    CHECK(sp.complete(req("b", "detection:M2")).text == "garbage");  // different prompt, own cursor
    CHECK(sp.complete(req("a", "detection:M2")).text == "0");
    CHECK(sp.complete(req("a", "detection:M2")).text == "0");
    CHECK(sp.call_count("detection:M2") == 4);
    CHECK_ERROR_CODE(sp.complete(req("a", "detection:A1")), ErrorCode::ProviderError);  // no default
}

TEST_CASE("rule matching by digest, purpose prefix and contains") {
    const std::string doc = json{{"default", "fallback"},
                                 {"rules",
                                  {{{"digest", prompt_digest("exact prompt")}, {"responses", {"by digest"}}},
                                   {{"purpose", "child:*"}, {"responses", {"child reply"}}},
                                   {{"contains", {"needle", "thread"}}, {"responses", {{{"error", "timeout"}}}}}}}}
                                .dump();
    auto p = ScriptedProvider(ScriptedProvider::parse_script(doc));
    CHECK(p.complete(req("exact prompt")).text == "by digest");
    CHECK(p.complete(req("anything", "child:RolePlay")).text == "child reply");
    CHECK(p.complete(req("needle only")).text == "fallback");
    CHECK_ERROR_CODE(p.complete(req("needle and thread")), ErrorCode::ProviderError);
    const auto calls = p.calls();
    REQUIRE(calls.size() == 4);
    CHECK(calls[3].error == "timeout");
    CHECK(calls[0].prompt_digest == prompt_digest("exact prompt"));
}

TEST_CASE("script parse errors") {
    CHECK_ERROR_CODE(ScriptedProvider::parse_script("{"), ErrorCode::Parse);
    CHECK_ERROR_CODE(ScriptedProvider::parse_script(R"({"rules":[{"purpose":"x","responses":[]}]})"), ErrorCode::Parse);
    CHECK_ERROR_CODE(ScriptedProvider::parse_script(R"({"rules":[{"purpose":"x","responses":[3]}]})"), ErrorCode::Parse);
}

TEST_CASE("the shipped fixture script loads") {
    auto p = ScriptedProvider::from_file(test::fixture("frog_toad_script.json"));
    CHECK(p->complete(req("whatever", "detection:S3")).text == "0");
    CHECK(p->complete(req("whatever", "summary")).text.find("Toad is left without") != std::string::npos);
}

TEST_CASE("logging provider writes one JSON line per call") {
    test::TempDir dir;
    const auto log = dir.path() / "calls.jsonl";
    ScriptedProvider inner({ScriptedProvider::Rule{std::nullopt, "bad", {}, {ScriptedProvider::Reply{std::nullopt, "boom"}}}}, "0");
    {
        LoggingProvider p(inner, log);
        CHECK(p.complete(req("hello")).text == "0");
        CHECK_ERROR_CODE(p.complete(req("hello", "bad")), ErrorCode::ProviderError);
    }
    std::istringstream lines(read_file(log));
    std::string line;
    std::vector<json> entries;
    while (std::getline(lines, line)) entries.push_back(json::parse(line));
    REQUIRE(entries.size() == 2);
    CHECK(entries[0]["response"] == "0");
    CHECK(entries[0]["prompt"] == "hello");
    CHECK(entries[0]["prompt_digest"] == prompt_digest("hello"));
    CHECK(entries[1]["purpose"] == "bad");
    CHECK(entries[1]["error"].get<std::string>().find("boom") != std::string::npos);
}

TEST_CASE("split_url") {
    CHECK(split_url("http://localhost:8000/v1/chat/completions") ==
          std::pair<std::string, std::string>{"http://localhost:8000", "/v1/chat/completions"});
    CHECK(split_url("https://api.example.com") == std::pair<std::string, std::string>{"https://api.example.com", "/"});
    CHECK_ERROR_CODE(split_url("localhost/x"), ErrorCode::InvalidConfig);
}

TEST_CASE("http provider speaks the chat-completions protocol") {
    FakeChatServer server;
    HttpChatProvider p(server.url(), std::string("sk-test"), 5);
    auto r = req("Is this SEL?");
    r.decoding = {0.3, 64};
    const auto out = p.complete(r);
    CHECK(out.text == "1, ok");
    CHECK(out.provider_meta == "fake");
    CHECK(server.last_auth == "Bearer sk-test");
    CHECK(server.last_request["model"] == "gpt-4");
    CHECK(server.last_request["messages"][0]["content"] == "Is this SEL?");
    CHECK(server.last_request["temperature"].get<double>() == doctest::Approx(0.3));
    CHECK(server.last_request["max_tokens"] == 64);

    SUBCASE("non-200 status") {
        server.status = 429;
        CHECK_ERROR_CODE(p.complete(r), ErrorCode::ProviderError);
    }
    SUBCASE("malformed payload") {
        server.reply_body = R"({"choices":[]})";
        CHECK_ERROR_CODE(p.complete(r), ErrorCode::ProviderError);
    }
}

TEST_CASE("http provider reports an unreachable endpoint") {
    int port = 0;
    {
        httplib::Server probe;
        port = probe.bind_to_any_port("127.0.0.1");
    }
    HttpChatProvider p("http://127.0.0.1:" + std::to_string(port) + "/v1/chat/completions", std::string(), 2);
    CHECK_ERROR_CODE(p.complete(req("x")), ErrorCode::ProviderError);
}
