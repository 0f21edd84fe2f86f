#define CPPHTTPLIB_OPENSSL_SUPPORT
#include <doctest.h>
#include <httplib.h>

#include <atomic>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <memory>
#include <thread>

#include "gamepred/provider.hpp"
#include "gamepred/synth.hpp"

using namespace gamepred;
namespace fs = std::filesystem;

namespace {

RenderedPrompt prompt_with_context(double offer_frac) {
    DecisionPoint dp;
    dp.id = "pv-1";
    dp.family = GameFamily::bargaining;
    BargainingConfig cfg;
    cfg.stakes = Money{10000, "USD"};
    dp.config = cfg;
    dp.round_index = 1;
    dp.role = "responder";
    dp.history.push_back(Turn{"Alice", "Offer.", json{{"offer_frac", offer_frac}}});
    dp.decision_labels = {"accept", "reject"};
    dp.affirmative_label = "accept";
    dp.human_choice = "accept";
    return build_prompt(dp, variant_by_name("standard"), PromptFormat::standard);
}

double normalized_affirmative(const TokenDistribution& dist, const RenderedPrompt& prompt) {
    LabelMass mass = match_decision_tokens(dist, prompt.expected_labels,
                                           default_alias_table(prompt.expected_labels));
    double affirm = mass.per_label.at("accept");
    double total = 0.0;
    for (const auto& [label, p] : mass.per_label) total += p;
    return affirm / total;
}

} // namespace

TEST_CASE("mock provider is a pure function of model id and prompt text") {
    MockProvider mock;
    RenderedPrompt p = prompt_with_context(0.42);
    TokenDistribution a = mock.fetch_next_token_logprobs("behavioral-base-7b", p);
    TokenDistribution b = mock.fetch_next_token_logprobs("behavioral-base-7b", p);
    REQUIRE(a.entries.size() == b.entries.size());
    for (std::size_t i = 0; i < a.entries.size(); ++i) {
        CHECK(a.entries[i].first == b.entries[i].first);
        CHECK(a.entries[i].second == b.entries[i].second);
    }
    TokenDistribution c = mock.fetch_next_token_logprobs("noise-base-7b", p);
    bool identical = a.entries.size() == c.entries.size();
    if (identical)
        for (std::size_t i = 0; i < a.entries.size(); ++i)
            identical = identical && a.entries[i] == c.entries[i];
    CHECK_FALSE(identical);
}

TEST_CASE("always-token models put 0.9 on the named token") {
    MockProvider mock;
    RenderedPrompt p = prompt_with_context(0.5);
    TokenDistribution dist = mock.fetch_next_token_logprobs("always-accept", p);
    double found = 0.0;
    for (const auto& [token, logprob] : dist.entries)
        if (token == "accept") found = std::exp(logprob);
    CHECK(found == doctest::Approx(0.9).epsilon(1e-9));
}

TEST_CASE("behavioral models track the dialogue context logistic") {
    MockProvider mock;
    for (double x : {0.1, 0.35, 0.65, 0.9}) {
        RenderedPrompt p = prompt_with_context(x);
        TokenDistribution dist = mock.fetch_next_token_logprobs("behavioral-base-7b", p);
        double expect = behavior::dialogue_p_affirm(x);
        CHECK(normalized_affirmative(dist, p) == doctest::Approx(expect).epsilon(1e-6));
    }
}

TEST_CASE("behavioral decision mass sits near 0.92 and lowmass near 0.30") {
    MockProvider mock;
    RenderedPrompt p = prompt_with_context(0.5);
    auto decision_mass = [&](const char* model) {
        TokenDistribution dist = mock.fetch_next_token_logprobs(model, p);
        LabelMass mass = match_decision_tokens(dist, p.expected_labels,
                                               default_alias_table(p.expected_labels));
        return mass.total_mass;
    };
    CHECK(decision_mass("behavioral-base-7b") == doctest::Approx(0.92).epsilon(1e-6));
    CHECK(decision_mass("lowmass-chat-13b") == doctest::Approx(0.30).epsilon(1e-6));
}

TEST_CASE("mock distributions validate and respect top-k") {
    MockProvider mock;
    RenderedPrompt p = prompt_with_context(0.3);
    for (const char* model : {"behavioral-base-7b", "noise-chat-1b", "lowmass-chat-13b"}) {
        TokenDistribution dist = mock.fetch_next_token_logprobs(model, p, 5);
        CHECK_NOTHROW(validate(dist));
        CHECK(dist.entries.size() <= 5);
    }
}

TEST_CASE("distribution invariants are enforced") {
    TokenDistribution bad;
    bad.model_id = "m";
    bad.entries = {{"a", 0.5}};
    CHECK_THROWS_AS(validate(bad), SchemaError); // positive logprob

    TokenDistribution dup;
    dup.model_id = "m";
    dup.entries = {{"a", -1.0}, {"a", -2.0}};
    CHECK_THROWS_AS(validate(dup), SchemaError);

    TokenDistribution heavy;
    heavy.model_id = "m";
    heavy.entries = {{"a", -0.01}, {"b", -0.01}};
    CHECK_THROWS_AS(validate(heavy), SchemaError); // total mass > 1
}

TEST_CASE("alias tables cover casing and leading-space surface forms") {
    AliasTable table = default_alias_table({"accept", "reject"});
    const auto& accept = table.per_label.at("accept");
    CHECK(accept.count("accept"));
    CHECK(accept.count(" accept"));
    CHECK(accept.count("Accept"));
    CHECK(accept.count(" Accept"));
}

TEST_CASE("match_decision_tokens sums alias masses and reports total coverage") {
    TokenDistribution dist;
    dist.model_id = "m";
    dist.entries = {{" accept", std::log(0.5)},
                    {"Accept", std::log(0.1)},
                    {" reject", std::log(0.2)},
                    {"the", std::log(0.15)}};
    LabelMass mass =
        match_decision_tokens(dist, {"accept", "reject"}, default_alias_table({"accept", "reject"}));
    CHECK(mass.per_label.at("accept") == doctest::Approx(0.6).epsilon(1e-12));
    CHECK(mass.per_label.at("reject") == doctest::Approx(0.2).epsilon(1e-12));
    CHECK(mass.total_mass == doctest::Approx(0.8).epsilon(1e-12));
}

TEST_CASE("overlapping alias sets are rejected") {
    AliasTable overlap;
    overlap.per_label["yes"] = {"yes", "y"};
    overlap.per_label["yeah"] = {"yeah", "y"};
    TokenDistribution dist;
    dist.model_id = "m";
    dist.entries = {{"yes", std::log(0.5)}};
    CHECK_THROWS_AS((void)match_decision_tokens(dist, {"yes", "yeah"}, overlap), ConfigError);
}

TEST_CASE("caching provider persists distributions across instances") {
    fs::path dir = fs::temp_directory_path() / "gamepred-test-cache";
    fs::remove_all(dir);

    RenderedPrompt p = prompt_with_context(0.77);
    auto mock = std::make_shared<MockProvider>();
    CachingProvider first(mock, dir.string());
    TokenDistribution a = first.fetch_next_token_logprobs("behavioral-base-7b", p);
    CHECK(first.misses() == 1);
    CHECK(first.hits() == 0);
    TokenDistribution b = first.fetch_next_token_logprobs("behavioral-base-7b", p);
    CHECK(first.hits() == 1);

    CachingProvider second(mock, dir.string());
    TokenDistribution c = second.fetch_next_token_logprobs("behavioral-base-7b", p);
    CHECK(second.hits() == 1);
    CHECK(second.misses() == 0);

    REQUIRE(a.entries.size() == c.entries.size());
    for (std::size_t i = 0; i < a.entries.size(); ++i) {
        CHECK(a.entries[i].first == c.entries[i].first);
        CHECK(a.entries[i].second == doctest::Approx(c.entries[i].second).epsilon(1e-12));
    }
}

TEST_CASE("http provider speaks the completion protocol with retry and capability checks") {
    httplib::Server server;
    std::atomic<int> flaky_calls{0};

    server.Post("/v1/completions", [&](const httplib::Request& req, httplib::Response& res) {
        json body = json::parse(req.body);
        std::string model = body.at("model");
        CHECK(body.at("max_tokens") == 1);
        CHECK(body.at("temperature") == 0);
        if (model == "no-logprobs") {
            res.set_content(R"({"choices":[{"text":"x","logprobs":null}]})", "application/json");
            return;
        }
        if (model == "flaky" && flaky_calls.fetch_add(1) == 0) {
            res.status = 503;
            return;
        }
        if (model == "needs-auth" && req.get_header_value("Authorization") != "Bearer sekrit") {
            res.status = 401;
            res.set_content("missing credential", "text/plain");
            return;
        }
        json out = {{"choices",
                     {{{"text", " accept"},
                       {"logprobs",
                        {{"top_logprobs",
                          {{{" accept", -0.3}, {" reject", -1.8}, {"the", -3.0}}}}}}}}}};
        res.set_content(out.dump(), "application/json");
    });

    int port = server.bind_to_any_port("127.0.0.1");
    REQUIRE(port > 0);
    std::thread server_thread([&] { server.listen_after_bind(); });
    server.wait_until_ready();

    EndpointConfig cfg;
    cfg.base_url = "http://127.0.0.1:" + std::to_string(port);
    cfg.max_attempts = 2;
    cfg.retry_backoff_ms = 1;
    cfg.connect_timeout_seconds = 2;
    cfg.timeout_seconds = 5;

    RenderedPrompt p = prompt_with_context(0.5);

    {
        HttpProvider provider(cfg);
        TokenDistribution dist = provider.fetch_next_token_logprobs("any-model", p, 3);
        REQUIRE(dist.entries.size() == 3);
        CHECK(dist.entries.front().first == " accept");
        CHECK(dist.entries.front().second == doctest::Approx(-0.3));
        CHECK_NOTHROW(provider.check_capability("any-model"));
        CHECK_THROWS_AS(provider.check_capability("no-logprobs"), CapabilityError);
        // First call 503s, the retry succeeds.
        CHECK_NOTHROW((void)provider.fetch_next_token_logprobs("flaky", p, 3));
        CHECK(flaky_calls.load() >= 1);
    }

    {
        EndpointConfig auth_cfg = cfg;
        auth_cfg.credential_env = "GAMEPRED_TEST_TOKEN";
        unsetenv("GAMEPRED_TEST_TOKEN");
        HttpProvider provider(auth_cfg);
        CHECK_THROWS_AS((void)provider.fetch_next_token_logprobs("needs-auth", p, 3),
                        ConfigError);
        setenv("GAMEPRED_TEST_TOKEN", "sekrit", 1);
        CHECK_NOTHROW((void)provider.fetch_next_token_logprobs("needs-auth", p, 3));
        setenv("GAMEPRED_TEST_TOKEN", "wrong", 1);
        CHECK_THROWS_AS((void)provider.fetch_next_token_logprobs("needs-auth", p, 3), HttpError);
        unsetenv("GAMEPRED_TEST_TOKEN");
    }

    server.stop();
    server_thread.join();

    // With the server gone, the retry budget exhausts into a transport error.
    EndpointConfig dead = cfg;
    dead.max_attempts = 1;
    HttpProvider provider(dead);
    CHECK_THROWS_AS((void)provider.fetch_next_token_logprobs("any-model", p, 3), TransportError);
}
