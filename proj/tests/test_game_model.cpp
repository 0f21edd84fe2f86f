#include <doctest.h>

#include <filesystem>
#include <fstream>

#include "gamepred/game_model.hpp"

using namespace gamepred;
namespace fs = std::filesystem;

namespace {

DecisionPoint make_bargaining_dp(const std::string& id = "b-1") {
    DecisionPoint dp;
    dp.id = id;
    dp.family = GameFamily::bargaining;
    BargainingConfig cfg;
    cfg.stakes = Money{10000, "USD"};
    cfg.delta1 = 0.9;
    cfg.delta2 = 0.9;
    cfg.max_rounds = 12;
    dp.config = cfg;
    dp.round_index = 2;
    dp.role = "responder";
    dp.history.push_back(Turn{"Alice", "I propose a split.", json{{"offer_frac", 0.35}}});
    dp.decision_labels = {"accept", "reject"};
    dp.affirmative_label = "accept";
    dp.human_choice = "reject";
    return dp;
}

DecisionPoint make_lottery_dp(const std::string& id = "l-1") {
    DecisionPoint dp;
    dp.id = id;
    dp.family = GameFamily::lottery;
    LotteryConfig cfg;
    cfg.option_a = {{Money{10000, "USD"}, 0.5}, {Money{0, "USD"}, 0.5}};
    cfg.option_b = {{Money{4500, "USD"}, 1.0}};
    dp.config = cfg;
    dp.decision_labels = {"A", "B"};
    dp.affirmative_label = "A";
    dp.human_choice = "B";
    dp.aggregate_choice_rate = 0.42;
    dp.n_participants = 30;
    return dp;
}

fs::path fresh_dir(const std::string& tag) {
    fs::path dir = fs::temp_directory_path() / ("gamepred-test-" + tag);
    fs::remove_all(dir);
    fs::create_directories(dir);
    return dir;
}

} // namespace

TEST_CASE("family names round-trip and unknown names throw") {
    for (GameFamily f : kAllFamilies) CHECK(parse_family(family_name(f)) == f);
    CHECK_THROWS_AS((void)parse_family("poker"), SchemaError);
}

TEST_CASE("label arity and aggregate level per family") {
    CHECK(label_arity(GameFamily::negotiation) == 3);
    CHECK(label_arity(GameFamily::bargaining) == 2);
    CHECK(label_arity(GameFamily::lottery) == 2);
    CHECK(is_aggregate_level(GameFamily::matrix_oneshot));
    CHECK(is_aggregate_level(GameFamily::lottery));
    CHECK_FALSE(is_aggregate_level(GameFamily::bargaining));
    CHECK_FALSE(is_aggregate_level(GameFamily::matrix_repeated));
}

TEST_CASE("money renders with grouping, cents, and bucket labels") {
    CHECK(money_text(Money{10000, "USD"}) == "$100");
    CHECK(money_text(Money{3750, "USD"}) == "$37.50");
    CHECK(money_text(Money{100000000, "USD"}) == "$1,000,000");
    CHECK(money_text(Money{-150, "USD"}) == "-$1.50");
    CHECK(money_bucket_label(Money{10000, "USD"}) == "$100");
    CHECK(money_bucket_label(Money{1000000, "USD"}) == "$10K");
    CHECK(money_bucket_label(Money{100000000, "USD"}) == "$1M");
    CHECK(money_bucket_label(Money{12345, "USD"}) == "$123.45");
}

TEST_CASE("decision coding is affirmative-vs-rest") {
    DecisionPoint barg = make_bargaining_dp();
    CHECK(code_decision(barg, "accept") == 1);
    CHECK(code_decision(barg, "reject") == 0);
    CHECK_THROWS_AS((void)code_decision(barg, "maybe"), SchemaError);

    DecisionPoint nego;
    nego.id = "n-1";
    nego.family = GameFamily::negotiation;
    NegotiationConfig cfg;
    cfg.price = Money{1000000, "USD"};
    nego.config = cfg;
    nego.decision_labels = {"AcceptOffer", "RejectOffer", "DealWithJohn"};
    nego.affirmative_label = "AcceptOffer";
    nego.human_choice = "RejectOffer";
    CHECK(code_decision(nego, "AcceptOffer") == 1);
    CHECK(code_decision(nego, "RejectOffer") == 0);
    CHECK(code_decision(nego, "DealWithJohn") == 0);
}

TEST_CASE("validate accepts well-formed points and names the bad field") {
    DecisionPoint ok = make_bargaining_dp();
    CHECK_NOTHROW(validate(ok));

    DecisionPoint no_id = ok;
    no_id.id.clear();
    CHECK_THROWS_AS(validate(no_id), SchemaError);

    DecisionPoint bad_affirm = ok;
    bad_affirm.affirmative_label = "agree";
    CHECK_THROWS_WITH_AS(validate(bad_affirm),
                         doctest::Contains("affirmative_label"), SchemaError);

    DecisionPoint bad_round = ok;
    bad_round.round_index = 0;
    CHECK_THROWS_WITH_AS(validate(bad_round), doctest::Contains("round_index"), SchemaError);

    DecisionPoint wrong_config = ok;
    wrong_config.family = GameFamily::lottery;
    CHECK_THROWS_AS(validate(wrong_config), SchemaError);

    DecisionPoint lot = make_lottery_dp();
    CHECK_NOTHROW(validate(lot));

    DecisionPoint no_rate = lot;
    no_rate.aggregate_choice_rate.reset();
    CHECK_THROWS_WITH_AS(validate(no_rate),
                         doctest::Contains("aggregate_choice_rate"), SchemaError);

    DecisionPoint bad_rate = lot;
    bad_rate.aggregate_choice_rate = 1.5;
    CHECK_THROWS_AS(validate(bad_rate), SchemaError);

    DecisionPoint stray_rate = ok;
    stray_rate.aggregate_choice_rate = 0.5;
    CHECK_THROWS_AS(validate(stray_rate), SchemaError);
}

TEST_CASE("decision points round-trip through JSON field-for-field") {
    for (const DecisionPoint& dp : {make_bargaining_dp(), make_lottery_dp()}) {
        json j = to_json(dp);
        DecisionPoint back = decision_point_from_json(j);
        CHECK(to_json(back) == j);
    }
}

TEST_CASE("matrix games round-trip through JSON") {
    MatrixGame2x2 g;
    g.row_payoffs = {{{3.5, 0.25}, {5.0, 1.0}}};
    g.col_payoffs = {{{3.5, 5.0}, {0.25, 1.0}}};
    g.topology = Topology::chicken;
    g.counterbalanced = true;
    MatrixGame2x2 back = matrix_game_from_json(to_json(g));
    CHECK(back.row_payoffs == g.row_payoffs);
    CHECK(back.col_payoffs == g.col_payoffs);
    CHECK(back.topology == g.topology);
    CHECK(back.counterbalanced == g.counterbalanced);
}

TEST_CASE("topology names round-trip") {
    for (const char* name : {"harmony", "concord", "peace", "safecoord", "assurance", "dilemma",
                             "deadlock", "chicken", "staghunt", "hero", "leader", "compromise"})
        CHECK(topology_name(parse_topology(name)) == std::string(name));
    CHECK_THROWS_AS((void)parse_topology("tictactoe"), SchemaError);
}

TEST_CASE("datasets round-trip with manifests") {
    fs::path dir = fresh_dir("dataset");
    std::vector<DecisionPoint> dps = {make_bargaining_dp("b-1"), make_bargaining_dp("b-2")};
    std::string path = (dir / "barg.jsonl").string();
    save_dataset(path, dps);

    std::vector<DecisionPoint> back = load_dataset(path, GameFamily::bargaining);
    REQUIRE(back.size() == 2);
    CHECK(back[0].id == "b-1");
    CHECK(back[1].id == "b-2");
    CHECK(to_json(back[0]) == to_json(dps[0]));

    std::string mpath = manifest_path_for(path);
    CHECK(mpath == (dir / "barg.manifest.json").string());
    DatasetManifest m;
    m.family = GameFamily::bargaining;
    m.count = 2;
    save_manifest(mpath, m);
    DatasetManifest mb = load_manifest(mpath);
    CHECK(mb.family == GameFamily::bargaining);
    CHECK(mb.count == 2);

    CHECK_THROWS_AS((void)load_dataset(path, GameFamily::lottery), SchemaError);
}

TEST_CASE("malformed dataset lines raise parse errors naming the line") {
    fs::path dir = fresh_dir("malformed");
    std::string path = (dir / "bad.jsonl").string();
    {
        std::ofstream out(path);
        out << to_json(make_bargaining_dp()).dump() << "\n";
        out << "{not json}\n";
    }
    try {
        (void)load_dataset(path, GameFamily::bargaining);
        FAIL("expected ParseError");
    } catch (const ParseError& e) {
        CHECK(e.line == 2);
    }
}

TEST_CASE("pair registry round-trips") {
    fs::path dir = fresh_dir("registry");
    std::vector<PairSpec> pairs = {
        {1, "base-7b", "chat-7b", "lab", 7.0},
        {2, "base-1b", "chat-1b", "lab", 1.3},
    };
    std::string path = (dir / "pairs.json").string();
    save_pair_registry(path, pairs);
    std::vector<PairSpec> back = load_pair_registry(path);
    REQUIRE(back.size() == 2);
    CHECK(back[0].pair_id == 1);
    CHECK(back[0].base_model_id == "base-7b");
    CHECK(back[1].param_count_b == doctest::Approx(1.3));
}
