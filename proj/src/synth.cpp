#include "gamepred/synth.hpp"

#include <fmt/format.h>

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <set>

#include "gamepred/errors.hpp"
#include "gamepred/pipeline.hpp"
#include "gamepred/provider.hpp"
#include "gamepred/stats.hpp"
#include "gamepred/util.hpp"

namespace gamepred::synth {

namespace {

namespace fs = std::filesystem;

double unit(stats::SplitMix64& g) { return static_cast<double>(g.next() >> 11) * 0x1.0p-53; }

double uniform(stats::SplitMix64& g, double lo, double hi) { return lo + (hi - lo) * unit(g); }

// Saturating mixture: half the context values sit low, half high, so the
// logistic response is mostly decisive and binary human draws stay tightly
// correlated with it.
double band_x(stats::SplitMix64& g, std::size_t i) {
    return (i % 2 == 0) ? uniform(g, 0.03, 0.25) : uniform(g, 0.75, 0.97);
}

double round2(double v) { return std::round(v * 100.0) / 100.0; }

bool bernoulli(stats::SplitMix64& g, double p) { return unit(g) < p; }

Money dollars(std::int64_t whole) { return Money{whole * 100, "USD"}; }

constexpr std::uint64_t kStreamBargaining = 1;
constexpr std::uint64_t kStreamPersuasion = 2;
constexpr std::uint64_t kStreamNegotiation = 3;
constexpr std::uint64_t kStreamMatrixRepeated = 4;
constexpr std::uint64_t kStreamMatrixOneshot = 5;
constexpr std::uint64_t kStreamLottery = 6;

std::vector<DecisionPoint> make_bargaining(const CorpusSpec& spec) {
    auto g = stats::SplitMix64::substream(spec.seed, kStreamBargaining);
    const std::vector<Money> stakes = {dollars(100), dollars(10'000), dollars(1'000'000)};
    const std::vector<double> deltas = {0.8, 0.9, 0.95, 1.0};
    std::vector<DecisionPoint> out;
    for (std::size_t i = 0; i < spec.bargaining; ++i) {
        DecisionPoint dp;
        dp.id = fmt::format("barg-{:04}", i + 1);
        dp.family = GameFamily::bargaining;
        BargainingConfig cfg;
        cfg.stakes = stakes[g.next_below(stakes.size())];
        cfg.information = bernoulli(g, 0.5) ? InformationStructure::complete
                                            : InformationStructure::incomplete;
        cfg.messages_allowed = bernoulli(g, 0.5);
        cfg.delta1 = deltas[g.next_below(deltas.size())];
        cfg.delta2 = deltas[g.next_below(deltas.size())];
        if (bernoulli(g, 0.5)) cfg.max_rounds = 12;
        dp.config = cfg;
        dp.round_index = 1 + static_cast<int>(i % 4);
        dp.role = "responder";
        double x = band_x(g, i);
        for (int r = 1; r < dp.round_index; ++r) {
            double prev = std::clamp(x + uniform(g, -0.1, 0.1), 0.02, 0.98);
            dp.history.push_back(Turn{"Alice", "I propose a split of the pot.",
                                      json{{"offer_frac", round2(prev)}}});
            dp.history.push_back(Turn{"Bob", "I reject that split.", json::object()});
        }
        dp.history.push_back(
            Turn{"Alice", "Here is my offer for this round.", json{{"offer_frac", round2(x)}}});
        dp.decision_labels = {"accept", "reject"};
        dp.affirmative_label = "accept";
        double p = behavior::dialogue_p_affirm(round2(x));
        dp.human_choice = bernoulli(g, p) ? "accept" : "reject";
        out.push_back(std::move(dp));
    }
    return out;
}

std::vector<DecisionPoint> make_persuasion(const CorpusSpec& spec) {
    auto g = stats::SplitMix64::substream(spec.seed, kStreamPersuasion);
    const std::vector<double> ps = {0.33, 0.5, 0.8};
    const std::vector<double> vs = {1.2, 1.25, 2.0, 3.0, 4.0};
    const std::vector<Money> prices = {dollars(100), dollars(10'000)};
    std::vector<DecisionPoint> out;
    for (std::size_t i = 0; i < spec.persuasion; ++i) {
        DecisionPoint dp;
        dp.id = fmt::format("pers-{:04}", i + 1);
        dp.family = GameFamily::persuasion;
        PersuasionConfig cfg;
        cfg.quality_prob_p = ps[g.next_below(ps.size())];
        cfg.value_v = vs[g.next_below(vs.size())];
        cfg.seller_knows_quality = bernoulli(g, 0.5);
        cfg.buyer_myopic = bernoulli(g, 0.5);
        cfg.message_type = bernoulli(g, 0.5) ? MessageType::text : MessageType::binary;
        cfg.price = prices[g.next_below(prices.size())];
        dp.config = cfg;
        dp.round_index = 1 + static_cast<int>(i % 10);
        dp.role = "buyer";
        double x = band_x(g, i);
        dp.history.push_back(Turn{"Seller", "This round's product is worth buying.",
                                  json{{"track_record", round2(x)}}});
        dp.decision_labels = {"buy", "pass"};
        dp.affirmative_label = "buy";
        double p = behavior::dialogue_p_affirm(round2(x));
        dp.human_choice = bernoulli(g, p) ? "buy" : "pass";
        out.push_back(std::move(dp));
    }
    return out;
}

std::vector<DecisionPoint> make_negotiation(const CorpusSpec& spec) {
    auto g = stats::SplitMix64::substream(spec.seed, kStreamNegotiation);
    const std::vector<Money> prices = {dollars(10'000), dollars(1'000'000)};
    const std::vector<double> mults = {0.8, 1.0, 1.2, 1.5};
    std::vector<DecisionPoint> out;
    for (std::size_t i = 0; i < spec.negotiation; ++i) {
        DecisionPoint dp;
        dp.id = fmt::format("nego-{:04}", i + 1);
        dp.family = GameFamily::negotiation;
        NegotiationConfig cfg;
        cfg.price = prices[g.next_below(prices.size())];
        cfg.information = bernoulli(g, 0.5) ? InformationStructure::complete
                                            : InformationStructure::incomplete;
        cfg.messages_allowed = bernoulli(g, 0.5);
        cfg.max_rounds = bernoulli(g, 0.5) ? 10 : 30;
        cfg.buyer_value_mult = mults[g.next_below(mults.size())];
        cfg.seller_value_mult = mults[g.next_below(mults.size())];
        dp.config = cfg;
        dp.round_index = 1 + static_cast<int>(i % 5);
        dp.role = "buyer";
        double x = band_x(g, i);
        for (int r = 1; r < dp.round_index; ++r) {
            double prev = std::clamp(x + uniform(g, -0.1, 0.1), 0.02, 0.98);
            dp.history.push_back(Turn{"Seller", "I can come down a little.",
                                      json{{"discount_frac", round2(prev)}}});
            dp.history.push_back(Turn{"Buyer", "That is still too high.", json::object()});
        }
        dp.history.push_back(Turn{"Seller", "This is my best price.",
                                  json{{"discount_frac", round2(x)}}});
        dp.decision_labels = {"AcceptOffer", "RejectOffer", "DealWithJohn"};
        dp.affirmative_label = "AcceptOffer";
        double p = behavior::dialogue_p_affirm(round2(x));
        if (bernoulli(g, p))
            dp.human_choice = "AcceptOffer";
        else
            dp.human_choice = bernoulli(g, 0.7) ? "RejectOffer" : "DealWithJohn";
        out.push_back(std::move(dp));
    }
    return out;
}

MatrixGame2x2 prisoners_dilemma() {
    MatrixGame2x2 game;
    game.row_payoffs = {{{3, 0}, {5, 1}}};
    game.col_payoffs = {{{3, 5}, {0, 1}}};
    game.topology = Topology::dilemma;
    return game;
}

MatrixGame2x2 battle_coordination() {
    MatrixGame2x2 game;
    game.row_payoffs = {{{3, 0}, {0, 2}}};
    game.col_payoffs = {{{2, 0}, {0, 3}}};
    game.topology = Topology::leader;
    return game;
}

double mean_payoff(const MatrixGame2x2& g, int action) {
    return (g.row_payoffs[action][0] + g.row_payoffs[action][1]) / 2.0;
}

std::vector<DecisionPoint> make_matrix_repeated(const CorpusSpec& spec) {
    auto g = stats::SplitMix64::substream(spec.seed, kStreamMatrixRepeated);
    std::vector<DecisionPoint> out;
    for (std::size_t i = 0; i < spec.matrix_repeated; ++i) {
        DecisionPoint dp;
        dp.id = fmt::format("matr-{:04}", i + 1);
        dp.family = GameFamily::matrix_repeated;
        bool pd = i % 2 == 0;
        MatrixGameConfig cfg;
        cfg.game = pd ? prisoners_dilemma() : battle_coordination();
        cfg.game_name = pd ? "pd" : "bos";
        dp.config = cfg;
        dp.round_index = 1 + static_cast<int>((i / 2) % 10);
        dp.role = "row player";
        dp.decision_labels = pd ? std::vector<std::string>{"cooperate", "defect"}
                                : std::vector<std::string>{"bach", "stravinsky"};
        dp.affirmative_label = dp.decision_labels[0];
        double p;
        if (dp.round_index == 1) {
            p = behavior::matrix_p_first(mean_payoff(cfg.game, 0), mean_payoff(cfg.game, 1));
        } else {
            double x = band_x(g, i);
            for (int r = 1; r < dp.round_index; ++r) {
                double prev = std::clamp(x + uniform(g, -0.08, 0.08), 0.02, 0.98);
                dp.history.push_back(Turn{"Opponent", "", json{{"coop_rate", round2(prev)}}});
            }
            dp.history.back().action["coop_rate"] = round2(x);
            p = behavior::dialogue_p_affirm(round2(x));
        }
        dp.human_choice = bernoulli(g, p) ? dp.decision_labels[0] : dp.decision_labels[1];
        out.push_back(std::move(dp));
    }
    return out;
}

struct TopologyBase {
    Topology topology;
    std::array<std::array<double, 2>, 2> row;
    std::array<std::array<double, 2>, 2> col;
};

// Twelve strict ordinal 2x2 payoff structures; rank values 4 > 3 > 2 > 1.
const std::vector<TopologyBase>& topology_bases() {
    static const std::vector<TopologyBase> bases = {
        {Topology::harmony, {{{4, 3}, {2, 1}}}, {{{4, 2}, {3, 1}}}},
        {Topology::concord, {{{4, 3}, {1, 2}}}, {{{4, 1}, {3, 2}}}},
        {Topology::peace, {{{4, 2}, {3, 1}}}, {{{4, 3}, {2, 1}}}},
        {Topology::safecoord, {{{4, 2}, {1, 3}}}, {{{4, 1}, {2, 3}}}},
        {Topology::assurance, {{{4, 1}, {2, 3}}}, {{{4, 2}, {1, 3}}}},
        {Topology::dilemma, {{{3, 1}, {4, 2}}}, {{{3, 4}, {1, 2}}}},
        {Topology::deadlock, {{{2, 1}, {4, 3}}}, {{{2, 4}, {1, 3}}}},
        {Topology::chicken, {{{3, 2}, {4, 1}}}, {{{3, 4}, {2, 1}}}},
        {Topology::staghunt, {{{4, 1}, {3, 2}}}, {{{4, 3}, {1, 2}}}},
        {Topology::hero, {{{2, 4}, {3, 1}}}, {{{2, 3}, {4, 1}}}},
        {Topology::leader, {{{2, 3}, {4, 1}}}, {{{2, 4}, {3, 1}}}},
        {Topology::compromise, {{{1, 4}, {3, 2}}}, {{{1, 3}, {4, 2}}}},
    };
    return bases;
}

std::vector<DecisionPoint> make_matrix_oneshot(const CorpusSpec& spec) {
    auto g = stats::SplitMix64::substream(spec.seed, kStreamMatrixOneshot);
    const auto& bases = topology_bases();
    std::size_t per_topology = spec.matrix_oneshot / bases.size();
    std::vector<DecisionPoint> out;
    std::size_t serial = 0;
    for (std::size_t v = 0; v < per_topology; ++v) {
        double scale = 0.6 + 0.2 * static_cast<double>(v);
        for (const TopologyBase& base : bases) {
            DecisionPoint dp;
            dp.id = fmt::format("mone-{:04}", ++serial);
            dp.family = GameFamily::matrix_oneshot;
            MatrixGame2x2 game;
            game.topology = base.topology;
            game.counterbalanced = v % 2 == 1;
            for (int i = 0; i < 2; ++i)
                for (int j = 0; j < 2; ++j) {
                    int si = game.counterbalanced ? 1 - i : i;
                    int sj = game.counterbalanced ? 1 - j : j;
                    // Small per-cell jitter: under half the minimum rank gap,
                    // so every strict inequality (and non-degeneracy) survives.
                    game.row_payoffs[i][j] =
                        round2(scale * base.row[si][sj] + uniform(g, -0.2, 0.2));
                    game.col_payoffs[i][j] =
                        round2(scale * base.col[si][sj] + uniform(g, -0.2, 0.2));
                }
            MatrixGameConfig cfg;
            cfg.game = game;
            dp.config = cfg;
            dp.role = "row player";
            dp.decision_labels = {"A", "B"};
            dp.affirmative_label = "A";
            double p = behavior::matrix_p_first(
                (game.row_payoffs[0][0] + game.row_payoffs[0][1]) / 2.0,
                (game.row_payoffs[1][0] + game.row_payoffs[1][1]) / 2.0);
            double rate = std::clamp(p + uniform(g, -0.06, 0.06), 0.01, 0.99);
            dp.aggregate_choice_rate = round2(rate);
            dp.n_participants = 28 + static_cast<int>(g.next_below(4));
            dp.human_choice = rate >= 0.5 ? "A" : "B";
            out.push_back(std::move(dp));
        }
    }
    return out;
}

std::vector<DecisionPoint> make_lottery(const CorpusSpec& spec) {
    auto g = stats::SplitMix64::substream(spec.seed, kStreamLottery);
    std::vector<DecisionPoint> out;
    for (std::size_t i = 0; i < spec.lottery; ++i) {
        DecisionPoint dp;
        dp.id = fmt::format("lott-{:04}", i + 1);
        dp.family = GameFamily::lottery;
        LotteryConfig cfg;
        std::int64_t a1 = 5 + static_cast<std::int64_t>(g.next_below(40)) * 5;
        std::int64_t a2 = 5 + static_cast<std::int64_t>(g.next_below(40)) * 5;
        double pa = 0.05 * static_cast<double>(1 + g.next_below(19));
        cfg.option_a = {{dollars(a1), round2(pa)}, {dollars(a2), round2(1.0 - pa)}};
        double ev_a = static_cast<double>(a1) * pa + static_cast<double>(a2) * (1.0 - pa);
        // Keep the expected values clearly separated so the response curve
        // spans both tails rather than pooling at indifference.
        double f = (i % 2 == 0) ? uniform(g, 0.5, 0.9) : uniform(g, 1.1, 2.0);
        double ev_b = f * ev_a;
        double pb = 0.05 * static_cast<double>(1 + g.next_below(19));
        std::int64_t b1 = std::max<std::int64_t>(1, std::llround(ev_b * 0.5));
        double b2 = (ev_b - static_cast<double>(b1) * pb) / (1.0 - pb);
        Money b2_money{std::llround(b2 * 100.0), "USD"};
        cfg.option_b = {{dollars(b1), round2(pb)}, {b2_money, round2(1.0 - pb)}};
        dp.config = cfg;
        dp.role = "decision maker";
        dp.decision_labels = {"A", "B"};
        dp.affirmative_label = "A";
        double ev_b_actual = static_cast<double>(b1) * round2(pb) +
                             (static_cast<double>(b2_money.minor_units) / 100.0) *
                                 round2(1.0 - pb);
        double p = behavior::lottery_p_a(ev_a, ev_b_actual);
        double rate = std::clamp(p + uniform(g, -0.06, 0.06), 0.01, 0.99);
        dp.aggregate_choice_rate = round2(rate);
        dp.n_participants = 28 + static_cast<int>(g.next_below(4));
        dp.human_choice = rate >= 0.5 ? "A" : "B";
        out.push_back(std::move(dp));
    }
    return out;
}

} // namespace

std::vector<DecisionPoint> make_family(GameFamily family, const CorpusSpec& spec) {
    std::vector<DecisionPoint> out;
    switch (family) {
    case GameFamily::bargaining: out = make_bargaining(spec); break;
    case GameFamily::persuasion: out = make_persuasion(spec); break;
    case GameFamily::negotiation: out = make_negotiation(spec); break;
    case GameFamily::matrix_repeated: out = make_matrix_repeated(spec); break;
    case GameFamily::matrix_oneshot: out = make_matrix_oneshot(spec); break;
    case GameFamily::lottery: out = make_lottery(spec); break;
    }
    for (const DecisionPoint& dp : out) validate(dp);
    return out;
}

std::map<GameFamily, std::vector<DecisionPoint>> make_corpus(const CorpusSpec& spec) {
    std::map<GameFamily, std::vector<DecisionPoint>> corpus;
    for (GameFamily family : kAllFamilies) corpus[family] = make_family(family, spec);
    return corpus;
}

std::vector<PairSpec> make_pair_registry() {
    return {
        {1, "behavioral-base-7b", "noise-chat-7b", "mocklab", 7.0},
        {2, "behavioral-base-1b", "noise-chat-1b", "mocklab", 1.3},
        {3, "behavioral-base-30b", "noise-chat-30b", "mocklab", 30.0},
        {4, "noise-base-7b", "behavioral-chat-7b", "mocklab", 7.0},
        {5, "behavioral-base-13b", "lowmass-chat-13b", "mocklab", 13.0},
        {6, "noise-base-3b", "noise-chat-3b", "mocklab", 3.0},
    };
}

ChatTemplateSpec make_chat_template() {
    ChatTemplateSpec spec;
    spec.system_open = "<|system|>\n";
    spec.system_close = "\n<|end|>";
    spec.user_open = "<|user|>\n";
    spec.user_close = "\n<|end|>";
    spec.assistant_open = "<|assistant|>\n";
    spec.turn_separator = "\n";
    spec.generation_prefix = "";
    return spec;
}

std::string write_workspace(const CorpusSpec& spec, const std::string& dir) {
    ensure_directory(dir);
    ensure_directory((fs::path(dir) / "data").string());
    ensure_directory((fs::path(dir) / "templates").string());

    RunConfig cfg;
    cfg.seed = spec.seed;
    for (GameFamily family : kAllFamilies) {
        auto dps = make_family(family, spec);
        std::string rel = fmt::format("data/{}.jsonl", family_name(family));
        std::string path = (fs::path(dir) / rel).string();
        save_dataset(path, dps);
        save_manifest(manifest_path_for(path),
                      DatasetManifest{family, dps.size(), 1});
        cfg.datasets[family] = rel;
    }

    auto pairs = make_pair_registry();
    save_pair_registry((fs::path(dir) / "pairs.json").string(), pairs);
    cfg.pair_registry = "pairs.json";

    std::set<std::string> aligned_ids;
    for (const PairSpec& pair : pairs) aligned_ids.insert(pair.aligned_model_id);
    for (const std::string& id : aligned_ids)
        save_chat_template(chat_template_path((fs::path(dir) / "templates").string(), id),
                           make_chat_template());
    cfg.template_dir = "templates";

    cfg.provider = "mock";
    cfg.variants = {"standard", "observer"};
    cfg.output_dir = "out";
    cfg.concurrency = 4;

    std::string config_path = (fs::path(dir) / "run.json").string();
    write_text_file_atomic(config_path, cfg.to_json().dump(2) + "\n");
    return config_path;
}

} // namespace gamepred::synth
