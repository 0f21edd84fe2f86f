#include "gamepred/game_model.hpp"

#include <fmt/format.h>

#include <cmath>
#include <fstream>
#include <set>
#include <sstream>

namespace gamepred {

namespace {

void require(bool ok, const std::string& msg) {
    if (!ok) throw SchemaError(msg);
}

// Field accessors that name the offending field on failure.
const json& member(const json& j, const char* key) {
    auto it = j.find(key);
    if (it == j.end()) throw SchemaError(fmt::format("field '{}': missing", key));
    return *it;
}

template <typename T>
T field(const json& j, const char* key) {
    try {
        return member(j, key).get<T>();
    } catch (const json::exception&) {
        throw SchemaError(fmt::format("field '{}': wrong type", key));
    }
}

template <typename T>
T field_or(const json& j, const char* key, T fallback) {
    auto it = j.find(key);
    if (it == j.end() || it->is_null()) return fallback;
    try {
        return it->get<T>();
    } catch (const json::exception&) {
        throw SchemaError(fmt::format("field '{}': wrong type", key));
    }
}

// Consumes the known keys of a config object and returns the remainder.
json leftover_extras(json obj, std::initializer_list<const char*> known) {
    for (const char* k : known) obj.erase(k);
    return obj;
}

} // namespace

// ---------------------------------------------------------------------------
// Enums

const char* family_name(GameFamily f) {
    switch (f) {
    case GameFamily::bargaining: return "bargaining";
    case GameFamily::persuasion: return "persuasion";
    case GameFamily::negotiation: return "negotiation";
    case GameFamily::matrix_repeated: return "matrix_repeated";
    case GameFamily::matrix_oneshot: return "matrix_oneshot";
    case GameFamily::lottery: return "lottery";
    }
    throw Error("unreachable family tag");
}

GameFamily parse_family(const std::string& name) {
    for (GameFamily f : kAllFamilies)
        if (name == family_name(f)) return f;
    throw SchemaError(fmt::format("field 'family': unknown value '{}'", name));
}

int label_arity(GameFamily f) { return f == GameFamily::negotiation ? 3 : 2; }

bool is_aggregate_level(GameFamily f) {
    return f == GameFamily::matrix_oneshot || f == GameFamily::lottery;
}

const char* topology_name(Topology t) {
    switch (t) {
    case Topology::harmony: return "harmony";
    case Topology::concord: return "concord";
    case Topology::peace: return "peace";
    case Topology::safecoord: return "safecoord";
    case Topology::assurance: return "assurance";
    case Topology::dilemma: return "dilemma";
    case Topology::deadlock: return "deadlock";
    case Topology::chicken: return "chicken";
    case Topology::staghunt: return "staghunt";
    case Topology::hero: return "hero";
    case Topology::leader: return "leader";
    case Topology::compromise: return "compromise";
    }
    throw Error("unreachable topology tag");
}

Topology parse_topology(const std::string& name) {
    for (int i = 0; i <= static_cast<int>(Topology::compromise); ++i) {
        auto t = static_cast<Topology>(i);
        if (name == topology_name(t)) return t;
    }
    throw SchemaError(fmt::format("field 'topology': unknown value '{}'", name));
}

// ---------------------------------------------------------------------------
// Money formatting

std::string money_text(const Money& m) {
    std::int64_t units = m.minor_units / 100;
    std::int64_t cents = m.minor_units % 100;
    bool negative = m.minor_units < 0;
    units = std::llabs(units);
    cents = std::llabs(cents);

    std::string digits = fmt::format("{}", units);
    std::string grouped;
    grouped.reserve(digits.size() + digits.size() / 3);
    for (std::size_t i = 0; i < digits.size(); ++i) {
        if (i > 0 && (digits.size() - i) % 3 == 0) grouped.push_back(',');
        grouped.push_back(digits[i]);
    }
    std::string out = negative ? "-$" : "$";
    out += grouped;
    if (cents != 0) out += fmt::format(".{:02}", cents);
    return out;
}

std::string money_bucket_label(const Money& m) {
    std::int64_t units = m.minor_units / 100;
    if (units > 0 && m.minor_units % 100 == 0) {
        if (units % 1'000'000 == 0) return fmt::format("${}M", units / 1'000'000);
        if (units % 1'000 == 0) return fmt::format("${}K", units / 1'000);
    }
    return money_text(m);
}

// ---------------------------------------------------------------------------
// Decision coding & validation

int code_decision(const DecisionPoint& dp, const std::string& label) {
    bool known = false;
    for (const auto& l : dp.decision_labels)
        if (l == label) { known = true; break; }
    if (!known)
        throw SchemaError(fmt::format("decision point '{}': label '{}' not in decision set", dp.id, label));
    return label == dp.affirmative_label ? 1 : 0;
}

namespace {

void validate_money_positive(const Money& m, const char* what) {
    require(m.minor_units > 0, fmt::format("field '{}': must be positive", what));
}

struct ConfigValidator {
    void operator()(const BargainingConfig& c) const {
        validate_money_positive(c.stakes, "stakes");
        require(c.delta1 > 0.0 && c.delta1 <= 1.0, "field 'delta1': outside (0,1]");
        require(c.delta2 > 0.0 && c.delta2 <= 1.0, "field 'delta2': outside (0,1]");
        if (c.max_rounds) require(*c.max_rounds >= 1, "field 'max_rounds': must be positive");
    }
    void operator()(const PersuasionConfig& c) const {
        require(c.quality_prob_p > 0.0 && c.quality_prob_p < 1.0, "field 'quality_prob_p': outside (0,1)");
        require(c.value_v > 1.0, "field 'value_v': must exceed 1");
        validate_money_positive(c.price, "price");
    }
    void operator()(const NegotiationConfig& c) const {
        validate_money_positive(c.price, "price");
        require(c.max_rounds >= 1, "field 'max_rounds': must be positive");
        require(c.buyer_value_mult > 0.0, "field 'buyer_value_mult': must be positive");
        require(c.seller_value_mult > 0.0, "field 'seller_value_mult': must be positive");
    }
    void operator()(const MatrixGameConfig& c) const {
        for (int i = 0; i < 2; ++i)
            for (int j = 0; j < 2; ++j) {
                require(std::isfinite(c.game.row_payoffs[i][j]), "field 'row_payoffs': non-finite entry");
                require(std::isfinite(c.game.col_payoffs[i][j]), "field 'col_payoffs': non-finite entry");
            }
    }
    void operator()(const LotteryConfig& c) const {
        auto check_option = [](const std::vector<LotteryConfig::Outcome>& opt, const char* name) {
            require(!opt.empty(), fmt::format("field '{}': empty outcome list", name));
            double total = 0.0;
            for (const auto& [payout, prob] : opt) {
                require(prob >= 0.0 && prob <= 1.0, fmt::format("field '{}': probability outside [0,1]", name));
                total += prob;
            }
            require(std::fabs(total - 1.0) <= 1e-9,
                    fmt::format("field '{}': probabilities sum to {} (expected 1)", name, total));
        };
        check_option(c.option_a, "option_a");
        check_option(c.option_b, "option_b");
    }
};

bool config_matches_family(const GameConfig& config, GameFamily family) {
    switch (family) {
    case GameFamily::bargaining: return std::holds_alternative<BargainingConfig>(config);
    case GameFamily::persuasion: return std::holds_alternative<PersuasionConfig>(config);
    case GameFamily::negotiation: return std::holds_alternative<NegotiationConfig>(config);
    case GameFamily::matrix_repeated:
    case GameFamily::matrix_oneshot: return std::holds_alternative<MatrixGameConfig>(config);
    case GameFamily::lottery: return std::holds_alternative<LotteryConfig>(config);
    }
    return false;
}

} // namespace

void validate(const DecisionPoint& dp) {
    auto ctx = [&](const std::string& msg) {
        return SchemaError(fmt::format("decision point '{}': {}", dp.id.empty() ? "<unnamed>" : dp.id, msg));
    };
    try {
        require(!dp.id.empty(), "field 'id': empty");
        require(config_matches_family(dp.config, dp.family),
                fmt::format("field 'config': does not match family '{}'", family_name(dp.family)));
        require(dp.round_index >= 1, "field 'round_index': must be >= 1");
        if (dp.family == GameFamily::matrix_repeated)
            require(dp.round_index <= 10, "field 'round_index': repeated matrix rounds run 1..10");

        require(static_cast<int>(dp.decision_labels.size()) == label_arity(dp.family),
                fmt::format("field 'decision_labels': expected {} labels, got {}",
                            label_arity(dp.family), dp.decision_labels.size()));
        std::set<std::string> seen;
        for (const auto& l : dp.decision_labels) {
            require(!l.empty(), "field 'decision_labels': empty label");
            require(seen.insert(l).second, fmt::format("field 'decision_labels': duplicate label '{}'", l));
        }
        require(seen.count(dp.affirmative_label) == 1,
                fmt::format("field 'affirmative_label': '{}' not in decision set", dp.affirmative_label));
        require(seen.count(dp.human_choice) == 1,
                fmt::format("field 'human_choice': '{}' not in decision set", dp.human_choice));

        if (is_aggregate_level(dp.family)) {
            require(dp.aggregate_choice_rate.has_value(),
                    "field 'aggregate_choice_rate': required for aggregate-level families");
            require(*dp.aggregate_choice_rate >= 0.0 && *dp.aggregate_choice_rate <= 1.0,
                    "field 'aggregate_choice_rate': outside [0,1]");
            require(dp.n_participants.has_value() && *dp.n_participants >= 1,
                    "field 'n_participants': must be >= 1 for aggregate-level families");
        } else {
            require(!dp.aggregate_choice_rate.has_value(),
                    "field 'aggregate_choice_rate': only allowed for aggregate-level families");
        }

        for (std::size_t i = 0; i < dp.history.size(); ++i) {
            const Turn& t = dp.history[i];
            require(!t.speaker.empty(), fmt::format("field 'history[{}].speaker': empty", i));
            require(!t.text.empty() || (t.action.is_object() && !t.action.empty()),
                    fmt::format("field 'history[{}]': needs text or a structured action", i));
        }

        std::visit(ConfigValidator{}, dp.config);
    } catch (const SchemaError& e) {
        throw ctx(e.what());
    }
}

// ---------------------------------------------------------------------------
// JSON serialization

namespace {

json to_json(const Money& m) {
    return json{{"minor_units", m.minor_units}, {"currency", m.currency}};
}

Money money_from_json(const json& j) {
    if (!j.is_object()) throw SchemaError("money value: expected object");
    Money m;
    m.minor_units = field<std::int64_t>(j, "minor_units");
    m.currency = field_or<std::string>(j, "currency", "USD");
    return m;
}

const char* information_name(InformationStructure s) {
    return s == InformationStructure::complete ? "complete" : "incomplete";
}

InformationStructure information_from(const std::string& s) {
    if (s == "complete") return InformationStructure::complete;
    if (s == "incomplete") return InformationStructure::incomplete;
    throw SchemaError(fmt::format("field 'information': unknown value '{}'", s));
}

struct ConfigSerializer {
    json operator()(const BargainingConfig& c) const {
        json j = c.extras;
        j["stakes"] = to_json(c.stakes);
        j["information"] = information_name(c.information);
        j["messages_allowed"] = c.messages_allowed;
        j["delta1"] = c.delta1;
        j["delta2"] = c.delta2;
        j["max_rounds"] = c.max_rounds ? json(*c.max_rounds) : json(nullptr);
        return j;
    }
    json operator()(const PersuasionConfig& c) const {
        json j = c.extras;
        j["quality_prob_p"] = c.quality_prob_p;
        j["value_v"] = c.value_v;
        j["seller_knows_quality"] = c.seller_knows_quality;
        j["buyer_myopic"] = c.buyer_myopic;
        j["message_type"] = c.message_type == MessageType::text ? "text" : "binary";
        j["price"] = to_json(c.price);
        return j;
    }
    json operator()(const NegotiationConfig& c) const {
        json j = c.extras;
        j["price"] = to_json(c.price);
        j["information"] = information_name(c.information);
        j["messages_allowed"] = c.messages_allowed;
        j["max_rounds"] = c.max_rounds;
        j["buyer_value_mult"] = c.buyer_value_mult;
        j["seller_value_mult"] = c.seller_value_mult;
        return j;
    }
    json operator()(const MatrixGameConfig& c) const {
        json j = c.extras;
        j["game"] = to_json(c.game);
        j["game_name"] = c.game_name;
        return j;
    }
    json operator()(const LotteryConfig& c) const {
        auto option = [](const std::vector<LotteryConfig::Outcome>& opt) {
            json arr = json::array();
            for (const auto& [payout, prob] : opt)
                arr.push_back(json{{"payout", to_json(payout)}, {"prob", prob}});
            return arr;
        };
        json j = c.extras;
        j["option_a"] = option(c.option_a);
        j["option_b"] = option(c.option_b);
        return j;
    }
};

GameConfig config_from_json(const json& j, GameFamily family) {
    if (!j.is_object()) throw SchemaError("field 'config': expected object");
    switch (family) {
    case GameFamily::bargaining: {
        BargainingConfig c;
        c.stakes = money_from_json(member(j, "stakes"));
        c.information = information_from(field_or<std::string>(j, "information", "complete"));
        c.messages_allowed = field_or<bool>(j, "messages_allowed", false);
        c.delta1 = field_or<double>(j, "delta1", 1.0);
        c.delta2 = field_or<double>(j, "delta2", 1.0);
        if (j.contains("max_rounds") && !j["max_rounds"].is_null())
            c.max_rounds = field<int>(j, "max_rounds");
        c.extras = leftover_extras(j, {"stakes", "information", "messages_allowed", "delta1", "delta2", "max_rounds"});
        return c;
    }
    case GameFamily::persuasion: {
        PersuasionConfig c;
        c.quality_prob_p = field<double>(j, "quality_prob_p");
        c.value_v = field<double>(j, "value_v");
        c.seller_knows_quality = field_or<bool>(j, "seller_knows_quality", true);
        c.buyer_myopic = field_or<bool>(j, "buyer_myopic", false);
        std::string mt = field_or<std::string>(j, "message_type", "text");
        if (mt != "text" && mt != "binary")
            throw SchemaError(fmt::format("field 'message_type': unknown value '{}'", mt));
        c.message_type = mt == "text" ? MessageType::text : MessageType::binary;
        c.price = money_from_json(member(j, "price"));
        c.extras = leftover_extras(j, {"quality_prob_p", "value_v", "seller_knows_quality", "buyer_myopic",
                                       "message_type", "price"});
        return c;
    }
    case GameFamily::negotiation: {
        NegotiationConfig c;
        c.price = money_from_json(member(j, "price"));
        c.information = information_from(field_or<std::string>(j, "information", "complete"));
        c.messages_allowed = field_or<bool>(j, "messages_allowed", false);
        c.max_rounds = field_or<int>(j, "max_rounds", 10);
        c.buyer_value_mult = field_or<double>(j, "buyer_value_mult", 1.0);
        c.seller_value_mult = field_or<double>(j, "seller_value_mult", 1.0);
        c.extras = leftover_extras(j, {"price", "information", "messages_allowed", "max_rounds",
                                       "buyer_value_mult", "seller_value_mult"});
        return c;
    }
    case GameFamily::matrix_repeated:
    case GameFamily::matrix_oneshot: {
        MatrixGameConfig c;
        c.game = matrix_game_from_json(member(j, "game"));
        c.game_name = field_or<std::string>(j, "game_name", "");
        c.extras = leftover_extras(j, {"game", "game_name"});
        return c;
    }
    case GameFamily::lottery: {
        auto option = [&](const char* key) {
            const json& arr = member(j, key);
            if (!arr.is_array()) throw SchemaError(fmt::format("field '{}': expected array", key));
            std::vector<LotteryConfig::Outcome> out;
            for (const auto& o : arr)
                out.emplace_back(money_from_json(member(o, "payout")), field<double>(o, "prob"));
            return out;
        };
        LotteryConfig c;
        c.option_a = option("option_a");
        c.option_b = option("option_b");
        c.extras = leftover_extras(j, {"option_a", "option_b"});
        return c;
    }
    }
    throw Error("unreachable family tag");
}

} // namespace

json to_json(const MatrixGame2x2& g) {
    return json{{"row_payoffs", {{g.row_payoffs[0][0], g.row_payoffs[0][1]},
                                 {g.row_payoffs[1][0], g.row_payoffs[1][1]}}},
                {"col_payoffs", {{g.col_payoffs[0][0], g.col_payoffs[0][1]},
                                 {g.col_payoffs[1][0], g.col_payoffs[1][1]}}},
                {"topology", topology_name(g.topology)},
                {"counterbalanced", g.counterbalanced}};
}

MatrixGame2x2 matrix_game_from_json(const json& j) {
    if (!j.is_object()) throw SchemaError("field 'game': expected object");
    auto matrix = [&](const char* key) {
        const json& m = member(j, key);
        if (!m.is_array() || m.size() != 2 || !m[0].is_array() || m[0].size() != 2 ||
            !m[1].is_array() || m[1].size() != 2)
            throw SchemaError(fmt::format("field '{}': expected 2x2 array", key));
        std::array<std::array<double, 2>, 2> out{};
        for (int i = 0; i < 2; ++i)
            for (int k = 0; k < 2; ++k) out[i][k] = m[i][k].get<double>();
        return out;
    };
    MatrixGame2x2 g;
    g.row_payoffs = matrix("row_payoffs");
    g.col_payoffs = matrix("col_payoffs");
    g.topology = parse_topology(field<std::string>(j, "topology"));
    g.counterbalanced = field_or<bool>(j, "counterbalanced", false);
    return g;
}

json to_json(const DecisionPoint& dp) {
    json turns = json::array();
    for (const Turn& t : dp.history) {
        json tj{{"speaker", t.speaker}, {"text", t.text}};
        if (t.action.is_object() && !t.action.empty()) tj["action"] = t.action;
        turns.push_back(std::move(tj));
    }
    json j{{"id", dp.id},
           {"family", family_name(dp.family)},
           {"config", std::visit(ConfigSerializer{}, dp.config)},
           {"round_index", dp.round_index},
           {"role", dp.role},
           {"history", std::move(turns)},
           {"decision_labels", dp.decision_labels},
           {"affirmative_label", dp.affirmative_label},
           {"human_choice", dp.human_choice}};
    if (dp.aggregate_choice_rate) j["aggregate_choice_rate"] = *dp.aggregate_choice_rate;
    if (dp.n_participants) j["n_participants"] = *dp.n_participants;
    return j;
}

DecisionPoint decision_point_from_json(const json& j) {
    if (!j.is_object()) throw SchemaError("record: expected object");
    DecisionPoint dp;
    dp.id = field<std::string>(j, "id");
    dp.family = parse_family(field<std::string>(j, "family"));
    dp.config = config_from_json(member(j, "config"), dp.family);
    dp.round_index = field_or<int>(j, "round_index", 1);
    dp.role = field_or<std::string>(j, "role", "");
    if (auto it = j.find("history"); it != j.end()) {
        if (!it->is_array()) throw SchemaError("field 'history': expected array");
        for (const auto& tj : *it) {
            Turn t;
            t.speaker = field<std::string>(tj, "speaker");
            t.text = field_or<std::string>(tj, "text", "");
            if (auto a = tj.find("action"); a != tj.end() && a->is_object()) t.action = *a;
            dp.history.push_back(std::move(t));
        }
    }
    dp.decision_labels = field<std::vector<std::string>>(j, "decision_labels");
    dp.affirmative_label = field<std::string>(j, "affirmative_label");
    dp.human_choice = field<std::string>(j, "human_choice");
    if (auto it = j.find("aggregate_choice_rate"); it != j.end() && !it->is_null())
        dp.aggregate_choice_rate = it->get<double>();
    if (auto it = j.find("n_participants"); it != j.end() && !it->is_null())
        dp.n_participants = it->get<int>();
    validate(dp);
    return dp;
}

// ---------------------------------------------------------------------------
// Dataset + manifest I/O

std::string manifest_path_for(const std::string& dataset_path) {
    std::string out = dataset_path;
    if (out.size() >= 6 && out.compare(out.size() - 6, 6, ".jsonl") == 0)
        out.resize(out.size() - 6);
    return out + ".manifest.json";
}

DatasetManifest load_manifest(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ParseError(path, 0, "cannot open manifest");
    json j;
    try {
        in >> j;
    } catch (const json::exception& e) {
        throw ParseError(path, 1, e.what());
    }
    DatasetManifest m;
    m.family = parse_family(field<std::string>(j, "family"));
    m.count = field<std::size_t>(j, "count");
    m.schema_version = field_or<int>(j, "schema_version", 1);
    return m;
}

void save_manifest(const std::string& path, const DatasetManifest& m) {
    std::ofstream out(path);
    if (!out) throw Error(fmt::format("cannot write manifest '{}'", path));
    out << json{{"family", family_name(m.family)},
                {"count", m.count},
                {"schema_version", m.schema_version}}
               .dump(2)
        << '\n';
}

std::vector<DecisionPoint> load_dataset(const std::string& path, GameFamily family) {
    std::ifstream in(path);
    if (!in) throw ParseError(path, 0, "cannot open dataset");

    std::vector<DecisionPoint> out;
    std::set<std::string> ids;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
        json j;
        try {
            j = json::parse(line);
        } catch (const json::exception& e) {
            throw ParseError(path, lineno, e.what());
        }
        DecisionPoint dp;
        try {
            dp = decision_point_from_json(j);
        } catch (const SchemaError& e) {
            throw ParseError(path, lineno, e.what());
        }
        if (dp.family != family)
            throw SchemaError(fmt::format("{}:{}: record family '{}' does not match dataset family '{}'",
                                          path, lineno, family_name(dp.family), family_name(family)));
        if (!ids.insert(dp.id).second)
            throw ParseError(path, lineno, fmt::format("duplicate record id '{}'", dp.id));
        out.push_back(std::move(dp));
    }
    return out;
}

void save_dataset(const std::string& path, const std::vector<DecisionPoint>& dps) {
    std::ofstream out(path);
    if (!out) throw Error(fmt::format("cannot write dataset '{}'", path));
    for (const DecisionPoint& dp : dps) out << to_json(dp).dump() << '\n';
}

// ---------------------------------------------------------------------------
// Pair registry

std::vector<PairSpec> load_pair_registry(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ParseError(path, 0, "cannot open pair registry");
    json j;
    try {
        in >> j;
    } catch (const json::exception& e) {
        throw ParseError(path, 1, e.what());
    }
    const json& arr = j.is_array() ? j : member(j, "pairs");
    if (!arr.is_array()) throw SchemaError("field 'pairs': expected array");

    std::vector<PairSpec> out;
    std::set<int> ids;
    for (const auto& pj : arr) {
        PairSpec p;
        p.pair_id = field<int>(pj, "pair_id");
        p.base_model_id = field<std::string>(pj, "base");
        p.aligned_model_id = field<std::string>(pj, "aligned");
        p.provider = field_or<std::string>(pj, "provider", "");
        p.param_count_b = field<double>(pj, "param_b");
        if (p.base_model_id == p.aligned_model_id)
            throw SchemaError(fmt::format("pair {}: base and aligned model ids must differ", p.pair_id));
        if (!(p.param_count_b > 0.0))
            throw SchemaError(fmt::format("pair {}: field 'param_b': must be positive", p.pair_id));
        if (!ids.insert(p.pair_id).second)
            throw SchemaError(fmt::format("pair {}: duplicate pair_id", p.pair_id));
        out.push_back(std::move(p));
    }
    return out;
}

void save_pair_registry(const std::string& path, const std::vector<PairSpec>& pairs) {
    json arr = json::array();
    for (const PairSpec& p : pairs)
        arr.push_back(json{{"pair_id", p.pair_id},
                           {"base", p.base_model_id},
                           {"aligned", p.aligned_model_id},
                           {"provider", p.provider},
                           {"param_b", p.param_count_b}});
    std::ofstream out(path);
    if (!out) throw Error(fmt::format("cannot write pair registry '{}'", path));
    out << json{{"pairs", std::move(arr)}}.dump(2) << '\n';
}

} // namespace gamepred
