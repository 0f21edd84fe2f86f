#pragma once

// Canonical data model for the six evaluation datasets: the three dialogue
// game families (bargaining, persuasion, negotiation), repeated 2x2 matrix
// games, one-shot 2x2 matrix games, and binary lottery problems. Also owns
// dataset ingestion/validation and the per-family decision coding rule.

#include "gamepred/errors.hpp"

#include <json.hpp>

#include <array>
#include <cstdint>
#include <optional>
#include <string>
#include <variant>
#include <vector>

namespace gamepred {

using json = nlohmann::json;

// ---------------------------------------------------------------------------
// Game families

enum class GameFamily { bargaining, persuasion, negotiation, matrix_repeated, matrix_oneshot, lottery };

inline constexpr std::array<GameFamily, 6> kAllFamilies = {
    GameFamily::bargaining,     GameFamily::persuasion,     GameFamily::negotiation,
    GameFamily::matrix_repeated, GameFamily::matrix_oneshot, GameFamily::lottery};

const char* family_name(GameFamily f);
GameFamily parse_family(const std::string& name);

// 2 for all families except negotiation, whose decisions are ternary.
int label_arity(GameFamily f);

// Aggregate-level families correlate predictions against per-problem choice
// rates; decision-level families against individual coded choices.
bool is_aggregate_level(GameFamily f);

// ---------------------------------------------------------------------------
// Money: integer minor units + currency tag, so prompt text never suffers
// float drift.

struct Money {
    std::int64_t minor_units = 0;
    std::string currency = "USD";

    bool operator==(const Money&) const = default;
};

// "$100", "$37.50", "$1,000,000" -- used inside prompts.
std::string money_text(const Money& m);
// Compact bucket label matching the corpus conventions: "$100", "$10K", "$1M".
std::string money_bucket_label(const Money& m);

// ---------------------------------------------------------------------------
// Per-family configurations

enum class InformationStructure { complete, incomplete };
enum class MessageType { text, binary };

struct BargainingConfig {
    Money stakes;
    InformationStructure information = InformationStructure::complete;
    bool messages_allowed = false;
    double delta1 = 1.0;                 // proposer-side per-round discount
    double delta2 = 1.0;
    std::optional<int> max_rounds;       // empty = unbounded
    json extras = json::object();        // unknown keys, preserved verbatim
};

struct PersuasionConfig {
    double quality_prob_p = 0.5;
    double value_v = 2.0;                // high-quality value differential, > 1
    bool seller_knows_quality = true;
    bool buyer_myopic = false;
    MessageType message_type = MessageType::text;
    Money price;
    json extras = json::object();
};

struct NegotiationConfig {
    Money price;
    InformationStructure information = InformationStructure::complete;
    bool messages_allowed = false;
    int max_rounds = 10;
    double buyer_value_mult = 1.0;       // V_B = mult * price
    double seller_value_mult = 1.0;      // V_A = mult * price
    json extras = json::object();
};

// The 12 one-shot game topologies, as labeled by the source dataset. The
// payoff-order conditions behind these labels are not re-derived here.
enum class Topology {
    harmony, concord, peace, safecoord, assurance, dilemma,
    deadlock, chicken, staghunt, hero, leader, compromise
};

const char* topology_name(Topology t);
Topology parse_topology(const std::string& name);

struct MatrixGame2x2 {
    // row_payoffs[i][j]: row player's payoff when row plays i and column
    // plays j (0-indexed actions).
    std::array<std::array<double, 2>, 2> row_payoffs{};
    std::array<std::array<double, 2>, 2> col_payoffs{};
    Topology topology = Topology::dilemma;
    bool counterbalanced = false;
};

struct MatrixGameConfig {
    MatrixGame2x2 game;
    std::string game_name;               // "pd", "bos", or empty for one-shot
    json extras = json::object();
};

struct LotteryConfig {
    using Outcome = std::pair<Money, double>; // (payout, probability)
    std::vector<Outcome> option_a;
    std::vector<Outcome> option_b;
    json extras = json::object();
};

using GameConfig = std::variant<BargainingConfig, PersuasionConfig, NegotiationConfig,
                                MatrixGameConfig, LotteryConfig>;

// ---------------------------------------------------------------------------
// Decision points

struct Turn {
    std::string speaker;
    std::string text;
    json action = json::object(); // structured action (offer amount, flags...)
};

struct DecisionPoint {
    std::string id;
    GameFamily family = GameFamily::bargaining;
    GameConfig config;
    int round_index = 1;
    std::string role;
    std::vector<Turn> history;
    std::vector<std::string> decision_labels;
    std::string affirmative_label;
    std::string human_choice;                 // aggregate families: modal label
    std::optional<double> aggregate_choice_rate;
    std::optional<int> n_participants;
};

// Throws SchemaError when any invariant fails; the message names the field.
void validate(const DecisionPoint& dp);

// 1 iff `label` is the affirmative label; in negotiation both RejectOffer and
// DealWithJohn therefore code to 0. Throws on a label outside the set.
int code_decision(const DecisionPoint& dp, const std::string& label);

// ---------------------------------------------------------------------------
// Model-pair registry

struct PairSpec {
    int pair_id = 0;
    std::string base_model_id;
    std::string aligned_model_id;
    std::string provider;
    double param_count_b = 0.0; // billions of parameters
};

std::vector<PairSpec> load_pair_registry(const std::string& path);
void save_pair_registry(const std::string& path, const std::vector<PairSpec>& pairs);

// ---------------------------------------------------------------------------
// Dataset I/O: line-delimited JSON records plus a sidecar manifest.

struct DatasetManifest {
    GameFamily family = GameFamily::bargaining;
    std::size_t count = 0;
    int schema_version = 1;
};

// Path of the sidecar manifest for a dataset file ("x.jsonl" -> "x.manifest.json").
std::string manifest_path_for(const std::string& dataset_path);

DatasetManifest load_manifest(const std::string& path);
void save_manifest(const std::string& path, const DatasetManifest& m);

// Loads and validates every line. Record order is preserved; an empty file
// yields an empty list. Malformed lines raise ParseError naming file, line
// and field; a family mismatch raises SchemaError.
std::vector<DecisionPoint> load_dataset(const std::string& path, GameFamily family);

void save_dataset(const std::string& path, const std::vector<DecisionPoint>& dps);

// JSON serialization (round-trips field-for-field)
json to_json(const DecisionPoint& dp);
DecisionPoint decision_point_from_json(const json& j);

json to_json(const MatrixGame2x2& g);
MatrixGame2x2 matrix_game_from_json(const json& j);

} // namespace gamepred
