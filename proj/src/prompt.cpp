#include "gamepred/prompt.hpp"

#include <fmt/format.h>

#include <algorithm>
#include <fstream>
#include <iostream>

namespace gamepred {

// ---------------------------------------------------------------------------
// Variant table

const char* cluster_name(VariantCluster c) {
    switch (c) {
    case VariantCluster::baseline: return "baseline";
    case VariantCluster::framing: return "framing";
    case VariantCluster::persona: return "persona";
    case VariantCluster::format: return "format";
    case VariantCluster::structure: return "structure";
    }
    throw Error("unreachable cluster tag");
}

const std::vector<PromptVariant>& list_variants() {
    static const std::vector<PromptVariant> table = [] {
        std::vector<PromptVariant> v;
        auto add = [&](PromptVariant pv) { v.push_back(std::move(pv)); };

        add({.name = "standard", .cluster = VariantCluster::baseline});

        add({.name = "predict_human",
             .cluster = VariantCluster::framing,
             .system_prefix = "Predict what a participant decided."});
        add({.name = "observer",
             .cluster = VariantCluster::framing,
             .system_prefix = "You are an external observer."});
        add({.name = "reversed_roles",
             .cluster = VariantCluster::framing,
             .system_prefix = "You are the offeror predicting the receiver's decision."});

        add({.name = "naive",
             .cluster = VariantCluster::persona,
             .system_prefix = "No prior experience."});
        add({.name = "expert",
             .cluster = VariantCluster::persona,
             .system_prefix = "Behavioral econ researcher."});
        add({.name = "fairness",
             .cluster = VariantCluster::persona,
             .system_prefix = "Values fairness."});
        add({.name = "selfish",
             .cluster = VariantCluster::persona,
             .system_prefix = "Maximize personal gain."});
        add({.name = "emotional",
             .cluster = VariantCluster::persona,
             .system_prefix = "Gut feeling."});

        add({.name = "natural_language",
             .cluster = VariantCluster::format,
             .suffix = "The decision is: ",
             .low_mass_risk = true});
        add({.name = "simplified",
             .cluster = VariantCluster::format,
             .suffix = "Answer: ",
             .low_mass_risk = true});
        add({.name = "minimal",
             .cluster = VariantCluster::format,
             .suffix = "I ",
             .low_mass_risk = true});

        add({.name = "numbers_only",
             .cluster = VariantCluster::structure,
             .drops_history = true,
             .low_mass_risk = true});
        add({.name = "preamble_reversed",
             .cluster = VariantCluster::structure,
             .swaps_label_order = true});
        return v;
    }();
    return table;
}

const PromptVariant& variant_by_name(std::string_view name) {
    for (const PromptVariant& v : list_variants())
        if (v.name == name) return v;
    throw ConfigError(fmt::format("unknown prompt variant '{}'", name));
}

// ---------------------------------------------------------------------------
// Formats and chat templates

const char* format_name(PromptFormat f) {
    return f == PromptFormat::standard ? "standard" : "chat";
}

PromptFormat parse_format(const std::string& name) {
    if (name == "standard") return PromptFormat::standard;
    if (name == "chat") return PromptFormat::chat;
    throw ConfigError(fmt::format("unknown prompt format '{}'", name));
}

ChatTemplateSpec load_chat_template(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError(fmt::format("cannot open chat template '{}'", path));
    json j;
    try {
        in >> j;
    } catch (const json::exception& e) {
        throw ParseError(path, 1, e.what());
    }
    auto get = [&](const char* key) {
        auto it = j.find(key);
        if (it == j.end() || !it->is_string())
            throw SchemaError(fmt::format("{}: field '{}': missing or not a string", path, key));
        return it->get<std::string>();
    };
    ChatTemplateSpec s;
    s.system_open = get("system_open");
    s.system_close = get("system_close");
    s.user_open = get("user_open");
    s.user_close = get("user_close");
    s.assistant_open = get("assistant_open");
    s.turn_separator = get("turn_separator");
    s.generation_prefix = get("generation_prefix");
    return s;
}

void save_chat_template(const std::string& path, const ChatTemplateSpec& spec) {
    std::ofstream out(path);
    if (!out) throw Error(fmt::format("cannot write chat template '{}'", path));
    out << json{{"system_open", spec.system_open},
                {"system_close", spec.system_close},
                {"user_open", spec.user_open},
                {"user_close", spec.user_close},
                {"assistant_open", spec.assistant_open},
                {"turn_separator", spec.turn_separator},
                {"generation_prefix", spec.generation_prefix}}
               .dump(2)
        << '\n';
}

std::string chat_template_path(const std::string& dir, const std::string& model_id) {
    std::string file = model_id;
    std::size_t pos = 0;
    while ((pos = file.find('/', pos)) != std::string::npos) {
        file.replace(pos, 1, "__");
        pos += 2;
    }
    return dir + "/" + file + ".json";
}

std::string apply_chat_template(const std::string& system,
                                const std::vector<std::string>& user_turns,
                                const ChatTemplateSpec& tmpl) {
    std::string out = tmpl.system_open + system + tmpl.system_close;
    for (const std::string& turn : user_turns)
        out += tmpl.turn_separator + tmpl.user_open + turn + tmpl.user_close;
    out += tmpl.turn_separator + tmpl.assistant_open + tmpl.generation_prefix;
    return out;
}

// ---------------------------------------------------------------------------
// Marker escaping

namespace {

PromptLogSink g_log_sink; // nullptr = default std::clog

void log_event(const std::string& msg) {
    if (g_log_sink)
        g_log_sink(msg);
    else
        std::clog << msg << '\n';
}

// Visually equivalent substitutes that no real tokenizer treats as control
// markers.
std::string lookalike(const std::string& s) {
    std::string out;
    out.reserve(s.size());
    for (char c : s) {
        switch (c) {
        case '<': out += "‹"; break;
        case '>': out += "›"; break;
        case '[': out += "⟦"; break;
        case ']': out += "⟧"; break;
        case '|': out += "¦"; break;
        default: out.push_back(c);
        }
    }
    return out;
}

std::string escape_against_template(std::string body, const ChatTemplateSpec& tmpl,
                                    const std::string& dp_id) {
    const std::string* markers[] = {&tmpl.system_open,    &tmpl.system_close, &tmpl.user_open,
                                    &tmpl.user_close,     &tmpl.assistant_open, &tmpl.turn_separator,
                                    &tmpl.generation_prefix};
    for (const std::string* mp : markers) {
        const std::string& marker = *mp;
        if (marker.empty() || body.find(marker) == std::string::npos) continue;
        // Whitespace-only markers (e.g. a bare-newline turn separator) carry
        // no control semantics a dialogue body could spoof; skip them.
        if (marker.find_first_not_of(" \t\r\n") == std::string::npos) continue;
        std::string safe = lookalike(marker);
        if (safe == marker) {
            log_event(fmt::format("prompt escaping: marker '{}' found in decision point '{}' "
                                  "but has no safe substitute",
                                  marker, dp_id));
            continue;
        }
        std::size_t count = 0;
        std::size_t pos = 0;
        while ((pos = body.find(marker, pos)) != std::string::npos) {
            body.replace(pos, marker.size(), safe);
            pos += safe.size();
            ++count;
        }
        log_event(fmt::format("prompt escaping: replaced {} occurrence(s) of chat marker '{}' "
                              "in decision point '{}'",
                              count, marker, dp_id));
    }
    return body;
}

} // namespace

void set_prompt_log_sink(PromptLogSink sink) { g_log_sink = std::move(sink); }

// ---------------------------------------------------------------------------
// System wording (version kPromptTextVersion)

namespace {

std::string value_text(const json& v) {
    return v.is_string() ? v.get<std::string>() : v.dump();
}

std::string outcome_list(const std::vector<LotteryConfig::Outcome>& outcomes) {
    std::string out;
    for (std::size_t i = 0; i < outcomes.size(); ++i) {
        if (i) out += "; ";
        out += fmt::format("{} with probability {:g}", money_text(outcomes[i].first),
                           outcomes[i].second);
    }
    return out;
}

std::string payoff_table(const MatrixGame2x2& g, const std::vector<std::string>& labels) {
    std::string out = "Payoff table (your payoff, opponent's payoff):";
    for (int i = 0; i < 2; ++i)
        for (int j = 0; j < 2; ++j)
            out += fmt::format("\n- If you choose \"{}\" and they choose \"{}\": ({:g}, {:g}).",
                               labels[i], labels[j], g.row_payoffs[i][j], g.col_payoffs[i][j]);
    return out;
}

struct RulesText {
    const DecisionPoint& dp;

    std::string operator()(const BargainingConfig& c) const {
        std::string rounds = c.max_rounds
                                 ? fmt::format(" The game lasts at most {} rounds.", *c.max_rounds)
                                 : " The game has no fixed round limit.";
        return fmt::format(
            "This is an alternating-offers bargaining game over {}{}. Information is {}. "
            "The proposer's per-round discount factor is {:g} and the responder's is {:g}.{} "
            "It is now round {}.",
            money_text(c.stakes), c.messages_allowed ? " with free-text messages" : "",
            c.information == InformationStructure::complete ? "complete" : "incomplete",
            c.delta1, c.delta2, rounds, dp.round_index);
    }

    std::string operator()(const PersuasionConfig& c) const {
        return fmt::format(
            "This is a repeated persuasion game. Each round a seller recommends a product "
            "priced at {}; the product is high quality with probability {:g}, and a "
            "high-quality product is worth {:g} times its price to the buyer. The seller {} "
            "the true quality. {} Messages are {}. It is now round {}.",
            money_text(c.price), c.quality_prob_p, c.value_v,
            c.seller_knows_quality ? "knows" : "does not know",
            c.buyer_myopic ? "The buyer sees only aggregate statistics."
                           : "The buyer sees the full history.",
            c.message_type == MessageType::text ? "free text" : "binary recommendations",
            dp.round_index);
    }

    std::string operator()(const NegotiationConfig& c) const {
        return fmt::format(
            "This is a multi-round price negotiation over an item listed at {}. Information "
            "is {}{}. The negotiation lasts at most {} rounds. The buyer values the item at "
            "{:g} times the list price; the seller values it at {:g} times the list price "
            "and may instead take a standing outside offer from John. It is now round {}.",
            money_text(c.price),
            c.information == InformationStructure::complete ? "complete" : "incomplete",
            c.messages_allowed ? " with free-text messages" : "", c.max_rounds,
            c.buyer_value_mult, c.seller_value_mult, dp.round_index);
    }

    std::string operator()(const MatrixGameConfig& c) const {
        if (dp.family == GameFamily::matrix_repeated) {
            std::string name = c.game_name.empty() ? "" : fmt::format(" ({})", c.game_name);
            return fmt::format("This is round {} of a repeated two-player matrix game{}.\n{}",
                               dp.round_index, name, payoff_table(c.game, dp.decision_labels));
        }
        return fmt::format("This is a one-shot two-player matrix game.\n{}",
                           payoff_table(c.game, dp.decision_labels));
    }

    std::string operator()(const LotteryConfig& c) const {
        return fmt::format("Choose between two lotteries.\nOption A: {}.\nOption B: {}.",
                           outcome_list(c.option_a), outcome_list(c.option_b));
    }
};

std::string system_text(const DecisionPoint& dp, const PromptVariant& variant) {
    std::string out;
    if (!variant.system_prefix.empty()) out = variant.system_prefix + " ";
    out += std::visit(RulesText{dp}, dp.config);
    if (!dp.role.empty()) out += fmt::format(" You are playing the role of {}.", dp.role);
    return out;
}

std::string dialogue_section(const DecisionPoint& dp, const PromptVariant& variant) {
    if (dp.history.empty()) return {};
    std::string out;
    if (variant.drops_history) {
        out = fmt::format("Context:\n  [round: {}]", dp.round_index);
        for (const Turn& t : dp.history)
            for (const auto& [key, value] : t.action.items())
                out += fmt::format("\n  [{}: {}]", key, value_text(value));
    } else {
        out = "Dialogue:";
        for (const Turn& t : dp.history) {
            out += t.text.empty() ? fmt::format("\n{}:", t.speaker)
                                  : fmt::format("\n{}: {}", t.speaker, t.text);
            for (const auto& [key, value] : t.action.items())
                out += fmt::format("\n  [{}: {}]", key, value_text(value));
        }
    }
    return out;
}

std::vector<std::string> presentation_order(const DecisionPoint& dp, const PromptVariant& variant) {
    std::vector<std::string> labels = dp.decision_labels;
    if (variant.swaps_label_order)
        std::stable_partition(labels.begin(), labels.end(),
                              [&](const std::string& l) { return l != dp.affirmative_label; });
    return labels;
}

std::string instruction_line(const std::vector<std::string>& labels) {
    std::string out = "Respond with exactly one of: ";
    for (std::size_t i = 0; i < labels.size(); ++i) {
        if (i > 0) out += labels.size() > 2 ? ", " : " ";
        if (i + 1 == labels.size()) out += "or ";
        out += fmt::format("\"{}\"", labels[i]);
    }
    return out + ".";
}

} // namespace

RenderedPrompt build_prompt(const DecisionPoint& dp, const PromptVariant& variant,
                            PromptFormat format, const ChatTemplateSpec* tmpl,
                            bool allow_any_family) {
    bool variant_family_ok = variant.cluster == VariantCluster::baseline ||
                             dp.family == GameFamily::bargaining ||
                             dp.family == GameFamily::negotiation || allow_any_family;
    if (!variant_family_ok)
        throw ConfigError(fmt::format("variant '{}' is not enabled for family '{}'", variant.name,
                                      family_name(dp.family)));
    if (format == PromptFormat::chat && tmpl == nullptr)
        throw ConfigError("chat format requires a chat template");

    RenderedPrompt out;
    out.format = format;
    out.variant = variant.name;
    out.decision_point_id = dp.id;
    out.expected_labels = presentation_order(dp, variant);

    std::string system = system_text(dp, variant);
    std::string dialogue = dialogue_section(dp, variant);
    std::string instruction = instruction_line(out.expected_labels);

    if (format == PromptFormat::standard) {
        out.text = system;
        if (!dialogue.empty()) out.text += "\n\n" + dialogue;
        out.text += "\n\n" + instruction + "\n" + variant.suffix;
    } else {
        std::string user_body =
            dialogue.empty() ? instruction : dialogue + "\n\n" + instruction;
        out.text = apply_chat_template(escape_against_template(std::move(system), *tmpl, dp.id),
                                       {escape_against_template(std::move(user_body), *tmpl, dp.id)},
                                       *tmpl) +
                   variant.suffix;
    }
    return out;
}

} // namespace gamepred
