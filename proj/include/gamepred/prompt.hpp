#pragma once

// Deterministic prompt rendering: turns a DecisionPoint into completion-style
// text under any of the 14 prompt formulations, either as a plain ("standard")
// prompt or wrapped in a model-specific chat template.

#include "gamepred/game_model.hpp"

#include <functional>
#include <string>
#include <string_view>
#include <vector>

namespace gamepred {

// ---------------------------------------------------------------------------
// Prompt variants

enum class VariantCluster { baseline, framing, persona, format, structure };

const char* cluster_name(VariantCluster c);

// The JSON completion suffix used by every variant outside the format cluster.
inline constexpr std::string_view kBaselineSuffix = "{\"decision\": \"";

struct PromptVariant {
    std::string name;
    VariantCluster cluster = VariantCluster::baseline;
    std::string suffix{kBaselineSuffix};
    std::string system_prefix;        // empty = no extra leading sentence
    bool drops_history = false;       // render structured context only
    bool swaps_label_order = false;   // list non-affirmative labels first
    bool low_mass_risk = false;       // expected to starve decision-token mass
};

// The versioned built-in variant table: 1 baseline, 3 framing, 5 persona,
// 3 format, 2 structure.
const std::vector<PromptVariant>& list_variants();
const PromptVariant& variant_by_name(std::string_view name);

// Version tag for the built-in variant table and per-family system wording.
inline constexpr std::string_view kPromptTextVersion = "v1";

// ---------------------------------------------------------------------------
// Formats and chat templates

enum class PromptFormat { standard, chat };

const char* format_name(PromptFormat f);
PromptFormat parse_format(const std::string& name);

struct ChatTemplateSpec {
    std::string system_open;
    std::string system_close;
    std::string user_open;
    std::string user_close;
    std::string assistant_open;
    std::string turn_separator;
    std::string generation_prefix;
};

ChatTemplateSpec load_chat_template(const std::string& path);
void save_chat_template(const std::string& path, const ChatTemplateSpec& spec);

// Template file location for a model id ('/' is not allowed in file names and
// maps to "__").
std::string chat_template_path(const std::string& dir, const std::string& model_id);

// system wrapper, then each user turn bracketed by its markers, ending with
// the assistant opener and generation prefix. Injective over distinct turn
// lists whenever the markers are nonempty and absent from the bodies.
std::string apply_chat_template(const std::string& system,
                                const std::vector<std::string>& user_turns,
                                const ChatTemplateSpec& tmpl);

// ---------------------------------------------------------------------------
// Rendering

struct RenderedPrompt {
    std::string text;
    PromptFormat format = PromptFormat::standard;
    std::string variant;
    std::string decision_point_id;
    std::vector<std::string> expected_labels; // post-swap presentation order
};

// Diagnostic sink for marker-escaping events; pass nullptr to restore the
// default (std::clog).
using PromptLogSink = std::function<void(const std::string&)>;
void set_prompt_log_sink(PromptLogSink sink);

// Pure function of its arguments. Chat format requires a template. Variants
// outside the baseline cluster apply to bargaining and negotiation; other
// families require allow_any_family (their results are normally left to the
// downstream filters to reject).
RenderedPrompt build_prompt(const DecisionPoint& dp, const PromptVariant& variant,
                            PromptFormat format, const ChatTemplateSpec* tmpl = nullptr,
                            bool allow_any_family = false);

} // namespace gamepred
