#pragma once

// Normalizes decision-token masses into the affirmative-choice probability
// (the ratio of affirmative mass to total decision mass) and assembles the
// per-decision prediction records the analysis stages consume.

#include "gamepred/provider.hpp"

#include <optional>
#include <span>
#include <string>
#include <vector>

namespace gamepred {

struct PredictionRecord {
    std::string decision_point_id;
    std::string model_id;
    std::string variant;
    PromptFormat format = PromptFormat::standard;
    LabelMass label_masses;
    std::optional<double> p_affirmative; // empty = invalid record (zero mass)

    bool valid() const { return p_affirmative.has_value(); }
};

// p = mass(affirmative) / sum of all label masses; undefined iff the
// denominator is zero. The denominator always spans the full label set, so a
// ternary family divides by all three masses. Throws ConfigError when
// affirmative is not in the mass map.
std::optional<double> normalize(const LabelMass& masses, const std::string& affirmative);

PredictionRecord make_prediction(const DecisionPoint& dp, const RenderedPrompt& prompt,
                                 const std::string& model_id, const LabelMass& masses);

// Arithmetic mean of total decision-token mass; invalid records contribute
// their zero mass. Throws on an empty list.
double mean_decision_mass(std::span<const PredictionRecord> records);

// Line-delimited persistence keyed by (model, variant, format, decision point).
void save_predictions(const std::string& path, std::span<const PredictionRecord> records);
std::vector<PredictionRecord> load_predictions(const std::string& path);

} // namespace gamepred
