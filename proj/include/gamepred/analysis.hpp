#pragma once

// Pairwise base-vs-aligned comparison and every aggregation the report
// needs: per-family win counts, config-parameter splits, round splits,
// model-size bootstrap bins, and scatter points.

#include "gamepred/filters.hpp"
#include "gamepred/predictor.hpp"

#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace gamepred {

enum class Winner { base, aligned, tie, excluded };

const char* winner_name(Winner w);

struct FamilyPairResult {
    PairSpec pair;
    GameFamily family = GameFamily::bargaining;
    std::optional<double> base_r;
    std::optional<double> aligned_r;
    double base_mass = 0.0;
    double aligned_mass = 0.0;
    FilterOutcome filter;
    Winner winner = Winner::excluded; // excluded unless filter.included
};

// Correlates each model's predictions against human choices over the given
// decision points (coded 0/1 choices for decision-level families, aggregate
// choice rates otherwise), applies both filters, and assigns the winner.
// Throws MissingDataError when either model fails to cover every decision
// point id.
FamilyPairResult compare_pair(const PairSpec& pair, GameFamily family,
                              std::span<const PredictionRecord> base_preds,
                              std::span<const PredictionRecord> aligned_preds,
                              std::span<const DecisionPoint> dps, const FilterConfig& cfg);

// PairStats view of a result, for the sensitivity grid.
PairStats to_pair_stats(const FamilyPairResult& result);

// ---------------------------------------------------------------------------
// Aggregation

struct AggregateRow {
    std::string group;
    std::size_t n_filtered = 0;   // pairs surviving both filters
    std::size_t n_excluded = 0;   // pairs removed by either filter
    std::size_t wins_base = 0;
    std::size_t wins_aligned = 0;
    std::optional<double> binomial_p; // empty when the group has no wins
    std::optional<double> wilcoxon_p; // empty when fewer than 5 paired diffs
};

// Win counts per group with a one-sided binomial test in the direction of
// each group's observed majority, plus a Wilcoxon signed-rank test over the
// included pairs' correlation differences when at least 5 are available.
// Rows are sorted by group label; the fold itself runs over inputs in
// canonical pair_id order, so the result is permutation-invariant.
std::vector<AggregateRow> aggregate(std::span<const FamilyPairResult> results,
                                    const std::function<std::string(const FamilyPairResult&)>& key);

std::vector<AggregateRow> aggregate_by_family(std::span<const FamilyPairResult> results);

// Single-group convenience: aggregate under one label.
AggregateRow aggregate_all(std::span<const FamilyPairResult> results, const std::string& label);

// ---------------------------------------------------------------------------
// Corpus splits (re-correlated downstream by re-running compare_pair)

enum class RoundSplitMode { first_vs_rest, matrix_phases };

struct RoundSplit {
    std::string label;
    std::vector<DecisionPoint> subset;
};

// first_vs_rest: {"round=1", "round>=2"}; matrix_phases: {"early (1-3)",
// "mid (4-7)", "late (8-10)"}. Partitions are disjoint and exhaustive.
std::vector<RoundSplit> round_split(std::span<const DecisionPoint> dps, RoundSplitMode mode);

struct ConfigSplit {
    std::string parameter;
    std::string value;
    std::vector<DecisionPoint> subset;
};

// Splits a dialogue-family corpus by every configuration parameter value it
// carries (stakes, information structure, discount factors, ...). A decision
// point lands in exactly one value-subset per parameter.
std::vector<ConfigSplit> config_parameter_split(std::span<const DecisionPoint> dps,
                                                GameFamily family);

// ---------------------------------------------------------------------------
// Model-size bins (bootstrap of the correlation difference)

struct SizeBin {
    std::string label;
    double lo = 0.0; // inclusive
    double hi = 0.0; // exclusive
};

const std::vector<SizeBin>& default_size_bins(); // <3B, 3-14B, >=14B

struct SizeBinResult {
    std::string label;
    std::size_t n = 0;
    std::optional<double> median;
    std::optional<double> ci_lo;
    std::optional<double> ci_hi;
};

// Per-bin median of (base_r - aligned_r) over included pairs with both
// correlations defined, with a percentile bootstrap confidence interval.
// Empty bins keep their row with n = 0 so the report can note the omission.
std::vector<SizeBinResult> size_bins(std::span<const FamilyPairResult> results,
                                     const std::vector<SizeBin>& bins,
                                     std::size_t resamples = 5000, double level = 0.95,
                                     std::uint64_t seed = 0);

// ---------------------------------------------------------------------------
// Scatter data

struct ScatterPoint {
    int pair_id = 0;
    GameFamily family = GameFamily::bargaining;
    std::optional<double> base_r;
    std::optional<double> aligned_r;
    bool included = false;
};

// One point per result (excluded pairs flagged, not dropped), sorted by
// (family, pair_id).
std::vector<ScatterPoint> scatter_data(std::span<const FamilyPairResult> results);

} // namespace gamepred
