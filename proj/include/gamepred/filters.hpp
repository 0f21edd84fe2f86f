#pragma once

// Pair-level exclusion filters (decision-token mass and minimum correlation)
// and the threshold sensitivity grid that re-runs the win counts across a
// lattice of filter settings.

#include "gamepred/game_model.hpp"
#include "gamepred/stats.hpp"

#include <optional>
#include <span>
#include <vector>

namespace gamepred {

struct FilterConfig {
    double mass_threshold = 0.8;
    double min_corr_threshold = 0.3;
};

struct FilterOutcome {
    int pair_id = 0;
    GameFamily family = GameFamily::bargaining;
    bool mass_pass = false;
    bool corr_pass = false;
    bool included = false; // mass_pass && corr_pass
};

// True iff both models' mean decision-token masses reach the threshold.
// Thresholds are satisfied at equality.
bool mass_filter(double base_mass, double aligned_mass, const FilterConfig& cfg);

// True iff at least one correlation reaches the threshold; an undefined
// correlation counts as below every threshold.
bool min_corr_filter(std::optional<double> base_r, std::optional<double> aligned_r,
                     const FilterConfig& cfg);

// Everything the filters and win counts need to know about one pair within
// one game family.
struct PairStats {
    int pair_id = 0;
    GameFamily family = GameFamily::bargaining;
    double base_mass = 0.0;
    double aligned_mass = 0.0;
    std::optional<double> base_r;
    std::optional<double> aligned_r;
};

FilterOutcome apply_filters(const PairStats& stats, const FilterConfig& cfg);

// Winner of an included pair: the side with the larger correlation, treating
// undefined as -inf; nullopt on an exact tie or when both are undefined.
std::optional<stats::Direction> pair_winner(const PairStats& stats);

// A grid threshold of nullopt disables that filter for the cell.
using ThresholdLevel = std::optional<double>;

const std::vector<ThresholdLevel>& default_mass_levels(); // none, 0.5 .. 0.9
const std::vector<ThresholdLevel>& default_corr_levels(); // none, 0.1 .. 0.5

struct GridCell {
    ThresholdLevel mass_level;
    ThresholdLevel corr_level;
    std::size_t wins_base = 0;
    std::size_t wins_aligned = 0;
    std::optional<double> p_value; // empty when the cell has no comparisons
};

struct SensitivityGrid {
    std::vector<ThresholdLevel> mass_levels;
    std::vector<ThresholdLevel> corr_levels;
    std::vector<std::vector<GridCell>> cells; // cells[mass_index][corr_index]
};

// Re-applies both filters at every level combination and recounts wins with a
// fresh one-sided binomial test per cell. The cell at the default thresholds
// reproduces the headline pipeline numbers exactly.
SensitivityGrid sensitivity_grid(std::span<const PairStats> stats,
                                 const std::vector<ThresholdLevel>& mass_levels,
                                 const std::vector<ThresholdLevel>& corr_levels);

} // namespace gamepred
