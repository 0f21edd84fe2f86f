#pragma once

// Nash-equilibrium predictions for one-shot 2x2 games, plus the correlation
// machinery that compares model predictions against them.

#include "gamepred/game_model.hpp"
#include "gamepred/stats.hpp"

#include <optional>
#include <span>

namespace gamepred {

enum class NeKind { interior_mixed, pure_dominant, pure_unique };

const char* ne_kind_name(NeKind k);

struct NePrediction {
    double row_action1_prob = 0.0; // probability the row player plays action 0
    double col_action1_prob = 0.0;
    NeKind kind = NeKind::interior_mixed;
};

// Selection rule, in order:
//   1. strict dominance for either player -> dominance-solvable pure outcome
//      (kind = pure_dominant); weak dominance does not take this branch;
//   2. interior indifference point in (0,1)^2 -> kind = interior_mixed;
//   3. unique pure equilibrium -> kind = pure_unique.
// A zero indifference denominator that no other branch resolves raises
// DegenerateGameError naming the degenerate side.
NePrediction mixed_ne_2x2(const MatrixGame2x2& game);

// Pearson correlation between per-game model probabilities and the NE
// action-1 probabilities. Indexes must be aligned by the caller.
stats::CorrelationResult ne_alignment(std::span<const double> model_probs,
                                      std::span<const double> ne_probs);

// Side with the larger correlation; nullopt on an exact tie (ties are
// excluded from win counts upstream).
std::optional<stats::Direction> closer_to_ne(double base_r, double aligned_r);

} // namespace gamepred
