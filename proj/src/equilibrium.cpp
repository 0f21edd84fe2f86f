#include "gamepred/equilibrium.hpp"

#include <fmt/format.h>

#include <cmath>

namespace gamepred {

const char* ne_kind_name(NeKind k) {
    switch (k) {
    case NeKind::interior_mixed: return "interior_mixed";
    case NeKind::pure_dominant: return "pure_dominant";
    case NeKind::pure_unique: return "pure_unique";
    }
    throw Error("unreachable NE kind");
}

namespace {

// Index of the strictly dominant action for the given payoff view (payoff(i, j)
// = that player's payoff when it plays i and the opponent plays j), or -1.
template <typename Payoff>
int strictly_dominant_action(Payoff payoff) {
    for (int a = 0; a < 2; ++a) {
        bool dominates = true;
        for (int opp = 0; opp < 2 && dominates; ++opp)
            dominates = payoff(a, opp) > payoff(1 - a, opp);
        if (dominates) return a;
    }
    return -1;
}

// Unique best response to a fixed opponent action, or -1 on a payoff tie.
template <typename Payoff>
int unique_best_response(Payoff payoff, int opp_action) {
    double v0 = payoff(0, opp_action);
    double v1 = payoff(1, opp_action);
    if (v0 == v1) return -1;
    return v0 > v1 ? 0 : 1;
}

NePrediction pure_profile(int row_action, int col_action, NeKind kind) {
    return {row_action == 0 ? 1.0 : 0.0, col_action == 0 ? 1.0 : 0.0, kind};
}

} // namespace

NePrediction mixed_ne_2x2(const MatrixGame2x2& game) {
    const auto& a = game.row_payoffs;
    const auto& b = game.col_payoffs;
    auto row_payoff = [&](int self, int opp) { return a[self][opp]; };
    auto col_payoff = [&](int self, int opp) { return b[opp][self]; };

    // Branch 1: a strictly dominant action plus the opponent's strict best
    // response solves the game by iterated dominance. Payoff ties fall
    // through so no tie-breaking ever happens inside this shortcut.
    if (int r = strictly_dominant_action(row_payoff); r >= 0) {
        if (int c = unique_best_response(col_payoff, r); c >= 0)
            return pure_profile(r, c, NeKind::pure_dominant);
    }
    if (int c = strictly_dominant_action(col_payoff); c >= 0) {
        if (int r = unique_best_response(row_payoff, c); r >= 0)
            return pure_profile(r, c, NeKind::pure_dominant);
    }

    // Branch 2: interior indifference point. p (row's action-0 probability)
    // makes the column player indifferent, hence comes from the column
    // payoffs; q symmetrically from the row payoffs.
    double den_p = b[0][0] - b[0][1] - b[1][0] + b[1][1];
    double den_q = a[0][0] - a[0][1] - a[1][0] + a[1][1];
    if (den_p != 0.0 && den_q != 0.0) {
        double p = (b[1][1] - b[1][0]) / den_p;
        double q = (a[1][1] - a[0][1]) / den_q;
        if (p > 0.0 && p < 1.0 && q > 0.0 && q < 1.0)
            return {p, q, NeKind::interior_mixed};
    }

    // Branch 3: unique pure equilibrium.
    int found_row = -1;
    int found_col = -1;
    int count = 0;
    for (int i = 0; i < 2; ++i)
        for (int j = 0; j < 2; ++j) {
            bool row_ok = a[i][j] >= a[1 - i][j];
            bool col_ok = b[i][j] >= b[i][1 - j];
            if (row_ok && col_ok) {
                ++count;
                found_row = i;
                found_col = j;
            }
        }
    if (count == 1) return pure_profile(found_row, found_col, NeKind::pure_unique);

    if (den_p == 0.0)
        throw DegenerateGameError(
            "column player's indifference denominator is zero and no pure outcome resolves the game");
    if (den_q == 0.0)
        throw DegenerateGameError(
            "row player's indifference denominator is zero and no pure outcome resolves the game");
    throw DegenerateGameError(
        fmt::format("{} pure equilibria with no interior mixed point", count));
}

stats::CorrelationResult ne_alignment(std::span<const double> model_probs,
                                      std::span<const double> ne_probs) {
    if (model_probs.size() != ne_probs.size())
        throw Error(fmt::format("NE alignment: {} model predictions vs {} NE values",
                                model_probs.size(), ne_probs.size()));
    return stats::pearson(model_probs, ne_probs);
}

std::optional<stats::Direction> closer_to_ne(double base_r, double aligned_r) {
    if (std::isnan(base_r) || std::isnan(aligned_r))
        throw Error("NE comparison requires defined correlations on both sides");
    if (base_r == aligned_r) return std::nullopt;
    return base_r > aligned_r ? stats::Direction::base : stats::Direction::aligned;
}

} // namespace gamepred
