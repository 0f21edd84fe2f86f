#include "gamepred/filters.hpp"

#include <algorithm>
#include <limits>

namespace gamepred {

namespace {

double defined_or_lowest(std::optional<double> r) {
    return r.value_or(-std::numeric_limits<double>::infinity());
}

} // namespace

bool mass_filter(double base_mass, double aligned_mass, const FilterConfig& cfg) {
    return std::min(base_mass, aligned_mass) >= cfg.mass_threshold;
}

bool min_corr_filter(std::optional<double> base_r, std::optional<double> aligned_r,
                     const FilterConfig& cfg) {
    return std::max(defined_or_lowest(base_r), defined_or_lowest(aligned_r)) >=
           cfg.min_corr_threshold;
}

FilterOutcome apply_filters(const PairStats& stats, const FilterConfig& cfg) {
    FilterOutcome out;
    out.pair_id = stats.pair_id;
    out.family = stats.family;
    out.mass_pass = mass_filter(stats.base_mass, stats.aligned_mass, cfg);
    out.corr_pass = min_corr_filter(stats.base_r, stats.aligned_r, cfg);
    out.included = out.mass_pass && out.corr_pass;
    return out;
}

std::optional<stats::Direction> pair_winner(const PairStats& stats) {
    if (!stats.base_r && !stats.aligned_r) return std::nullopt;
    double b = defined_or_lowest(stats.base_r);
    double a = defined_or_lowest(stats.aligned_r);
    if (b == a) return std::nullopt;
    return b > a ? stats::Direction::base : stats::Direction::aligned;
}

const std::vector<ThresholdLevel>& default_mass_levels() {
    static const std::vector<ThresholdLevel> levels = {std::nullopt, 0.5, 0.6, 0.7, 0.8, 0.9};
    return levels;
}

const std::vector<ThresholdLevel>& default_corr_levels() {
    static const std::vector<ThresholdLevel> levels = {std::nullopt, 0.1, 0.2, 0.3, 0.4, 0.5};
    return levels;
}

SensitivityGrid sensitivity_grid(std::span<const PairStats> stats,
                                 const std::vector<ThresholdLevel>& mass_levels,
                                 const std::vector<ThresholdLevel>& corr_levels) {
    if (mass_levels.empty() || corr_levels.empty())
        throw ConfigError("sensitivity grid requires at least one level per axis");

    SensitivityGrid grid;
    grid.mass_levels = mass_levels;
    grid.corr_levels = corr_levels;
    grid.cells.resize(mass_levels.size());

    for (std::size_t mi = 0; mi < mass_levels.size(); ++mi) {
        grid.cells[mi].resize(corr_levels.size());
        for (std::size_t ci = 0; ci < corr_levels.size(); ++ci) {
            GridCell& cell = grid.cells[mi][ci];
            cell.mass_level = mass_levels[mi];
            cell.corr_level = corr_levels[ci];

            FilterConfig cfg;
            cfg.mass_threshold =
                mass_levels[mi] ? *mass_levels[mi] : -std::numeric_limits<double>::infinity();
            cfg.min_corr_threshold =
                corr_levels[ci] ? *corr_levels[ci] : -std::numeric_limits<double>::infinity();

            for (const PairStats& ps : stats) {
                if (!apply_filters(ps, cfg).included) continue;
                if (auto winner = pair_winner(ps)) {
                    if (*winner == stats::Direction::base)
                        ++cell.wins_base;
                    else
                        ++cell.wins_aligned;
                }
            }
            std::size_t n = cell.wins_base + cell.wins_aligned;
            if (n > 0) {
                auto direction = cell.wins_base >= cell.wins_aligned ? stats::Direction::base
                                                                     : stats::Direction::aligned;
                cell.p_value = stats::binomial_one_sided(
                                   std::max(cell.wins_base, cell.wins_aligned), n, direction)
                                   .p_value;
            }
        }
    }
    return grid;
}

} // namespace gamepred
