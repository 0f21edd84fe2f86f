#include "gamepred/analysis.hpp"

#include <fmt/format.h>

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>

namespace gamepred {

const char* winner_name(Winner w) {
    switch (w) {
    case Winner::base: return "base";
    case Winner::aligned: return "aligned";
    case Winner::tie: return "tie";
    case Winner::excluded: return "excluded";
    }
    throw Error("unreachable winner tag");
}

// ---------------------------------------------------------------------------
// Pair comparison

namespace {

std::map<std::string, const PredictionRecord*> index_by_dp(std::span<const PredictionRecord> preds) {
    std::map<std::string, const PredictionRecord*> out;
    for (const PredictionRecord& r : preds)
        if (!out.emplace(r.decision_point_id, &r).second)
            throw SchemaError(
                fmt::format("duplicate prediction for decision point '{}'", r.decision_point_id));
    return out;
}

void require_coverage(const std::map<std::string, const PredictionRecord*>& index,
                      std::span<const DecisionPoint> dps, const std::string& model_id) {
    std::vector<std::string> missing;
    for (const DecisionPoint& dp : dps)
        if (index.find(dp.id) == index.end()) missing.push_back(dp.id);
    if (missing.empty()) return;
    std::string listed;
    for (std::size_t i = 0; i < missing.size() && i < 5; ++i)
        listed += (i ? ", " : "") + missing[i];
    if (missing.size() > 5) listed += ", ...";
    throw MissingDataError(fmt::format("model '{}' lacks predictions for {} decision point(s): {}",
                                       model_id, missing.size(), listed));
}

struct ModelView {
    std::optional<double> r;
    double mean_mass = 0.0;
};

ModelView model_view(const std::map<std::string, const PredictionRecord*>& index,
                     std::span<const DecisionPoint> dps) {
    std::vector<double> predicted;
    std::vector<double> observed;
    double mass_total = 0.0;
    for (const DecisionPoint& dp : dps) {
        const PredictionRecord& rec = *index.at(dp.id);
        mass_total += rec.label_masses.total_mass;
        if (!rec.valid()) continue;
        predicted.push_back(*rec.p_affirmative);
        observed.push_back(is_aggregate_level(dp.family)
                               ? *dp.aggregate_choice_rate
                               : static_cast<double>(code_decision(dp, dp.human_choice)));
    }
    ModelView view;
    view.mean_mass = dps.empty() ? 0.0 : mass_total / static_cast<double>(dps.size());
    view.r = stats::pearson(predicted, observed).r;
    return view;
}

} // namespace

FamilyPairResult compare_pair(const PairSpec& pair, GameFamily family,
                              std::span<const PredictionRecord> base_preds,
                              std::span<const PredictionRecord> aligned_preds,
                              std::span<const DecisionPoint> dps, const FilterConfig& cfg) {
    auto base_index = index_by_dp(base_preds);
    auto aligned_index = index_by_dp(aligned_preds);
    require_coverage(base_index, dps, pair.base_model_id);
    require_coverage(aligned_index, dps, pair.aligned_model_id);

    ModelView base = model_view(base_index, dps);
    ModelView aligned = model_view(aligned_index, dps);

    FamilyPairResult result;
    result.pair = pair;
    result.family = family;
    result.base_r = base.r;
    result.aligned_r = aligned.r;
    result.base_mass = base.mean_mass;
    result.aligned_mass = aligned.mean_mass;
    result.filter = apply_filters(to_pair_stats(result), cfg);
    result.filter.pair_id = pair.pair_id;
    result.filter.family = family;

    if (!result.filter.included) {
        result.winner = Winner::excluded;
        return result;
    }
    double b = result.base_r.value_or(-std::numeric_limits<double>::infinity());
    double a = result.aligned_r.value_or(-std::numeric_limits<double>::infinity());
    result.winner = b > a ? Winner::base : (a > b ? Winner::aligned : Winner::tie);
    return result;
}

PairStats to_pair_stats(const FamilyPairResult& result) {
    PairStats ps;
    ps.pair_id = result.pair.pair_id;
    ps.family = result.family;
    ps.base_mass = result.base_mass;
    ps.aligned_mass = result.aligned_mass;
    ps.base_r = result.base_r;
    ps.aligned_r = result.aligned_r;
    return ps;
}

// ---------------------------------------------------------------------------
// Aggregation

std::vector<AggregateRow> aggregate(
    std::span<const FamilyPairResult> results,
    const std::function<std::string(const FamilyPairResult&)>& key) {
    std::vector<const FamilyPairResult*> ordered;
    ordered.reserve(results.size());
    for (const FamilyPairResult& r : results) ordered.push_back(&r);
    std::sort(ordered.begin(), ordered.end(), [](const FamilyPairResult* a, const FamilyPairResult* b) {
        if (a->pair.pair_id != b->pair.pair_id) return a->pair.pair_id < b->pair.pair_id;
        return a->family < b->family;
    });

    struct Accumulator {
        AggregateRow row;
        std::vector<double> diffs;
    };
    std::map<std::string, Accumulator> groups;
    for (const FamilyPairResult* r : ordered) {
        Accumulator& acc = groups[key(*r)];
        if (r->filter.included) {
            ++acc.row.n_filtered;
            if (r->winner == Winner::base) ++acc.row.wins_base;
            if (r->winner == Winner::aligned) ++acc.row.wins_aligned;
            if (r->base_r && r->aligned_r) acc.diffs.push_back(*r->base_r - *r->aligned_r);
        } else {
            ++acc.row.n_excluded;
        }
    }

    std::vector<AggregateRow> out;
    out.reserve(groups.size());
    for (auto& [label, acc] : groups) {
        acc.row.group = label;
        std::size_t n = acc.row.wins_base + acc.row.wins_aligned;
        if (n > 0) {
            auto direction = acc.row.wins_base >= acc.row.wins_aligned ? stats::Direction::base
                                                                       : stats::Direction::aligned;
            acc.row.binomial_p =
                stats::binomial_one_sided(std::max(acc.row.wins_base, acc.row.wins_aligned), n,
                                          direction)
                    .p_value;
        }
        if (acc.diffs.size() >= 5)
            acc.row.wilcoxon_p = stats::wilcoxon_signed_rank_one_sided(acc.diffs).p_value;
        out.push_back(std::move(acc.row));
    }
    return out;
}

std::vector<AggregateRow> aggregate_by_family(std::span<const FamilyPairResult> results) {
    return aggregate(results,
                     [](const FamilyPairResult& r) { return std::string(family_name(r.family)); });
}

AggregateRow aggregate_all(std::span<const FamilyPairResult> results, const std::string& label) {
    auto rows = aggregate(results, [&](const FamilyPairResult&) { return label; });
    if (rows.empty()) {
        AggregateRow row;
        row.group = label;
        return row;
    }
    return rows.front();
}

// ---------------------------------------------------------------------------
// Corpus splits

std::vector<RoundSplit> round_split(std::span<const DecisionPoint> dps, RoundSplitMode mode) {
    std::vector<RoundSplit> out;
    if (mode == RoundSplitMode::first_vs_rest) {
        out.push_back({"round=1", {}});
        out.push_back({"round>=2", {}});
        for (const DecisionPoint& dp : dps) out[dp.round_index == 1 ? 0 : 1].subset.push_back(dp);
    } else {
        out.push_back({"early (1-3)", {}});
        out.push_back({"mid (4-7)", {}});
        out.push_back({"late (8-10)", {}});
        for (const DecisionPoint& dp : dps) {
            std::size_t bucket = dp.round_index <= 3 ? 0 : (dp.round_index <= 7 ? 1 : 2);
            out[bucket].subset.push_back(dp);
        }
    }
    return out;
}

namespace {

// One configuration parameter: display name plus a value extractor returning
// (sort key, display label).
struct ParamSpec {
    std::string name;
    std::function<std::pair<double, std::string>(const DecisionPoint&)> value;
};

std::pair<double, std::string> money_value(const Money& m) {
    return {static_cast<double>(m.minor_units), money_bucket_label(m)};
}

std::pair<double, std::string> number_value(double v) {
    return {v, json(v).dump()};
}

std::pair<double, std::string> choice_value(bool first, const char* a, const char* b) {
    return {first ? 0.0 : 1.0, first ? a : b};
}

std::vector<ParamSpec> param_specs(GameFamily family) {
    switch (family) {
    case GameFamily::bargaining:
        return {
            {"Stakes",
             [](const DecisionPoint& dp) {
                 return money_value(std::get<BargainingConfig>(dp.config).stakes);
             }},
            {"Information",
             [](const DecisionPoint& dp) {
                 return choice_value(std::get<BargainingConfig>(dp.config).information ==
                                         InformationStructure::complete,
                                     "Complete", "Incomplete");
             }},
            {"Messages",
             [](const DecisionPoint& dp) {
                 return choice_value(std::get<BargainingConfig>(dp.config).messages_allowed,
                                     "Allowed", "Not allowed");
             }},
            {"Discount delta1",
             [](const DecisionPoint& dp) {
                 return number_value(std::get<BargainingConfig>(dp.config).delta1);
             }},
            {"Discount delta2",
             [](const DecisionPoint& dp) {
                 return number_value(std::get<BargainingConfig>(dp.config).delta2);
             }},
            {"Max rounds",
             [](const DecisionPoint& dp) -> std::pair<double, std::string> {
                 const auto& c = std::get<BargainingConfig>(dp.config);
                 if (!c.max_rounds) return {std::numeric_limits<double>::infinity(), "unbounded"};
                 return {static_cast<double>(*c.max_rounds), fmt::format("{}", *c.max_rounds)};
             }},
        };
    case GameFamily::persuasion:
        return {
            {"Quality prob. p",
             [](const DecisionPoint& dp) {
                 return number_value(std::get<PersuasionConfig>(dp.config).quality_prob_p);
             }},
            {"Value v",
             [](const DecisionPoint& dp) {
                 return number_value(std::get<PersuasionConfig>(dp.config).value_v);
             }},
            {"Seller knowledge",
             [](const DecisionPoint& dp) {
                 return choice_value(std::get<PersuasionConfig>(dp.config).seller_knows_quality,
                                     "Knows", "Uninformed");
             }},
            {"Buyer myopic",
             [](const DecisionPoint& dp) {
                 return choice_value(std::get<PersuasionConfig>(dp.config).buyer_myopic, "Yes",
                                     "No");
             }},
            {"Message type",
             [](const DecisionPoint& dp) {
                 return choice_value(std::get<PersuasionConfig>(dp.config).message_type ==
                                         MessageType::text,
                                     "Text", "Binary");
             }},
            {"Price",
             [](const DecisionPoint& dp) {
                 return money_value(std::get<PersuasionConfig>(dp.config).price);
             }},
        };
    case GameFamily::negotiation:
        return {
            {"Information",
             [](const DecisionPoint& dp) {
                 return choice_value(std::get<NegotiationConfig>(dp.config).information ==
                                         InformationStructure::complete,
                                     "Complete", "Incomplete");
             }},
            {"Messages",
             [](const DecisionPoint& dp) {
                 return choice_value(std::get<NegotiationConfig>(dp.config).messages_allowed,
                                     "Allowed", "Not allowed");
             }},
            {"Max rounds",
             [](const DecisionPoint& dp) {
                 const auto& c = std::get<NegotiationConfig>(dp.config);
                 return std::pair<double, std::string>{static_cast<double>(c.max_rounds),
                                                       fmt::format("{}", c.max_rounds)};
             }},
            {"Price",
             [](const DecisionPoint& dp) {
                 return money_value(std::get<NegotiationConfig>(dp.config).price);
             }},
            {"Value asymmetry",
             [](const DecisionPoint& dp) -> std::pair<double, std::string> {
                 const auto& c = std::get<NegotiationConfig>(dp.config);
                 if (c.buyer_value_mult > c.seller_value_mult) return {0.0, "Buyer > Seller"};
                 if (c.seller_value_mult > c.buyer_value_mult) return {1.0, "Seller > Buyer"};
                 return {2.0, "Equal"};
             }},
        };
    case GameFamily::matrix_repeated:
        return {
            {"Game",
             [](const DecisionPoint& dp) {
                 const auto& c = std::get<MatrixGameConfig>(dp.config);
                 return std::pair<double, std::string>{0.0, c.game_name.empty() ? "unnamed"
                                                                                : c.game_name};
             }},
        };
    case GameFamily::matrix_oneshot:
        return {
            {"Topology",
             [](const DecisionPoint& dp) {
                 const auto& c = std::get<MatrixGameConfig>(dp.config);
                 return std::pair<double, std::string>{
                     static_cast<double>(c.game.topology), topology_name(c.game.topology)};
             }},
        };
    case GameFamily::lottery:
        return {};
    }
    return {};
}

} // namespace

std::vector<ConfigSplit> config_parameter_split(std::span<const DecisionPoint> dps,
                                                GameFamily family) {
    std::vector<ConfigSplit> out;
    for (const ParamSpec& param : param_specs(family)) {
        std::map<std::pair<double, std::string>, std::vector<DecisionPoint>> buckets;
        for (const DecisionPoint& dp : dps) {
            if (dp.family != family)
                throw SchemaError(fmt::format("decision point '{}' is not in family '{}'", dp.id,
                                              family_name(family)));
            buckets[param.value(dp)].push_back(dp);
        }
        for (auto& [key, subset] : buckets)
            out.push_back({param.name, key.second, std::move(subset)});
    }
    return out;
}

// ---------------------------------------------------------------------------
// Size bins

const std::vector<SizeBin>& default_size_bins() {
    static const std::vector<SizeBin> bins = {
        {"<3B", 0.0, 3.0},
        {"3-14B", 3.0, 14.0},
        {">=14B", 14.0, std::numeric_limits<double>::infinity()},
    };
    return bins;
}

std::vector<SizeBinResult> size_bins(std::span<const FamilyPairResult> results,
                                     const std::vector<SizeBin>& bins, std::size_t resamples,
                                     double level, std::uint64_t seed) {
    std::vector<SizeBinResult> out;
    out.reserve(bins.size());
    for (const SizeBin& bin : bins) {
        std::vector<double> diffs;
        for (const FamilyPairResult& r : results) {
            if (!r.filter.included || !r.base_r || !r.aligned_r) continue;
            double size = r.pair.param_count_b;
            if (size >= bin.lo && size < bin.hi) diffs.push_back(*r.base_r - *r.aligned_r);
        }
        SizeBinResult row;
        row.label = bin.label;
        row.n = diffs.size();
        if (!diffs.empty()) {
            row.median = stats::median(diffs);
            auto [lo, hi] = stats::bootstrap_median_ci(diffs, resamples, level, seed);
            row.ci_lo = lo;
            row.ci_hi = hi;
        }
        out.push_back(std::move(row));
    }
    return out;
}

// ---------------------------------------------------------------------------
// Scatter data

std::vector<ScatterPoint> scatter_data(std::span<const FamilyPairResult> results) {
    std::vector<ScatterPoint> out;
    out.reserve(results.size());
    for (const FamilyPairResult& r : results)
        out.push_back({r.pair.pair_id, r.family, r.base_r, r.aligned_r, r.filter.included});
    std::sort(out.begin(), out.end(), [](const ScatterPoint& a, const ScatterPoint& b) {
        if (a.family != b.family) return a.family < b.family;
        return a.pair_id < b.pair_id;
    });
    return out;
}

} // namespace gamepred
