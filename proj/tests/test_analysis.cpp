#include <doctest.h>

#include <set>

#include "gamepred/analysis.hpp"
#include "gamepred/synth.hpp"

using namespace gamepred;

namespace {

DecisionPoint barg_dp(const std::string& id, int round, const std::string& human) {
    DecisionPoint dp;
    dp.id = id;
    dp.family = GameFamily::bargaining;
    BargainingConfig cfg;
    cfg.stakes = Money{10000, "USD"};
    dp.config = cfg;
    dp.round_index = round;
    dp.role = "responder";
    dp.decision_labels = {"accept", "reject"};
    dp.affirmative_label = "accept";
    dp.human_choice = human;
    return dp;
}

PredictionRecord record(const std::string& dp_id, const std::string& model, double p_affirm,
                        double total_mass) {
    PredictionRecord rec;
    rec.decision_point_id = dp_id;
    rec.model_id = model;
    rec.variant = "standard";
    rec.format = PromptFormat::standard;
    rec.label_masses.per_label["accept"] = p_affirm * total_mass;
    rec.label_masses.per_label["reject"] = (1.0 - p_affirm) * total_mass;
    rec.label_masses.total_mass = total_mass;
    rec.p_affirmative = total_mass > 0.0 ? std::optional<double>(p_affirm) : std::nullopt;
    return rec;
}

PairSpec pair_spec(int id, double params = 7.0) {
    return PairSpec{id, "base-m", "aligned-m", "lab", params};
}

FamilyPairResult made_result(int id, std::optional<double> base_r, std::optional<double> aligned_r,
                             double mass = 0.9, double params = 7.0,
                             GameFamily family = GameFamily::bargaining) {
    FamilyPairResult r;
    r.pair = pair_spec(id, params);
    r.family = family;
    r.base_r = base_r;
    r.aligned_r = aligned_r;
    r.base_mass = mass;
    r.aligned_mass = mass;
    r.filter = apply_filters(to_pair_stats(r), FilterConfig{});
    if (!r.filter.included)
        r.winner = Winner::excluded;
    else if (base_r == aligned_r)
        r.winner = Winner::tie;
    else {
        double b = base_r.value_or(-1e18), a = aligned_r.value_or(-1e18);
        r.winner = b > a ? Winner::base : Winner::aligned;
    }
    return r;
}

} // namespace

TEST_CASE("compare_pair correlates both sides and picks the winner") {
    std::vector<DecisionPoint> dps = {barg_dp("d1", 1, "accept"), barg_dp("d2", 1, "reject"),
                                      barg_dp("d3", 2, "accept"), barg_dp("d4", 2, "reject"),
                                      barg_dp("d5", 3, "accept"), barg_dp("d6", 3, "accept")};
    std::vector<PredictionRecord> base = {
        record("d1", "base-m", 0.9, 0.9),  record("d2", "base-m", 0.1, 0.9),
        record("d3", "base-m", 0.8, 0.9),  record("d4", "base-m", 0.2, 0.9),
        record("d5", "base-m", 0.95, 0.9), record("d6", "base-m", 0.85, 0.9)};
    std::vector<PredictionRecord> aligned = {
        record("d1", "aligned-m", 0.5, 0.85),  record("d2", "aligned-m", 0.52, 0.85),
        record("d3", "aligned-m", 0.47, 0.85), record("d4", "aligned-m", 0.5, 0.85),
        record("d5", "aligned-m", 0.53, 0.85), record("d6", "aligned-m", 0.44, 0.85)};

    FamilyPairResult res =
        compare_pair(pair_spec(1), GameFamily::bargaining, base, aligned, dps, FilterConfig{});
    REQUIRE(res.base_r.has_value());
    CHECK(*res.base_r > 0.9);
    CHECK(res.base_mass == doctest::Approx(0.9).epsilon(1e-12));
    CHECK(res.aligned_mass == doctest::Approx(0.85).epsilon(1e-12));
    CHECK(res.filter.included);
    CHECK(res.winner == Winner::base);
}

TEST_CASE("compare_pair throws when a model misses a decision point") {
    std::vector<DecisionPoint> dps = {barg_dp("d1", 1, "accept"), barg_dp("d2", 1, "reject")};
    std::vector<PredictionRecord> base = {record("d1", "base-m", 0.9, 0.9),
                                          record("d2", "base-m", 0.2, 0.9)};
    std::vector<PredictionRecord> aligned = {record("d1", "aligned-m", 0.4, 0.9)};
    CHECK_THROWS_AS((void)compare_pair(pair_spec(1), GameFamily::bargaining, base, aligned, dps,
                                       FilterConfig{}),
                    MissingDataError);
}

TEST_CASE("invalid records drop out of the correlation but drag the mean mass") {
    std::vector<DecisionPoint> dps = {barg_dp("d1", 1, "accept"), barg_dp("d2", 1, "reject"),
                                      barg_dp("d3", 1, "accept"), barg_dp("d4", 1, "reject")};
    std::vector<PredictionRecord> base = {
        record("d1", "base-m", 0.9, 0.8), record("d2", "base-m", 0.1, 0.8),
        record("d3", "base-m", 0.8, 0.8), record("d4", "base-m", 0.0, 0.0)}; // invalid
    std::vector<PredictionRecord> aligned = {
        record("d1", "aligned-m", 0.6, 0.8), record("d2", "aligned-m", 0.4, 0.8),
        record("d3", "aligned-m", 0.7, 0.8), record("d4", "aligned-m", 0.5, 0.8)};

    FamilyPairResult res =
        compare_pair(pair_spec(1), GameFamily::bargaining, base, aligned, dps, FilterConfig{});
    CHECK(res.base_mass == doctest::Approx(0.6).epsilon(1e-12)); // (3 * 0.8 + 0) / 4
    REQUIRE(res.base_r.has_value());
}

TEST_CASE("aggregate counts wins, exclusions, and runs both tests") {
    std::vector<FamilyPairResult> results = {
        made_result(1, 0.9, 0.4),  made_result(2, 0.8, 0.3), made_result(3, 0.7, 0.5),
        made_result(4, 0.85, 0.2), made_result(5, 0.3, 0.6),
        made_result(6, 0.9, 0.8, /*mass=*/0.5), // mass-excluded
    };
    AggregateRow row = aggregate_all(results, "unit");
    CHECK(row.group == "unit");
    CHECK(row.n_filtered == 5);
    CHECK(row.n_excluded == 1);
    CHECK(row.wins_base == 4);
    CHECK(row.wins_aligned == 1);
    REQUIRE(row.binomial_p.has_value());
    CHECK(*row.binomial_p == doctest::Approx(stats::binomial_one_sided(4, 5).p_value));
    CHECK(row.wilcoxon_p.has_value()); // exactly 5 paired diffs

    // Below 5 diffs the rank test is withheld.
    std::vector<FamilyPairResult> few(results.begin(), results.begin() + 4);
    AggregateRow small = aggregate_all(few, "small");
    CHECK_FALSE(small.wilcoxon_p.has_value());
    CHECK(small.binomial_p.has_value());

    // Ties are excluded from the win counts but remain filtered.
    std::vector<FamilyPairResult> with_tie = results;
    with_tie.push_back(made_result(7, 0.6, 0.6));
    AggregateRow tied = aggregate_all(with_tie, "tied");
    CHECK(tied.n_filtered == 6);
    CHECK(tied.wins_base == 4);
    CHECK(tied.wins_aligned == 1);
}

TEST_CASE("aggregate_by_family sorts and labels groups") {
    std::vector<FamilyPairResult> results = {
        made_result(1, 0.9, 0.4, 0.9, 7.0, GameFamily::lottery),
        made_result(2, 0.8, 0.3, 0.9, 7.0, GameFamily::bargaining),
        made_result(3, 0.2, 0.7, 0.9, 7.0, GameFamily::bargaining),
    };
    std::vector<AggregateRow> rows = aggregate_by_family(results);
    REQUIRE(rows.size() == 2);
    CHECK(rows[0].group == "bargaining");
    CHECK(rows[0].wins_base == 1);
    CHECK(rows[0].wins_aligned == 1);
    CHECK(rows[1].group == "lottery");
    CHECK(rows[1].wins_base == 1);
}

TEST_CASE("round splits partition the corpus") {
    std::vector<DecisionPoint> dps = {barg_dp("r1", 1, "accept"), barg_dp("r2", 2, "accept"),
                                      barg_dp("r3", 3, "reject"), barg_dp("r5", 5, "accept"),
                                      barg_dp("r8", 8, "reject"), barg_dp("r10", 10, "accept")};

    std::vector<RoundSplit> fvr = round_split(dps, RoundSplitMode::first_vs_rest);
    REQUIRE(fvr.size() == 2);
    CHECK(fvr[0].label == "round=1");
    CHECK(fvr[0].subset.size() == 1);
    CHECK(fvr[1].label == "round>=2");
    CHECK(fvr[1].subset.size() == 5);

    std::vector<RoundSplit> phases = round_split(dps, RoundSplitMode::matrix_phases);
    REQUIRE(phases.size() == 3);
    CHECK(phases[0].label == "early (1-3)");
    CHECK(phases[0].subset.size() == 3);
    CHECK(phases[1].label == "mid (4-7)");
    CHECK(phases[1].subset.size() == 1);
    CHECK(phases[2].label == "late (8-10)");
    CHECK(phases[2].subset.size() == 2);
}

TEST_CASE("config splits partition each parameter's values") {
    synth::CorpusSpec spec;
    spec.bargaining = 40;
    std::vector<DecisionPoint> dps = synth::make_family(GameFamily::bargaining, spec);
    REQUIRE(dps.size() == 40);

    std::vector<ConfigSplit> splits = config_parameter_split(dps, GameFamily::bargaining);
    REQUIRE_FALSE(splits.empty());
    std::map<std::string, std::size_t> per_parameter;
    std::map<std::string, std::set<std::string>> values;
    for (const ConfigSplit& s : splits) {
        CHECK_FALSE(s.subset.empty());
        per_parameter[s.parameter] += s.subset.size();
        CHECK(values[s.parameter].insert(s.value).second); // distinct values
    }
    for (const auto& [parameter, covered] : per_parameter) CHECK(covered == dps.size());
    CHECK(per_parameter.count("Stakes"));
}

TEST_CASE("size bins bucket pairs by parameter count with bootstrap intervals") {
    std::vector<FamilyPairResult> results = {
        made_result(1, 0.9, 0.5, 0.9, 1.3),  made_result(2, 0.85, 0.5, 0.9, 1.3),
        made_result(3, 0.8, 0.5, 0.9, 7.0),  made_result(4, 0.75, 0.45, 0.9, 13.0),
        made_result(5, 0.9, 0.4, 0.9, 30.0), made_result(6, 0.7, 0.2, 0.5, 30.0), // excluded
    };
    std::vector<SizeBinResult> bins = size_bins(results, default_size_bins(), 1000, 0.95, 7);
    REQUIRE(bins.size() == 3);
    CHECK(bins[0].n == 2); // <3B
    CHECK(bins[1].n == 2); // 3-14B
    CHECK(bins[2].n == 1); // >=14B (the excluded pair is skipped)
    REQUIRE(bins[0].median.has_value());
    CHECK(*bins[0].median == doctest::Approx((0.4 + 0.35) / 2.0).epsilon(1e-12));
    REQUIRE(bins[2].median.has_value());
    CHECK(*bins[2].median == doctest::Approx(0.5).epsilon(1e-12));
    CHECK(*bins[2].ci_lo == doctest::Approx(0.5)); // single-pair bin degenerates
    CHECK(*bins[2].ci_hi == doctest::Approx(0.5));

    std::vector<FamilyPairResult> none;
    std::vector<SizeBinResult> empty_bins = size_bins(none, default_size_bins(), 100, 0.95, 7);
    for (const SizeBinResult& b : empty_bins) {
        CHECK(b.n == 0);
        CHECK_FALSE(b.median.has_value());
    }
}

TEST_CASE("scatter points come out sorted with exclusion flags") {
    std::vector<FamilyPairResult> results = {
        made_result(2, 0.9, 0.5, 0.9, 7.0, GameFamily::lottery),
        made_result(1, 0.8, 0.3, 0.9, 7.0, GameFamily::lottery),
        made_result(3, 0.7, 0.2, 0.5, 7.0, GameFamily::bargaining), // excluded
    };
    std::vector<ScatterPoint> pts = scatter_data(results);
    REQUIRE(pts.size() == 3);
    CHECK(pts[0].family == GameFamily::bargaining);
    CHECK_FALSE(pts[0].included);
    CHECK(pts[1].pair_id == 1);
    CHECK(pts[2].pair_id == 2);
    CHECK(pts[1].included);
}
