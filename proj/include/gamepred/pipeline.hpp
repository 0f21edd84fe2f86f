#pragma once

// Orchestration layer: run configuration, prediction fetching with resume,
// report-bundle emission (aggregates, variant and config-robustness tables,
// size bins, sensitivity grids, equilibrium alignment), and text mirrors.
//
// Determinism contract: with the mock backend, a fixed config and seed
// produce byte-identical report bundles, and every emitted number is
// recomputable from the persisted prediction records alone.

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "gamepred/analysis.hpp"
#include "gamepred/filters.hpp"
#include "gamepred/game_model.hpp"
#include "gamepred/prompt.hpp"
#include "gamepred/provider.hpp"

namespace gamepred {

// Which prompt format each side of a pair receives. "native" is the headline
// condition: base models see the plain completion format, aligned models see
// their own chat template. The other two are control crossings.
enum class Crossing { native, both_plain, both_chat };

const char* crossing_name(Crossing c);
Crossing parse_crossing(const std::string& name);

struct SensitivitySettings {
    std::vector<ThresholdLevel> mass_levels; // empty = module defaults
    std::vector<ThresholdLevel> corr_levels;
};

struct RunConfig {
    std::map<GameFamily, std::string> datasets; // family -> JSONL path
    std::string pair_registry;
    std::string template_dir;
    std::string provider = "mock"; // "mock" | "http"
    EndpointConfig endpoint;       // consulted when provider == "http"
    int top_k = kDefaultTopK;
    FilterConfig filters;
    std::vector<std::string> variants = {"standard"};
    // Families that receive the non-baseline variant sweep; the baseline
    // variant always runs for every family present in `datasets`.
    std::vector<GameFamily> variant_families = {
        GameFamily::bargaining, GameFamily::negotiation, GameFamily::persuasion};
    Crossing crossing = Crossing::native;
    std::uint64_t seed = 0;
    std::string output_dir = "out";
    std::string cache_dir; // empty = <output_dir>/cache
    int concurrency = 1;
    SensitivitySettings sensitivity;
    std::vector<SizeBin> size_bins; // empty = module defaults
    std::size_t bootstrap_resamples = 5000;
    double bootstrap_level = 0.95;

    // Parses a JSON config file; relative paths are resolved against the
    // config file's directory. Throws ConfigError on malformed input.
    static RunConfig load(const std::string& path);

    json to_json() const;

    // Hash over the semantic settings only -- filesystem locations are
    // excluded so the same analysis written to two different directories
    // yields identical report bytes.
    std::string config_hash() const;
};

// Structural checks: referenced paths exist, datasets parse and validate,
// registry is consistent, and every aligned model that will be prompted in
// chat format has a template. Returns one message per violation (empty =
// clean).
std::vector<std::string> validate_run(const RunConfig& cfg);

// Optional restriction of the fetching pass.
struct PredictScope {
    std::optional<GameFamily> family;
    std::vector<std::string> models; // empty = all models in the registry
    std::optional<std::string> variant;
    std::optional<PromptFormat> format;
};

struct PredictSummary {
    std::size_t conditions = 0;      // (family, pair, side, variant) units
    std::size_t records_written = 0;
    std::size_t fetched = 0;         // fetched this run (cache misses included)
    std::size_t reused = 0;          // valid records already on disk
    std::size_t failures = 0;        // records that ultimately failed
    std::vector<std::string> failure_messages; // capped sample
};

// Fetches one record per (pair side, variant, decision point) in scope and
// persists them under <output_dir>/predictions. Resumable: records already
// on disk are kept. A capability probe runs once per model before the batch
// when the backend is HTTP.
PredictSummary run_predict(const RunConfig& cfg, const PredictScope& scope = {});

// Emits the full report bundle under <output_dir>/report. Each table is
// written as JSON plus an aligned plain-text mirror; every file carries the
// config hash and seed. Missing prediction files raise MissingDataError.
void run_evaluate(const RunConfig& cfg);

// Threshold-sweep grids only (subset of the evaluate bundle).
void run_sensitivity(const RunConfig& cfg);

// Equilibrium-alignment tables only (subset of the evaluate bundle).
void run_ne(const RunConfig& cfg);

// Re-renders the plain-text mirrors from the JSON tables already on disk,
// without recomputing anything.
void run_report(const RunConfig& cfg);

// --- layout helpers shared by the CLI and tests -----------------------------

// <output_dir>/predictions/<family>/pair<id>-<side>@<variant>@<format>.jsonl
std::string predictions_path(const RunConfig& cfg, GameFamily family, const PairSpec& pair,
                             stats::Direction side, const std::string& variant,
                             PromptFormat format);

std::string report_dir(const RunConfig& cfg);

// Prompt format assigned to one side of a pair under a crossing.
PromptFormat side_format(Crossing crossing, stats::Direction side);

} // namespace gamepred
