#include "gamepred/pipeline.hpp"

#include <fmt/format.h>

#include <algorithm>
#include <atomic>
#include <cmath>
#include <filesystem>
#include <mutex>
#include <set>
#include <thread>

#include "gamepred/equilibrium.hpp"
#include "gamepred/errors.hpp"
#include "gamepred/predictor.hpp"
#include "gamepred/stats.hpp"
#include "gamepred/util.hpp"

namespace gamepred {

namespace fs = std::filesystem;

const char* crossing_name(Crossing c) {
    switch (c) {
    case Crossing::native: return "native";
    case Crossing::both_plain: return "both-plain";
    case Crossing::both_chat: return "both-chat";
    }
    return "native";
}

Crossing parse_crossing(const std::string& name) {
    if (name == "native") return Crossing::native;
    if (name == "both-plain") return Crossing::both_plain;
    if (name == "both-chat") return Crossing::both_chat;
    throw ConfigError(fmt::format("unknown format crossing '{}'", name));
}

PromptFormat side_format(Crossing crossing, stats::Direction side) {
    switch (crossing) {
    case Crossing::both_plain: return PromptFormat::standard;
    case Crossing::both_chat: return PromptFormat::chat;
    case Crossing::native:
        return side == stats::Direction::base ? PromptFormat::standard : PromptFormat::chat;
    }
    return PromptFormat::standard;
}

// ---------------------------------------------------------------------------
// RunConfig

namespace {

json threshold_to_json(const ThresholdLevel& t) { return t ? json(*t) : json(nullptr); }

ThresholdLevel threshold_from_json(const json& j) {
    return j.is_null() ? ThresholdLevel{} : ThresholdLevel{j.get<double>()};
}

json levels_to_json(const std::vector<ThresholdLevel>& levels) {
    json out = json::array();
    for (const auto& l : levels) out.push_back(threshold_to_json(l));
    return out;
}

std::vector<ThresholdLevel> levels_from_json(const json& j, const char* field) {
    if (!j.is_array()) throw ConfigError(fmt::format("field '{}' must be an array", field));
    std::vector<ThresholdLevel> out;
    for (const json& e : j) out.push_back(threshold_from_json(e));
    return out;
}

json size_bins_to_json(const std::vector<SizeBin>& bins) {
    json out = json::array();
    for (const SizeBin& b : bins)
        out.push_back({{"label", b.label},
                       {"lo", b.lo},
                       {"hi", std::isinf(b.hi) ? json(nullptr) : json(b.hi)}});
    return out;
}

std::vector<SizeBin> size_bins_from_json(const json& j) {
    std::vector<SizeBin> out;
    for (const json& e : j) {
        SizeBin b;
        b.label = e.at("label").get<std::string>();
        b.lo = e.at("lo").get<double>();
        b.hi = e.at("hi").is_null() ? std::numeric_limits<double>::infinity()
                                    : e.at("hi").get<double>();
        out.push_back(std::move(b));
    }
    return out;
}

std::string resolve_path(const fs::path& base, const std::string& p) {
    if (p.empty()) return p;
    fs::path path(p);
    if (path.is_absolute()) return path.lexically_normal().string();
    return (base / path).lexically_normal().string();
}

const std::vector<ThresholdLevel>& mass_levels_of(const RunConfig& cfg) {
    return cfg.sensitivity.mass_levels.empty() ? default_mass_levels()
                                               : cfg.sensitivity.mass_levels;
}

const std::vector<ThresholdLevel>& corr_levels_of(const RunConfig& cfg) {
    return cfg.sensitivity.corr_levels.empty() ? default_corr_levels()
                                               : cfg.sensitivity.corr_levels;
}

const std::vector<SizeBin>& size_bins_of(const RunConfig& cfg) {
    return cfg.size_bins.empty() ? default_size_bins() : cfg.size_bins;
}

} // namespace

json RunConfig::to_json() const {
    json datasets_json = json::object();
    for (const auto& [family, path] : datasets) datasets_json[family_name(family)] = path;
    json families_json = json::array();
    for (GameFamily f : variant_families) families_json.push_back(family_name(f));
    return json{
        {"datasets", datasets_json},
        {"pair_registry", pair_registry},
        {"template_dir", template_dir},
        {"provider", provider},
        {"endpoint",
         {{"base_url", endpoint.base_url},
          {"completions_path", endpoint.completions_path},
          {"credential_env", endpoint.credential_env},
          {"max_attempts", endpoint.max_attempts},
          {"timeout_seconds", endpoint.timeout_seconds},
          {"connect_timeout_seconds", endpoint.connect_timeout_seconds},
          {"retry_backoff_ms", endpoint.retry_backoff_ms}}},
        {"top_k", top_k},
        {"filters",
         {{"mass_threshold", filters.mass_threshold},
          {"min_corr_threshold", filters.min_corr_threshold}}},
        {"variants", variants},
        {"variant_families", families_json},
        {"crossing", crossing_name(crossing)},
        {"seed", seed},
        {"output_dir", output_dir},
        {"cache_dir", cache_dir},
        {"concurrency", concurrency},
        {"sensitivity",
         {{"mass_levels", levels_to_json(sensitivity.mass_levels)},
          {"corr_levels", levels_to_json(sensitivity.corr_levels)}}},
        {"size_bins", size_bins_to_json(size_bins)},
        {"bootstrap_resamples", bootstrap_resamples},
        {"bootstrap_level", bootstrap_level},
    };
}

RunConfig RunConfig::load(const std::string& path) {
    json j;
    try {
        j = json::parse(read_text_file(path));
    } catch (const json::exception& e) {
        throw ConfigError(fmt::format("{}: not valid JSON: {}", path, e.what()));
    }
    if (!j.is_object()) throw ConfigError(fmt::format("{}: config root must be an object", path));

    static const std::set<std::string> known = {
        "datasets",    "pair_registry", "template_dir", "provider",
        "endpoint",    "top_k",         "filters",      "variants",
        "variant_families", "crossing", "seed",         "output_dir",
        "cache_dir",   "concurrency",   "sensitivity",  "size_bins",
        "bootstrap_resamples", "bootstrap_level"};
    for (const auto& [key, value] : j.items())
        if (!known.count(key))
            throw ConfigError(fmt::format("{}: unknown config field '{}'", path, key));

    RunConfig cfg;
    try {
        if (j.contains("datasets"))
            for (const auto& [name, value] : j.at("datasets").items())
                cfg.datasets[parse_family(name)] = value.get<std::string>();
        if (j.contains("pair_registry")) cfg.pair_registry = j.at("pair_registry").get<std::string>();
        if (j.contains("template_dir")) cfg.template_dir = j.at("template_dir").get<std::string>();
        if (j.contains("provider")) cfg.provider = j.at("provider").get<std::string>();
        if (j.contains("endpoint")) {
            const json& e = j.at("endpoint");
            if (e.contains("base_url")) cfg.endpoint.base_url = e.at("base_url").get<std::string>();
            if (e.contains("completions_path"))
                cfg.endpoint.completions_path = e.at("completions_path").get<std::string>();
            if (e.contains("credential_env"))
                cfg.endpoint.credential_env = e.at("credential_env").get<std::string>();
            if (e.contains("max_attempts")) cfg.endpoint.max_attempts = e.at("max_attempts").get<int>();
            if (e.contains("timeout_seconds"))
                cfg.endpoint.timeout_seconds = e.at("timeout_seconds").get<int>();
            if (e.contains("connect_timeout_seconds"))
                cfg.endpoint.connect_timeout_seconds = e.at("connect_timeout_seconds").get<int>();
            if (e.contains("retry_backoff_ms"))
                cfg.endpoint.retry_backoff_ms = e.at("retry_backoff_ms").get<int>();
        }
        if (j.contains("top_k")) cfg.top_k = j.at("top_k").get<int>();
        if (j.contains("filters")) {
            const json& f = j.at("filters");
            if (f.contains("mass_threshold"))
                cfg.filters.mass_threshold = f.at("mass_threshold").get<double>();
            if (f.contains("min_corr_threshold"))
                cfg.filters.min_corr_threshold = f.at("min_corr_threshold").get<double>();
        }
        if (j.contains("variants")) cfg.variants = j.at("variants").get<std::vector<std::string>>();
        if (j.contains("variant_families")) {
            cfg.variant_families.clear();
            for (const json& e : j.at("variant_families"))
                cfg.variant_families.push_back(parse_family(e.get<std::string>()));
        }
        if (j.contains("crossing")) cfg.crossing = parse_crossing(j.at("crossing").get<std::string>());
        if (j.contains("seed")) cfg.seed = j.at("seed").get<std::uint64_t>();
        if (j.contains("output_dir")) cfg.output_dir = j.at("output_dir").get<std::string>();
        if (j.contains("cache_dir")) cfg.cache_dir = j.at("cache_dir").get<std::string>();
        if (j.contains("concurrency")) cfg.concurrency = j.at("concurrency").get<int>();
        if (j.contains("sensitivity")) {
            const json& s = j.at("sensitivity");
            if (s.contains("mass_levels"))
                cfg.sensitivity.mass_levels = levels_from_json(s.at("mass_levels"), "mass_levels");
            if (s.contains("corr_levels"))
                cfg.sensitivity.corr_levels = levels_from_json(s.at("corr_levels"), "corr_levels");
        }
        if (j.contains("size_bins")) cfg.size_bins = size_bins_from_json(j.at("size_bins"));
        if (j.contains("bootstrap_resamples"))
            cfg.bootstrap_resamples = j.at("bootstrap_resamples").get<std::size_t>();
        if (j.contains("bootstrap_level")) cfg.bootstrap_level = j.at("bootstrap_level").get<double>();
    } catch (const json::exception& e) {
        throw ConfigError(fmt::format("{}: {}", path, e.what()));
    }

    fs::path base = fs::path(path).parent_path();
    for (auto& [family, dataset_path] : cfg.datasets) dataset_path = resolve_path(base, dataset_path);
    cfg.pair_registry = resolve_path(base, cfg.pair_registry);
    cfg.template_dir = resolve_path(base, cfg.template_dir);
    cfg.output_dir = resolve_path(base, cfg.output_dir);
    cfg.cache_dir = resolve_path(base, cfg.cache_dir);
    return cfg;
}

std::string RunConfig::config_hash() const {
    // Semantic settings only: two runs that differ solely in where files live
    // must hash identically so their report bytes match.
    std::vector<std::string> families;
    for (GameFamily f : variant_families) families.push_back(family_name(f));
    std::sort(families.begin(), families.end());
    json canonical{
        {"provider", provider},
        {"top_k", top_k},
        {"filters",
         {{"mass_threshold", filters.mass_threshold},
          {"min_corr_threshold", filters.min_corr_threshold}}},
        {"variants", variants},
        {"variant_families", families},
        {"crossing", crossing_name(crossing)},
        {"seed", seed},
        {"sensitivity",
         {{"mass_levels", levels_to_json(mass_levels_of(*this))},
          {"corr_levels", levels_to_json(corr_levels_of(*this))}}},
        {"size_bins", size_bins_to_json(size_bins_of(*this))},
        {"bootstrap_resamples", bootstrap_resamples},
        {"bootstrap_level", bootstrap_level},
    };
    return sha256_hex(canonical.dump());
}

// ---------------------------------------------------------------------------
// Shared context

namespace {

const char* side_name(stats::Direction side) {
    return side == stats::Direction::base ? "base" : "aligned";
}

struct RunContext {
    RunConfig cfg;
    std::map<GameFamily, std::vector<DecisionPoint>> corpora;
    std::vector<PairSpec> pairs; // sorted by pair_id
};

RunContext load_context(const RunConfig& cfg) {
    RunContext ctx;
    ctx.cfg = cfg;
    if (cfg.datasets.empty()) throw ConfigError("config lists no datasets");
    for (const auto& [family, path] : cfg.datasets)
        ctx.corpora[family] = load_dataset(path, family);
    ctx.pairs = load_pair_registry(cfg.pair_registry);
    std::sort(ctx.pairs.begin(), ctx.pairs.end(),
              [](const PairSpec& a, const PairSpec& b) { return a.pair_id < b.pair_id; });
    return ctx;
}

const std::string& model_of(const PairSpec& pair, stats::Direction side) {
    return side == stats::Direction::base ? pair.base_model_id : pair.aligned_model_id;
}

bool family_in(const std::vector<GameFamily>& families, GameFamily f) {
    return std::find(families.begin(), families.end(), f) != families.end();
}

// The baseline variant always runs; non-baseline variants only for the
// configured sweep families.
std::vector<std::string> variants_for_family(const RunConfig& cfg, GameFamily family) {
    std::vector<std::string> out;
    for (const std::string& name : cfg.variants) {
        const PromptVariant& v = variant_by_name(name);
        if (v.cluster == VariantCluster::baseline || family_in(cfg.variant_families, family))
            out.push_back(name);
    }
    return out;
}

std::string cache_dir_of(const RunConfig& cfg) {
    return cfg.cache_dir.empty() ? (fs::path(cfg.output_dir) / "cache").string() : cfg.cache_dir;
}

std::shared_ptr<LogprobProvider> make_provider(const RunConfig& cfg) {
    std::shared_ptr<LogprobProvider> inner;
    if (cfg.provider == "mock")
        inner = std::make_shared<MockProvider>();
    else if (cfg.provider == "http")
        inner = std::make_shared<HttpProvider>(cfg.endpoint);
    else
        throw ConfigError(fmt::format("unknown provider '{}' (expected mock or http)", cfg.provider));
    return std::make_shared<CachingProvider>(std::move(inner), cache_dir_of(cfg));
}

} // namespace

std::string predictions_path(const RunConfig& cfg, GameFamily family, const PairSpec& pair,
                             stats::Direction side, const std::string& variant,
                             PromptFormat format) {
    return (fs::path(cfg.output_dir) / "predictions" / family_name(family) /
            fmt::format("pair{}-{}@{}@{}.jsonl", pair.pair_id, side_name(side), variant,
                        format_name(format)))
        .string();
}

std::string report_dir(const RunConfig& cfg) {
    return (fs::path(cfg.output_dir) / "report").string();
}

// ---------------------------------------------------------------------------
// Validation

std::vector<std::string> validate_run(const RunConfig& cfg) {
    std::vector<std::string> problems;
    auto add = [&](std::string msg) { problems.push_back(std::move(msg)); };

    if (cfg.datasets.empty()) add("config: no datasets configured");
    for (const auto& [family, path] : cfg.datasets) {
        if (!fs::exists(path)) {
            add(fmt::format("dataset {}: file '{}' does not exist", family_name(family), path));
            continue;
        }
        try {
            auto dps = load_dataset(path, family);
            std::string manifest = manifest_path_for(path);
            if (fs::exists(manifest)) {
                DatasetManifest m = load_manifest(manifest);
                if (m.count != dps.size())
                    add(fmt::format("dataset {}: manifest says {} records, file has {}",
                                    family_name(family), m.count, dps.size()));
                if (m.family != family)
                    add(fmt::format("dataset {}: manifest family is {}", family_name(family),
                                    family_name(m.family)));
            }
        } catch (const std::exception& e) {
            add(fmt::format("dataset {}: {}", family_name(family), e.what()));
        }
    }

    std::vector<PairSpec> pairs;
    if (cfg.pair_registry.empty()) {
        add("config: pair_registry not set");
    } else if (!fs::exists(cfg.pair_registry)) {
        add(fmt::format("registry: file '{}' does not exist", cfg.pair_registry));
    } else {
        try {
            pairs = load_pair_registry(cfg.pair_registry);
        } catch (const std::exception& e) {
            add(fmt::format("registry: {}", e.what()));
        }
    }

    if (cfg.provider != "mock" && cfg.provider != "http")
        add(fmt::format("config: unknown provider '{}'", cfg.provider));
    if (cfg.concurrency < 1) add("config: concurrency must be >= 1");
    if (cfg.top_k < 1) add("config: top_k must be >= 1");
    if (!(cfg.bootstrap_level > 0.0 && cfg.bootstrap_level < 1.0))
        add("config: bootstrap_level must lie in (0, 1)");
    if (cfg.filters.mass_threshold < 0.0 || cfg.filters.mass_threshold > 1.0)
        add("config: mass_threshold must lie in [0, 1]");

    if (cfg.variants.empty()) add("config: variants list is empty");
    bool has_baseline = false;
    for (const std::string& name : cfg.variants) {
        try {
            if (variant_by_name(name).cluster == VariantCluster::baseline) has_baseline = true;
        } catch (const std::exception& e) {
            add(fmt::format("config: {}", e.what()));
        }
    }
    if (!cfg.variants.empty() && !has_baseline)
        add("config: variants must include the baseline variant 'standard'");
    for (GameFamily f : cfg.variant_families)
        if (f != GameFamily::bargaining && f != GameFamily::negotiation &&
            f != GameFamily::persuasion)
            add(fmt::format("config: variant_families entry {} is not a dialogue family",
                            family_name(f)));

    auto check_levels = [&](const std::vector<ThresholdLevel>& levels, const char* which) {
        double prev = -1.0;
        bool seen_value = false;
        for (const auto& l : levels) {
            if (!l) {
                if (seen_value) add(fmt::format("config: {} 'none' level must come first", which));
                continue;
            }
            if (*l < 0.0 || *l > 1.0)
                add(fmt::format("config: {} level {} outside [0, 1]", which, *l));
            if (seen_value && *l <= prev)
                add(fmt::format("config: {} levels must be strictly increasing", which));
            prev = *l;
            seen_value = true;
        }
    };
    check_levels(mass_levels_of(cfg), "sensitivity mass");
    check_levels(corr_levels_of(cfg), "sensitivity correlation");

    for (const SizeBin& b : size_bins_of(cfg)) {
        if (b.label.empty()) add("config: size bin with empty label");
        if (!(b.lo < b.hi)) add(fmt::format("size bin '{}': lo must be < hi", b.label));
    }

    // Every pair whose sides can be prompted in chat format needs the aligned
    // model's template on disk.
    bool chat_used = cfg.crossing != Crossing::both_plain;
    if (chat_used)
        for (const PairSpec& pair : pairs) {
            std::string path = chat_template_path(cfg.template_dir, pair.aligned_model_id);
            if (!fs::exists(path))
                add(fmt::format("template: no chat template for aligned model '{}' (expected {})",
                                pair.aligned_model_id, path));
            else {
                try {
                    load_chat_template(path);
                } catch (const std::exception& e) {
                    add(fmt::format("template '{}': {}", path, e.what()));
                }
            }
        }

    return problems;
}

// ---------------------------------------------------------------------------
// Prediction fetching

namespace {

struct Condition {
    GameFamily family;
    const PairSpec* pair;
    stats::Direction side;
    std::string variant;
    PromptFormat format;
};

std::vector<Condition> enumerate_conditions(const RunContext& ctx, const PredictScope& scope) {
    std::vector<Condition> out;
    for (const auto& [family, dps] : ctx.corpora) {
        if (scope.family && *scope.family != family) continue;
        for (const std::string& variant : variants_for_family(ctx.cfg, family)) {
            if (scope.variant && *scope.variant != variant) continue;
            for (const PairSpec& pair : ctx.pairs)
                for (stats::Direction side : {stats::Direction::base, stats::Direction::aligned}) {
                    const std::string& model = model_of(pair, side);
                    if (!scope.models.empty() &&
                        std::find(scope.models.begin(), scope.models.end(), model) ==
                            scope.models.end())
                        continue;
                    PromptFormat format = side_format(ctx.cfg.crossing, side);
                    if (scope.format && *scope.format != format) continue;
                    out.push_back(Condition{family, &pair, side, variant, format});
                }
        }
    }
    return out;
}

} // namespace

PredictSummary run_predict(const RunConfig& cfg, const PredictScope& scope) {
    RunContext ctx = load_context(cfg);
    std::vector<Condition> conditions = enumerate_conditions(ctx, scope);

    if (cfg.provider == "http") {
        // Fail fast on an endpoint that cannot return logprobs, before any
        // batch work starts.
        HttpProvider probe(cfg.endpoint);
        std::set<std::string> models;
        for (const Condition& c : conditions) models.insert(model_of(*c.pair, c.side));
        for (const std::string& model : models) probe.check_capability(model);
    }

    std::shared_ptr<LogprobProvider> provider = make_provider(cfg);
    PredictSummary summary;

    for (const Condition& cond : conditions) {
        ++summary.conditions;
        const std::vector<DecisionPoint>& dps = ctx.corpora.at(cond.family);
        const std::string& model = model_of(*cond.pair, cond.side);
        std::string path =
            predictions_path(cfg, cond.family, *cond.pair, cond.side, cond.variant, cond.format);

        std::map<std::string, PredictionRecord> existing;
        if (fs::exists(path))
            for (PredictionRecord& rec : load_predictions(path))
                if (rec.model_id == model && rec.variant == cond.variant &&
                    rec.format == cond.format)
                    existing.emplace(rec.decision_point_id, std::move(rec));

        std::optional<ChatTemplateSpec> tmpl;
        if (cond.format == PromptFormat::chat)
            tmpl = load_chat_template(
                chat_template_path(cfg.template_dir, cond.pair->aligned_model_id));

        const PromptVariant& variant = variant_by_name(cond.variant);
        std::vector<std::optional<PredictionRecord>> slots(dps.size());
        std::vector<std::size_t> missing;
        for (std::size_t i = 0; i < dps.size(); ++i) {
            auto it = existing.find(dps[i].id);
            if (it != existing.end()) {
                slots[i] = it->second;
                ++summary.reused;
            } else {
                missing.push_back(i);
            }
        }

        std::atomic<std::size_t> cursor{0};
        std::atomic<std::size_t> failures{0};
        std::mutex failure_mutex;
        auto worker = [&]() {
            while (true) {
                std::size_t j = cursor.fetch_add(1);
                if (j >= missing.size()) break;
                std::size_t i = missing[j];
                try {
                    RenderedPrompt prompt = build_prompt(dps[i], variant, cond.format,
                                                         tmpl ? &*tmpl : nullptr,
                                                         /*allow_any_family=*/true);
                    TokenDistribution dist =
                        provider->fetch_next_token_logprobs(model, prompt, cfg.top_k);
                    LabelMass masses = match_decision_tokens(
                        dist, prompt.expected_labels, default_alias_table(prompt.expected_labels));
                    slots[i] = make_prediction(dps[i], prompt, model, masses);
                } catch (const std::exception& e) {
                    failures.fetch_add(1);
                    std::lock_guard<std::mutex> lock(failure_mutex);
                    if (summary.failure_messages.size() < 10)
                        summary.failure_messages.push_back(
                            fmt::format("{} [{}]: {}", dps[i].id, model, e.what()));
                }
            }
        };

        std::size_t thread_count = std::min<std::size_t>(
            std::max(1, cfg.concurrency), std::max<std::size_t>(missing.size(), 1));
        if (thread_count <= 1) {
            worker();
        } else {
            std::vector<std::thread> pool;
            pool.reserve(thread_count);
            for (std::size_t t = 0; t < thread_count; ++t) pool.emplace_back(worker);
            for (std::thread& t : pool) t.join();
        }

        summary.failures += failures.load();
        summary.fetched += missing.size() - failures.load();

        std::vector<PredictionRecord> records;
        records.reserve(dps.size());
        for (std::optional<PredictionRecord>& slot : slots)
            if (slot) records.push_back(std::move(*slot));
        summary.records_written += records.size();
        save_predictions(path, records);
    }
    return summary;
}

// ---------------------------------------------------------------------------
// Evaluation

namespace {

struct PairRecords {
    std::vector<PredictionRecord> base;
    std::vector<PredictionRecord> aligned;
};

std::vector<PredictionRecord> must_load_records(const RunConfig& cfg, GameFamily family,
                                                const PairSpec& pair, stats::Direction side,
                                                const std::string& variant) {
    std::string path =
        predictions_path(cfg, family, pair, side, variant, side_format(cfg.crossing, side));
    if (!fs::exists(path))
        throw MissingDataError(
            fmt::format("no predictions at {} (run the predict stage first)", path));
    return load_predictions(path);
}

struct Headline {
    // Baseline-variant comparison per family, pairs in registry order.
    std::map<GameFamily, std::vector<FamilyPairResult>> results;
    std::map<GameFamily, std::map<int, PairRecords>> records;
    std::vector<FamilyPairResult> all; // flattened, family-major
};

std::string baseline_variant(const RunConfig& cfg) {
    for (const std::string& name : cfg.variants)
        if (variant_by_name(name).cluster == VariantCluster::baseline) return name;
    throw ConfigError("variants must include the baseline variant 'standard'");
}

Headline compute_headline(const RunContext& ctx) {
    Headline out;
    std::string baseline = baseline_variant(ctx.cfg);
    for (const auto& [family, dps] : ctx.corpora) {
        std::vector<FamilyPairResult> results(ctx.pairs.size());
        std::vector<PairRecords> records(ctx.pairs.size());
        std::atomic<std::size_t> cursor{0};
        std::exception_ptr error;
        std::mutex error_mutex;
        auto worker = [&]() {
            while (true) {
                std::size_t i = cursor.fetch_add(1);
                if (i >= ctx.pairs.size()) break;
                try {
                    const PairSpec& pair = ctx.pairs[i];
                    PairRecords recs;
                    recs.base = must_load_records(ctx.cfg, family, pair, stats::Direction::base,
                                                  baseline);
                    recs.aligned = must_load_records(ctx.cfg, family, pair,
                                                     stats::Direction::aligned, baseline);
                    results[i] = compare_pair(pair, family, recs.base, recs.aligned, dps,
                                              ctx.cfg.filters);
                    records[i] = std::move(recs);
                } catch (...) {
                    std::lock_guard<std::mutex> lock(error_mutex);
                    if (!error) error = std::current_exception();
                }
            }
        };
        std::size_t thread_count = std::min<std::size_t>(std::max(1, ctx.cfg.concurrency),
                                                         std::max<std::size_t>(ctx.pairs.size(), 1));
        if (thread_count <= 1) {
            worker();
        } else {
            std::vector<std::thread> pool;
            for (std::size_t t = 0; t < thread_count; ++t) pool.emplace_back(worker);
            for (std::thread& t : pool) t.join();
        }
        if (error) std::rethrow_exception(error);
        for (std::size_t i = 0; i < ctx.pairs.size(); ++i) {
            out.records[family].emplace(ctx.pairs[i].pair_id, std::move(records[i]));
            out.all.push_back(results[i]);
        }
        out.results[family] = std::move(results);
    }
    return out;
}

// Re-compares every pair over a corpus subset, re-applying the filters.
std::vector<FamilyPairResult> compare_subset(const RunContext& ctx, const Headline& headline,
                                             GameFamily family,
                                             std::span<const DecisionPoint> dps) {
    std::vector<FamilyPairResult> out;
    for (const PairSpec& pair : ctx.pairs) {
        const PairRecords& recs = headline.records.at(family).at(pair.pair_id);
        out.push_back(compare_pair(pair, family, recs.base, recs.aligned, dps, ctx.cfg.filters));
    }
    return out;
}

// --- formatting helpers ------------------------------------------------------

std::string fmt_r(const json& v) {
    return v.is_null() ? "n/a" : fmt::format("{:.4f}", v.get<double>());
}

std::string fmt_mass(const json& v) {
    return v.is_null() ? "n/a" : fmt::format("{:.3f}", v.get<double>());
}

std::string fmt_p(const json& v) {
    return v.is_null() ? "n/a" : fmt::format("{:.3e}", v.get<double>());
}

std::string fmt_count(const json& v) { return fmt::format("{}", v.get<std::size_t>()); }

std::string threshold_label(const json& v) {
    return v.is_null() ? "none" : fmt::format("{:g}", v.get<double>());
}

std::string table_text(const std::vector<std::string>& headers,
                       const std::vector<std::vector<std::string>>& rows) {
    std::vector<std::size_t> widths(headers.size());
    for (std::size_t c = 0; c < headers.size(); ++c) widths[c] = headers[c].size();
    for (const auto& row : rows)
        for (std::size_t c = 0; c < row.size() && c < widths.size(); ++c)
            widths[c] = std::max(widths[c], row[c].size());
    std::string out;
    auto emit = [&](const std::vector<std::string>& row) {
        for (std::size_t c = 0; c < widths.size(); ++c) {
            std::string cell = c < row.size() ? row[c] : "";
            out += cell;
            if (c + 1 < widths.size()) out += std::string(widths[c] - cell.size() + 2, ' ');
        }
        out += '\n';
    };
    emit(headers);
    std::vector<std::string> rule;
    for (std::size_t w : widths) rule.push_back(std::string(w, '-'));
    emit(rule);
    for (const auto& row : rows) emit(row);
    return out;
}

std::string text_header(const json& j, const std::string& title) {
    return fmt::format("# {}\n# config {} seed {}\n\n", title,
                       j.at("config_hash").get<std::string>().substr(0, 12),
                       j.at("seed").get<std::uint64_t>());
}

json stamp(const RunConfig& cfg) {
    return json{{"config_hash", cfg.config_hash()}, {"seed", cfg.seed}};
}

json opt_json(const std::optional<double>& v) { return v ? json(*v) : json(nullptr); }

// --- table builders ----------------------------------------------------------

json aggregate_row_json(const AggregateRow& row) {
    return json{{"group", row.group},
                {"n_filtered", row.n_filtered},
                {"n_excluded", row.n_excluded},
                {"wins_base", row.wins_base},
                {"wins_aligned", row.wins_aligned},
                {"binomial_p", opt_json(row.binomial_p)},
                {"wilcoxon_p", opt_json(row.wilcoxon_p)}};
}

json meta_json(const RunContext& ctx) {
    json families = json::object();
    for (const auto& [family, dps] : ctx.corpora) families[family_name(family)] = dps.size();
    json j = stamp(ctx.cfg);
    j["crossing"] = crossing_name(ctx.cfg.crossing);
    j["provider"] = ctx.cfg.provider;
    j["variants"] = ctx.cfg.variants;
    j["families"] = families;
    j["pairs"] = ctx.pairs.size();
    j["filters"] = {{"mass_threshold", ctx.cfg.filters.mass_threshold},
                    {"min_corr_threshold", ctx.cfg.filters.min_corr_threshold}};
    j["top_k"] = ctx.cfg.top_k;
    return j;
}

json per_pair_json(const RunContext& ctx, const Headline& headline) {
    json rows = json::array();
    for (const auto& [family, results] : headline.results)
        for (const FamilyPairResult& r : results)
            rows.push_back(json{{"pair_id", r.pair.pair_id},
                                {"family", family_name(family)},
                                {"base_model", r.pair.base_model_id},
                                {"aligned_model", r.pair.aligned_model_id},
                                {"param_count_b", r.pair.param_count_b},
                                {"base_mass", r.base_mass},
                                {"aligned_mass", r.aligned_mass},
                                {"base_r", opt_json(r.base_r)},
                                {"aligned_r", opt_json(r.aligned_r)},
                                {"mass_pass", r.filter.mass_pass},
                                {"corr_pass", r.filter.corr_pass},
                                {"included", r.filter.included},
                                {"winner", winner_name(r.winner)}});
    json j = stamp(ctx.cfg);
    j["rows"] = rows;
    return j;
}

std::string render_per_pair(const json& j) {
    std::vector<std::vector<std::string>> rows;
    for (const json& r : j.at("rows"))
        rows.push_back({r.at("family").get<std::string>(),
                        fmt::format("{}", r.at("pair_id").get<int>()),
                        r.at("base_model").get<std::string>(),
                        r.at("aligned_model").get<std::string>(),
                        fmt_mass(r.at("base_mass")), fmt_mass(r.at("aligned_mass")),
                        fmt_r(r.at("base_r")), fmt_r(r.at("aligned_r")),
                        r.at("included").get<bool>() ? "yes" : "no",
                        r.at("winner").get<std::string>()});
    return text_header(j, "Per-pair comparison (baseline variant)") +
           table_text({"family", "pair", "base model", "aligned model", "base mass",
                       "aligned mass", "base r", "aligned r", "included", "winner"},
                      rows);
}

json families_json(const RunContext& ctx, const Headline& headline) {
    json rows = json::array();
    for (const AggregateRow& row : aggregate_by_family(headline.all))
        rows.push_back(aggregate_row_json(row));
    json j = stamp(ctx.cfg);
    j["rows"] = rows;
    j["overall"] = aggregate_row_json(aggregate_all(headline.all, "overall"));
    return j;
}

std::vector<std::string> aggregate_row_cells(const json& r) {
    return {r.at("group").get<std::string>(), fmt_count(r.at("n_filtered")),
            fmt_count(r.at("n_excluded")), fmt_count(r.at("wins_base")),
            fmt_count(r.at("wins_aligned")), fmt_p(r.at("binomial_p")),
            fmt_p(r.at("wilcoxon_p"))};
}

std::string render_families(const json& j) {
    std::vector<std::vector<std::string>> rows;
    for (const json& r : j.at("rows")) rows.push_back(aggregate_row_cells(r));
    rows.push_back(aggregate_row_cells(j.at("overall")));
    return text_header(j, "Family aggregates: base vs aligned wins") +
           table_text({"family", "filtered", "excluded", "base wins", "aligned wins",
                       "binomial p", "wilcoxon p"},
                      rows);
}

json variants_json(const RunContext& ctx, const Headline& headline,
                   const std::map<std::string, std::map<GameFamily, std::vector<FamilyPairResult>>>&
                       variant_results) {
    // Families shown in the variant table, in canonical order.
    std::vector<GameFamily> shown;
    for (GameFamily f : kAllFamilies)
        if (family_in(ctx.cfg.variant_families, f) && ctx.corpora.count(f)) shown.push_back(f);

    json rows = json::array();
    for (const std::string& name : ctx.cfg.variants) {
        bool is_baseline = variant_by_name(name).cluster == VariantCluster::baseline;
        json family_cells = json::array();
        std::vector<FamilyPairResult> pooled;
        for (GameFamily f : shown) {
            const std::vector<FamilyPairResult>* results = nullptr;
            if (is_baseline)
                results = &headline.results.at(f);
            else
                results = &variant_results.at(name).at(f);
            AggregateRow row = aggregate_all(*results, family_name(f));
            family_cells.push_back(aggregate_row_json(row));
            pooled.insert(pooled.end(), results->begin(), results->end());
        }
        AggregateRow total = aggregate_all(pooled, name);
        json row = aggregate_row_json(total);
        row["variant"] = name;
        row["cluster"] = cluster_name(variant_by_name(name).cluster);
        row["families"] = family_cells;
        row.erase("group");
        rows.push_back(std::move(row));
    }
    json j = stamp(ctx.cfg);
    j["rows"] = rows;
    return j;
}

std::string render_variants(const json& j) {
    std::vector<std::vector<std::string>> rows;
    for (const json& r : j.at("rows")) {
        std::string per_family;
        for (const json& f : r.at("families")) {
            if (!per_family.empty()) per_family += "  ";
            per_family += fmt::format("{} {}:{}", f.at("group").get<std::string>(),
                                      f.at("wins_base").get<std::size_t>(),
                                      f.at("wins_aligned").get<std::size_t>());
        }
        rows.push_back({r.at("variant").get<std::string>(), r.at("cluster").get<std::string>(),
                        fmt::format("{}:{}", r.at("wins_base").get<std::size_t>(),
                                    r.at("wins_aligned").get<std::size_t>()),
                        fmt_p(r.at("binomial_p")), per_family});
    }
    return text_header(j, "Prompt-variant sweep (base:aligned wins)") +
           table_text({"variant", "cluster", "total B:A", "binomial p", "per family"}, rows);
}

json config_table_json(const RunContext& ctx, const Headline& headline, GameFamily family) {
    const std::vector<DecisionPoint>& dps = ctx.corpora.at(family);
    json rows = json::array();
    auto add_row = [&](const std::string& parameter, const std::string& value,
                       std::span<const DecisionPoint> subset) {
        std::vector<FamilyPairResult> results = compare_subset(ctx, headline, family, subset);
        AggregateRow agg = aggregate_all(results, value);
        json row = aggregate_row_json(agg);
        row.erase("group");
        row["parameter"] = parameter;
        row["value"] = value;
        row["n_points"] = subset.size();
        rows.push_back(std::move(row));
    };
    for (const ConfigSplit& split : config_parameter_split(dps, family))
        add_row(split.parameter, split.value, split.subset);
    RoundSplitMode mode = family == GameFamily::matrix_repeated ? RoundSplitMode::matrix_phases
                                                                : RoundSplitMode::first_vs_rest;
    const char* round_parameter = family == GameFamily::matrix_repeated ? "Phase" : "Round filter";
    for (const RoundSplit& split : round_split(dps, mode))
        add_row(round_parameter, split.label, split.subset);
    json j = stamp(ctx.cfg);
    j["family"] = family_name(family);
    j["rows"] = rows;
    return j;
}

std::string render_config_table(const json& j) {
    std::vector<std::vector<std::string>> rows;
    for (const json& r : j.at("rows"))
        rows.push_back({r.at("parameter").get<std::string>(), r.at("value").get<std::string>(),
                        fmt_count(r.at("n_points")), fmt_count(r.at("n_filtered")),
                        fmt_count(r.at("n_excluded")),
                        fmt::format("{}:{}", r.at("wins_base").get<std::size_t>(),
                                    r.at("wins_aligned").get<std::size_t>()),
                        fmt_p(r.at("binomial_p"))});
    return text_header(j, fmt::format("Configuration robustness: {}",
                                      j.at("family").get<std::string>())) +
           table_text({"parameter", "value", "points", "filtered", "excluded", "B:A",
                       "binomial p"},
                      rows);
}

json size_bins_json(const RunContext& ctx, const Headline& headline) {
    auto bins_json = [&](const std::vector<SizeBinResult>& bins) {
        json out = json::array();
        for (const SizeBinResult& b : bins)
            out.push_back(json{{"label", b.label},
                               {"n", b.n},
                               {"median_diff", opt_json(b.median)},
                               {"ci_lo", opt_json(b.ci_lo)},
                               {"ci_hi", opt_json(b.ci_hi)}});
        return out;
    };
    const std::vector<SizeBin>& bins = size_bins_of(ctx.cfg);
    json families = json::array();
    std::uint64_t family_index = 0;
    for (const auto& [family, results] : headline.results) {
        ++family_index;
        families.push_back(
            json{{"family", family_name(family)},
                 {"bins", bins_json(size_bins(results, bins, ctx.cfg.bootstrap_resamples,
                                              ctx.cfg.bootstrap_level,
                                              ctx.cfg.seed + family_index))}});
    }
    json j = stamp(ctx.cfg);
    j["families"] = families;
    j["pooled"] = bins_json(size_bins(headline.all, bins, ctx.cfg.bootstrap_resamples,
                                      ctx.cfg.bootstrap_level, ctx.cfg.seed));
    j["bootstrap_resamples"] = ctx.cfg.bootstrap_resamples;
    j["bootstrap_level"] = ctx.cfg.bootstrap_level;
    return j;
}

std::string render_size_bins(const json& j) {
    std::vector<std::vector<std::string>> rows;
    auto add = [&](const std::string& scope, const json& bins) {
        for (const json& b : bins)
            rows.push_back({scope, b.at("label").get<std::string>(), fmt_count(b.at("n")),
                            fmt_r(b.at("median_diff")), fmt_r(b.at("ci_lo")),
                            fmt_r(b.at("ci_hi"))});
    };
    for (const json& f : j.at("families")) add(f.at("family").get<std::string>(), f.at("bins"));
    add("pooled", j.at("pooled"));
    return text_header(j, "Model-size bins: median (base r - aligned r), bootstrap CI") +
           table_text({"scope", "bin", "pairs", "median", "ci lo", "ci hi"}, rows);
}

json grid_json(const SensitivityGrid& grid) {
    json cells = json::array();
    for (const auto& row : grid.cells) {
        json cell_row = json::array();
        for (const GridCell& cell : row)
            cell_row.push_back(json{{"wins_base", cell.wins_base},
                                    {"wins_aligned", cell.wins_aligned},
                                    {"p_value", opt_json(cell.p_value)}});
        cells.push_back(std::move(cell_row));
    }
    return json{{"mass_levels", levels_to_json(grid.mass_levels)},
                {"corr_levels", levels_to_json(grid.corr_levels)},
                {"cells", cells}};
}

json sensitivity_json(const RunContext& ctx, const Headline& headline) {
    const auto& mass_levels = mass_levels_of(ctx.cfg);
    const auto& corr_levels = corr_levels_of(ctx.cfg);
    json families = json::array();
    std::vector<PairStats> pooled;
    for (const auto& [family, results] : headline.results) {
        std::vector<PairStats> stats;
        for (const FamilyPairResult& r : results) stats.push_back(to_pair_stats(r));
        pooled.insert(pooled.end(), stats.begin(), stats.end());
        families.push_back(json{{"family", family_name(family)},
                                {"grid", grid_json(sensitivity_grid(stats, mass_levels,
                                                                    corr_levels))}});
    }
    json j = stamp(ctx.cfg);
    j["families"] = families;
    j["overall"] = grid_json(sensitivity_grid(pooled, mass_levels, corr_levels));
    return j;
}

std::string render_one_grid(const std::string& scope, const json& grid) {
    std::vector<std::string> headers = {"mass \\ corr"};
    for (const json& c : grid.at("corr_levels")) headers.push_back(threshold_label(c));
    std::vector<std::vector<std::string>> rows;
    const json& cells = grid.at("cells");
    const json& mass_levels = grid.at("mass_levels");
    for (std::size_t m = 0; m < cells.size(); ++m) {
        std::vector<std::string> row = {threshold_label(mass_levels.at(m))};
        for (const json& cell : cells.at(m))
            row.push_back(fmt::format("{}:{}", cell.at("wins_base").get<std::size_t>(),
                                      cell.at("wins_aligned").get<std::size_t>()));
        rows.push_back(std::move(row));
    }
    return fmt::format("## {}\n{}", scope, table_text(headers, rows));
}

std::string render_sensitivity(const json& j) {
    std::string out = text_header(j, "Filter-threshold sensitivity (base:aligned wins)");
    for (const json& f : j.at("families"))
        out += render_one_grid(f.at("family").get<std::string>(), f.at("grid")) + "\n";
    out += render_one_grid("overall", j.at("overall"));
    return out;
}

json scatter_json(const RunContext& ctx, const Headline& headline) {
    json points = json::array();
    for (const ScatterPoint& p : scatter_data(headline.all))
        points.push_back(json{{"pair_id", p.pair_id},
                              {"family", family_name(p.family)},
                              {"base_r", opt_json(p.base_r)},
                              {"aligned_r", opt_json(p.aligned_r)},
                              {"included", p.included}});
    json j = stamp(ctx.cfg);
    j["points"] = points;
    return j;
}

json ne_json(const RunContext& ctx, const Headline& headline) {
    json j = stamp(ctx.cfg);
    auto it = ctx.corpora.find(GameFamily::matrix_oneshot);
    if (it == ctx.corpora.end()) {
        j["note"] = "no one-shot matrix dataset configured";
        return j;
    }
    const std::vector<DecisionPoint>& dps = it->second;

    json games = json::array();
    std::map<std::string, double> ne_by_id;
    std::vector<std::string> degenerate;
    std::vector<double> ne_vec, human_vec;
    for (const DecisionPoint& dp : dps) {
        const auto& cfg = std::get<MatrixGameConfig>(dp.config);
        json row{{"id", dp.id},
                 {"topology", topology_name(cfg.game.topology)},
                 {"human_rate", *dp.aggregate_choice_rate}};
        try {
            NePrediction ne = mixed_ne_2x2(cfg.game);
            row["kind"] = ne_kind_name(ne.kind);
            row["ne_row_p"] = ne.row_action1_prob;
            ne_by_id[dp.id] = ne.row_action1_prob;
            ne_vec.push_back(ne.row_action1_prob);
            human_vec.push_back(*dp.aggregate_choice_rate);
        } catch (const DegenerateGameError& e) {
            row["kind"] = "degenerate";
            row["error"] = e.what();
            degenerate.push_back(dp.id);
        }
        games.push_back(std::move(row));
    }
    j["games"] = games;
    j["degenerate_ids"] = degenerate;

    stats::CorrelationResult human_r = stats::pearson(ne_vec, human_vec);
    j["human_alignment"] = json{{"r", opt_json(human_r.r)}, {"n", human_r.n}};

    // Win counts against human rates, per topology (re-filtered per subset).
    json topology_rows = json::array();
    std::map<std::string, std::vector<DecisionPoint>> by_topology;
    for (const DecisionPoint& dp : dps)
        by_topology[topology_name(std::get<MatrixGameConfig>(dp.config).game.topology)]
            .push_back(dp);
    for (const auto& [name, subset] : by_topology) {
        std::vector<FamilyPairResult> results =
            compare_subset(ctx, headline, GameFamily::matrix_oneshot, subset);
        AggregateRow agg = aggregate_all(results, name);
        json row = aggregate_row_json(agg);
        row["n_points"] = subset.size();
        topology_rows.push_back(std::move(row));
    }
    j["by_topology"] = topology_rows;

    // Equilibrium alignment per included pair: correlations against NE
    // probabilities over the games where both sides made valid predictions.
    auto p_map = [](const std::vector<PredictionRecord>& records) {
        std::map<std::string, double> out;
        for (const PredictionRecord& rec : records)
            if (rec.valid()) out[rec.decision_point_id] = *rec.p_affirmative;
        return out;
    };
    json pair_rows = json::array();
    std::size_t closer_base = 0, closer_aligned = 0, ties = 0;
    std::vector<double> base_rs, aligned_rs;
    for (const FamilyPairResult& result : headline.results.at(GameFamily::matrix_oneshot)) {
        if (!result.filter.included) continue;
        const PairRecords& recs =
            headline.records.at(GameFamily::matrix_oneshot).at(result.pair.pair_id);
        auto base_p = p_map(recs.base);
        auto aligned_p = p_map(recs.aligned);
        std::vector<double> bx, ax, nx;
        for (const DecisionPoint& dp : dps) {
            auto ne_it = ne_by_id.find(dp.id);
            auto b = base_p.find(dp.id);
            auto a = aligned_p.find(dp.id);
            if (ne_it == ne_by_id.end() || b == base_p.end() || a == aligned_p.end()) continue;
            nx.push_back(ne_it->second);
            bx.push_back(b->second);
            ax.push_back(a->second);
        }
        auto base_r = ne_alignment(bx, nx);
        auto aligned_r = ne_alignment(ax, nx);
        json row{{"pair_id", result.pair.pair_id},
                 {"games_used", nx.size()},
                 {"base_r", opt_json(base_r.r)},
                 {"aligned_r", opt_json(aligned_r.r)}};
        if (base_r.r && aligned_r.r) {
            base_rs.push_back(*base_r.r);
            aligned_rs.push_back(*aligned_r.r);
            auto closer = closer_to_ne(*base_r.r, *aligned_r.r);
            if (!closer) {
                ++ties;
                row["closer"] = nullptr;
            } else if (*closer == stats::Direction::base) {
                ++closer_base;
                row["closer"] = "base";
            } else {
                ++closer_aligned;
                row["closer"] = "aligned";
            }
        } else {
            row["closer"] = nullptr;
        }
        pair_rows.push_back(std::move(row));
    }
    j["pairs"] = pair_rows;

    auto mean = [](const std::vector<double>& v) -> json {
        if (v.empty()) return nullptr;
        double s = 0.0;
        for (double x : v) s += x;
        return s / static_cast<double>(v.size());
    };
    json summary{{"pairs_compared", base_rs.size()},
                 {"mean_base_r", mean(base_rs)},
                 {"mean_aligned_r", mean(aligned_rs)},
                 {"closer_base", closer_base},
                 {"closer_aligned", closer_aligned},
                 {"ties", ties}};
    std::size_t wins = std::max(closer_base, closer_aligned);
    std::size_t n = closer_base + closer_aligned;
    if (n > 0) {
        auto direction = closer_aligned >= closer_base ? stats::Direction::aligned
                                                       : stats::Direction::base;
        summary["binomial_p"] = stats::binomial_one_sided(wins, n, direction).p_value;
    } else {
        summary["binomial_p"] = nullptr;
    }
    j["summary"] = summary;
    return j;
}

std::string render_ne(const json& j) {
    std::string out = text_header(j, "One-shot matrix games: equilibrium alignment");
    if (j.contains("note")) return out + j.at("note").get<std::string>() + "\n";

    std::vector<std::vector<std::string>> topo_rows;
    for (const json& r : j.at("by_topology"))
        topo_rows.push_back({r.at("group").get<std::string>(), fmt_count(r.at("n_points")),
                             fmt_count(r.at("n_filtered")),
                             fmt::format("{}:{}", r.at("wins_base").get<std::size_t>(),
                                         r.at("wins_aligned").get<std::size_t>()),
                             fmt_p(r.at("binomial_p"))});
    out += "## Human-prediction wins by game type\n";
    out += table_text({"topology", "points", "filtered", "B:A", "binomial p"}, topo_rows);

    const json& h = j.at("human_alignment");
    out += fmt::format("\nHuman rate vs mixed-NE probability: r = {} over {} games\n",
                       fmt_r(h.at("r")), h.at("n").get<std::size_t>());

    const json& s = j.at("summary");
    out += fmt::format(
        "Equilibrium alignment over {} included pairs: mean base r = {}, mean aligned r = {}; "
        "aligned closer in {} of {} (binomial p = {})\n",
        s.at("pairs_compared").get<std::size_t>(), fmt_r(s.at("mean_base_r")),
        fmt_r(s.at("mean_aligned_r")), s.at("closer_aligned").get<std::size_t>(),
        s.at("closer_base").get<std::size_t>() + s.at("closer_aligned").get<std::size_t>(),
        fmt_p(s.at("binomial_p")));
    return out;
}

// --- bundle plumbing ---------------------------------------------------------

using Renderer = std::string (*)(const json&);

const std::map<std::string, Renderer>& renderers() {
    static const std::map<std::string, Renderer> map = {
        {"per_pair", render_per_pair},
        {"families", render_families},
        {"variants", render_variants},
        {"config_bargaining", render_config_table},
        {"config_persuasion", render_config_table},
        {"config_negotiation", render_config_table},
        {"config_matrix_repeated", render_config_table},
        {"size_bins", render_size_bins},
        {"sensitivity", render_sensitivity},
        {"ne", render_ne},
    };
    return map;
}

void write_table(const std::string& dir, const std::string& name, const json& j) {
    write_text_file_atomic((fs::path(dir) / (name + ".json")).string(), j.dump(2) + "\n");
    auto it = renderers().find(name);
    if (it != renderers().end())
        write_text_file_atomic((fs::path(dir) / (name + ".txt")).string(), it->second(j));
}

std::map<std::string, std::map<GameFamily, std::vector<FamilyPairResult>>> compute_variants(
    const RunContext& ctx, const Headline& headline) {
    std::map<std::string, std::map<GameFamily, std::vector<FamilyPairResult>>> out;
    for (const std::string& name : ctx.cfg.variants) {
        if (variant_by_name(name).cluster == VariantCluster::baseline) continue;
        for (GameFamily family : ctx.cfg.variant_families) {
            auto it = ctx.corpora.find(family);
            if (it == ctx.corpora.end()) continue;
            std::vector<FamilyPairResult> results;
            for (const PairSpec& pair : ctx.pairs) {
                auto base =
                    must_load_records(ctx.cfg, family, pair, stats::Direction::base, name);
                auto aligned =
                    must_load_records(ctx.cfg, family, pair, stats::Direction::aligned, name);
                results.push_back(
                    compare_pair(pair, family, base, aligned, it->second, ctx.cfg.filters));
            }
            out[name][family] = std::move(results);
        }
    }
    (void)headline;
    return out;
}

} // namespace

void run_evaluate(const RunConfig& cfg) {
    RunContext ctx = load_context(cfg);
    Headline headline = compute_headline(ctx);
    auto variant_results = compute_variants(ctx, headline);

    std::string dir = report_dir(cfg);
    ensure_directory(dir);
    write_table(dir, "run_meta", meta_json(ctx));
    write_table(dir, "per_pair", per_pair_json(ctx, headline));
    write_table(dir, "families", families_json(ctx, headline));
    write_table(dir, "variants", variants_json(ctx, headline, variant_results));
    for (GameFamily family : {GameFamily::bargaining, GameFamily::persuasion,
                              GameFamily::negotiation, GameFamily::matrix_repeated})
        if (ctx.corpora.count(family))
            write_table(dir, fmt::format("config_{}", family_name(family)),
                        config_table_json(ctx, headline, family));
    write_table(dir, "size_bins", size_bins_json(ctx, headline));
    write_table(dir, "sensitivity", sensitivity_json(ctx, headline));
    write_table(dir, "ne", ne_json(ctx, headline));
    write_table(dir, "scatter", scatter_json(ctx, headline));
}

void run_sensitivity(const RunConfig& cfg) {
    RunContext ctx = load_context(cfg);
    Headline headline = compute_headline(ctx);
    std::string dir = report_dir(cfg);
    ensure_directory(dir);
    write_table(dir, "sensitivity", sensitivity_json(ctx, headline));
}

void run_ne(const RunConfig& cfg) {
    RunContext ctx = load_context(cfg);
    Headline headline = compute_headline(ctx);
    std::string dir = report_dir(cfg);
    ensure_directory(dir);
    write_table(dir, "ne", ne_json(ctx, headline));
}

void run_report(const RunConfig& cfg) {
    std::string dir = report_dir(cfg);
    bool any = false;
    for (const auto& [name, renderer] : renderers()) {
        fs::path path = fs::path(dir) / (name + ".json");
        if (!fs::exists(path)) continue;
        any = true;
        json j;
        try {
            j = json::parse(read_text_file(path.string()));
        } catch (const json::exception& e) {
            throw ConfigError(fmt::format("{}: not valid JSON: {}", path.string(), e.what()));
        }
        write_text_file_atomic((fs::path(dir) / (name + ".txt")).string(), renderer(j));
    }
    if (!any)
        throw MissingDataError(
            fmt::format("no report tables under {} (run the evaluate stage first)", dir));
}

} // namespace gamepred
