// Command-line front end for the prediction pipeline: validate a run config,
// fetch next-token predictions, and emit the comparison report bundle.

#include <CLI11.hpp>
#include <fmt/format.h>

#include <cstdio>
#include <optional>
#include <string>
#include <vector>

#include "gamepred/errors.hpp"
#include "gamepred/pipeline.hpp"

namespace {

using namespace gamepred;

struct Overrides {
    std::optional<std::string> output_dir;
    std::optional<std::string> cache_dir;
    std::optional<std::uint64_t> seed;
    std::optional<int> concurrency;
    std::optional<int> top_k;
    std::optional<std::string> provider;
    std::optional<std::string> crossing;
    std::optional<double> mass_threshold;
    std::optional<double> corr_threshold;
    std::optional<std::string> endpoint_url;
    std::optional<std::string> credential_env;
};

RunConfig load_config(const std::string& path, const Overrides& ov) {
    RunConfig cfg = RunConfig::load(path);
    if (ov.output_dir) cfg.output_dir = *ov.output_dir;
    if (ov.cache_dir) cfg.cache_dir = *ov.cache_dir;
    if (ov.seed) cfg.seed = *ov.seed;
    if (ov.concurrency) cfg.concurrency = *ov.concurrency;
    if (ov.top_k) cfg.top_k = *ov.top_k;
    if (ov.provider) cfg.provider = *ov.provider;
    if (ov.crossing) cfg.crossing = parse_crossing(*ov.crossing);
    if (ov.mass_threshold) cfg.filters.mass_threshold = *ov.mass_threshold;
    if (ov.corr_threshold) cfg.filters.min_corr_threshold = *ov.corr_threshold;
    if (ov.endpoint_url) cfg.endpoint.base_url = *ov.endpoint_url;
    if (ov.credential_env) cfg.endpoint.credential_env = *ov.credential_env;
    return cfg;
}

void add_override_flags(CLI::App* cmd, Overrides& ov) {
    cmd->add_option("--output", ov.output_dir, "Override the output directory");
    cmd->add_option("--cache-dir", ov.cache_dir, "Override the provider cache directory");
    cmd->add_option("--seed", ov.seed, "Override the root seed");
    cmd->add_option("--concurrency", ov.concurrency, "Override the worker count");
    cmd->add_option("--top-k", ov.top_k, "Override the requested top-k logprobs");
    cmd->add_option("--provider", ov.provider, "Override the provider (mock or http)");
    cmd->add_option("--crossing", ov.crossing,
                    "Override the prompt-format crossing (native, both-plain, both-chat)");
    cmd->add_option("--mass-threshold", ov.mass_threshold, "Override the decision-mass filter");
    cmd->add_option("--corr-threshold", ov.corr_threshold,
                    "Override the minimum-correlation filter");
    cmd->add_option("--endpoint-url", ov.endpoint_url, "Override the inference endpoint URL");
    cmd->add_option("--credential-env", ov.credential_env,
                    "Env var holding the endpoint bearer token");
}

int run_exit_coded(const std::function<int()>& body) {
    try {
        return body();
    } catch (const TransportError& e) {
        fmt::print(stderr, "transport error: {}\n", e.what());
        return 2;
    } catch (const HttpError& e) {
        fmt::print(stderr, "endpoint error: {}\n", e.what());
        return 2;
    } catch (const CapabilityError& e) {
        fmt::print(stderr, "endpoint error: {}\n", e.what());
        return 2;
    } catch (const MissingDataError& e) {
        fmt::print(stderr, "missing data: {}\n", e.what());
        return 3;
    } catch (const std::exception& e) {
        fmt::print(stderr, "error: {}\n", e.what());
        return 1;
    }
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"Strategic-decision prediction pipeline"};
    app.require_subcommand(1);

    std::string config_path;
    Overrides ov;

    auto* validate = app.add_subcommand("validate", "Check config, datasets, and templates");
    validate->add_option("--config", config_path, "Run configuration JSON")->required();
    add_override_flags(validate, ov);

    auto* predict = app.add_subcommand("predict", "Fetch next-token predictions");
    predict->add_option("--config", config_path, "Run configuration JSON")->required();
    std::string scope_family, scope_variant, scope_format;
    std::vector<std::string> scope_models;
    predict->add_option("--family", scope_family, "Restrict to one game family");
    predict->add_option("--model", scope_models, "Restrict to these model ids");
    predict->add_option("--variant", scope_variant, "Restrict to one prompt variant");
    predict->add_option("--format", scope_format, "Restrict to one prompt format");
    add_override_flags(predict, ov);

    auto* evaluate = app.add_subcommand("evaluate", "Compare pairs and write the report bundle");
    evaluate->add_option("--config", config_path, "Run configuration JSON")->required();
    add_override_flags(evaluate, ov);

    auto* sensitivity =
        app.add_subcommand("sensitivity", "Write only the filter-threshold sensitivity grids");
    sensitivity->add_option("--config", config_path, "Run configuration JSON")->required();
    add_override_flags(sensitivity, ov);

    auto* ne = app.add_subcommand("ne", "Write only the equilibrium-alignment tables");
    ne->add_option("--config", config_path, "Run configuration JSON")->required();
    add_override_flags(ne, ov);

    auto* report = app.add_subcommand("report", "Re-render text tables from persisted JSON");
    report->add_option("--config", config_path, "Run configuration JSON")->required();
    add_override_flags(report, ov);

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        int code = app.exit(e);
        return code == 0 ? 0 : 1;
    }

    return run_exit_coded([&]() -> int {
        if (validate->parsed()) {
            RunConfig cfg = load_config(config_path, ov);
            std::vector<std::string> problems = validate_run(cfg);
            for (const std::string& p : problems) fmt::print(stderr, "{}\n", p);
            if (problems.empty()) {
                fmt::print("ok: config {} validates\n", cfg.config_hash().substr(0, 12));
                return 0;
            }
            fmt::print(stderr, "{} problem(s) found\n", problems.size());
            return 1;
        }
        if (predict->parsed()) {
            RunConfig cfg = load_config(config_path, ov);
            PredictScope scope;
            if (!scope_family.empty()) scope.family = parse_family(scope_family);
            if (!scope_variant.empty()) scope.variant = scope_variant;
            if (!scope_format.empty()) scope.format = parse_format(scope_format);
            scope.models = scope_models;
            PredictSummary s = run_predict(cfg, scope);
            fmt::print("conditions: {}\nrecords written: {}\nfetched: {}  reused: {}  failures: {}\n",
                       s.conditions, s.records_written, s.fetched, s.reused, s.failures);
            for (const std::string& msg : s.failure_messages) fmt::print(stderr, "  {}\n", msg);
            return s.failures == 0 ? 0 : 2;
        }
        RunConfig cfg = load_config(config_path, ov);
        if (evaluate->parsed()) {
            run_evaluate(cfg);
            fmt::print("report written to {}\n", report_dir(cfg));
        } else if (sensitivity->parsed()) {
            run_sensitivity(cfg);
            fmt::print("sensitivity grids written to {}\n", report_dir(cfg));
        } else if (ne->parsed()) {
            run_ne(cfg);
            fmt::print("equilibrium tables written to {}\n", report_dir(cfg));
        } else if (report->parsed()) {
            run_report(cfg);
            fmt::print("text tables re-rendered under {}\n", report_dir(cfg));
        }
        return 0;
    });
}
