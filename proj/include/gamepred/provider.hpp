#pragma once

// Next-token log-probability acquisition: an HTTP client for
// completion-style inference endpoints, a deterministic mock with
// parameterized behavioral response models, and a content-addressed disk
// cache. Also owns decision-label/token alias matching.

#include "gamepred/prompt.hpp"

#include <cstddef>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <set>
#include <string>
#include <vector>

namespace gamepred {

// ---------------------------------------------------------------------------
// Distributions and alias matching

struct TokenDistribution {
    std::vector<std::pair<std::string, double>> entries; // (token, logprob <= 0)
    std::string model_id;
    std::string prompt_hash;
};

// Throws SchemaError when an invariant fails (positive logprob beyond fp
// noise, duplicate token, or total probability above 1).
void validate(const TokenDistribution& dist);

struct LabelMass {
    std::map<std::string, double> per_label;
    double total_mass = 0.0;
};

struct AliasTable {
    std::map<std::string, std::set<std::string>> per_label;
};

// {exact, capitalized} x {bare, leading space} per label.
AliasTable default_alias_table(const std::vector<std::string>& labels);

// Sums exp(logprob) over each label's alias tokens present in the
// distribution; absent tokens contribute 0, so every label always appears.
// Throws ConfigError on alias sets that overlap or fail to cover the labels.
LabelMass match_decision_tokens(const TokenDistribution& dist,
                                const std::vector<std::string>& labels,
                                const AliasTable& aliases);

// Diagnostic sink for alias-truncation warnings and transport retries;
// nullptr restores the default (std::clog).
using ProviderLogSink = std::function<void(const std::string&)>;
void set_provider_log_sink(ProviderLogSink sink);

// ---------------------------------------------------------------------------
// Providers

inline constexpr int kDefaultTopK = 20;

class LogprobProvider {
  public:
    virtual ~LogprobProvider() = default;

    // Top-k next-token distribution at the final prompt position. No
    // sampling, no generation beyond one position.
    virtual TokenDistribution fetch_next_token_logprobs(const std::string& model_id,
                                                        const RenderedPrompt& prompt,
                                                        int k = kDefaultTopK) = 0;
};

struct EndpointConfig {
    std::string base_url = "http://127.0.0.1:8000";
    std::string completions_path = "/v1/completions";
    std::string credential_env;       // env var holding a bearer token; empty = none
    int max_attempts = 3;             // total tries per request
    int timeout_seconds = 60;
    int connect_timeout_seconds = 10;
    int retry_backoff_ms = 250;       // doubled per retry
};

// Speaks the completion wire protocol: POST {model, prompt, max_tokens: 1,
// logprobs: k, temperature: 0}, reading the first position's top-k
// (token, logprob) pairs from the response.
class HttpProvider : public LogprobProvider {
  public:
    explicit HttpProvider(EndpointConfig config);

    TokenDistribution fetch_next_token_logprobs(const std::string& model_id,
                                                const RenderedPrompt& prompt,
                                                int k = kDefaultTopK) override;

    // Fail-fast probe: one tiny request that raises CapabilityError when the
    // endpoint cannot return logprobs for this model.
    void check_capability(const std::string& model_id);

  private:
    EndpointConfig config_;
};

// Deterministic pure function of (model_id, prompt text). Model id patterns:
//   "always-<token>"         0.9 probability on exactly <token>
//   contains "lowmass"       behavioral shape at 0.30 total decision mass
//   contains "behavioral"    logistic response to the prompt's numeric context
//   contains "noise"         hash-driven label probability, no signal
// Decision tokens are emitted in their leading-space surface form.
class MockProvider : public LogprobProvider {
  public:
    TokenDistribution fetch_next_token_logprobs(const std::string& model_id,
                                                const RenderedPrompt& prompt,
                                                int k = kDefaultTopK) override;
};

// Wraps another provider with an on-disk cache keyed by the SHA-256 of
// (model_id, prompt hash, k). Writes are atomic (temp file + rename);
// concurrent writers of identical content are last-writer-wins.
class CachingProvider : public LogprobProvider {
  public:
    CachingProvider(std::shared_ptr<LogprobProvider> inner, std::string cache_dir);

    TokenDistribution fetch_next_token_logprobs(const std::string& model_id,
                                                const RenderedPrompt& prompt,
                                                int k = kDefaultTopK) override;

    std::size_t hits() const;
    std::size_t misses() const;

  private:
    std::shared_ptr<LogprobProvider> inner_;
    std::string dir_;
    mutable std::mutex mutex_;
    std::size_t hits_ = 0;
    std::size_t misses_ = 0;
};

// ---------------------------------------------------------------------------
// Behavioral response shapes shared by the mock provider and the synthetic
// corpus generator (which adds noise on top of the same curves).

namespace behavior {

double logistic(double z);

// Dialogue families: affirmative probability as a logistic in the prompt's
// final numeric context value x (an offered share, discount, or track record
// in [0,1]).
double dialogue_p_affirm(double x);

// Matrix games: probability of the first action from the two actions' mean
// payoffs against a uniform opponent.
double matrix_p_first(double mean_payoff_first, double mean_payoff_second);

// Lotteries: probability of option A from the options' expected values.
double lottery_p_a(double ev_a, double ev_b);

} // namespace behavior

} // namespace gamepred
