#define CPPHTTPLIB_OPENSSL_SUPPORT
#include "gamepred/provider.hpp"

#include "gamepred/util.hpp"

#include <fmt/format.h>
#include <httplib.h>

#include <algorithm>
#include <cctype>
#include <chrono>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <iostream>
#include <sstream>
#include <thread>

namespace gamepred {

// ---------------------------------------------------------------------------
// Log sink

namespace {

ProviderLogSink g_log_sink;

void log_event(const std::string& msg) {
    if (g_log_sink)
        g_log_sink(msg);
    else
        std::clog << msg << '\n';
}

} // namespace

void set_provider_log_sink(ProviderLogSink sink) { g_log_sink = std::move(sink); }

// ---------------------------------------------------------------------------
// Distribution validation and alias matching

void validate(const TokenDistribution& dist) {
    double total = 0.0;
    std::set<std::string> seen;
    for (const auto& [token, logprob] : dist.entries) {
        if (logprob > 1e-9)
            throw SchemaError(fmt::format("token '{}': positive logprob {}", token, logprob));
        if (!seen.insert(token).second)
            throw SchemaError(fmt::format("token '{}': duplicate distribution entry", token));
        total += std::exp(std::min(logprob, 0.0));
    }
    if (total > 1.0 + 1e-6)
        throw SchemaError(fmt::format("distribution probabilities sum to {}", total));
}

AliasTable default_alias_table(const std::vector<std::string>& labels) {
    AliasTable table;
    for (const std::string& label : labels) {
        std::string cap = label;
        if (!cap.empty()) cap[0] = static_cast<char>(std::toupper(static_cast<unsigned char>(cap[0])));
        table.per_label[label] = {label, cap, " " + label, " " + cap};
    }
    return table;
}

LabelMass match_decision_tokens(const TokenDistribution& dist,
                                const std::vector<std::string>& labels,
                                const AliasTable& aliases) {
    std::map<std::string, const std::string*> token_to_label;
    for (const std::string& label : labels) {
        auto it = aliases.per_label.find(label);
        if (it == aliases.per_label.end())
            throw ConfigError(fmt::format("alias table does not cover label '{}'", label));
        for (const std::string& token : it->second) {
            auto [pos, inserted] = token_to_label.emplace(token, &label);
            if (!inserted && *pos->second != label)
                throw ConfigError(fmt::format("alias token '{}' claimed by labels '{}' and '{}'",
                                              token, *pos->second, label));
        }
    }

    LabelMass mass;
    for (const std::string& label : labels) mass.per_label[label] = 0.0;

    double min_matched = std::numeric_limits<double>::infinity();
    double min_entry = std::numeric_limits<double>::infinity();
    for (const auto& [token, logprob] : dist.entries) {
        double p = std::exp(std::min(logprob, 0.0));
        min_entry = std::min(min_entry, p);
        auto it = token_to_label.find(token);
        if (it == token_to_label.end()) continue;
        mass.per_label[*it->second] += p;
        min_matched = std::min(min_matched, p);
    }
    for (const auto& [label, p] : mass.per_label) mass.total_mass += p;

    // Top-k truncation check: when the least probable returned entry still
    // outweighs the smallest matched alias, further aliases may have been
    // cut off at the k boundary.
    if (std::isfinite(min_matched) && min_entry > min_matched)
        log_event(fmt::format("alias matching: distribution for '{}' may be truncated below a "
                              "decision token (boundary mass {:.3g} > smallest match {:.3g})",
                              dist.model_id, min_entry, min_matched));
    return mass;
}

// ---------------------------------------------------------------------------
// HTTP provider

HttpProvider::HttpProvider(EndpointConfig config) : config_(std::move(config)) {}

namespace {

TokenDistribution parse_completion_response(const std::string& body, const std::string& model_id,
                                            const std::string& prompt_hash) {
    json j;
    try {
        j = json::parse(body);
    } catch (const json::exception& e) {
        throw CapabilityError(fmt::format("endpoint returned unparseable body: {}", e.what()));
    }
    if (!j.contains("choices") || !j["choices"].is_array() || j["choices"].empty())
        throw CapabilityError("endpoint response has no choices");
    const json& choice = j["choices"][0];
    if (!choice.contains("logprobs") || choice["logprobs"].is_null())
        throw CapabilityError(fmt::format("endpoint returned no logprobs for model '{}'", model_id));
    const json& lp = choice["logprobs"];
    if (!lp.contains("top_logprobs") || !lp["top_logprobs"].is_array() || lp["top_logprobs"].empty())
        throw CapabilityError(fmt::format("endpoint returned no top_logprobs for model '{}'", model_id));
    const json& top = lp["top_logprobs"][0];
    if (!top.is_object())
        throw CapabilityError("top_logprobs[0] is not a token->logprob map");

    TokenDistribution dist;
    dist.model_id = model_id;
    dist.prompt_hash = prompt_hash;
    for (const auto& [token, value] : top.items()) {
        if (!value.is_number())
            throw SchemaError(fmt::format("token '{}': non-numeric logprob", token));
        // Some engines emit logprobs a hair above 0; clamp fp noise only.
        double logprob = std::min(value.get<double>(), 0.0);
        if (value.get<double>() > 1e-6)
            throw SchemaError(fmt::format("token '{}': positive logprob {}", token, value.get<double>()));
        dist.entries.emplace_back(token, logprob);
    }
    std::sort(dist.entries.begin(), dist.entries.end(),
              [](const auto& a, const auto& b) { return a.second > b.second; });
    validate(dist);
    return dist;
}

} // namespace

TokenDistribution HttpProvider::fetch_next_token_logprobs(const std::string& model_id,
                                                          const RenderedPrompt& prompt, int k) {
    json body = {{"model", model_id},
                 {"prompt", prompt.text},
                 {"max_tokens", 1},
                 {"logprobs", k},
                 {"temperature", 0}};
    httplib::Headers headers;
    if (!config_.credential_env.empty()) {
        const char* token = std::getenv(config_.credential_env.c_str());
        if (token == nullptr || *token == '\0')
            throw ConfigError(fmt::format("credential environment variable '{}' is not set",
                                          config_.credential_env));
        headers.emplace("Authorization", fmt::format("Bearer {}", token));
    }

    std::string payload = body.dump();
    std::string last_error = "no attempt made";
    int attempts = std::max(1, config_.max_attempts);
    for (int attempt = 1; attempt <= attempts; ++attempt) {
        httplib::Client client(config_.base_url);
        client.set_connection_timeout(config_.connect_timeout_seconds, 0);
        client.set_read_timeout(config_.timeout_seconds, 0);
        client.set_write_timeout(config_.timeout_seconds, 0);

        auto res = client.Post(config_.completions_path, headers, payload, "application/json");
        if (res) {
            if (res->status == 200)
                return parse_completion_response(res->body, model_id, sha256_hex(prompt.text));
            if (res->status != 429 && res->status < 500) {
                std::string detail = res->body.substr(0, 200);
                throw HttpError(fmt::format("endpoint rejected request for model '{}': {}",
                                            model_id, detail),
                                res->status);
            }
            last_error = fmt::format("HTTP {}", res->status);
        } else {
            last_error = httplib::to_string(res.error());
        }
        if (attempt < attempts) {
            int backoff = config_.retry_backoff_ms << (attempt - 1);
            log_event(fmt::format("transport retry {}/{} for model '{}' after error: {}", attempt,
                                  attempts - 1, model_id, last_error));
            std::this_thread::sleep_for(std::chrono::milliseconds(backoff));
        }
    }
    throw TransportError(fmt::format("request to {}{} for model '{}' failed: {}", config_.base_url,
                                     config_.completions_path, model_id, last_error),
                         attempts);
}

void HttpProvider::check_capability(const std::string& model_id) {
    RenderedPrompt probe;
    probe.text = "capability probe: reply with one token.\nAnswer:";
    probe.variant = "standard";
    probe.decision_point_id = "capability-probe";
    fetch_next_token_logprobs(model_id, probe, 1);
}

// ---------------------------------------------------------------------------
// Mock provider

namespace behavior {

double logistic(double z) { return 1.0 / (1.0 + std::exp(-z)); }

double dialogue_p_affirm(double x) { return logistic(20.0 * (x - 0.5)); }

double matrix_p_first(double mean_payoff_first, double mean_payoff_second) {
    return logistic(2.0 * (mean_payoff_first - mean_payoff_second));
}

double lottery_p_a(double ev_a, double ev_b) {
    double t = (ev_a - ev_b) / (std::fabs(ev_a) + std::fabs(ev_b) + 1e-9);
    return logistic(10.0 * t);
}

} // namespace behavior

namespace {

// The canonical affirmative surface forms used by the synthetic corpora.
bool affirmative_looking(const std::string& label) {
    return label == "accept" || label == "yes" || label == "AcceptOffer" ||
           label == "cooperate" || label == "A" || label == "buy" || label == "bach";
}

std::vector<std::string> parse_instruction_labels(const std::string& text) {
    static const std::string needle = "Respond with exactly one of:";
    std::size_t pos = text.rfind(needle);
    if (pos == std::string::npos) return {};
    std::size_t end = text.find('\n', pos);
    std::string line = text.substr(pos, end == std::string::npos ? std::string::npos : end - pos);
    std::vector<std::string> labels;
    std::size_t i = 0;
    while ((i = line.find('"', i)) != std::string::npos) {
        std::size_t close = line.find('"', i + 1);
        if (close == std::string::npos) break;
        labels.push_back(line.substr(i + 1, close - i - 1));
        i = close + 1;
    }
    return labels;
}

// Parses a floating point number at text[pos]; advances pos past it on success.
std::optional<double> scan_double(const std::string& text, std::size_t& pos) {
    if (pos >= text.size()) return std::nullopt;
    const char* begin = text.c_str() + pos;
    char* end = nullptr;
    double value = std::strtod(begin, &end);
    if (end == begin) return std::nullopt;
    pos += static_cast<std::size_t>(end - begin);
    return value;
}

// Last "[key: <number>]" context annotation, ignoring the round counter.
std::optional<double> parse_context_scalar(const std::string& text) {
    std::optional<double> last;
    std::size_t pos = 0;
    while ((pos = text.find('[', pos)) != std::string::npos) {
        std::size_t key_end = text.find(':', pos + 1);
        if (key_end == std::string::npos) break;
        std::string key = text.substr(pos + 1, key_end - pos - 1);
        pos = key_end + 1;
        bool key_ok = !key.empty() && !std::isdigit(static_cast<unsigned char>(key.front()));
        for (char c : key)
            if (!(std::isalnum(static_cast<unsigned char>(c)) || c == '_')) key_ok = false;
        if (!key_ok) continue;
        std::size_t cursor = pos;
        while (cursor < text.size() && text[cursor] == ' ') ++cursor;
        auto value = scan_double(text, cursor);
        if (!value || cursor >= text.size() || text[cursor] != ']') continue;
        pos = cursor + 1;
        if (key == "round") continue;
        last = value;
    }
    return last;
}

// "Option X: $a with probability p; ..." -> expected value, if present.
std::optional<double> parse_option_ev(const std::string& text, char option) {
    std::string needle = fmt::format("Option {}: ", option);
    std::size_t pos = text.rfind(needle);
    if (pos == std::string::npos) return std::nullopt;
    std::size_t end = text.find('\n', pos);
    if (end == std::string::npos) end = text.size();
    static const std::string prob_marker = " with probability ";
    double ev = 0.0;
    bool any = false;
    std::size_t cursor = pos;
    while (true) {
        std::size_t dollar = text.find('$', cursor);
        if (dollar == std::string::npos || dollar >= end) break;
        std::string digits;
        std::size_t amount_end = dollar + 1;
        while (amount_end < end) {
            char c = text[amount_end];
            if (!(std::isdigit(static_cast<unsigned char>(c)) || c == ',' || c == '.')) break;
            if (c != ',') digits.push_back(c);
            ++amount_end;
        }
        cursor = amount_end;
        if (digits.empty()) continue;
        if (text.compare(amount_end, prob_marker.size(), prob_marker) != 0) continue;
        std::size_t prob_pos = amount_end + prob_marker.size();
        auto prob = scan_double(text, prob_pos);
        if (!prob) continue;
        cursor = prob_pos;
        ev += std::stod(digits) * *prob;
        any = true;
    }
    if (!any) return std::nullopt;
    return ev;
}

struct ParsedPayoffs {
    std::vector<std::string> own_labels; // table order
    std::map<std::string, double> mean_payoff;
};

// Lines of the form: If you choose "X" and they choose "Y": (a, b).
std::optional<ParsedPayoffs> parse_payoff_table(const std::string& text) {
    static const std::string needle = "If you choose \"";
    ParsedPayoffs parsed;
    std::map<std::string, int> counts;
    std::size_t pos = 0;
    while ((pos = text.find(needle, pos)) != std::string::npos) {
        pos += needle.size();
        std::size_t label_end = text.find('"', pos);
        if (label_end == std::string::npos) break;
        std::string label = text.substr(pos, label_end - pos);
        pos = label_end + 1;
        std::size_t line_end = text.find('\n', label_end);
        if (line_end == std::string::npos) line_end = text.size();
        std::size_t paren = text.find('(', label_end);
        if (paren == std::string::npos || paren >= line_end) continue;
        std::size_t cursor = paren + 1;
        auto payoff = scan_double(text, cursor);
        if (!payoff) continue;
        if (counts.find(label) == counts.end()) parsed.own_labels.push_back(label);
        parsed.mean_payoff[label] += *payoff;
        counts[label] += 1;
    }
    if (parsed.own_labels.size() != 2) return std::nullopt;
    for (auto& [label, total] : parsed.mean_payoff) total /= counts[label];
    return parsed;
}

double hash_unit_interval(const std::string& key) {
    std::string hex = sha256_hex(key).substr(0, 13);
    return static_cast<double>(std::stoull(hex, nullptr, 16)) / 9007199254740992.0; // 2^53
}

// Probability of each instruction label under the behavioral response model.
std::map<std::string, double> behavioral_label_probs(const std::vector<std::string>& labels,
                                                     const std::string& text) {
    std::map<std::string, double> probs;
    auto spread_affirmative = [&](double p) {
        std::size_t negatives = 0;
        for (const auto& l : labels)
            if (!affirmative_looking(l)) ++negatives;
        for (const auto& l : labels)
            probs[l] = affirmative_looking(l) ? p : (1.0 - p) / std::max<std::size_t>(negatives, 1);
    };
    // Dialogue state carries the freshest information, so a context scalar takes
    // priority over any static payoff table printed in the rules.
    if (auto x = parse_context_scalar(text)) {
        spread_affirmative(behavior::dialogue_p_affirm(std::clamp(*x, 0.0, 1.0)));
        return probs;
    }
    if (auto table = parse_payoff_table(text)) {
        double p_first = behavior::matrix_p_first(table->mean_payoff[table->own_labels[0]],
                                                  table->mean_payoff[table->own_labels[1]]);
        probs[table->own_labels[0]] = p_first;
        probs[table->own_labels[1]] = 1.0 - p_first;
        return probs;
    }
    if (auto ev_a = parse_option_ev(text, 'A')) {
        if (auto ev_b = parse_option_ev(text, 'B')) {
            double p_a = behavior::lottery_p_a(*ev_a, *ev_b);
            probs["A"] = p_a;
            probs["B"] = 1.0 - p_a;
            return probs;
        }
    }
    spread_affirmative(behavior::dialogue_p_affirm(0.5));
    return probs;
}

} // namespace

TokenDistribution MockProvider::fetch_next_token_logprobs(const std::string& model_id,
                                                          const RenderedPrompt& prompt, int k) {
    TokenDistribution dist;
    dist.model_id = model_id;
    dist.prompt_hash = sha256_hex(prompt.text);

    auto push = [&](const std::string& token, double p) {
        if (p > 0.0) dist.entries.emplace_back(token, std::log(p));
    };

    if (model_id.rfind("always-", 0) == 0) {
        push(model_id.substr(7), 0.9);
        push("the", 0.05);
        push(".", 0.02);
    } else {
        std::vector<std::string> labels = parse_instruction_labels(prompt.text);
        bool lowmass = model_id.find("lowmass") != std::string::npos;
        bool noise = !lowmass && model_id.find("behavioral") == std::string::npos;
        if (noise && model_id.find("noise") == std::string::npos)
            throw ConfigError(fmt::format("mock provider: unrecognized model id '{}'", model_id));

        double decision_mass = lowmass ? 0.30 : 0.92;
        std::map<std::string, double> probs;
        if (noise) {
            double p = 0.05 + 0.9 * hash_unit_interval(model_id + "\n" + prompt.text);
            std::size_t negatives = labels.empty() ? 1 : labels.size() - 1;
            for (const auto& l : labels)
                probs[l] = affirmative_looking(l) ? p : (1.0 - p) / std::max<std::size_t>(negatives, 1);
        } else {
            probs = behavioral_label_probs(labels, prompt.text);
        }
        for (const auto& l : labels) push(" " + l, probs.count(l) ? probs[l] * decision_mass : 0.0);

        double filler = 1.0 - decision_mass - 0.05; // leave headroom below 1
        push("the", filler * 0.5);
        push("and", filler * 0.25);
        push(".", filler * 0.15);
        push("a", filler * 0.10);
    }

    std::sort(dist.entries.begin(), dist.entries.end(),
              [](const auto& a, const auto& b) { return a.second > b.second; });
    if (k >= 0 && dist.entries.size() > static_cast<std::size_t>(k)) dist.entries.resize(k);
    validate(dist);
    return dist;
}

// ---------------------------------------------------------------------------
// Caching provider

CachingProvider::CachingProvider(std::shared_ptr<LogprobProvider> inner, std::string cache_dir)
    : inner_(std::move(inner)), dir_(std::move(cache_dir)) {
    ensure_directory(dir_);
}

TokenDistribution CachingProvider::fetch_next_token_logprobs(const std::string& model_id,
                                                             const RenderedPrompt& prompt, int k) {
    std::string prompt_hash = sha256_hex(prompt.text);
    std::string key = sha256_hex(fmt::format("{}\n{}\n{}", model_id, prompt_hash, k));
    std::string path = fmt::format("{}/{}.json", dir_, key);

    if (std::filesystem::exists(path)) {
        try {
            json j = json::parse(read_text_file(path));
            TokenDistribution dist;
            dist.model_id = j.at("model_id").get<std::string>();
            dist.prompt_hash = j.at("prompt_hash").get<std::string>();
            for (const auto& e : j.at("entries"))
                dist.entries.emplace_back(e.at(0).get<std::string>(), e.at(1).get<double>());
            validate(dist);
            std::lock_guard<std::mutex> lock(mutex_);
            ++hits_;
            return dist;
        } catch (const std::exception& e) {
            log_event(fmt::format("cache: discarding unreadable entry '{}': {}", path, e.what()));
        }
    }

    TokenDistribution dist = inner_->fetch_next_token_logprobs(model_id, prompt, k);
    json entries = json::array();
    for (const auto& [token, logprob] : dist.entries) entries.push_back(json::array({token, logprob}));
    json record = {{"model_id", dist.model_id},
                   {"prompt_hash", dist.prompt_hash},
                   {"k", k},
                   {"entries", std::move(entries)}};
    write_text_file_atomic(path, record.dump());
    std::lock_guard<std::mutex> lock(mutex_);
    ++misses_;
    return dist;
}

std::size_t CachingProvider::hits() const {
    std::lock_guard<std::mutex> lock(mutex_);
    return hits_;
}

std::size_t CachingProvider::misses() const {
    std::lock_guard<std::mutex> lock(mutex_);
    return misses_;
}

} // namespace gamepred
