#include "gamepred/stats.hpp"

#include "gamepred/errors.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace gamepred::stats {

const char* direction_name(Direction d) {
    return d == Direction::base ? "base" : "aligned";
}

CorrelationResult pearson(std::span<const double> x, std::span<const double> y) {
    if (x.size() != y.size())
        throw Error("pearson: length mismatch (" + std::to_string(x.size()) + " vs " +
                    std::to_string(y.size()) + ")");
    const std::size_t n = x.size();
    if (n < 2) return {std::nullopt, n};

    // Catch constant input by value, not by residual: subtracting the mean
    // from identical entries leaves rounding dust (~1e-16 per element) that
    // would otherwise masquerade as variance.
    const auto constant = [](std::span<const double> v) {
        for (double e : v)
            if (e != v.front()) return false;
        return true;
    };
    if (constant(x) || constant(y)) return {std::nullopt, n};

    const double mx = std::accumulate(x.begin(), x.end(), 0.0) / double(n);
    const double my = std::accumulate(y.begin(), y.end(), 0.0) / double(n);
    double sxy = 0.0, sxx = 0.0, syy = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        const double dx = x[i] - mx;
        const double dy = y[i] - my;
        sxy += dx * dy;
        sxx += dx * dx;
        syy += dy * dy;
    }
    if (sxx == 0.0 || syy == 0.0) return {std::nullopt, n};
    double r = sxy / std::sqrt(sxx * syy);
    r = std::clamp(r, -1.0, 1.0); // guard rounding at the boundary
    return {r, n};
}

TestResult binomial_one_sided(std::size_t k_majority, std::size_t n, Direction direction) {
    if (k_majority > n)
        throw Error("binomial_one_sided: k > n");
    if (k_majority < n - k_majority)
        throw Error("binomial_one_sided: caller must pass the majority count");

    // p = sum_{j=k}^{n} C(n,j) / 2^n, accumulated in log2 space so that the
    // k = n term is exactly 2^-n and tails near 1e-300 stay representable.
    // For j >= k >= n/2 the coefficients decrease, so we walk j upward from
    // k and the first term dominates.
    double log2c = 0.0; // log2 C(n,j) at j = k, built from the symmetric side
    for (std::size_t j = 0; j < n - k_majority; ++j)
        log2c += std::log2(double(n - j)) - std::log2(double(j + 1));

    double sum = 1.0; // sum of C(n,j) / C(n,k), starting from the j = k term
    double rel = 1.0;
    for (std::size_t j = k_majority; j < n; ++j) {
        rel *= double(n - j) / double(j + 1);
        sum += rel;
    }
    const double p = std::exp2(log2c + std::log2(sum) - double(n));
    return {double(k_majority), std::min(p, 1.0), direction, n};
}

namespace {

// Midranks of |d| (ties share the average rank), in input order.
std::vector<double> midranks(const std::vector<double>& absd) {
    const std::size_t n = absd.size();
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(),
              [&](std::size_t a, std::size_t b) { return absd[a] < absd[b]; });
    std::vector<double> ranks(n, 0.0);
    std::size_t i = 0;
    while (i < n) {
        std::size_t j = i;
        while (j + 1 < n && absd[order[j + 1]] == absd[order[i]]) ++j;
        const double r = (double(i) + double(j)) / 2.0 + 1.0;
        for (std::size_t t = i; t <= j; ++t) ranks[order[t]] = r;
        i = j + 1;
    }
    return ranks;
}

// Exact P(W+ >= stat) under random sign flips, via a DP over achievable
// rank sums. Midranks are multiples of 1/2, so doubling makes them integers.
double exact_signflip_tail(const std::vector<double>& ranks, double stat) {
    std::vector<std::size_t> doubled(ranks.size());
    std::size_t total = 0;
    for (std::size_t i = 0; i < ranks.size(); ++i) {
        doubled[i] = static_cast<std::size_t>(std::llround(2.0 * ranks[i]));
        total += doubled[i];
    }
    std::vector<double> count(total + 1, 0.0);
    count[0] = 1.0;
    for (std::size_t r : doubled)
        for (std::size_t s = total - r + 1; s-- > 0;)
            if (count[s] != 0.0) count[s + r] += count[s];

    const auto threshold = static_cast<std::size_t>(std::llround(2.0 * stat));
    double favorable = 0.0;
    for (std::size_t s = threshold; s <= total; ++s) favorable += count[s];
    return favorable * std::exp2(-double(ranks.size()));
}

// Upper-tail normal approximation with continuity correction and the
// standard tie correction sum(t^3 - t) / 48.
double approx_signflip_tail(const std::vector<double>& ranks, double stat) {
    const double n = double(ranks.size());
    const double mean = n * (n + 1.0) / 4.0;
    double var = n * (n + 1.0) * (2.0 * n + 1.0) / 24.0;

    std::vector<double> sorted(ranks);
    std::sort(sorted.begin(), sorted.end());
    std::size_t i = 0;
    while (i < sorted.size()) {
        std::size_t j = i;
        while (j + 1 < sorted.size() && sorted[j + 1] == sorted[i]) ++j;
        const double t = double(j - i + 1);
        var -= (t * t * t - t) / 48.0;
        i = j + 1;
    }
    if (var <= 0.0) return 1.0;
    const double z = (stat - 0.5 - mean) / std::sqrt(var);
    return 0.5 * std::erfc(z / std::sqrt(2.0));
}

} // namespace

TestResult wilcoxon_signed_rank_one_sided(std::span<const double> diffs) {
    if (diffs.empty())
        throw Error("wilcoxon_signed_rank_one_sided: empty input");

    std::vector<double> d;
    d.reserve(diffs.size());
    for (double v : diffs)
        if (v != 0.0) d.push_back(v);
    if (d.empty()) return {0.0, 1.0, Direction::base, 0}; // all-zero: degenerate

    std::vector<double> absd(d.size());
    for (std::size_t i = 0; i < d.size(); ++i) absd[i] = std::fabs(d[i]);
    const std::vector<double> ranks = midranks(absd);

    double w_plus = 0.0, w_total = 0.0;
    for (std::size_t i = 0; i < d.size(); ++i) {
        w_total += ranks[i];
        if (d[i] > 0.0) w_plus += ranks[i];
    }
    const double w_minus = w_total - w_plus;

    if (w_plus == w_minus)
        return {w_plus, 0.5, Direction::base, d.size()}; // no majority side

    const Direction dir = w_plus > w_minus ? Direction::base : Direction::aligned;
    const double stat = std::max(w_plus, w_minus);
    const double p = d.size() <= kWilcoxonExactLimit ? exact_signflip_tail(ranks, stat)
                                                     : approx_signflip_tail(ranks, stat);
    return {stat, std::clamp(p, 0.0, 1.0), dir, d.size()};
}

double median(std::span<const double> values) {
    if (values.empty()) throw Error("median: empty input");
    std::vector<double> v(values.begin(), values.end());
    std::sort(v.begin(), v.end());
    const std::size_t n = v.size();
    return n % 2 == 1 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

SplitMix64 SplitMix64::substream(std::uint64_t seed, std::uint64_t index) {
    // Two finalizer rounds decorrelate (seed, index) pairs.
    SplitMix64 keyer(seed ^ (0xD1B54A32D192ED03ull * (index + 1)));
    keyer.next();
    return SplitMix64(keyer.next());
}

std::pair<double, double> bootstrap_median_ci(std::span<const double> values,
                                              std::size_t resamples, double level,
                                              std::uint64_t seed) {
    if (values.empty()) throw Error("bootstrap_median_ci: empty input");
    if (level <= 0.0 || level >= 1.0) throw Error("bootstrap_median_ci: level outside (0,1)");

    const std::size_t n = values.size();
    std::vector<double> meds(resamples);
    std::vector<double> sample(n);
    for (std::size_t i = 0; i < resamples; ++i) {
        SplitMix64 rng = SplitMix64::substream(seed, i);
        for (std::size_t j = 0; j < n; ++j) sample[j] = values[rng.next_below(n)];
        meds[i] = median(sample);
    }
    std::sort(meds.begin(), meds.end());

    // Percentile method with linear interpolation between order statistics.
    auto quantile = [&](double q) {
        const double pos = q * double(meds.size() - 1);
        const std::size_t lo = static_cast<std::size_t>(pos);
        if (lo + 1 >= meds.size()) return meds.back();
        const double frac = pos - double(lo);
        return meds[lo] + frac * (meds[lo + 1] - meds[lo]);
    };
    const double alpha = (1.0 - level) / 2.0;
    return {quantile(alpha), quantile(1.0 - alpha)};
}

} // namespace gamepred::stats
