#pragma once

// Statistical kernel used throughout the comparison pipeline:
// Pearson correlation, exact one-sided binomial test, one-sided Wilcoxon
// signed-rank test, and seeded percentile-bootstrap confidence intervals.
//
// All p-values are exact or tail-corrected; none of the paths use a plain
// normal approximation where the reported magnitudes (down to 1e-40 and
// below) would make it diverge.

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <utility>
#include <vector>

namespace gamepred::stats {

// Which side of a base/aligned comparison a test favors.
enum class Direction { base, aligned };

const char* direction_name(Direction d);

struct CorrelationResult {
    std::optional<double> r; // empty iff undefined (constant input or n < 2)
    std::size_t n = 0;
};

struct TestResult {
    double statistic = 0.0;
    double p_value = 1.0;
    Direction direction = Direction::base;
    std::size_t n_effective = 0;
};

// Product-moment correlation. Undefined (not NaN) when either vector is
// constant or has fewer than two entries. Throws gamepred::Error on length
// mismatch.
CorrelationResult pearson(std::span<const double> x, std::span<const double> y);

// Exact upper tail P(X >= k) for X ~ Binomial(n, 1/2), computed in log2
// space; no normal approximation. `k_majority` must be the majority count
// (k >= n - k), which the caller establishes along with `direction`.
TestResult binomial_one_sided(std::size_t k_majority, std::size_t n,
                              Direction direction = Direction::base);

// One-sided signed-rank test on paired differences. Zeros are dropped and
// tied magnitudes receive midranks. The test direction is the side with the
// larger rank sum; exactly balanced rank sums yield p = 0.5. n <= 25 uses
// the exact sign-flip distribution (rank-sum DP); larger n uses the normal
// approximation with continuity and tie corrections.
TestResult wilcoxon_signed_rank_one_sided(std::span<const double> diffs);

// Cutoff between the exact and approximate Wilcoxon paths.
inline constexpr std::size_t kWilcoxonExactLimit = 25;

// Sample median (average of the two middle order statistics for even n).
double median(std::span<const double> values);

// Percentile bootstrap interval for the median. Deterministic for a fixed
// seed: resample i draws its indices from an independent SplitMix64
// substream keyed by (seed, i), so results are stable across platforms and
// may be computed in any order.
std::pair<double, double> bootstrap_median_ci(std::span<const double> values,
                                              std::size_t resamples = 5000,
                                              double level = 0.95,
                                              std::uint64_t seed = 0);

// SplitMix64 stream; the library's only randomness source.
class SplitMix64 {
public:
    explicit SplitMix64(std::uint64_t seed) : state_(seed) {}

    std::uint64_t next() {
        std::uint64_t z = (state_ += 0x9E3779B97F4A7C15ull);
        z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
        z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
        return z ^ (z >> 31);
    }

    // Unbiased-enough bounded draw (Lemire multiply-shift); deterministic.
    std::size_t next_below(std::size_t bound) {
        return static_cast<std::size_t>(
            (static_cast<unsigned __int128>(next()) * bound) >> 64);
    }

    // Substream for counter-based use: substream(seed, i) is independent of
    // substream(seed, j) for i != j.
    static SplitMix64 substream(std::uint64_t seed, std::uint64_t index);

private:
    std::uint64_t state_;
};

} // namespace gamepred::stats
