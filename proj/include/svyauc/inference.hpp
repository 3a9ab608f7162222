#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <span>
#include <vector>

#include "svyauc/error.hpp"
#include "svyauc/normal.hpp"
#include "svyauc/parallel.hpp"
#include "svyauc/replicates.hpp"
#include "svyauc/survey_frame.hpp"
#include "svyauc/wauc.hpp"
#include "svyauc/wlogit.hpp"

namespace svyauc {

/// Marker for a replicate whose AUC is undefined (no positive-weight case or control).
inline constexpr double missing_replicate = std::numeric_limits<double>::quiet_NaN();
inline bool is_missing(double x) { return std::isnan(x); }

/// Share of degenerate bootstrap replicates tolerated before an estimate is refused.
inline constexpr double max_degenerate_fraction = 0.01;

struct AucEstimate {
    double point = 0.0;
    Method method = Method::jkn;
    double variance = 0.0;
    std::vector<double> replicate_aucs; // NaN marks a degenerate replicate
    std::size_t n_used_replicates = 0;
    std::size_t degenerate_replicates = 0;

    double se() const { return std::sqrt(variance); }
};

enum class IntervalKind { normal, percentile };

struct ConfidenceInterval {
    double lower = 0.0;
    double upper = 0.0;
    double level = 0.95;
    IntervalKind construction = IntervalKind::normal;
    bool outside_unit_interval = false; // reported unclipped; flagged instead

    bool contains(double x) const { return lower <= x && x <= upper; }
};

enum class Pairing { independent, paired };

struct TestResult {
    double d_hat = 0.0;
    double variance_d = 0.0;
    double z = 0.0;
    double p_value = 1.0;
    bool reject = false;
    Pairing pairing = Pairing::independent;
    Method method = Method::jkn;
    std::size_t n_used_replicates = 0;
    std::size_t degenerate_replicates = 0;
};

/// Replicate AUCs for a fixed score ranking; NaN where a replicate is degenerate. Replicates are
/// independent, so the result does not depend on `threads`.
inline std::vector<double> replicate_aucs(const ScoreRanking& ranking, std::span<const std::uint8_t> outcomes,
                                          const ReplicateWeightSet& set, unsigned threads = 1) {
    if (set.units() != ranking.size() || outcomes.size() != ranking.size()) {
        throw DimensionMismatchError("replicate weights vs scores");
    }
    std::vector<double> out(set.size());
    parallel_for(set.size(), threads, [&](std::size_t r) {
        const auto auc = weighted_auc(ranking, set.replicate(r), outcomes);
        out[r] = auc ? *auc : missing_replicate;
    });
    return out;
}

/// Jackknife variance: sum over strata of (a_h - 1)/a_h times the squared deviations of that
/// stratum's replicates from the full-sample estimate. Every replicate must be present.
inline double variance_jkn(double point, const ReplicateWeightSet& set, std::span<const double> replicate_values) {
    if (set.scheme() != Method::jkn) throw MethodMismatchError("jackknife variance needs jackknife replicates");
    if (replicate_values.size() != set.size()) throw DimensionMismatchError("replicate AUC count");
    const auto& strata = set.jkn_strata();
    std::size_t strata_count = 0;
    for (std::size_t h : strata) strata_count = std::max(strata_count, h + 1);

    std::vector<double> inner(strata_count, 0.0), factor(strata_count, 0.0);
    for (std::size_t r = 0; r < replicate_values.size(); ++r) {
        if (is_missing(replicate_values[r])) throw MissingReplicateError(r);
        const double d = replicate_values[r] - point;
        inner[strata[r]] += d * d;
        factor[strata[r]] = set.jkn_factors()[r];
    }
    double total = 0.0;
    for (std::size_t h = 0; h < strata_count; ++h) total += factor[h] * inner[h];
    return total;
}

/// Bootstrap variance: sample variance (divisor B - 1) of the non-missing replicate values.
inline double variance_boot(std::span<const double> replicate_values) {
    detail::CompensatedSum sum;
    std::size_t used = 0;
    for (double v : replicate_values) {
        if (is_missing(v)) continue;
        sum.add(v);
        ++used;
    }
    if (used < 2) throw InsufficientReplicatesError(used);
    const double mean = sum.value() / static_cast<double>(used);
    detail::CompensatedSum squares;
    for (double v : replicate_values) {
        if (is_missing(v)) continue;
        squares.add((v - mean) * (v - mean));
    }
    return squares.value() / static_cast<double>(used - 1);
}

/// point -/+ z_{alpha/2} * sqrt(variance), not clipped to [0,1].
inline ConfidenceInterval ci_normal(double point, double variance, double alpha) {
    if (!(alpha > 0.0 && alpha < 1.0)) throw InvalidArgumentError("alpha must lie in (0,1)");
    if (!(variance >= 0.0) || !std::isfinite(variance)) throw InvalidArgumentError("variance must be finite and >= 0");
    const double half = two_sided_critical_value(alpha) * std::sqrt(variance);
    ConfidenceInterval ci{point - half, point + half, 1.0 - alpha, IntervalKind::normal, false};
    ci.outside_unit_interval = ci.lower < 0.0 || ci.upper > 1.0;
    return ci;
}

/// Sample quantile by linear interpolation between order statistics at 1-based position
/// (m - 1) q + 1 ("type 7"). `sorted` must be ascending and non-empty.
inline double quantile_type7(std::span<const double> sorted, double q) {
    const double h = static_cast<double>(sorted.size() - 1) * q;
    const auto lo = static_cast<std::size_t>(std::floor(h));
    if (lo + 1 >= sorted.size()) return sorted.back();
    return sorted[lo] + (h - static_cast<double>(lo)) * (sorted[lo + 1] - sorted[lo]);
}

/// Percentile interval (theta_{alpha/2}, theta_{1-alpha/2}) of bootstrap replicate AUCs, type-7 quantiles.
inline ConfidenceInterval ci_percentile(std::span<const double> replicate_values, double alpha) {
    if (!(alpha > 0.0 && alpha < 1.0)) throw InvalidArgumentError("alpha must lie in (0,1)");
    std::vector<double> values;
    values.reserve(replicate_values.size());
    for (double v : replicate_values) {
        if (!is_missing(v)) values.push_back(v);
    }
    if (values.size() < 2) throw InsufficientReplicatesError(values.size());
    std::sort(values.begin(), values.end());
    ConfidenceInterval ci{quantile_type7(values, alpha / 2.0), quantile_type7(values, 1.0 - alpha / 2.0), 1.0 - alpha,
                          IntervalKind::percentile, false};
    ci.outside_unit_interval = ci.lower < 0.0 || ci.upper > 1.0;
    return ci;
}

inline ConfidenceInterval ci_percentile(const AucEstimate& estimate, double alpha) {
    if (!is_bootstrap(estimate.method)) {
        throw MethodMismatchError("percentile intervals are defined for bootstrap methods only");
    }
    return ci_percentile(estimate.replicate_aucs, alpha);
}

inline ConfidenceInterval ci_normal(const AucEstimate& estimate, double alpha) {
    return ci_normal(estimate.point, estimate.variance, alpha);
}

namespace detail {

inline std::size_t count_missing(std::span<const double> values) {
    return static_cast<std::size_t>(std::count_if(values.begin(), values.end(), [](double v) { return is_missing(v); }));
}

inline void check_degenerate(std::size_t degenerate, std::size_t total) {
    if (static_cast<double>(degenerate) > max_degenerate_fraction * static_cast<double>(total)) {
        throw DegenerateReplicatesError(degenerate, total);
    }
}

inline double replicate_variance(double point, const ReplicateWeightSet& set, std::span<const double> values) {
    return set.scheme() == Method::jkn ? variance_jkn(point, set, values) : variance_boot(values);
}

/// Wald statistic and two-sided p-value. Zero variance: D = 0 gives p = 1, otherwise z is infinite.
inline void finish_test(TestResult& t, double alpha) {
    if (!(alpha > 0.0 && alpha < 1.0)) throw InvalidArgumentError("alpha must lie in (0,1)");
    if (!(t.variance_d > 0.0)) {
        if (t.d_hat != 0.0) throw InfiniteStatisticError();
        t.z = 0.0;
        t.p_value = 1.0;
    } else {
        t.z = t.d_hat / std::sqrt(t.variance_d);
        t.p_value = std::min(1.0, 2.0 * std_normal_sf(std::fabs(t.z)));
    }
    t.reject = t.p_value < alpha;
}

} // namespace detail

/// Point estimate plus replicate-based variance for scores `probs` evaluated on `frame` with a
/// prepared replicate set. Degenerate bootstrap replicates are dropped (at most 1% tolerated).
inline AucEstimate estimate_auc(const SurveyFrame& frame, std::span<const double> probs, const ReplicateWeightSet& set,
                                unsigned threads = 1) {
    if (probs.size() != frame.n()) throw DimensionMismatchError("probability vector length");
    AucEstimate est;
    est.method = set.scheme();
    est.point = weighted_auc(frame, probs);
    const ScoreRanking ranking(probs);
    est.replicate_aucs = replicate_aucs(ranking, frame.outcomes(), set, threads);
    est.degenerate_replicates = detail::count_missing(est.replicate_aucs);
    est.n_used_replicates = est.replicate_aucs.size() - est.degenerate_replicates;
    if (is_bootstrap(est.method)) detail::check_degenerate(est.degenerate_replicates, est.replicate_aucs.size());
    est.variance = detail::replicate_variance(est.point, set, est.replicate_aucs);
    return est;
}

inline AucEstimate estimate_auc(const SurveyFrame& frame, std::span<const double> probs, Method method,
                                std::size_t replicates, const ResampleRng& rng, unsigned threads = 1) {
    const ReplicateWeightSet set = replicate_weights(frame, method, replicates, rng);
    return estimate_auc(frame, probs, set, threads);
}

/// Wald test for two AUCs estimated on independent samples: z = D / sqrt(var1 + var2).
inline TestResult test_independent(const AucEstimate& first, const AucEstimate& second, double alpha) {
    if (first.method != second.method) throw MethodMismatchError("both estimates must use the same method");
    if (!std::isfinite(first.variance) || !std::isfinite(second.variance)) {
        throw InvalidArgumentError("variances must be finite");
    }
    TestResult t;
    t.pairing = Pairing::independent;
    t.method = first.method;
    t.d_hat = first.point - second.point;
    t.variance_d = first.variance + second.variance;
    t.n_used_replicates = std::min(first.n_used_replicates, second.n_used_replicates);
    t.degenerate_replicates = first.degenerate_replicates + second.degenerate_replicates;
    detail::finish_test(t, alpha);
    return t;
}

/// Per-replicate AUC differences for two score vectors over one shared replicate set; NaN where
/// either AUC is missing.
inline std::vector<double> replicate_differences(const SurveyFrame& frame, std::span<const double> probs1,
                                                 std::span<const double> probs2, const ReplicateWeightSet& set,
                                                 unsigned threads = 1) {
    const ScoreRanking r1(probs1), r2(probs2);
    const auto a1 = replicate_aucs(r1, frame.outcomes(), set, threads);
    const auto a2 = replicate_aucs(r2, frame.outcomes(), set, threads);
    std::vector<double> d(set.size());
    for (std::size_t r = 0; r < d.size(); ++r) {
        d[r] = (is_missing(a1[r]) || is_missing(a2[r])) ? missing_replicate : a1[r] - a2[r];
    }
    return d;
}

/// Paired comparison of two score vectors on the same sample. Both AUCs are evaluated on every
/// replicate of the single shared set, so their covariance enters the variance of the difference.
inline TestResult test_paired(const SurveyFrame& frame, std::span<const double> probs1, std::span<const double> probs2,
                              const ReplicateWeightSet& set, double alpha, unsigned threads = 1) {
    if (probs1.size() != frame.n() || probs2.size() != frame.n()) {
        throw DimensionMismatchError("probability vector length");
    }
    TestResult t;
    t.pairing = Pairing::paired;
    t.method = set.scheme();
    t.d_hat = weighted_auc(frame, probs1) - weighted_auc(frame, probs2);
    const auto d = replicate_differences(frame, probs1, probs2, set, threads);
    t.degenerate_replicates = detail::count_missing(d);
    t.n_used_replicates = d.size() - t.degenerate_replicates;
    if (is_bootstrap(t.method)) detail::check_degenerate(t.degenerate_replicates, d.size());
    t.variance_d = detail::replicate_variance(t.d_hat, set, d);
    detail::finish_test(t, alpha);
    return t;
}

inline TestResult test_paired(const SurveyFrame& frame, const FittedModel& model1, const FittedModel& model2,
                              Method method, std::size_t replicates, const ResampleRng& rng, double alpha,
                              unsigned threads = 1) {
    const ReplicateWeightSet set = replicate_weights(frame, method, replicates, rng);
    return test_paired(frame, model1.probs, model2.probs, set, alpha, threads);
}

} // namespace svyauc
