// Reference computations used only by the test suites. Each one follows the defining formula
// directly and shares no code path with the library routine it checks.
#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <random>
#include <string>
#include <vector>

#include "svyauc/survey_frame.hpp"

namespace oracle {

/// Weighted AUC as the explicit double sum over (control, case) pairs, accumulated in long double.
inline double auc_double_sum(const std::vector<double>& scores, const std::vector<double>& weights,
                             const std::vector<std::uint8_t>& outcomes) {
    long double num = 0.0L, den = 0.0L;
    for (std::size_t i0 = 0; i0 < scores.size(); ++i0) {
        if (outcomes[i0] != 0) continue;
        for (std::size_t i1 = 0; i1 < scores.size(); ++i1) {
            if (outcomes[i1] != 1) continue;
            const long double ww = static_cast<long double>(weights[i0]) * weights[i1];
            den += ww;
            if (scores[i0] < scores[i1]) num += ww;
            else if (scores[i0] == scores[i1]) num += 0.5L * ww;
        }
    }
    return static_cast<double>(num / den);
}

/// Negative log pseudo-likelihood in long double, written straight from the product form.
inline long double neg_log_pl(const svyauc::SurveyFrame& f, const std::vector<std::size_t>& cols,
                              const std::vector<long double>& beta) {
    long double total = 0.0L;
    for (std::size_t i = 0; i < f.n(); ++i) {
        long double eta = beta[0];
        for (std::size_t k = 0; k < cols.size(); ++k) eta += beta[k + 1] * f.covariate(i, cols[k]);
        const long double p = 1.0L / (1.0L + std::exp(-eta));
        const long double ll = f.outcome(i) ? std::log(p) : std::log1p(-p);
        total -= f.weight(i) * ll;
    }
    return total;
}

/// Derivative-free maximizer of the pseudo-likelihood: Nelder-Mead with restarts, then a
/// golden-section coordinate polish until no coordinate moves.
inline std::vector<double> maximize_pl(const svyauc::SurveyFrame& f, const std::vector<std::size_t>& cols) {
    const std::size_t p = cols.size() + 1;
    auto fn = [&](const std::vector<long double>& b) { return neg_log_pl(f, cols, b); };

    std::vector<long double> best(p, 0.0L);
    long double scale = 1.0L;
    for (int restart = 0; restart < 12; ++restart) {
        std::vector<std::vector<long double>> simplex(p + 1, best);
        for (std::size_t j = 0; j < p; ++j) simplex[j + 1][j] += scale;
        std::vector<long double> values(p + 1);
        for (std::size_t k = 0; k <= p; ++k) values[k] = fn(simplex[k]);
        for (int iter = 0; iter < 4000; ++iter) {
            std::vector<std::size_t> idx(p + 1);
            for (std::size_t k = 0; k <= p; ++k) idx[k] = k;
            std::sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) { return values[a] < values[b]; });
            const std::size_t lo = idx[0], hi = idx[p], second = idx[p - 1];
            if (std::fabs(values[hi] - values[lo]) < 1e-17L * (1.0L + std::fabs(values[lo]))) break;
            std::vector<long double> centroid(p, 0.0L);
            for (std::size_t k = 0; k <= p; ++k) {
                if (k == hi) continue;
                for (std::size_t j = 0; j < p; ++j) centroid[j] += simplex[k][j] / p;
            }
            auto along = [&](long double t) {
                std::vector<long double> x(p);
                for (std::size_t j = 0; j < p; ++j) x[j] = centroid[j] + t * (simplex[hi][j] - centroid[j]);
                return x;
            };
            const auto reflected = along(-1.0L);
            const long double fr = fn(reflected);
            if (fr < values[lo]) {
                const auto expanded = along(-2.0L);
                const long double fe = fn(expanded);
                if (fe < fr) { simplex[hi] = expanded; values[hi] = fe; }
                else { simplex[hi] = reflected; values[hi] = fr; }
            } else if (fr < values[second]) {
                simplex[hi] = reflected;
                values[hi] = fr;
            } else {
                const auto contracted = along(0.5L);
                const long double fc = fn(contracted);
                if (fc < values[hi]) {
                    simplex[hi] = contracted;
                    values[hi] = fc;
                } else {
                    for (std::size_t k = 0; k <= p; ++k) {
                        if (k == lo) continue;
                        for (std::size_t j = 0; j < p; ++j) simplex[k][j] = simplex[lo][j] + 0.5L * (simplex[k][j] - simplex[lo][j]);
                        values[k] = fn(simplex[k]);
                    }
                }
            }
        }
        std::size_t arg = 0;
        for (std::size_t k = 1; k <= p; ++k) if (values[k] < values[arg]) arg = k;
        best = simplex[arg];
        scale = std::max(scale * 0.1L, 1e-9L);
    }

    // Coordinate polish: golden-section search on each coordinate within a shrinking bracket.
    const long double phi = (std::sqrt(5.0L) - 1.0L) / 2.0L;
    long double width = 1e-3L;
    for (int sweep = 0; sweep < 200 && width > 1e-14L; ++sweep) {
        long double moved = 0.0L;
        for (std::size_t j = 0; j < p; ++j) {
            long double a = best[j] - width, b = best[j] + width;
            auto at = [&](long double t) { auto x = best; x[j] = t; return fn(x); };
            long double c = b - phi * (b - a), d = a + phi * (b - a);
            long double fc = at(c), fd = at(d);
            for (int it = 0; it < 200 && (b - a) > 1e-16L; ++it) {
                if (fc < fd) { b = d; d = c; fd = fc; c = b - phi * (b - a); fc = at(c); }
                else { a = c; c = d; fc = fd; d = a + phi * (b - a); fd = at(d); }
            }
            const long double t = (a + b) / 2.0L;
            if (at(t) < fn(best)) {
                moved = std::max(moved, std::fabs(t - best[j]));
                best[j] = t;
            }
        }
        if (moved < width / 4.0L) width /= 4.0L;
    }
    return std::vector<double>(best.begin(), best.end());
}

/// Delete-one-PSU jackknife variance of the weighted AUC, built from the three-branch replicate
/// weight definition and the double-sum AUC.
inline double jackknife_variance(const svyauc::SurveyFrame& f, const std::vector<double>& scores, double point) {
    std::vector<std::uint8_t> y(f.outcomes().begin(), f.outcomes().end());
    long double total = 0.0L;
    for (std::size_t h = 0; h < f.strata().size(); ++h) {
        const auto& psus = f.strata()[h].psus;
        const long double a = static_cast<long double>(psus.size());
        long double inner = 0.0L;
        for (std::size_t dropped : psus) {
            std::vector<double> w(f.n());
            for (std::size_t i = 0; i < f.n(); ++i) {
                if (f.psu_of(i) == dropped) w[i] = 0.0;
                else if (f.stratum_of(i) == h) w[i] = f.weight(i) * (static_cast<double>(a) / (static_cast<double>(a) - 1.0));
                else w[i] = f.weight(i);
            }
            const long double d = static_cast<long double>(auc_double_sum(scores, w, y)) - point;
            inner += d * d;
        }
        total += (a - 1.0L) / a * inner;
    }
    return static_cast<double>(total);
}

/// Textbook two-pass sample variance (divisor m - 1) in long double.
inline double two_pass_variance(const std::vector<double>& x) {
    long double mean = 0.0L;
    for (double v : x) mean += v;
    mean /= x.size();
    long double ss = 0.0L;
    for (double v : x) ss += (v - mean) * (v - mean);
    return static_cast<double>(ss / (x.size() - 1));
}

/// Standard normal CDF in long double and its inverse by bisection.
inline long double normal_cdf(long double z) { return 0.5L * std::erfc(-z / std::sqrt(2.0L)); }

inline long double normal_quantile_bisect(long double p) {
    // Bisect on the smaller tail so that probabilities near 1 keep their precision.
    if (p > 0.5L) return -normal_quantile_bisect(1.0L - p);
    long double lo = -40.0L, hi = 0.0L;
    for (int i = 0; i < 200; ++i) {
        const long double mid = (lo + hi) / 2.0L;
        if (normal_cdf(mid) < p) lo = mid;
        else hi = mid;
    }
    return (lo + hi) / 2.0L;
}

/// Random frame: `strata` strata with `psus` PSUs of `per_psu` units each, q normal covariates,
/// outcome from a logistic model with moderate signal, weights in [0.5, 5].
inline svyauc::SurveyFrame random_frame(std::mt19937_64& gen, std::size_t strata, std::size_t psus,
                                        std::size_t per_psu, std::size_t q) {
    std::normal_distribution<double> normal;
    std::uniform_real_distribution<double> unif(0.5, 5.0), u01;
    std::vector<svyauc::UnitRecord> units;
    std::vector<std::string> names;
    for (std::size_t k = 0; k < q; ++k) names.push_back("x" + std::to_string(k + 1));
    for (std::size_t h = 0; h < strata; ++h) {
        for (std::size_t j = 0; j < psus; ++j) {
            for (std::size_t m = 0; m < per_psu; ++m) {
                svyauc::UnitRecord u;
                u.id = std::to_string(units.size() + 1);
                u.stratum = "s" + std::to_string(h);
                u.psu = "p" + std::to_string(j);
                u.weight = unif(gen);
                double eta = -0.2;
                for (std::size_t k = 0; k < q; ++k) {
                    u.covariates.push_back(normal(gen));
                    eta += 0.8 * u.covariates.back() * (k % 2 ? -1.0 : 1.0);
                }
                u.outcome = u01(gen) < 1.0 / (1.0 + std::exp(-eta)) ? 1 : 0;
                units.push_back(std::move(u));
            }
        }
    }
    return svyauc::SurveyFrame(names, units);
}

} // namespace oracle
