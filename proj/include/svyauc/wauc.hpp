#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <numeric>
#include <optional>
#include <span>
#include <vector>

#include "svyauc/error.hpp"
#include "svyauc/survey_frame.hpp"
#include "svyauc/wlogit.hpp"

namespace svyauc {

/// Scores, nonnegative weights and binary outcomes for one weighted AUC evaluation.
struct AucInput {
    std::span<const double> scores;
    std::span<const double> weights;
    std::span<const std::uint8_t> outcomes;
};

namespace detail {

/// Neumaier-compensated running sum.
struct CompensatedSum {
    double sum = 0.0;
    double carry = 0.0;

    void add(double x) {
        const double t = sum + x;
        if (std::fabs(sum) >= std::fabs(x)) carry += (sum - t) + x;
        else carry += (x - t) + sum;
        sum = t;
    }
    double value() const { return sum + carry; }
};

} // namespace detail

/// Units sorted ascending by score with exact-equality tie groups. Building it once lets many
/// weight vectors (replicates) be evaluated in O(n) each.
class ScoreRanking {
public:
    ScoreRanking() = default;

    explicit ScoreRanking(std::span<const double> scores) : order_(scores.size()) {
        std::iota(order_.begin(), order_.end(), std::size_t{0});
        std::stable_sort(order_.begin(), order_.end(),
                         [&](std::size_t a, std::size_t b) { return scores[a] < scores[b]; });
        for (std::size_t k = 0; k < order_.size(); ++k) {
            if (k + 1 == order_.size() || scores[order_[k + 1]] != scores[order_[k]]) group_end_.push_back(k + 1);
        }
    }

    std::size_t size() const noexcept { return order_.size(); }
    const std::vector<std::size_t>& order() const noexcept { return order_; }
    const std::vector<std::size_t>& group_ends() const noexcept { return group_end_; }

private:
    std::vector<std::size_t> order_;
    std::vector<std::size_t> group_end_;
};

/// Weighted AUC for a pre-sorted score vector; empty when no case or no control carries weight.
///
/// One ascending pass: each case is credited with the control weight strictly below its tie group
/// plus half the control weight inside the group, all scaled by the case weight.
inline std::optional<double> weighted_auc(const ScoreRanking& ranking, std::span<const double> weights,
                                          std::span<const std::uint8_t> outcomes) {
    const auto& order = ranking.order();
    detail::CompensatedSum below0, total1, numerator;
    std::size_t start = 0;
    for (std::size_t end : ranking.group_ends()) {
        double g0 = 0.0, g1 = 0.0;
        for (std::size_t k = start; k < end; ++k) {
            const std::size_t i = order[k];
            if (outcomes[i]) g1 += weights[i];
            else g0 += weights[i];
        }
        if (g1 != 0.0) numerator.add(g1 * (below0.value() + 0.5 * g0));
        below0.add(g0);
        total1.add(g1);
        start = end;
    }
    const double w0 = below0.value();
    const double w1 = total1.value();
    if (!(w0 > 0.0) || !(w1 > 0.0)) return std::nullopt;
    return std::clamp(numerator.value() / (w0 * w1), 0.0, 1.0);
}

inline void check_auc_input(const AucInput& input) {
    if (input.weights.size() != input.scores.size() || input.outcomes.size() != input.scores.size()) {
        throw DimensionMismatchError("AUC input vectors differ in length");
    }
    for (std::size_t i = 0; i < input.weights.size(); ++i) {
        if (!(input.weights[i] >= 0.0) || !std::isfinite(input.weights[i])) {
            throw InvalidArgumentError("AUC weights must be finite and nonnegative");
        }
        if (input.outcomes[i] > 1) throw InvalidOutcomeError(i + 1);
        if (!std::isfinite(input.scores[i])) throw NonFiniteValueError("score", i + 1);
    }
}

/// Weighted AUC: the weight-product-weighted share of concordant (control, case) pairs, ties
/// counted one half. O(n log n).
inline double weighted_auc(const AucInput& input) {
    check_auc_input(input);
    const ScoreRanking ranking(input.scores);
    const auto auc = weighted_auc(ranking, input.weights, input.outcomes);
    if (!auc) throw DegenerateAucError();
    return *auc;
}

/// Direct O(n0 * n1) double sum over (control, case) pairs.
inline double weighted_auc_direct(const AucInput& input) {
    check_auc_input(input);
    double numerator = 0.0, denominator = 0.0;
    for (std::size_t i0 = 0; i0 < input.scores.size(); ++i0) {
        if (input.outcomes[i0]) continue;
        for (std::size_t i1 = 0; i1 < input.scores.size(); ++i1) {
            if (!input.outcomes[i1]) continue;
            const double ww = input.weights[i0] * input.weights[i1];
            denominator += ww;
            if (input.scores[i0] < input.scores[i1]) numerator += ww;
            else if (input.scores[i0] == input.scores[i1]) numerator += 0.5 * ww;
        }
    }
    if (!(denominator > 0.0)) throw DegenerateAucError();
    return numerator / denominator;
}

/// Design-weighted AUC of a fitted model on the frame it was fitted to.
inline double weighted_auc(const SurveyFrame& frame, std::span<const double> probs) {
    if (probs.size() != frame.n()) throw DimensionMismatchError("probability vector length");
    return weighted_auc(AucInput{probs, frame.weights(), frame.outcomes()});
}

/// Population AUC: every unit counts once, whatever weights the frame carries.
inline double population_auc(const SurveyFrame& population, const FittedModel& model) {
    if (model.probs.size() != population.n()) throw DimensionMismatchError("model probabilities vs population");
    const std::vector<double> ones(population.n(), 1.0);
    return weighted_auc(AucInput{model.probs, ones, population.outcomes()});
}

} // namespace svyauc
