#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <numeric>
#include <span>
#include <string>
#include <vector>

#include "svyauc/error.hpp"
#include "svyauc/survey_frame.hpp"

namespace svyauc {

/// Logistic model fitted by maximizing the weighted (pseudo-)likelihood.
/// beta[0] is the intercept; beta[k+1] multiplies frame covariate covariates[k].
struct FittedModel {
    std::vector<std::size_t> covariates;
    std::vector<double> beta;
    std::vector<double> probs;
    bool converged = false;
    int iterations = 0;
    double max_abs_score = 0.0;
};

class NonConvergenceError : public NumericalError {
public:
    explicit NonConvergenceError(FittedModel last)
        : NumericalError("pseudo-likelihood fit did not converge after " + std::to_string(last.iterations) +
                         " iterations"),
          last_(std::move(last)) {}
    const FittedModel& last_iterate() const noexcept { return last_; }

private:
    FittedModel last_;
};

struct FitOptions {
    int max_iterations = 100;
    double score_tolerance = 1e-8;  // relative to the weight total
    double step_tolerance = 1e-10;  // relative coefficient change
    double divergence_bound = 30.0; // |beta_j| beyond this is treated as separation
    double rank_tolerance = 1e-10;
};

/// Inverse logit that never overflows and stays strictly inside (0,1).
inline double inverse_logit(double eta) {
    constexpr double lo = std::numeric_limits<double>::min();
    constexpr double hi = 1.0 - std::numeric_limits<double>::epsilon() / 2.0;
    double p;
    if (eta >= 0.0) {
        p = 1.0 / (1.0 + std::exp(-eta));
    } else {
        const double e = std::exp(eta);
        p = e / (1.0 + e);
    }
    return std::clamp(p, lo, hi);
}

namespace detail {

inline double softplus(double x) { return std::max(x, 0.0) + std::log1p(std::exp(-std::fabs(x))); }

inline Eigen::MatrixXd design_matrix(const SurveyFrame& frame, std::span<const std::size_t> covariates) {
    Eigen::MatrixXd x(frame.n(), covariates.size() + 1);
    for (std::size_t i = 0; i < frame.n(); ++i) {
        x(i, 0) = 1.0;
        for (std::size_t k = 0; k < covariates.size(); ++k) x(i, k + 1) = frame.covariate(i, covariates[k]);
    }
    return x;
}

inline void check_covariates(const SurveyFrame& frame, std::span<const std::size_t> covariates) {
    for (std::size_t c : covariates) {
        if (c >= frame.q()) {
            throw DimensionMismatchError("covariate index " + std::to_string(c) + " but frame has " +
                                         std::to_string(frame.q()) + " covariates");
        }
    }
}

} // namespace detail

/// Log pseudo-likelihood sum_i w_i [y_i log p_i + (1 - y_i) log(1 - p_i)] at beta.
inline double log_pseudo_likelihood(const SurveyFrame& frame, std::span<const std::size_t> covariates,
                                    std::span<const double> beta) {
    detail::check_covariates(frame, covariates);
    if (beta.size() != covariates.size() + 1) throw DimensionMismatchError("beta length");
    double total = 0.0;
    for (std::size_t i = 0; i < frame.n(); ++i) {
        double eta = beta[0];
        for (std::size_t k = 0; k < covariates.size(); ++k) eta += beta[k + 1] * frame.covariate(i, covariates[k]);
        total -= frame.weight(i) * detail::softplus(frame.outcome(i) ? -eta : eta);
    }
    return total;
}

/// Weighted score vector sum_i w_i (y_i - p_i) x_i, intercept first.
inline std::vector<double> weighted_score(const SurveyFrame& frame, std::span<const std::size_t> covariates,
                                          std::span<const double> beta) {
    detail::check_covariates(frame, covariates);
    if (beta.size() != covariates.size() + 1) throw DimensionMismatchError("beta length");
    std::vector<double> score(beta.size(), 0.0);
    for (std::size_t i = 0; i < frame.n(); ++i) {
        double eta = beta[0];
        for (std::size_t k = 0; k < covariates.size(); ++k) eta += beta[k + 1] * frame.covariate(i, covariates[k]);
        const double r = frame.weight(i) * (frame.outcome(i) - inverse_logit(eta));
        score[0] += r;
        for (std::size_t k = 0; k < covariates.size(); ++k) score[k + 1] += r * frame.covariate(i, covariates[k]);
    }
    return score;
}

/// Predicted event probabilities for every unit of `frame`.
inline std::vector<double> predict(std::span<const double> beta, const SurveyFrame& frame,
                                   std::span<const std::size_t> covariates) {
    detail::check_covariates(frame, covariates);
    if (beta.size() != covariates.size() + 1) {
        throw DimensionMismatchError("beta has " + std::to_string(beta.size()) + " entries for " +
                                     std::to_string(covariates.size()) + " covariates");
    }
    std::vector<double> probs(frame.n());
    for (std::size_t i = 0; i < frame.n(); ++i) {
        double eta = beta[0];
        for (std::size_t k = 0; k < covariates.size(); ++k) eta += beta[k + 1] * frame.covariate(i, covariates[k]);
        probs[i] = inverse_logit(eta);
    }
    return probs;
}

inline std::vector<double> predict(const FittedModel& model, const SurveyFrame& frame) {
    return predict(model.beta, frame, model.covariates);
}

/// Newton-Raphson (IRLS) maximization of the log pseudo-likelihood with step halving.
///
/// Converged when the largest absolute score entry is at most score_tolerance * sum(w) and the
/// last relative coefficient change is at most step_tolerance.
inline FittedModel fit_pseudo_likelihood(const SurveyFrame& frame, std::vector<std::size_t> covariates,
                                         const FitOptions& options = {}) {
    detail::check_covariates(frame, covariates);
    const std::size_t n = frame.n();
    const std::size_t p = covariates.size() + 1;
    const auto w = frame.weights();
    const auto y = frame.outcomes();

    double w_total = 0.0, w_events = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        w_total += w[i];
        if (y[i]) w_events += w[i];
    }
    if (w_events <= 0.0 || w_events >= w_total) {
        throw InvalidArgumentError("pseudo-likelihood fit needs at least one event and one non-event");
    }

    const Eigen::MatrixXd x = detail::design_matrix(frame, covariates);
    {
        Eigen::MatrixXd scaled = x;
        for (std::size_t i = 0; i < n; ++i) scaled.row(i) *= std::sqrt(w[i]);
        for (Eigen::Index c = 0; c < scaled.cols(); ++c) {
            const double norm = scaled.col(c).norm();
            if (norm > 0.0) scaled.col(c) /= norm;
        }
        Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(scaled);
        qr.setThreshold(options.rank_tolerance);
        if (static_cast<std::size_t>(qr.rank()) < p) {
            throw RankDeficientError("rank " + std::to_string(qr.rank()) + " < " + std::to_string(p) + " columns");
        }
    }

    const Eigen::Map<const Eigen::VectorXd> wv(w.data(), static_cast<Eigen::Index>(n));
    Eigen::VectorXd yv(n);
    for (std::size_t i = 0; i < n; ++i) yv[i] = y[i];

    auto objective = [&](const Eigen::VectorXd& b) {
        const Eigen::VectorXd eta = x * b;
        double total = 0.0;
        for (std::size_t i = 0; i < n; ++i) total -= w[i] * detail::softplus(y[i] ? -eta[i] : eta[i]);
        return total;
    };

    Eigen::VectorXd beta = Eigen::VectorXd::Zero(p);
    const double ybar = w_events / w_total;
    beta[0] = std::log(ybar / (1.0 - ybar));

    FittedModel model;
    model.covariates = std::move(covariates);
    Eigen::VectorXd prob(n), score(p);
    double rel_change = std::numeric_limits<double>::infinity();
    double current = objective(beta);

    for (int iter = 0;; ++iter) {
        const Eigen::VectorXd eta = x * beta;
        for (std::size_t i = 0; i < n; ++i) prob[i] = inverse_logit(eta[i]);
        score = x.transpose() * (wv.array() * (yv - prob).array()).matrix();
        model.iterations = iter;
        model.max_abs_score = score.cwiseAbs().maxCoeff();

        if (model.max_abs_score <= options.score_tolerance * w_total && rel_change <= options.step_tolerance) {
            model.converged = true;
            break;
        }
        if (iter >= options.max_iterations) break;

        const Eigen::VectorXd curvature = wv.array() * prob.array() * (1.0 - prob.array());
        const Eigen::MatrixXd info = x.transpose() * curvature.asDiagonal() * x;
        const Eigen::LDLT<Eigen::MatrixXd> ldlt(info);
        if (ldlt.info() != Eigen::Success || !ldlt.isPositive()) {
            throw RankDeficientError("information matrix is not positive definite");
        }
        const Eigen::VectorXd delta = ldlt.solve(score);

        double step = 1.0;
        Eigen::VectorXd candidate = beta + delta;
        double value = objective(candidate);
        const double slack = 1e-13 * (1.0 + std::fabs(current));
        while (!(value >= current - slack) && step > 1e-10) {
            step *= 0.5;
            candidate = beta + step * delta;
            value = objective(candidate);
        }
        rel_change = (step * delta).cwiseAbs().maxCoeff() / std::max(1.0, candidate.cwiseAbs().maxCoeff());
        beta = candidate;
        current = value;

        for (Eigen::Index j = 0; j < beta.size(); ++j) {
            if (!std::isfinite(beta[j]) || std::fabs(beta[j]) > options.divergence_bound) {
                throw SeparationError(static_cast<std::size_t>(j));
            }
        }
    }

    model.beta.assign(beta.data(), beta.data() + beta.size());
    model.probs = predict(model.beta, frame, model.covariates);
    if (!model.converged) throw NonConvergenceError(std::move(model));
    return model;
}

} // namespace svyauc
