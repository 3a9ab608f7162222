#pragma once

#include <algorithm>
#include <cctype>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <ostream>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "svyauc/error.hpp"
#include "svyauc/rng.hpp"
#include "svyauc/survey_frame.hpp"

namespace svyauc {

/// Variance estimation method; doubles as the replicate-weight scheme.
/// jkn: delete-one-PSU stratified jackknife. rb: Rao-Wu rescaling bootstrap drawing a_h - 1 PSUs.
/// rbn: rescaling bootstrap drawing a_h PSUs, no rescaling. trb: unit-level bootstrap ignoring design.
enum class Method { jkn, rb, rbn, trb };

inline constexpr Method all_methods[] = {Method::jkn, Method::rb, Method::rbn, Method::trb};

inline std::string_view to_string(Method m) {
    switch (m) {
    case Method::jkn: return "JKn";
    case Method::rb: return "RB";
    case Method::rbn: return "RBn";
    case Method::trb: return "trB";
    }
    return "?";
}

inline std::optional<Method> parse_method(std::string_view s) {
    std::string lower(s);
    for (auto& c : lower) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
    if (lower == "jkn") return Method::jkn;
    if (lower == "rb") return Method::rb;
    if (lower == "rbn") return Method::rbn;
    if (lower == "trb") return Method::trb;
    return std::nullopt;
}

inline bool is_bootstrap(Method m) { return m != Method::jkn; }

/// Dense replicate weights: replicate(r)[i] is the weight of unit position i in replicate r.
/// For the jackknife, replicate r drops one PSU and carries that stratum's (a_h - 1)/a_h factor.
class ReplicateWeightSet {
public:
    ReplicateWeightSet(Method scheme, std::size_t units, std::vector<double> weights,
                       std::vector<double> jkn_factors = {}, std::vector<std::size_t> jkn_strata = {},
                       std::vector<std::size_t> jkn_psus = {})
        : scheme_(scheme), units_(units), weights_(std::move(weights)), jkn_factors_(std::move(jkn_factors)),
          jkn_strata_(std::move(jkn_strata)), jkn_psus_(std::move(jkn_psus)) {
        if (units_ == 0 || weights_.size() % units_ != 0) throw DimensionMismatchError("replicate weight matrix");
    }

    Method scheme() const noexcept { return scheme_; }
    std::size_t units() const noexcept { return units_; }
    std::size_t size() const noexcept { return weights_.size() / units_; }

    std::span<const double> replicate(std::size_t r) const {
        return std::span<const double>(weights_).subspan(r * units_, units_);
    }

    const std::vector<double>& jkn_factors() const noexcept { return jkn_factors_; }
    /// Stratum (frame index) whose PSU replicate r drops.
    const std::vector<std::size_t>& jkn_strata() const noexcept { return jkn_strata_; }
    /// PSU (frame index) dropped by replicate r.
    const std::vector<std::size_t>& jkn_psus() const noexcept { return jkn_psus_; }

private:
    Method scheme_;
    std::size_t units_;
    std::vector<double> weights_;
    std::vector<double> jkn_factors_;
    std::vector<std::size_t> jkn_strata_;
    std::vector<std::size_t> jkn_psus_;
};

/// Jackknife replicates, one per PSU, ordered by stratum then PSU. Replicate (h,j) zeroes PSU (h,j),
/// multiplies the rest of stratum h by a_h/(a_h - 1) and leaves other strata untouched.
inline ReplicateWeightSet jkn_weights(const SurveyFrame& frame) {
    const DesignSummary design = validate_for_replication(frame);
    const std::size_t n = frame.n();
    const auto base = frame.weights();

    std::vector<double> weights;
    weights.reserve(design.total_psus * n);
    std::vector<double> factors;
    std::vector<std::size_t> strata, psus;

    for (std::size_t h = 0; h < frame.strata().size(); ++h) {
        const auto& stratum = frame.strata()[h];
        const double a = static_cast<double>(stratum.psus.size());
        const double multiplier = a / (a - 1.0);
        for (std::size_t dropped : stratum.psus) {
            const std::size_t offset = weights.size();
            weights.insert(weights.end(), base.begin(), base.end());
            for (std::size_t j : stratum.psus) {
                for (std::size_t i : frame.psus()[j].units) {
                    weights[offset + i] = (j == dropped) ? 0.0 : base[i] * multiplier;
                }
            }
            factors.push_back((a - 1.0) / a);
            strata.push_back(h);
            psus.push_back(dropped);
        }
    }
    return ReplicateWeightSet(Method::jkn, n, std::move(weights), std::move(factors), std::move(strata),
                              std::move(psus));
}

namespace detail {

inline void check_replicate_count(std::size_t replicates) {
    if (replicates < 2) throw InvalidArgumentError("bootstrap needs at least 2 replicates");
}

/// Shared body of the two rescaling bootstraps: per stratum, `draws(a_h)` PSUs are drawn uniformly
/// with replacement and unit weights become w_i * scale(a_h) * k.
template <class Draws, class Scale>
ReplicateWeightSet psu_bootstrap(const SurveyFrame& frame, Method scheme, std::size_t replicates,
                                 const ResampleRng& rng, Draws draws, Scale scale) {
    validate_for_replication(frame);
    check_replicate_count(replicates);
    const std::size_t n = frame.n();
    const auto base = frame.weights();
    const auto tag = static_cast<std::uint64_t>(scheme);

    std::vector<double> weights(replicates * n);
    std::vector<std::uint32_t> counts;
    for (std::size_t b = 0; b < replicates; ++b) {
        double* out = weights.data() + b * n;
        for (std::size_t h = 0; h < frame.strata().size(); ++h) {
            const auto& psus = frame.strata()[h].psus;
            const std::size_t a = psus.size();
            KeyedGenerator gen(rng, {tag, b, h});
            counts.assign(a, 0);
            const std::size_t m = draws(a);
            for (std::size_t d = 0; d < m; ++d) ++counts[gen.bounded(a)];
            const double factor = scale(a);
            for (std::size_t j = 0; j < a; ++j) {
                const double k = counts[j];
                for (std::size_t i : frame.psus()[psus[j]].units) out[i] = base[i] * factor * k;
            }
        }
    }
    return ReplicateWeightSet(scheme, n, std::move(weights));
}

} // namespace detail

/// Rao-Wu rescaling bootstrap: a_h - 1 PSU draws per stratum, w_i * a_h/(a_h - 1) * k_(h,j).
inline ReplicateWeightSet rb_weights(const SurveyFrame& frame, std::size_t replicates, const ResampleRng& rng) {
    return detail::psu_bootstrap(
        frame, Method::rb, replicates, rng, [](std::size_t a) { return a - 1; },
        [](std::size_t a) { return static_cast<double>(a) / static_cast<double>(a - 1); });
}

/// Rescaling bootstrap with a_h PSU draws per stratum and weights w_i * k_(h,j).
inline ReplicateWeightSet rbn_weights(const SurveyFrame& frame, std::size_t replicates, const ResampleRng& rng) {
    return detail::psu_bootstrap(
        frame, Method::rbn, replicates, rng, [](std::size_t a) { return a; }, [](std::size_t) { return 1.0; });
}

/// Unit-level bootstrap: n draws with replacement over all units, weights w_i * k_i.
inline ReplicateWeightSet trb_weights(const SurveyFrame& frame, std::size_t replicates, const ResampleRng& rng) {
    detail::check_replicate_count(replicates);
    const std::size_t n = frame.n();
    if (n < 2) throw InvalidArgumentError("unit bootstrap needs at least 2 units");
    const auto base = frame.weights();
    const auto tag = static_cast<std::uint64_t>(Method::trb);

    std::vector<double> weights(replicates * n);
    std::vector<std::uint32_t> counts(n);
    for (std::size_t b = 0; b < replicates; ++b) {
        KeyedGenerator gen(rng, {tag, b});
        std::fill(counts.begin(), counts.end(), 0u);
        for (std::size_t d = 0; d < n; ++d) ++counts[gen.bounded(n)];
        double* out = weights.data() + b * n;
        for (std::size_t i = 0; i < n; ++i) out[i] = base[i] * static_cast<double>(counts[i]);
    }
    return ReplicateWeightSet(Method::trb, n, std::move(weights));
}

/// Replicate weights for any method; `replicates` and `rng` are ignored for the jackknife.
inline ReplicateWeightSet replicate_weights(const SurveyFrame& frame, Method method, std::size_t replicates,
                                            const ResampleRng& rng) {
    switch (method) {
    case Method::jkn: return jkn_weights(frame);
    case Method::rb: return rb_weights(frame, replicates, rng);
    case Method::rbn: return rbn_weights(frame, replicates, rng);
    case Method::trb: return trb_weights(frame, replicates, rng);
    }
    throw InvalidArgumentError("unknown method");
}

/// Long-format dump: replicate,unit,weight (17 significant digits).
inline void write_replicates_csv(const ReplicateWeightSet& set, std::ostream& out) {
    out << "replicate,unit,weight\n";
    for (std::size_t r = 0; r < set.size(); ++r) {
        const auto w = set.replicate(r);
        for (std::size_t i = 0; i < w.size(); ++i) out << r << ',' << i << ',' << detail::format_double(w[i]) << '\n';
    }
}

} // namespace svyauc
