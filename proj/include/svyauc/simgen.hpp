#pragma once

#include <Eigen/Dense>
#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <fstream>
#include <map>
#include <numeric>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "svyauc/error.hpp"
#include "svyauc/inference.hpp"
#include "svyauc/parallel.hpp"
#include "svyauc/replicates.hpp"
#include "svyauc/rng.hpp"
#include "svyauc/survey_frame.hpp"
#include "svyauc/wauc.hpp"
#include "svyauc/wlogit.hpp"

namespace svyauc {

// ---------------------------------------------------------------------------
// Finite population
// ---------------------------------------------------------------------------

/// (1 - gamma) I + gamma J.
inline Eigen::MatrixXd exchangeable_covariance(std::size_t dim, double gamma) {
    return (1.0 - gamma) * Eigen::MatrixXd::Identity(dim, dim) + gamma * Eigen::MatrixXd::Ones(dim, dim);
}

/// Exchangeable covariance in which variable `strong` covaries `strong_cov` with everything except
/// `isolated`, and `isolated` is uncorrelated with every other variable.
inline Eigen::MatrixXd distinct_pair_covariance(std::size_t dim, double gamma, std::size_t strong,
                                                std::size_t isolated, double strong_cov) {
    Eigen::MatrixXd s = exchangeable_covariance(dim, gamma);
    for (std::size_t j = 0; j < dim; ++j) {
        if (j == strong || j == isolated) continue;
        s(strong, j) = s(j, strong) = strong_cov;
    }
    for (std::size_t j = 0; j < dim; ++j) {
        if (j == isolated) continue;
        s(isolated, j) = s(j, isolated) = 0.0;
    }
    return s;
}

/// Two-Gaussian population layout: the first `covariate_count` variables are model covariates X,
/// the remaining ones are design variables Z that only drive stratification.
struct PopulationSpec {
    std::size_t size = 100000;
    double prevalence = 0.5;
    Eigen::VectorXd mu0;
    Eigen::VectorXd mu1;
    Eigen::MatrixXd sigma;
    std::size_t covariate_count = 4;
    std::size_t strata = 5;
    std::size_t clusters_per_stratum = 20;

    std::size_t dimension() const { return static_cast<std::size_t>(mu0.size()); }
    std::size_t cluster_size() const { return size / (strata * clusters_per_stratum); }

    std::vector<std::string> variable_names() const {
        std::vector<std::string> names;
        for (std::size_t j = 0; j < dimension(); ++j) {
            names.push_back(j < covariate_count ? "X" + std::to_string(j + 1)
                                                : "Z" + std::to_string(j + 1 - covariate_count));
        }
        return names;
    }

    void validate() const {
        const auto d = static_cast<Eigen::Index>(dimension());
        if (d == 0 || mu1.size() != d || sigma.rows() != d || sigma.cols() != d) {
            throw DimensionMismatchError("population means / covariance");
        }
        if (covariate_count == 0 || covariate_count >= dimension()) {
            throw InvalidArgumentError("population needs at least one covariate and one design variable");
        }
        if (!(prevalence > 0.0 && prevalence < 1.0)) throw InvalidArgumentError("prevalence must lie in (0,1)");
        if (strata == 0 || clusters_per_stratum == 0 || size % (2 * strata * clusters_per_stratum) != 0) {
            throw InvalidArgumentError("population size must be divisible by 2 * strata * clusters");
        }
        if ((sigma - sigma.transpose()).cwiseAbs().maxCoeff() > 1e-12) {
            throw InvalidArgumentError("covariance matrix is not symmetric");
        }
    }
};

/// Logistic coefficients implied by two Gaussian classes with a shared covariance:
/// slopes Sigma^{-1}(mu1 - mu0), intercept ln(P1/P0) - (mu1 + mu0)' Sigma^{-1} (mu1 - mu0) / 2.
/// Returned intercept first.
inline Eigen::VectorXd true_coefficients(const PopulationSpec& spec) {
    const Eigen::LLT<Eigen::MatrixXd> llt(spec.sigma);
    if (llt.info() != Eigen::Success) throw NumericalError("covariance matrix is not positive definite");
    const Eigen::VectorXd diff = spec.mu1 - spec.mu0;
    const Eigen::VectorXd slopes = llt.solve(diff);
    Eigen::VectorXd beta(slopes.size() + 1);
    beta[0] = std::log(spec.prevalence / (1.0 - spec.prevalence)) - 0.5 * (spec.mu1 + spec.mu0).dot(slopes);
    beta.tail(slopes.size()) = slopes;
    return beta;
}

struct FinitePopulation {
    PopulationSpec spec;
    SurveyFrame frame;                                     // all units, weight 1, stratum/cluster labels
    std::vector<std::vector<std::vector<std::size_t>>> clusters; // [stratum][cluster] -> unit positions
    Eigen::VectorXd beta_star;
    std::vector<FittedModel> models;    // population fits, one per requested covariate subset
    std::vector<double> auc;            // population AUC per model
};

/// Builds a finite population:
///  1. half the units from N(mu0, Sigma), half from N(mu1, Sigma);
///  2. event probabilities from the true coefficients;
///  3. outcomes redrawn as Bernoulli(p);
///  4. units sorted by the design-variable part of the linear predictor (ties by unit index),
///     cut into equal strata and, within each stratum, equal consecutive clusters.
/// Each requested covariate subset is then fitted on the whole population with unit weights and its
/// population AUC recorded.
inline FinitePopulation generate_population(const PopulationSpec& spec,
                                            const std::vector<std::vector<std::size_t>>& model_covariates,
                                            const ResampleRng& rng) {
    spec.validate();
    const std::size_t n = spec.size;
    const std::size_t d = spec.dimension();

    const Eigen::LLT<Eigen::MatrixXd> llt(spec.sigma);
    if (llt.info() != Eigen::Success) throw NumericalError("covariance matrix is not positive definite");
    const Eigen::MatrixXd chol = llt.matrixL();
    const Eigen::VectorXd beta = true_coefficients(spec);

    Eigen::MatrixXd x(n, d);
    std::vector<std::uint8_t> y(n);
    std::vector<double> design_score(n);
    {
        KeyedGenerator gen(rng, {0x706F70ULL});
        Eigen::VectorXd z(d);
        for (std::size_t i = 0; i < n; ++i) {
            for (std::size_t k = 0; k < d; ++k) z[k] = gen.normal();
            const Eigen::VectorXd& mu = (i < n / 2) ? spec.mu0 : spec.mu1;
            x.row(i) = (mu + chol * z).transpose();
        }
        for (std::size_t i = 0; i < n; ++i) {
            const double eta = beta[0] + x.row(i).dot(beta.tail(d));
            y[i] = gen.uniform_open() < inverse_logit(eta) ? 1 : 0;
            double s = 0.0;
            for (std::size_t k = spec.covariate_count; k < d; ++k) s += x(i, k) * beta[k + 1];
            design_score[i] = s;
        }
    }

    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        return design_score[a] < design_score[b] || (design_score[a] == design_score[b] && a < b);
    });

    const std::size_t per_stratum = n / spec.strata;
    const std::size_t per_cluster = spec.cluster_size();
    std::vector<std::size_t> stratum(n), cluster(n);
    FinitePopulation pop;
    pop.spec = spec;
    pop.beta_star = beta;
    pop.clusters.assign(spec.strata, std::vector<std::vector<std::size_t>>(spec.clusters_per_stratum));
    for (std::size_t rank = 0; rank < n; ++rank) {
        const std::size_t i = order[rank];
        stratum[i] = rank / per_stratum;
        cluster[i] = (rank % per_stratum) / per_cluster;
    }
    for (std::size_t i = 0; i < n; ++i) pop.clusters[stratum[i]][cluster[i]].push_back(i);

    std::vector<UnitRecord> units(n);
    for (std::size_t i = 0; i < n; ++i) {
        UnitRecord& u = units[i];
        u.id = std::to_string(i + 1);
        u.stratum = std::to_string(stratum[i] + 1);
        u.psu = std::to_string(cluster[i] + 1);
        u.weight = 1.0;
        u.outcome = y[i];
        u.covariates.resize(d);
        for (std::size_t k = 0; k < d; ++k) u.covariates[k] = x(i, k);
    }
    pop.frame = SurveyFrame(spec.variable_names(), units);

    for (const auto& covs : model_covariates) {
        for (std::size_t c : covs) {
            if (c >= spec.covariate_count) throw InvalidArgumentError("model may only use the X covariates");
        }
        pop.models.push_back(fit_pseudo_likelihood(pop.frame, covs));
        pop.auc.push_back(population_auc(pop.frame, pop.models.back()));
    }
    return pop;
}

// ---------------------------------------------------------------------------
// Two-stage stratified cluster sampling
// ---------------------------------------------------------------------------

/// a_h clusters per stratum, then units_per_cluster[h] units from every selected cluster of stratum h.
struct SamplingScheme {
    std::size_t clusters_per_stratum = 2;
    std::vector<std::size_t> units_per_cluster;
    std::string label; // e.g. "n1"

    std::size_t sample_size() const {
        std::size_t total = 0;
        for (std::size_t m : units_per_cluster) total += m * clusters_per_stratum;
        return total;
    }
};

namespace detail {

/// First `k` entries of a keyed Fisher-Yates shuffle of 0..n-1.
inline std::vector<std::size_t> partial_shuffle(std::size_t n, std::size_t k, KeyedGenerator& gen) {
    std::vector<std::size_t> idx(n);
    std::iota(idx.begin(), idx.end(), std::size_t{0});
    for (std::size_t t = 0; t < k; ++t) {
        const std::size_t j = t + static_cast<std::size_t>(gen.bounded(n - t));
        std::swap(idx[t], idx[j]);
    }
    idx.resize(k);
    return idx;
}

} // namespace detail

/// Sampling weight (A_h / a_h) * (N_hj / n_hj).
inline double two_stage_weight(std::size_t clusters, std::size_t selected_clusters, std::size_t cluster_size,
                               std::size_t selected_units) {
    return (static_cast<double>(clusters) / static_cast<double>(selected_clusters)) *
           (static_cast<double>(cluster_size) / static_cast<double>(selected_units));
}

/// Stage 1: SRS without replacement of a_h clusters per stratum. Stage 2: SRS without replacement
/// of n_hj units in each selected cluster. Each stratum and each selected cluster draws from its own
/// keyed generator. Units are emitted stratum by stratum, clusters and units in ascending order.
inline SurveyFrame draw_sample(const FinitePopulation& pop, const SamplingScheme& scheme, const ResampleRng& rng) {
    const std::size_t strata = pop.clusters.size();
    if (scheme.units_per_cluster.size() != strata) {
        throw DimensionMismatchError("sampling scheme lists " + std::to_string(scheme.units_per_cluster.size()) +
                                     " strata, population has " + std::to_string(strata));
    }
    std::vector<UnitRecord> units;
    units.reserve(scheme.sample_size());
    for (std::size_t h = 0; h < strata; ++h) {
        const auto& clusters = pop.clusters[h];
        const std::size_t a = scheme.clusters_per_stratum;
        if (a == 0 || a > clusters.size()) throw InvalidArgumentError("more clusters requested than the stratum has");
        KeyedGenerator stage1(rng, {1, h});
        auto chosen = detail::partial_shuffle(clusters.size(), a, stage1);
        std::sort(chosen.begin(), chosen.end());
        for (std::size_t c : chosen) {
            const auto& members = clusters[c];
            const std::size_t m = scheme.units_per_cluster[h];
            if (m == 0 || m > members.size()) throw InvalidArgumentError("more units requested than the cluster has");
            const double w = two_stage_weight(clusters.size(), a, members.size(), m);
            KeyedGenerator stage2(rng, {2, h, c});
            auto picked = detail::partial_shuffle(members.size(), m, stage2);
            std::sort(picked.begin(), picked.end());
            for (std::size_t k : picked) {
                UnitRecord u = pop.frame.record(members[k]);
                u.weight = w;
                units.push_back(std::move(u));
            }
        }
    }
    return SurveyFrame(pop.frame.covariate_names(), units);
}

// ---------------------------------------------------------------------------
// Scenario registry
// ---------------------------------------------------------------------------

enum class Contrast { ci, ht_independent, ht_paired };

inline std::string_view to_string(Contrast c) {
    switch (c) {
    case Contrast::ci: return "CI";
    case Contrast::ht_independent: return "HT-independent";
    case Contrast::ht_paired: return "HT-paired";
    }
    return "?";
}

/// Reference population AUC for (population, model).
struct AucTarget {
    std::size_t population = 0;
    std::size_t model = 0;
    double auc = 0.0;
};

struct ScenarioSpec {
    int id = 0;
    std::string description;
    Contrast contrast = Contrast::ci;
    std::vector<PopulationSpec> populations;
    std::vector<std::vector<std::size_t>> models; // covariate indices per model
    std::vector<AucTarget> targets;
    std::vector<SamplingScheme> schemes;
    std::size_t runs = 500;
    std::size_t replicates = 1000;
    std::vector<double> alphas{0.01, 0.05, 0.1};

    void validate() const {
        if (populations.empty() || models.empty()) throw InvalidArgumentError("scenario needs populations and models");
        switch (contrast) {
        case Contrast::ci:
            if (populations.size() != 1 || models.size() != 1) {
                throw InvalidArgumentError("CI scenario needs one population and one model");
            }
            break;
        case Contrast::ht_independent:
            if (populations.size() != 2 || models.size() != 1) {
                throw InvalidArgumentError("independent-test scenario needs two populations and one model");
            }
            break;
        case Contrast::ht_paired:
            if (populations.size() != 1 || models.size() != 2) {
                throw InvalidArgumentError("paired-test scenario needs one population and two models");
            }
            break;
        }
    }
};

namespace detail {

inline Contrast parse_contrast(const std::string& s) {
    if (s == "CI") return Contrast::ci;
    if (s == "HT-independent") return Contrast::ht_independent;
    if (s == "HT-paired") return Contrast::ht_paired;
    throw InputError("unknown contrast '" + s + "'");
}

inline Eigen::VectorXd to_vector(const nlohmann::json& j) {
    const auto v = j.get<std::vector<double>>();
    return Eigen::Map<const Eigen::VectorXd>(v.data(), static_cast<Eigen::Index>(v.size()));
}

inline PopulationSpec parse_population(const nlohmann::json& j, const nlohmann::json& defaults) {
    auto get = [&](const char* key) -> const nlohmann::json& { return j.contains(key) ? j.at(key) : defaults.at(key); };
    PopulationSpec p;
    p.size = get("size").get<std::size_t>();
    p.prevalence = get("prevalence").get<double>();
    p.covariate_count = get("covariate_count").get<std::size_t>();
    p.strata = get("strata").get<std::size_t>();
    p.clusters_per_stratum = get("clusters_per_stratum").get<std::size_t>();
    p.mu1 = to_vector(j.at("mu1"));
    p.mu0 = j.contains("mu0") ? to_vector(j.at("mu0")) : Eigen::VectorXd::Zero(p.mu1.size());
    const auto dim = static_cast<std::size_t>(p.mu1.size());
    const double gamma = get("gamma").get<double>();

    const auto& cov = get("covariance");
    const std::string kind = cov.at("kind").get<std::string>();
    if (kind == "exchangeable") {
        p.sigma = exchangeable_covariance(dim, gamma);
    } else if (kind == "distinct_pair") {
        p.sigma = distinct_pair_covariance(dim, gamma, cov.at("strong").get<std::size_t>() - 1,
                                           cov.at("isolated").get<std::size_t>() - 1, cov.at("strong_cov").get<double>());
    } else if (kind == "explicit") {
        const auto rows = cov.at("matrix").get<std::vector<std::vector<double>>>();
        p.sigma.resize(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(rows.size()));
        for (std::size_t r = 0; r < rows.size(); ++r) {
            if (rows[r].size() != rows.size()) throw DimensionMismatchError("explicit covariance must be square");
            for (std::size_t c = 0; c < rows.size(); ++c) p.sigma(r, c) = rows[r][c];
        }
    } else {
        throw InputError("unknown covariance kind '" + kind + "'");
    }
    p.validate();
    return p;
}

inline std::vector<std::size_t> parse_model(const nlohmann::json& j, std::size_t covariate_count) {
    std::vector<std::size_t> covs;
    for (const auto& name : j.get<std::vector<std::string>>()) {
        if (name.size() < 2 || name[0] != 'X') throw InputError("model covariates must be X1..X" + std::to_string(covariate_count));
        const std::size_t k = std::stoul(name.substr(1));
        if (k == 0 || k > covariate_count) throw InputError("unknown covariate '" + name + "'");
        covs.push_back(k - 1);
    }
    return covs;
}

} // namespace detail

/// Scenario registry parsed from JSON (see data/scenarios.json for the layout).
inline std::vector<ScenarioSpec> parse_scenarios(const nlohmann::json& root) {
    const auto& defaults = root.at("defaults");
    std::vector<SamplingScheme> schemes;
    for (const auto& s : root.at("sampling_schemes")) {
        for (const auto& [label, sizes] : s.at("units_per_cluster").items()) {
            schemes.push_back(SamplingScheme{s.at("clusters_per_stratum").get<std::size_t>(),
                                             sizes.get<std::vector<std::size_t>>(), label});
        }
    }
    std::sort(schemes.begin(), schemes.end(), [](const SamplingScheme& a, const SamplingScheme& b) {
        return a.label < b.label || (a.label == b.label && a.clusters_per_stratum < b.clusters_per_stratum);
    });

    std::vector<ScenarioSpec> out;
    for (const auto& j : root.at("scenarios")) {
        ScenarioSpec s;
        s.id = j.at("id").get<int>();
        s.description = j.value("description", "");
        s.contrast = detail::parse_contrast(j.at("contrast").get<std::string>());
        for (const auto& p : j.at("populations")) s.populations.push_back(detail::parse_population(p, defaults));
        for (const auto& m : j.at("models")) {
            s.models.push_back(detail::parse_model(m, s.populations.front().covariate_count));
        }
        for (const auto& t : j.value("targets", nlohmann::json::array())) {
            s.targets.push_back(AucTarget{t.at("population").get<std::size_t>(), t.at("model").get<std::size_t>(),
                                          t.at("auc").get<double>()});
        }
        s.schemes = schemes;
        s.runs = j.value("runs", defaults.at("runs").get<std::size_t>());
        s.replicates = j.value("replicates", defaults.at("replicates").get<std::size_t>());
        s.alphas = j.value("alphas", defaults.at("alphas").get<std::vector<double>>());
        s.validate();
        out.push_back(std::move(s));
    }
    return out;
}

inline std::vector<ScenarioSpec> load_scenarios(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw InputError("cannot open scenario registry '" + path + "'");
    nlohmann::json root;
    try {
        in >> root;
        return parse_scenarios(root);
    } catch (const nlohmann::json::exception& e) {
        throw InputError("malformed scenario registry '" + path + "': " + e.what());
    }
}

#ifdef SVYAUC_DEFAULT_SCENARIOS
inline const char* default_scenario_path() { return SVYAUC_DEFAULT_SCENARIOS; }
#endif

inline ScenarioSpec find_scenario(const std::vector<ScenarioSpec>& registry, int id) {
    for (const auto& s : registry) {
        if (s.id == id) return s;
    }
    throw InputError("no scenario with id " + std::to_string(id));
}

inline std::optional<SamplingScheme> find_scheme(const ScenarioSpec& spec, std::size_t clusters,
                                                 const std::string& label) {
    for (const auto& s : spec.schemes) {
        if (s.clusters_per_stratum == clusters && s.label == label) return s;
    }
    return std::nullopt;
}

// ---------------------------------------------------------------------------
// Monte Carlo driver
// ---------------------------------------------------------------------------

struct SimulationOptions {
    std::size_t runs = 500;
    std::size_t replicates = 1000;
    std::uint64_t seed = 1;
    std::vector<double> alphas{0.01, 0.05, 0.1};
    std::vector<SamplingScheme> schemes; // empty: every scheme of the scenario
    unsigned threads = 1;
    bool percentile = true;              // also evaluate percentile intervals for bootstrap methods
    double max_failure_fraction = 0.02;
};

/// One line of the Monte Carlo summary: coverage (CI scenarios) or rejection rate (tests).
struct SummaryRow {
    std::size_t clusters_per_stratum = 0;
    std::string size_label;
    Method method = Method::jkn;
    std::string construction; // "normal", "percentile" or "wald"
    double alpha = 0.05;
    std::string metric;       // "coverage" or "rejection"
    double value = 0.0;
    double mc_se = 0.0;
    std::size_t runs_used = 0;
    std::size_t failures = 0;
};

/// Per-run standard error (of the AUC, or of the AUC difference for tests).
struct SeSample {
    std::size_t run = 0;
    std::size_t clusters_per_stratum = 0;
    std::string size_label;
    Method method = Method::jkn;
    double estimate = 0.0; // AUC or D
    double se = 0.0;
};

struct MonteCarloReport {
    int scenario = 0;
    Contrast contrast = Contrast::ci;
    std::size_t runs = 0;
    std::size_t replicates = 0;
    std::uint64_t seed = 0;
    std::vector<double> alphas;
    std::vector<std::vector<double>> population_auc; // [population][model]
    std::vector<SummaryRow> rows;
    std::vector<SeSample> se_samples;
    std::size_t failed_fits = 0;

    const SummaryRow* find(std::size_t clusters, const std::string& size, Method method,
                           const std::string& construction, double alpha) const {
        for (const auto& r : rows) {
            if (r.clusters_per_stratum == clusters && r.size_label == size && r.method == method &&
                r.construction == construction && std::fabs(r.alpha - alpha) < 1e-12) {
                return &r;
            }
        }
        return nullptr;
    }
};

class SimulationAbortedError : public NumericalError {
public:
    SimulationAbortedError(std::size_t failures, std::size_t runs, const std::string& where)
        : NumericalError("simulation aborted: " + std::to_string(failures) + " of " + std::to_string(runs) +
                         " runs failed (" + where + ")") {}
};

namespace detail {

/// Outcome of one method in one Monte Carlo run.
struct MethodOutcome {
    bool ok = false;
    double estimate = 0.0;
    double se = 0.0;
    std::vector<std::uint8_t> normal_hit;     // per alpha: covered (CI) or rejected (tests)
    std::vector<std::uint8_t> percentile_hit; // per alpha, CI scenarios with bootstrap methods
};

struct RunOutcome {
    bool fit_ok = false;
    MethodOutcome methods[4];
};

/// Identity of a sampling scheme for stream keying, so that the draws of a scheme do not depend on
/// which other schemes are run alongside it.
inline std::uint64_t scheme_key(const SamplingScheme& scheme) {
    std::uint64_t h = 0xcbf29ce484222325ULL; // FNV-1a over the label
    for (unsigned char ch : scheme.label) h = (h ^ ch) * 0x100000001b3ULL;
    std::uint64_t s = h ^ (static_cast<std::uint64_t>(scheme.clusters_per_stratum) << 32);
    return splitmix64(s);
}

inline std::uint64_t stream_key(std::uint64_t scheme, std::size_t run, std::size_t population, std::uint64_t purpose) {
    std::uint64_t s = scheme ^ (static_cast<std::uint64_t>(run) << 16) ^ (static_cast<std::uint64_t>(population) << 8) ^
                      purpose;
    return splitmix64(s);
}

} // namespace detail

/// Populations of a scenario; population k uses its own key so two populations built from the same
/// specification still differ.
inline std::vector<FinitePopulation> build_populations(const ScenarioSpec& spec, std::uint64_t seed) {
    std::vector<FinitePopulation> pops;
    for (std::size_t k = 0; k < spec.populations.size(); ++k) {
        pops.push_back(generate_population(spec.populations[k], spec.models, ResampleRng{seed, 0x10000 + k}));
    }
    return pops;
}

/// Monte Carlo study of one scenario over the requested sampling schemes. Each run draws its
/// sample(s), fits the model(s) by pseudo-likelihood, and applies all four variance methods.
/// Runs are keyed by (seed, scheme identity, run), so results do not depend on `threads`.
inline MonteCarloReport run_scenario(const ScenarioSpec& spec, const std::vector<FinitePopulation>& pops,
                                     const SimulationOptions& options) {
    spec.validate();
    if (pops.size() != spec.populations.size()) throw InvalidArgumentError("population count does not match scenario");
    const std::vector<SamplingScheme> schemes = options.schemes.empty() ? spec.schemes : options.schemes;
    const std::size_t n_alpha = options.alphas.size();
    for (double a : options.alphas) {
        if (!(a > 0.0 && a < 1.0)) throw InvalidArgumentError("alpha must lie in (0,1)");
    }

    MonteCarloReport report;
    report.scenario = spec.id;
    report.contrast = spec.contrast;
    report.runs = options.runs;
    report.replicates = options.replicates;
    report.seed = options.seed;
    report.alphas = options.alphas;
    for (const auto& p : pops) report.population_auc.push_back(p.auc);
    if (options.runs == 0) return report;

    const double target = pops.front().auc.front();

    for (std::size_t cell = 0; cell < schemes.size(); ++cell) {
        const SamplingScheme& scheme = schemes[cell];
        const std::uint64_t key = detail::scheme_key(scheme);
        std::vector<detail::RunOutcome> outcomes(options.runs);

        parallel_for(options.runs, options.threads, [&](std::size_t r) {
            detail::RunOutcome& out = outcomes[r];
            // Fit stage: any failure here voids the run for every method.
            std::vector<SurveyFrame> samples;
            std::vector<std::vector<double>> probs;
            try {
                const std::size_t n_samples = spec.contrast == Contrast::ht_independent ? 2 : 1;
                for (std::size_t k = 0; k < n_samples; ++k) {
                    samples.push_back(draw_sample(pops[k], scheme,
                                                  ResampleRng{options.seed, detail::stream_key(key, r, k, 1)}));
                }
                if (spec.contrast == Contrast::ht_independent) {
                    for (std::size_t k = 0; k < 2; ++k) {
                        probs.push_back(fit_pseudo_likelihood(samples[k], spec.models[0]).probs);
                    }
                } else {
                    for (const auto& m : spec.models) probs.push_back(fit_pseudo_likelihood(samples[0], m).probs);
                }
                out.fit_ok = true;
            } catch (const Error&) {
                return;
            }

            for (Method method : all_methods) {
                detail::MethodOutcome& mo = out.methods[static_cast<std::size_t>(method)];
                try {
                    const auto rng_for = [&](std::size_t k) {
                        return ResampleRng{options.seed, detail::stream_key(key, r, k, 2)};
                    };
                    if (spec.contrast == Contrast::ci) {
                        const auto set = replicate_weights(samples[0], method, options.replicates, rng_for(0));
                        const AucEstimate est = estimate_auc(samples[0], probs[0], set);
                        mo.estimate = est.point;
                        mo.se = est.se();
                        for (double a : options.alphas) {
                            mo.normal_hit.push_back(ci_normal(est, a).contains(target));
                            if (options.percentile && is_bootstrap(method)) {
                                mo.percentile_hit.push_back(ci_percentile(est, a).contains(target));
                            }
                        }
                    } else {
                        TestResult t;
                        if (spec.contrast == Contrast::ht_independent) {
                            const auto set1 = replicate_weights(samples[0], method, options.replicates, rng_for(0));
                            const auto set2 = replicate_weights(samples[1], method, options.replicates, rng_for(1));
                            t = test_independent(estimate_auc(samples[0], probs[0], set1),
                                                 estimate_auc(samples[1], probs[1], set2), options.alphas.front());
                        } else {
                            const auto set = replicate_weights(samples[0], method, options.replicates, rng_for(0));
                            t = test_paired(samples[0], probs[0], probs[1], set, options.alphas.front());
                        }
                        mo.estimate = t.d_hat;
                        mo.se = std::sqrt(t.variance_d);
                        for (double a : options.alphas) mo.normal_hit.push_back(t.p_value < a);
                    }
                    mo.ok = true;
                } catch (const Error&) {
                    mo.ok = false;
                }
            }
        });

        const std::string metric = spec.contrast == Contrast::ci ? "coverage" : "rejection";
        std::size_t fit_failures = 0;
        for (const auto& o : outcomes) fit_failures += o.fit_ok ? 0 : 1;
        report.failed_fits += fit_failures;

        for (Method method : all_methods) {
            const auto mi = static_cast<std::size_t>(method);
            std::size_t used = 0;
            std::vector<std::size_t> normal_hits(n_alpha, 0), percentile_hits(n_alpha, 0);
            const bool with_percentile = spec.contrast == Contrast::ci && options.percentile && is_bootstrap(method);
            for (std::size_t r = 0; r < outcomes.size(); ++r) {
                const auto& mo = outcomes[r].methods[mi];
                if (!outcomes[r].fit_ok || !mo.ok) continue;
                ++used;
                for (std::size_t a = 0; a < n_alpha; ++a) {
                    normal_hits[a] += mo.normal_hit[a];
                    if (with_percentile) percentile_hits[a] += mo.percentile_hit[a];
                }
                report.se_samples.push_back(
                    SeSample{r + 1, scheme.clusters_per_stratum, scheme.label, method, mo.estimate, mo.se});
            }
            const std::size_t failures = options.runs - used;
            if (static_cast<double>(failures) > options.max_failure_fraction * static_cast<double>(options.runs)) {
                throw SimulationAbortedError(failures, options.runs,
                                             std::string(to_string(method)) + ", a_h=" +
                                                 std::to_string(scheme.clusters_per_stratum) + ", " + scheme.label);
            }
            auto add_row = [&](const std::string& construction, double alpha, std::size_t hits) {
                SummaryRow row;
                row.clusters_per_stratum = scheme.clusters_per_stratum;
                row.size_label = scheme.label;
                row.method = method;
                row.construction = construction;
                row.alpha = alpha;
                row.metric = metric;
                row.runs_used = used;
                row.failures = failures;
                if (used > 0) {
                    row.value = static_cast<double>(hits) / static_cast<double>(used);
                    row.mc_se = std::sqrt(row.value * (1.0 - row.value) / static_cast<double>(used));
                }
                report.rows.push_back(row);
            };
            for (std::size_t a = 0; a < n_alpha; ++a) {
                add_row(spec.contrast == Contrast::ci ? "normal" : "wald", options.alphas[a], normal_hits[a]);
            }
            if (with_percentile) {
                for (std::size_t a = 0; a < n_alpha; ++a) add_row("percentile", options.alphas[a], percentile_hits[a]);
            }
        }
    }
    return report;
}

inline MonteCarloReport run_scenario(const ScenarioSpec& spec, const SimulationOptions& options) {
    return run_scenario(spec, build_populations(spec, options.seed), options);
}

} // namespace svyauc
