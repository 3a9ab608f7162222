#include <gtest/gtest.h>

#include <cmath>
#include <set>

#include "svyauc/simgen.hpp"

using namespace svyauc;

namespace {

const std::vector<ScenarioSpec>& registry() {
    static const auto scenarios = load_scenarios(default_scenario_path());
    return scenarios;
}

PopulationSpec small_spec(double shift = 1.0) {
    PopulationSpec p;
    p.size = 4000;
    p.strata = 5;
    p.clusters_per_stratum = 4;
    p.mu0 = Eigen::VectorXd::Zero(10);
    p.mu1 = Eigen::VectorXd::Constant(10, 0.3 * shift);
    p.sigma = exchangeable_covariance(10, 0.15);
    return p;
}

} // namespace

TEST(Covariance, ExchangeableAndModifiedPair) {
    const auto s = exchangeable_covariance(4, 0.15);
    EXPECT_DOUBLE_EQ(s(0, 0), 1.0);
    EXPECT_DOUBLE_EQ(s(0, 3), 0.15);
    const auto m = distinct_pair_covariance(10, 0.15, 2, 3, 0.5);
    EXPECT_DOUBLE_EQ(m(2, 0), 0.5);
    EXPECT_DOUBLE_EQ(m(2, 9), 0.5);
    EXPECT_DOUBLE_EQ(m(2, 3), 0.0);
    EXPECT_DOUBLE_EQ(m(3, 5), 0.0);
    EXPECT_DOUBLE_EQ(m(3, 3), 1.0);
    EXPECT_DOUBLE_EQ(m(0, 1), 0.15);
    EXPECT_GT(Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd>(m).eigenvalues().minCoeff(), 0.0);
}

TEST(Population, NoSignalGivesChanceAuc) {
    PopulationSpec p = small_spec(0.0);
    p.size = 100000;
    p.clusters_per_stratum = 20;
    p.sigma = exchangeable_covariance(10, 0.0);
    const auto pop = generate_population(p, {{0, 1, 2, 3}}, {3, 0});
    EXPECT_NEAR(pop.auc[0], 0.5, 0.01);
    for (int k = 1; k <= 4; ++k) EXPECT_NEAR(pop.models[0].beta[k], 0.0, 0.05);
}

TEST(Population, PartitionAndSorting) {
    const auto p = small_spec();
    const auto pop = generate_population(p, {{0, 1}}, {1, 0});
    ASSERT_EQ(pop.clusters.size(), 5u);
    std::set<std::size_t> seen;
    for (std::size_t h = 0; h < 5; ++h) {
        ASSERT_EQ(pop.clusters[h].size(), 4u);
        for (const auto& c : pop.clusters[h]) {
            ASSERT_EQ(c.size(), p.cluster_size());
            for (std::size_t i : c) {
                EXPECT_TRUE(seen.insert(i).second);
                EXPECT_EQ(pop.frame.strata()[pop.frame.stratum_of(i)].label, std::to_string(h + 1));
                EXPECT_EQ(pop.frame.weight(i), 1.0);
            }
        }
    }
    EXPECT_EQ(seen.size(), p.size);

    // Strata are ordered by the design part of the true linear predictor.
    auto design_score = [&](std::size_t i) {
        double s = 0.0;
        for (std::size_t j = p.covariate_count; j < p.dimension(); ++j) {
            s += pop.beta_star[static_cast<Eigen::Index>(j + 1)] * pop.frame.covariate(i, j);
        }
        return s;
    };
    for (std::size_t h = 0; h + 1 < 5; ++h) {
        double hi = -INFINITY, lo = INFINITY;
        for (const auto& c : pop.clusters[h]) for (std::size_t i : c) hi = std::max(hi, design_score(i));
        for (const auto& c : pop.clusters[h + 1]) for (std::size_t i : c) lo = std::min(lo, design_score(i));
        EXPECT_LE(hi, lo);
    }

    const auto again = generate_population(p, {{0, 1}}, {1, 0});
    EXPECT_EQ(again.clusters, pop.clusters);
    EXPECT_EQ(again.auc, pop.auc);
}

TEST(Population, CovariateMeansMatchClassMeans) {
    const auto& s1 = find_scenario(registry(), 1);
    const auto pop = generate_population(s1.populations[0], s1.models, {5, 0});
    const auto& p = s1.populations[0];
    // Units were drawn in two halves by class, before redrawing y; recover class by the draw order
    // is not possible after sorting, so compare the pooled mean with the mixture mean.
    for (std::size_t j = 0; j < p.dimension(); ++j) {
        double mean = 0.0;
        for (std::size_t i = 0; i < pop.frame.n(); ++i) mean += pop.frame.covariate(i, j);
        mean /= static_cast<double>(pop.frame.n());
        const double expected = 0.5 * (p.mu0[static_cast<Eigen::Index>(j)] + p.mu1[static_cast<Eigen::Index>(j)]);
        const double delta = 0.5 * (p.mu1[static_cast<Eigen::Index>(j)] - p.mu0[static_cast<Eigen::Index>(j)]);
        const double sd = std::sqrt((1.0 + delta * delta) / static_cast<double>(pop.frame.n()));
        EXPECT_NEAR(mean, expected, 4.0 * sd) << "variable " << j;
    }
}

TEST(Population, ScenarioSevenReferenceAucs) {
    const auto& s7 = find_scenario(registry(), 7);
    ASSERT_EQ(s7.models.size(), 2u);
    const auto pop = generate_population(s7.populations[0], s7.models, {1, 0x10000});
    EXPECT_NEAR(pop.auc[0], 0.7735, 0.004);
    EXPECT_NEAR(pop.auc[1], 0.7493, 0.004);
}

TEST(Population, RejectsNonPositiveDefiniteCovariance) {
    auto p = small_spec();
    p.sigma = exchangeable_covariance(10, 0.15);
    p.sigma(0, 1) = p.sigma(1, 0) = 1.5;
    EXPECT_THROW(generate_population(p, {{0}}, {1, 0}), NumericalError);
}

TEST(Sampling, TwoStageWeight) {
    EXPECT_DOUBLE_EQ(two_stage_weight(20, 2, 1000, 300), 10.0 * (10.0 / 3.0));
    EXPECT_NEAR(two_stage_weight(20, 2, 1000, 300), 33.333333333333336, 1e-12);
}

TEST(Sampling, SchemeSizesFromRegistry) {
    const auto& s1 = find_scenario(registry(), 1);
    const auto n1 = find_scheme(s1, 2, "n1");
    ASSERT_TRUE(n1.has_value());
    EXPECT_EQ(n1->sample_size(), 1700u);
    EXPECT_EQ(find_scheme(s1, 8, "n1")->sample_size(), 1680u);
    EXPECT_FALSE(find_scheme(s1, 3, "n1").has_value());
}

TEST(Sampling, WeightsAreConstantWithinPsuAndExact) {
    const auto& s1 = find_scenario(registry(), 1);
    const auto pop = generate_population(s1.populations[0], s1.models, {2, 0});
    const auto scheme = *find_scheme(s1, 2, "n1");
    const auto sample = draw_sample(pop, scheme, {9, 4});
    EXPECT_EQ(sample.n(), 1700u);
    const auto d = validate_for_replication(sample);
    EXPECT_EQ(d.strata, 5u);
    for (std::size_t h = 0; h < 5; ++h) EXPECT_EQ(d.psus_per_stratum[h], 2u);
    for (std::size_t i = 0; i < sample.n(); ++i) {
        const std::size_t h = sample.stratum_of(i);
        EXPECT_EQ(sample.weight(i), two_stage_weight(20, 2, 1000, scheme.units_per_cluster[h]));
    }
    const auto again = draw_sample(pop, scheme, {9, 4});
    for (std::size_t i = 0; i < sample.n(); ++i) EXPECT_EQ(sample.unit_id(i), again.unit_id(i));
}

TEST(Sampling, HorvitzThompsonTotalIsUnbiased) {
    const auto& s1 = find_scenario(registry(), 1);
    const auto pop = generate_population(s1.populations[0], s1.models, {2, 0});
    const auto scheme = *find_scheme(s1, 4, "n1");
    double total = 0.0;
    constexpr int samples = 2000;
    for (int r = 0; r < samples; ++r) {
        const auto s = draw_sample(pop, scheme, {11, static_cast<std::uint64_t>(r)});
        for (double w : s.weights()) total += w;
    }
    EXPECT_NEAR(total / samples, 100000.0, 1000.0);
}

TEST(Sampling, CensusReproducesPopulationAuc) {
    const auto p = small_spec();
    const auto pop = generate_population(p, {{0, 1, 2, 3}}, {4, 0});
    SamplingScheme census{p.clusters_per_stratum, std::vector<std::size_t>(p.strata, p.cluster_size()), "census"};
    const auto sample = draw_sample(pop, census, {1, 1});
    ASSERT_EQ(sample.n(), p.size);
    for (double w : sample.weights()) EXPECT_EQ(w, 1.0);
    const auto probs = predict(pop.models[0], sample);
    EXPECT_NEAR(weighted_auc(sample, probs), pop.auc[0], 1e-12);
}

TEST(Sampling, SchemeLargerThanPopulationRejected) {
    const auto p = small_spec();
    const auto pop = generate_population(p, {{0}}, {4, 0});
    SamplingScheme too_many{5, std::vector<std::size_t>(5, 10), "x"};
    EXPECT_THROW(draw_sample(pop, too_many, {1, 1}), InvalidArgumentError);
    SamplingScheme too_big{2, std::vector<std::size_t>(5, 1000), "x"};
    EXPECT_THROW(draw_sample(pop, too_big, {1, 1}), InvalidArgumentError);
}

TEST(Registry, ScenariosAreWellFormed) {
    ASSERT_EQ(registry().size(), 7u);
    for (const auto& s : registry()) {
        EXPECT_NO_THROW(s.validate()) << s.id;
        EXPECT_EQ(s.schemes.size(), 8u) << s.id;
        for (const auto& m : s.models) for (std::size_t c : m) EXPECT_LT(c, 4u);
    }
    EXPECT_EQ(find_scenario(registry(), 2).populations.size(), 2u);
    EXPECT_EQ(find_scenario(registry(), 6).contrast, Contrast::ht_paired);
    EXPECT_THROW(find_scenario(registry(), 99), InputError);
}

TEST(MonteCarlo, ZeroRunsGiveEmptyReport) {
    SimulationOptions o;
    o.runs = 0;
    const auto report = run_scenario(find_scenario(registry(), 1), o);
    EXPECT_TRUE(report.rows.empty());
    EXPECT_TRUE(report.se_samples.empty());
}

TEST(MonteCarlo, SmallRunIsThreadIndependent) {
    auto spec = find_scenario(registry(), 1);
    const auto pops = build_populations(spec, 3);
    SimulationOptions o;
    o.runs = 6;
    o.replicates = 50;
    o.seed = 3;
    o.schemes = {*find_scheme(spec, 2, "n1")};
    o.threads = 1;
    const auto a = run_scenario(spec, pops, o);
    o.threads = 3;
    const auto b = run_scenario(spec, pops, o);
    ASSERT_EQ(a.rows.size(), b.rows.size());
    ASSERT_FALSE(a.rows.empty());
    for (std::size_t k = 0; k < a.rows.size(); ++k) {
        EXPECT_EQ(a.rows[k].value, b.rows[k].value);
        EXPECT_EQ(a.rows[k].runs_used, 6u);
        EXPECT_GE(a.rows[k].value, 0.0);
        EXPECT_LE(a.rows[k].value, 1.0);
        EXPECT_NEAR(a.rows[k].mc_se, std::sqrt(a.rows[k].value * (1 - a.rows[k].value) / 6.0), 1e-15);
    }
    ASSERT_EQ(a.se_samples.size(), b.se_samples.size());
    for (std::size_t k = 0; k < a.se_samples.size(); ++k) EXPECT_EQ(a.se_samples[k].se, b.se_samples[k].se);
    EXPECT_NE(a.find(2, "n1", Method::jkn, "normal", 0.05), nullptr);
    EXPECT_EQ(a.find(2, "n1", Method::jkn, "percentile", 0.05), nullptr);
    EXPECT_NE(a.find(2, "n1", Method::trb, "percentile", 0.05), nullptr);
}

TEST(MonteCarlo, PairedScenarioProducesRejectionRates) {
    auto spec = find_scenario(registry(), 6);
    SimulationOptions o;
    o.runs = 4;
    o.replicates = 30;
    o.seed = 5;
    o.schemes = {*find_scheme(spec, 10, "n1")};
    const auto report = run_scenario(spec, o);
    const auto* row = report.find(10, "n1", Method::rbn, "wald", 0.05);
    ASSERT_NE(row, nullptr);
    EXPECT_EQ(row->metric, "rejection");
}
