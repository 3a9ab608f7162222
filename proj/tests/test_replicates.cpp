#include <gtest/gtest.h>

#include <cmath>
#include <random>
#include <sstream>

#include "oracles.hpp"
#include "svyauc/replicates.hpp"

using namespace svyauc;

namespace {

// Design with a_h PSUs in stratum h, `per_psu` units each, weights varying by unit.
SurveyFrame design(const std::vector<std::size_t>& psus_per_stratum, std::size_t per_psu = 3) {
    std::vector<UnitRecord> units;
    for (std::size_t h = 0; h < psus_per_stratum.size(); ++h) {
        for (std::size_t j = 0; j < psus_per_stratum[h]; ++j) {
            for (std::size_t m = 0; m < per_psu; ++m) {
                const double w = 1.0 + 0.37 * static_cast<double>(units.size() % 11);
                units.push_back({"", std::to_string(h), std::to_string(j), w, static_cast<int>(m % 2), {}});
            }
        }
    }
    return SurveyFrame({}, units);
}

} // namespace

TEST(JackknifeWeights, CountOrderAndBranches) {
    const auto frame = design({2, 4, 8, 10, 2});
    const auto set = jkn_weights(frame);
    ASSERT_EQ(set.size(), 26u);
    ASSERT_EQ(set.jkn_factors().size(), 26u);
    std::size_t r = 0;
    for (std::size_t h = 0; h < frame.strata().size(); ++h) {
        const double a = static_cast<double>(frame.strata()[h].psus.size());
        for (std::size_t dropped : frame.strata()[h].psus) {
            EXPECT_EQ(set.jkn_strata()[r], h);
            EXPECT_EQ(set.jkn_psus()[r], dropped);
            EXPECT_EQ(set.jkn_factors()[r], (a - 1.0) / a);
            const auto w = set.replicate(r);
            for (std::size_t i = 0; i < frame.n(); ++i) {
                if (frame.psu_of(i) == dropped) EXPECT_EQ(w[i], 0.0);
                else if (frame.stratum_of(i) == h) EXPECT_EQ(w[i], frame.weight(i) * (a / (a - 1.0)));
                else EXPECT_EQ(w[i], frame.weight(i));
            }
            ++r;
        }
    }
}

TEST(JackknifeWeights, SingletonStratumRejected) {
    EXPECT_THROW(jkn_weights(design({2, 1, 3})), SingletonPsuError);
    EXPECT_THROW(rb_weights(design({2, 1}), 10, {1, 0}), SingletonPsuError);
}

// Per unit, a replicate weight has standard deviation of the order of the weight itself, so at
// 20 000 replicates the pooled mean is held to 1% and each unit to 4.5 standard errors.
TEST(BootstrapWeights, ExpectationEqualsBaseWeight) {
    const auto frame = design({2, 3, 5}, 2);
    for (Method m : {Method::rb, Method::rbn, Method::trb}) {
        const auto set = replicate_weights(frame, m, 20000, {99, 0});
        const double B = static_cast<double>(set.size());
        double pooled = 0.0, base = 0.0;
        for (std::size_t i = 0; i < frame.n(); ++i) {
            const double a = static_cast<double>(frame.strata()[frame.stratum_of(i)].psus.size());
            const double rel_var = m == Method::rb    ? 1.0
                                   : m == Method::rbn ? 1.0 - 1.0 / a
                                                      : 1.0 - 1.0 / static_cast<double>(frame.n());
            double mean = 0.0;
            for (std::size_t b = 0; b < set.size(); ++b) mean += set.replicate(b)[i];
            pooled += mean;
            base += frame.weight(i) * B;
            mean /= B;
            EXPECT_LE(std::fabs(mean / frame.weight(i) - 1.0), 4.5 * std::sqrt(rel_var / B)) << to_string(m) << " unit " << i;
        }
        EXPECT_NEAR(pooled / base, 1.0, 0.01) << to_string(m);
    }
}

TEST(BootstrapWeights, StructureOfDraws) {
    const auto frame = design({2, 4}, 3);
    const auto rb = rb_weights(frame, 200, {5, 0});
    const auto rbn = rbn_weights(frame, 200, {5, 0});
    for (std::size_t b = 0; b < 200; ++b) {
        for (std::size_t h = 0; h < 2; ++h) {
            const auto& psus = frame.strata()[h].psus;
            const double a = static_cast<double>(psus.size());
            double k_rb = 0.0, k_rbn = 0.0;
            for (std::size_t j : psus) {
                const std::size_t i = frame.psus()[j].units[0];
                const double krb = rb.replicate(b)[i] / (frame.weight(i) * a / (a - 1.0));
                const double krbn = rbn.replicate(b)[i] / frame.weight(i);
                EXPECT_NEAR(krb, std::round(krb), 1e-12);
                EXPECT_NEAR(krbn, std::round(krbn), 1e-12);
                k_rb += krb;
                k_rbn += krbn;
                // constant within a PSU
                for (std::size_t u : frame.psus()[j].units) {
                    EXPECT_DOUBLE_EQ(rb.replicate(b)[u] / frame.weight(u), rb.replicate(b)[i] / frame.weight(i));
                }
            }
            EXPECT_NEAR(k_rb, a - 1.0, 1e-9);
            EXPECT_NEAR(k_rbn, a, 1e-9);
        }
    }
}

TEST(BootstrapWeights, DrawsAreExchangeableAcrossPsus) {
    const auto frame = design({4}, 1);
    for (Method m : {Method::rb, Method::rbn}) {
        const std::size_t per_rep = m == Method::rb ? 3 : 4;
        const std::size_t reps = 100000 / per_rep + 1;
        const auto set = replicate_weights(frame, m, reps, {17, 0});
        std::vector<double> counts(4, 0.0);
        const double scale = m == Method::rb ? 4.0 / 3.0 : 1.0;
        for (std::size_t b = 0; b < reps; ++b) {
            for (std::size_t i = 0; i < 4; ++i) counts[i] += std::round(set.replicate(b)[i] / (frame.weight(i) * scale));
        }
        const double total = counts[0] + counts[1] + counts[2] + counts[3];
        double chi2 = 0.0;
        for (double c : counts) chi2 += (c - total / 4) * (c - total / 4) / (total / 4);
        EXPECT_LT(chi2, 16.27) << to_string(m);  // p > 0.001 with 3 df
    }
}

TEST(BootstrapWeights, DeterministicAndReplicateLocal) {
    const auto frame = design({2, 3}, 4);
    for (Method m : {Method::rb, Method::rbn, Method::trb}) {
        const auto a = replicate_weights(frame, m, 50, {3, 1});
        const auto b = replicate_weights(frame, m, 50, {3, 1});
        const auto longer = replicate_weights(frame, m, 80, {3, 1});
        const auto other = replicate_weights(frame, m, 50, {3, 2});
        bool differs = false;
        for (std::size_t r = 0; r < 50; ++r) {
            for (std::size_t i = 0; i < frame.n(); ++i) {
                EXPECT_EQ(a.replicate(r)[i], b.replicate(r)[i]);
                EXPECT_EQ(a.replicate(r)[i], longer.replicate(r)[i]);
                differs = differs || a.replicate(r)[i] != other.replicate(r)[i];
                EXPECT_GE(a.replicate(r)[i], 0.0);
            }
        }
        EXPECT_TRUE(differs) << to_string(m);
    }
}

TEST(BootstrapWeights, InvalidCounts) {
    const auto frame = design({2, 2});
    EXPECT_THROW(rb_weights(frame, 1, {}), InvalidArgumentError);
    EXPECT_THROW(trb_weights(frame, 0, {}), InvalidArgumentError);
}

TEST(Methods, NamesRoundTrip) {
    for (Method m : all_methods) EXPECT_EQ(parse_method(to_string(m)), m);
    EXPECT_EQ(parse_method("JKN"), Method::jkn);
    EXPECT_FALSE(parse_method("delete-two").has_value());
}

TEST(ReplicateDump, LongFormat) {
    const auto frame = design({2}, 1);
    std::ostringstream out;
    write_replicates_csv(jkn_weights(frame), out);
    EXPECT_EQ(out.str(), "replicate,unit,weight\n0,0,0\n0,1,2.7400000000000002\n1,0,2\n1,1,0\n");
}
