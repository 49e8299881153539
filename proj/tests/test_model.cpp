#include <gtest/gtest.h>

#include "abcs/model.hpp"
#include "fixtures.hpp"

using namespace abcs;

namespace {

Instance gaussian_k2() {
    Instance x;
    x.K = 2;
    x.J = 1;
    x.family = Family::gaussian();
    x.means = Matrix::from_rows({{0.5}, {0.9}, {0.1}});
    return x;
}

}  // namespace

TEST(Model, WeightedMeansAndAnswerSet) {
    const auto x = fixtures::booking_instance();
    EXPECT_NEAR(weighted_mean(x, 0), 0.0474396, 1e-6);
    EXPECT_NEAR(weighted_mean(x, 1), 0.0479098, 1e-6);
    EXPECT_NEAR(weighted_mean(x, 2), 0.0477618, 1e-6);
    EXPECT_EQ(answer_set(x), (ArmSet{1, 2}));

    const auto y = fixtures::boxplot_instance();
    // weighted means 0.8/3, 0.9/3, 0.7/3
    EXPECT_EQ(answer_set(y), (ArmSet{1}));
    const auto g = gaps(y);
    EXPECT_NEAR(g[0], -0.1 / 3, 1e-15);
    EXPECT_NEAR(g[1], 0.1 / 3, 1e-15);
}

TEST(Model, AnswerSetUsesStrictInequality) {
    Instance x;
    x.K = 1;
    x.means = Matrix::from_rows({{0.5}, {0.5}});
    EXPECT_TRUE(answer_set(x).empty());
}

TEST(Model, AbcToBaiReflectsArmsAboveControl) {
    const auto y = abc_to_bai(gaussian_k2());
    EXPECT_DOUBLE_EQ(y.means(1, 0), 0.1);
    EXPECT_DOUBLE_EQ(y.means(2, 0), 0.1);
    EXPECT_TRUE(answer_set(y).empty());
    const auto g = gaps(gaussian_k2());
    const auto gy = gaps(y);
    for (std::size_t b = 0; b < g.size(); ++b) EXPECT_NEAR(std::abs(g[b]), gy[b], 1e-15);
    EXPECT_THROW(abc_to_bai(fixtures::booking_instance()), UnsupportedError);
}

TEST(Model, CollapseMixtureAveragesCellsWithAlpha) {
    const auto x = fixtures::booking_instance();
    const auto c = collapse_mixture(x);
    ASSERT_EQ(c.J, 1u);
    for (std::size_t a = 0; a < x.arms(); ++a) EXPECT_NEAR(c.means(a, 0), weighted_mean(x, a), 1e-15);
    EXPECT_TRUE(c.family.is_bernoulli());
}

TEST(Validate, AcceptsWellFormedInstances) {
    EXPECT_TRUE(validate(fixtures::booking_instance()).empty());
    EXPECT_TRUE(validate(fixtures::boxplot_instance()).empty());
}

TEST(Validate, AlphaOffSimplex) {
    auto x = fixtures::boxplot_instance();
    x.alpha = {0.5, 0.5, 0.1};
    const auto d = validate(x);
    EXPECT_TRUE(d.has_errors());
    EXPECT_NE(d.summary().find("alpha not on simplex"), std::string::npos);
}

TEST(Validate, ShapeAndDomainErrors) {
    auto x = fixtures::boxplot_instance();
    x.means(0, 0) = 1.2;
    EXPECT_TRUE(validate(x).has_errors());
    x = fixtures::boxplot_instance();
    x.beta = {0.0, 0.0, 0.0};
    EXPECT_TRUE(validate(x).has_errors());
    x = fixtures::boxplot_instance();
    x.means = Matrix(2, 3);
    EXPECT_TRUE(validate(x).has_errors());
    x = fixtures::boxplot_instance();
    x.alpha = {0.0, 0.9, 0.1};
    EXPECT_TRUE(validate(x).has_errors());
}

TEST(Validate, TiesAndBoundaryAreWarnings) {
    Instance x;
    x.K = 1;
    x.means = Matrix::from_rows({{0.5}, {0.5}});
    auto d = validate(x);
    EXPECT_FALSE(d.has_errors());
    EXPECT_TRUE(d.has_warnings());
    x.means = Matrix::from_rows({{0.0}, {0.5}});
    d = validate(x);
    EXPECT_FALSE(d.has_errors());
    EXPECT_TRUE(d.has_warnings());
}

TEST(Validate, ObliviousNeedsAlphaEqualBeta) {
    EXPECT_TRUE(validate(fixtures::boxplot_instance(), Mode::Oblivious).has_errors());
    EXPECT_FALSE(validate(fixtures::boxplot_instance(), Mode::Agnostic).has_errors());
    EXPECT_FALSE(validate(fixtures::booking_instance(), Mode::Oblivious).has_errors());
}

TEST(Feasibility, ConstraintSetsPerMode) {
    const std::vector<double> alpha{0.25, 0.75};
    const auto product = Matrix::from_rows({{0.125, 0.375}, {0.125, 0.375}});
    const auto proportional = Matrix::from_rows({{0.2, 0.5}, {0.05, 0.25}});
    const auto active = Matrix::from_rows({{0.7, 0.1}, {0.1, 0.1}});
    EXPECT_TRUE(is_feasible(product, Mode::Agnostic, alpha));
    EXPECT_TRUE(is_feasible(product, Mode::Proportional, alpha));
    EXPECT_TRUE(is_feasible(product, Mode::Active, alpha));
    EXPECT_FALSE(is_feasible(proportional, Mode::Agnostic, alpha));
    EXPECT_TRUE(is_feasible(proportional, Mode::Proportional, alpha));
    EXPECT_FALSE(is_feasible(active, Mode::Proportional, alpha));
    EXPECT_TRUE(is_feasible(active, Mode::Active, alpha));
    EXPECT_FALSE(is_feasible(active * 2.0, Mode::Active, alpha));
    const auto m = arm_marginals(proportional);
    EXPECT_NEAR(m[0], 0.7, 1e-15);
    EXPECT_NEAR(m[1], 0.3, 1e-15);
}

TEST(Modes, ParseRoundTrip) {
    for (auto m : {Mode::Active, Mode::Proportional, Mode::Agnostic, Mode::Oblivious})
        EXPECT_EQ(parse_mode(to_string(m)), m);
    EXPECT_THROW(parse_mode("passive"), ConfigError);
}
