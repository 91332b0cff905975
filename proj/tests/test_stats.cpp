#include <gtest/gtest.h>

#include <cmath>
#include <limits>

#include "gridres/stats.hpp"
#include "student_t_reference.hpp"

using namespace gridres;

TEST(IncompleteBeta, ClosedForms) {
    for (double x : {0.0, 0.1, 0.37, 0.5, 0.9, 1.0}) {
        EXPECT_NEAR(incomplete_beta(1.0, 1.0, x), x, 1e-14);
        EXPECT_NEAR(incomplete_beta(3.0, 1.0, x), x * x * x, 1e-14);
        EXPECT_NEAR(incomplete_beta(1.0, 2.0, x), 1.0 - (1.0 - x) * (1.0 - x), 1e-14);
    }
    EXPECT_NEAR(incomplete_beta(2.5, 4.0, 0.3) + incomplete_beta(4.0, 2.5, 0.7), 1.0, 1e-14);
}

TEST(StudentT, ReferenceTable) {
    for (const auto& pt : gridres::testing::kStudentTReference) {
        const double cdf = student_t_cdf(pt.t, pt.df);
        EXPECT_NEAR(cdf, pt.cdf, 1e-8) << "t=" << pt.t << " df=" << pt.df;
        const double tail = pt.t >= 0 ? 1.0 - pt.cdf : pt.cdf;
        EXPECT_NEAR(student_t_two_sided_p(pt.t, pt.df), std::min(1.0, 2.0 * tail), 1e-8);
    }
}

TEST(StudentT, Limits) {
    const double inf = std::numeric_limits<double>::infinity();
    EXPECT_EQ(student_t_two_sided_p(inf, 5), 0.0);
    EXPECT_EQ(student_t_two_sided_p(-inf, 5), 0.0);
    EXPECT_EQ(student_t_two_sided_p(0.0, 5), 1.0);
    EXPECT_EQ(student_t_cdf(0.0, 3), 0.5);
    // df = 1 is Cauchy.
    EXPECT_NEAR(student_t_cdf(1.0, 1), 0.75, 1e-15);
    // Large df approaches the normal.
    EXPECT_NEAR(student_t_cdf(1.96, 1e7), normal_cdf(1.96), 1e-6);
    EXPECT_NEAR(normal_cdf(-2.5), 0.0062096653257761, 1e-15);
}
