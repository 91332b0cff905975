#include <gtest/gtest.h>

#include <algorithm>
#include <random>
#include <sstream>

#include "gridres/errors.hpp"
#include "gridres/select.hpp"
#include "gridres/stats.hpp"
#include "oracles.hpp"

using namespace gridres;

namespace {

DesignMatrix synthetic(std::mt19937_64& rng, int n, int p, const std::vector<std::pair<int, double>>& truth,
                       double noise_sd) {
    std::normal_distribution<double> g(0.0, 1.0);
    DesignMatrix d;
    d.x.resize(n, p);
    d.y.resize(n);
    for (int j = 0; j < p; ++j) d.names.push_back("x" + std::to_string(j));
    d.response_name = "y";
    for (int i = 0; i < n; ++i) {
        for (int j = 0; j < p; ++j) d.x(i, j) = g(rng);
        double y = 1.5;
        for (auto [j, b] : truth) y += b * d.x(i, j);
        d.y[i] = y + noise_sd * g(rng);
    }
    return d;
}

}  // namespace

TEST(Standardize, SampleStandardDeviation) {
    DesignMatrix d;
    d.names = {"a", "const", "b"};
    d.x.resize(3, 3);
    d.x << 1, 7, 10, 2, 7, 20, 3, 7, 60;
    d.y = Eigen::VectorXd::Zero(3);
    const auto s = standardize(d);
    ASSERT_EQ(s.names, (std::vector<std::string>{"a", "b"}));
    EXPECT_EQ(s.dropped, std::vector<std::string>{"const"});
    EXPECT_NEAR(s.x(0, 0), -1.0, 1e-15);
    EXPECT_NEAR(s.x(1, 0), 0.0, 1e-15);
    EXPECT_NEAR(s.x(2, 0), 1.0, 1e-15);

    DesignMatrix again;
    again.names = s.names;
    again.x = s.x;
    again.y = s.y;
    const auto twice = standardize(again);
    EXPECT_LE((twice.x - s.x).cwiseAbs().maxCoeff(), 1e-12);

    DesignMatrix flat;
    flat.names = {"c"};
    flat.x = Eigen::MatrixXd::Constant(4, 1, 2.0);
    flat.y = Eigen::VectorXd::Zero(4);
    EXPECT_THROW(standardize(flat), AllColumnsDegenerate);
}

TEST(Lasso, ZeroPenaltyIsOls) {
    std::mt19937_64 rng(21);
    const auto d = synthetic(rng, 60, 5, {{0, 2.0}, {3, -1.0}}, 0.5);
    const auto s = standardize(d);
    const auto fit = lasso_fit(s, 0.0);
    EXPECT_TRUE(fit.converged);
    const auto ols = gridres::testing::ols_normal_equations(d.x, d.y);
    EXPECT_NEAR(fit.intercept, ols(0), 1e-6);
    for (int j = 0; j < 5; ++j) EXPECT_NEAR(fit.coefficients[j], ols(j + 1), 1e-6);
}

TEST(Lasso, LambdaMaxGivesExactZeros) {
    std::mt19937_64 rng(22);
    const auto d = synthetic(rng, 40, 6, {{1, 1.0}}, 1.0);
    const auto s = standardize(d);
    const double lmax = lambda_max(s);
    for (double lam : {lmax, 1.5 * lmax}) {
        const auto fit = lasso_fit(s, lam);
        for (int j = 0; j < fit.coefficients_std.size(); ++j) EXPECT_EQ(fit.coefficients_std[j], 0.0);
        EXPECT_TRUE(fit.active.empty());
        EXPECT_NEAR(fit.intercept, d.y.mean(), 1e-12);
    }
    EXPECT_FALSE(lasso_fit(s, 0.9 * lmax).active.empty());
}

TEST(Lasso, OrthonormalDesignSoftThreshold) {
    std::mt19937_64 rng(23);
    const int n = 64, p = 5;
    std::normal_distribution<double> g(0.0, 1.0);
    Eigen::MatrixXd a(n, p + 1);
    a.col(0).setOnes();
    for (int i = 0; i < n; ++i)
        for (int j = 1; j <= p; ++j) a(i, j) = g(rng);
    const Eigen::HouseholderQR<Eigen::MatrixXd> qr(a);
    const Eigen::MatrixXd q = qr.householderQ() * Eigen::MatrixXd::Identity(n, p + 1);

    StandardizedDesign s;
    s.x = std::sqrt(static_cast<double>(n)) * q.rightCols(p);  // centered, X'X = n I
    s.y.resize(n);
    for (int i = 0; i < n; ++i) s.y[i] = 3.0 + 0.8 * s.x(i, 0) - 0.3 * s.x(i, 2) + 0.05 * s.x(i, 4) + 0.2 * g(rng);
    s.means = Eigen::VectorXd::Zero(p);
    s.scales = Eigen::VectorXd::Ones(p);
    for (int j = 0; j < p; ++j) s.names.push_back("q" + std::to_string(j));

    const Eigen::VectorXd yc = s.y.array() - s.y.mean();
    const Eigen::VectorXd ols = s.x.transpose() * yc / static_cast<double>(n);
    for (double lam : {0.0, 0.01, 0.1, 0.25, 0.5, 1.0}) {
        const auto fit = lasso_fit(s, lam);
        for (int j = 0; j < p; ++j) {
            const double expected = (ols[j] > 0 ? 1.0 : -1.0) * std::max(std::abs(ols[j]) - lam, 0.0);
            EXPECT_NEAR(fit.coefficients_std[j], expected, 1e-8) << "lambda " << lam << " j " << j;
        }
    }
    EXPECT_EQ(soft_threshold(3.0, 1.0), 2.0);
    EXPECT_EQ(soft_threshold(-3.0, 1.0), -2.0);
    EXPECT_EQ(soft_threshold(0.5, 1.0), 0.0);
}

TEST(Lasso, PathIsMonotoneInL1AndBackTransformConsistent) {
    std::mt19937_64 rng(24);
    auto d = synthetic(rng, 80, 8, {{0, 3.0}, {2, -2.0}, {5, 1.0}}, 1.0);
    d.x.col(3) = d.x.col(3) * 40.0 + Eigen::VectorXd::Constant(80, 7.0);
    const auto s = standardize(d);
    const auto grid = lambda_grid(lambda_max(s), 30, 1e-3);
    ASSERT_TRUE(std::is_sorted(grid.rbegin(), grid.rend()));
    const auto path = lasso_path(s, grid);
    for (std::size_t l = 1; l < path.size(); ++l) {
        EXPECT_GE(path[l].coefficients_std.lpNorm<1>() + 1e-9, path[l - 1].coefficients_std.lpNorm<1>());
    }
    const double y_mean = s.y.mean();
    for (const auto& fit : path) {
        for (int i = 0; i < d.x.rows(); ++i) {
            double std_pred = y_mean;
            double orig_pred = fit.intercept;
            for (int j = 0; j < s.x.cols(); ++j) {
                std_pred += fit.coefficients_std[j] * (s.x(i, j) - s.x.col(j).mean());
                orig_pred += fit.coefficients[j] * d.x(i, static_cast<int>(s.source_columns[j]));
            }
            EXPECT_NEAR(std_pred, orig_pred, 1e-10);
        }
    }
}

TEST(CrossValidation, FoldsAreSeededAndBalanced) {
    const auto a = assign_folds(23, 10, 99);
    EXPECT_EQ(a, assign_folds(23, 10, 99));
    EXPECT_NE(a, assign_folds(23, 10, 100));
    std::vector<int> sizes(10, 0);
    for (auto f : a) ++sizes[f];
    for (int s : sizes) EXPECT_TRUE(s == 2 || s == 3);
    EXPECT_THROW(assign_folds(5, 10, 1), TooFewRows);
}

TEST(CrossValidation, RecoversSignalAndIsDeterministic) {
    std::mt19937_64 rng(25);
    const auto d = synthetic(rng, 100, 10, {{4, 2.0}}, 0.5);
    CvOptions opt;
    opt.seed = 17;
    const auto a = cv_select(d, opt);
    const auto b = cv_select(d, opt);
    EXPECT_EQ(a.mean_error, b.mean_error);
    EXPECT_EQ(a.chosen_index, b.chosen_index);
    EXPECT_EQ(a.lambdas.size(), 100u);
    const auto s = standardize(d);
    const auto fit = lasso_fit(s, a.chosen_lambda);
    EXPECT_NE(std::find(fit.active.begin(), fit.active.end(), 4u), fit.active.end());

    opt.rule = LambdaRule::OneStandardError;
    const auto c = cv_select(d, opt);
    EXPECT_LE(c.chosen_index, a.chosen_index);
    EXPECT_LE(c.mean_error[c.chosen_index], a.mean_error[a.chosen_index] + a.std_error[a.chosen_index]);
}

TEST(CrossValidation, LeaveOneOutMatchesExplicitRefits) {
    std::mt19937_64 rng(26);
    const auto d = synthetic(rng, 12, 3, {{0, 1.0}, {1, -0.5}}, 0.3);
    CvOptions opt;
    opt.folds = 12;
    opt.grid_size = 8;
    opt.min_ratio = 1e-2;
    const auto curve = cv_select(d, opt);
    for (std::size_t l = 0; l < curve.lambdas.size(); ++l) {
        double total = 0.0;
        for (int i = 0; i < 12; ++i) {
            std::vector<std::size_t> rows;
            for (int r = 0; r < 12; ++r)
                if (r != i) rows.push_back(static_cast<std::size_t>(r));
            const auto train = standardize(d.subset_rows(rows));
            const auto fit = lasso_fit(train, curve.lambdas[l]);
            double pred = fit.intercept;
            for (std::size_t j = 0; j < train.source_columns.size(); ++j) {
                pred += fit.coefficients[static_cast<int>(j)] * d.x(i, static_cast<int>(train.source_columns[j]));
            }
            total += (d.y[i] - pred) * (d.y[i] - pred);
        }
        EXPECT_NEAR(curve.mean_error[l], total / 12.0, 1e-9 * std::max(1.0, total));
    }
    DesignMatrix tiny = d.subset_rows({0, 1, 2});
    opt.folds = 10;
    EXPECT_THROW(cv_select(tiny, opt), TooFewRows);
}

TEST(OlsRefit, PerfectFit) {
    DesignMatrix d;
    d.names = {"x"};
    d.response_name = "y";
    d.x.resize(5, 1);
    d.x << 1, 2, 3, 4, 5;
    d.y = 2.0 * d.x.col(0);
    const auto s = ols_refit_filter(d, 0.10);
    ASSERT_EQ(s.coefficients.size(), 1u);
    EXPECT_NEAR(s.coefficients[0].estimate, 2.0, 1e-12);
    EXPECT_LT(s.coefficients[0].p_value, 1e-12);
    EXPECT_EQ(s.kept_after_filter, std::vector<std::string>{"x"});
}

TEST(OlsRefit, NoiseDroppedSignalKeptWithReferenceStatistics) {
    std::mt19937_64 rng(27);
    auto d = synthetic(rng, 200, 2, {{0, 5.0}}, 1.0);
    const auto s = ols_refit_filter(d, 0.10);
    // With this seed the noise column's first-pass p-value is above the cut.
    const auto first = ols_fit(d);
    ASSERT_GE(first.coefficients[1].p_value, 0.10);
    EXPECT_EQ(s.kept_after_filter, std::vector<std::string>{"x0"});
    EXPECT_FALSE(s.empty_after_filter);

    // Reference statistics from the normal equations on the survivor.
    Eigen::MatrixXd x(200, 2);
    x.col(0).setOnes();
    x.col(1) = d.x.col(0);
    const Eigen::MatrixXd inv = (x.transpose() * x).inverse();
    const Eigen::VectorXd beta = inv * x.transpose() * d.y;
    const double s2 = (d.y - x * beta).squaredNorm() / 198.0;
    const double se = std::sqrt(s2 * inv(1, 1));
    EXPECT_NEAR(s.coefficients[0].estimate, beta(1), 1e-10);
    EXPECT_NEAR(s.coefficients[0].std_error, se, 1e-10);
    EXPECT_NEAR(s.coefficients[0].t_value, beta(1) / se, 1e-8);
    EXPECT_NEAR(s.intercept.estimate, beta(0), 1e-10);
    EXPECT_EQ(s.df_residual, 198u);
    for (const auto& c : s.coefficients) {
        EXPECT_GE(c.p_value, 0.0);
        EXPECT_LE(c.p_value, 1.0);
    }
}

TEST(OlsRefit, EmptyAfterFilterGivesInterceptOnly) {
    std::mt19937_64 rng(28);
    auto d = synthetic(rng, 50, 2, {}, 1.0);
    const auto s = ols_refit_filter(d, 1e-9);
    EXPECT_TRUE(s.empty_after_filter);
    EXPECT_TRUE(s.coefficients.empty());
    EXPECT_NEAR(s.intercept.estimate, d.y.mean(), 1e-12);
    EXPECT_THROW(ols_fit(d.subset_rows({0, 1, 2})), TooFewRows);
}

TEST(SelectPredictors, KeptSubsetOfActiveAndDeterministic) {
    std::mt19937_64 rng(29);
    const auto d = synthetic(rng, 120, 12, {{1, 2.0}, {7, -1.5}}, 1.0);
    CvOptions opt;
    opt.seed = 5;
    const auto a = select_predictors(d, opt, 0.10);
    const auto b = select_predictors(d, opt, 0.10);
    EXPECT_EQ(a.kept_after_filter, b.kept_after_filter);
    for (const auto& k : a.kept_after_filter) {
        EXPECT_NE(std::find(a.lasso_active.begin(), a.lasso_active.end(), k), a.lasso_active.end());
    }
    EXPECT_NE(std::find(a.kept_after_filter.begin(), a.kept_after_filter.end(), "x1"), a.kept_after_filter.end());
    EXPECT_NE(std::find(a.kept_after_filter.begin(), a.kept_after_filter.end(), "x7"), a.kept_after_filter.end());
    ASSERT_EQ(a.coefficients.size(), b.coefficients.size());
    for (std::size_t i = 0; i < a.coefficients.size(); ++i) {
        EXPECT_EQ(a.coefficients[i].estimate, b.coefficients[i].estimate);
    }
}

TEST(DesignMatrixInput, DropsIncompleteRows) {
    std::istringstream in("state,y,a,b\nCA,1.5,2,3\nTX,,1,1\nNV,2.5,x,4\nOR,3,4,5\n");
    const auto d = read_design_matrix(read_delimited(in), "y", "state");
    EXPECT_EQ(d.x.rows(), 2);
    EXPECT_EQ(d.names, (std::vector<std::string>{"a", "b"}));
    EXPECT_EQ(d.row_ids, (std::vector<std::string>{"CA", "OR"}));
    EXPECT_EQ(d.log.size(), 2u);
    std::istringstream again("a,b\n1,2\n");
    EXPECT_THROW(read_design_matrix(read_delimited(again), "y"), MissingColumn);
}
