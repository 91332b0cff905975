#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "gridres/delimited.hpp"

namespace gridres {

/// Observations (rows) by predictors (columns) plus a response.
struct DesignMatrix {
    std::vector<std::string> names;
    std::vector<std::string> row_ids;
    Eigen::MatrixXd x;
    Eigen::VectorXd y;
    std::string response_name;
    std::vector<std::string> log;  // preprocessing notes (dropped rows, ...)

    DesignMatrix subset_rows(const std::vector<std::size_t>& rows) const;
    DesignMatrix subset_columns(const std::vector<std::size_t>& cols) const;
};

/// Every column except `response` and the optional `id_column` is a numeric
/// predictor. Rows with an empty or non-numeric cell are dropped and logged.
/// Throws MissingColumn when `response` or `id_column` is absent.
DesignMatrix read_design_matrix(const DelimitedTable& table, const std::string& response,
                                const std::string& id_column = "");

/// Predictors scaled to mean 0 and sample standard deviation 1.
struct StandardizedDesign {
    std::vector<std::string> names;
    std::vector<std::size_t> source_columns;  // index into the original design
    Eigen::MatrixXd x;
    Eigen::VectorXd y;
    Eigen::VectorXd means;
    Eigen::VectorXd scales;
    std::vector<std::string> dropped;  // zero-variance columns, by name

    /// Original-scale coefficients and intercept from standardized ones.
    std::pair<Eigen::VectorXd, double> to_original(const Eigen::VectorXd& beta_std,
                                                   double y_mean) const;
};

/// Throws AllColumnsDegenerate when no column has nonzero variance.
StandardizedDesign standardize(const DesignMatrix& design);

struct LassoOptions {
    double tolerance = 1e-8;       // max absolute coefficient change per sweep
    std::size_t max_sweeps = 100000;
};

struct LassoResult {
    double lambda = 0.0;
    Eigen::VectorXd coefficients_std;  // standardized scale
    Eigen::VectorXd coefficients;      // original scale, aligned with the standardized names
    double intercept = 0.0;            // original scale
    std::vector<std::size_t> active;   // indices with nonzero coefficient
    std::size_t iterations = 0;
    bool converged = false;
};

/// Minimizes (1/2n)||y - ybar - X b||^2 + lambda ||b||_1 over standardized
/// columns by cyclic coordinate descent with soft thresholding. The intercept
/// is unpenalized. Non-convergence is reported through `converged`.
LassoResult lasso_fit(const StandardizedDesign& design, double lambda, const LassoOptions& options = {},
                      const Eigen::VectorXd* warm_start = nullptr);

/// Fits a decreasing lambda sequence with warm starts, sharing one Gram matrix.
std::vector<LassoResult> lasso_path(const StandardizedDesign& design, const std::vector<double>& lambdas,
                                    const LassoOptions& options = {});

/// Smallest lambda at which every coefficient is zero: max_j |x_j' (y - ybar)| / n.
double lambda_max(const StandardizedDesign& design);

double soft_threshold(double z, double gamma);

enum class LambdaRule { MinError, OneStandardError };

std::optional<LambdaRule> parse_lambda_rule(std::string_view s);
std::string_view to_string(LambdaRule r);

struct CvOptions {
    std::size_t folds = 10;
    std::uint64_t seed = 1;
    std::size_t grid_size = 100;
    double min_ratio = 1e-4;
    LambdaRule rule = LambdaRule::MinError;
    LassoOptions lasso;
};

struct CvCurve {
    std::vector<double> lambdas;  // strictly decreasing
    std::vector<double> mean_error;
    std::vector<double> std_error;
    std::vector<std::size_t> fold_of_row;
    LambdaRule rule = LambdaRule::MinError;
    std::size_t chosen_index = 0;
    double chosen_lambda = 0.0;
};

/// Log-spaced grid from lambda_max down to min_ratio * lambda_max.
std::vector<double> lambda_grid(double lambda_max, std::size_t size, double min_ratio);

/// Fold of each row: seeded Fisher-Yates shuffle, then contiguous split.
std::vector<std::size_t> assign_folds(std::size_t n, std::size_t k, std::uint64_t seed);

/// k-fold cross-validation over the lambda grid. Each training fold is
/// standardized on its own rows. Throws TooFewRows when n < k.
CvCurve cv_select(const DesignMatrix& design, const CvOptions& options = {});

struct CoefficientRow {
    std::string name;
    double estimate = 0.0;
    double std_error = 0.0;
    double t_value = 0.0;
    double p_value = 1.0;
};

struct SelectionSummary {
    std::string response;
    std::vector<std::string> lasso_active;
    std::vector<std::string> kept_after_filter;
    CoefficientRow intercept;
    std::vector<CoefficientRow> coefficients;  // final refit, original scale
    std::size_t n = 0;
    std::size_t df_residual = 0;
    double p_cut = 0.10;
    bool empty_after_filter = false;
    std::optional<double> chosen_lambda;
};

struct OlsFit {
    CoefficientRow intercept;
    std::vector<CoefficientRow> coefficients;
    std::size_t df_residual = 0;
};

/// OLS with intercept and two-sided t-test p-values on n - p - 1 df.
/// Throws TooFewRows when n <= p + 1, DegenerateDesign for a rank-deficient design.
OlsFit ols_fit(const DesignMatrix& design);

/// OLS on the given (active) columns, drop predictors with p >= p_cut, refit
/// once on the survivors. No survivor gives an intercept-only summary with
/// empty_after_filter set.
SelectionSummary ols_refit_filter(const DesignMatrix& active, double p_cut = 0.10);

/// LASSO path + CV choice, LASSO fit on all rows at the chosen lambda, then
/// ols_refit_filter on the active set.
SelectionSummary select_predictors(const DesignMatrix& design, const CvOptions& cv,
                                   double p_cut, CvCurve* curve_out = nullptr);

}  // namespace gridres
