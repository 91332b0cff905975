#include "gridres/select.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <limits>
#include <numeric>
#include <random>

#include "gridres/errors.hpp"
#include "gridres/stats.hpp"
#include "gridres/summation.hpp"
#include "gridres/text.hpp"

namespace gridres {

namespace {

std::optional<double> parse_real(std::string_view s) {
    s = trim(s);
    if (s.empty()) return std::nullopt;
    if (s.front() == '+') s.remove_prefix(1);
    double v = 0.0;
    auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc{} || p != s.data() + s.size() || !std::isfinite(v)) return std::nullopt;
    return v;
}

double column_mean(const Eigen::Ref<const Eigen::VectorXd>& v) {
    CompensatedSum s;
    for (Eigen::Index i = 0; i < v.size(); ++i) s += v[i];
    return s.value() / static_cast<double>(v.size());
}

// Unbiased draw in [0, bound) from the raw 64-bit engine output, so that fold
// assignment does not depend on the standard library's distribution code.
std::uint64_t bounded(std::mt19937_64& gen, std::uint64_t bound) {
    const std::uint64_t threshold = (0 - bound) % bound;
    while (true) {
        const std::uint64_t r = gen();
        if (r >= threshold) return r % bound;
    }
}

// x_j' (y - ybar) per column, compensated.
Eigen::VectorXd centered_cross(const StandardizedDesign& d) {
    const double y_mean = column_mean(d.y);
    Eigen::VectorXd out(d.x.cols());
    for (Eigen::Index j = 0; j < d.x.cols(); ++j) {
        const double xm = column_mean(d.x.col(j));
        CompensatedSum s;
        for (Eigen::Index i = 0; i < d.x.rows(); ++i) s += (d.x(i, j) - xm) * (d.y[i] - y_mean);
        out[j] = s.value();
    }
    return out;
}

// Coordinate descent on a fixed Gram matrix of the centered standardized design.
class CoordinateDescent {
public:
    explicit CoordinateDescent(const StandardizedDesign& d)
        : n_(static_cast<double>(d.x.rows())), p_(d.x.cols()) {
        x_means_.resize(p_);
        Eigen::MatrixXd xc = d.x;
        for (Eigen::Index j = 0; j < p_; ++j) {
            x_means_[j] = column_mean(d.x.col(j));
            xc.col(j).array() -= x_means_[j];
        }
        y_mean_ = column_mean(d.y);
        gram_ = xc.transpose() * xc;
        xty_ = centered_cross(d);
        lambda_max_ = p_ > 0 ? xty_.cwiseAbs().maxCoeff() / n_ : 0.0;
    }

    LassoResult solve(const StandardizedDesign& d, double lambda, const LassoOptions& opt,
                      const Eigen::VectorXd* warm) const {
        if (!(lambda >= 0.0)) throw Error("lambda must be nonnegative");
        Eigen::VectorXd beta = warm ? *warm : Eigen::VectorXd::Zero(p_);
        Eigen::VectorXd grad = (xty_ - gram_ * beta) / n_;  // x_j' r / n
        LassoResult r;
        r.lambda = lambda;
        if (lambda >= lambda_max_) {
            // Zero satisfies the optimality conditions.
            beta.setZero();
            r.converged = true;
        }
        for (std::size_t sweep = 1; !r.converged && sweep <= opt.max_sweeps; ++sweep) {
            double max_delta = 0.0;
            for (Eigen::Index j = 0; j < p_; ++j) {
                const double curvature = gram_(j, j) / n_;
                if (curvature <= 0.0) continue;
                const double z = grad[j] + curvature * beta[j];
                const double updated = soft_threshold(z, lambda) / curvature;
                const double delta = updated - beta[j];
                if (delta != 0.0) {
                    grad -= gram_.col(j) * (delta / n_);
                    beta[j] = updated;
                    max_delta = std::max(max_delta, std::fabs(delta));
                }
            }
            r.iterations = sweep;
            if (max_delta < opt.tolerance) {
                r.converged = true;
                break;
            }
        }
        r.coefficients_std = beta;
        for (Eigen::Index j = 0; j < p_; ++j) {
            if (beta[j] != 0.0) r.active.push_back(static_cast<std::size_t>(j));
        }
        // y_hat = y_mean + sum beta_j (xstd_j - mean_j); xstd_j = (x_j - m_j) / s_j.
        r.coefficients.resize(p_);
        double intercept = y_mean_;
        for (Eigen::Index j = 0; j < p_; ++j) {
            r.coefficients[j] = beta[j] / d.scales[j];
            intercept -= beta[j] * x_means_[j] + r.coefficients[j] * d.means[j];
        }
        r.intercept = intercept;
        return r;
    }

private:
    double n_;
    Eigen::Index p_;
    Eigen::VectorXd x_means_;
    double y_mean_ = 0.0;
    Eigen::MatrixXd gram_;
    Eigen::VectorXd xty_;
    double lambda_max_ = 0.0;
};

}  // namespace

DesignMatrix DesignMatrix::subset_rows(const std::vector<std::size_t>& rows) const {
    DesignMatrix out;
    out.names = names;
    out.response_name = response_name;
    out.x.resize(static_cast<Eigen::Index>(rows.size()), x.cols());
    out.y.resize(static_cast<Eigen::Index>(rows.size()));
    for (std::size_t i = 0; i < rows.size(); ++i) {
        const auto r = static_cast<Eigen::Index>(rows[i]);
        out.x.row(static_cast<Eigen::Index>(i)) = x.row(r);
        out.y[static_cast<Eigen::Index>(i)] = y[r];
        if (!row_ids.empty()) out.row_ids.push_back(row_ids[rows[i]]);
    }
    return out;
}

DesignMatrix DesignMatrix::subset_columns(const std::vector<std::size_t>& cols) const {
    DesignMatrix out;
    out.row_ids = row_ids;
    out.y = y;
    out.response_name = response_name;
    out.x.resize(x.rows(), static_cast<Eigen::Index>(cols.size()));
    for (std::size_t j = 0; j < cols.size(); ++j) {
        out.x.col(static_cast<Eigen::Index>(j)) = x.col(static_cast<Eigen::Index>(cols[j]));
        out.names.push_back(names[cols[j]]);
    }
    return out;
}

DesignMatrix read_design_matrix(const DelimitedTable& table, const std::string& response,
                                const std::string& id_column) {
    const auto resp = table.column(response);
    if (!resp) throw MissingColumn("design matrix lacks response column '" + response + "'");
    std::optional<std::size_t> id;
    if (!id_column.empty()) {
        id = table.column(id_column);
        if (!id) throw MissingColumn("design matrix lacks id column '" + id_column + "'");
    }
    std::vector<std::size_t> predictors;
    DesignMatrix d;
    d.response_name = table.header[*resp];
    for (std::size_t c = 0; c < table.header.size(); ++c) {
        if (c == *resp || (id && c == *id)) continue;
        predictors.push_back(c);
        d.names.push_back(table.header[c]);
    }

    std::vector<std::vector<double>> rows;
    std::vector<double> ys;
    for (std::size_t r = 0; r < table.rows.size(); ++r) {
        const auto& cells = table.rows[r];
        const auto yv = parse_real(cells[*resp]);
        std::vector<double> xs;
        bool ok = yv.has_value();
        for (std::size_t c : predictors) {
            const auto v = parse_real(cells[c]);
            if (!v) {
                ok = false;
                break;
            }
            xs.push_back(*v);
        }
        const std::string row_id = id ? cells[*id] : std::to_string(r + 1);
        if (!ok) {
            d.log.push_back("dropped row " + row_id + ": missing or non-numeric cell");
            continue;
        }
        rows.push_back(std::move(xs));
        ys.push_back(*yv);
        d.row_ids.push_back(row_id);
    }
    d.x.resize(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(predictors.size()));
    d.y.resize(static_cast<Eigen::Index>(rows.size()));
    for (std::size_t r = 0; r < rows.size(); ++r) {
        for (std::size_t c = 0; c < predictors.size(); ++c) {
            d.x(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) = rows[r][c];
        }
        d.y[static_cast<Eigen::Index>(r)] = ys[r];
    }
    return d;
}

StandardizedDesign standardize(const DesignMatrix& design) {
    const auto n = design.x.rows();
    StandardizedDesign s;
    s.y = design.y;
    std::vector<double> means, scales;
    for (Eigen::Index j = 0; j < design.x.cols(); ++j) {
        const auto col = design.x.col(j);
        const double m = column_mean(col);
        CompensatedSum ss;
        for (Eigen::Index i = 0; i < n; ++i) ss += (col[i] - m) * (col[i] - m);
        const double sd = n > 1 ? std::sqrt(ss.value() / static_cast<double>(n - 1)) : 0.0;
        if (!(sd > 0.0)) {
            s.dropped.push_back(design.names[static_cast<std::size_t>(j)]);
            continue;
        }
        s.names.push_back(design.names[static_cast<std::size_t>(j)]);
        s.source_columns.push_back(static_cast<std::size_t>(j));
        means.push_back(m);
        scales.push_back(sd);
    }
    if (s.names.empty()) throw AllColumnsDegenerate("every predictor has zero variance");
    const auto p = static_cast<Eigen::Index>(s.names.size());
    s.x.resize(n, p);
    s.means = Eigen::Map<Eigen::VectorXd>(means.data(), p);
    s.scales = Eigen::Map<Eigen::VectorXd>(scales.data(), p);
    for (Eigen::Index j = 0; j < p; ++j) {
        const auto src = static_cast<Eigen::Index>(s.source_columns[static_cast<std::size_t>(j)]);
        s.x.col(j) = (design.x.col(src).array() - s.means[j]) / s.scales[j];
    }
    return s;
}

std::pair<Eigen::VectorXd, double> StandardizedDesign::to_original(const Eigen::VectorXd& beta_std,
                                                                   double y_mean) const {
    Eigen::VectorXd coef(beta_std.size());
    double intercept = y_mean;
    for (Eigen::Index j = 0; j < beta_std.size(); ++j) {
        const double xm = column_mean(x.col(j));
        coef[j] = beta_std[j] / scales[j];
        intercept -= beta_std[j] * xm + coef[j] * means[j];
    }
    return {coef, intercept};
}

double soft_threshold(double z, double gamma) {
    if (z > gamma) return z - gamma;
    if (z < -gamma) return z + gamma;
    return 0.0;
}

double lambda_max(const StandardizedDesign& design) {
    if (design.x.cols() == 0) return 0.0;
    return centered_cross(design).cwiseAbs().maxCoeff() / static_cast<double>(design.x.rows());
}

LassoResult lasso_fit(const StandardizedDesign& design, double lambda, const LassoOptions& options,
                      const Eigen::VectorXd* warm_start) {
    return CoordinateDescent(design).solve(design, lambda, options, warm_start);
}

std::vector<LassoResult> lasso_path(const StandardizedDesign& design, const std::vector<double>& lambdas,
                                    const LassoOptions& options) {
    const CoordinateDescent cd(design);
    std::vector<LassoResult> out;
    out.reserve(lambdas.size());
    for (double lambda : lambdas) {
        const Eigen::VectorXd* warm = out.empty() ? nullptr : &out.back().coefficients_std;
        out.push_back(cd.solve(design, lambda, options, warm));
    }
    return out;
}

std::optional<LambdaRule> parse_lambda_rule(std::string_view s) {
    const auto k = normalize_label(s);
    if (k == "min") return LambdaRule::MinError;
    if (k == "1se" || k == "one_se" || k == "one-standard-error") return LambdaRule::OneStandardError;
    return std::nullopt;
}

std::string_view to_string(LambdaRule r) { return r == LambdaRule::MinError ? "min" : "1se"; }

std::vector<double> lambda_grid(double lmax, std::size_t size, double min_ratio) {
    if (size == 0) return {};
    if (!(lmax > 0.0)) return {0.0};
    if (size == 1) return {lmax};
    std::vector<double> out(size);
    const double step = std::log(min_ratio) / static_cast<double>(size - 1);
    for (std::size_t i = 0; i < size; ++i) out[i] = lmax * std::exp(step * static_cast<double>(i));
    out.front() = lmax;
    return out;
}

std::vector<std::size_t> assign_folds(std::size_t n, std::size_t k, std::uint64_t seed) {
    if (k == 0 || n < k) throw TooFewRows("need at least " + std::to_string(k) + " rows, have " +
                                          std::to_string(n));
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), 0);
    std::mt19937_64 gen(seed);
    for (std::size_t i = n; i > 1; --i) {
        std::swap(order[i - 1], order[bounded(gen, i)]);
    }
    std::vector<std::size_t> fold(n);
    const std::size_t base = n / k;
    const std::size_t extra = n % k;
    std::size_t pos = 0;
    for (std::size_t f = 0; f < k; ++f) {
        const std::size_t len = base + (f < extra ? 1 : 0);
        for (std::size_t i = 0; i < len; ++i) fold[order[pos++]] = f;
    }
    return fold;
}

CvCurve cv_select(const DesignMatrix& design, const CvOptions& options) {
    const auto n = static_cast<std::size_t>(design.x.rows());
    if (n < options.folds) {
        throw TooFewRows("cross-validation with " + std::to_string(options.folds) + " folds needs at least " +
                         std::to_string(options.folds) + " rows, have " + std::to_string(n));
    }
    CvCurve curve;
    curve.rule = options.rule;
    curve.lambdas = lambda_grid(lambda_max(standardize(design)), options.grid_size, options.min_ratio);
    curve.fold_of_row = assign_folds(n, options.folds, options.seed);

    const std::size_t g = curve.lambdas.size();
    std::vector<std::vector<double>> fold_mse(g, std::vector<double>(options.folds, 0.0));
    for (std::size_t f = 0; f < options.folds; ++f) {
        std::vector<std::size_t> train, test;
        for (std::size_t i = 0; i < n; ++i) (curve.fold_of_row[i] == f ? test : train).push_back(i);
        const auto train_std = standardize(design.subset_rows(train));
        const auto path = lasso_path(train_std, curve.lambdas, options.lasso);
        for (std::size_t l = 0; l < g; ++l) {
            CompensatedSum sse;
            for (std::size_t i : test) {
                double pred = path[l].intercept;
                for (std::size_t j = 0; j < train_std.source_columns.size(); ++j) {
                    pred += path[l].coefficients[static_cast<Eigen::Index>(j)] *
                            design.x(static_cast<Eigen::Index>(i),
                                     static_cast<Eigen::Index>(train_std.source_columns[j]));
                }
                const double r = design.y[static_cast<Eigen::Index>(i)] - pred;
                sse += r * r;
            }
            fold_mse[l][f] = sse.value() / static_cast<double>(test.size());
        }
    }

    const double k = static_cast<double>(options.folds);
    for (std::size_t l = 0; l < g; ++l) {
        CompensatedSum s;
        for (double v : fold_mse[l]) s += v;
        const double mean = s.value() / k;
        CompensatedSum ss;
        for (double v : fold_mse[l]) ss += (v - mean) * (v - mean);
        const double sd = options.folds > 1 ? std::sqrt(ss.value() / (k - 1.0)) : 0.0;
        curve.mean_error.push_back(mean);
        curve.std_error.push_back(sd / std::sqrt(k));
    }

    std::size_t best = 0;
    for (std::size_t l = 1; l < g; ++l) {
        if (curve.mean_error[l] < curve.mean_error[best]) best = l;
    }
    if (options.rule == LambdaRule::OneStandardError) {
        const double limit = curve.mean_error[best] + curve.std_error[best];
        for (std::size_t l = 0; l <= best; ++l) {
            if (curve.mean_error[l] <= limit) {
                best = l;
                break;
            }
        }
    }
    curve.chosen_index = best;
    curve.chosen_lambda = curve.lambdas[best];
    return curve;
}

OlsFit ols_fit(const DesignMatrix& design) {
    const auto n = design.x.rows();
    const auto p = design.x.cols();
    if (n <= p + 1) {
        throw TooFewRows("OLS with " + std::to_string(p) + " predictors needs more than " +
                         std::to_string(p + 1) + " rows, have " + std::to_string(n));
    }
    Eigen::MatrixXd x(n, p + 1);
    x.col(0).setOnes();
    x.rightCols(p) = design.x;
    const Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(x);
    if (qr.rank() < p + 1) throw DegenerateDesign("design matrix is rank deficient");
    const Eigen::VectorXd beta = qr.solve(design.y);

    const Eigen::MatrixXd r = qr.matrixR().topLeftCorner(p + 1, p + 1).triangularView<Eigen::Upper>();
    const Eigen::MatrixXd r_inv =
        r.triangularView<Eigen::Upper>().solve(Eigen::MatrixXd::Identity(p + 1, p + 1));
    const Eigen::MatrixXd cov_perm = r_inv * r_inv.transpose();
    const Eigen::MatrixXd cov = qr.colsPermutation() * cov_perm * qr.colsPermutation().transpose();

    const Eigen::VectorXd resid = design.y - x * beta;
    CompensatedSum rss;
    for (Eigen::Index i = 0; i < n; ++i) rss += resid[i] * resid[i];
    const auto df = static_cast<std::size_t>(n - p - 1);
    const double s2 = rss.value() / static_cast<double>(df);

    auto row = [&](Eigen::Index j, std::string name) {
        CoefficientRow c;
        c.name = std::move(name);
        c.estimate = beta[j];
        c.std_error = std::sqrt(s2 * cov(j, j));
        if (c.std_error > 0.0) {
            c.t_value = c.estimate / c.std_error;
        } else {
            c.t_value = c.estimate == 0.0 ? 0.0
                                          : std::copysign(std::numeric_limits<double>::infinity(), c.estimate);
        }
        c.p_value = student_t_two_sided_p(c.t_value, static_cast<double>(df));
        return c;
    };
    OlsFit out;
    out.df_residual = df;
    out.intercept = row(0, "(Intercept)");
    for (Eigen::Index j = 0; j < p; ++j) {
        out.coefficients.push_back(row(j + 1, design.names[static_cast<std::size_t>(j)]));
    }
    return out;
}

SelectionSummary ols_refit_filter(const DesignMatrix& active, double p_cut) {
    SelectionSummary s;
    s.response = active.response_name;
    s.p_cut = p_cut;
    s.n = static_cast<std::size_t>(active.x.rows());
    s.lasso_active = active.names;

    std::vector<std::size_t> keep;
    if (active.x.cols() > 0) {
        const auto first = ols_fit(active);
        for (std::size_t j = 0; j < first.coefficients.size(); ++j) {
            if (first.coefficients[j].p_value < p_cut) keep.push_back(j);
        }
    }
    if (keep.empty()) {
        s.empty_after_filter = true;
        const auto n = static_cast<double>(s.n);
        const double mean = column_mean(active.y);
        CompensatedSum ss;
        for (Eigen::Index i = 0; i < active.y.size(); ++i) ss += (active.y[i] - mean) * (active.y[i] - mean);
        s.df_residual = s.n > 0 ? s.n - 1 : 0;
        s.intercept.name = "(Intercept)";
        s.intercept.estimate = mean;
        s.intercept.std_error = s.n > 1 ? std::sqrt(ss.value() / (n - 1.0) / n) : 0.0;
        s.intercept.t_value = s.intercept.std_error > 0.0 ? mean / s.intercept.std_error : 0.0;
        s.intercept.p_value = s.df_residual > 0
                                  ? student_t_two_sided_p(s.intercept.t_value, static_cast<double>(s.df_residual))
                                  : 1.0;
        return s;
    }
    const auto final_fit = ols_fit(active.subset_columns(keep));
    for (std::size_t j : keep) s.kept_after_filter.push_back(active.names[j]);
    s.intercept = final_fit.intercept;
    s.coefficients = final_fit.coefficients;
    s.df_residual = final_fit.df_residual;
    return s;
}

SelectionSummary select_predictors(const DesignMatrix& design, const CvOptions& cv, double p_cut,
                                   CvCurve* curve_out) {
    auto curve = cv_select(design, cv);
    const auto full = standardize(design);
    const auto path = lasso_path(full, std::vector<double>(curve.lambdas.begin(),
                                                           curve.lambdas.begin() +
                                                               static_cast<std::ptrdiff_t>(curve.chosen_index) + 1),
                                 cv.lasso);
    const auto& chosen = path.back();
    std::vector<std::size_t> active_cols;
    for (std::size_t j : chosen.active) active_cols.push_back(full.source_columns[j]);

    SelectionSummary s = ols_refit_filter(design.subset_columns(active_cols), p_cut);
    s.chosen_lambda = curve.chosen_lambda;
    if (curve_out) *curve_out = std::move(curve);
    return s;
}

}  // namespace gridres
