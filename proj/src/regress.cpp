#include "gridres/regress.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <set>

#include "gridres/errors.hpp"
#include "gridres/summation.hpp"
#include "gridres/text.hpp"

namespace gridres {

namespace {

// 0/0 is treated as 0; x/0 as a signed infinity.
double ratio(double num, double den) {
    if (den != 0.0) return num / den;
    if (num == 0.0) return 0.0;
    return std::copysign(std::numeric_limits<double>::infinity(), num);
}

void finish_fit(RegressionFit& f) {
    CompensatedSum rss;
    f.fitted.resize(f.n);
    f.residuals.resize(f.n);
    for (std::size_t i = 0; i < f.n; ++i) {
        const auto& pt = f.points[i];
        f.fitted[i] = f.slope * pt.x + f.intercept.value_or(0.0);
        f.residuals[i] = pt.y - f.fitted[i];
        rss += pt.weight * f.residuals[i] * f.residuals[i];
    }
    f.residual_variance = f.n > f.p ? rss.value() / static_cast<double>(f.n - f.p)
                                    : std::numeric_limits<double>::quiet_NaN();
}

void check_points(std::span<const RegPoint> points) {
    for (const auto& p : points) {
        if (!(p.weight > 0.0) || !std::isfinite(p.weight) || !std::isfinite(p.x) ||
            !std::isfinite(p.y)) {
            throw DegenerateDesign("point '" + p.label + "' has a non-finite value or weight <= 0");
        }
    }
}

}  // namespace

std::string event_label(const OutageEvent& ev) {
    return "row" + std::to_string(ev.source_row) + ":" + ev.state + ":" +
           format_date(date_of(ev.began));
}

std::vector<RegPoint> points_from_events(std::span<const OutageEvent> events, double n_t,
                                         const WeightScheme& weights) {
    if (!(n_t > 0.0)) throw EmptyGroupNt("N_T must be positive");
    std::vector<RegPoint> out;
    out.reserve(events.size());
    for (const auto& ev : events) {
        out.push_back({static_cast<double>(ev.customers_affected) / n_t,
                       ev.elapsed_hours / kHoursPerDay, weights(ev), event_label(ev)});
    }
    return out;
}

std::string_view to_string(RegressionModel m) {
    return m == RegressionModel::ThroughOrigin ? "through_origin" : "with_intercept";
}

bool RegressionFit::unit_weights() const {
    return std::all_of(points.begin(), points.end(), [](const RegPoint& p) { return p.weight == 1.0; });
}

std::vector<double> RegressionFit::coefficients() const {
    if (model == RegressionModel::ThroughOrigin) return {slope};
    return {intercept.value_or(0.0), slope};
}

RegressionFit fit_origin(std::span<const RegPoint> points) {
    if (points.empty()) throw InsufficientData("through-origin fit needs at least one point");
    check_points(points);
    CompensatedSum sxy, sxx;
    for (const auto& p : points) {
        sxy += p.weight * p.x * p.y;
        sxx += p.weight * p.x * p.x;
    }
    const double denom = sxx.value();
    if (denom == 0.0) throw DegenerateDesign("sum of w x^2 is zero");

    RegressionFit f;
    f.model = RegressionModel::ThroughOrigin;
    f.n = points.size();
    f.p = 1;
    f.points.assign(points.begin(), points.end());
    f.slope = sxy.value() / denom;
    f.hat.reserve(f.n);
    for (const auto& p : points) f.hat.push_back(p.weight * p.x * p.x / denom);
    finish_fit(f);
    return f;
}

RegressionFit fit_intercept(std::span<const RegPoint> points) {
    if (points.size() < 3) throw InsufficientData("intercept fit needs at least three points");
    check_points(points);
    const bool all_equal = std::all_of(points.begin(), points.end(),
                                       [&](const RegPoint& p) { return p.x == points.front().x; });
    if (all_equal) throw DegenerateDesign("all x values are equal");

    CompensatedSum sw, swx, swy;
    for (const auto& p : points) {
        sw += p.weight;
        swx += p.weight * p.x;
        swy += p.weight * p.y;
    }
    const double x_bar = swx.value() / sw.value();
    const double y_bar = swy.value() / sw.value();
    CompensatedSum sxx, sxy;
    for (const auto& p : points) {
        const double dx = p.x - x_bar;
        sxx += p.weight * dx * dx;
        sxy += p.weight * dx * (p.y - y_bar);
    }
    if (sxx.value() == 0.0) throw DegenerateDesign("x has zero weighted spread");

    RegressionFit f;
    f.model = RegressionModel::WithIntercept;
    f.n = points.size();
    f.p = 2;
    f.points.assign(points.begin(), points.end());
    f.slope = sxy.value() / sxx.value();
    f.intercept = y_bar - f.slope * x_bar;
    f.hat.reserve(f.n);
    for (const auto& p : points) {
        const double dx = p.x - x_bar;
        f.hat.push_back(p.weight * (1.0 / sw.value() + dx * dx / sxx.value()));
    }
    finish_fit(f);
    return f;
}

RegressionFit fit(std::span<const RegPoint> points, RegressionModel model) {
    return model == RegressionModel::ThroughOrigin ? fit_origin(points) : fit_intercept(points);
}

IdentityReport slope_metric_identity(const RegressionFit& fit, const MetricTriple& metrics,
                                     std::span<const double> fractions, double tolerance) {
    if (fit.model != RegressionModel::ThroughOrigin) {
        throw ModelMismatch("slope identity needs a through-origin fit");
    }
    if (!fit.unit_weights()) throw ModelMismatch("slope identity needs unit weights");
    if (metrics.weights_applied) throw ModelMismatch("slope identity needs unweighted metrics");

    CompensatedSum sum_sq;
    for (double x : fractions) sum_sq += x * x;
    const double denom = sum_sq.value();

    IdentityReport r;
    r.tolerance = tolerance;
    r.slope = fit.slope;
    const double saidi_days = metrics.saidi / kHoursPerDay;
    const double caidi_days = metrics.caidi.value_or(0.0) / kHoursPerDay;
    r.saidi_route = saidi_days / denom;
    r.caidi_saifi_route = caidi_days * metrics.saifi / denom;
    const double scale = std::fabs(fit.slope);
    r.rel_error_saidi = ratio(std::fabs(fit.slope - r.saidi_route), scale);
    r.rel_error_caidi_saifi = ratio(std::fabs(fit.slope - r.caidi_saifi_route), scale);
    r.holds = r.rel_error_saidi <= tolerance && r.rel_error_caidi_saifi <= tolerance;
    return r;
}

std::string_view to_string(InfluenceMeasure m) {
    switch (m) {
        case InfluenceMeasure::DfBetas: return "dfbetas";
        case InfluenceMeasure::DfFits: return "dffits";
        case InfluenceMeasure::CovRatio: return "covratio";
        case InfluenceMeasure::CooksD: return "cooks_d";
        case InfluenceMeasure::Hat: return "hat";
    }
    return "?";
}

std::optional<InfluenceMeasure> parse_influence_measure(std::string_view s) {
    const auto k = normalize_label(s);
    if (k == "dfbetas") return InfluenceMeasure::DfBetas;
    if (k == "dffits") return InfluenceMeasure::DfFits;
    if (k == "covratio") return InfluenceMeasure::CovRatio;
    if (k == "cooks_d" || k == "cooks" || k == "cook") return InfluenceMeasure::CooksD;
    if (k == "hat") return InfluenceMeasure::Hat;
    return std::nullopt;
}

InfluenceThresholds::Resolved InfluenceThresholds::resolve(std::size_t n, std::size_t p) const {
    const double dn = static_cast<double>(n);
    const double dp = static_cast<double>(p);
    Resolved r{dfbetas_cut.value_or(2.0 / std::sqrt(dn)), dffits_cut.value_or(2.0 * std::sqrt(dp / dn)),
               covratio_band.value_or(3.0 * dp / dn), cooks_cut.value_or(4.0 / dn),
               hat_cut.value_or(2.0 * dp / dn)};
    for (double c : {r.dfbetas_cut, r.dffits_cut, r.covratio_band, r.cooks_cut, r.hat_cut}) {
        if (!(c > 0.0)) throw Error("influence thresholds must be positive");
    }
    return r;
}

bool InfluenceRow::flagged(InfluenceMeasure m) const {
    switch (m) {
        case InfluenceMeasure::DfBetas: return flag_dfbetas;
        case InfluenceMeasure::DfFits: return flag_dffits;
        case InfluenceMeasure::CovRatio: return flag_covratio;
        case InfluenceMeasure::CooksD: return flag_cooks;
        case InfluenceMeasure::Hat: return flag_hat;
    }
    return false;
}

void apply_thresholds(std::vector<InfluenceRow>& rows, const InfluenceThresholds::Resolved& cuts) {
    for (auto& r : rows) {
        r.flag_dfbetas = std::any_of(r.dfbetas.begin(), r.dfbetas.end(),
                                     [&](double v) { return std::fabs(v) > cuts.dfbetas_cut; });
        r.flag_dffits = std::fabs(r.dffits) > cuts.dffits_cut;
        r.flag_covratio = std::fabs(r.covratio - 1.0) > cuts.covratio_band;
        r.flag_cooks = r.cooks_d > cuts.cooks_cut;
        r.flag_hat = r.hat > cuts.hat_cut;
    }
}

InfluenceReport influence(const RegressionFit& fit, const InfluenceThresholds& thresholds) {
    const std::size_t n = fit.n;
    const std::size_t p = fit.p;
    if (n <= p + 1) {
        throw InsufficientData("influence diagnostics need n > p + 1 (n=" + std::to_string(n) +
                               ", p=" + std::to_string(p) + ")");
    }

    // (X'WX)^-1 in design order.
    std::vector<double> cov(p * p, 0.0);
    if (fit.model == RegressionModel::ThroughOrigin) {
        CompensatedSum sxx;
        for (const auto& pt : fit.points) sxx += pt.weight * pt.x * pt.x;
        cov[0] = 1.0 / sxx.value();
    } else {
        CompensatedSum sw, swx;
        for (const auto& pt : fit.points) {
            sw += pt.weight;
            swx += pt.weight * pt.x;
        }
        const double x_bar = swx.value() / sw.value();
        CompensatedSum sxx;
        for (const auto& pt : fit.points) sxx += pt.weight * (pt.x - x_bar) * (pt.x - x_bar);
        cov[0] = 1.0 / sw.value() + x_bar * x_bar / sxx.value();
        cov[1] = cov[2] = -x_bar / sxx.value();
        cov[3] = 1.0 / sxx.value();
    }

    const double s2 = fit.residual_variance;
    const double dof = static_cast<double>(n - p);
    InfluenceReport report;
    report.model = fit.model;
    report.cuts = thresholds.resolve(n, p);
    report.rows.reserve(n);
    for (std::size_t i = 0; i < n; ++i) {
        const auto& pt = fit.points[i];
        const double h = fit.hat[i];
        if (!(h < 1.0)) {
            throw DegenerateDesign("observation '" + pt.label + "' has leverage 1");
        }
        const double e = fit.residuals[i];
        const double ew = std::sqrt(pt.weight) * e;
        const double s2_del = std::max(0.0, (dof * s2 - ew * ew / (1.0 - h)) / (dof - 1.0));
        const double s_del = std::sqrt(s2_del);

        InfluenceRow row;
        row.label = pt.label;
        row.hat = h;

        std::vector<double> xi = fit.model == RegressionModel::ThroughOrigin
                                     ? std::vector<double>{pt.x}
                                     : std::vector<double>{1.0, pt.x};
        row.dfbetas.resize(p);
        for (std::size_t j = 0; j < p; ++j) {
            double cx = 0.0;
            for (std::size_t k = 0; k < p; ++k) cx += cov[j * p + k] * xi[k];
            const double delta = cx * pt.weight * e / (1.0 - h);
            row.dfbetas[j] = ratio(delta, s_del * std::sqrt(cov[j * p + j]));
        }
        row.dffits = ratio(ew * std::sqrt(h), s_del * (1.0 - h));
        row.cooks_d = ratio(ew * ew * h, static_cast<double>(p) * s2 * (1.0 - h) * (1.0 - h));
        const double var_ratio = (s2 == 0.0 && s2_del == 0.0) ? 1.0 : ratio(s2_del, s2);
        row.covratio = std::pow(var_ratio, static_cast<double>(p)) / (1.0 - h);
        report.rows.push_back(std::move(row));
    }
    apply_thresholds(report.rows, report.cuts);
    return report;
}

std::optional<double> percent_change(std::optional<double> before, std::optional<double> after) {
    if (!before || !after || *before == 0.0) return std::nullopt;
    return (*after - *before) / *before * 100.0;
}

std::string format_percent_change(double percent) {
    char buf[64];
    // Round half away from zero at one decimal, independent of printf's mode.
    const double rounded = std::round(percent * 10.0) / 10.0;
    if (rounded == 0.0) return "0.0%";
    std::snprintf(buf, sizeof buf, "%+.1f%%", rounded);
    return buf;
}

ExcisionReport compare_metrics(const MetricTriple& before, const MetricTriple& after) {
    ExcisionReport r;
    r.before = before;
    r.after = after;
    auto add = [&](const char* name, std::optional<double> b, std::optional<double> a) {
        r.changes.push_back({name, b, a, percent_change(b, a)});
    };
    auto present = [](const MetricTriple& m, double v) {
        return m.n_events > 0 ? std::optional<double>(v) : std::optional<double>(0.0);
    };
    add("SAIDI", present(before, before.saidi), present(after, after.saidi));
    add("SAIFI", present(before, before.saifi), present(after, after.saifi));
    add("CAIDI", before.caidi, after.caidi);
    return r;
}

ExcisionReport excise_labels(std::span<const OutageEvent> events, double n_t,
                             std::span<const std::string> labels, const WeightScheme& weights) {
    const std::set<std::string> drop(labels.begin(), labels.end());
    std::vector<OutageEvent> kept;
    std::vector<std::string> removed;
    for (const auto& ev : events) {
        const auto label = event_label(ev);
        if (drop.count(label)) {
            removed.push_back(label);
        } else {
            kept.push_back(ev);
        }
    }
    auto r = compare_metrics(compute_metrics(events, n_t, weights), compute_metrics(kept, n_t, weights));
    r.removed_labels = std::move(removed);
    return r;
}

ExcisionReport excise_and_recompute(std::span<const OutageEvent> events, double n_t,
                                    std::span<const InfluenceRow> rows, InfluenceMeasure measure,
                                    const WeightScheme& weights) {
    std::vector<std::string> labels;
    for (const auto& r : rows) {
        if (r.flagged(measure)) labels.push_back(r.label);
    }
    if (labels.empty()) {
        throw NothingFlagged("no observation is flagged by " + std::string(to_string(measure)));
    }
    return excise_labels(events, n_t, labels, weights);
}

}  // namespace gridres
