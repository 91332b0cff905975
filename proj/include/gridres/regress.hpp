#pragma once

#include <optional>
#include <span>
#include <string>
#include <vector>

#include "gridres/ingest.hpp"
#include "gridres/reliability.hpp"

namespace gridres {

inline constexpr double kHoursPerDay = 24.0;

/// One observation on the (fraction affected, duration in days) plane.
struct RegPoint {
    double x = 0.0;       // N_i / N_T
    double y = 0.0;       // elapsed days
    double weight = 1.0;
    std::string label;
};

/// x = N_i / n_t, y = elapsed hours / 24, weight from `weights`.
std::vector<RegPoint> points_from_events(std::span<const OutageEvent> events, double n_t,
                                         const WeightScheme& weights = {});

/// Stable identifier used to tie regression rows back to events.
std::string event_label(const OutageEvent& ev);

enum class RegressionModel { ThroughOrigin, WithIntercept };

std::string_view to_string(RegressionModel m);

struct RegressionFit {
    RegressionModel model = RegressionModel::ThroughOrigin;
    double slope = 0.0;                 // days per unit fraction
    std::optional<double> intercept;    // days
    std::size_t n = 0;
    std::size_t p = 1;
    std::vector<double> fitted;
    std::vector<double> residuals;      // y - fitted
    std::vector<double> hat;
    double residual_variance = 0.0;     // weighted RSS / (n - p); NaN when n == p
    std::vector<RegPoint> points;

    bool unit_weights() const;
    /// Coefficients in design order: slope for through-origin, (intercept, slope) otherwise.
    std::vector<double> coefficients() const;
};

/// slope = sum(w x y) / sum(w x^2). Throws DegenerateDesign when sum(w x^2) == 0,
/// InsufficientData for an empty point set.
RegressionFit fit_origin(std::span<const RegPoint> points);

/// Weighted simple linear regression. Throws InsufficientData for n < 3 and
/// DegenerateDesign when every x is equal.
RegressionFit fit_intercept(std::span<const RegPoint> points);

RegressionFit fit(std::span<const RegPoint> points, RegressionModel model);

struct IdentityReport {
    double slope = 0.0;
    double saidi_route = 0.0;        // SAIDI_days / sum (N_i/N_T)^2
    double caidi_saifi_route = 0.0;  // CAIDI_days * SAIFI / sum (N_i/N_T)^2
    double rel_error_saidi = 0.0;
    double rel_error_caidi_saifi = 0.0;
    bool holds = false;              // both relative errors <= tolerance
    double tolerance = 1e-10;
};

/// Checks slope = SAIDI/sum(x^2) = CAIDI*SAIFI/sum(x^2). `metrics` carry hours
/// and are converted to days here. Throws ModelMismatch unless the fit is
/// through the origin with unit weights.
IdentityReport slope_metric_identity(const RegressionFit& fit, const MetricTriple& metrics,
                                     std::span<const double> fractions, double tolerance = 1e-10);

enum class InfluenceMeasure { DfBetas, DfFits, CovRatio, CooksD, Hat };

std::string_view to_string(InfluenceMeasure m);
std::optional<InfluenceMeasure> parse_influence_measure(std::string_view s);

/// Unset cuts resolve to the conventional defaults for the fit's n and p:
/// |DFBETAS| > 2/sqrt(n), |DFFITS| > 2 sqrt(p/n), |COVRATIO - 1| > 3p/n,
/// Cook's D > 4/n, hat > 2p/n.
struct InfluenceThresholds {
    std::optional<double> dfbetas_cut;
    std::optional<double> dffits_cut;
    std::optional<double> covratio_band;
    std::optional<double> cooks_cut;
    std::optional<double> hat_cut;

    struct Resolved {
        double dfbetas_cut, dffits_cut, covratio_band, cooks_cut, hat_cut;
    };
    /// Throws Error when a configured cut is not positive.
    Resolved resolve(std::size_t n, std::size_t p) const;
};

struct InfluenceRow {
    std::string label;
    std::vector<double> dfbetas;  // one per coefficient, design order
    double dffits = 0.0;
    double covratio = 0.0;
    double cooks_d = 0.0;
    double hat = 0.0;
    bool flag_dfbetas = false;
    bool flag_dffits = false;
    bool flag_covratio = false;
    bool flag_cooks = false;
    bool flag_hat = false;

    bool flagged(InfluenceMeasure m) const;
};

struct InfluenceReport {
    RegressionModel model = RegressionModel::WithIntercept;
    InfluenceThresholds::Resolved cuts{};
    std::vector<InfluenceRow> rows;
};

/// Leave-one-out diagnostics via the closed-form deletion formulas.
/// Throws InsufficientData when n <= p + 1, DegenerateDesign if any hat is 1.
InfluenceReport influence(const RegressionFit& fit, const InfluenceThresholds& thresholds = {});

/// Flags on already computed rows, for re-thresholding without refitting.
void apply_thresholds(std::vector<InfluenceRow>& rows, const InfluenceThresholds::Resolved& cuts);

struct MetricChange {
    std::string metric;  // "SAIDI", "SAIFI", "CAIDI"
    std::optional<double> before;
    std::optional<double> after;
    std::optional<double> percent;  // signed; absent when undefined
};

struct ExcisionReport {
    MetricTriple before;
    MetricTriple after;
    std::vector<std::string> removed_labels;
    std::vector<MetricChange> changes;  // SAIDI, SAIFI, CAIDI
};

/// Signed percent change, one decimal: "+206.6%", "-69.4%", "0.0%".
std::string format_percent_change(double percent);
std::optional<double> percent_change(std::optional<double> before, std::optional<double> after);

/// Before/after comparison of two metric triples.
ExcisionReport compare_metrics(const MetricTriple& before, const MetricTriple& after);

/// Removes the events whose labels are listed and recomputes over the same N_T.
ExcisionReport excise_labels(std::span<const OutageEvent> events, double n_t,
                             std::span<const std::string> labels, const WeightScheme& weights = {});

/// Removes every event flagged under `measure` (rows aligned with `events` by
/// label) and recomputes. Throws NothingFlagged.
ExcisionReport excise_and_recompute(std::span<const OutageEvent> events, double n_t,
                                    std::span<const InfluenceRow> rows, InfluenceMeasure measure,
                                    const WeightScheme& weights = {});

}  // namespace gridres
