#pragma once

// Independent reference computations and random fixture generators used by
// the unit and acceptance tests. Nothing here calls into the code under test
// except for plain data types.

#include <cstdint>
#include <random>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "gridres/ingest.hpp"
#include "gridres/regress.hpp"

namespace gridres::testing {

/// Leave-one-out quantities obtained by literally refitting without each row.
struct LooRow {
    std::vector<double> dfbetas;
    double dffits = 0.0;
    double covratio = 0.0;
    double cooks_d = 0.0;
    double hat = 0.0;
};

/// Weighted least squares on sqrt(w)-scaled rows solved through the normal
/// equations, refit n times.
std::vector<LooRow> loo_brute_force(const std::vector<RegPoint>& points, RegressionModel model);

/// (X'X)^-1 X'y with an intercept column first.
Eigen::VectorXd ols_normal_equations(const Eigen::MatrixXd& x, const Eigen::VectorXd& y);

/// Random events in one state with timestamps in `year`.
std::vector<OutageEvent> random_events(std::mt19937_64& rng, std::size_t n, std::int64_t max_customers,
                                       int year = 2015, const std::string& state = "CA");

/// Random points with x in (0, 1], y >= 0 and weights in [0.5, 2] (or 1).
std::vector<RegPoint> random_points(std::mt19937_64& rng, std::size_t n, bool weighted);

/// A dirty OE-417-style CSV table: missing cells, negative and zero counts,
/// swapped AM/PM markers, unknown causes, unknown areas, multi-state areas.
std::string random_outage_csv(std::mt19937_64& rng, std::size_t rows);

/// Three years (2014-2016) of one daily event in state "CA" over 1,000,000
/// customers. 2015 carries one extreme outlier, and 2016 carries a probe
/// event whose daily SAIDI lies strictly between the one-year-window
/// thresholds for 2015 and 2016, so the inflated 2016 threshold misses it.
struct MedFixture {
    std::vector<OutageEvent> events;
    double n_t = 1e6;
    std::size_t outlier = 0;  // index into events
    std::size_t probe = 0;
    double t_med_2015 = 0.0;  // reference thresholds, window of one year
    double t_med_2016 = 0.0;
};

MedFixture engineered_med_fixture();

/// exp(mean + 2.5 sd) of log values, sample sd.
double reference_t_med(const std::vector<double>& positive_daily_saidi);

bool near(double a, double b, double tol);

}  // namespace gridres::testing
