#pragma once

#include <span>
#include <string>
#include <vector>

#include "gridres/datetime.hpp"
#include "gridres/ingest.hpp"

namespace gridres {

struct DailySaidi {
    Date date;
    double saidi = 0.0;  // hours per customer per day
};

/// Strictly increasing dates, one entry per calendar day.
using DailySaidiSeries = std::vector<DailySaidi>;

/// Each event's r N / N_T lands on the day it began; days without events are 0.
/// Events outside [first, last] are ignored.
DailySaidiSeries daily_saidi(std::span<const OutageEvent> events, double n_t, Date first, Date last);

struct MedOptions {
    int window_years = 5;
    std::size_t min_positive_days = 30;
    double multiplier = 2.5;
};

struct MedThreshold {
    double mu_log = 0.0;
    double sigma_log = 0.0;  // sample standard deviation
    double t_med = 0.0;      // exp(mu_log + multiplier * sigma_log)
    Date window_start;
    Date window_end;
    std::size_t n_days_used = 0;
    double multiplier = 2.5;
};

/// Log statistics over days with saidi > 0 inside [start, end].
/// Throws InsufficientHistory below options.min_positive_days.
MedThreshold med_threshold_over(const DailySaidiSeries& series, Date start, Date end,
                                const MedOptions& options = {});

/// Threshold for `evaluation_year` from the window_years full years before it.
MedThreshold med_threshold(const DailySaidiSeries& series, int evaluation_year,
                           const MedOptions& options = {});

struct DayClass {
    Date date;
    double saidi = 0.0;
    bool is_med = false;
};

/// is_med <=> saidi > t_med (strict).
std::vector<DayClass> classify_days(const DailySaidiSeries& series, const MedThreshold& threshold);

struct DetectorRow {
    std::string label;
    Date date;
    bool med = false;
    bool influence = false;
};

struct DetectorComparison {
    std::vector<DetectorRow> rows;
    std::size_t both = 0;
    std::size_t med_only = 0;
    std::size_t influence_only = 0;
    std::size_t neither = 0;
};

/// `influence_flags` is aligned with `events`. An event counts as MED-flagged
/// when the day it began is classified as a MED.
DetectorComparison compare_detectors(std::span<const OutageEvent> events,
                                     std::span<const DayClass> med_days,
                                     std::span<const bool> influence_flags);

}  // namespace gridres
