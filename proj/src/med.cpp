#include "gridres/med.hpp"

#include <cmath>
#include <map>

#include "gridres/errors.hpp"
#include "gridres/regress.hpp"
#include "gridres/summation.hpp"

namespace gridres {

DailySaidiSeries daily_saidi(std::span<const OutageEvent> events, double n_t, Date first, Date last) {
    if (!(n_t > 0.0)) throw EmptyGroupNt("N_T must be positive");
    const std::chrono::sys_days d0{first};
    const std::chrono::sys_days d1{last};
    if (d1 < d0) return {};
    const auto days = static_cast<std::size_t>((d1 - d0).count()) + 1;
    std::vector<CompensatedSum> sums(days);
    for (const auto& ev : events) {
        const auto d = std::chrono::floor<std::chrono::days>(ev.began);
        if (d < d0 || d > d1) continue;
        sums[static_cast<std::size_t>((d - d0).count())] +=
            ev.elapsed_hours * static_cast<double>(ev.customers_affected) / n_t;
    }
    DailySaidiSeries out;
    out.reserve(days);
    for (std::size_t i = 0; i < days; ++i) {
        out.push_back({Date{d0 + std::chrono::days{static_cast<int>(i)}}, sums[i].value()});
    }
    return out;
}

MedThreshold med_threshold_over(const DailySaidiSeries& series, Date start, Date end,
                                const MedOptions& options) {
    std::vector<double> logs;
    const std::chrono::sys_days s{start};
    const std::chrono::sys_days e{end};
    for (const auto& d : series) {
        const std::chrono::sys_days day{d.date};
        if (day < s || day > e || !(d.saidi > 0.0)) continue;
        logs.push_back(std::log(d.saidi));
    }
    if (logs.size() < options.min_positive_days || logs.size() < 2) {
        throw InsufficientHistory("window " + format_date(start) + ".." + format_date(end) + " has " +
                                  std::to_string(logs.size()) + " positive-SAIDI days, need " +
                                  std::to_string(std::max<std::size_t>(options.min_positive_days, 2)));
    }
    // Shifted accumulation keeps a constant series exactly constant.
    const double pivot = logs.front();
    CompensatedSum shift;
    for (double v : logs) shift += v - pivot;
    const double count = static_cast<double>(logs.size());
    const double mu = pivot + shift.value() / count;
    CompensatedSum ss;
    for (double v : logs) ss += (v - mu) * (v - mu);
    const double sigma = std::sqrt(ss.value() / (count - 1.0));

    MedThreshold t;
    t.mu_log = mu;
    t.sigma_log = sigma;
    t.multiplier = options.multiplier;
    t.window_start = start;
    t.window_end = end;
    t.n_days_used = logs.size();
    bool constant = true;
    for (double v : logs) constant = constant && v == pivot;
    if (constant) {
        // exp(log(s)) can be off by an ulp; the threshold of a constant series is s itself.
        for (const auto& d : series) {
            const std::chrono::sys_days day{d.date};
            if (day >= s && day <= e && d.saidi > 0.0) {
                t.t_med = d.saidi;
                t.sigma_log = 0.0;
                break;
            }
        }
    } else {
        t.t_med = std::exp(mu + options.multiplier * sigma);
    }
    return t;
}

MedThreshold med_threshold(const DailySaidiSeries& series, int evaluation_year, const MedOptions& options) {
    using namespace std::chrono;
    const Date start{year{evaluation_year - options.window_years}, January, day{1}};
    const Date end{year{evaluation_year - 1}, December, day{31}};
    return med_threshold_over(series, start, end, options);
}

std::vector<DayClass> classify_days(const DailySaidiSeries& series, const MedThreshold& threshold) {
    std::vector<DayClass> out;
    out.reserve(series.size());
    for (const auto& d : series) out.push_back({d.date, d.saidi, d.saidi > threshold.t_med});
    return out;
}

DetectorComparison compare_detectors(std::span<const OutageEvent> events, std::span<const DayClass> med_days,
                                     std::span<const bool> influence_flags) {
    if (influence_flags.size() != events.size()) {
        throw Error("influence flags must align with events");
    }
    std::map<std::chrono::sys_days, bool> med_by_day;
    for (const auto& d : med_days) med_by_day[std::chrono::sys_days{d.date}] = d.is_med;

    DetectorComparison out;
    for (std::size_t i = 0; i < events.size(); ++i) {
        DetectorRow row;
        row.label = event_label(events[i]);
        row.date = date_of(events[i].began);
        const auto it = med_by_day.find(std::chrono::sys_days{row.date});
        row.med = it != med_by_day.end() && it->second;
        row.influence = influence_flags[i];
        if (row.med && row.influence) {
            ++out.both;
        } else if (row.med) {
            ++out.med_only;
        } else if (row.influence) {
            ++out.influence_only;
        } else {
            ++out.neither;
        }
        out.rows.push_back(std::move(row));
    }
    return out;
}

}  // namespace gridres
