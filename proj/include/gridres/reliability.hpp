#pragma once

#include <functional>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "gridres/ingest.hpp"

namespace gridres {

/// Inclusive calendar-year interval.
struct YearRange {
    int start = 0;
    int end = 0;

    bool contains(int year) const noexcept { return year >= start && year <= end; }
    auto operator<=>(const YearRange&) const = default;
};

/// Two nine-year windows sharing 2011.
inline const std::vector<YearRange> kOverlappingRanges{{2002, 2011}, {2011, 2019}};
/// 2002-2010 and 2011-2019, as used for the two-period state maps.
inline const std::vector<YearRange> kDisjointRanges{{2002, 2010}, {2011, 2019}};

struct GroupKey {
    std::optional<std::string> state;
    std::optional<CauseCategory> cause;
    std::optional<NercRegion> nerc_region;
    std::optional<YearRange> year_range;

    auto operator<=>(const GroupKey&) const = default;
};

/// Per-event weight. Defaults to 1 for every event.
class WeightScheme {
public:
    using Fn = std::function<double(const OutageEvent&)>;

    WeightScheme() = default;
    static WeightScheme unit() { return {}; }
    /// Weight per state; states not listed get `fallback`.
    static WeightScheme by_state(std::map<std::string, double> weights, double fallback = 1.0);
    static WeightScheme custom(Fn fn);

    /// Throws Error for a non-positive or non-finite weight.
    double operator()(const OutageEvent& ev) const;
    bool is_unit() const noexcept { return !fn_; }

private:
    Fn fn_;
};

struct MetricTriple {
    GroupKey key;
    double saidi = 0.0;            // hours per customer
    double saifi = 0.0;            // interruptions per customer
    std::optional<double> caidi;   // hours per interruption; absent for empty groups
    std::size_t n_events = 0;
    double n_t = 0.0;              // customers served (a mean for multi-year groups)
    bool weights_applied = false;
    std::size_t events_exceeding_base = 0;  // events with N_i > N_T
};

/// Weighted SAIDI = sum(w r N)/N_T, SAIFI = sum(w N)/N_T, CAIDI = sum(w r N)/sum(w N).
/// Throws EmptyGroupNt when n_t <= 0.
MetricTriple compute_metrics(std::span<const OutageEvent> events, double n_t,
                             const WeightScheme& weights = {}, GroupKey key = {});

enum class NtMode {
    Mean,       // arithmetic mean of yearly customers served over the window
    FinalYear,  // customers served in the window's last year
    PerYear,    // each event divided by its own year's N_T, then summed
};

std::optional<NtMode> parse_nt_mode(std::string_view s);
std::string_view to_string(NtMode m);

struct GroupingSpec {
    bool by_state = false;
    bool by_cause = false;
    bool by_region = false;
    std::vector<YearRange> year_ranges;  // empty: one window spanning `span`
    /// Years covered when no year range applies. Defaults to the event set's span.
    std::optional<YearRange> span;
    NtMode nt_mode = NtMode::Mean;
};

/// One triple per group in the cartesian product of the requested dimensions.
/// The state universe is the customer table's states, so states without
/// events come out with n_events = 0 and no CAIDI.
/// Region groups use as N_T the customers of every state that has at least one
/// event in that region. Events without a region are left out of region groups.
/// Throws MissingBase listing all missing (state, year) keys.
std::vector<MetricTriple> metrics_by_group(std::span<const OutageEvent> events,
                                           const CustomerBaseTable& base, const GroupingSpec& spec,
                                           const WeightScheme& weights = {});

/// N_T for a set of states over a window under `mode` (PerYear reports the
/// mean). Throws MissingBase listing every absent (state, year).
double group_customers(const CustomerBaseTable& base, std::span<const std::string> states,
                       YearRange window, NtMode mode);

/// Each event goes to every range that contains its begin year.
std::vector<std::vector<OutageEvent>> split_year_ranges(std::span<const OutageEvent> events,
                                                        std::span<const YearRange> ranges);

/// Event counts for every (region, cause) pair, zeros included.
std::map<std::pair<NercRegion, CauseCategory>, std::size_t> count_by_region_and_cause(
    std::span<const OutageEvent> events);

std::string describe(const GroupKey& key);

}  // namespace gridres
