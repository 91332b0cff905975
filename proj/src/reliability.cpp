#include "gridres/reliability.hpp"

#include <algorithm>
#include <cmath>
#include <set>

#include "gridres/errors.hpp"
#include "gridres/summation.hpp"
#include "gridres/text.hpp"

namespace gridres {

WeightScheme WeightScheme::by_state(std::map<std::string, double> weights, double fallback) {
    WeightScheme w;
    w.fn_ = [weights = std::move(weights), fallback](const OutageEvent& ev) {
        const auto it = weights.find(ev.state);
        return it == weights.end() ? fallback : it->second;
    };
    return w;
}

WeightScheme WeightScheme::custom(Fn fn) {
    WeightScheme w;
    w.fn_ = std::move(fn);
    return w;
}

double WeightScheme::operator()(const OutageEvent& ev) const {
    if (!fn_) return 1.0;
    const double w = fn_(ev);
    if (!(w > 0.0) || !std::isfinite(w)) {
        throw Error("weight for source row " + std::to_string(ev.source_row) +
                    " is not a positive finite number");
    }
    return w;
}

namespace {

struct Sums {
    CompensatedSum duration_customers;  // sum w r N
    CompensatedSum customers;           // sum w N
};

MetricTriple finish(GroupKey key, std::size_t n, double n_t, bool weighted, double saidi,
                    double saifi, std::optional<double> caidi) {
    MetricTriple m;
    m.key = std::move(key);
    m.n_events = n;
    m.n_t = n_t;
    m.weights_applied = weighted;
    if (n > 0) {
        m.saidi = saidi;
        m.saifi = saifi;
        m.caidi = caidi;
    }
    return m;
}

}  // namespace

MetricTriple compute_metrics(std::span<const OutageEvent> events, double n_t,
                             const WeightScheme& weights, GroupKey key) {
    if (!(n_t > 0.0)) throw EmptyGroupNt("N_T must be positive for group " + describe(key));
    Sums s;
    std::size_t exceeding = 0;
    for (const auto& ev : events) {
        const double w = weights(ev);
        const double n = static_cast<double>(ev.customers_affected);
        s.duration_customers += w * ev.elapsed_hours * n;
        s.customers += w * n;
        if (n > n_t) ++exceeding;
    }
    const double a = s.duration_customers.value();
    const double b = s.customers.value();
    auto m = finish(std::move(key), events.size(), n_t, !weights.is_unit(), a / n_t, b / n_t,
                    b > 0.0 ? std::optional<double>(a / b) : std::nullopt);
    m.events_exceeding_base = exceeding;
    return m;
}

std::optional<NtMode> parse_nt_mode(std::string_view s) {
    const auto k = normalize_label(s);
    if (k == "mean") return NtMode::Mean;
    if (k == "final_year" || k == "final-year") return NtMode::FinalYear;
    if (k == "per_year" || k == "per-year" || k == "per_year_then_aggregate") return NtMode::PerYear;
    return std::nullopt;
}

std::string_view to_string(NtMode m) {
    switch (m) {
        case NtMode::Mean: return "mean";
        case NtMode::FinalYear: return "final_year";
        case NtMode::PerYear: return "per_year";
    }
    return "?";
}

double group_customers(const CustomerBaseTable& base, std::span<const std::string> states,
                       YearRange window, NtMode mode) {
    std::set<std::pair<std::string, int>> missing;
    std::vector<double> yearly;
    for (int y = window.start; y <= window.end; ++y) {
        double total = 0.0;
        for (const auto& st : states) {
            const auto n = base.find(st, y);
            if (!n) {
                missing.emplace(st, y);
            } else {
                total += static_cast<double>(*n);
            }
        }
        yearly.push_back(total);
    }
    if (!missing.empty()) {
        std::string msg = "no customer count for";
        for (const auto& [st, yr] : missing) msg += " " + st + "/" + std::to_string(yr);
        throw MissingBase(msg);
    }
    if (yearly.empty()) return 0.0;
    if (mode == NtMode::FinalYear) return yearly.back();
    CompensatedSum s;
    for (double v : yearly) s += v;
    return s.value() / static_cast<double>(yearly.size());
}

std::vector<std::vector<OutageEvent>> split_year_ranges(std::span<const OutageEvent> events,
                                                        std::span<const YearRange> ranges) {
    std::vector<std::vector<OutageEvent>> out(ranges.size());
    for (const auto& ev : events) {
        const int y = year_of(ev.began);
        for (std::size_t i = 0; i < ranges.size(); ++i) {
            if (ranges[i].contains(y)) out[i].push_back(ev);
        }
    }
    return out;
}

std::map<std::pair<NercRegion, CauseCategory>, std::size_t> count_by_region_and_cause(
    std::span<const OutageEvent> events) {
    std::map<std::pair<NercRegion, CauseCategory>, std::size_t> out;
    for (auto r : kAllRegions) {
        for (auto c : kAllCauses) out[{r, c}] = 0;
    }
    for (const auto& ev : events) {
        if (ev.nerc_region) ++out[{*ev.nerc_region, ev.cause}];
    }
    return out;
}

std::string describe(const GroupKey& key) {
    std::string out;
    auto part = [&](std::string_view name, std::string_view value) {
        if (!out.empty()) out += ',';
        out += name;
        out += '=';
        out += value;
    };
    if (key.state) part("state", *key.state);
    if (key.cause) part("cause", to_string(*key.cause));
    if (key.nerc_region) part("region", to_string(*key.nerc_region));
    if (key.year_range) {
        part("years", std::to_string(key.year_range->start) + "-" + std::to_string(key.year_range->end));
    }
    return out.empty() ? "all" : out;
}

std::vector<MetricTriple> metrics_by_group(std::span<const OutageEvent> events,
                                           const CustomerBaseTable& base, const GroupingSpec& spec,
                                           const WeightScheme& weights) {
    YearRange span;
    if (spec.span) {
        span = *spec.span;
    } else if (!events.empty()) {
        span = {year_of(events.front().began), year_of(events.front().began)};
        for (const auto& ev : events) {
            const int y = year_of(ev.began);
            span.start = std::min(span.start, y);
            span.end = std::max(span.end, y);
        }
    } else {
        const auto rows = base.rows();
        if (rows.empty()) return {};
        span = {rows.front().year, rows.front().year};
        for (const auto& r : rows) {
            span.start = std::min(span.start, r.year);
            span.end = std::max(span.end, r.year);
        }
    }

    std::vector<std::optional<std::string>> states{std::nullopt};
    if (spec.by_state) {
        states.clear();
        for (auto& s : base.states()) states.emplace_back(std::move(s));
        for (const auto& ev : events) {
            if (std::find(states.begin(), states.end(), ev.state) == states.end()) {
                states.emplace_back(ev.state);
            }
        }
        std::sort(states.begin(), states.end());
    }
    std::vector<std::optional<CauseCategory>> causes{std::nullopt};
    if (spec.by_cause) causes.assign(std::begin(kAllCauses), std::end(kAllCauses));
    std::vector<std::optional<NercRegion>> regions{std::nullopt};
    if (spec.by_region) regions.assign(std::begin(kAllRegions), std::end(kAllRegions));
    std::vector<std::optional<YearRange>> ranges;
    if (spec.year_ranges.empty()) {
        ranges.emplace_back(std::nullopt);
    } else {
        ranges.assign(spec.year_ranges.begin(), spec.year_ranges.end());
    }

    std::map<NercRegion, std::set<std::string>> region_states;
    for (const auto& ev : events) {
        if (ev.nerc_region) region_states[*ev.nerc_region].insert(ev.state);
    }
    const auto all_states = base.states();

    std::set<std::pair<std::string, int>> missing;
    auto customers_in = [&](const std::vector<std::string>& group_states, int year) {
        double total = 0.0;
        for (const auto& st : group_states) {
            const auto n = base.find(st, year);
            if (!n) {
                missing.emplace(st, year);
            } else {
                total += static_cast<double>(*n);
            }
        }
        return total;
    };

    std::vector<MetricTriple> out;
    for (const auto& state : states) {
        for (const auto& cause : causes) {
            for (const auto& region : regions) {
                for (const auto& range : ranges) {
                    GroupKey key{state, cause, region, range};
                    const YearRange window = range ? *range : span;

                    std::vector<OutageEvent> members;
                    for (const auto& ev : events) {
                        if (state && ev.state != *state) continue;
                        if (cause && ev.cause != *cause) continue;
                        if (region && ev.nerc_region != region) continue;
                        if (!window.contains(year_of(ev.began))) continue;
                        members.push_back(ev);
                    }

                    std::vector<std::string> group_states;
                    if (state) {
                        group_states.push_back(*state);
                    } else if (region) {
                        const auto it = region_states.find(*region);
                        if (it != region_states.end()) {
                            group_states.assign(it->second.begin(), it->second.end());
                        }
                    } else {
                        group_states = all_states;
                    }

                    std::map<int, double> yearly;
                    if (!group_states.empty()) {
                        for (int y = window.start; y <= window.end; ++y) {
                            yearly[y] = customers_in(group_states, y);
                        }
                    }
                    double n_t = 0.0;
                    if (!yearly.empty()) {
                        if (spec.nt_mode == NtMode::FinalYear) {
                            n_t = yearly.rbegin()->second;
                        } else {
                            CompensatedSum total;
                            for (const auto& [y, n] : yearly) total += n;
                            n_t = total.value() / static_cast<double>(yearly.size());
                        }
                    }
                    if (!missing.empty()) continue;  // reported once all groups are scanned

                    if (members.empty()) {
                        out.push_back(finish(key, 0, n_t, !weights.is_unit(), 0, 0, std::nullopt));
                        continue;
                    }
                    if (spec.nt_mode != NtMode::PerYear) {
                        out.push_back(compute_metrics(members, n_t, weights, key));
                        continue;
                    }
                    CompensatedSum saidi, saifi, duration_customers, customers;
                    std::size_t exceeding = 0;
                    for (const auto& ev : members) {
                        const double nt_y = yearly.at(year_of(ev.began));
                        const double w = weights(ev);
                        const double n = static_cast<double>(ev.customers_affected);
                        saidi += w * ev.elapsed_hours * n / nt_y;
                        saifi += w * n / nt_y;
                        if (n > nt_y) ++exceeding;
                    }
                    const double a = saidi.value();
                    const double b = saifi.value();
                    auto m = finish(key, members.size(), n_t, !weights.is_unit(), a, b,
                                    b > 0.0 ? std::optional<double>(a / b) : std::nullopt);
                    m.events_exceeding_base = exceeding;
                    out.push_back(std::move(m));
                }
            }
        }
    }
    if (!missing.empty()) {
        std::string msg = "no customer count for";
        for (const auto& [st, yr] : missing) msg += " " + st + "/" + std::to_string(yr);
        throw MissingBase(msg);
    }
    std::sort(out.begin(), out.end(),
              [](const MetricTriple& a, const MetricTriple& b) { return a.key < b.key; });
    return out;
}

}  // namespace gridres
