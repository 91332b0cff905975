#include "gridres/ingest.hpp"

#include <algorithm>
#include <array>
#include <cctype>
#include <charconv>
#include <cstdlib>
#include <fstream>
#include <istream>
#include <ostream>
#include <set>
#include <sstream>

#include "gridres/errors.hpp"
#include "gridres/keyvalue.hpp"
#include "gridres/text.hpp"

namespace gridres {

namespace {

struct StateName {
    const char* code;
    const char* name;
};

constexpr std::array<StateName, 52> kStates{{
    {"AL", "alabama"},        {"AK", "alaska"},         {"AZ", "arizona"},
    {"AR", "arkansas"},       {"CA", "california"},     {"CO", "colorado"},
    {"CT", "connecticut"},    {"DE", "delaware"},       {"DC", "district of columbia"},
    {"FL", "florida"},        {"GA", "georgia"},        {"HI", "hawaii"},
    {"ID", "idaho"},          {"IL", "illinois"},       {"IN", "indiana"},
    {"IA", "iowa"},           {"KS", "kansas"},         {"KY", "kentucky"},
    {"LA", "louisiana"},      {"ME", "maine"},          {"MD", "maryland"},
    {"MA", "massachusetts"},  {"MI", "michigan"},       {"MN", "minnesota"},
    {"MS", "mississippi"},    {"MO", "missouri"},       {"MT", "montana"},
    {"NE", "nebraska"},       {"NV", "nevada"},         {"NH", "new hampshire"},
    {"NJ", "new jersey"},     {"NM", "new mexico"},     {"NY", "new york"},
    {"NC", "north carolina"}, {"ND", "north dakota"},   {"OH", "ohio"},
    {"OK", "oklahoma"},       {"OR", "oregon"},         {"PA", "pennsylvania"},
    {"RI", "rhode island"},   {"SC", "south carolina"}, {"SD", "south dakota"},
    {"TN", "tennessee"},      {"TX", "texas"},          {"UT", "utah"},
    {"VT", "vermont"},        {"VA", "virginia"},       {"WA", "washington"},
    {"WV", "west virginia"},  {"WI", "wisconsin"},      {"WY", "wyoming"},
    {"PR", "puerto rico"},
}};

std::string squash(std::string_view s) {
    std::string out;
    for (char c : s) {
        if (c == ' ' || c == '_' || c == '-' || c == '\t') continue;
        out.push_back(static_cast<char>(std::tolower(static_cast<unsigned char>(c))));
    }
    return out;
}

// Integer with optional sign and optional strict thousands grouping.
std::optional<std::int64_t> parse_count(std::string_view text) {
    text = trim(text);
    if (text.empty()) return std::nullopt;
    bool negative = false;
    if (text.front() == '-' || text.front() == '+') {
        negative = text.front() == '-';
        text.remove_prefix(1);
    }
    std::string digits;
    if (text.find(',') != std::string_view::npos) {
        const auto groups = split(text, ',');
        if (groups.front().empty() || groups.front().size() > 3) return std::nullopt;
        for (std::size_t i = 1; i < groups.size(); ++i) {
            if (groups[i].size() != 3) return std::nullopt;
        }
        for (auto g : groups) digits.append(g);
    } else {
        digits.assign(text);
    }
    if (digits.empty() || digits.size() > 18) return std::nullopt;
    for (char c : digits) {
        if (!std::isdigit(static_cast<unsigned char>(c))) return std::nullopt;
    }
    std::int64_t v = 0;
    std::from_chars(digits.data(), digits.data() + digits.size(), v);
    return negative ? -v : v;
}

std::size_t require_column(const DelimitedTable& table, const std::string& name) {
    const auto idx = table.column(name);
    if (!idx) throw MissingColumn("missing required column '" + name + "'");
    return *idx;
}

template <class T, class Parser>
std::optional<T> parse_temporal_cell(const std::string& cell, Parser parser, std::size_t row,
                                     const std::string& column) {
    if (trim(cell).empty()) return std::nullopt;
    auto v = parser(cell);
    if (!v) {
        throw MalformedRow("row " + std::to_string(row) + ", column '" + column +
                           "': unsupported date/time '" + cell + "'");
    }
    return v;
}

// Returns the distinct state codes named in an OE-417 "Area Affected" value,
// in first-seen order. County detail after ':' is ignored.
std::vector<std::string> states_in_area(std::string_view area) {
    std::vector<std::string> out;
    for (auto segment : split(area, ';')) {
        const auto colon = segment.find(':');
        const auto head = colon == std::string_view::npos ? segment : segment.substr(0, colon);
        for (auto token : split(head, ',')) {
            const auto code = state_code(token);
            if (code && std::find(out.begin(), out.end(), *code) == out.end()) {
                out.push_back(*code);
            }
        }
    }
    return out;
}

double hours_between(Timestamp a, Timestamp b) {
    return static_cast<double>((b - a).count()) / 3600.0;
}

}  // namespace

std::string_view to_string(CauseCategory c) {
    switch (c) {
        case CauseCategory::NaturalHazard: return "NaturalHazard";
        case CauseCategory::MechanicalFailure: return "MechanicalFailure";
        case CauseCategory::HumanAttack: return "HumanAttack";
        case CauseCategory::OperationalMaintenance: return "OperationalMaintenance";
    }
    return "?";
}

std::string_view to_string(NercRegion r) {
    switch (r) {
        case NercRegion::WECC: return "WECC";
        case NercRegion::SERC: return "SERC";
        case NercRegion::RFC: return "RFC";
        case NercRegion::NPCC: return "NPCC";
        case NercRegion::TRE: return "TRE";
        case NercRegion::MRO: return "MRO";
        case NercRegion::SPP: return "SPP";
        case NercRegion::FRCC: return "FRCC";
        case NercRegion::MISO: return "MISO";
        case NercRegion::HI: return "HI";
        case NercRegion::AK: return "AK";
    }
    return "?";
}

std::optional<CauseCategory> parse_cause_category(std::string_view s) {
    const auto key = squash(s);
    for (auto c : kAllCauses) {
        if (squash(to_string(c)) == key) return c;
    }
    return std::nullopt;
}

std::optional<NercRegion> parse_nerc_region(std::string_view s) {
    const auto key = squash(s);
    for (auto r : kAllRegions) {
        if (squash(to_string(r)) == key) return r;
    }
    static const std::pair<const char*, NercRegion> aliases[] = {
        {"rf", NercRegion::RFC},     {"reliabilityfirst", NercRegion::RFC},
        {"sppre", NercRegion::SPP},  {"ercot", NercRegion::TRE},
        {"texasre", NercRegion::TRE}, {"heco", NercRegion::HI},
        {"hawaii", NercRegion::HI},  {"ascc", NercRegion::AK},
        {"alaska", NercRegion::AK},  {"wscc", NercRegion::WECC},
        {"frcc", NercRegion::FRCC},  {"mro", NercRegion::MRO},
    };
    for (const auto& [alias, region] : aliases) {
        if (key == alias) return region;
    }
    return std::nullopt;
}

std::optional<std::string> state_code(std::string_view name_or_code) {
    const auto t = trim(name_or_code);
    if (t.empty()) return std::nullopt;
    const auto upper = to_upper(t);
    const auto lower = normalize_label(t);
    for (const auto& s : kStates) {
        if (upper == s.code || lower == s.name) return std::string(s.code);
    }
    return std::nullopt;
}

std::string format_flags(std::uint8_t flags) {
    std::string out;
    auto append = [&](std::uint8_t bit, const char* name) {
        if (!(flags & bit)) return;
        if (!out.empty()) out.push_back('|');
        out += name;
    };
    append(kAmPmCorrected, "AMPM_CORRECTED");
    append(kSignCorrected, "SIGN_CORRECTED");
    append(kMultistate, "MULTISTATE");
    return out;
}

std::optional<std::uint8_t> parse_flags(std::string_view s) {
    std::uint8_t flags = 0;
    if (trim(s).empty()) return flags;
    for (auto part : split(s, '|')) {
        part = trim(part);
        if (part == "AMPM_CORRECTED") {
            flags |= kAmPmCorrected;
        } else if (part == "SIGN_CORRECTED") {
            flags |= kSignCorrected;
        } else if (part == "MULTISTATE") {
            flags |= kMultistate;
        } else {
            return std::nullopt;
        }
    }
    return flags;
}

std::vector<RawOutageRecord> parse_outage_table(const DelimitedTable& table,
                                                const OutageColumns& columns) {
    const auto c_date_began = require_column(table, columns.date_began);
    const auto c_time_began = require_column(table, columns.time_began);
    const auto c_date_restored = require_column(table, columns.date_restored);
    const auto c_time_restored = require_column(table, columns.time_restored);
    const auto c_area = require_column(table, columns.area_affected);
    const auto c_type = require_column(table, columns.event_type);
    const auto c_customers = require_column(table, columns.customers_affected);
    const auto c_region = table.column(columns.nerc_region);

    std::vector<RawOutageRecord> out;
    out.reserve(table.rows.size());
    for (std::size_t i = 0; i < table.rows.size(); ++i) {
        const auto& cells = table.rows[i];
        RawOutageRecord rec;
        rec.source_row = i + 1;
        rec.date_began = parse_temporal_cell<Date>(cells[c_date_began], parse_date, rec.source_row,
                                                   columns.date_began);
        rec.time_began = parse_temporal_cell<ClockTime>(cells[c_time_began], parse_clock,
                                                        rec.source_row, columns.time_began);
        rec.date_restored = parse_temporal_cell<Date>(cells[c_date_restored], parse_date,
                                                      rec.source_row, columns.date_restored);
        rec.time_restored = parse_temporal_cell<ClockTime>(cells[c_time_restored], parse_clock,
                                                           rec.source_row, columns.time_restored);
        rec.area_affected = std::string(trim(cells[c_area]));
        rec.event_type = std::string(trim(cells[c_type]));
        rec.customers_affected = parse_count(cells[c_customers]);
        if (c_region) rec.nerc_region = std::string(trim(cells[*c_region]));
        out.push_back(std::move(rec));
    }
    return out;
}

std::vector<RawOutageRecord> parse_outage_table(std::istream& in, const OutageColumns& columns) {
    return parse_outage_table(read_delimited(in), columns);
}

CauseTaxonomy CauseTaxonomy::from_stream(std::istream& in, const std::string& source_name) {
    CauseTaxonomy tax;
    for (const auto& [key, value] : parse_key_values(in, source_name)) {
        if (key == "taxonomy.version") {
            tax.version_ = value;
            continue;
        }
        const auto category = parse_cause_category(value);
        if (!category) {
            throw TaxonomyError(source_name + ": label '" + key + "' maps to unknown category '" +
                                value + "'");
        }
        tax.add(key, *category);
    }
    return tax;
}

CauseTaxonomy CauseTaxonomy::from_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw TaxonomyError("cannot open taxonomy file '" + path + "'");
    return from_stream(in, path);
}

void CauseTaxonomy::add(std::string_view raw_label, CauseCategory category) {
    auto key = normalize_label(raw_label);
    if (!labels_.emplace(key, category).second) {
        throw TaxonomyError("duplicate taxonomy label '" + key + "'");
    }
}

std::optional<CauseCategory> CauseTaxonomy::find(std::string_view raw_label) const {
    const auto it = labels_.find(normalize_label(raw_label));
    if (it == labels_.end()) return std::nullopt;
    return it->second;
}

CauseCategory map_cause(std::string_view raw_label, const CauseTaxonomy& taxonomy) {
    const auto c = taxonomy.find(raw_label);
    if (!c) throw UnmappedLabel(std::string(trim(raw_label)));
    return *c;
}

CleaningResult clean_events(std::span<const RawOutageRecord> records, const CauseTaxonomy& taxonomy,
                            const CleaningPolicy& policy) {
    CleaningResult result;
    for (const auto& rec : records) {
        auto reject = [&](const char* code, std::string detail) {
            result.rejections.push_back({code, rec.source_row, tsv_safe(detail)});
        };

        std::uint8_t flags = rec.carried_flags;
        if (!rec.customers_affected) {
            reject("MISSING_CUSTOMERS", "customers affected is missing");
            continue;
        }
        std::int64_t customers = *rec.customers_affected;
        if (customers == 0) {
            reject("ZERO_CUSTOMERS", "customers affected is 0");
            continue;
        }
        if (customers < 0) {
            customers = -customers;
            flags |= kSignCorrected;
        }
        if (!rec.date_began || !rec.time_began) {
            reject("MISSING_BEGIN", "begin date or time is missing");
            continue;
        }
        if (!rec.date_restored || !rec.time_restored) {
            reject("MISSING_RESTORATION", "restoration date or time is missing");
            continue;
        }

        ClockTime t_began = *rec.time_began;
        ClockTime t_restored = *rec.time_restored;
        Timestamp began = combine(*rec.date_began, t_began);
        Timestamp restored = combine(*rec.date_restored, t_restored);
        if (restored < began) {
            // Candidate corrections: swap exactly one AM/PM marker.
            struct Candidate {
                Timestamp began, restored;
            };
            std::vector<Candidate> valid;
            auto consider = [&](Timestamp b, Timestamp r) {
                const double h = hours_between(b, r);
                if (h >= 0.0 && h <= policy.max_elapsed_hours) valid.push_back({b, r});
            };
            if (t_began.marker) consider(combine(*rec.date_began, t_began.flipped()), restored);
            if (t_restored.marker) consider(began, combine(*rec.date_restored, t_restored.flipped()));
            if (valid.empty()) {
                reject("NEGATIVE_ELAPSED", "elapsed " + format_double(hours_between(began, restored)) +
                                               " h and no single AM/PM swap repairs it");
                continue;
            }
            if (valid.size() > 1) {
                reject("AMBIGUOUS_AMPM", "more than one AM/PM swap yields a valid elapsed time");
                continue;
            }
            began = valid.front().began;
            restored = valid.front().restored;
            flags |= kAmPmCorrected;
        }

        const auto cause = taxonomy.find(rec.event_type);
        if (!cause) {
            reject("UNMAPPED_CAUSE", "event type '" + rec.event_type + "' is not in the taxonomy");
            continue;
        }

        std::optional<NercRegion> region;
        if (!trim(rec.nerc_region).empty()) {
            region = parse_nerc_region(rec.nerc_region);
            if (!region) {
                reject("UNKNOWN_REGION", "NERC region '" + rec.nerc_region + "'");
                continue;
            }
        }

        const auto states = states_in_area(rec.area_affected);
        if (states.empty()) {
            reject("UNKNOWN_STATE", "no state recognised in '" + rec.area_affected + "'");
            continue;
        }
        if (states.size() > 1) flags |= kMultistate;

        for (const auto& st : states) {
            OutageEvent ev;
            ev.source_row = rec.source_row;
            ev.state = st;
            ev.nerc_region = region;
            ev.began = began;
            ev.restored = restored;
            ev.elapsed_hours = hours_between(began, restored);
            ev.customers_affected = customers;
            ev.cause = *cause;
            ev.raw_cause = rec.event_type;
            ev.flags = flags;
            result.events.push_back(std::move(ev));
        }
    }
    return result;
}

RawOutageRecord to_raw_record(const OutageEvent& event) {
    auto clock_of = [](Timestamp ts) {
        const auto day = std::chrono::floor<std::chrono::days>(ts);
        const std::chrono::hh_mm_ss hms{ts - day};
        ClockTime c;
        c.hour = static_cast<int>(hms.hours().count());
        c.minute = static_cast<int>(hms.minutes().count());
        c.second = static_cast<int>(hms.seconds().count());
        return c;
    };
    RawOutageRecord rec;
    rec.source_row = event.source_row;
    rec.date_began = date_of(event.began);
    rec.time_began = clock_of(event.began);
    rec.date_restored = date_of(event.restored);
    rec.time_restored = clock_of(event.restored);
    rec.area_affected = event.state;
    rec.nerc_region = event.nerc_region ? std::string(to_string(*event.nerc_region)) : "";
    rec.event_type = event.raw_cause;
    rec.customers_affected = event.customers_affected;
    rec.carried_flags = event.flags;
    return rec;
}

CustomerBaseTable::CustomerBaseTable(std::span<const CustomerBase> rows) {
    for (const auto& r : rows) add(r);
}

void CustomerBaseTable::add(const CustomerBase& row) {
    table_[{row.state, row.year}] += row.customers_served;
}

std::optional<std::int64_t> CustomerBaseTable::find(std::string_view state, int year) const {
    const auto it = table_.find({std::string(state), year});
    if (it == table_.end()) return std::nullopt;
    return it->second;
}

std::vector<CustomerBase> CustomerBaseTable::rows() const {
    std::vector<CustomerBase> out;
    out.reserve(table_.size());
    for (const auto& [key, n] : table_) out.push_back({key.first, key.second, n});
    return out;
}

std::vector<std::string> CustomerBaseTable::states() const {
    std::vector<std::string> out;
    for (const auto& [key, n] : table_) {
        if (out.empty() || out.back() != key.first) out.push_back(key.first);
    }
    return out;
}

CustomerBaseTable parse_customer_table(const DelimitedTable& table, const CustomerColumns& columns) {
    const auto c_state = require_column(table, columns.state);
    const auto c_year = require_column(table, columns.year);
    const auto c_customers = require_column(table, columns.customers);
    CustomerBaseTable out;
    for (std::size_t i = 0; i < table.rows.size(); ++i) {
        const auto& cells = table.rows[i];
        const auto where = "row " + std::to_string(i + 1);
        const auto state = state_code(cells[c_state]);
        if (!state) throw MalformedRow(where + ": unknown state '" + cells[c_state] + "'");
        const auto year = parse_count(cells[c_year]);
        if (!year || *year < 1000 || *year > 9999) {
            throw MalformedRow(where + ": bad year '" + cells[c_year] + "'");
        }
        const auto customers = parse_count(cells[c_customers]);
        if (!customers || *customers < 0) {
            throw MalformedRow(where + ": bad customer count '" + cells[c_customers] + "'");
        }
        out.add({*state, static_cast<int>(*year), *customers});
    }
    for (const auto& r : out.rows()) {
        if (r.customers_served < 1) {
            throw MalformedRow("customers served for " + r.state + " " + std::to_string(r.year) +
                               " is not positive");
        }
    }
    return out;
}

CustomerBaseTable parse_customer_table(std::istream& in, const CustomerColumns& columns) {
    return parse_customer_table(read_delimited(in), columns);
}

JoinResult join_customer_base(std::span<const OutageEvent> events, const CustomerBaseTable& base) {
    std::set<std::pair<std::string, int>> missing;
    JoinResult out;
    out.rows.reserve(events.size());
    for (const auto& ev : events) {
        const int year = year_of(ev.began);
        const auto n_t = base.find(ev.state, year);
        if (!n_t) {
            missing.emplace(ev.state, year);
            continue;
        }
        const double fraction =
            static_cast<double>(ev.customers_affected) / static_cast<double>(*n_t);
        if (fraction > 1.0) out.exceeding_rows.push_back(ev.source_row);
        out.rows.push_back({ev, *n_t, fraction});
    }
    if (!missing.empty()) {
        std::string msg = "no customer count for";
        for (const auto& [st, yr] : missing) msg += " " + st + "/" + std::to_string(yr);
        throw MissingBase(msg);
    }
    return out;
}

void write_canonical_events(std::ostream& out, std::span<const OutageEvent> events) {
    out << "source_row\tstate\tnerc_region\tbegan\trestored\telapsed_hours\tcustomers_affected"
           "\tcause\traw_cause\tflags\n";
    for (const auto& ev : events) {
        out << ev.source_row << '\t' << ev.state << '\t'
            << (ev.nerc_region ? to_string(*ev.nerc_region) : std::string_view{}) << '\t'
            << format_timestamp(ev.began) << '\t' << format_timestamp(ev.restored) << '\t'
            << format_double(ev.elapsed_hours) << '\t' << ev.customers_affected << '\t'
            << to_string(ev.cause) << '\t' << tsv_safe(ev.raw_cause) << '\t'
            << format_flags(ev.flags) << '\n';
    }
}

std::vector<OutageEvent> read_canonical_events(std::istream& in) {
    const auto table = read_delimited(in);
    static const char* kCols[] = {"source_row", "state", "nerc_region", "began", "restored",
                                  "elapsed_hours", "customers_affected", "cause", "raw_cause",
                                  "flags"};
    std::size_t idx[10];
    for (int i = 0; i < 10; ++i) idx[i] = require_column(table, kCols[i]);

    std::vector<OutageEvent> out;
    out.reserve(table.rows.size());
    for (std::size_t r = 0; r < table.rows.size(); ++r) {
        const auto& c = table.rows[r];
        const auto where = "canonical line " + std::to_string(table.line_numbers[r]);
        auto fail = [&](const std::string& what) { throw MalformedRow(where + ": " + what); };
        OutageEvent ev;
        const auto row = parse_count(c[idx[0]]);
        if (!row || *row < 0) fail("bad source_row");
        ev.source_row = static_cast<std::size_t>(*row);
        const auto st = state_code(c[idx[1]]);
        if (!st) fail("bad state");
        ev.state = *st;
        if (!trim(c[idx[2]]).empty()) {
            ev.nerc_region = parse_nerc_region(c[idx[2]]);
            if (!ev.nerc_region) fail("bad nerc_region");
        }
        const auto began = parse_timestamp(c[idx[3]]);
        const auto restored = parse_timestamp(c[idx[4]]);
        if (!began || !restored || *restored < *began) fail("bad timestamps");
        ev.began = *began;
        ev.restored = *restored;
        ev.elapsed_hours = hours_between(ev.began, ev.restored);
        const auto customers = parse_count(c[idx[6]]);
        if (!customers || *customers < 1) fail("bad customers_affected");
        ev.customers_affected = *customers;
        const auto cause = parse_cause_category(c[idx[7]]);
        if (!cause) fail("bad cause");
        ev.cause = *cause;
        ev.raw_cause = c[idx[8]];
        const auto flags = parse_flags(c[idx[9]]);
        if (!flags) fail("bad flags");
        ev.flags = *flags;
        out.push_back(std::move(ev));
    }
    return out;
}

void write_rejection_log(std::ostream& out, std::span<const Rejection> rejections) {
    for (const auto& r : rejections) {
        out << r.reason_code << '\t' << r.row_number << '\t' << tsv_safe(r.detail) << '\n';
    }
}

}  // namespace gridres
