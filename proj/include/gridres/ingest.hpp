#pragma once

#include <cstdint>
#include <iosfwd>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "gridres/datetime.hpp"
#include "gridres/delimited.hpp"

namespace gridres {

enum class CauseCategory { NaturalHazard, MechanicalFailure, HumanAttack, OperationalMaintenance };

inline constexpr CauseCategory kAllCauses[] = {
    CauseCategory::NaturalHazard, CauseCategory::MechanicalFailure, CauseCategory::HumanAttack,
    CauseCategory::OperationalMaintenance};

enum class NercRegion { WECC, SERC, RFC, NPCC, TRE, MRO, SPP, FRCC, MISO, HI, AK };

inline constexpr NercRegion kAllRegions[] = {
    NercRegion::WECC, NercRegion::SERC, NercRegion::RFC, NercRegion::NPCC,
    NercRegion::TRE,  NercRegion::MRO,  NercRegion::SPP, NercRegion::FRCC,
    NercRegion::MISO, NercRegion::HI,   NercRegion::AK};

std::string_view to_string(CauseCategory c);
std::string_view to_string(NercRegion r);
std::optional<CauseCategory> parse_cause_category(std::string_view s);
/// Accepts the canonical codes and the common OE-417 spellings (RF, SPP RE, ERCOT, ...).
std::optional<NercRegion> parse_nerc_region(std::string_view s);

/// Two-letter USPS code for a state/territory name or code; nullopt if unknown.
std::optional<std::string> state_code(std::string_view name_or_code);

enum EventFlag : std::uint8_t {
    kAmPmCorrected = 1u << 0,
    kSignCorrected = 1u << 1,
    kMultistate = 1u << 2,
};

/// "AMPM_CORRECTED|SIGN_CORRECTED|MULTISTATE" subset, in that order; empty when no flag.
std::string format_flags(std::uint8_t flags);
std::optional<std::uint8_t> parse_flags(std::string_view s);

/// One OE-417 row as found in the source. Empty cells and numeric cells that
/// are not integers are kept as missing.
struct RawOutageRecord {
    std::size_t source_row = 0;  // 1-based data row index
    std::optional<Date> date_began;
    std::optional<ClockTime> time_began;
    std::optional<Date> date_restored;
    std::optional<ClockTime> time_restored;
    std::string area_affected;
    std::string nerc_region;
    std::string event_type;
    std::optional<std::int64_t> customers_affected;
    std::uint8_t carried_flags = 0;  // flags already set by an earlier cleaning pass
};

struct OutageEvent {
    std::size_t source_row = 0;
    std::string state;
    std::optional<NercRegion> nerc_region;
    Timestamp began;
    Timestamp restored;
    double elapsed_hours = 0.0;
    std::int64_t customers_affected = 1;
    CauseCategory cause = CauseCategory::NaturalHazard;
    std::string raw_cause;
    std::uint8_t flags = 0;

    bool operator==(const OutageEvent&) const = default;
};

/// Source header names for the OE-417 columns. Any layout can be read by
/// overriding these.
struct OutageColumns {
    std::string date_began = "Date Event Began";
    std::string time_began = "Time Event Began";
    std::string date_restored = "Date of Restoration";
    std::string time_restored = "Time of Restoration";
    std::string area_affected = "Area Affected";
    std::string event_type = "Event Type";
    std::string customers_affected = "Number of Customers Affected";
    std::string nerc_region = "NERC Region";  // optional column
};

/// Throws MissingColumn, or MalformedRow for a cell-count mismatch or a
/// non-empty date/time cell in an unsupported format.
std::vector<RawOutageRecord> parse_outage_table(const DelimitedTable& table,
                                                const OutageColumns& columns = {});
std::vector<RawOutageRecord> parse_outage_table(std::istream& in,
                                                const OutageColumns& columns = {});

/// Raw event label (normalized) -> category, loaded from a flat key-value file:
///   taxonomy.version = 1.0
///   Severe Weather - Thunderstorms = NaturalHazard
class CauseTaxonomy {
public:
    CauseTaxonomy() = default;
    static CauseTaxonomy from_file(const std::string& path);
    static CauseTaxonomy from_stream(std::istream& in, const std::string& source_name);

    /// Throws TaxonomyError if the normalized label is already present.
    void add(std::string_view raw_label, CauseCategory category);

    std::optional<CauseCategory> find(std::string_view raw_label) const;
    std::size_t size() const noexcept { return labels_.size(); }
    const std::map<std::string, CauseCategory>& labels() const noexcept { return labels_; }
    const std::string& version() const noexcept { return version_; }

private:
    std::map<std::string, CauseCategory> labels_;
    std::string version_ = "unversioned";
};

/// Throws UnmappedLabel.
CauseCategory map_cause(std::string_view raw_label, const CauseTaxonomy& taxonomy);

struct CleaningPolicy {
    double max_elapsed_hours = 45.0 * 24.0;
};

struct Rejection {
    std::string reason_code;
    std::size_t row_number = 0;
    std::string detail;

    bool operator==(const Rejection&) const = default;
};

struct CleaningResult {
    std::vector<OutageEvent> events;
    std::vector<Rejection> rejections;
};

/// Never throws for data problems; each dropped row yields one Rejection.
/// Multi-state area strings produce one event per state, each carrying the
/// full customer count and the MULTISTATE flag.
CleaningResult clean_events(std::span<const RawOutageRecord> records, const CauseTaxonomy& taxonomy,
                            const CleaningPolicy& policy = {});

/// Inverse of cleaning for a single event: a raw record that cleans back to
/// exactly this event.
RawOutageRecord to_raw_record(const OutageEvent& event);

struct CustomerBase {
    std::string state;
    int year = 0;
    std::int64_t customers_served = 0;
};

/// (state, year) -> customers served.
class CustomerBaseTable {
public:
    CustomerBaseTable() = default;
    explicit CustomerBaseTable(std::span<const CustomerBase> rows);

    /// Accumulates into an existing key (utility-level rows sum per state-year).
    void add(const CustomerBase& row);
    std::optional<std::int64_t> find(std::string_view state, int year) const;
    std::vector<CustomerBase> rows() const;
    std::vector<std::string> states() const;
    bool empty() const noexcept { return table_.empty(); }

private:
    std::map<std::pair<std::string, int>, std::int64_t> table_;
};

struct CustomerColumns {
    std::string state = "State";
    std::string year = "Year";
    std::string customers = "Number of Customers";
};

/// EIA-861-style rows; rows sharing (state, year) are summed.
/// Throws MissingColumn, MalformedRow (bad year/count/state).
CustomerBaseTable parse_customer_table(const DelimitedTable& table,
                                       const CustomerColumns& columns = {});
CustomerBaseTable parse_customer_table(std::istream& in, const CustomerColumns& columns = {});

struct JoinedEvent {
    OutageEvent event;
    std::int64_t n_t = 0;
    double fraction_affected = 0.0;
};

struct JoinResult {
    std::vector<JoinedEvent> rows;
    /// Source rows whose customers_affected exceeds N_T (fraction > 1).
    std::vector<std::size_t> exceeding_rows;
};

/// Throws MissingBase listing every absent (state, year) key.
JoinResult join_customer_base(std::span<const OutageEvent> events, const CustomerBaseTable& base);

/// Canonical event file: tab-separated, fixed column order
///   source_row state nerc_region began restored elapsed_hours
///   customers_affected cause raw_cause flags
void write_canonical_events(std::ostream& out, std::span<const OutageEvent> events);
std::vector<OutageEvent> read_canonical_events(std::istream& in);

/// `reason_code<TAB>row_number<TAB>detail`, one line per rejection.
void write_rejection_log(std::ostream& out, std::span<const Rejection> rejections);

}  // namespace gridres
