#include "gridres/pipeline.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <memory>
#include <set>
#include <sstream>

#include <json.hpp>

#include "gridres/delimited.hpp"
#include "gridres/text.hpp"

#ifndef GRIDRES_VERSION
#define GRIDRES_VERSION "0.0.0"
#endif

namespace gridres {

namespace fs = std::filesystem;
using ordered_json = nlohmann::ordered_json;

std::string_view toolkit_version() { return GRIDRES_VERSION; }

std::string_view to_string(Stage s) {
    switch (s) {
        case Stage::Ingest: return "ingest";
        case Stage::Metrics: return "metrics";
        case Stage::Regress: return "regress";
        case Stage::Influence: return "influence";
        case Stage::Select: return "select";
        case Stage::Med: return "med";
        case Stage::Report: return "report";
    }
    return "?";
}

int exit_code_for(Stage stage, const std::exception& error) {
    if (dynamic_cast<const ConfigError*>(&error)) return 2;
    if (dynamic_cast<const MissingColumn*>(&error) || dynamic_cast<const MalformedRow*>(&error) ||
        dynamic_cast<const TaxonomyError*>(&error) || dynamic_cast<const UnmappedLabel*>(&error)) {
        return 3;
    }
    if (dynamic_cast<const EmptyResult*>(&error)) return 4;
    if (dynamic_cast<const MissingBase*>(&error) || dynamic_cast<const EmptyGroupNt*>(&error)) return 5;
    if (dynamic_cast<const DegenerateDesign*>(&error) || dynamic_cast<const ModelMismatch*>(&error) ||
        dynamic_cast<const InsufficientData*>(&error) || dynamic_cast<const NothingFlagged*>(&error)) {
        return 6;
    }
    if (dynamic_cast<const AllColumnsDegenerate*>(&error) || dynamic_cast<const TooFewRows*>(&error)) {
        return 7;
    }
    if (dynamic_cast<const InsufficientHistory*>(&error)) return 8;
    if (dynamic_cast<const Error*>(&error)) {
        switch (stage) {
            case Stage::Ingest: return 3;
            case Stage::Metrics: return 5;
            case Stage::Regress:
            case Stage::Influence: return 6;
            case Stage::Select: return 7;
            case Stage::Med: return 8;
            case Stage::Report: return 1;
        }
    }
    return 1;
}

// ---------------------------------------------------------------- config

namespace {

const std::set<std::string> kPathKeys{"outage_table", "customer_table", "taxonomy",
                                      "design_matrix", "events", "weights", "out_dir"};

const std::map<std::string, std::string OutageColumns::*> kOutageColumnKeys{
    {"columns.date_began", &OutageColumns::date_began},
    {"columns.time_began", &OutageColumns::time_began},
    {"columns.date_restored", &OutageColumns::date_restored},
    {"columns.time_restored", &OutageColumns::time_restored},
    {"columns.area_affected", &OutageColumns::area_affected},
    {"columns.event_type", &OutageColumns::event_type},
    {"columns.customers_affected", &OutageColumns::customers_affected},
    {"columns.nerc_region", &OutageColumns::nerc_region},
};

const std::map<std::string, std::string CustomerColumns::*> kCustomerColumnKeys{
    {"columns.base_state", &CustomerColumns::state},
    {"columns.base_year", &CustomerColumns::year},
    {"columns.base_customers", &CustomerColumns::customers},
};

const std::set<std::string> kScalarKeys{
    "seed", "max_elapsed_days", "group_by", "year_ranges", "nt_mode", "span",
    "scope.state", "scope.cause", "scope.years",
    "influence.model", "influence.dfbetas_cut", "influence.dffits_cut", "influence.covratio_band",
    "influence.cooks_cut", "influence.hat_cut", "excise.measure",
    "select.response", "select.id_column", "select.k", "select.p_cut", "select.rule",
    "select.grid_size", "select.min_ratio",
    "med.state", "med.years", "med.window_years", "med.min_positive_days", "med.multiplier",
};

[[noreturn]] void bad_value(const std::string& key, const std::string& value, std::string_view want) {
    throw ConfigError("config key '" + key + "': cannot use '" + value + "' (expected " +
                      std::string(want) + ")");
}

template <typename T>
T parse_number(const std::string& key, const std::string& value) {
    const auto s = trim(value);
    T out{};
    const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), out);
    if (ec != std::errc{} || ptr != s.data() + s.size()) bad_value(key, value, "a number");
    return out;
}

double parse_positive(const std::string& key, const std::string& value) {
    const double v = parse_number<double>(key, value);
    if (!(v > 0.0) || !std::isfinite(v)) bad_value(key, value, "a positive number");
    return v;
}

YearRange parse_year_range(const std::string& key, std::string_view text) {
    const auto s = trim(text);
    const auto dash = s.find('-');
    const std::string a(trim(dash == std::string_view::npos ? s : s.substr(0, dash)));
    const std::string b(trim(dash == std::string_view::npos ? s : s.substr(dash + 1)));
    YearRange r{parse_number<int>(key, a), parse_number<int>(key, b)};
    if (r.end < r.start) bad_value(key, std::string(text), "YYYY-YYYY with start <= end");
    return r;
}

std::string require_state(const std::string& key, const std::string& value) {
    auto code = state_code(value);
    if (!code) bad_value(key, value, "a U.S. state name or postal code");
    return *code;
}

}  // namespace

RunConfig parse_run_config(const KeyValueMap& settings, const fs::path& base_dir) {
    RunConfig c;
    c.base_dir = base_dir;
    c.settings = settings;
    c.out_dir = base_dir / "gridres-out";

    auto path_of = [&](const std::string& v) {
        const fs::path p(std::string(trim(v)));
        return p.is_absolute() ? p : base_dir / p;
    };

    for (const auto& [key, value] : settings) {
        if (kPathKeys.count(key)) {
            if (trim(value).empty()) continue;
            if (key == "outage_table") c.outage_table = path_of(value);
            if (key == "customer_table") c.customer_table = path_of(value);
            if (key == "taxonomy") c.taxonomy = path_of(value);
            if (key == "design_matrix") c.design_matrix = path_of(value);
            if (key == "events") c.events = path_of(value);
            if (key == "out_dir") c.out_dir = path_of(value);
            if (key == "weights" && normalize_label(value) != "unit") c.weights_file = path_of(value);
            continue;
        }
        if (auto it = kOutageColumnKeys.find(key); it != kOutageColumnKeys.end()) {
            c.outage_columns.*(it->second) = std::string(trim(value));
            continue;
        }
        if (auto it = kCustomerColumnKeys.find(key); it != kCustomerColumnKeys.end()) {
            c.customer_columns.*(it->second) = std::string(trim(value));
            continue;
        }
        if (!kScalarKeys.count(key)) throw ConfigError("unknown config key '" + key + "'");

        const std::string v(trim(value));
        const auto lower = normalize_label(v);
        if (key == "seed") {
            c.seed = parse_number<std::uint64_t>(key, v);
        } else if (key == "max_elapsed_days") {
            c.cleaning.max_elapsed_hours = parse_positive(key, v) * 24.0;
        } else if (key == "group_by") {
            if (lower.empty() || lower == "none") continue;
            for (auto part : split(lower, ',')) {
                const auto dim = trim(part);
                if (dim == "state") {
                    c.grouping.by_state = true;
                } else if (dim == "cause") {
                    c.grouping.by_cause = true;
                } else if (dim == "region") {
                    c.grouping.by_region = true;
                } else {
                    bad_value(key, v, "a comma list of state, cause, region");
                }
            }
        } else if (key == "year_ranges") {
            if (lower.empty() || lower == "none") {
                c.grouping.year_ranges.clear();
            } else if (lower == "overlapping") {
                c.grouping.year_ranges = kOverlappingRanges;
            } else if (lower == "disjoint") {
                c.grouping.year_ranges = kDisjointRanges;
            } else {
                c.grouping.year_ranges.clear();
                for (auto part : split(v, ',')) c.grouping.year_ranges.push_back(parse_year_range(key, part));
            }
        } else if (key == "nt_mode") {
            auto m = parse_nt_mode(v);
            if (!m) bad_value(key, v, "mean, final_year or per_year");
            c.grouping.nt_mode = *m;
        } else if (key == "span") {
            c.grouping.span = parse_year_range(key, v);
        } else if (key == "scope.state") {
            if (!v.empty()) c.scope_state = require_state(key, v);
        } else if (key == "scope.cause") {
            if (v.empty()) continue;
            auto cause = parse_cause_category(v);
            if (!cause) bad_value(key, v, "a cause category");
            c.scope_cause = *cause;
        } else if (key == "scope.years") {
            if (!v.empty()) c.scope_years = parse_year_range(key, v);
        } else if (key == "influence.model") {
            if (lower == "intercept" || lower == "with_intercept") {
                c.influence_model = RegressionModel::WithIntercept;
            } else if (lower == "origin" || lower == "through_origin") {
                c.influence_model = RegressionModel::ThroughOrigin;
            } else {
                bad_value(key, v, "intercept or origin");
            }
        } else if (key == "influence.dfbetas_cut") {
            c.thresholds.dfbetas_cut = parse_positive(key, v);
        } else if (key == "influence.dffits_cut") {
            c.thresholds.dffits_cut = parse_positive(key, v);
        } else if (key == "influence.covratio_band") {
            c.thresholds.covratio_band = parse_positive(key, v);
        } else if (key == "influence.cooks_cut") {
            c.thresholds.cooks_cut = parse_positive(key, v);
        } else if (key == "influence.hat_cut") {
            c.thresholds.hat_cut = parse_positive(key, v);
        } else if (key == "excise.measure") {
            auto m = parse_influence_measure(v);
            if (!m) bad_value(key, v, "dfbetas, dffits, covratio, cooks or hat");
            c.excise_measure = *m;
        } else if (key == "select.response") {
            c.select_response = v;
        } else if (key == "select.id_column") {
            c.select_id_column = v;
        } else if (key == "select.k") {
            c.cv.folds = parse_number<std::size_t>(key, v);
            if (c.cv.folds < 2) bad_value(key, v, "at least 2 folds");
        } else if (key == "select.p_cut") {
            c.p_cut = parse_positive(key, v);
        } else if (key == "select.rule") {
            auto r = parse_lambda_rule(v);
            if (!r) bad_value(key, v, "min or 1se");
            c.cv.rule = *r;
        } else if (key == "select.grid_size") {
            c.cv.grid_size = parse_number<std::size_t>(key, v);
            if (c.cv.grid_size < 2) bad_value(key, v, "at least 2");
        } else if (key == "select.min_ratio") {
            c.cv.min_ratio = parse_positive(key, v);
            if (c.cv.min_ratio >= 1.0) bad_value(key, v, "a ratio below 1");
        } else if (key == "med.state") {
            if (!v.empty()) c.med_state = require_state(key, v);
        } else if (key == "med.years") {
            if (v.empty()) continue;
            std::set<int> years;
            for (auto part : split(v, ',')) {
                const auto r = parse_year_range(key, part);
                for (int y = r.start; y <= r.end; ++y) years.insert(y);
            }
            c.med_years.assign(years.begin(), years.end());
        } else if (key == "med.window_years") {
            c.med.window_years = parse_number<int>(key, v);
            if (c.med.window_years < 1) bad_value(key, v, "at least 1");
        } else if (key == "med.min_positive_days") {
            c.med.min_positive_days = parse_number<std::size_t>(key, v);
        } else if (key == "med.multiplier") {
            c.med.multiplier = parse_positive(key, v);
        }
    }
    c.cv.seed = c.seed;
    if (!c.med_state) c.med_state = c.scope_state;
    return c;
}

RunConfig load_run_config(const std::optional<fs::path>& config_path,
                          const std::vector<std::string>& overrides) {
    KeyValueMap settings;
    fs::path base = fs::current_path();
    if (config_path) {
        if (!fs::is_regular_file(*config_path)) {
            throw ConfigError("config file not found: " + config_path->string());
        }
        settings = read_key_value_file(config_path->string());
        base = fs::absolute(*config_path).parent_path();
    }
    for (const auto& o : overrides) {
        const auto eq = o.find('=');
        if (eq == std::string::npos) throw ConfigError("override '" + o + "' is not key=value");
        const std::string key(trim(std::string_view(o).substr(0, eq)));
        if (key.empty()) throw ConfigError("override '" + o + "' has an empty key");
        settings[key] = std::string(trim(std::string_view(o).substr(eq + 1)));
    }
    return parse_run_config(settings, base);
}

void validate_paths(const RunConfig& config, Stage stage) {
    auto need = [](const fs::path& p, std::string_view key) {
        if (p.empty()) throw ConfigError("config key '" + std::string(key) + "' is required");
        if (!fs::exists(p)) {
            throw ConfigError("path for '" + std::string(key) + "' does not exist: " + p.string());
        }
    };
    auto need_events = [&] {
        if (!config.events.empty()) {
            need(config.events, "events");
        } else {
            need(config.outage_table, "outage_table");
            need(config.taxonomy, "taxonomy");
        }
    };
    auto optional_path = [&](const fs::path& p, std::string_view key) {
        if (!p.empty()) need(p, key);
    };
    optional_path(config.weights_file, "weights");
    switch (stage) {
        case Stage::Ingest:
            need(config.outage_table, "outage_table");
            need(config.taxonomy, "taxonomy");
            break;
        case Stage::Metrics:
        case Stage::Regress:
        case Stage::Influence:
        case Stage::Med:
            need_events();
            need(config.customer_table, "customer_table");
            break;
        case Stage::Select:
            need(config.design_matrix, "design_matrix");
            if (config.select_response.empty()) {
                throw ConfigError("config key 'select.response' is required");
            }
            break;
        case Stage::Report:
            need_events();
            need(config.customer_table, "customer_table");
            optional_path(config.design_matrix, "design_matrix");
            optional_path(config.taxonomy, "taxonomy");
            optional_path(config.outage_table, "outage_table");
            break;
    }
}

namespace {

struct Fnv1a {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    void add(std::string_view s) {
        for (unsigned char ch : s) {
            h ^= ch;
            h *= 0x100000001b3ULL;
        }
    }
};

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    if (!in) throw MalformedRow("cannot read " + p.string());
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

}  // namespace

std::string manifest_hash(const RunConfig& config) {
    Fnv1a f;
    for (const auto& [key, value] : config.settings) {
        if (kPathKeys.count(key)) continue;
        f.add(key);
        f.add("=");
        f.add(trim(value));
        f.add("\n");
    }
    const std::pair<std::string_view, const fs::path*> inputs[] = {
        {"outage_table", &config.outage_table}, {"customer_table", &config.customer_table},
        {"taxonomy", &config.taxonomy},         {"design_matrix", &config.design_matrix},
        {"events", &config.events},             {"weights", &config.weights_file},
    };
    for (const auto& [name, path] : inputs) {
        if (path->empty() || !fs::is_regular_file(*path)) continue;
        f.add(name);
        f.add(":");
        f.add(slurp(*path));
        f.add("\n");
    }
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(f.h));
    return buf;
}

// ---------------------------------------------------------------- inputs

LoadedInputs load_events(const RunConfig& config) {
    LoadedInputs out;
    if (!config.taxonomy.empty() && fs::exists(config.taxonomy)) {
        out.taxonomy_version = CauseTaxonomy::from_file(config.taxonomy.string()).version();
    }
    if (!config.events.empty()) {
        std::ifstream in(config.events);
        if (!in) throw MalformedRow("cannot read " + config.events.string());
        out.events = read_canonical_events(in);
        out.raw_rows = out.events.size();
        return out;
    }
    const auto taxonomy = CauseTaxonomy::from_file(config.taxonomy.string());
    out.taxonomy_version = taxonomy.version();
    const auto table = read_delimited_file(config.outage_table.string());
    const auto records = parse_outage_table(table, config.outage_columns);
    out.raw_rows = records.size();
    auto cleaned = clean_events(records, taxonomy, config.cleaning);
    out.events = std::move(cleaned.events);
    out.rejections = std::move(cleaned.rejections);
    return out;
}

CustomerBaseTable load_customer_base(const RunConfig& config) {
    return parse_customer_table(read_delimited_file(config.customer_table.string()),
                                config.customer_columns);
}

WeightScheme load_weights(const RunConfig& config) {
    if (config.weights_file.empty()) return WeightScheme::unit();
    const auto table = read_delimited_file(config.weights_file.string());
    const auto state_col = table.column("state");
    const auto weight_col = table.column("weight");
    if (!state_col || !weight_col) {
        throw MissingColumn(config.weights_file.string() + ": needs 'state' and 'weight' columns");
    }
    std::map<std::string, double> weights;
    for (std::size_t r = 0; r < table.rows.size(); ++r) {
        const auto& row = table.rows[r];
        const auto where = config.weights_file.string() + " line " + std::to_string(table.line_numbers[r]);
        const auto st = state_code(row[*state_col]);
        if (!st) throw MalformedRow(where + ": unknown state '" + row[*state_col] + "'");
        const auto cell = trim(row[*weight_col]);
        double w = 0.0;
        const auto [ptr, ec] = std::from_chars(cell.data(), cell.data() + cell.size(), w);
        if (ec != std::errc{} || ptr != cell.data() + cell.size() || !(w > 0.0) || !std::isfinite(w)) {
            throw MalformedRow(where + ": weight must be a positive number");
        }
        weights[*st] = w;
    }
    return WeightScheme::by_state(std::move(weights));
}

std::vector<OutageEvent> scope_events(const RunConfig& config, std::span<const OutageEvent> events) {
    std::vector<OutageEvent> out;
    for (const auto& ev : events) {
        if (config.scope_state && ev.state != *config.scope_state) continue;
        if (config.scope_cause && ev.cause != *config.scope_cause) continue;
        if (config.scope_years && !config.scope_years->contains(year_of(ev.began))) continue;
        out.push_back(ev);
    }
    return out;
}

namespace {

YearRange event_span(std::span<const OutageEvent> events) {
    YearRange r{year_of(events.front().began), year_of(events.front().began)};
    for (const auto& ev : events) {
        r.start = std::min(r.start, year_of(ev.began));
        r.end = std::max(r.end, year_of(ev.began));
    }
    return r;
}

}  // namespace

double scope_customers(const RunConfig& config, const CustomerBaseTable& base,
                       std::span<const OutageEvent> events) {
    YearRange window;
    if (config.scope_years) {
        window = *config.scope_years;
    } else if (!events.empty()) {
        window = event_span(events);
    } else {
        throw EmptyResult("no events in scope");
    }
    std::vector<std::string> states;
    if (config.scope_state) {
        states.push_back(*config.scope_state);
    } else {
        states = base.states();
    }
    const double n_t = group_customers(base, states, window, config.grouping.nt_mode);
    if (!(n_t > 0.0)) throw EmptyGroupNt("customers served is zero for the configured scope");
    return n_t;
}

// ---------------------------------------------------------------- rendering

std::string null_or(const std::optional<double>& v) { return v ? format_double(*v) : "null"; }

std::vector<std::string> metric_columns() {
    return {"state",        "cause",    "nerc_region",    "years",           "saidi_hours",
            "saifi",        "caidi_hours", "n_events",    "n_t",             "weighted",
            "events_exceeding_base"};
}

namespace {

std::string years_text(const std::optional<YearRange>& r) {
    if (!r) return "all";
    return std::to_string(r->start) + "-" + std::to_string(r->end);
}

}  // namespace

std::vector<std::string> metric_row(const MetricTriple& m) {
    return {m.key.state.value_or("all"),
            m.key.cause ? std::string(to_string(*m.key.cause)) : "all",
            m.key.nerc_region ? std::string(to_string(*m.key.nerc_region)) : "all",
            years_text(m.key.year_range),
            m.n_events ? format_double(m.saidi) : "0",
            m.n_events ? format_double(m.saifi) : "0",
            null_or(m.caidi),
            std::to_string(m.n_events),
            format_double(m.n_t),
            m.weights_applied ? "1" : "0",
            std::to_string(m.events_exceeding_base)};
}

namespace {

std::string header_line(const std::string& hash, std::uint64_t seed) {
    return "# manifest=" + hash + " seed=" + std::to_string(seed) + "\n";
}

ordered_json metric_json(const MetricTriple& m) {
    ordered_json j;
    j["state"] = m.key.state ? ordered_json(*m.key.state) : ordered_json(nullptr);
    j["cause"] = m.key.cause ? ordered_json(std::string(to_string(*m.key.cause))) : ordered_json(nullptr);
    j["nerc_region"] =
        m.key.nerc_region ? ordered_json(std::string(to_string(*m.key.nerc_region))) : ordered_json(nullptr);
    j["years"] = years_text(m.key.year_range);
    j["saidi_hours_per_customer"] = m.saidi;
    j["saifi_per_customer"] = m.saifi;
    j["caidi_hours"] = m.caidi ? ordered_json(*m.caidi) : ordered_json(nullptr);
    j["n_events"] = m.n_events;
    j["n_t"] = m.n_t;
    j["weighted"] = m.weights_applied;
    j["events_exceeding_base"] = m.events_exceeding_base;
    return j;
}

}  // namespace

void ReportBundle::add_table(const std::string& name, const std::vector<std::string>& columns,
                             const std::vector<std::vector<std::string>>& rows) {
    std::string text = header_line(hash, seed);
    auto emit = [&](const std::vector<std::string>& cells) {
        for (std::size_t i = 0; i < cells.size(); ++i) {
            if (i) text += '\t';
            text += tsv_safe(cells[i]);
        }
        text += '\n';
    };
    emit(columns);
    for (const auto& r : rows) emit(r);
    files[name] = std::move(text);
    row_counts[name] = rows.size();
}

void ReportBundle::add_text(const std::string& name, const std::string& body, std::size_t rows) {
    files[name] = header_line(hash, seed) + body;
    row_counts[name] = rows;
}

std::string ReportBundle::manifest_json(const RunConfig& config) const {
    ordered_json j;
    j["manifest"] = hash;
    j["toolkit_version"] = std::string(toolkit_version());
    j["taxonomy_version"] = taxonomy_version.empty() ? ordered_json(nullptr) : ordered_json(taxonomy_version);
    j["seed"] = seed;
    ordered_json settings = ordered_json::object();
    for (const auto& [k, v] : config.settings) {
        if (k == "out_dir") continue;
        if (kPathKeys.count(k)) {
            settings[k] = fs::path(v).filename().string();
        } else {
            settings[k] = v;
        }
    }
    j["settings"] = settings;
    ordered_json counts = ordered_json::object();
    for (const auto& [k, v] : row_counts) counts[k] = v;
    j["row_counts"] = counts;
    if (identity) {
        j["slope_identity"] = {{"holds", identity->holds},
                               {"slope", identity->slope},
                               {"saidi_route", identity->saidi_route},
                               {"caidi_saifi_route", identity->caidi_saifi_route},
                               {"rel_error_saidi", identity->rel_error_saidi},
                               {"rel_error_caidi_saifi", identity->rel_error_caidi_saifi},
                               {"tolerance", identity->tolerance}};
    }
    if (agreement) {
        j["detector_agreement"] = {{"both", agreement->both},
                                   {"med_only", agreement->med_only},
                                   {"influence_only", agreement->influence_only},
                                   {"neither", agreement->neither}};
    }
    j["notes"] = notes;
    return j.dump(2) + "\n";
}

ReportBundle make_bundle(const RunConfig& config) {
    ReportBundle b;
    b.hash = manifest_hash(config);
    b.seed = config.seed;
    return b;
}

// ---------------------------------------------------------------- stages

void run_ingest(const RunConfig&, const LoadedInputs& inputs, ReportBundle& bundle) {
    std::ostringstream ev;
    write_canonical_events(ev, inputs.events);
    bundle.add_text("events.tsv", ev.str(), inputs.events.size());
    std::ostringstream rej;
    write_rejection_log(rej, inputs.rejections);
    bundle.add_text("rejections.tsv", rej.str(), inputs.rejections.size());
    if (inputs.events.empty()) {
        bundle.empty = true;
        bundle.notes.push_back("ingest: no events survived cleaning");
    }
}

void run_metrics(const RunConfig& config, const LoadedInputs& inputs, const CustomerBaseTable& base,
                 const WeightScheme& weights, ReportBundle& bundle) {
    const auto metrics = metrics_by_group(inputs.events, base, config.grouping, weights);
    if (metrics.empty()) throw EmptyResult("no metric groups");

    std::vector<std::vector<std::string>> rows;
    ordered_json doc = ordered_json::array();
    for (const auto& m : metrics) {
        rows.push_back(metric_row(m));
        doc.push_back(metric_json(m));
    }
    bundle.add_table("metrics.tsv", metric_columns(), rows);
    bundle.files["metrics.json"] = doc.dump(2) + "\n";

    // State map export: every state by cause for each configured period.
    GroupingSpec map_spec = config.grouping;
    map_spec.by_state = true;
    map_spec.by_cause = true;
    map_spec.by_region = false;
    std::vector<std::vector<std::string>> map_rows;
    for (const auto& m : metrics_by_group(inputs.events, base, map_spec, weights)) {
        std::optional<double> log_caidi;
        if (m.caidi && *m.caidi > 0.0) log_caidi = std::log10(*m.caidi);
        map_rows.push_back({*m.key.state, std::string(to_string(*m.key.cause)),
                            years_text(m.key.year_range), format_double(m.saidi),
                            format_double(m.saifi), null_or(m.caidi), null_or(log_caidi),
                            std::to_string(m.n_events)});
    }
    bundle.add_table("choropleth.tsv",
                     {"state", "cause", "years", "saidi_hours", "saifi", "caidi_hours", "log10_caidi",
                      "n_events"},
                     map_rows);

    std::vector<std::string> count_cols{"nerc_region"};
    for (auto c : kAllCauses) count_cols.emplace_back(to_string(c));
    count_cols.emplace_back("total");
    const auto counts = count_by_region_and_cause(inputs.events);
    std::vector<std::vector<std::string>> count_rows;
    for (auto r : kAllRegions) {
        std::vector<std::string> row{std::string(to_string(r))};
        std::size_t total = 0;
        for (auto c : kAllCauses) {
            const auto n = counts.at({r, c});
            total += n;
            row.push_back(std::to_string(n));
        }
        row.push_back(std::to_string(total));
        count_rows.push_back(std::move(row));
    }
    bundle.add_table("counts.tsv", count_cols, count_rows);
}

namespace {

struct ScopeData {
    std::vector<OutageEvent> events;
    double n_t = 0.0;
    std::vector<RegPoint> points;
};

ScopeData prepare_scope(const RunConfig& config, const LoadedInputs& inputs,
                        const CustomerBaseTable& base, const WeightScheme& weights) {
    ScopeData s;
    s.events = scope_events(config, inputs.events);
    if (s.events.empty()) throw EmptyResult("no events in the configured scope");
    s.n_t = scope_customers(config, base, s.events);
    s.points = points_from_events(s.events, s.n_t, weights);
    return s;
}

std::vector<std::string> fit_row(const RegressionFit& f, bool weighted) {
    return {std::string(to_string(f.model)), std::to_string(f.n), std::to_string(f.p),
            format_double(f.slope), null_or(f.intercept), format_double(f.residual_variance),
            weighted ? "1" : "0"};
}

}  // namespace

RegressionFit run_regress(const RunConfig& config, const LoadedInputs& inputs,
                          const CustomerBaseTable& base, const WeightScheme& weights,
                          ReportBundle& bundle) {
    const auto scope = prepare_scope(config, inputs, base, weights);

    const auto origin = fit_origin(scope.points);
    std::vector<std::vector<std::string>> rows{fit_row(origin, !weights.is_unit())};
    std::optional<RegressionFit> with_intercept;
    if (scope.points.size() >= 3) {
        with_intercept = fit_intercept(scope.points);
        rows.push_back(fit_row(*with_intercept, !weights.is_unit()));
    } else {
        bundle.notes.push_back("intercept model skipped: fewer than 3 events in scope");
    }
    bundle.add_table("regression.tsv",
                     {"model", "n", "p", "slope_days", "intercept_days", "residual_variance", "weighted"},
                     rows);

    // The identity is stated for the unweighted through-origin fit.
    const auto unit_points = points_from_events(scope.events, scope.n_t);
    const auto unit_fit = fit_origin(unit_points);
    const auto unit_metrics = compute_metrics(scope.events, scope.n_t);
    std::vector<double> fractions;
    for (const auto& p : unit_points) fractions.push_back(p.x);
    const auto id = slope_metric_identity(unit_fit, unit_metrics, fractions);
    bundle.identity = id;
    bundle.add_table("identity.tsv",
                     {"slope_days", "saidi_route", "caidi_saifi_route", "rel_error_saidi",
                      "rel_error_caidi_saifi", "tolerance", "holds"},
                     {{format_double(id.slope), format_double(id.saidi_route),
                       format_double(id.caidi_saifi_route), format_double(id.rel_error_saidi),
                       format_double(id.rel_error_caidi_saifi), format_double(id.tolerance),
                       id.holds ? "1" : "0"}});

    const RegressionFit& shown =
        (config.influence_model == RegressionModel::WithIntercept && with_intercept) ? *with_intercept
                                                                                     : origin;
    std::vector<std::vector<std::string>> scatter;
    for (std::size_t i = 0; i < shown.points.size(); ++i) {
        const auto& p = shown.points[i];
        scatter.push_back({p.label, format_double(p.x), format_double(p.y), format_double(p.weight),
                           format_double(shown.fitted[i]), format_double(shown.residuals[i])});
    }
    bundle.add_table("scatter.tsv", {"label", "fraction_affected", "duration_days", "weight",
                                     "fitted_days", "residual_days"},
                     scatter);
    return shown;
}

namespace {

std::string flag_list(const InfluenceRow& r) {
    std::string out;
    auto add = [&](bool on, std::string_view name) {
        if (!on) return;
        if (!out.empty()) out += ',';
        out += name;
    };
    add(r.flag_dfbetas, "dfbetas");
    add(r.flag_dffits, "dffits");
    add(r.flag_covratio, "covratio");
    add(r.flag_cooks, "cooks");
    add(r.flag_hat, "hat");
    return out;
}

InfluenceReport influence_for(const RunConfig& config, std::span<const RegPoint> points) {
    return influence(fit(points, config.influence_model), config.thresholds);
}

}  // namespace

InfluenceReport run_influence(const RunConfig& config, const LoadedInputs& inputs,
                              const CustomerBaseTable& base, const WeightScheme& weights,
                              ReportBundle& bundle) {
    const auto scope = prepare_scope(config, inputs, base, weights);
    const auto report = influence_for(config, scope.points);

    std::vector<std::string> cols{"label"};
    if (report.model == RegressionModel::WithIntercept) cols.emplace_back("dfb_intercept");
    cols.insert(cols.end(), {"dfb_slope", "dffit", "cov_r", "cook_d", "hat", "flags"});
    std::vector<std::vector<std::string>> rows;
    for (const auto& r : report.rows) {
        std::vector<std::string> row{r.label};
        for (double d : r.dfbetas) row.push_back(format_double(d));
        row.insert(row.end(), {format_double(r.dffits), format_double(r.covratio),
                               format_double(r.cooks_d), format_double(r.hat), flag_list(r)});
        rows.push_back(std::move(row));
    }
    bundle.add_table("influence.tsv", cols, rows);
    bundle.add_table("influence_cuts.tsv",
                     {"model", "dfbetas_cut", "dffits_cut", "covratio_band", "cooks_cut", "hat_cut"},
                     {{std::string(to_string(report.model)), format_double(report.cuts.dfbetas_cut),
                       format_double(report.cuts.dffits_cut), format_double(report.cuts.covratio_band),
                       format_double(report.cuts.cooks_cut), format_double(report.cuts.hat_cut)}});

    std::vector<std::vector<std::string>> changes;
    std::vector<std::vector<std::string>> removed;
    try {
        const auto ex = excise_and_recompute(scope.events, scope.n_t, report.rows,
                                             config.excise_measure, weights);
        for (const auto& c : ex.changes) {
            changes.push_back({c.metric, null_or(c.before), null_or(c.after),
                               c.percent ? format_percent_change(*c.percent) : "null"});
        }
        for (const auto& l : ex.removed_labels) removed.push_back({l});
    } catch (const NothingFlagged&) {
        bundle.notes.push_back("excision: no event flagged by " +
                               std::string(to_string(config.excise_measure)));
    }
    bundle.add_table("excision.tsv", {"metric", "with_flagged", "without_flagged", "change"}, changes);
    bundle.add_table("excised_events.tsv", {"label"}, removed);
    return report;
}

SelectionSummary run_select(const RunConfig& config, ReportBundle& bundle) {
    const auto table = read_delimited_file(config.design_matrix.string());
    const auto design = read_design_matrix(table, config.select_response, config.select_id_column);
    if (design.x.rows() == 0) throw EmptyResult("design matrix has no complete rows");

    CvCurve curve;
    const auto summary = select_predictors(design, config.cv, config.p_cut, &curve);

    std::vector<std::vector<std::string>> rows;
    auto coef_row = [](const CoefficientRow& c) {
        return std::vector<std::string>{c.name, format_double(c.estimate), format_double(c.std_error),
                                        format_double(c.t_value), format_double(c.p_value)};
    };
    rows.push_back(coef_row(summary.intercept));
    for (const auto& c : summary.coefficients) rows.push_back(coef_row(c));
    bundle.add_table("selection.tsv", {"term", "estimate", "std_error", "t_value", "p_value"}, rows);

    std::vector<std::vector<std::string>> cv_rows;
    for (std::size_t i = 0; i < curve.lambdas.size(); ++i) {
        cv_rows.push_back({format_double(curve.lambdas[i]), format_double(curve.mean_error[i]),
                           format_double(curve.std_error[i]), i == curve.chosen_index ? "1" : "0"});
    }
    bundle.add_table("cv.tsv", {"lambda", "cv_mse", "cv_se", "chosen"}, cv_rows);

    std::vector<std::vector<std::string>> trace;
    for (const auto& line : design.log) trace.push_back({"preprocess", "", line});
    trace.push_back({"cv", "", "rule=" + std::string(to_string(curve.rule)) +
                                   " folds=" + std::to_string(config.cv.folds) +
                                   " lambda=" + format_double(curve.chosen_lambda)});
    for (const auto& name : summary.lasso_active) trace.push_back({"lasso_active", name, ""});
    for (const auto& name : summary.lasso_active) {
        if (std::find(summary.kept_after_filter.begin(), summary.kept_after_filter.end(), name) ==
            summary.kept_after_filter.end()) {
            trace.push_back({"dropped_p", name, "p >= " + format_double(summary.p_cut)});
        }
    }
    for (const auto& name : summary.kept_after_filter) trace.push_back({"kept", name, ""});
    if (summary.empty_after_filter) trace.push_back({"result", "", "no predictor survived the p filter"});
    bundle.add_table("selection_trace.tsv", {"step", "term", "detail"}, trace);
    return summary;
}

void run_med(const RunConfig& config, const LoadedInputs& inputs, const CustomerBaseTable& base,
             const WeightScheme& weights, ReportBundle& bundle) {
    if (config.med_years.empty()) throw ConfigError("config key 'med.years' is required");
    if (!config.med_state) throw ConfigError("config key 'med.state' (or 'scope.state') is required");

    std::vector<OutageEvent> events;
    for (const auto& ev : inputs.events) {
        if (ev.state != *config.med_state) continue;
        if (config.scope_cause && ev.cause != *config.scope_cause) continue;
        events.push_back(ev);
    }
    const int first_year = config.med_years.front() - config.med.window_years;
    const int last_year = config.med_years.back();
    const std::vector<std::string> states{*config.med_state};
    const double n_t = group_customers(base, states, {first_year, last_year}, NtMode::Mean);
    if (!(n_t > 0.0)) throw EmptyGroupNt("customers served is zero for " + *config.med_state);

    const auto series = daily_saidi(events, n_t, Date{std::chrono::year(first_year) / 1 / 1},
                                    Date{std::chrono::year(last_year) / 12 / 31});

    std::vector<std::vector<std::string>> day_rows;
    std::vector<std::vector<std::string>> threshold_rows;
    std::vector<DayClass> all_days;
    std::optional<double> previous;
    for (int year : config.med_years) {
        const auto th = med_threshold(series, year, config.med);
        DailySaidiSeries in_year;
        for (const auto& d : series) {
            if (int(d.date.year()) == year) in_year.push_back(d);
        }
        const auto days = classify_days(in_year, th);
        std::size_t n_med = 0;
        for (const auto& d : days) {
            day_rows.push_back({format_date(d.date), format_double(d.saidi), d.is_med ? "1" : "0",
                                format_double(th.t_med)});
            n_med += d.is_med;
            all_days.push_back(d);
        }
        std::optional<double> ratio;
        if (previous && *previous > 0.0) ratio = th.t_med / *previous;
        threshold_rows.push_back({std::to_string(year), format_date(th.window_start),
                                  format_date(th.window_end), std::to_string(th.n_days_used),
                                  format_double(th.mu_log), format_double(th.sigma_log),
                                  format_double(th.multiplier), format_double(th.t_med),
                                  null_or(ratio), std::to_string(n_med)});
        previous = th.t_med;
    }
    bundle.add_table("med.tsv", {"date", "saidi", "is_med", "t_med"}, day_rows);
    bundle.add_table("med_thresholds.tsv",
                     {"year", "window_start", "window_end", "positive_days", "mu_log", "sigma_log",
                      "multiplier", "t_med", "inflation_vs_prior", "med_days"},
                     threshold_rows);
    bundle.notes.push_back("med: zero-SAIDI days are excluded from the log statistics");

    // Influence on the evaluated years' events, same regression settings.
    std::vector<OutageEvent> evaluated;
    for (const auto& ev : events) {
        const int y = year_of(ev.began);
        if (std::binary_search(config.med_years.begin(), config.med_years.end(), y)) {
            evaluated.push_back(ev);
        }
    }
    std::vector<std::vector<std::string>> compare_rows;
    if (evaluated.empty()) {
        bundle.notes.push_back("med: no events in the evaluated years");
    } else {
        const auto points = points_from_events(evaluated, n_t, weights);
        const auto report = influence_for(config, points);
        const auto flags = std::make_unique<bool[]>(report.rows.size());
        for (std::size_t i = 0; i < report.rows.size(); ++i) {
            flags[i] = report.rows[i].flagged(config.excise_measure);
        }
        const auto cmp = compare_detectors(evaluated, all_days,
                                           std::span<const bool>(flags.get(), report.rows.size()));
        for (const auto& r : cmp.rows) {
            const char* cls = r.med ? (r.influence ? "both" : "med_only")
                                    : (r.influence ? "influence_only" : "neither");
            compare_rows.push_back({r.label, format_date(r.date), r.med ? "1" : "0",
                                    r.influence ? "1" : "0", cls});
        }
        bundle.agreement = cmp;
    }
    bundle.add_table("med_compare.tsv", {"label", "date", "med_day", "influential", "class"},
                     compare_rows);
}

ReportBundle run_stage(const RunConfig& config, Stage stage) {
    validate_paths(config, stage);
    auto bundle = make_bundle(config);
    if (stage == Stage::Select) {
        run_select(config, bundle);
        return bundle;
    }
    const auto inputs = load_events(config);
    bundle.taxonomy_version = inputs.taxonomy_version;
    if (stage == Stage::Ingest) {
        run_ingest(config, inputs, bundle);
        return bundle;
    }
    const auto base = load_customer_base(config);
    const auto weights = load_weights(config);
    switch (stage) {
        case Stage::Metrics: run_metrics(config, inputs, base, weights, bundle); break;
        case Stage::Regress: run_regress(config, inputs, base, weights, bundle); break;
        case Stage::Influence: run_influence(config, inputs, base, weights, bundle); break;
        case Stage::Med: run_med(config, inputs, base, weights, bundle); break;
        case Stage::Report:
            if (config.events.empty()) run_ingest(config, inputs, bundle);
            if (inputs.events.empty()) throw EmptyResult("no events survived cleaning");
            run_metrics(config, inputs, base, weights, bundle);
            run_regress(config, inputs, base, weights, bundle);
            run_influence(config, inputs, base, weights, bundle);
            if (!config.design_matrix.empty()) run_select(config, bundle);
            if (!config.med_years.empty()) run_med(config, inputs, base, weights, bundle);
            break;
        default: break;
    }
    return bundle;
}

void write_bundle(const RunConfig& config, const ReportBundle& bundle) {
    fs::create_directories(config.out_dir);
    auto put = [&](const std::string& name, const std::string& text) {
        std::ofstream out(config.out_dir / name, std::ios::binary);
        if (!out) throw ConfigError("cannot write " + (config.out_dir / name).string());
        out << text;
    };
    for (const auto& [name, text] : bundle.files) put(name, text);
    put("manifest.json", bundle.manifest_json(config));
}

}  // namespace gridres
