#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "gridres/errors.hpp"
#include "gridres/ingest.hpp"
#include "gridres/keyvalue.hpp"
#include "gridres/med.hpp"
#include "gridres/regress.hpp"
#include "gridres/reliability.hpp"
#include "gridres/select.hpp"

namespace gridres {

std::string_view toolkit_version();

/// Raised by a stage that produced nothing to report.
class EmptyResult : public Error { using Error::Error; };

enum class Stage { Ingest, Metrics, Regress, Influence, Select, Med, Report };

std::string_view to_string(Stage s);

/// Process exit status for an error escaping `stage`:
/// 2 config, 3 unparseable input, 4 empty result, 5 metrics,
/// 6 regression/influence, 7 selection, 8 MED, 1 anything else.
int exit_code_for(Stage stage, const std::exception& error);

/// Everything a run needs, resolved from a flat key-value file plus overrides.
struct RunConfig {
    std::filesystem::path base_dir;  // relative paths resolve against this
    KeyValueMap settings;            // effective key-value pairs, overrides applied

    std::filesystem::path outage_table;
    std::filesystem::path customer_table;
    std::filesystem::path taxonomy;
    std::filesystem::path design_matrix;
    std::filesystem::path events;        // canonical event file; empty: clean the raw table
    std::filesystem::path weights_file;  // empty: unit weights
    std::filesystem::path out_dir;

    std::uint64_t seed = 1;
    OutageColumns outage_columns;
    CustomerColumns customer_columns;
    CleaningPolicy cleaning;
    GroupingSpec grouping;

    std::optional<std::string> scope_state;
    std::optional<CauseCategory> scope_cause;
    std::optional<YearRange> scope_years;

    RegressionModel influence_model = RegressionModel::WithIntercept;
    InfluenceThresholds thresholds;
    InfluenceMeasure excise_measure = InfluenceMeasure::CooksD;

    std::string select_response;
    std::string select_id_column;
    CvOptions cv;
    double p_cut = 0.10;

    std::optional<std::string> med_state;  // defaults to scope_state
    std::vector<int> med_years;            // evaluation years
    MedOptions med;
};

/// Throws ConfigError for unknown keys and unparseable values.
RunConfig parse_run_config(const KeyValueMap& settings, const std::filesystem::path& base_dir);

/// Reads `config_path` (if any), then applies `key=value` overrides in order.
/// Relative paths resolve against the config file's directory, or the
/// working directory without one.
RunConfig load_run_config(const std::optional<std::filesystem::path>& config_path,
                          const std::vector<std::string>& overrides);

/// Throws ConfigError naming the first required path that is unset or absent.
void validate_paths(const RunConfig& config, Stage stage);

/// FNV-1a over the non-path settings and the bytes of every input file, so
/// the hash does not depend on where the inputs live.
std::string manifest_hash(const RunConfig& config);

struct LoadedInputs {
    std::vector<OutageEvent> events;
    std::vector<Rejection> rejections;
    std::size_t raw_rows = 0;
    std::string taxonomy_version;
};

/// Canonical events when `events` is set, otherwise the cleaned raw table.
LoadedInputs load_events(const RunConfig& config);
CustomerBaseTable load_customer_base(const RunConfig& config);
WeightScheme load_weights(const RunConfig& config);

/// Events passing the scope.* filters.
std::vector<OutageEvent> scope_events(const RunConfig& config, std::span<const OutageEvent> events);

/// N_T of the scope: one state, or every state in the customer table, over
/// scope.years (or the events' span).
double scope_customers(const RunConfig& config, const CustomerBaseTable& base,
                       std::span<const OutageEvent> events);

/// Rendered output files keyed by file name, plus manifest fields.
struct ReportBundle {
    std::string hash;
    std::uint64_t seed = 1;
    std::map<std::string, std::string> files;
    std::map<std::string, std::size_t> row_counts;
    std::optional<IdentityReport> identity;
    std::optional<DetectorComparison> agreement;
    std::vector<std::string> notes;
    std::string taxonomy_version;
    bool empty = false;  // ingest kept no events

    /// Adds `# manifest=<hash> seed=<seed>`, the header and the rows.
    void add_table(const std::string& name, const std::vector<std::string>& columns,
                   const std::vector<std::vector<std::string>>& rows);
    /// Same header line followed by pre-rendered body text.
    void add_text(const std::string& name, const std::string& body, std::size_t rows);
    std::string manifest_json(const RunConfig& config) const;
};

ReportBundle make_bundle(const RunConfig& config);

// Stage runners append their tables to the bundle.
void run_ingest(const RunConfig& config, const LoadedInputs& inputs, ReportBundle& bundle);
void run_metrics(const RunConfig& config, const LoadedInputs& inputs, const CustomerBaseTable& base,
                 const WeightScheme& weights, ReportBundle& bundle);
RegressionFit run_regress(const RunConfig& config, const LoadedInputs& inputs,
                          const CustomerBaseTable& base, const WeightScheme& weights,
                          ReportBundle& bundle);
InfluenceReport run_influence(const RunConfig& config, const LoadedInputs& inputs,
                              const CustomerBaseTable& base, const WeightScheme& weights,
                              ReportBundle& bundle);
SelectionSummary run_select(const RunConfig& config, ReportBundle& bundle);
void run_med(const RunConfig& config, const LoadedInputs& inputs, const CustomerBaseTable& base,
             const WeightScheme& weights, ReportBundle& bundle);

/// Runs one stage (Report runs all that are configured) and returns the bundle.
ReportBundle run_stage(const RunConfig& config, Stage stage);

/// Writes every file plus manifest.json into config.out_dir.
void write_bundle(const RunConfig& config, const ReportBundle& bundle);

// Table renderers shared by the stages and the tests.
std::vector<std::string> metric_columns();
std::vector<std::string> metric_row(const MetricTriple& m);
std::string null_or(const std::optional<double>& v);

}  // namespace gridres
