#include <pybind11/eigen.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include <fstream>

#include "gridres/datetime.hpp"
#include "gridres/ingest.hpp"
#include "gridres/med.hpp"
#include "gridres/pipeline.hpp"
#include "gridres/regress.hpp"
#include "gridres/reliability.hpp"
#include "gridres/select.hpp"
#include "gridres/stats.hpp"

namespace py = pybind11;
using namespace gridres;

namespace {

std::vector<RegPoint> make_points(const std::vector<double>& x, const std::vector<double>& y,
                                  const std::optional<std::vector<double>>& w) {
    if (x.size() != y.size() || (w && w->size() != x.size())) {
        throw py::value_error("x, y and weights must have equal length");
    }
    std::vector<RegPoint> pts(x.size());
    for (std::size_t i = 0; i < x.size(); ++i) {
        pts[i].x = x[i];
        pts[i].y = y[i];
        pts[i].weight = w ? (*w)[i] : 1.0;
        pts[i].label = std::to_string(i);
    }
    return pts;
}

RegressionModel model_of(const std::string& s) {
    if (s == "intercept") return RegressionModel::WithIntercept;
    if (s == "origin") return RegressionModel::ThroughOrigin;
    throw py::value_error("model must be 'intercept' or 'origin'");
}

py::dict fit_dict(const RegressionFit& f) {
    py::dict d;
    d["model"] = std::string(to_string(f.model));
    d["slope"] = f.slope;
    d["intercept"] = f.intercept;
    d["n"] = f.n;
    d["fitted"] = f.fitted;
    d["residuals"] = f.residuals;
    d["hat"] = f.hat;
    d["residual_variance"] = f.residual_variance;
    return d;
}

py::dict metric_dict(const MetricTriple& m) {
    py::dict d;
    d["saidi"] = m.saidi;
    d["saifi"] = m.saifi;
    d["caidi"] = m.caidi;
    d["n_events"] = m.n_events;
    return d;
}

WeightScheme weights_of(const std::optional<std::map<std::string, double>>& by_state) {
    return by_state ? WeightScheme::by_state(*by_state) : WeightScheme::unit();
}

DesignMatrix design_of(const Eigen::MatrixXd& x, const Eigen::VectorXd& y,
                       const std::optional<std::vector<std::string>>& names) {
    if (x.rows() != y.size()) throw py::value_error("X and y row counts differ");
    DesignMatrix d;
    d.x = x;
    d.y = y;
    d.response_name = "y";
    if (names) {
        if (names->size() != static_cast<std::size_t>(x.cols())) throw py::value_error("names/columns mismatch");
        d.names = *names;
    } else {
        for (Eigen::Index j = 0; j < x.cols(); ++j) d.names.push_back("x" + std::to_string(j));
    }
    return d;
}

CvOptions cv_of(std::size_t folds, std::uint64_t seed, const std::string& rule, std::size_t grid_size) {
    CvOptions cv;
    cv.folds = folds;
    cv.seed = seed;
    cv.grid_size = grid_size;
    const auto r = parse_lambda_rule(rule);
    if (!r) throw py::value_error("rule must be 'min' or '1se'");
    cv.rule = *r;
    return cv;
}

py::dict coef_dict(const CoefficientRow& c) {
    py::dict d;
    d["name"] = c.name;
    d["estimate"] = c.estimate;
    d["std_error"] = c.std_error;
    d["t_value"] = c.t_value;
    d["p_value"] = c.p_value;
    return d;
}

Stage stage_of(const std::string& s) {
    for (auto st : {Stage::Ingest, Stage::Metrics, Stage::Regress, Stage::Influence, Stage::Select, Stage::Med,
                    Stage::Report}) {
        if (to_string(st) == s) return st;
    }
    throw py::value_error("unknown stage '" + s + "'");
}

}  // namespace

PYBIND11_MODULE(_gridres, m) {
    m.doc() = "Outage reliability metrics, influence diagnostics and predictor selection";
    m.attr("__version__") = std::string(toolkit_version());

    py::register_exception<Error>(m, "GridresError", PyExc_RuntimeError);
    py::register_exception<ConfigError>(m, "ConfigError", PyExc_ValueError);

    py::class_<OutageEvent>(m, "OutageEvent")
        .def_readonly("source_row", &OutageEvent::source_row)
        .def_readonly("state", &OutageEvent::state)
        .def_readonly("elapsed_hours", &OutageEvent::elapsed_hours)
        .def_readonly("customers_affected", &OutageEvent::customers_affected)
        .def_readonly("raw_cause", &OutageEvent::raw_cause)
        .def_property_readonly("began", [](const OutageEvent& e) { return format_timestamp(e.began); })
        .def_property_readonly("restored", [](const OutageEvent& e) { return format_timestamp(e.restored); })
        .def_property_readonly("cause", [](const OutageEvent& e) { return std::string(to_string(e.cause)); })
        .def_property_readonly("nerc_region",
                               [](const OutageEvent& e) -> std::optional<std::string> {
                                   if (!e.nerc_region) return std::nullopt;
                                   return std::string(to_string(*e.nerc_region));
                               })
        .def_property_readonly("flags", [](const OutageEvent& e) { return format_flags(e.flags); })
        .def_property_readonly("label", [](const OutageEvent& e) { return event_label(e); })
        .def("__repr__", [](const OutageEvent& e) { return "<OutageEvent " + event_label(e) + ">"; });

    m.def(
        "ingest",
        [](const std::string& outage_table, const std::string& taxonomy, double max_elapsed_days) {
            const auto tax = CauseTaxonomy::from_file(taxonomy);
            const auto records = parse_outage_table(read_delimited_file(outage_table));
            CleaningPolicy policy;
            policy.max_elapsed_hours = max_elapsed_days * 24.0;
            auto result = clean_events(records, tax, policy);
            std::vector<std::tuple<std::string, std::size_t, std::string>> rejected;
            for (const auto& r : result.rejections) rejected.emplace_back(r.reason_code, r.row_number, r.detail);
            return py::make_tuple(result.events, rejected);
        },
        py::arg("outage_table"), py::arg("taxonomy"), py::arg("max_elapsed_days") = 45.0,
        "Clean a raw outage table; returns (events, [(reason, row, detail), ...]).");

    m.def(
        "read_events",
        [](const std::string& path) {
            std::ifstream in(path);
            if (!in) throw py::value_error("cannot read " + path);
            return read_canonical_events(in);
        },
        py::arg("path"));

    m.def(
        "compute_metrics",
        [](const std::vector<OutageEvent>& events, double n_t,
           const std::optional<std::map<std::string, double>>& state_weights) {
            return metric_dict(compute_metrics(events, n_t, weights_of(state_weights)));
        },
        py::arg("events"), py::arg("n_t"), py::arg("state_weights") = py::none(),
        "SAIDI and CAIDI in hours, SAIFI per customer; caidi is None for an empty set.");

    m.def(
        "fit",
        [](const std::vector<double>& x, const std::vector<double>& y, const std::optional<std::vector<double>>& w,
           const std::string& model) { return fit_dict(fit(make_points(x, y, w), model_of(model))); },
        py::arg("x"), py::arg("y"), py::arg("weights") = py::none(), py::arg("model") = "origin");

    m.def(
        "influence",
        [](const std::vector<double>& x, const std::vector<double>& y, const std::optional<std::vector<double>>& w,
           const std::string& model) {
            const auto rep = influence(fit(make_points(x, y, w), model_of(model)));
            std::vector<std::vector<double>> dfbetas;
            std::vector<double> dffits, covratio, cooks, hat;
            std::vector<bool> flag_cooks;
            for (const auto& r : rep.rows) {
                dfbetas.push_back(r.dfbetas);
                dffits.push_back(r.dffits);
                covratio.push_back(r.covratio);
                cooks.push_back(r.cooks_d);
                hat.push_back(r.hat);
                flag_cooks.push_back(r.flag_cooks);
            }
            py::dict d;
            d["dfbetas"] = dfbetas;
            d["dffits"] = dffits;
            d["covratio"] = covratio;
            d["cooks_d"] = cooks;
            d["hat"] = hat;
            d["flag_cooks"] = flag_cooks;
            d["cooks_cut"] = rep.cuts.cooks_cut;
            return d;
        },
        py::arg("x"), py::arg("y"), py::arg("weights") = py::none(), py::arg("model") = "intercept");

    m.def("percent_change", &percent_change, py::arg("before"), py::arg("after"));
    m.def("format_percent_change", &format_percent_change, py::arg("percent"));

    m.def(
        "lasso_fit",
        [](const Eigen::MatrixXd& x, const Eigen::VectorXd& y, double lambda) {
            const auto s = standardize(design_of(x, y, std::nullopt));
            const auto r = lasso_fit(s, lambda);
            Eigen::VectorXd full = Eigen::VectorXd::Zero(x.cols());
            for (std::size_t j = 0; j < s.source_columns.size(); ++j) {
                full[static_cast<Eigen::Index>(s.source_columns[j])] = r.coefficients[static_cast<Eigen::Index>(j)];
            }
            py::dict d;
            d["coefficients"] = full;
            d["intercept"] = r.intercept;
            d["converged"] = r.converged;
            d["lambda_max"] = lambda_max(s);
            return d;
        },
        py::arg("X"), py::arg("y"), py::arg("lam"),
        "LASSO on sample-sd standardized columns; coefficients on the original scale.");

    m.def(
        "cv_select",
        [](const Eigen::MatrixXd& x, const Eigen::VectorXd& y, std::size_t folds, std::uint64_t seed,
           const std::string& rule, std::size_t grid_size) {
            const auto c = cv_select(design_of(x, y, std::nullopt), cv_of(folds, seed, rule, grid_size));
            py::dict d;
            d["lambdas"] = c.lambdas;
            d["mean_error"] = c.mean_error;
            d["std_error"] = c.std_error;
            d["chosen_lambda"] = c.chosen_lambda;
            d["chosen_index"] = c.chosen_index;
            return d;
        },
        py::arg("X"), py::arg("y"), py::arg("folds") = 10, py::arg("seed") = 1, py::arg("rule") = "min",
        py::arg("grid_size") = 100);

    m.def(
        "select_predictors",
        [](const Eigen::MatrixXd& x, const Eigen::VectorXd& y, const std::optional<std::vector<std::string>>& names,
           std::size_t folds, std::uint64_t seed, double p_cut, const std::string& rule) {
            const auto s = select_predictors(design_of(x, y, names), cv_of(folds, seed, rule, 100), p_cut);
            py::dict d;
            d["lasso_active"] = s.lasso_active;
            d["kept"] = s.kept_after_filter;
            d["intercept"] = coef_dict(s.intercept);
            py::list coefs;
            for (const auto& c : s.coefficients) coefs.append(coef_dict(c));
            d["coefficients"] = coefs;
            d["chosen_lambda"] = s.chosen_lambda;
            d["empty_after_filter"] = s.empty_after_filter;
            return d;
        },
        py::arg("X"), py::arg("y"), py::arg("names") = py::none(), py::arg("folds") = 10, py::arg("seed") = 1,
        py::arg("p_cut") = 0.10, py::arg("rule") = "min");

    m.def("student_t_cdf", &student_t_cdf, py::arg("t"), py::arg("df"));
    m.def("student_t_two_sided_p", &student_t_two_sided_p, py::arg("t"), py::arg("df"));

    m.def(
        "med_threshold",
        [](const std::vector<double>& daily_saidi, double multiplier, std::size_t min_positive_days) {
            DailySaidiSeries s;
            const std::chrono::sys_days start{std::chrono::year(2000) / 1 / 1};
            for (std::size_t i = 0; i < daily_saidi.size(); ++i) {
                s.push_back({Date{start + std::chrono::days(static_cast<int>(i))}, daily_saidi[i]});
            }
            MedOptions opt;
            opt.multiplier = multiplier;
            opt.min_positive_days = min_positive_days;
            const auto th = med_threshold_over(s, s.front().date, s.back().date, opt);
            py::dict d;
            d["mu_log"] = th.mu_log;
            d["sigma_log"] = th.sigma_log;
            d["t_med"] = th.t_med;
            d["positive_days"] = th.n_days_used;
            return d;
        },
        py::arg("daily_saidi"), py::arg("multiplier") = 2.5, py::arg("min_positive_days") = 30,
        "2.5-beta threshold from a window of daily SAIDI values (zeros are skipped).");

    m.def(
        "run",
        [](const std::string& stage, const std::optional<std::filesystem::path>& config,
           const std::vector<std::string>& overrides, bool write) {
            const auto cfg = load_run_config(config, overrides);
            const auto bundle = run_stage(cfg, stage_of(stage));
            if (write) write_bundle(cfg, bundle);
            auto files = bundle.files;
            files["manifest.json"] = bundle.manifest_json(cfg);
            return files;
        },
        py::arg("stage"), py::arg("config") = py::none(), py::arg("overrides") = std::vector<std::string>{},
        py::arg("write") = false, "Run a pipeline stage; returns {file name: contents}.");
}
