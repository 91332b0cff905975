// Acceptance gate: one PASS/FAIL line per criterion, exit status 0 only when
// every criterion passes.
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <random>
#include <set>
#include <sstream>
#include <string>

#include "gridres/ingest.hpp"
#include "gridres/med.hpp"
#include "gridres/pipeline.hpp"
#include "gridres/regress.hpp"
#include "gridres/reliability.hpp"
#include "gridres/select.hpp"
#include "gridres/stats.hpp"
#include "gridres/text.hpp"
#include "oracles.hpp"
#include "student_t_reference.hpp"

using namespace gridres;
namespace fs = std::filesystem;
using Clock = std::chrono::steady_clock;

namespace {

struct Outcome {
    bool pass = true;
    std::string detail;

    void require(bool ok, const std::string& what) {
        if (!ok && pass) detail = what;
        pass = pass && ok;
    }
};

double seconds_since(Clock::time_point t0) {
    return std::chrono::duration<double>(Clock::now() - t0).count();
}

double rel(double a, double b) { return std::abs(a - b) / std::max(std::abs(b), 1e-300); }

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::ostringstream s;
    s << in.rdbuf();
    return s.str();
}

const CauseTaxonomy& taxonomy() {
    static const CauseTaxonomy t = CauseTaxonomy::from_file(GRIDRES_TAXONOMY_FILE);
    return t;
}

// Shared randomized corpus for criteria 1 and 2.
std::vector<std::vector<OutageEvent>> event_corpus() {
    std::mt19937_64 rng(1366);
    std::uniform_int_distribution<std::size_t> size(1, 200);
    std::vector<std::vector<OutageEvent>> out;
    for (int i = 0; i < 1000; ++i) out.push_back(testing::random_events(rng, size(rng), 900000));
    return out;
}

Outcome slope_identity() {
    Outcome o;
    const auto t0 = Clock::now();
    const double n_t = 2.5e6;
    double worst = 0.0;
    for (const auto& events : event_corpus()) {
        const auto f = fit_origin(points_from_events(events, n_t));
        const auto m = compute_metrics(events, n_t);
        double sum_x2 = 0.0;
        for (const auto& ev : events) {
            const double x = static_cast<double>(ev.customers_affected) / n_t;
            sum_x2 += x * x;
        }
        worst = std::max(worst, rel(f.slope, (m.saidi / kHoursPerDay) / sum_x2));
    }
    const double elapsed = seconds_since(t0);
    o.require(worst <= 1e-10, "max relative error " + format_double(worst));
    o.require(elapsed < 5.0, "runtime " + format_double(elapsed) + " s");
    if (o.pass) o.detail = "1000 sets, max rel error " + format_double(worst) + ", " + format_double(elapsed) + " s";
    return o;
}

Outcome metric_algebra() {
    Outcome o;
    std::mt19937_64 rng(1367);
    std::uniform_real_distribution<double> wdist(0.1, 10.0);
    const double n_t = 2.5e6;
    double worst = 0.0;
    for (const auto& events : event_corpus()) {
        const auto m = compute_metrics(events, n_t);
        if (*m.caidi > 0) worst = std::max(worst, rel(m.saidi, *m.caidi * m.saifi));

        std::map<std::size_t, double> wmap;
        for (const auto& ev : events) wmap[ev.source_row] = wdist(rng);
        const double c = 2.75;
        const auto mw = compute_metrics(events, n_t, WeightScheme::custom([&](const OutageEvent& ev) {
                                            return wmap.at(ev.source_row);
                                        }));
        const auto mc = compute_metrics(events, n_t, WeightScheme::custom([&](const OutageEvent& ev) {
                                            return c * wmap.at(ev.source_row);
                                        }));
        worst = std::max({worst, rel(mc.saidi, c * mw.saidi), rel(mc.saifi, c * mw.saifi)});
        if (mw.caidi && *mw.caidi > 0) {
            worst = std::max({worst, rel(*mc.caidi, *mw.caidi), rel(mw.saidi, *mw.caidi * mw.saifi)});
        }

        auto shuffled = events;
        std::shuffle(shuffled.begin(), shuffled.end(), rng);
        const auto ms = compute_metrics(shuffled, n_t);
        worst = std::max({worst, rel(ms.saidi, m.saidi), rel(ms.saifi, m.saifi)});

        const std::size_t cut = events.size() / 2;
        const auto ma = compute_metrics(std::span(events).first(cut), n_t);
        const auto mb = compute_metrics(std::span(events).subspan(cut), n_t);
        worst = std::max({worst, rel(ma.saidi + mb.saidi, m.saidi), rel(ma.saifi + mb.saifi, m.saifi)});
    }
    o.require(worst <= 1e-12, "max relative error " + format_double(worst));
    if (o.pass) o.detail = "max rel error " + format_double(worst);
    return o;
}

Outcome influence_oracle() {
    Outcome o;
    const auto t0 = Clock::now();
    std::mt19937_64 rng(1368);
    std::uniform_int_distribution<std::size_t> size(5, 60);
    double worst = 0.0;
    for (int trial = 0; trial < 200; ++trial) {
        const auto model = trial % 2 ? RegressionModel::ThroughOrigin : RegressionModel::WithIntercept;
        const auto points = testing::random_points(rng, size(rng), trial % 4 >= 2);
        const auto rep = influence(fit(points, model));
        const auto ref = testing::loo_brute_force(points, model);
        auto err = [](double a, double b) { return std::abs(a - b) / std::max(1.0, std::abs(b)); };
        for (std::size_t i = 0; i < ref.size(); ++i) {
            const auto& a = rep.rows[i];
            worst = std::max({worst, err(a.dffits, ref[i].dffits), err(a.covratio, ref[i].covratio),
                              err(a.cooks_d, ref[i].cooks_d)});
            for (std::size_t j = 0; j < ref[i].dfbetas.size(); ++j) {
                worst = std::max(worst, err(a.dfbetas[j], ref[i].dfbetas[j]));
            }
        }
    }
    const double elapsed = seconds_since(t0);
    o.require(worst <= 1e-8, "max deviation " + format_double(worst));
    o.require(elapsed < 30.0, "runtime " + format_double(elapsed) + " s");
    if (o.pass) o.detail = "200 fixtures, max deviation " + format_double(worst) + ", " + format_double(elapsed) + " s";
    return o;
}

// Optional full reproduction from a curated dataset directory holding
// events.tsv (canonical events) and customers.csv.
void curated_reproduction(Outcome& o, const fs::path& dir) {
    std::ifstream in(dir / "events.tsv");
    const auto events = read_canonical_events(in);
    const auto base = parse_customer_table(read_delimited_file((dir / "customers.csv").string()));

    const auto counts = count_by_region_and_cause(events);
    std::size_t serc = 0, wecc = 0;
    for (auto c : kAllCauses) {
        serc += counts.at({NercRegion::SERC, c});
        wecc += counts.at({NercRegion::WECC, c});
    }
    o.require(counts.at({NercRegion::WECC, CauseCategory::HumanAttack}) == 80, "WECC human attacks");
    o.require(counts.at({NercRegion::SERC, CauseCategory::HumanAttack}) == 11, "SERC human attacks");
    o.require(serc == 546 && wecc == 324, "SERC/WECC totals " + std::to_string(serc) + "/" + std::to_string(wecc));

    std::vector<OutageEvent> ca, ca_2014;
    for (const auto& ev : events) {
        if (ev.state != "CA") continue;
        ca.push_back(ev);
        if (year_of(ev.began) == 2014 && ev.cause == CauseCategory::NaturalHazard) ca_2014.push_back(ev);
    }
    const std::vector<std::string> states{"CA"};
    int first = 9999, last = 0;
    for (const auto& ev : ca) {
        first = std::min(first, year_of(ev.began));
        last = std::max(last, year_of(ev.began));
    }
    const double n_t_all = group_customers(base, states, {first, last}, NtMode::Mean);
    const auto rep = influence(fit_intercept(points_from_events(ca, n_t_all)));
    std::vector<std::string> flagged;
    for (const auto& r : rep.rows) {
        if (r.flag_cooks) flagged.push_back(r.label);
    }
    const double n_t = group_customers(base, states, {2014, 2014}, NtMode::Mean);
    const auto ex = excise_labels(ca_2014, n_t, flagged);
    auto sig3 = [](double a, double b) {
        char x[32], y[32];
        std::snprintf(x, sizeof x, "%.2e", a);
        std::snprintf(y, sizeof y, "%.2e", b);
        return std::string(x) == y;
    };
    o.require(sig3(ex.before.saidi, 0.0559) && sig3(ex.after.saidi, 0.0171), "Table SAIDI pair");
    o.require(sig3(ex.before.saifi, 0.1009) && sig3(ex.after.saifi, 0.0100), "Table SAIFI pair");
    o.require(ex.before.caidi && ex.after.caidi && sig3(*ex.before.caidi, 0.5551) && sig3(*ex.after.caidi, 1.702),
              "Table CAIDI pair");
}

Outcome excision_format() {
    Outcome o;
    const std::pair<double, double> pairs[] = {{0.5551, 1.702}, {0.0559, 0.0171}, {0.1009, 0.0100}};
    const char* expected[] = {"+206.6%", "-69.4%", "-90.1%"};
    std::string shown;
    for (int i = 0; i < 3; ++i) {
        const auto pct = percent_change(pairs[i].first, pairs[i].second);
        const auto text = pct ? format_percent_change(*pct) : "null";
        shown += (i ? " " : "") + text;
        o.require(text == expected[i], "got " + text + " for " + format_double(pairs[i].first) + " -> " +
                                           format_double(pairs[i].second));
    }
    const char* curated = std::getenv("GRIDRES_CURATED_DIR");
    if (curated && *curated) {
        try {
            curated_reproduction(o, curated);
        } catch (const std::exception& e) {
            o.require(false, std::string("curated reproduction: ") + e.what());
        }
        if (o.pass) o.detail = shown + "; curated reproduction matched";
    } else if (o.pass) {
        o.detail = shown + "; curated dataset not configured (GRIDRES_CURATED_DIR), full-value part skipped";
    }
    return o;
}

DesignMatrix lasso_problem(std::mt19937_64& rng, int n, int p, const std::vector<int>& support,
                           const std::vector<double>& beta) {
    std::normal_distribution<double> g(0.0, 1.0);
    DesignMatrix d;
    d.x.resize(n, p);
    d.y.resize(n);
    d.response_name = "y";
    for (int j = 0; j < p; ++j) d.names.push_back("v" + std::to_string(j));
    for (int i = 0; i < n; ++i) {
        for (int j = 0; j < p; ++j) d.x(i, j) = g(rng);
        double y = 0.5;
        for (std::size_t k = 0; k < support.size(); ++k) y += beta[k] * d.x(i, support[k]);
        d.y[i] = y + g(rng);
    }
    return d;
}

Outcome lasso_correctness() {
    Outcome o;
    const auto t0 = Clock::now();
    std::mt19937_64 rng(1369);

    {  // zero penalty against OLS
        const auto d = lasso_problem(rng, 80, 6, {0, 2}, {1.0, -2.0});
        const auto fit = lasso_fit(standardize(d), 0.0);
        const auto ols = testing::ols_normal_equations(d.x, d.y);
        double worst = std::abs(fit.intercept - ols(0));
        for (int j = 0; j < 6; ++j) worst = std::max(worst, std::abs(fit.coefficients[j] - ols(j + 1)));
        o.require(worst <= 1e-6, "lambda=0 vs OLS deviation " + format_double(worst));
    }
    {  // lambda_max
        const auto s = standardize(lasso_problem(rng, 60, 10, {3}, {1.0}));
        const double lmax = lambda_max(s);
        for (double lam : {lmax, 2.0 * lmax}) {
            const auto fit = lasso_fit(s, lam);
            bool zero = true;
            for (int j = 0; j < fit.coefficients_std.size(); ++j) zero = zero && fit.coefficients_std[j] == 0.0;
            o.require(zero, "nonzero coefficient at lambda >= lambda_max");
        }
    }
    {  // orthonormal design
        const int n = 100, p = 8;
        std::normal_distribution<double> g(0.0, 1.0);
        Eigen::MatrixXd a(n, p + 1);
        a.col(0).setOnes();
        for (int i = 0; i < n; ++i)
            for (int j = 1; j <= p; ++j) a(i, j) = g(rng);
        const Eigen::HouseholderQR<Eigen::MatrixXd> qr(a);
        const Eigen::MatrixXd q = qr.householderQ() * Eigen::MatrixXd::Identity(n, p + 1);
        StandardizedDesign s;
        s.x = std::sqrt(static_cast<double>(n)) * q.rightCols(p);
        s.y = 2.0 + 0.7 * s.x.col(1).array() - 0.4 * s.x.col(5).array() +
              0.3 * Eigen::ArrayXd::NullaryExpr(n, [&] { return g(rng); });
        s.means = Eigen::VectorXd::Zero(p);
        s.scales = Eigen::VectorXd::Ones(p);
        for (int j = 0; j < p; ++j) s.names.push_back("q" + std::to_string(j));
        for (int j = 0; j < p; ++j) s.source_columns.push_back(static_cast<std::size_t>(j));
        const Eigen::VectorXd yc = s.y.array() - s.y.mean();
        const Eigen::VectorXd z = s.x.transpose() * yc / static_cast<double>(n);
        double worst = 0.0;
        for (double lam : {0.0, 0.02, 0.1, 0.3, 0.6}) {
            const auto fit = lasso_fit(s, lam);
            for (int j = 0; j < p; ++j) {
                const double ref = (z[j] > 0 ? 1.0 : -1.0) * std::max(std::abs(z[j]) - lam, 0.0);
                worst = std::max(worst, std::abs(fit.coefficients_std[j] - ref));
            }
        }
        o.require(worst <= 1e-8, "orthonormal oracle deviation " + format_double(worst));
    }

    int recovered = 0;
    for (int trial = 0; trial < 100; ++trial) {
        std::uniform_int_distribution<int> pick(0, 40);
        std::set<int> chosen;
        while (chosen.size() < 3) chosen.insert(pick(rng));
        const std::vector<int> support(chosen.begin(), chosen.end());
        const auto d = lasso_problem(rng, 200, 41, support, {1.0, -0.8, 0.6});
        CvOptions cv;
        cv.folds = 10;
        cv.seed = static_cast<std::uint64_t>(trial) + 1;
        const auto curve = cv_select(d, cv);
        const auto s = standardize(d);
        const auto fit = lasso_fit(s, curve.chosen_lambda);
        std::set<std::size_t> active;
        for (auto j : fit.active) active.insert(s.source_columns[j]);
        bool all = true;
        for (int j : support) all = all && active.count(static_cast<std::size_t>(j));
        recovered += all;
    }
    const double elapsed = seconds_since(t0);
    o.require(recovered >= 95, "support recovered in " + std::to_string(recovered) + "/100 trials");
    o.require(elapsed < 60.0, "runtime " + format_double(elapsed) + " s");
    if (o.pass) {
        o.detail = "support recovered " + std::to_string(recovered) + "/100, " + format_double(elapsed) + " s";
    }
    return o;
}

Outcome student_t() {
    Outcome o;
    double worst = 0.0;
    std::size_t points = 0;
    for (const auto& r : testing::kStudentTReference) {
        worst = std::max(worst, std::abs(student_t_cdf(r.t, r.df) - r.cdf));
        ++points;
    }
    o.require(points == 50, "reference has " + std::to_string(points) + " points");
    o.require(worst <= 1e-8, "max deviation " + format_double(worst));
    if (o.pass) o.detail = "50 points, max deviation " + format_double(worst);
    return o;
}

// Writes the engineered MED fixture plus a design matrix into `dir` and
// returns the config overrides for a full report run.
std::vector<std::string> write_report_inputs(const fs::path& dir) {
    fs::create_directories(dir);
    const auto f = testing::engineered_med_fixture();
    {
        std::ofstream out(dir / "events.tsv", std::ios::binary);
        write_canonical_events(out, f.events);
    }
    {
        std::ofstream out(dir / "customers.csv", std::ios::binary);
        out << "State,Year,Number of Customers\n";
        for (int y = 2014; y <= 2016; ++y) out << "CA," << y << ',' << static_cast<long>(f.n_t) << '\n';
    }
    {
        std::mt19937_64 rng(1370);
        std::normal_distribution<double> g(0.0, 1.0);
        std::ofstream out(dir / "design.csv", std::ios::binary);
        out << "state,saidi";
        for (int j = 0; j < 12; ++j) out << ",p" << j;
        out << '\n';
        for (int i = 0; i < 48; ++i) {
            std::vector<double> x(12);
            for (auto& v : x) v = g(rng);
            out << "S" << i << ',' << format_double(1.0 + 2.0 * x[0] - 1.0 * x[4] + 0.5 * g(rng));
            for (double v : x) out << ',' << format_double(v);
            out << '\n';
        }
    }
    return {"events=" + (dir / "events.tsv").string(),
            "customer_table=" + (dir / "customers.csv").string(),
            "design_matrix=" + (dir / "design.csv").string(),
            "taxonomy=" + std::string(GRIDRES_TAXONOMY_FILE),
            "select.response=saidi",
            "select.id_column=state",
            "scope.state=CA",
            "group_by=cause",
            "med.years=2015-2016",
            "med.window_years=1",
            "seed=20",
            "out_dir=" + (dir / "out").string()};
}

Outcome med_calibration() {
    Outcome o;
    {
        std::mt19937_64 rng(1371);
        std::lognormal_distribution<double> ln(-3.5, 1.2);
        const int n = 100000;
        DailySaidiSeries history, fresh;
        const std::chrono::sys_days start{std::chrono::year(1750) / 1 / 1};
        for (int i = 0; i < n; ++i) {
            history.push_back({Date{start + std::chrono::days(i)}, ln(rng)});
            fresh.push_back({Date{start + std::chrono::days(i)}, ln(rng)});
        }
        const auto th = med_threshold_over(history, history.front().date, history.back().date);
        std::size_t exceed = 0;
        for (const auto& d : classify_days(fresh, th)) exceed += d.is_med;
        const double p = normal_cdf(-2.5);
        const double sigma = std::sqrt(p * (1 - p) / n);
        const double rate = static_cast<double>(exceed) / n;
        o.require(std::abs(rate - p) <= 3.0 * sigma,
                  "exceedance " + format_double(rate) + " vs " + format_double(p) + " +- " + format_double(3 * sigma));
        o.detail = "exceedance " + format_double(rate);
    }
    {
        DailySaidiSeries flat;
        const std::chrono::sys_days start{std::chrono::year(2000) / 1 / 1};
        for (int i = 0; i < 730; ++i) flat.push_back({Date{start + std::chrono::days(i)}, 0.042});
        MedOptions opt;
        opt.window_years = 1;
        const auto th = med_threshold(flat, 2001, opt);
        std::size_t meds = 0;
        for (const auto& d : classify_days(flat, th)) meds += d.is_med;
        o.require(meds == 0, "constant series produced " + std::to_string(meds) + " MEDs");
    }
    try {
        const auto dir = fs::temp_directory_path() / "gridres_acceptance_med";
        fs::remove_all(dir);
        const auto config = load_run_config(std::nullopt, write_report_inputs(dir));
        const auto bundle = run_stage(config, Stage::Med);
        const auto& thresholds = bundle.files.at("med_thresholds.tsv");
        const auto& compare = bundle.files.at("med_compare.tsv");
        std::size_t missed = 0;
        std::istringstream lines(compare);
        for (std::string line; std::getline(lines, line);) {
            if (line.ends_with("\tinfluence_only")) ++missed;
        }
        o.require(bundle.agreement && bundle.agreement->influence_only >= 1 && missed >= 1,
                  "engineered fixture shows no MED-miss/influence-catch event");
        std::string inflation;
        std::istringstream tl(thresholds);
        for (std::string line; std::getline(tl, line);) {
            if (line.starts_with("2016\t")) inflation = split(line, '\t')[8];
        }
        if (o.pass) {
            o.detail += "; constant series 0 MEDs; fixture threshold inflation " + inflation + ", " +
                        std::to_string(missed) + " event(s) caught by influence only";
        }
    } catch (const std::exception& e) {
        o.require(false, std::string("engineered fixture: ") + e.what());
    }
    return o;
}

Outcome etl_golden() {
    Outcome o;
    const auto table = read_delimited_file(std::string(GRIDRES_TEST_DATA) + "/oe417_sample.csv");
    const auto result = clean_events(parse_outage_table(table), taxonomy());
    std::ostringstream events, rejections;
    write_canonical_events(events, result.events);
    write_rejection_log(rejections, result.rejections);
    o.require(events.str() == slurp(fs::path(GRIDRES_GOLDEN_DIR) / "events.tsv"), "events.tsv differs from golden");
    o.require(rejections.str() == slurp(fs::path(GRIDRES_GOLDEN_DIR) / "rejections.tsv"),
              "rejections.tsv differs from golden");

    std::mt19937_64 rng(1372);
    std::uniform_int_distribution<std::size_t> rows(1, 60);
    for (int trial = 0; trial < 1000 && o.pass; ++trial) {
        std::istringstream in(testing::random_outage_csv(rng, rows(rng)));
        const auto records = parse_outage_table(in);
        const auto first = clean_events(records, taxonomy());
        std::set<std::size_t> seen;
        for (const auto& ev : first.events) seen.insert(ev.source_row);
        const std::size_t kept = seen.size();
        for (const auto& r : first.rejections) seen.insert(r.row_number);
        o.require(seen.size() == records.size() && kept + first.rejections.size() == records.size(),
                  "count conservation failed in trial " + std::to_string(trial));
        std::vector<RawOutageRecord> again;
        for (const auto& ev : first.events) again.push_back(to_raw_record(ev));
        const auto second = clean_events(again, taxonomy());
        o.require(second.rejections.empty() && second.events == first.events,
                  "idempotence failed in trial " + std::to_string(trial));
    }
    if (o.pass) o.detail = "golden files identical; 1000 fuzzed tables idempotent and conserving";
    return o;
}

Outcome determinism() {
    Outcome o;
    try {
        const auto dir = fs::temp_directory_path() / "gridres_acceptance_det";
        fs::remove_all(dir);
        auto overrides = write_report_inputs(dir);
        const auto config_a = load_run_config(std::nullopt, overrides);
        overrides.push_back("out_dir=" + (dir / "out_b").string());
        const auto config_b = load_run_config(std::nullopt, overrides);
        write_bundle(config_a, run_stage(config_a, Stage::Report));
        write_bundle(config_b, run_stage(config_b, Stage::Report));
        std::size_t files = 0;
        for (const auto& entry : fs::directory_iterator(config_a.out_dir)) {
            ++files;
            const auto other = config_b.out_dir / entry.path().filename();
            o.require(fs::exists(other) && slurp(entry.path()) == slurp(other),
                      entry.path().filename().string() + " differs between runs");
        }
        std::size_t files_b = 0;
        for ([[maybe_unused]] const auto& entry : fs::directory_iterator(config_b.out_dir)) ++files_b;
        o.require(files == files_b, "file sets differ");
        o.require(fs::exists(config_a.out_dir / "selection.tsv") && fs::exists(config_a.out_dir / "med.tsv"),
                  "report bundle is missing the selection or MED tables");
        if (o.pass) o.detail = std::to_string(files) + " files byte-identical across two runs";
    } catch (const std::exception& e) {
        o.require(false, e.what());
    }
    return o;
}

}  // namespace

int main() {
    struct Criterion {
        const char* name;
        std::function<Outcome()> run;
    };
    const Criterion criteria[] = {
        {"slope-metric identity", slope_identity},
        {"metric algebra", metric_algebra},
        {"influence leave-one-out oracle", influence_oracle},
        {"excision percent format", excision_format},
        {"lasso correctness and recovery", lasso_correctness},
        {"student-t reference values", student_t},
        {"MED calibration and detector divergence", med_calibration},
        {"ETL golden files, idempotence, conservation", etl_golden},
        {"report determinism", determinism},
    };
    int failed = 0;
    int index = 0;
    for (const auto& c : criteria) {
        ++index;
        Outcome o;
        try {
            o = c.run();
        } catch (const std::exception& e) {
            o.pass = false;
            o.detail = std::string("unexpected error: ") + e.what();
        }
        failed += !o.pass;
        std::printf("%s criterion %d (%s): %s\n", o.pass ? "PASS" : "FAIL", index, c.name, o.detail.c_str());
        std::fflush(stdout);
    }
    std::printf("%d/%d criteria passed\n", index - failed, index);
    return failed == 0 ? 0 : 1;
}
