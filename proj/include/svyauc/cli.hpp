#pragma once

#include <CLI11.hpp>
#include <json.hpp>

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <memory>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "svyauc/error.hpp"
#include "svyauc/inference.hpp"
#include "svyauc/replicates.hpp"
#include "svyauc/simgen.hpp"
#include "svyauc/survey_frame.hpp"
#include "svyauc/wauc.hpp"
#include "svyauc/wlogit.hpp"

#ifndef SVYAUC_VERSION
#define SVYAUC_VERSION "0.0.0"
#endif

namespace svyauc::cli {

inline constexpr const char* version = SVYAUC_VERSION;

enum ExitCode : int {
    exit_ok = 0,
    exit_internal = 1,
    exit_input = 2,
    exit_numerical = 3,
    exit_degenerate = 4,
};

struct RunConfig {
    std::string subcommand;
    std::string data;
    std::string data2;
    CsvSchema schema;
    std::vector<std::string> covariates;
    std::vector<std::string> covariates2;
    std::string score_col;
    std::string method = "jkn";
    std::string interval = "normal";
    double alpha = 0.05;
    std::vector<double> alphas{0.01, 0.05, 0.1};
    std::size_t replicates = 1000;
    std::uint64_t seed = 1;
    std::string out;
    std::string dump_replicates;
    unsigned threads = 1;
    int scenario = 1;
    std::size_t runs = 500;
    std::string scenarios_path;
    std::vector<std::size_t> clusters;
    std::vector<std::string> sizes;
};

inline int exit_code_for(const Error& e) {
    switch (e.kind()) {
    case ErrorKind::input: return exit_input;
    case ErrorKind::numerical: return exit_numerical;
    case ErrorKind::degenerate: return exit_degenerate;
    }
    return exit_internal;
}

namespace detail {

using nlohmann::json;

inline json config_echo(const RunConfig& c) {
    json j;
    j["subcommand"] = c.subcommand;
    if (!c.data.empty()) j["data"] = c.data;
    if (!c.data2.empty()) j["data2"] = c.data2;
    j["schema"] = {{"stratum", c.schema.stratum_col},
                   {"psu", c.schema.psu_col},
                   {"weight", c.schema.weight_col},
                   {"outcome", c.schema.outcome_col}};
    if (!c.covariates.empty()) j["covariates"] = c.covariates;
    if (!c.covariates2.empty()) j["covariates2"] = c.covariates2;
    if (!c.score_col.empty()) j["score_col"] = c.score_col;
    j["method"] = c.method;
    j["ci"] = c.interval;
    j["alpha"] = c.alpha;
    j["B"] = c.replicates;
    j["threads"] = c.threads;
    if (c.subcommand == "simulate") {
        j["scenario"] = c.scenario;
        j["runs"] = c.runs;
        j["alphas"] = c.alphas;
        if (!c.clusters.empty()) j["a_h"] = c.clusters;
        if (!c.sizes.empty()) j["sizes"] = c.sizes;
    }
    return j;
}

inline json envelope(const RunConfig& c) {
    json j;
    j["tool"] = "svyauc";
    j["version"] = version;
    j["seed"] = c.seed;
    j["config"] = config_echo(c);
    return j;
}

inline Method require_method(const std::string& name) {
    const auto m = parse_method(name);
    if (!m) throw InvalidArgumentError("unknown method '" + name + "' (expected jkn, rb, rbn or trb)");
    return *m;
}

inline SurveyFrame load(const RunConfig& c, const std::string& path, const std::vector<std::string>& extra) {
    if (path.empty()) throw InvalidArgumentError("--data is required");
    CsvSchema schema = c.schema;
    schema.covariate_cols.clear();
    for (const auto& list : {c.covariates, c.covariates2, extra}) {
        for (const auto& name : list) {
            if (std::find(schema.covariate_cols.begin(), schema.covariate_cols.end(), name) ==
                schema.covariate_cols.end()) {
                schema.covariate_cols.push_back(name);
            }
        }
    }
    return load_survey_csv(path, schema);
}

inline std::vector<std::size_t> covariate_indices(const SurveyFrame& frame, const std::vector<std::string>& names) {
    std::vector<std::size_t> idx;
    for (const auto& name : names) {
        const auto k = frame.covariate_index(name);
        if (!k) throw MissingColumnError(name);
        idx.push_back(*k);
    }
    return idx;
}

inline json interval_json(const ConfidenceInterval& ci) {
    return json{{"construction", ci.construction == IntervalKind::normal ? "normal" : "percentile"},
                {"level", ci.level},
                {"lower", ci.lower},
                {"upper", ci.upper},
                {"outside_unit_interval", ci.outside_unit_interval}};
}

inline json test_json(const TestResult& t) {
    return json{{"method", std::string(to_string(t.method))},
                {"pairing", t.pairing == Pairing::paired ? "paired" : "independent"},
                {"d_hat", t.d_hat},
                {"variance_d", t.variance_d},
                {"se", std::sqrt(t.variance_d)},
                {"z", t.z},
                {"p_value", t.p_value},
                {"reject", t.reject},
                {"replicates", {{"used", t.n_used_replicates}, {"degenerate", t.degenerate_replicates}}}};
}

inline void validate_interval_choice(const RunConfig& c, Method method) {
    if (c.interval != "normal" && c.interval != "percentile") {
        throw InvalidArgumentError("--ci must be 'normal' or 'percentile'");
    }
    if (c.interval == "percentile" && !is_bootstrap(method)) {
        throw InvalidArgumentError("--ci percentile is defined for bootstrap methods only (not jkn)");
    }
}

inline void maybe_dump(const RunConfig& c, const ReplicateWeightSet& set) {
    if (c.dump_replicates.empty()) return;
    std::ofstream out(c.dump_replicates);
    if (!out) throw InputError("cannot write '" + c.dump_replicates + "'");
    write_replicates_csv(set, out);
}

inline int run_fit(const RunConfig& c, std::ostream& out) {
    if (c.covariates.empty()) throw InvalidArgumentError("--covariate-cols is required");
    const SurveyFrame frame = load(c, c.data, {});
    const FittedModel model = fit_pseudo_likelihood(frame, covariate_indices(frame, c.covariates));
    json j = envelope(c);
    std::vector<std::string> terms{"(Intercept)"};
    terms.insert(terms.end(), c.covariates.begin(), c.covariates.end());
    j["n"] = frame.n();
    j["terms"] = terms;
    j["beta"] = model.beta;
    j["max_abs_score"] = model.max_abs_score;
    j["iterations"] = model.iterations;
    j["converged"] = model.converged;
    out << j.dump(2) << '\n';
    return exit_ok;
}

inline std::vector<double> scores_for(const RunConfig& c, const SurveyFrame& frame) {
    if (!c.score_col.empty()) {
        const auto k = frame.covariate_index(c.score_col);
        if (!k) throw MissingColumnError(c.score_col);
        std::vector<double> s(frame.n());
        for (std::size_t i = 0; i < frame.n(); ++i) s[i] = frame.covariate(i, *k);
        return s;
    }
    if (c.covariates.empty()) throw InvalidArgumentError("give --covariate-cols to fit a model or --score-col");
    return fit_pseudo_likelihood(frame, covariate_indices(frame, c.covariates)).probs;
}

inline int run_auc(const RunConfig& c, std::ostream& out) {
    const SurveyFrame frame =
        load(c, c.data, c.score_col.empty() ? std::vector<std::string>{} : std::vector<std::string>{c.score_col});
    const auto scores = scores_for(c, frame);
    json j = envelope(c);
    j["n"] = frame.n();
    j["score_source"] = c.score_col.empty() ? "fit" : "column";
    j["auc"] = weighted_auc(frame, scores);
    out << j.dump(2) << '\n';
    return exit_ok;
}

inline int run_ci(const RunConfig& c, std::ostream& out) {
    const Method method = require_method(c.method);
    validate_interval_choice(c, method);
    const SurveyFrame frame =
        load(c, c.data, c.score_col.empty() ? std::vector<std::string>{} : std::vector<std::string>{c.score_col});
    const auto scores = scores_for(c, frame);
    const auto set = replicate_weights(frame, method, c.replicates, ResampleRng{c.seed, 0});
    maybe_dump(c, set);
    const AucEstimate est = estimate_auc(frame, scores, set, c.threads);
    const ConfidenceInterval ci = c.interval == "normal" ? ci_normal(est, c.alpha) : ci_percentile(est, c.alpha);

    json j = envelope(c);
    j["n"] = frame.n();
    j["method"] = std::string(to_string(method));
    j["point"] = est.point;
    j["variance"] = est.variance;
    j["se"] = est.se();
    j["alpha"] = c.alpha;
    j["interval"] = interval_json(ci);
    j["replicates"] = {{"count", est.replicate_aucs.size()},
                       {"used", est.n_used_replicates},
                       {"degenerate", est.degenerate_replicates}};
    out << j.dump(2) << '\n';
    return exit_ok;
}

inline int run_compare_indep(const RunConfig& c, std::ostream& out) {
    const Method method = require_method(c.method);
    if (c.data2.empty()) throw InvalidArgumentError("--data2 is required for compare-indep");
    if (c.covariates.empty()) throw InvalidArgumentError("--covariate-cols is required");
    const SurveyFrame f1 = load(c, c.data, {});
    const SurveyFrame f2 = load(c, c.data2, {});
    const auto m1 = fit_pseudo_likelihood(f1, covariate_indices(f1, c.covariates));
    const auto m2 = fit_pseudo_likelihood(f2, covariate_indices(f2, c.covariates));
    const auto e1 = estimate_auc(f1, m1.probs, method, c.replicates, ResampleRng{c.seed, 0}, c.threads);
    const auto e2 = estimate_auc(f2, m2.probs, method, c.replicates, ResampleRng{c.seed, 1}, c.threads);
    const TestResult t = test_independent(e1, e2, c.alpha);

    json j = envelope(c);
    j["auc1"] = {{"point", e1.point}, {"se", e1.se()}, {"n", f1.n()}};
    j["auc2"] = {{"point", e2.point}, {"se", e2.se()}, {"n", f2.n()}};
    j["alpha"] = c.alpha;
    j["test"] = test_json(t);
    out << j.dump(2) << '\n';
    return exit_ok;
}

inline int run_compare_paired(const RunConfig& c, std::ostream& out) {
    const Method method = require_method(c.method);
    if (c.covariates.empty() || c.covariates2.empty()) {
        throw InvalidArgumentError("--covariate-cols and --covariate-cols2 are required for compare-paired");
    }
    const SurveyFrame frame = load(c, c.data, {});
    const auto m1 = fit_pseudo_likelihood(frame, covariate_indices(frame, c.covariates));
    const auto m2 = fit_pseudo_likelihood(frame, covariate_indices(frame, c.covariates2));
    const auto set = replicate_weights(frame, method, c.replicates, ResampleRng{c.seed, 0});
    maybe_dump(c, set);
    const TestResult t = test_paired(frame, m1.probs, m2.probs, set, c.alpha, c.threads);

    json j = envelope(c);
    j["n"] = frame.n();
    j["auc1"] = weighted_auc(frame, m1.probs);
    j["auc2"] = weighted_auc(frame, m2.probs);
    j["alpha"] = c.alpha;
    j["test"] = test_json(t);
    out << j.dump(2) << '\n';
    return exit_ok;
}

inline int run_dump_replicates(const RunConfig& c, std::ostream& out) {
    const Method method = require_method(c.method);
    const SurveyFrame frame = load(c, c.data, {});
    const auto set = replicate_weights(frame, method, c.replicates, ResampleRng{c.seed, 0});
    if (c.out.empty()) {
        write_replicates_csv(set, out);
    } else {
        std::ofstream file(c.out);
        if (!file) throw InputError("cannot write '" + c.out + "'");
        write_replicates_csv(set, file);
    }
    return exit_ok;
}

inline std::string csv_banner(const RunConfig& c, const MonteCarloReport& r) {
    std::ostringstream s;
    s << "# svyauc " << version << " scenario=" << r.scenario << " runs=" << r.runs << " B=" << r.replicates
      << " seed=" << r.seed << '\n';
    s << "# config " << config_echo(c).dump() << '\n';
    return s.str();
}

} // namespace detail

/// summary.csv: one row per (a_h, size, method, construction, alpha).
inline void write_summary_csv(const MonteCarloReport& report, const std::string& banner, std::ostream& out) {
    out << banner;
    out << "scenario,a_h,size,method,construction,alpha,metric,value,mc_se,runs_used,failures\n";
    for (const auto& r : report.rows) {
        out << report.scenario << ',' << r.clusters_per_stratum << ',' << r.size_label << ',' << to_string(r.method)
            << ',' << r.construction << ',' << svyauc::detail::format_double(r.alpha) << ',' << r.metric << ','
            << svyauc::detail::format_double(r.value) << ',' << svyauc::detail::format_double(r.mc_se) << ','
            << r.runs_used << ',' << r.failures << '\n';
    }
}

/// se_samples.csv: per-run standard errors for density plots.
inline void write_se_samples_csv(const MonteCarloReport& report, const std::string& banner, std::ostream& out) {
    out << banner;
    out << "scenario,run,a_h,size,method,estimate,se\n";
    for (const auto& s : report.se_samples) {
        out << report.scenario << ',' << s.run << ',' << s.clusters_per_stratum << ',' << s.size_label << ','
            << to_string(s.method) << ',' << svyauc::detail::format_double(s.estimate) << ','
            << svyauc::detail::format_double(s.se) << '\n';
    }
}

namespace detail {

inline int run_simulate(const RunConfig& c, std::ostream& out) {
    if (c.out.empty()) throw InvalidArgumentError("--out directory is required for simulate");
    std::string registry_path = c.scenarios_path;
#ifdef SVYAUC_DEFAULT_SCENARIOS
    if (registry_path.empty()) registry_path = default_scenario_path();
#endif
    if (registry_path.empty()) throw InvalidArgumentError("--scenarios is required");
    const auto registry = load_scenarios(registry_path);
    const ScenarioSpec spec = find_scenario(registry, c.scenario);

    SimulationOptions options;
    options.runs = c.runs;
    options.replicates = c.replicates;
    options.seed = c.seed;
    options.alphas = c.alphas;
    options.threads = c.threads;
    for (const auto& scheme : spec.schemes) {
        const bool cluster_ok = c.clusters.empty() ||
                                std::find(c.clusters.begin(), c.clusters.end(), scheme.clusters_per_stratum) !=
                                    c.clusters.end();
        const bool size_ok = c.sizes.empty() || std::find(c.sizes.begin(), c.sizes.end(), scheme.label) != c.sizes.end();
        if (cluster_ok && size_ok) options.schemes.push_back(scheme);
    }
    if (options.schemes.empty()) throw InvalidArgumentError("no sampling scheme matches --a-h / --sizes");

    const auto pops = build_populations(spec, options.seed);
    const MonteCarloReport report = run_scenario(spec, pops, options);

    namespace fs = std::filesystem;
    fs::create_directories(c.out);
    const std::string banner = csv_banner(c, report);
    {
        std::ofstream f(fs::path(c.out) / "summary.csv");
        if (!f) throw InputError("cannot write summary.csv in '" + c.out + "'");
        write_summary_csv(report, banner, f);
    }
    {
        std::ofstream f(fs::path(c.out) / "se_samples.csv");
        if (!f) throw InputError("cannot write se_samples.csv in '" + c.out + "'");
        write_se_samples_csv(report, banner, f);
    }

    json meta = envelope(c);
    json scenario;
    scenario["id"] = spec.id;
    scenario["description"] = spec.description;
    scenario["contrast"] = std::string(to_string(spec.contrast));
    json populations = json::array();
    for (std::size_t k = 0; k < pops.size(); ++k) {
        json p;
        p["mu1"] = std::vector<double>(spec.populations[k].mu1.data(),
                                       spec.populations[k].mu1.data() + spec.populations[k].mu1.size());
        p["size"] = spec.populations[k].size;
        p["population_auc"] = pops[k].auc;
        p["events"] = pops[k].frame.event_count();
        populations.push_back(p);
    }
    scenario["populations"] = populations;
    json models = json::array();
    for (const auto& m : spec.models) {
        json names = json::array();
        for (std::size_t k : m) names.push_back("X" + std::to_string(k + 1));
        models.push_back(names);
    }
    scenario["models"] = models;
    json targets = json::array();
    for (const auto& t : spec.targets) {
        targets.push_back({{"population", t.population}, {"model", t.model}, {"auc", t.auc}});
    }
    scenario["reference_auc"] = targets;
    scenario["population_auc"] = report.population_auc;
    json schemes = json::array();
    for (const auto& s : options.schemes) {
        schemes.push_back({{"a_h", s.clusters_per_stratum},
                           {"size", s.label},
                           {"units_per_cluster", s.units_per_cluster},
                           {"sample_size", s.sample_size()}});
    }
    scenario["schemes"] = schemes;
    meta["scenario"] = scenario;
    json failures = json::object();
    failures["fits"] = report.failed_fits;
    json per_method = json::array();
    for (const auto& r : report.rows) {
        if (std::fabs(r.alpha - options.alphas.front()) > 1e-12 || (r.construction == "percentile")) continue;
        per_method.push_back({{"a_h", r.clusters_per_stratum},
                              {"size", r.size_label},
                              {"method", std::string(to_string(r.method))},
                              {"failures", r.failures}});
    }
    failures["per_method"] = per_method;
    meta["failures"] = failures;
    {
        std::ofstream f(fs::path(c.out) / "meta.json");
        if (!f) throw InputError("cannot write meta.json in '" + c.out + "'");
        f << meta.dump(2) << '\n';
    }

    json summary = envelope(c);
    summary["out"] = c.out;
    summary["rows"] = report.rows.size();
    summary["failed_fits"] = report.failed_fits;
    out << summary.dump(2) << '\n';
    return exit_ok;
}

} // namespace detail

/// Executes one subcommand. Named errors are reported on `err` and mapped to exit codes:
/// 2 input, 3 numerical, 4 degenerate replicates.
inline int dispatch(const RunConfig& c, std::ostream& out, std::ostream& err) {
    try {
        if (c.subcommand == "fit") return detail::run_fit(c, out);
        if (c.subcommand == "auc") return detail::run_auc(c, out);
        if (c.subcommand == "ci") return detail::run_ci(c, out);
        if (c.subcommand == "compare-indep") return detail::run_compare_indep(c, out);
        if (c.subcommand == "compare-paired") return detail::run_compare_paired(c, out);
        if (c.subcommand == "simulate") return detail::run_simulate(c, out);
        if (c.subcommand == "dump-replicates") return detail::run_dump_replicates(c, out);
        err << "error: unknown subcommand '" << c.subcommand << "'\n";
        return exit_input;
    } catch (const Error& e) {
        err << "error: " << e.what() << '\n';
        return exit_code_for(e);
    }
}

/// Result of command-line parsing: a config, or an exit code when parsing already finished
/// (help, version, or a usage error).
struct ParsedArgs {
    std::optional<RunConfig> config;
    int exit_code = exit_ok;
};

inline ParsedArgs parse_command_line(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
    CLI::App app{"Design-based inference for the AUC of logistic models on complex survey data", "svyauc"};
    app.set_version_flag("--version", std::string("svyauc ") + version);
    app.require_subcommand(1);

    auto config = std::make_shared<RunConfig>();
    RunConfig& c = *config;

    auto add_schema = [&](CLI::App* sub) {
        sub->add_option("--data", c.data, "survey CSV (header row required)")->required();
        sub->add_option("--stratum-col", c.schema.stratum_col, "stratum column")->capture_default_str();
        sub->add_option("--psu-col", c.schema.psu_col, "PSU column")->capture_default_str();
        sub->add_option("--weight-col", c.schema.weight_col, "sampling weight column")->capture_default_str();
        sub->add_option("--outcome-col", c.schema.outcome_col, "binary outcome column")->capture_default_str();
        sub->add_option("--id-col", c.schema.id_col, "unit id column (optional)");
    };
    auto add_covariates = [&](CLI::App* sub, bool required) {
        auto* opt = sub->add_option("--covariate-cols", c.covariates, "model covariates, comma separated")
                        ->delimiter(',');
        if (required) opt->required();
    };
    auto add_resampling = [&](CLI::App* sub) {
        sub->add_option("--method", c.method, "jkn, rb, rbn or trb")->capture_default_str();
        sub->add_option("--B", c.replicates, "bootstrap replicates")->capture_default_str();
        sub->add_option("--seed", c.seed, "master seed")->capture_default_str();
        sub->add_option("--threads", c.threads, "worker threads")->capture_default_str();
    };
    auto add_alpha = [&](CLI::App* sub) {
        sub->add_option("--alpha", c.alpha, "significance level")->capture_default_str();
    };

    auto* fit = app.add_subcommand("fit", "fit the weighted logistic model");
    add_schema(fit);
    add_covariates(fit, true);

    auto* auc = app.add_subcommand("auc", "weighted AUC of a fitted model or a score column");
    add_schema(auc);
    add_covariates(auc, false);
    auc->add_option("--score-col", c.score_col, "use this column as the score instead of fitting");

    auto* ci = app.add_subcommand("ci", "confidence interval for the weighted AUC");
    add_schema(ci);
    add_covariates(ci, false);
    ci->add_option("--score-col", c.score_col, "use this column as the score instead of fitting");
    add_resampling(ci);
    add_alpha(ci);
    ci->add_option("--ci", c.interval, "normal or percentile")->capture_default_str();
    ci->add_option("--dump-replicates", c.dump_replicates, "write replicate weights to this CSV");

    auto* indep = app.add_subcommand("compare-indep", "compare AUCs of one model fitted on two independent samples");
    add_schema(indep);
    indep->add_option("--data2", c.data2, "second survey CSV")->required();
    add_covariates(indep, true);
    add_resampling(indep);
    add_alpha(indep);

    auto* paired = app.add_subcommand("compare-paired", "compare AUCs of two models fitted on the same sample");
    add_schema(paired);
    add_covariates(paired, true);
    paired->add_option("--covariate-cols2", c.covariates2, "second model covariates")->delimiter(',')->required();
    add_resampling(paired);
    add_alpha(paired);
    paired->add_option("--dump-replicates", c.dump_replicates, "write replicate weights to this CSV");

    auto* sim = app.add_subcommand("simulate", "Monte Carlo study of one scenario");
    sim->add_option("--scenario", c.scenario, "scenario id")->required();
    sim->add_option("--runs", c.runs, "Monte Carlo runs")->capture_default_str();
    sim->add_option("--B", c.replicates, "bootstrap replicates")->capture_default_str();
    sim->add_option("--seed", c.seed, "master seed")->capture_default_str();
    sim->add_option("--threads", c.threads, "worker threads")->capture_default_str();
    sim->add_option("--out", c.out, "output directory")->required();
    sim->add_option("--scenarios", c.scenarios_path, "scenario registry JSON");
    sim->add_option("--a-h", c.clusters, "clusters per stratum to run, comma separated")->delimiter(',');
    sim->add_option("--sizes", c.sizes, "sample size labels to run (n1,n2)")->delimiter(',');
    sim->add_option("--alphas", c.alphas, "significance levels")->delimiter(',');

    auto* dump = app.add_subcommand("dump-replicates", "write replicate weights as replicate,unit,weight CSV");
    add_schema(dump);
    add_resampling(dump);
    dump->add_option("--out", c.out, "output CSV (stdout when omitted)");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e, out, err);
        return ParsedArgs{std::nullopt, code == 0 ? exit_ok : exit_input};
    }
    for (auto* sub : app.get_subcommands()) c.subcommand = sub->get_name();
    return ParsedArgs{c, exit_ok};
}

inline int main(int argc, const char* const* argv, std::ostream& out = std::cout, std::ostream& err = std::cerr) {
    const ParsedArgs parsed = parse_command_line(argc, argv, out, err);
    if (!parsed.config) return parsed.exit_code;
    return dispatch(*parsed.config, out, err);
}

} // namespace svyauc::cli
