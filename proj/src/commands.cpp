#include "ssg/commands.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <iostream>
#include <numbers>
#include <sstream>

#include "CLI11.hpp"

#include "ssg/error.hpp"
#include "ssg/parallel.hpp"
#include "ssg/stats.hpp"

namespace ssg {

using nlohmann::json;
namespace fs = std::filesystem;

std::string format_number(double value)
{
    if (std::isnan(value))
        return "nan";
    if (std::isinf(value))
        return value > 0 ? "inf" : "-inf";
    char buf[64];
    auto const res = std::to_chars(buf, buf + sizeof(buf), value);
    return std::string(buf, res.ptr);
}

namespace {

void apply_overrides(ExperimentConfig& cfg, RunOptions const& opts)
{
    // --out is a run option like --workers and stays out of the recorded config.
    if (opts.seed)
        cfg.montecarlo.master_seed = *opts.seed;
}

bool wants(ExperimentConfig const& cfg, std::string const& format)
{
    auto const& f = cfg.output.formats;
    return std::find(f.begin(), f.end(), format) != f.end();
}

fs::path prepare_output(ExperimentConfig const& cfg, RunOptions const& opts)
{
    fs::path const dir = opts.out_dir ? *opts.out_dir : fs::path(cfg.output.directory);
    std::error_code ec;
    fs::create_directories(dir, ec);
    if (ec)
        throw ConfigError("output.directory", "cannot create " + dir.string() + ": " + ec.message());
    return dir;
}

void write_file(fs::path const& path, std::string const& content)
{
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out)
        throw RunFailure("cannot write " + path.string());
    out << content;
}

/// '#' provenance lines for the text tables.
std::string provenance_header(ExperimentConfig const& cfg)
{
    return std::string("# ") + artifact_version + "\n# config: " + to_json(cfg).dump() + "\n";
}

json provenance_json(ExperimentConfig const& cfg, TimeGrid const& grid)
{
    return json{{"version", artifact_version},
                {"config", to_json(cfg)},
                {"resolved_grid",
                 {{"T", grid.horizon()}, {"n_steps", grid.n_steps()}, {"h", grid.step()}}}};
}

json number_or_null(double v)
{
    return std::isfinite(v) ? json(v) : json(nullptr);
}

std::vector<double> check_weight(ExperimentConfig const& cfg, TimeGrid const& grid)
{
    std::vector<double> delta(grid.size(), 0.0);
    if (cfg.check.delta == "constant") {
        std::fill(delta.begin(), delta.end(), 1.0);
    } else if (cfg.check.delta == "spike") {
        delta[grid.n_steps() / 2] = 1.0;
    } else {
        auto engine = make_engine(mix64(cfg.check.seed, 0xde17a));
        delta = random_step_function(grid, engine);
    }
    return delta;
}

}  // namespace

ResolvedConstants resolve_constants(ExperimentConfig const& cfg, ExperimentSpec const& spec,
                                    unsigned workers)
{
    auto const& model = *spec.model;
    auto const norming = norming_diagonal(spec.norming, model, spec.theta_true, spec.grid);
    auto const sep = estimate_separation_constants(model, spec.theta_true, spec.grid, norming,
                                                   cfg.bounds.separation_pairs,
                                                   cfg.bounds.separation_seed, workers);
    ResolvedConstants rc;
    rc.c0_hat = sep.c0_hat;
    rc.c1_hat = sep.c1_hat;
    if (auto const* exp_model = dynamic_cast<ExponentialModel const*>(&model))
        rc.exp_constants = exp_model_constants(exp_model->regressors(), model.box(), spec.grid);

    double const c0 = cfg.bounds.c0_source == "theory" ? rc.exp_constants->c0_theory : rc.c0_hat;
    double const f0 = spec.noise.spectral_sup();
    rc.consts = make_stationary_constants(model.dimension(), c0, f0, cfg.bounds.beta,
                                          cfg.bounds.B_cal);
    return rc;
}

//---------------------------------------------------------------------------//
// simulate
//---------------------------------------------------------------------------//

int cmd_simulate(ExperimentConfig cfg, RunOptions const& opts, std::ostream& log)
{
    apply_overrides(cfg, opts);
    auto const spec = build_experiment(cfg);
    auto const& grid = spec.grid;
    double const h = grid.step();
    double const scale = spec.noise_scale;

    std::vector<std::size_t> lags;
    for (double lag_time : {0.0, h, 0.1, 0.25, 0.5, 1.0, 2.0, 5.0}) {
        auto const k = static_cast<std::size_t>(std::llround(lag_time / h));
        if (2 * k < grid.n_steps() && std::find(lags.begin(), lags.end(), k) == lags.end())
            lags.push_back(k);
    }
    std::sort(lags.begin(), lags.end());

    // Per-path time averages of ε(t)ε(t + lag), merged in index order.
    std::size_t const n_paths = spec.n_trials;
    std::vector<std::vector<double>> per_path(n_paths);
    parallel_for(n_paths, opts.workers, [&](std::size_t i) {
        auto const path = simulate_noise(spec.noise, grid, trial_seed(spec.master_seed, i));
        std::vector<double> stats(lags.size());
        for (std::size_t l = 0; l < lags.size(); ++l) {
            std::size_t const k = lags[l];
            double s = 0.0;
            for (std::size_t j = 0; j + k < path.values.size(); ++j)
                s += path.values[j] * path.values[j + k];
            stats[l] = scale * scale * s / static_cast<double>(path.values.size() - k);
        }
        per_path[i] = std::move(stats);
    });

    std::vector<double> taps;
    if (spec.noise.kernel) {
        auto const n_taps =
            static_cast<std::size_t>(std::floor(spec.noise.kernel->truncation_horizon() / h + 1e-9))
            + 1;
        for (std::size_t k = 0; k < n_taps; ++k)
            taps.push_back((*spec.noise.kernel)(static_cast<double>(k) * h));
    }

    json lag_rows = json::array();
    bool all_within = true;
    std::vector<double> column(n_paths);
    for (std::size_t l = 0; l < lags.size(); ++l) {
        std::size_t const k = lags[l];
        for (std::size_t i = 0; i < n_paths; ++i)
            column[i] = per_path[i][l];
        double const m = mean(column);
        double const se = n_paths > 1 ? std::sqrt(variance(column) / static_cast<double>(n_paths))
                                      : std::numeric_limits<double>::quiet_NaN();
        double continuous = 0.0;
        double discrete = 0.0;
        if (spec.noise.kernel) {
            continuous = covariance_of_filter(*spec.noise.kernel, static_cast<double>(k) * h);
            for (std::size_t i = 0; i + k < taps.size(); ++i)
                discrete += taps[i] * taps[i + k];
            discrete *= h;
        } else {
            continuous = discrete = k == 0 ? 1.0 / h : 0.0;
        }
        continuous *= scale * scale;
        discrete *= scale * scale;
        bool const within = std::isfinite(se) && std::abs(m - discrete) <= 4.0 * se + 1e-12;
        all_within = all_within && within;
        lag_rows.push_back({{"lag", static_cast<double>(k) * h},
                            {"lag_steps", k},
                            {"sample_covariance", m},
                            {"standard_error", number_or_null(se)},
                            {"theory_continuous", continuous},
                            {"theory_discrete", discrete},
                            {"within_4se", within}});
    }

    auto const dir = prepare_output(cfg, opts);
    std::size_t const n_files = std::min(cfg.output.path_files, n_paths);
    for (std::size_t i = 0; i < n_files; ++i) {
        std::uint64_t const seed = trial_seed(spec.master_seed, i);
        auto const path = simulate_noise(spec.noise, grid, seed);
        std::ostringstream os;
        os << provenance_header(cfg) << "# path_index: " << i << "\n# seed: " << seed
           << "\nt,epsilon\n";
        for (std::size_t j = 0; j < grid.size(); ++j)
            os << format_number(grid.node(j)) << ',' << format_number(scale * path.values[j])
               << '\n';
        write_file(dir / ("path_" + std::to_string(i) + ".csv"), os.str());
    }

    json summary = provenance_json(cfg, grid);
    summary["n_paths"] = n_paths;
    summary["driver"] = std::string(to_string(spec.noise.driver));
    summary["kernel"] = spec.noise.kernel ? spec.noise.kernel->describe() : "none";
    summary["lags"] = lag_rows;
    summary["all_within_4se"] = all_within;
    write_file(dir / "simulate_summary.json", summary.dump(2) + "\n");

    log << "simulate: " << n_paths << " paths, " << n_files << " path files, covariance "
        << (all_within ? "within" : "outside") << " 4 s.e. of theory\n";
    return exit_ok;
}

//---------------------------------------------------------------------------//
// tails
//---------------------------------------------------------------------------//

int cmd_tails(ExperimentConfig cfg, RunOptions const& opts, std::ostream& log)
{
    apply_overrides(cfg, opts);
    if (cfg.montecarlo.n_trials < 100)
        throw ConfigError("montecarlo.n_trials", "tail estimation needs at least 100 trials");
    auto const spec = build_experiment(cfg);
    auto rc = resolve_constants(cfg, spec, opts.workers);
    auto records = run_trials(spec, opts.workers);
    auto const& R_grid = cfg.montecarlo.R_grid;

    std::size_t n_cal = 0;
    TailEstimate tail;
    EnvelopeComparison cmp;
    if (cfg.bounds.B_cal_mode == "calibrate") {
        auto const planned = static_cast<std::size_t>(
            std::llround(cfg.bounds.calibration_fraction * static_cast<double>(records.size())));
        if (planned < 100 || records.size() - planned < 100)
            throw ConfigError("bounds.calibration_fraction",
                              "calibration and evaluation splits each need at least 100 trials");
        auto cal = calibrated_comparison(records, R_grid, rc.consts,
                                         cfg.bounds.calibration_fraction);
        n_cal = cal.n_calibration;
        rc.consts = cal.consts;
        tail = std::move(cal.evaluation);
        cmp = std::move(cal.comparison);
    } else {
        tail = estimate_tail(records, R_grid, &rc.consts);
        cmp = compare_with_envelope(tail, rc.consts);
    }

    std::size_t failed = 0;
    std::size_t boundary = 0;
    for (auto const& r : records) {
        failed += r.converged ? 0 : 1;
        boundary += r.boundary ? 1 : 0;
    }

    auto const dir = prepare_output(cfg, opts);
    auto const header = provenance_header(cfg);
    if (wants(cfg, "csv")) {
        std::ostringstream os;
        os << header << "R,count,n,p_hat,ci_low,ci_high,envelope,verdict\n";
        for (std::size_t k = 0; k < tail.R_grid.size(); ++k)
            os << format_number(tail.R_grid[k]) << ',' << tail.counts[k] << ',' << tail.n_trials
               << ',' << format_number(tail.p_hat[k]) << ',' << format_number(tail.ci_low[k])
               << ',' << format_number(tail.ci_high[k]) << ',' << format_number(cmp.envelope[k])
               << ',' << (cmp.level_pass[k] ? "pass" : "fail") << '\n';
        write_file(dir / "tails.csv", os.str());

        std::ostringstream trials;
        trials << header << "trial_index,trial_seed,theta_hat,deviation,converged,boundary\n";
        for (auto const& r : records) {
            trials << r.trial_index << ',' << r.trial_seed << ',';
            for (std::size_t i = 0; i < r.theta_hat.size(); ++i)
                trials << (i ? ";" : "") << format_number(r.theta_hat[i]);
            trials << ',' << format_number(r.deviation) << ',' << (r.converged ? 1 : 0) << ','
                   << (r.boundary ? 1 : 0) << '\n';
        }
        write_file(dir / "trials.csv", trials.str());
    }
    if (wants(cfg, "tsv")) {
        std::ostringstream os;
        os << header << "R_squared\tneg_log_p_hat\n";
        for (std::size_t k = 0; k < tail.R_grid.size(); ++k)
            if (tail.counts[k] > 0)
                os << format_number(tail.R_grid[k] * tail.R_grid[k]) << '\t'
                   << format_number(-std::log(tail.p_hat[k])) << '\n';
        write_file(dir / "tails.tsv", os.str());
    }
    if (wants(cfg, "json")) {
        auto const& c = rc.consts;
        json meta = provenance_json(cfg, spec.grid);
        meta["constants"] = {{"q", c.q},
                             {"c0", c.c0},
                             {"c0_hat", rc.c0_hat},
                             {"c1_hat", rc.c1_hat},
                             {"c0_source", cfg.bounds.c0_source},
                             {"d0", c.d0},
                             {"f0", number_or_null(c.f0.value_or(NAN))},
                             {"beta", c.beta},
                             {"max_beta", unslacked_rate(c.q, c.c0, c.d0)},
                             {"b", c.b},
                             {"B_cal", c.B_cal},
                             {"B_cal_mode", cfg.bounds.B_cal_mode}};
        if (rc.exp_constants)
            meta["constants"]["c0_theory"] = rc.exp_constants->c0_theory,
            meta["constants"]["c1_theory"] = rc.exp_constants->c1_theory;
        meta["tail"] = {{"R_grid", tail.R_grid},
                        {"counts", tail.counts},
                        {"n_trials", tail.n_trials},
                        {"n_calibration_trials", n_cal},
                        {"p_hat", tail.p_hat},
                        {"ci_low", tail.ci_low},
                        {"ci_high", tail.ci_high},
                        {"envelope", cmp.envelope},
                        {"fitted_rate", number_or_null(tail.fitted_rate)},
                        {"rate_levels", tail.rate_levels}};
        meta["verdict"] = {{"levels", cmp.level_pass},
                           {"rate", cmp.rate_pass},
                           {"overall", cmp.overall}};
        meta["fits"] = {{"failed", failed}, {"boundary", boundary}};
        meta["notes"] = {{"consistency_exponent", std::string(consistency_exponent_note)}};
        write_file(dir / "tails.json", meta.dump(2) + "\n");
    }

    log << "tails: " << tail.n_trials << " evaluation trials, b = " << format_number(rc.consts.b)
        << ", fitted rate = " << format_number(tail.fitted_rate) << ", verdict "
        << (cmp.overall ? "pass" : "fail") << '\n';
    return exit_ok;
}

//---------------------------------------------------------------------------//
// check
//---------------------------------------------------------------------------//

int cmd_check(ExperimentConfig cfg, RunOptions const& opts, std::ostream& log)
{
    apply_overrides(cfg, opts);
    auto const spec = build_experiment(cfg);
    auto const& grid = spec.grid;
    double const f0 = spec.noise.spectral_sup();
    double const d0 = d0_from_spectral(f0);

    auto const delta = check_weight(cfg, grid);
    double const norm_sq = inner_product(delta, delta, grid);
    if (!(norm_sq > 0.0))
        throw ConfigError("check.delta", "weight has zero norm on this grid");
    std::vector<double> lambdas = cfg.check.lambda_grid;
    if (lambdas.empty()) {
        double const lambda_max = std::sqrt(2.0 * 4.0 / (d0 * norm_sq));
        for (int i = 0; i <= 8; ++i)
            lambdas.push_back(lambda_max * i / 8.0);
    }
    MgfOptions mgf_opts;
    mgf_opts.n_rep = cfg.check.n_rep;
    auto const mgf =
        mgf_check(spec.noise, delta, grid, d0, lambdas, cfg.check.seed, mgf_opts, opts.workers);

    std::optional<QuadraticFormReport> qf;
    if (spec.noise.kernel)
        qf = quadratic_form_check(*spec.noise.kernel, grid, cfg.check.n_probe, cfg.check.seed);

    auto const& model = *spec.model;
    auto const norming = norming_diagonal(spec.norming, model, spec.theta_true, grid);
    auto const sep = estimate_separation_constants(model, spec.theta_true, grid, norming,
                                                   cfg.bounds.separation_pairs,
                                                   cfg.bounds.separation_seed, opts.workers);
    std::optional<ExpModelConstants> ec;
    if (auto const* exp_model = dynamic_cast<ExponentialModel const*>(&model))
        ec = exp_model_constants(exp_model->regressors(), model.box(), grid);

    json report = provenance_json(cfg, grid);
    json constants = {{"c0_hat", sep.c0_hat}, {"c1_hat", sep.c1_hat}, {"d0", d0}, {"f0", f0},
                      {"c0_theory", nullptr}, {"c1_theory", nullptr},
                      {"b1", nullptr},        {"b2", nullptr}};
    json verdicts = {{"mgf", mgf.overall}, {"quadratic_form", nullptr},
                     {"separation_bracket", nullptr}};
    if (ec) {
        constants["c0_theory"] = ec->c0_theory;
        constants["c1_theory"] = ec->c1_theory;
        constants["lambda_min"] = ec->lambda_min;
        constants["H"] = ec->H;
        constants["L"] = ec->L;
        verdicts["separation_bracket"] =
            sep.c0_hat >= ec->c0_theory * (1.0 - 0.01) && sep.c1_hat <= ec->c1_theory * (1.0 + 0.01);
    }
    if (qf) {
        constants["b1"] = qf->b1;
        constants["b2"] = qf->b2;
        verdicts["quadratic_form"] = qf->pass;
        report["quadratic_form"] = {{"n_probe", qf->forms.size()},
                                    {"max_ratio", qf->max_ratio},
                                    {"bounded_by_d0", qf->bounded},
                                    {"bounded_by_b1", qf->b1_bounded},
                                    {"bounded_by_b2", qf->b2_bounded},
                                    {"nonnegative", qf->nonnegative}};
    }
    json pass_list = json::array();
    for (bool p : mgf.pass)
        pass_list.push_back(p);
    report["mgf"] = {{"driver", std::string(to_string(spec.noise.driver))},
                     {"kernel", spec.noise.kernel ? spec.noise.kernel->describe() : "none"},
                     {"delta", cfg.check.delta},
                     {"delta_norm_sq", mgf.delta_norm_sq},
                     {"sample_variance", mgf.sample_variance},
                     {"lambda", mgf.lambda_grid},
                     {"empirical", mgf.empirical},
                     {"band_low", mgf.band_low},
                     {"band_high", mgf.band_high},
                     {"envelope", mgf.envelope},
                     {"pass", pass_list},
                     {"overall", mgf.overall}};
    report["constants"] = constants;
    report["verdicts"] = verdicts;

    auto const dir = prepare_output(cfg, opts);
    write_file(dir / "check_report.json", report.dump(2) + "\n");
    log << "check: mgf " << (mgf.overall ? "pass" : "fail");
    if (qf)
        log << ", quadratic form " << (qf->pass ? "pass" : "fail");
    log << ", c0_hat = " << format_number(sep.c0_hat) << '\n';
    return exit_ok;
}

//---------------------------------------------------------------------------//
// constants
//---------------------------------------------------------------------------//

int cmd_constants(ExperimentConfig cfg, RunOptions const& opts, std::ostream& out)
{
    apply_overrides(cfg, opts);
    auto const spec = build_experiment(cfg);
    auto const rc = resolve_constants(cfg, spec, opts.workers);
    auto const& c = rc.consts;
    json doc = {{"version", artifact_version},
                {"q", c.q},
                {"c0", c.c0},
                {"c0_hat", rc.c0_hat},
                {"c1_hat", rc.c1_hat},
                {"d0", c.d0},
                {"f0", number_or_null(c.f0.value_or(NAN))},
                {"beta", c.beta},
                {"max_beta", unslacked_rate(c.q, c.c0, c.d0)},
                {"b", c.b},
                {"B_cal", c.B_cal}};
    if (rc.exp_constants) {
        doc["c0_theory"] = rc.exp_constants->c0_theory;
        doc["c1_theory"] = rc.exp_constants->c1_theory;
        doc["H"] = rc.exp_constants->H;
        doc["L"] = rc.exp_constants->L;
        doc["lambda_min"] = rc.exp_constants->lambda_min;
    }
    out << doc.dump(2) << '\n';
    return exit_ok;
}

//---------------------------------------------------------------------------//
// CLI
//---------------------------------------------------------------------------//

int run_cli(std::vector<std::string> args, std::ostream& out, std::ostream& err)
{
    CLI::App app{"Large-deviation toolkit for least-squares estimation under sub-Gaussian noise",
                 "ssg-lse"};
    app.require_subcommand(1);

    std::string config_path;
    RunOptions opts;
    std::string out_dir;
    std::uint64_t seed = 0;
    auto add_common = [&](CLI::App* sub) {
        sub->add_option("--config", config_path, "experiment configuration (JSON)")->required();
        sub->add_option("--workers", opts.workers, "maximum worker threads")
            ->check(CLI::PositiveNumber);
        sub->add_option("--out", out_dir, "output directory (overrides output.directory)");
        sub->add_option("--seed", seed, "override montecarlo.master_seed");
    };
    auto* simulate = app.add_subcommand("simulate", "simulate noise paths and covariance summary");
    auto* tails = app.add_subcommand("tails", "Monte-Carlo tail estimate against the envelope");
    auto* check = app.add_subcommand("check", "sub-Gaussianity and condition checks");
    auto* constants = app.add_subcommand("constants", "print the bound constants of a config");
    for (auto* sub : {simulate, tails, check, constants})
        add_common(sub);

    std::vector<char*> argv;
    std::string program = "ssg-lse";
    argv.push_back(program.data());
    for (auto& a : args)
        argv.push_back(a.data());
    try {
        app.parse(static_cast<int>(argv.size()), argv.data());
    } catch (CLI::ParseError const& e) {
        int const code = app.exit(e, out, err);
        return code == 0 ? exit_ok : exit_config;
    }

    auto* active = app.get_subcommands().front();
    if (active->count("--out"))
        opts.out_dir = out_dir;
    if (active->count("--seed"))
        opts.seed = seed;

    try {
        auto cfg = load_config(config_path);
        if (active == simulate)
            return cmd_simulate(cfg, opts, out);
        if (active == tails)
            return cmd_tails(cfg, opts, out);
        if (active == check)
            return cmd_check(cfg, opts, out);
        return cmd_constants(cfg, opts, out);
    } catch (ConfigError const& e) {
        err << "config error: " << e.what() << '\n';
        return exit_config;
    } catch (SlackTooLarge const& e) {
        err << "config error: bounds.beta: " << e.what() << '\n';
        return exit_config;
    } catch (std::exception const& e) {
        err << "error: " << e.what() << '\n';
        return exit_runtime;
    }
}

}  // namespace ssg
