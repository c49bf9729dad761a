#include "ssg/config.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <set>

#include "ssg/error.hpp"

namespace ssg {

using nlohmann::json;

namespace {

/// Reads one JSON object section, remembering which keys were consumed so
/// that unknown (misspelt) keys are reported.
class SectionReader
{
  public:
    SectionReader(json const& doc, std::string prefix) : doc_(doc), prefix_(std::move(prefix))
    {
        if (!doc_.is_object())
            throw ConfigError(prefix_, "expected an object");
    }

    std::string field(std::string const& key) const
    {
        return prefix_.empty() ? key : prefix_ + "." + key;
    }

    template <class T>
    void read(std::string const& key, T& out)
    {
        seen_.insert(key);
        auto it = doc_.find(key);
        if (it == doc_.end() || it->is_null())
            return;
        try {
            out = it->template get<T>();
        } catch (json::exception const& e) {
            throw ConfigError(field(key), std::string("wrong type: ") + e.what());
        }
    }

    template <class T>
    void read(std::string const& key, std::optional<T>& out)
    {
        seen_.insert(key);
        auto it = doc_.find(key);
        if (it == doc_.end() || it->is_null()) {
            out.reset();
            return;
        }
        try {
            out = it->template get<T>();
        } catch (json::exception const& e) {
            throw ConfigError(field(key), std::string("wrong type: ") + e.what());
        }
    }

    /// Sub-object, or an empty object when absent.
    json const& child(std::string const& key)
    {
        seen_.insert(key);
        static json const empty = json::object();
        auto it = doc_.find(key);
        return it == doc_.end() || it->is_null() ? empty : *it;
    }

    void finish() const
    {
        for (auto it = doc_.begin(); it != doc_.end(); ++it)
            if (!seen_.count(it.key()))
                throw ConfigError(field(it.key()), "unknown key");
    }

  private:
    json const& doc_;
    std::string prefix_;
    std::set<std::string> seen_;
};

template <class T>
json optional_json(std::optional<T> const& v)
{
    return v ? json(*v) : json(nullptr);
}

void require(bool ok, std::string const& field, std::string const& message)
{
    if (!ok)
        throw ConfigError(field, message);
}

bool one_of(std::string const& value, std::initializer_list<char const*> options)
{
    return std::any_of(options.begin(), options.end(),
                       [&](char const* o) { return value == o; });
}

}  // namespace

ExperimentConfig parse_config(json const& doc)
{
    ExperimentConfig cfg;
    SectionReader top(doc, "");

    {
        SectionReader r(top.child("model"), "model");
        r.read("name", cfg.model.name);
        json const& box = r.child("box");
        SectionReader b(box, "model.box");
        b.read("lower", cfg.model.lower);
        b.read("upper", cfg.model.upper);
        b.finish();
        r.read("theta_true", cfg.model.theta_true);
        SectionReader g(r.child("regressors"), "model.regressors");
        g.read("name", cfg.model.regressors.name);
        g.read("values", cfg.model.regressors.values);
        g.read("omega", cfg.model.regressors.omega);
        g.read("path", cfg.model.regressors.path);
        g.finish();
        r.finish();
    }
    {
        SectionReader r(top.child("noise"), "noise");
        r.read("driver", cfg.noise.driver);
        SectionReader k(r.child("kernel"), "noise.kernel");
        k.read("form", cfg.noise.kernel.form);
        k.read("a", cfg.noise.kernel.a);
        k.read("path", cfg.noise.kernel.path);
        k.finish();
        r.read("prehistory", cfg.noise.prehistory);
        r.read("process", cfg.noise.process);
        SectionReader b(r.child("basis"), "noise.basis");
        b.read("family", cfg.noise.basis.family);
        b.read("n_terms", cfg.noise.basis.n_terms);
        b.read("horizon", cfg.noise.basis.horizon);
        b.finish();
        r.read("scale", cfg.noise.scale);
        r.finish();
    }
    {
        SectionReader r(top.child("grid"), "grid");
        r.read("T", cfg.grid.T);
        r.read("n_steps", cfg.grid.n_steps);
        r.finish();
    }
    top.read("norming", cfg.norming);
    {
        SectionReader r(top.child("montecarlo"), "montecarlo");
        r.read("n_trials", cfg.montecarlo.n_trials);
        r.read("master_seed", cfg.montecarlo.master_seed);
        r.read("R_grid", cfg.montecarlo.R_grid);
        r.finish();
    }
    {
        SectionReader r(top.child("bounds"), "bounds");
        r.read("beta", cfg.bounds.beta);
        r.read("B_cal_mode", cfg.bounds.B_cal_mode);
        r.read("B_cal", cfg.bounds.B_cal);
        r.read("calibration_fraction", cfg.bounds.calibration_fraction);
        r.read("c0_source", cfg.bounds.c0_source);
        r.read("separation_pairs", cfg.bounds.separation_pairs);
        r.read("separation_seed", cfg.bounds.separation_seed);
        r.finish();
    }
    {
        SectionReader r(top.child("estimator"), "estimator");
        r.read("coarse_grid_per_dim", cfg.estimator.coarse_grid_per_dim);
        r.read("local_tol", cfg.estimator.local_tol);
        r.read("max_iter", cfg.estimator.max_iter);
        r.read("n_starts", cfg.estimator.n_starts);
        r.finish();
    }
    {
        SectionReader r(top.child("check"), "check");
        r.read("n_rep", cfg.check.n_rep);
        r.read("lambda_grid", cfg.check.lambda_grid);
        r.read("delta", cfg.check.delta);
        r.read("seed", cfg.check.seed);
        r.read("n_probe", cfg.check.n_probe);
        r.finish();
    }
    {
        SectionReader r(top.child("output"), "output");
        r.read("directory", cfg.output.directory);
        r.read("formats", cfg.output.formats);
        r.read("path_files", cfg.output.path_files);
        r.finish();
    }
    top.finish();

    validate(cfg);
    return cfg;
}

ExperimentConfig load_config(std::filesystem::path const& path)
{
    std::ifstream in(path);
    if (!in)
        throw ConfigError("config", "cannot open " + path.string());
    json doc;
    try {
        doc = json::parse(in, nullptr, true, true);
    } catch (json::parse_error const& e) {
        throw ConfigError("config", path.string() + ": " + e.what());
    }
    auto cfg = parse_config(doc);
    // Data files named in the config are relative to the config itself.
    auto const base = path.parent_path();
    for (auto* file : {&cfg.model.regressors.path, &cfg.noise.kernel.path})
        if (!file->empty() && std::filesystem::path(*file).is_relative())
            *file = (base / *file).lexically_normal().string();
    return cfg;
}

json to_json(ExperimentConfig const& cfg)
{
    auto const& m = cfg.model;
    auto const& n = cfg.noise;
    return json{
        {"model",
         {{"name", m.name},
          {"box", {{"lower", m.lower}, {"upper", m.upper}}},
          {"theta_true", m.theta_true},
          {"regressors",
           {{"name", m.regressors.name},
            {"values", m.regressors.values},
            {"omega", m.regressors.omega},
            {"path", m.regressors.path}}}}},
        {"noise",
         {{"driver", n.driver},
          {"kernel", {{"form", n.kernel.form}, {"a", n.kernel.a}, {"path", n.kernel.path}}},
          {"prehistory", optional_json(n.prehistory)},
          {"process", n.process},
          {"basis",
           {{"family", n.basis.family},
            {"n_terms", n.basis.n_terms},
            {"horizon", optional_json(n.basis.horizon)}}},
          {"scale", n.scale}}},
        {"grid", {{"T", cfg.grid.T}, {"n_steps", optional_json(cfg.grid.n_steps)}}},
        {"norming", cfg.norming},
        {"montecarlo",
         {{"n_trials", cfg.montecarlo.n_trials},
          {"master_seed", cfg.montecarlo.master_seed},
          {"R_grid", cfg.montecarlo.R_grid}}},
        {"bounds",
         {{"beta", optional_json(cfg.bounds.beta)},
          {"B_cal_mode", cfg.bounds.B_cal_mode},
          {"B_cal", cfg.bounds.B_cal},
          {"calibration_fraction", cfg.bounds.calibration_fraction},
          {"c0_source", cfg.bounds.c0_source},
          {"separation_pairs", cfg.bounds.separation_pairs},
          {"separation_seed", cfg.bounds.separation_seed}}},
        {"estimator",
         {{"coarse_grid_per_dim", cfg.estimator.coarse_grid_per_dim},
          {"local_tol", cfg.estimator.local_tol},
          {"max_iter", cfg.estimator.max_iter},
          {"n_starts", cfg.estimator.n_starts}}},
        {"check",
         {{"n_rep", cfg.check.n_rep},
          {"lambda_grid", cfg.check.lambda_grid},
          {"delta", cfg.check.delta},
          {"seed", cfg.check.seed},
          {"n_probe", cfg.check.n_probe}}},
        {"output",
         {{"directory", cfg.output.directory},
          {"formats", cfg.output.formats},
          {"path_files", cfg.output.path_files}}},
    };
}

void validate(ExperimentConfig const& cfg)
{
    auto const& m = cfg.model;
    require(one_of(m.name, {"linear", "constant", "exponential"}), "model.name",
            "unknown model '" + m.name + "' (expected linear, constant or exponential)");
    require(!m.lower.empty(), "model.box.lower", "must list at least one bound");
    require(m.lower.size() == m.upper.size(), "model.box.upper",
            "must have the same length as model.box.lower");
    for (std::size_t i = 0; i < m.lower.size(); ++i)
        require(std::isfinite(m.lower[i]) && std::isfinite(m.upper[i]) && m.lower[i] < m.upper[i],
                "model.box", "need lower < upper in coordinate " + std::to_string(i));
    require(m.theta_true.size() == m.lower.size(), "model.theta_true",
            "must have one entry per box coordinate");
    for (std::size_t i = 0; i < m.theta_true.size(); ++i)
        require(m.theta_true[i] > m.lower[i] && m.theta_true[i] < m.upper[i], "model.theta_true",
                "coordinate " + std::to_string(i) + " must lie strictly inside the box");
    if (m.name == "constant")
        require(m.lower.size() == 1, "model.box", "the constant model has dimension 1");
    if (m.name == "exponential") {
        auto const& g = m.regressors;
        require(one_of(g.name, {"constant", "cosine", "tabulated"}), "model.regressors.name",
                "unknown regressors '" + g.name + "' (expected constant, cosine or tabulated)");
        if (g.name == "constant")
            require(g.values.size() == m.lower.size(), "model.regressors.values",
                    "must have one entry per parameter");
        if (g.name == "tabulated")
            require(!g.path.empty(), "model.regressors.path", "required for tabulated regressors");
        require(std::isfinite(g.omega), "model.regressors.omega", "must be finite");
    }

    auto const& n = cfg.noise;
    require(one_of(n.driver, {"gaussian", "rademacher", "uniform_sqrt3", "centered_exponential"}),
            "noise.driver", "unknown driver '" + n.driver + "'");
    require(one_of(n.kernel.form, {"none", "exponential", "tabulated"}), "noise.kernel.form",
            "unknown kernel form '" + n.kernel.form + "' (expected none, exponential or tabulated)");
    if (n.kernel.form == "exponential")
        require(n.kernel.a > 0.0 && std::isfinite(n.kernel.a), "noise.kernel.a",
                "must be positive");
    if (n.kernel.form == "tabulated")
        require(!n.kernel.path.empty(), "noise.kernel.path", "required for tabulated kernels");
    if (n.prehistory)
        require(*n.prehistory >= 0.0 && std::isfinite(*n.prehistory), "noise.prehistory",
                "must be nonnegative");
    require(one_of(n.process, {"increments", "ito_nisio"}), "noise.process",
            "unknown process '" + n.process + "' (expected increments or ito_nisio)");
    require(n.basis.family == "haar", "noise.basis.family", "only 'haar' is supported");
    require(n.basis.n_terms >= 1, "noise.basis.n_terms", "must be at least 1");
    if (n.basis.horizon)
        require(*n.basis.horizon > 0.0, "noise.basis.horizon", "must be positive");
    require(n.scale >= 0.0 && std::isfinite(n.scale), "noise.scale", "must be nonnegative");

    require(cfg.grid.T > 0.0 && std::isfinite(cfg.grid.T), "grid.T", "must be positive");
    if (cfg.grid.n_steps)
        require(*cfg.grid.n_steps > 0, "grid.n_steps", "must be positive");

    require(one_of(cfg.norming, {"d_T", "s_T"}), "norming",
            "unknown norming '" + cfg.norming + "' (expected d_T or s_T)");

    auto const& mc = cfg.montecarlo;
    require(mc.n_trials > 0, "montecarlo.n_trials", "must be positive");
    require(!mc.R_grid.empty(), "montecarlo.R_grid", "must not be empty");
    for (std::size_t k = 0; k < mc.R_grid.size(); ++k) {
        require(mc.R_grid[k] >= 0.0 && std::isfinite(mc.R_grid[k]), "montecarlo.R_grid",
                "levels must be nonnegative");
        if (k > 0)
            require(mc.R_grid[k] > mc.R_grid[k - 1], "montecarlo.R_grid",
                    "levels must be strictly increasing");
    }

    auto const& b = cfg.bounds;
    if (b.beta)
        require(*b.beta >= 0.0 && std::isfinite(*b.beta), "bounds.beta", "must be nonnegative");
    require(one_of(b.B_cal_mode, {"fixed", "calibrate"}), "bounds.B_cal_mode",
            "expected fixed or calibrate");
    require(b.B_cal > 0.0 && std::isfinite(b.B_cal), "bounds.B_cal", "must be positive");
    require(b.calibration_fraction > 0.0 && b.calibration_fraction < 1.0,
            "bounds.calibration_fraction", "must lie in (0, 1)");
    require(one_of(b.c0_source, {"estimated", "theory"}), "bounds.c0_source",
            "expected estimated or theory");
    if (b.c0_source == "theory")
        require(m.name == "exponential", "bounds.c0_source",
                "theoretical c0 is only available for the exponential model");
    require(b.separation_pairs >= 100, "bounds.separation_pairs", "must be at least 100");

    auto const& e = cfg.estimator;
    require(e.coarse_grid_per_dim >= 3, "estimator.coarse_grid_per_dim", "must be at least 3");
    require(e.local_tol > 0.0, "estimator.local_tol", "must be positive");
    require(e.max_iter >= 1, "estimator.max_iter", "must be at least 1");
    require(e.n_starts >= 1, "estimator.n_starts", "must be at least 1");

    auto const& c = cfg.check;
    require(c.n_rep >= 10000, "check.n_rep", "must be at least 10000");
    require(one_of(c.delta, {"constant", "spike", "random"}), "check.delta",
            "expected constant, spike or random");
    require(c.n_probe >= 10, "check.n_probe", "must be at least 10");
    for (std::size_t k = 1; k < c.lambda_grid.size(); ++k)
        require(c.lambda_grid[k] > c.lambda_grid[k - 1], "check.lambda_grid",
                "must be strictly increasing");

    for (auto const& f : cfg.output.formats)
        require(one_of(f, {"csv", "json", "tsv"}), "output.formats",
                "unknown format '" + f + "'");
}

TimeGrid build_grid(ExperimentConfig const& cfg)
{
    if (cfg.grid.n_steps)
        return TimeGrid(cfg.grid.T, *cfg.grid.n_steps);
    return TimeGrid::with_max_step(cfg.grid.T);
}

std::shared_ptr<RegressionModel const> build_model(ExperimentConfig const& cfg, double horizon)
{
    auto const& m = cfg.model;
    ParameterBox box(m.lower, m.upper);
    if (m.name == "linear")
        return std::make_shared<LinearModel>(box);
    if (m.name == "constant")
        return std::make_shared<ConstantModel>(box);

    std::shared_ptr<Regressors const> y;
    auto const& g = m.regressors;
    if (g.name == "constant") {
        y = std::make_shared<ConstantRegressors>(g.values);
    } else if (g.name == "cosine") {
        y = std::make_shared<CosineRegressors>(m.lower.size(), g.omega);
    } else {
        auto tab = TabulatedRegressors::load(g.path);
        require(tab->dimension() == m.lower.size(), "model.regressors.path",
                "table has " + std::to_string(tab->dimension()) + " regressor columns, expected "
                    + std::to_string(m.lower.size()));
        require(tab->last_time() >= horizon, "model.regressors.path",
                "table does not cover [0, T]");
        y = tab;
    }
    return std::make_shared<ExponentialModel>(box, y);
}

NoiseSpec build_noise(ExperimentConfig const& cfg, TimeGrid const& grid)
{
    auto const& n = cfg.noise;
    NoiseSpec spec;
    spec.driver = parse_driver(n.driver);
    if (n.kernel.form == "exponential")
        spec.kernel = FilterKernel::exponential(n.kernel.a);
    else if (n.kernel.form == "tabulated")
        spec.kernel = FilterKernel::load(n.kernel.path);
    spec.prehistory = n.prehistory;
    spec.process = n.process == "ito_nisio" ? DriverProcess::ito_nisio : DriverProcess::increments;
    spec.basis.family = BasisFamily::haar;
    spec.basis.n_terms = n.basis.n_terms;
    double const pre = spec.kernel ? spec.resolved_prehistory() : 0.0;
    spec.basis.horizon =
        n.basis.horizon ? *n.basis.horizon : std::max(grid.horizon(), pre + 2.0 * grid.step());
    return spec;
}

ExperimentSpec build_experiment(ExperimentConfig const& cfg)
{
    ExperimentSpec spec;
    spec.grid = build_grid(cfg);
    spec.model = build_model(cfg, spec.grid.horizon());
    spec.theta_true = cfg.model.theta_true;
    spec.noise = build_noise(cfg, spec.grid);
    spec.noise_scale = cfg.noise.scale;
    spec.norming = cfg.norming == "d_T" ? NormingMode::d_T : NormingMode::s_T;
    spec.n_trials = cfg.montecarlo.n_trials;
    spec.master_seed = cfg.montecarlo.master_seed;
    spec.fit.coarse_grid_per_dim = cfg.estimator.coarse_grid_per_dim;
    spec.fit.local_tol = cfg.estimator.local_tol;
    spec.fit.max_iter = cfg.estimator.max_iter;
    spec.fit.n_starts = cfg.estimator.n_starts;
    return spec;
}

}  // namespace ssg
