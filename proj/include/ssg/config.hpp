#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"

#include "ssg/harness.hpp"

namespace ssg {

inline constexpr char const* artifact_version = "ssg-lse 0.1.0";

/*!
 * Experiment configuration as written by the user. Optional fields stay
 * unset here and are resolved when the experiment is built, so a
 * parse/serialize/parse cycle reproduces the same value.
 */
struct ExperimentConfig
{
    struct Regressors
    {
        std::string name = "constant";  ///< constant | cosine | tabulated
        std::vector<double> values{1.0};
        double omega = 1.0;
        std::string path;
        bool operator==(Regressors const&) const = default;
    };
    struct Model
    {
        std::string name = "linear";  ///< linear | constant | exponential
        std::vector<double> lower;
        std::vector<double> upper;
        std::vector<double> theta_true;
        Regressors regressors;
        bool operator==(Model const&) const = default;
    };
    struct Kernel
    {
        std::string form = "none";  ///< none | exponential | tabulated
        double a = 1.0;
        std::string path;
        bool operator==(Kernel const&) const = default;
    };
    struct Basis
    {
        std::string family = "haar";
        std::size_t n_terms = 1024;
        std::optional<double> horizon;
        bool operator==(Basis const&) const = default;
    };
    struct Noise
    {
        std::string driver = "gaussian";
        Kernel kernel;
        std::optional<double> prehistory;
        std::string process = "increments";  ///< increments | ito_nisio
        Basis basis;
        double scale = 1.0;
        bool operator==(Noise const&) const = default;
    };
    struct Grid
    {
        double T = 1.0;
        std::optional<std::size_t> n_steps;
        bool operator==(Grid const&) const = default;
    };
    struct MonteCarlo
    {
        std::size_t n_trials = 1000;
        std::uint64_t master_seed = 1;
        std::vector<double> R_grid{0.5, 1.0, 1.5, 2.0, 2.5};
        bool operator==(MonteCarlo const&) const = default;
    };
    struct Bounds
    {
        std::optional<double> beta;
        std::string B_cal_mode = "fixed";  ///< fixed | calibrate
        double B_cal = 1.0;
        double calibration_fraction = 0.1;
        std::string c0_source = "estimated";  ///< estimated | theory
        std::size_t separation_pairs = 10000;
        std::uint64_t separation_seed = 7;
        bool operator==(Bounds const&) const = default;
    };
    struct Estimator
    {
        std::size_t coarse_grid_per_dim = 21;
        double local_tol = 1e-8;
        std::size_t max_iter = 200;
        std::size_t n_starts = 3;
        bool operator==(Estimator const&) const = default;
    };
    struct Check
    {
        std::size_t n_rep = 10000;
        std::vector<double> lambda_grid;  ///< empty: 9 evenly spaced values up to the limit
        std::string delta = "constant";   ///< constant | spike | random
        std::uint64_t seed = 11;
        std::size_t n_probe = 50;
        bool operator==(Check const&) const = default;
    };
    struct Output
    {
        std::string directory = "out";
        std::vector<std::string> formats{"csv", "json", "tsv"};
        std::size_t path_files = 3;
        bool operator==(Output const&) const = default;
    };

    Model model;
    Noise noise;
    Grid grid;
    std::string norming = "s_T";  ///< d_T | s_T
    MonteCarlo montecarlo;
    Bounds bounds;
    Estimator estimator;
    Check check;
    Output output;

    bool operator==(ExperimentConfig const&) const = default;
};

/// Parses and validates; throws ConfigError naming the offending field.
ExperimentConfig parse_config(nlohmann::json const& doc);
ExperimentConfig load_config(std::filesystem::path const& path);

nlohmann::json to_json(ExperimentConfig const& cfg);

/// Field-level validation, run by parse_config.
void validate(ExperimentConfig const& cfg);

TimeGrid build_grid(ExperimentConfig const& cfg);
std::shared_ptr<RegressionModel const> build_model(ExperimentConfig const& cfg, double horizon);
NoiseSpec build_noise(ExperimentConfig const& cfg, TimeGrid const& grid);
ExperimentSpec build_experiment(ExperimentConfig const& cfg);

}  // namespace ssg
