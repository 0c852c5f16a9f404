#pragma once

#include "hbvsde/hbvsde.hpp"

#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

namespace hbvsde::cli {

/// Bad config file, bad flag value, or parameters that fail validation. Maps to exit code 2.
class ConfigError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/**
 * Everything a run needs. The output directory is deliberately not part of
 * the serialized snapshot so two runs into different directories produce
 * identical bytes.
 */
struct RunConfig {
    ModelParams model;
    NoiseParams noise;
    StateVec initial{5.0, 1.0, 1.0};

    double t0 = 0.0;
    double t_end = 5.0;
    double dt = 1e-3;

    Scheme scheme = Scheme::EulerMaruyama;
    std::size_t paths = 1;
    std::uint64_t seed = 42;
    NegativityPolicy policy = NegativityPolicy::Raw;
    std::size_t stride = 1;  ///< keep every stride-th grid point in emitted series

    // [analysis]
    std::optional<double> gamma;
    bool gamma_from_trajectory = false;
    std::size_t samples = 101;
    std::vector<double> horizons;
    double delta = 1e-3;
    double tail_fraction = 0.5;
    std::string preset = "gbm";
    double gbm_a = 0.05;
    double gbm_b = 0.4;
    double gbm_x0 = 1.0;
    double conv_t = 1.0;
    std::size_t base_steps = 16;
    std::size_t levels = 7;

    std::string out = ".";
    std::string input;

    HbvConfig hbv() const { return {model, noise, initial}; }
    SimGrid grid() const;
};

/// Parses INI text on top of `base`. Unknown sections or keys are errors.
RunConfig parse_ini(const std::string& text, RunConfig base = {});

/// Reads an INI file, or the "config" object of a manifest.json.
RunConfig load_config_file(const std::string& path);

/// Canonical INI snapshot: every key, numbers at 17 significant digits.
std::string to_ini(const RunConfig& cfg);

Scheme parse_scheme(const std::string& s);
NegativityPolicy parse_policy(const std::string& s);

}  // namespace hbvsde::cli
