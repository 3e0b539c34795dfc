#pragma once

// Flat `key = value` run configuration. Lines starting with '#' are
// comments; every key has a default, so an empty file is a valid config.

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "ampcal/bayescnv.hpp"
#include "ampcal/tolerance.hpp"

namespace ampcal {

struct RunConfig {
    // paths
    std::string counts;
    std::string panel;
    std::string prior;
    std::string out_dir = "ampcal_out";
    std::vector<std::string> reference_samples;

    // features and model
    double pseudo_count = 0.5;
    ModelHyperParams hyper;
    std::size_t warmup = 500;
    std::size_t draws = 1000;
    std::size_t leapfrog = 32;
    double target_accept = 0.8;
    double level = 0.95;  // credible level of the HPD intervals
    bool keep_draws = false;

    // tolerance
    std::optional<std::size_t> m;
    double m_frac = 0.2;
    std::size_t repetitions = 25;
    double ess = 5.0;
    double p = 0.05;

    bool stratify = false;
    bool force = false;
    std::uint64_t seed = 1;
    std::string version = AMPCAL_VERSION;

    static RunConfig parse(const std::string& text, const std::string& source = "<config>");
    static RunConfig load(const std::filesystem::path& path);
    // Canonical text: every key in a fixed order, doubles in shortest
    // round-trip form. parse(serialize()) reproduces the config exactly.
    std::string serialize() const;

    // Sets one key from its textual value; throws ConfigError on an unknown
    // key or a malformed value.
    void set(const std::string& key, const std::string& value);
    static const std::vector<std::string>& keys();

    // Range checks only; file existence is checked by the pipeline.
    void validate() const;
    std::uint64_t hash() const;

    ToleranceConfig tolerance() const;
    FitOptions fit_options() const;
};

bool operator==(const RunConfig& a, const RunConfig& b);

// Generic flat `key = value` file with typed, defaulted lookups. Used by the
// evaluation studies, whose keys differ per study.
class KeyValues {
public:
    static KeyValues parse(const std::string& text, const std::string& source = "<config>");
    static KeyValues load(const std::filesystem::path& path);

    void set(const std::string& key, const std::string& value) { values_[key] = value; }
    bool has(const std::string& key) const { return values_.count(key) > 0; }
    std::string str(const std::string& key, const std::string& fallback) const;
    double real(const std::string& key, double fallback) const;
    std::uint64_t uint(const std::string& key, std::uint64_t fallback) const;
    bool flag(const std::string& key, bool fallback) const;
    std::vector<std::string> list(const std::string& key, const std::vector<std::string>& fallback) const;
    std::vector<double> reals(const std::string& key, const std::vector<double>& fallback) const;
    // Throws ConfigError naming the first key not in `allowed`.
    void require_known(const std::vector<std::string>& allowed) const;

private:
    std::map<std::string, std::string> values_;
};

// Shortest decimal text that parses back to the same double.
std::string format_double(double v);
double parse_double(const std::string& text, const std::string& what);
std::uint64_t parse_uint(const std::string& text, const std::string& what);

}  // namespace ampcal
