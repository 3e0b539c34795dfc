#include "ampcal/config.hpp"

#include "ampcal/errors.hpp"
#include "ampcal/stats.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <functional>
#include <map>
#include <sstream>

namespace ampcal {

std::string format_double(double v) {
    char buf[64];
    const auto r = std::to_chars(buf, buf + sizeof buf, v);
    return std::string(buf, r.ptr);
}

namespace {

std::string trim(const std::string& s) {
    const auto b = s.find_first_not_of(" \t\r");
    if (b == std::string::npos) return {};
    const auto e = s.find_last_not_of(" \t\r");
    return s.substr(b, e - b + 1);
}

bool parse_bool(const std::string& t, const std::string& what) {
    if (t == "true" || t == "1" || t == "yes") return true;
    if (t == "false" || t == "0" || t == "no") return false;
    throw ConfigError(what + ": expected true or false, got '" + t + "'");
}

std::vector<std::string> split_list(const std::string& t) {
    std::vector<std::string> out;
    std::stringstream ss(t);
    std::string item;
    while (std::getline(ss, item, ','))
        if (!trim(item).empty()) out.push_back(trim(item));
    return out;
}

std::string join_list(const std::vector<std::string>& v) {
    std::string out;
    for (std::size_t i = 0; i < v.size(); ++i) out += (i ? "," : "") + v[i];
    return out;
}

struct Field {
    std::string key;
    std::function<void(RunConfig&, const std::string&)> set;
    std::function<std::string(const RunConfig&)> get;
};

#define AMPCAL_STR(name)                                                              \
    Field { #name, [](RunConfig& c, const std::string& v) { c.name = v; },            \
            [](const RunConfig& c) { return c.name; } }
#define AMPCAL_DBL(key, member)                                                                   \
    Field { key, [](RunConfig& c, const std::string& v) { c.member = parse_double(v, key); },     \
            [](const RunConfig& c) { return format_double(c.member); } }
#define AMPCAL_UINT(key, member)                                                                                  \
    Field { key, [](RunConfig& c, const std::string& v) { c.member = static_cast<decltype(c.member)>(parse_uint(v, key)); }, \
            [](const RunConfig& c) { return std::to_string(c.member); } }
#define AMPCAL_BOOL(key, member)                                                               \
    Field { key, [](RunConfig& c, const std::string& v) { c.member = parse_bool(v, key); },    \
            [](const RunConfig& c) { return std::string(c.member ? "true" : "false"); } }

const std::vector<Field>& fields() {
    static const std::vector<Field> f = {
        AMPCAL_STR(counts),
        AMPCAL_STR(panel),
        AMPCAL_STR(prior),
        AMPCAL_STR(out_dir),
        Field{"reference_samples",
              [](RunConfig& c, const std::string& v) { c.reference_samples = split_list(v); },
              [](const RunConfig& c) { return join_list(c.reference_samples); }},
        AMPCAL_DBL("pseudo_count", pseudo_count),
        AMPCAL_DBL("prior_mu0_sd", hyper.prior_mu0_sd),
        AMPCAL_DBL("alpha_sigma", hyper.alpha_sigma),
        AMPCAL_DBL("beta_sigma", hyper.beta_sigma),
        AMPCAL_DBL("alpha_tau0", hyper.alpha_tau0),
        AMPCAL_DBL("beta_tau0", hyper.beta_tau0),
        AMPCAL_DBL("alpha_tau", hyper.alpha_tau),
        AMPCAL_DBL("beta_tau", hyper.beta_tau),
        AMPCAL_UINT("warmup", warmup),
        AMPCAL_UINT("draws", draws),
        AMPCAL_UINT("leapfrog", leapfrog),
        AMPCAL_DBL("target_accept", target_accept),
        AMPCAL_DBL("level", level),
        AMPCAL_BOOL("keep_draws", keep_draws),
        Field{"m",
              [](RunConfig& c, const std::string& v) {
                  if (v.empty() || v == "auto") c.m.reset();
                  else c.m = static_cast<std::size_t>(parse_uint(v, "m"));
              },
              [](const RunConfig& c) { return c.m ? std::to_string(*c.m) : std::string("auto"); }},
        AMPCAL_DBL("m_frac", m_frac),
        AMPCAL_UINT("repetitions", repetitions),
        AMPCAL_DBL("ess", ess),
        AMPCAL_DBL("p", p),
        AMPCAL_BOOL("stratify", stratify),
        AMPCAL_BOOL("force", force),
        AMPCAL_UINT("seed", seed),
        AMPCAL_STR(version),
    };
    return f;
}

#undef AMPCAL_STR
#undef AMPCAL_DBL
#undef AMPCAL_UINT
#undef AMPCAL_BOOL

}  // namespace

double parse_double(const std::string& text, const std::string& what) {
    const std::string t = trim(text);
    double v = 0.0;
    const auto r = std::from_chars(t.data(), t.data() + t.size(), v);
    if (t.empty() || r.ec != std::errc() || r.ptr != t.data() + t.size() || !std::isfinite(v))
        throw ConfigError(what + ": expected a number, got '" + text + "'");
    return v;
}

std::uint64_t parse_uint(const std::string& text, const std::string& what) {
    const std::string t = trim(text);
    std::uint64_t v = 0;
    const auto r = std::from_chars(t.data(), t.data() + t.size(), v);
    if (t.empty() || r.ec != std::errc() || r.ptr != t.data() + t.size())
        throw ConfigError(what + ": expected a non-negative integer, got '" + text + "'");
    return v;
}

const std::vector<std::string>& RunConfig::keys() {
    static const std::vector<std::string> k = [] {
        std::vector<std::string> out;
        for (const auto& f : fields()) out.push_back(f.key);
        return out;
    }();
    return k;
}

void RunConfig::set(const std::string& key, const std::string& value) {
    for (const auto& f : fields())
        if (f.key == key) {
            f.set(*this, trim(value));
            return;
        }
    throw ConfigError("unknown config key '" + key + "'");
}

RunConfig RunConfig::parse(const std::string& text, const std::string& source) {
    RunConfig c;
    std::istringstream in(text);
    std::string line;
    std::size_t n = 0;
    std::map<std::string, std::size_t> seen;
    while (std::getline(in, line)) {
        ++n;
        const std::string t = trim(line);
        if (t.empty() || t[0] == '#') continue;
        const auto eq = t.find('=');
        const std::string where = source + ":" + std::to_string(n) + ": ";
        if (eq == std::string::npos) throw ConfigError(where + "expected 'key = value'");
        const std::string key = trim(t.substr(0, eq));
        if (auto [it, fresh] = seen.emplace(key, n); !fresh)
            throw ConfigError(where + "key '" + key + "' already set on line " + std::to_string(it->second));
        try {
            c.set(key, t.substr(eq + 1));
        } catch (const ConfigError& e) {
            throw ConfigError(where + e.what());
        }
    }
    return c;
}

RunConfig RunConfig::load(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open config file '" + path.string() + "'");
    std::stringstream ss;
    ss << in.rdbuf();
    return parse(ss.str(), path.string());
}

std::string RunConfig::serialize() const {
    std::string out;
    for (const auto& f : fields()) out += f.key + " = " + f.get(*this) + "\n";
    return out;
}

void RunConfig::validate() const {
    hyper.validate();
    if (!(pseudo_count >= 0.0)) throw ConfigError("pseudo_count must be non-negative");
    if (draws < 100) throw ConfigError("draws must be at least 100");
    if (leapfrog == 0) throw ConfigError("leapfrog must be positive");
    if (!(target_accept > 0.0 && target_accept < 1.0)) throw ConfigError("target_accept must lie in (0, 1)");
    if (!(level > 0.0 && level < 1.0)) throw ConfigError("level must lie in (0, 1)");
    if (!(m_frac >= 0.0 && m_frac < 1.0)) throw ConfigError("m_frac must lie in [0, 1)");
    if (repetitions == 0) throw ConfigError("repetitions must be positive");
    if (!(ess >= 0.0)) throw ConfigError("ess must be non-negative");
    if (!(p > 0.0 && p <= 0.5)) throw ConfigError("p must lie in (0, 0.5]");
}

// out_dir is where results go, not what they are
std::uint64_t RunConfig::hash() const {
    RunConfig c = *this;
    c.out_dir.clear();
    return fnv1a64(c.serialize());
}

ToleranceConfig RunConfig::tolerance() const {
    ToleranceConfig t;
    t.m = m;
    t.m_frac = m_frac;
    t.repetitions = repetitions;
    t.p = p;
    return t;
}

FitOptions RunConfig::fit_options() const {
    FitOptions f;
    f.hmc.n_warmup = warmup;
    f.hmc.n_draws = draws;
    f.hmc.n_leapfrog = leapfrog;
    f.hmc.target_accept = target_accept;
    f.level = level;
    f.keep_draws = keep_draws;
    return f;
}

bool operator==(const RunConfig& a, const RunConfig& b) { return a.serialize() == b.serialize(); }

KeyValues KeyValues::parse(const std::string& text, const std::string& source) {
    KeyValues kv;
    std::istringstream in(text);
    std::string line;
    std::size_t n = 0;
    while (std::getline(in, line)) {
        ++n;
        const std::string t = trim(line);
        if (t.empty() || t[0] == '#') continue;
        const auto eq = t.find('=');
        if (eq == std::string::npos)
            throw ConfigError(source + ":" + std::to_string(n) + ": expected 'key = value'");
        const std::string key = trim(t.substr(0, eq));
        if (kv.has(key)) throw ConfigError(source + ":" + std::to_string(n) + ": key '" + key + "' set twice");
        kv.set(key, trim(t.substr(eq + 1)));
    }
    return kv;
}

KeyValues KeyValues::load(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open config file '" + path.string() + "'");
    std::stringstream ss;
    ss << in.rdbuf();
    return parse(ss.str(), path.string());
}

std::string KeyValues::str(const std::string& key, const std::string& fallback) const {
    const auto it = values_.find(key);
    return it == values_.end() ? fallback : it->second;
}

double KeyValues::real(const std::string& key, double fallback) const {
    return has(key) ? parse_double(values_.at(key), key) : fallback;
}

std::uint64_t KeyValues::uint(const std::string& key, std::uint64_t fallback) const {
    return has(key) ? parse_uint(values_.at(key), key) : fallback;
}

bool KeyValues::flag(const std::string& key, bool fallback) const {
    return has(key) ? parse_bool(values_.at(key), key) : fallback;
}

std::vector<std::string> KeyValues::list(const std::string& key, const std::vector<std::string>& fallback) const {
    return has(key) ? split_list(values_.at(key)) : fallback;
}

std::vector<double> KeyValues::reals(const std::string& key, const std::vector<double>& fallback) const {
    if (!has(key)) return fallback;
    std::vector<double> out;
    for (const auto& item : split_list(values_.at(key))) out.push_back(parse_double(item, key));
    return out;
}

void KeyValues::require_known(const std::vector<std::string>& allowed) const {
    for (const auto& [k, v] : values_)
        if (std::find(allowed.begin(), allowed.end(), k) == allowed.end())
            throw ConfigError("unknown key '" + k + "'");
}

}  // namespace ampcal
