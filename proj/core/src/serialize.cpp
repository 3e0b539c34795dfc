#include "ampcal/serialize.hpp"

#include "ampcal/errors.hpp"

#include <algorithm>
#include <fstream>
#include <sstream>

namespace ampcal {

namespace {

const Json& need(const Json& j, const char* key) {
    if (!j.is_object() || !j.contains(key)) throw DataError(std::string("json: missing field '") + key + "'");
    return j.at(key);
}

template <typename T>
T get(const Json& j, const char* key) {
    try {
        return need(j, key).get<T>();
    } catch (const nlohmann::json::exception& e) {
        throw DataError(std::string("json: field '") + key + "': " + e.what());
    }
}

template <typename T>
T get_or(const Json& j, const char* key, T fallback) {
    return j.is_object() && j.contains(key) ? get<T>(j, key) : fallback;
}

Json bools(const std::vector<bool>& v) {
    Json a = Json::array();
    for (bool b : v) a.push_back(b);
    return a;
}

PseudoPriorSpec prior_entry(const Json& e, double ess, const std::string& name) {
    PseudoPriorSpec spec;
    if (e.contains("values")) {
        spec.source = PriorSource::replay;
        spec.values = get<std::vector<double>>(e, "values");
        spec.effective_sample_size = ess;
        if (spec.values.empty()) throw DataError("prior '" + name + "': empty values");
        for (double v : spec.values)
            if (!(v >= 0.0)) throw DataError("prior '" + name + "': values must be non-negative");
        return spec;
    }
    const GammaParams ref{get<double>(e, "alpha"), get<double>(e, "scale")};
    return generate_pseudo_prior(ref, get_or<std::size_t>(e, "count", 1000), ess, get_or<std::uint64_t>(e, "seed", 1));
}

}  // namespace

Json to_json(const PosteriorSummary& s) {
    Json j;
    j["sample_id"] = s.sample_id;
    j["genes"] = s.genes;
    j["mu_hat"] = s.mu_hat;
    j["level"] = s.level;
    Json hpd = Json::array();
    for (const auto& iv : s.hpd) hpd.push_back({iv.lo, iv.hi});
    j["hpd"] = hpd;
    j["altered"] = bools(s.altered);
    j["log_evidence"] = s.log_evidence;
    j["diagnostics"] = {{"acceptance_rate", s.diagnostics.acceptance_rate},
                        {"divergences", s.diagnostics.divergences},
                        {"step_size", s.diagnostics.step_size},
                        {"warnings", s.diagnostics.warnings}};
    if (s.draws.size() > 0) {
        Json rows = Json::array();
        for (Eigen::Index r = 0; r < s.draws.rows(); ++r) {
            Json row = Json::array();
            for (Eigen::Index c = 0; c < s.draws.cols(); ++c) row.push_back(s.draws(r, c));
            rows.push_back(std::move(row));
        }
        j["draws"] = std::move(rows);
    }
    return j;
}

PosteriorSummary posterior_from_json(const Json& j) {
    PosteriorSummary s;
    s.sample_id = get<std::string>(j, "sample_id");
    s.genes = get<std::vector<std::string>>(j, "genes");
    s.mu_hat = get<std::vector<double>>(j, "mu_hat");
    s.level = get<double>(j, "level");
    for (const auto& iv : need(j, "hpd")) {
        if (!iv.is_array() || iv.size() != 2) throw DataError("json: hpd entries must be [lo, hi]");
        s.hpd.push_back({iv[0].get<double>(), iv[1].get<double>()});
    }
    s.altered = get<std::vector<bool>>(j, "altered");
    s.log_evidence = get<double>(j, "log_evidence");
    if (j.contains("diagnostics")) {
        const auto& d = j.at("diagnostics");
        s.diagnostics.acceptance_rate = get_or<double>(d, "acceptance_rate", 0.0);
        s.diagnostics.divergences = get_or<std::size_t>(d, "divergences", 0);
        s.diagnostics.step_size = get_or<double>(d, "step_size", 0.0);
        s.diagnostics.warnings = get_or<std::vector<std::string>>(d, "warnings", {});
    }
    if (s.mu_hat.size() != s.genes.size()) throw DataError("json: mu_hat and genes differ in length");
    if (j.contains("draws")) {
        const auto& rows = j.at("draws");
        s.draws.resize(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(s.genes.size()));
        for (std::size_t r = 0; r < rows.size(); ++r) {
            if (rows[r].size() != s.genes.size()) throw DataError("json: draw row width differs from gene count");
            for (std::size_t c = 0; c < s.genes.size(); ++c)
                s.draws(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) = rows[r][c].get<double>();
        }
    }
    return s;
}

Json to_json(const ComparatorInterval& c) {
    return {{"method", to_string(c.method)}, {"gene", c.gene}, {"level", c.level}, {"lo", c.lo}, {"hi", c.hi}};
}

Json to_json(const BulkFit& f) {
    return {{"xi_hat", f.xi_hat},
            {"omega_hat", f.omega_hat},
            {"threshold", f.threshold},
            {"retained", f.retained},
            {"imputed", f.imputed}};
}

Json to_json(const ImputedCohort& c) {
    Json j;
    j["gene"] = c.gene;
    j["repetition_id"] = c.repetition_id;
    j["values"] = c.values;
    j["imputed_mask"] = bools(c.imputed_mask);
    j["fit"] = to_json(c.fit);
    j["point_mass"] = c.point_mass;
    return j;
}

ImputedCohort imputed_from_json(const Json& j) {
    ImputedCohort c;
    c.gene = get<std::string>(j, "gene");
    c.repetition_id = get<std::size_t>(j, "repetition_id");
    c.values = get<std::vector<double>>(j, "values");
    c.imputed_mask = get<std::vector<bool>>(j, "imputed_mask");
    const auto& f = need(j, "fit");
    c.fit.xi_hat = get<double>(f, "xi_hat");
    c.fit.omega_hat = get<double>(f, "omega_hat");
    c.fit.threshold = get<double>(f, "threshold");
    c.fit.retained = get<std::size_t>(f, "retained");
    c.fit.imputed = get<std::size_t>(f, "imputed");
    c.point_mass = get_or<bool>(j, "point_mass", false);
    if (c.values.size() != c.imputed_mask.size()) throw DataError("json: values and imputed_mask differ in length");
    return c;
}

Json to_json(const GammaToleranceModel& m) {
    return {{"gene", m.gene},
            {"alpha_hat", m.alpha_hat},
            {"s_hat", m.s_hat},
            {"p", m.p},
            {"T", m.T},
            {"lcnr_bound", m.lcnr_bound},
            {"min_detectable_cnv", m.min_detectable_cnv},
            {"T_sd_over_reps", m.T_sd_over_reps},
            {"repetitions", m.repetitions}};
}

GammaToleranceModel tolerance_from_json(const Json& j) {
    GammaToleranceModel m;
    m.gene = get<std::string>(j, "gene");
    m.alpha_hat = get<double>(j, "alpha_hat");
    m.s_hat = get<double>(j, "s_hat");
    m.p = get<double>(j, "p");
    m.T = get<double>(j, "T");
    m.lcnr_bound = get<double>(j, "lcnr_bound");
    m.min_detectable_cnv = get<double>(j, "min_detectable_cnv");
    m.T_sd_over_reps = get_or<double>(j, "T_sd_over_reps", 0.0);
    m.repetitions = get_or<std::size_t>(j, "repetitions", 1);
    return m;
}

Json to_json(const CalibrationReport& r) {
    return {{"gene", r.gene},
            {"method", to_string(r.method)},
            {"grid", r.grid},
            {"empirical_coverage", r.empirical_coverage},
            {"mace_x100", r.mace.x100},
            {"mace_ci", {r.mace.ci_lo, r.mace.ci_hi}},
            {"mean_width", r.mean_width},
            {"folds", r.folds},
            {"notes", r.notes}};
}

Json to_json(const SweepResult& r) {
    return {{"estimator", to_string(r.estimator)},
            {"N", r.N},
            {"mean_estimate", r.mean_estimate},
            {"std_error", r.std_error},
            {"bias", r.bias},
            {"mse", r.mse},
            {"mse_mc_se", r.mse_mc_se},
            {"true_value", r.true_value},
            {"replicates", r.replicates},
            {"failures", r.failures}};
}

Json to_json(const StratifiedAssignment& a) {
    Json j;
    j["z_med"] = a.z_med;
    j["counts"] = {{"PLUS", a.count(Stratum::plus)}, {"MINUS", a.count(Stratum::minus)}};
    Json samples = Json::array();
    for (std::size_t i = 0; i < a.sample_ids.size(); ++i)
        samples.push_back({{"sample_id", a.sample_ids[i]},
                           {"log_evidence", a.evidence[i]},
                           {"stratum", to_string(a.stratum[i])}});
    j["samples"] = samples;
    j["warnings"] = a.warnings;
    return j;
}

Json to_json(const MixtureResult& r) {
    Json j;
    j["assignment"] = to_json(r.assignment);
    Json genes = Json::array();
    for (const auto& g : r.genes)
        genes.push_back({{"gene", g.gene},
                         {"levels", g.levels},
                         {"T_pooled", g.T_pooled},
                         {"T_plus", g.T_plus},
                         {"T_minus", g.T_minus},
                         {"pooled", to_json(g.pooled)},
                         {"stratified", to_json(g.stratified)}});
    j["genes"] = genes;
    return j;
}

Json to_json(const SampleLabel& l) {
    Json cn = Json::object();
    for (const auto& [g, v] : l.copy_number) cn[g] = v;
    return {{"sample_id", l.sample_id}, {"stratum", l.stratum}, {"copy_number", cn}};
}

SampleLabel label_from_json(const Json& j) {
    SampleLabel l;
    l.sample_id = get<std::string>(j, "sample_id");
    l.stratum = get<std::string>(j, "stratum");
    for (const auto& [g, v] : need(j, "copy_number").items()) l.copy_number[g] = v.get<double>();
    return l;
}

Json to_json(const ImputedFile& f) {
    Json j;
    j["sample_ids"] = f.sample_ids;
    j["m"] = f.m;
    j["seed"] = f.seed;
    Json genes = Json::array();
    for (const auto& reps : f.genes) {
        Json arr = Json::array();
        for (const auto& c : reps) arr.push_back(to_json(c));
        genes.push_back({{"gene", reps.empty() ? std::string() : reps.front().gene}, {"repetitions", arr}});
    }
    j["genes"] = genes;
    return j;
}

ImputedFile imputed_file_from_json(const Json& j) {
    ImputedFile f;
    f.sample_ids = get<std::vector<std::string>>(j, "sample_ids");
    f.m = get<std::size_t>(j, "m");
    f.seed = get_or<std::uint64_t>(j, "seed", 0);
    for (const auto& g : need(j, "genes")) {
        std::vector<ImputedCohort> reps;
        for (const auto& r : need(g, "repetitions")) {
            reps.push_back(imputed_from_json(r));
            if (reps.back().values.size() != f.sample_ids.size())
                throw DataError("json: imputed values do not match the sample ids");
        }
        if (reps.empty()) throw DataError("json: gene without repetitions");
        f.genes.push_back(std::move(reps));
    }
    return f;
}

PriorSet prior_set_from_json(const Json& j, double ess_override) {
    try {
        const double ess = ess_override >= 0.0 ? ess_override : get_or<double>(j, "effective_sample_size", 5.0);
        if (!(ess >= 0.0)) throw ConfigError("prior: effective sample size must be non-negative");
        PriorSet set;
        if (j.contains("genes"))
            for (const auto& [g, e] : j.at("genes").items()) set.genes.emplace(g, prior_entry(e, ess, g));
        if (j.contains("default")) set.fallback = prior_entry(j.at("default"), ess, "default");
        if (set.empty()) throw DataError("prior: neither 'genes' nor 'default' present");
        return set;
    } catch (const nlohmann::json::exception& e) {
        throw DataError(std::string("prior: ") + e.what());
    }
}

Json to_json(const PriorSet& p) {
    auto entry = [](const PseudoPriorSpec& s) {
        return Json{{"source", s.source == PriorSource::replay ? "replay" : "generated"}, {"values", s.values}};
    };
    Json j;
    double ess = 0.0;
    if (!p.genes.empty()) ess = p.genes.begin()->second.effective_sample_size;
    else if (p.fallback) ess = p.fallback->effective_sample_size;
    j["effective_sample_size"] = ess;
    Json genes = Json::object();
    for (const auto& [g, s] : p.genes) genes[g] = entry(s);
    j["genes"] = genes;
    if (p.fallback) j["default"] = entry(*p.fallback);
    return j;
}

PriorSet load_prior_set(const std::filesystem::path& path, double ess_override) {
    const Json j = read_json_file(path);
    try {
        return prior_set_from_json(j, ess_override);
    } catch (const DataError& e) {
        throw DataError(path.string() + ": " + e.what());
    }
}

SynthSpec synth_spec_from_json(const Json& j) {
    try {
        SynthSpec s;
        s.genes.clear();
        for (const auto& g : need(j, "genes"))
            s.genes.push_back({get<std::string>(g, "name"), get<std::size_t>(g, "amplicons"),
                               get_or<double>(g, "delta", 0.0), get_or<double>(g, "tau2", 0.01)});
        s.noise = parse_noise_kind(get_or<std::string>(j, "noise", "soft_laplace"));
        s.noise_df = get_or<double>(j, "noise_df", 4.0);
        if (j.contains("strata")) {
            s.strata.clear();
            for (const auto& st : j.at("strata"))
                s.strata.push_back({get_or<std::string>(st, "name", "stratum"), get<double>(st, "fraction"),
                                    get<double>(st, "noise_scale"), get_or<double>(st, "bias", 0.0)});
        }
        if (j.contains("positives"))
            for (const auto& p : j.at("positives"))
                s.positives.push_back({get<std::size_t>(p, "sample"), get<std::string>(p, "gene"),
                                       get<double>(p, "copy_number")});
        s.seed = get_or<std::uint64_t>(j, "seed", 1);
        s.validate();
        return s;
    } catch (const nlohmann::json::exception& e) {
        throw DataError(std::string("synth spec: ") + e.what());
    }
}

Json to_json(const SynthSpec& s) {
    Json genes = Json::array();
    for (const auto& g : s.genes)
        genes.push_back({{"name", g.name}, {"amplicons", g.amplicons}, {"delta", g.delta}, {"tau2", g.tau2}});
    Json strata = Json::array();
    for (const auto& st : s.strata)
        strata.push_back(
            {{"name", st.name}, {"fraction", st.fraction}, {"noise_scale", st.noise_scale}, {"bias", st.bias}});
    Json pos = Json::array();
    for (const auto& p : s.positives)
        pos.push_back({{"sample", p.sample}, {"gene", p.gene}, {"copy_number", p.copy_number}});
    return {{"genes", genes}, {"noise", to_string(s.noise)}, {"noise_df", s.noise_df},
            {"strata", strata}, {"positives", pos},           {"seed", s.seed}};
}

Json read_json_file(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw DataError("cannot open '" + path.string() + "'");
    try {
        return Json::parse(in);
    } catch (const nlohmann::json::exception& e) {
        throw DataError(path.string() + ": " + e.what());
    }
}

void write_text_file(const std::filesystem::path& path, const std::string& text) {
    if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
    std::ofstream out(path, std::ios::binary);
    if (!out) throw DataError("cannot write '" + path.string() + "'");
    out << text;
    if (!out) throw DataError("write failed for '" + path.string() + "'");
}

void write_json_file(const std::filesystem::path& path, const Json& j) { write_text_file(path, j.dump(2) + "\n"); }

std::vector<PosteriorSummary> read_posteriors(const std::filesystem::path& path) {
    std::vector<std::filesystem::path> files;
    if (std::filesystem::is_directory(path)) {
        for (const auto& e : std::filesystem::directory_iterator(path))
            if (e.path().extension() == ".json") files.push_back(e.path());
        std::sort(files.begin(), files.end());
    } else {
        files.push_back(path);
    }
    if (files.empty()) throw DataError("no posterior files in '" + path.string() + "'");
    std::vector<PosteriorSummary> out;
    for (const auto& f : files) {
        try {
            out.push_back(posterior_from_json(read_json_file(f)));
        } catch (const DataError& e) {
            throw DataError(f.string() + ": " + e.what());
        }
    }
    return out;
}

}  // namespace ampcal
