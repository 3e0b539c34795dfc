#include "ampcal/studies.hpp"

#include "ampcal/errors.hpp"
#include "ampcal/pipeline.hpp"
#include "ampcal/rng.hpp"
#include "ampcal/serialize.hpp"

#include <algorithm>
#include <cmath>
#include <map>

namespace ampcal {

namespace fs = std::filesystem;

const std::vector<std::string>& study_names() {
    static const std::vector<std::string> n{"loo", "sweep", "impute-sweep", "mixture", "biasvar"};
    return n;
}

const std::vector<std::string>& study_keys(const std::string& study) {
    static const std::map<std::string, std::vector<std::string>> keys{
        {"loo",
         {"posteriors", "spec", "K", "replicates", "methods", "draws", "warmup", "m", "m_frac", "repetitions",
          "prior", "ess", "resamples"}},
        {"sweep",
         {"delta", "tau2", "n_grid", "replicates", "p", "ess", "prior_count", "fixed_m", "scaled_m_frac",
          "repetitions"}},
        {"impute-sweep",
         {"posteriors", "labels", "genes", "K", "delta", "tau2", "positive_gene", "positives", "copy_number",
          "fractions", "repetitions", "p", "prior", "ess"}},
        {"mixture",
         {"posteriors", "spec", "K", "matched_fraction", "noise_scale", "noise_ratio", "estimate", "draws", "warmup",
          "m", "m_frac", "repetitions", "prior", "ess", "resamples", "force"}},
        {"biasvar",
         {"spec", "n_test", "n_clean_refs", "n_degraded_refs", "pool_size", "bootstrap", "ref_noise",
          "degraded_noise", "shift"}},
    };
    const auto it = keys.find(study);
    if (it == keys.end()) throw ConfigError("unknown study '" + study + "'");
    return it->second;
}

GeneCohort synthetic_gene_cohort(std::size_t genes, std::size_t K, double delta, double tau2,
                                 const std::string& positive_gene, std::size_t positives, double copy_number,
                                 std::uint64_t seed) {
    if (positives > K) throw ConfigError("more positives than samples");
    SynthSpec spec;
    for (std::size_t j = 0; j < genes; ++j) {
        std::string name = std::to_string(j + 1);
        if (name.size() < 2) name.insert(0, 1, '0');
        spec.genes.push_back({"G" + name, 1, delta, tau2});
    }
    spec.seed = seed;
    GeneCohort c;
    c.genes = spec.gene_names();
    if (positives > 0 && std::find(c.genes.begin(), c.genes.end(), positive_gene) == c.genes.end())
        throw ConfigError("positive gene '" + positive_gene + "' is not in the cohort");
    c.mu = gen_gene_means(spec, K);
    c.positive.assign(genes, std::vector<bool>(K, false));
    for (std::size_t j = 0; j < genes; ++j) {
        if (c.genes[j] != positive_gene) continue;
        for (std::size_t s = 0; s < positives; ++s) {
            c.mu[j][s] += std::log(copy_number / 2.0);
            c.positive[j][s] = true;
        }
    }
    return c;
}

namespace {

ToleranceConfig tolerance_config(const KeyValues& kv, double p) {
    ToleranceConfig t;
    const std::string m = kv.str("m", "auto");
    if (m != "auto") t.m = static_cast<std::size_t>(parse_uint(m, "m"));
    t.m_frac = kv.real("m_frac", 0.2);
    t.repetitions = kv.uint("repetitions", 25);
    t.p = p;
    return t;
}

// Prior from a file, or generated at the moment-matched reference of
// (delta, tau2) when no file is named and ess > 0.
PriorSet study_priors(const KeyValues& kv, double delta, double tau2, std::uint64_t seed) {
    const double ess = kv.real("ess", 5.0);
    if (ess <= 0.0) return {};
    if (kv.has("prior")) return load_prior_set(kv.str("prior", ""), ess);
    PriorSet p;
    p.fallback = generate_pseudo_prior(moment_match(delta * delta / tau2, tau2), 1000, ess,
                                       derive_seed(seed, "study:prior"));
    return p;
}

SynthSpec study_spec(const KeyValues& kv) {
    if (kv.has("spec")) return synth_spec_from_json(read_json_file(kv.str("spec", "")));
    return SynthSpec::default_panel();
}

std::vector<Method> parse_methods(const std::vector<std::string>& names) {
    std::vector<Method> out;
    for (const auto& n : names) out.push_back(parse_method(n));
    return out;
}

std::vector<std::string> method_names(const std::vector<Method>& methods) {
    std::vector<std::string> out;
    for (Method m : methods) out.push_back(to_string(m));
    return out;
}

std::vector<fs::path> emit(const fs::path& dir, const std::string& name, const std::string& csv, const Json& summary) {
    write_text_file(dir / (name + ".csv"), csv);
    write_json_file(dir / (name + ".json"), summary);
    return {dir / (name + ".csv"), dir / (name + ".json")};
}

std::vector<fs::path> run_loo(const KeyValues& kv, std::uint64_t seed, const fs::path& out) {
    const auto tol = tolerance_config(kv, 0.05);
    const std::size_t resamples = kv.uint("resamples", kBootstrapResamples);
    std::vector<CalibrationReport> reports;
    Json summary;
    summary["seed"] = seed;

    if (kv.has("posteriors")) {
        const auto posteriors = read_posteriors(kv.str("posteriors", ""));
        const auto priors = study_priors(kv, 0.0, 0.01, seed);
        const auto methods = parse_methods(kv.list("methods", {"gamma", "mse"}));
        const auto mu = mu_by_gene(posteriors);
        std::vector<std::string> ids;
        for (const auto& p : posteriors) ids.push_back(p.sample_id);
        for (std::size_t j = 0; j < mu.size(); ++j) {
            const auto& gene = posteriors.front().genes[j];
            for (Method m : methods) {
                CoverageTable t;
                if (m == Method::gamma)
                    t = loo_table(mu[j], gamma_limits(tol, priors.find(gene), seed, gene), mace_grid(), ids);
                else if (m == Method::mse)
                    t = loo_table(mu[j], mse_limits(), mace_grid(), ids);
                else
                    throw ConfigError("loo on posteriors supports the gamma and mse methods only");
                reports.push_back(calibration_report(gene, m, t, resamples, derive_seed(seed, "report:" + gene)));
            }
        }
        summary["source"] = kv.str("posteriors", "");
    } else {
        const SynthSpec base = study_spec(kv);
        PanelStudyOptions o;
        o.methods = parse_methods(kv.list("methods", method_names(o.methods)));
        o.hmc.n_draws = kv.uint("draws", 1000);
        o.hmc.n_warmup = kv.uint("warmup", 500);
        o.tolerance = tol;
        o.resamples = resamples;
        const double tau2 = base.genes.front().tau2;
        o.priors = study_priors(kv, base.genes.front().delta, tau2, seed);
        const std::size_t K = kv.uint("K", 50), R = kv.uint("replicates", 5);
        const auto genes = base.gene_names();
        std::map<std::string, std::map<Method, CoverageTable>> pooled;
        for (std::size_t r = 0; r < R; ++r) {
            SynthSpec spec = base;
            spec.seed = derive_seed(seed, "loo:cohort", {r});
            const auto cohort = gen_panel(spec, K);
            o.seed = derive_seed(seed, "loo:fit", {r});
            const auto fits = fit_panel_cohort(cohort.samples, o);
            const auto tables = panel_coverage(fits, genes, o, derive_seed(seed, "loo:tol", {r}));
            for (const auto& [g, by_method] : tables)
                for (const auto& [m, t] : by_method) pooled[g][m].append(t);
        }
        for (const auto& g : genes)
            for (Method m : o.methods)
                reports.push_back(calibration_report(g, m, pooled[g][m], resamples,
                                                     derive_seed(seed, "report:" + g + ":" + to_string(m))));
        summary["spec"] = to_json(base);
        summary["K"] = K;
        summary["replicates"] = R;
    }
    Json rs = Json::array();
    for (const auto& r : reports) rs.push_back(to_json(r));
    summary["reports"] = rs;
    return emit(out, "loo", calibration_csv(reports), summary);
}

std::vector<fs::path> run_sweep(const KeyValues& kv, std::uint64_t seed, const fs::path& out) {
    SweepConfig c;
    c.delta = kv.real("delta", c.delta);
    c.tau2 = kv.real("tau2", c.tau2);
    if (kv.has("n_grid")) {
        c.n_grid.clear();
        for (double v : kv.reals("n_grid", {})) c.n_grid.push_back(static_cast<std::size_t>(v));
    }
    c.replicates = kv.uint("replicates", c.replicates);
    c.p = kv.real("p", c.p);
    c.ess = kv.real("ess", c.ess);
    c.prior_count = kv.uint("prior_count", c.prior_count);
    c.fixed_m = kv.uint("fixed_m", c.fixed_m);
    c.scaled_m_frac = kv.real("scaled_m_frac", c.scaled_m_frac);
    c.repetitions = kv.uint("repetitions", c.repetitions);
    c.seed = seed;
    const auto rows = estimator_sweep(c);
    Json summary;
    summary["seed"] = seed;
    summary["delta"] = c.delta;
    summary["tau2"] = c.tau2;
    summary["p"] = c.p;
    summary["true_value"] = rows.empty() ? 0.0 : rows.front().true_value;
    Json rs = Json::array();
    for (const auto& r : rows) rs.push_back(to_json(r));
    summary["results"] = rs;
    return emit(out, "sweep", sweep_csv(rows), summary);
}

std::vector<fs::path> run_impute_sweep(const KeyValues& kv, std::uint64_t seed, const fs::path& out) {
    const double p = kv.real("p", 0.05);
    const auto fractions = kv.reals("fractions", {0.0, 0.1, 0.2, 0.3, 0.4, 0.5});
    const std::size_t reps = kv.uint("repetitions", 25);
    GeneCohort c;
    double delta = kv.real("delta", 0.0), tau2 = kv.real("tau2", 0.01);
    if (kv.has("posteriors")) {
        if (!kv.has("labels")) throw ConfigError("impute-sweep on posteriors needs a labels file");
        const auto posteriors = read_posteriors(kv.str("posteriors", ""));
        c.genes = posteriors.front().genes;
        c.mu = mu_by_gene(posteriors);
        std::map<std::string, SampleLabel> labels;
        for (const auto& l : read_json_file(kv.str("labels", "")).at("samples"))
            labels.emplace(l.at("sample_id").get<std::string>(), label_from_json(l));
        c.positive.assign(c.genes.size(), std::vector<bool>(posteriors.size(), false));
        for (std::size_t s = 0; s < posteriors.size(); ++s) {
            const auto it = labels.find(posteriors[s].sample_id);
            if (it == labels.end()) continue;
            for (std::size_t j = 0; j < c.genes.size(); ++j) {
                const auto cn = it->second.copy_number.find(c.genes[j]);
                c.positive[j][s] = cn != it->second.copy_number.end() && cn->second != 2.0;
            }
        }
    } else {
        c = synthetic_gene_cohort(kv.uint("genes", 14), kv.uint("K", 14), delta, tau2,
                                  kv.str("positive_gene", "G01"), kv.uint("positives", 5),
                                  kv.real("copy_number", 6.0), derive_seed(seed, "impute-sweep:cohort"));
    }
    const auto priors = study_priors(kv, delta, tau2, seed);
    const auto rows = imputation_fraction_sweep(c.genes, c.mu, c.positive, fractions, priors, reps, p,
                                                derive_seed(seed, "impute-sweep"));
    Json summary;
    summary["seed"] = seed;
    summary["p"] = p;
    Json per_fraction = Json::array();
    for (double f : fractions) {
        double sum = 0.0, mx = 0.0;
        std::size_t n = 0;
        for (const auto& r : rows)
            if (r.fraction == f && !r.cnv_gene) {
                sum += r.rel_error;
                mx = std::max(mx, r.rel_error);
                ++n;
            }
        per_fraction.push_back({{"fraction", f},
                                {"mean_rel_error_unaffected", n ? sum / static_cast<double>(n) : 0.0},
                                {"max_rel_error_unaffected", mx}});
    }
    summary["unaffected"] = per_fraction;
    return emit(out, "impute-sweep", impute_sweep_csv(rows), summary);
}

std::vector<fs::path> run_mixture(const KeyValues& kv, std::uint64_t seed, const fs::path& out) {
    const auto tol = tolerance_config(kv, 0.05);
    const std::size_t resamples = kv.uint("resamples", kBootstrapResamples);
    std::vector<PosteriorSummary> posteriors;
    SynthSpec spec;
    if (kv.has("posteriors")) {
        posteriors = read_posteriors(kv.str("posteriors", ""));
    } else {
        spec = study_spec(kv);
        const double f = kv.real("matched_fraction", 0.5), scale = kv.real("noise_scale", 0.1);
        spec.strata = {{"matched", f, scale, 0.0}, {"unmatched", 1.0 - f, scale * kv.real("noise_ratio", 3.0), 0.0}};
        spec.seed = derive_seed(seed, "mixture:cohort");
        const auto cohort = gen_panel(spec, kv.uint("K", 40));
        FitOptions fo;
        fo.hmc.n_draws = kv.uint("draws", 1000);
        fo.hmc.n_warmup = kv.uint("warmup", 500);
        if (kv.str("estimate", "mean") == "map") fo.estimate = PointEstimate::map;
        posteriors = fit_cohort(cohort.samples, ModelHyperParams{}, fo, derive_seed(seed, "mixture:fit"));
    }
    const auto genes = posteriors.front().genes;
    std::vector<std::string> ids;
    std::vector<double> z;
    for (const auto& p : posteriors) {
        ids.push_back(p.sample_id);
        z.push_back(p.log_evidence);
    }
    const auto priors = study_priors(kv, 0.0, 0.01, seed);
    const auto r = mixture_study(ids, z, genes, mu_by_gene(posteriors), priors, tol, derive_seed(seed, "mixture"),
                                 mace_grid(), resamples, kv.flag("force", false));
    Json summary = to_json(r);
    summary["seed"] = seed;
    return emit(out, "mixture", mixture_csv(r), summary);
}

std::vector<fs::path> run_biasvar(const KeyValues& kv, std::uint64_t seed, const fs::path& out) {
    BiasVarianceConfig c;
    c.spec = study_spec(kv);
    c.n_test = kv.uint("n_test", c.n_test);
    c.n_clean_refs = kv.uint("n_clean_refs", c.n_clean_refs);
    c.n_degraded_refs = kv.uint("n_degraded_refs", c.n_degraded_refs);
    c.pool_size = kv.uint("pool_size", c.pool_size);
    c.bootstrap = kv.uint("bootstrap", c.bootstrap);
    c.ref_noise = kv.real("ref_noise", c.ref_noise);
    c.degraded_noise = kv.real("degraded_noise", c.degraded_noise);
    for (const auto& item : kv.list("shift", {})) {
        const auto colon = item.find(':');
        if (colon == std::string::npos) throw ConfigError("shift entries must be gene:value");
        c.degraded_shift[item.substr(0, colon)] = parse_double(item.substr(colon + 1), "shift");
    }
    c.seed = seed;
    const auto rows = bias_variance_decomposition(c);
    Json summary;
    summary["seed"] = seed;
    Json rs = Json::array();
    for (const auto& r : rows)
        rs.push_back({{"degraded", r.degraded},
                      {"gene", r.gene},
                      {"bias", r.bias},
                      {"variance", r.variance},
                      {"msd", r.msd},
                      {"mc_se", r.mc_se},
                      {"count", r.count}});
    summary["rows"] = rs;
    return emit(out, "biasvar", bias_variance_csv(rows), summary);
}

}  // namespace

std::vector<fs::path> run_study(const std::string& study, const KeyValues& config, std::uint64_t seed,
                                const fs::path& out_dir) {
    config.require_known(study_keys(study));
    fs::create_directories(out_dir);
    if (study == "loo") return run_loo(config, seed, out_dir);
    if (study == "sweep") return run_sweep(config, seed, out_dir);
    if (study == "impute-sweep") return run_impute_sweep(config, seed, out_dir);
    if (study == "mixture") return run_mixture(config, seed, out_dir);
    return run_biasvar(config, seed, out_dir);
}

}  // namespace ampcal
