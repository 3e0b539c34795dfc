#include "ampcal/pipeline.hpp"

#include "ampcal/errors.hpp"
#include "ampcal/rng.hpp"
#include "ampcal/stats.hpp"

#include <algorithm>
#include <fstream>
#include <set>
#include <sstream>

namespace ampcal {

namespace fs = std::filesystem;

std::string hex64(std::uint64_t v) {
    static const char* digits = "0123456789abcdef";
    std::string s(16, '0');
    for (int i = 15; i >= 0; --i, v >>= 4) s[static_cast<std::size_t>(i)] = digits[v & 0xf];
    return s;
}

std::string file_digest(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DataError("cannot read '" + path.string() + "' for digest");
    std::ostringstream ss;
    ss << in.rdbuf();
    return hex64(fnv1a64(ss.str()));
}

std::uint64_t stage_seed(std::uint64_t master, const std::string& stage) { return derive_seed(master, "stage:" + stage); }

Json to_json(const RunManifest& m) {
    Json j;
    j["version"] = m.version;
    j["config_hash"] = m.config_hash;
    j["master_seed"] = m.master_seed;
    Json seeds = Json::object();
    for (const auto& [k, v] : m.seeds) seeds[k] = v;
    j["seeds"] = seeds;
    Json stages = Json::array();
    for (const auto& s : m.stages) {
        Json outs = Json::array();
        for (const auto& o : s.outputs) outs.push_back({{"path", o.path}, {"digest", o.digest}});
        Json st = {{"name", s.name}, {"status", s.status}, {"outputs", outs}};
        if (!s.error.empty()) st["error"] = s.error;
        stages.push_back(st);
    }
    j["stages"] = stages;
    j["status"] = m.status;
    j["warnings"] = m.warnings;
    return j;
}

std::vector<LcnrMatrix> lcnr_cohort(const PanelDef& panel, const std::vector<SampleCounts>& counts,
                                    const std::vector<std::string>& reference_ids, double pseudo_count) {
    auto shared = std::make_shared<const PanelDef>(panel);
    std::vector<double> ref;
    if (!reference_ids.empty()) ref = reference_counts(counts, reference_ids);
    const std::set<std::string> refs(reference_ids.begin(), reference_ids.end());
    std::vector<LcnrMatrix> out;
    for (const auto& s : counts)
        if (!refs.count(s.sample_id)) out.push_back(sample_lcnr(s, shared, ref, pseudo_count));
    if (out.empty()) throw DataError("lcnr: no test samples remain after removing the references");
    return out;
}

std::vector<std::vector<double>> mu_by_gene(const std::vector<PosteriorSummary>& posteriors) {
    if (posteriors.empty()) throw DataError("no posterior summaries");
    const auto& genes = posteriors.front().genes;
    std::vector<std::vector<double>> mu(genes.size());
    for (const auto& p : posteriors) {
        if (p.genes != genes) throw DataError("posterior '" + p.sample_id + "' has a different gene list");
        for (std::size_t j = 0; j < genes.size(); ++j) mu[j].push_back(p.mu_hat[j]);
    }
    return mu;
}

ImputedFile impute_posteriors(const std::vector<PosteriorSummary>& posteriors, const ToleranceConfig& config,
                              std::uint64_t seed) {
    const auto mu = mu_by_gene(posteriors);
    ImputedFile f;
    for (const auto& p : posteriors) f.sample_ids.push_back(p.sample_id);
    f.m = config.imputed_count(posteriors.size());
    f.seed = seed;
    const std::size_t reps = f.m == 0 ? 1 : config.repetitions;
    for (std::size_t j = 0; j < mu.size(); ++j)
        f.genes.push_back(impute_repetitions(mu[j], f.m, reps, seed, posteriors.front().genes[j]));
    return f;
}

std::vector<GammaToleranceModel> tolerance_from_imputed(const ImputedFile& imputed, const PriorSet& priors, double p) {
    std::vector<GammaToleranceModel> out;
    for (const auto& reps : imputed.genes) {
        const auto fit = fit_repetitions(reps, priors.find(reps.front().gene));
        out.push_back(fit.model(p));
    }
    return out;
}

void preflight(const RunConfig& config) {
    config.validate();
    if (config.counts.empty()) throw ConfigError("config: 'counts' is required");
    if (config.panel.empty()) throw ConfigError("config: 'panel' is required");
    if (!fs::exists(config.counts)) throw ConfigError("config: counts file '" + config.counts + "' does not exist");
    if (!fs::exists(config.panel)) throw ConfigError("config: panel file '" + config.panel + "' does not exist");
    if (config.ess > 0.0) {
        if (config.prior.empty())
            throw ConfigError("config: ess > 0 requires a prior file; set ess = 0 to run without a prior");
        if (!fs::exists(config.prior)) throw ConfigError("config: prior file '" + config.prior + "' does not exist");
    }
}

RunManifest run_pipeline(const RunConfig& config) {
    preflight(config);
    const fs::path out = config.out_dir;
    fs::create_directories(out);
    fs::remove(out / "FAILED");

    RunManifest manifest;
    manifest.version = config.version;
    manifest.config_hash = hex64(config.hash());
    manifest.master_seed = config.seed;
    for (const char* s : {"fit", "impute", "stratify"}) manifest.seeds.emplace_back(s, stage_seed(config.seed, s));
    write_text_file(out / "config.txt", config.serialize());

    StageRecord* current = nullptr;
    auto begin = [&](const std::string& name) {
        manifest.stages.push_back({name, "running", {}, {}});
        current = &manifest.stages.back();
    };
    auto record = [&](const fs::path& rel) {
        current->outputs.push_back({rel.generic_string(), file_digest(out / rel)});
    };

    try {
        begin("lcnr");
        const PanelDef panel = load_panel(config.panel);
        const auto counts = load_counts(config.counts, panel);
        const auto lcnr = lcnr_cohort(panel, counts, config.reference_samples, config.pseudo_count);
        if (config.stratify && lcnr.size() < kMinStratifyCohort && !config.force)
            throw DataError("stratify: K = " + std::to_string(lcnr.size()) +
                            " samples; evidence stratification requires K > 20 so that each stratum retains at "
                            "least ten observations");
        PriorSet priors;
        if (config.ess > 0.0) priors = load_prior_set(config.prior, config.ess);
        for (const auto& x : lcnr) {
            const fs::path rel = fs::path("lcnr") / (x.sample_id + ".tsv");
            write_lcnr_tsv(x, out / rel);
            record(rel);
        }
        current->status = "ok";

        begin("fit");
        const auto posteriors = fit_cohort(lcnr, config.hyper, config.fit_options(), stage_seed(config.seed, "fit"));
        for (const auto& p : posteriors) {
            const fs::path rel = fs::path("posteriors") / (p.sample_id + ".json");
            write_json_file(out / rel, to_json(p));
            record(rel);
            for (const auto& w : p.diagnostics.warnings) manifest.warnings.push_back(p.sample_id + ": " + w);
        }
        current->status = "ok";

        begin("impute");
        const auto tol_cfg = config.tolerance();
        const auto imputed = impute_posteriors(posteriors, tol_cfg, stage_seed(config.seed, "impute"));
        write_json_file(out / "imputed.json", to_json(imputed));
        record("imputed.json");
        current->status = "ok";

        begin("tolerance");
        Json tol = {{"p", config.p}, {"m", imputed.m}, {"ess", config.ess}};
        Json genes = Json::array();
        for (const auto& m : tolerance_from_imputed(imputed, priors, config.p)) genes.push_back(to_json(m));
        tol["genes"] = genes;
        write_json_file(out / "tolerance.json", tol);
        record("tolerance.json");
        current->status = "ok";

        if (config.stratify) {
            begin("stratify");
            const auto assignment = evidence_split(posteriors, config.force);
            const auto& gene_names = posteriors.front().genes;
            const auto strat = stratified_tolerance(assignment, gene_names, mu_by_gene(posteriors), priors, tol_cfg,
                                                    stage_seed(config.seed, "stratify"));
            Json j = to_json(assignment);
            Json sg = Json::array();
            for (const auto& g : strat)
                sg.push_back({{"gene", g.gene}, {"PLUS", to_json(g.plus)}, {"MINUS", to_json(g.minus)}});
            j["genes"] = sg;
            write_json_file(out / "stratify.json", j);
            record("stratify.json");
            for (const auto& w : assignment.warnings) manifest.warnings.push_back(w);
            current->status = "ok";
        }
    } catch (const std::exception& e) {
        const std::string stage = current ? current->name : "setup";
        if (current) {
            current->status = "failed";
            current->error = e.what();
        }
        manifest.status = "failed";
        write_text_file(out / "FAILED", "stage: " + stage + "\nerror: " + e.what() + "\n");
        write_json_file(out / "manifest.json", to_json(manifest));
        const std::string msg = "stage '" + stage + "' failed: " + e.what();
        const auto* err = dynamic_cast<const Error*>(&e);
        switch (err ? err->kind() : ErrorKind::data) {
            case ErrorKind::config: throw ConfigError(msg);
            case ErrorKind::numerical: throw NumericalError(msg);
            default: throw DataError(msg);
        }
    }
    write_json_file(out / "manifest.json", to_json(manifest));
    return manifest;
}

}  // namespace ampcal
