#include "CLI11.hpp"

#include "ampcal/bayescnv.hpp"
#include "ampcal/comparators.hpp"
#include "ampcal/config.hpp"
#include "ampcal/errors.hpp"
#include "ampcal/harness.hpp"
#include "ampcal/pipeline.hpp"
#include "ampcal/rng.hpp"
#include "ampcal/serialize.hpp"
#include "ampcal/stratify.hpp"
#include "ampcal/studies.hpp"
#include "ampcal/synth.hpp"

#include <cmath>
#include <filesystem>
#include <iostream>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace fs = std::filesystem;
using namespace ampcal;

namespace {

ModelHyperParams load_hyper(const std::string& path) {
    ModelHyperParams hp;
    if (path.empty()) return hp;
    const auto kv = KeyValues::load(path);
    kv.require_known({"prior_mu0_sd", "alpha_sigma", "beta_sigma", "alpha_tau0", "beta_tau0", "alpha_tau", "beta_tau"});
    hp.prior_mu0_sd = kv.real("prior_mu0_sd", hp.prior_mu0_sd);
    hp.alpha_sigma = kv.real("alpha_sigma", hp.alpha_sigma);
    hp.beta_sigma = kv.real("beta_sigma", hp.beta_sigma);
    hp.alpha_tau0 = kv.real("alpha_tau0", hp.alpha_tau0);
    hp.beta_tau0 = kv.real("beta_tau0", hp.beta_tau0);
    hp.alpha_tau = kv.real("alpha_tau", hp.alpha_tau);
    hp.beta_tau = kv.real("beta_tau", hp.beta_tau);
    hp.validate();
    return hp;
}

PriorSet priors_for(const std::string& path, double ess) {
    if (ess < 0.0) throw ConfigError("--ess must be non-negative");
    if (ess == 0.0) return {};
    if (path.empty()) throw ConfigError("--ess > 0 needs --prior FILE; pass --ess 0 to fit without a prior");
    return load_prior_set(path, ess);
}

ToleranceConfig tolerance_args(const std::optional<std::size_t>& m, double m_frac, std::size_t reps, double p) {
    ToleranceConfig t;
    t.m = m;
    t.m_frac = m_frac;
    t.repetitions = reps;
    t.p = p;
    if (!(m_frac >= 0.0 && m_frac < 1.0)) throw ConfigError("--m-frac must lie in [0, 1)");
    if (reps == 0) throw ConfigError("--reps must be positive");
    if (!(p > 0.0 && p <= 0.5)) throw ConfigError("--p must lie in (0, 0.5]");
    return t;
}

void note(const fs::path& p) { std::cout << "wrote " << p.generic_string() << "\n"; }

struct LcnrArgs {
    std::string counts, panel, out;
    std::vector<std::string> refs;
    double pseudo_count = 0.5;
};

void cmd_lcnr(const LcnrArgs& a) {
    const auto panel = load_panel(a.panel);
    const auto counts = load_counts(a.counts, panel);
    for (const auto& x : lcnr_cohort(panel, counts, a.refs, a.pseudo_count)) {
        const fs::path p = fs::path(a.out) / (x.sample_id + ".tsv");
        write_lcnr_tsv(x, p);
        note(p);
    }
}

struct FitArgs {
    std::string lcnr, hyper, out;
    std::size_t draws = 1000, warmup = 500, leapfrog = 32;
    std::uint64_t seed = 1;
    double level = 0.95;
    bool keep_draws = false;
};

FitOptions fit_options(const FitArgs& a) {
    if (a.draws < 100) throw ConfigError("--draws must be at least 100");
    if (!(a.level > 0.0 && a.level < 1.0)) throw ConfigError("--level must lie in (0, 1)");
    FitOptions o;
    o.hmc.n_draws = a.draws;
    o.hmc.n_warmup = a.warmup;
    o.hmc.n_leapfrog = a.leapfrog;
    o.level = a.level;
    o.keep_draws = a.keep_draws;
    return o;
}

void cmd_fit(const FitArgs& a) {
    const auto hp = load_hyper(a.hyper);
    const auto samples = read_lcnr_inputs(a.lcnr);
    for (const auto& s : fit_cohort(samples, hp, fit_options(a), a.seed)) {
        const fs::path p = fs::path(a.out) / (s.sample_id + ".json");
        write_json_file(p, to_json(s));
        note(p);
    }
}

struct CompareArgs {
    FitArgs fit;
    std::vector<std::string> methods{"hpd", "coarsened", "sandwich", "mse"};
    std::optional<double> eta;
};

// Tolerance methods score |mu_hat| <= sqrt(T) with T fitted on the other
// samples, reported as the interval mu_hat +- sqrt(T).
void cmd_compare(const CompareArgs& a) {
    std::vector<Method> methods;
    for (const auto& m : a.methods) methods.push_back(parse_method(m));
    const auto hp = load_hyper(a.fit.hyper);
    const auto samples = read_lcnr_inputs(a.fit.lcnr);
    auto opts = fit_options(a.fit);
    const auto posteriors = fit_cohort(samples, hp, opts, a.fit.seed);
    const auto mu = mu_by_gene(posteriors);
    const auto& genes = posteriors.front().genes;

    Json out = Json::array();
    auto push = [&](const std::string& id, const ComparatorInterval& c) {
        Json j = to_json(c);
        Json row = {{"sample_id", id}};
        for (auto it = j.begin(); it != j.end(); ++it) row[it.key()] = it.value();
        out.push_back(row);
    };
    for (std::size_t s = 0; s < samples.size(); ++s) {
        const std::string& id = samples[s].sample_id;
        for (Method m : methods) {
            std::vector<ComparatorInterval> iv;
            switch (m) {
            case Method::hpd: iv = hpd_intervals(posteriors[s]); break;
            case Method::sandwich: iv = sandwich_intervals(samples[s], hp, a.fit.level); break;
            case Method::coarsened: {
                HmcOptions h = opts.hmc;
                h.seed = derive_seed(a.fit.seed, "coarsened:" + id);
                const double eta = a.eta ? *a.eta : default_coarsening_rate(samples[s]);
                iv = coarsened_intervals(samples[s], hp, eta, a.fit.level, h);
                break;
            }
            case Method::mse:
            case Method::gamma: {
                if (samples.size() < 5) throw DataError("compare: tolerance methods need at least five samples");
                ToleranceConfig tc;
                tc.m = 0;
                for (std::size_t j = 0; j < genes.size(); ++j) {
                    std::vector<double> train;
                    for (std::size_t t = 0; t < samples.size(); ++t)
                        if (t != s) train.push_back(mu[j][t]);
                    const LimitFn f = m == Method::mse
                                          ? mse_limits()
                                          : gamma_limits(tc, nullptr, derive_seed(a.fit.seed, "compare:" + genes[j]),
                                                         genes[j]);
                    const double level = a.fit.level;
                    const double r = std::sqrt(f(train, std::span<const double>(&level, 1), s).front());
                    iv.push_back({m, genes[j], level, mu[j][s] - r, mu[j][s] + r});
                }
                break;
            }
            }
            for (const auto& c : iv) push(id, c);
        }
    }
    write_json_file(a.fit.out, out);
    note(a.fit.out);
}

struct ImputeArgs {
    std::string posteriors, out;
    std::optional<std::size_t> m;
    double m_frac = 0.2;
    std::size_t reps = 25;
    std::uint64_t seed = 1;
};

void cmd_impute(const ImputeArgs& a) {
    const auto cfg = tolerance_args(a.m, a.m_frac, a.reps, 0.05);
    write_json_file(a.out, to_json(impute_posteriors(read_posteriors(a.posteriors), cfg, a.seed)));
    note(a.out);
}

struct ToleranceArgs {
    std::string imputed, prior, out;
    double ess = 5.0, p = 0.05;
};

void cmd_tolerance(const ToleranceArgs& a) {
    tolerance_args(std::nullopt, 0.2, 1, a.p);
    const auto imputed = imputed_file_from_json(read_json_file(a.imputed));
    const auto priors = priors_for(a.prior, a.ess);
    Json tol = {{"p", a.p}, {"m", imputed.m}, {"ess", a.ess}};
    Json genes = Json::array();
    for (const auto& m : tolerance_from_imputed(imputed, priors, a.p)) genes.push_back(to_json(m));
    tol["genes"] = genes;
    write_json_file(a.out, tol);
    note(a.out);
}

struct StratifyArgs {
    ImputeArgs impute;
    ToleranceArgs tol;
    bool force = false;
};

void cmd_stratify(const StratifyArgs& a) {
    const auto cfg = tolerance_args(a.impute.m, a.impute.m_frac, a.impute.reps, a.tol.p);
    const auto posteriors = read_posteriors(a.impute.posteriors);
    const auto priors = priors_for(a.tol.prior, a.tol.ess);
    const auto assignment = evidence_split(posteriors, a.force);
    for (const auto& w : assignment.warnings) std::cerr << "warning: " << w << "\n";
    const auto strat = stratified_tolerance(assignment, posteriors.front().genes, mu_by_gene(posteriors), priors, cfg,
                                            derive_seed(a.impute.seed, "stratify"));
    Json j = to_json(assignment);
    Json sg = Json::array();
    for (const auto& g : strat) sg.push_back({{"gene", g.gene}, {"PLUS", to_json(g.plus)}, {"MINUS", to_json(g.minus)}});
    j["genes"] = sg;
    write_json_file(a.tol.out, j);
    note(a.tol.out);
}

struct SimulateArgs {
    std::string spec, out;
    std::size_t n = 50;
    std::optional<std::uint64_t> seed;
};

void cmd_simulate(const SimulateArgs& a) {
    SynthSpec spec = a.spec.empty() ? SynthSpec::default_panel() : synth_spec_from_json(read_json_file(a.spec));
    if (a.seed) spec.seed = *a.seed;
    if (a.n == 0) throw ConfigError("--n must be positive");
    const auto cohort = gen_panel(spec, a.n);
    const fs::path out = a.out;
    for (const auto& s : cohort.samples) write_lcnr_tsv(s, out / "lcnr" / (s.sample_id + ".tsv"));
    Json labels = Json::array();
    for (const auto& l : cohort.labels) labels.push_back(to_json(l));
    write_json_file(out / "labels.json", Json{{"seed", spec.seed}, {"samples", labels}});
    write_json_file(out / "spec.json", to_json(spec));
    std::cout << "wrote " << cohort.samples.size() << " samples to " << (out / "lcnr").generic_string() << "\n";
    note(out / "labels.json");
}

struct EvaluateArgs {
    std::string study, config, out = "ampcal_eval";
    std::vector<std::string> sets;
    std::uint64_t seed = 1;
};

std::pair<std::string, std::string> split_assignment(const std::string& s) {
    const auto eq = s.find('=');
    if (eq == std::string::npos || eq == 0) throw ConfigError("--set expects key=value, got '" + s + "'");
    return {s.substr(0, eq), s.substr(eq + 1)};
}

void cmd_evaluate(const EvaluateArgs& a) {
    KeyValues kv = a.config.empty() ? KeyValues{} : KeyValues::load(a.config);
    for (const auto& s : a.sets) {
        const auto [k, v] = split_assignment(s);
        kv.set(k, v);
    }
    for (const auto& p : run_study(a.study, kv, a.seed, a.out)) note(p);
}

struct RunArgs {
    std::string config, out;
    std::vector<std::string> sets;
    std::optional<std::uint64_t> seed;
    bool stratify = false, force = false;
};

void cmd_run(const RunArgs& a) {
    RunConfig c = a.config.empty() ? RunConfig{} : RunConfig::load(a.config);
    for (const auto& s : a.sets) {
        const auto [k, v] = split_assignment(s);
        c.set(k, v);
    }
    if (a.seed) c.seed = *a.seed;
    if (!a.out.empty()) c.out_dir = a.out;
    if (a.stratify) c.stratify = true;
    if (a.force) c.force = true;
    const auto manifest = run_pipeline(c);
    for (const auto& w : manifest.warnings) std::cerr << "warning: " << w << "\n";
    for (const auto& st : manifest.stages) std::cout << st.name << ": " << st.status << " (" << st.outputs.size() << " files)\n";
    note(fs::path(c.out_dir) / "manifest.json");
}

void add_fit_flags(CLI::App* sub, FitArgs& a) {
    sub->add_option("--lcnr", a.lcnr, "lCNR TSV file or directory of TSVs")->required();
    sub->add_option("--hyper", a.hyper, "key = value file of model hyperparameters (defaults if omitted)");
    sub->add_option("--draws", a.draws, "HMC draws kept per sample")->capture_default_str();
    sub->add_option("--warmup", a.warmup, "HMC warmup iterations")->capture_default_str();
    sub->add_option("--leapfrog", a.leapfrog, "leapfrog steps per trajectory")->capture_default_str();
    sub->add_option("--seed", a.seed, "master seed")->capture_default_str();
    sub->add_option("--level", a.level, "credible level of the intervals")->capture_default_str();
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"ampcal: per-gene tolerance limits for amplicon CNV calls"};
    app.set_version_flag("--version", std::string(AMPCAL_VERSION));
    app.require_subcommand(1);

    LcnrArgs lcnr;
    auto* s_lcnr = app.add_subcommand("lcnr", "normalized log copy-number ratios, one TSV per test sample");
    s_lcnr->add_option("--counts", lcnr.counts, "counts TSV")->required();
    s_lcnr->add_option("--panel", lcnr.panel, "panel JSON")->required();
    s_lcnr->add_option("--reference-samples", lcnr.refs, "reference sample ids, averaged per amplicon")->delimiter(',');
    s_lcnr->add_option("--pseudo-count", lcnr.pseudo_count, "pseudo-count c")->capture_default_str();
    s_lcnr->add_option("--out", lcnr.out, "output directory")->required();
    s_lcnr->callback([&] { cmd_lcnr(lcnr); });

    FitArgs fit;
    auto* s_fit = app.add_subcommand("fit", "hierarchical posterior per sample");
    add_fit_flags(s_fit, fit);
    s_fit->add_flag("--keep-draws", fit.keep_draws, "store the draws of mu in each summary");
    s_fit->add_option("--out", fit.out, "output directory of PosteriorSummary JSON files")->required();
    s_fit->callback([&] { cmd_fit(fit); });

    CompareArgs cmp;
    auto* s_cmp = app.add_subcommand("compare", "comparator intervals per sample and gene");
    add_fit_flags(s_cmp, cmp.fit);
    s_cmp->add_option("--methods", cmp.methods, "gamma, hpd, coarsened, sandwich, mse")->delimiter(',')->capture_default_str();
    s_cmp->add_option("--eta", cmp.eta, "coarsening rate (default n / (n + 10))");
    s_cmp->add_option("--out", cmp.fit.out, "output JSON list")->required();
    s_cmp->callback([&] { cmd_compare(cmp); });

    ImputeArgs imp;
    auto* s_imp = app.add_subcommand("impute", "replace the top-m posterior means with bulk draws");
    s_imp->add_option("--posteriors", imp.posteriors, "PosteriorSummary file or directory")->required();
    auto* o_m = s_imp->add_option("--m", imp.m, "number of imputed samples");
    s_imp->add_option("--m-frac", imp.m_frac, "imputed fraction, m = ceil(frac K)")->excludes(o_m)->capture_default_str();
    s_imp->add_option("--reps", imp.reps, "imputation repetitions")->capture_default_str();
    s_imp->add_option("--seed", imp.seed, "seed")->capture_default_str();
    s_imp->add_option("--out", imp.out, "output JSON")->required();
    s_imp->callback([&] { cmd_impute(imp); });

    ToleranceArgs tol;
    auto* s_tol = app.add_subcommand("tolerance", "Gamma tolerance limit per gene");
    s_tol->add_option("--imputed", tol.imputed, "output of `impute`")->required();
    s_tol->add_option("--prior", tol.prior, "pseudo-observation prior JSON");
    s_tol->add_option("--ess", tol.ess, "prior effective sample size; 0 disables the prior")->capture_default_str();
    s_tol->add_option("--p", tol.p, "miscoverage, T is the 1 - p quantile")->capture_default_str();
    s_tol->add_option("--out", tol.out, "output JSON")->required();
    s_tol->callback([&] { cmd_tolerance(tol); });

    StratifyArgs str;
    auto* s_str = app.add_subcommand("stratify", "evidence median split and per-stratum tolerance");
    s_str->add_option("--posteriors", str.impute.posteriors, "PosteriorSummary file or directory")->required();
    auto* o_sm = s_str->add_option("--m", str.impute.m, "imputed samples per stratum");
    s_str->add_option("--m-frac", str.impute.m_frac, "imputed fraction per stratum")->excludes(o_sm)->capture_default_str();
    s_str->add_option("--reps", str.impute.reps, "imputation repetitions")->capture_default_str();
    s_str->add_option("--seed", str.impute.seed, "seed")->capture_default_str();
    s_str->add_option("--prior", str.tol.prior, "pseudo-observation prior JSON");
    s_str->add_option("--ess", str.tol.ess, "prior effective sample size")->capture_default_str();
    s_str->add_option("--p", str.tol.p, "miscoverage")->capture_default_str();
    s_str->add_flag("--force", str.force, "split cohorts smaller than 20 anyway");
    s_str->add_option("--out", str.tol.out, "output JSON")->required();
    s_str->callback([&] { cmd_stratify(str); });

    SimulateArgs sim;
    auto* s_sim = app.add_subcommand("simulate", "synthetic lCNR cohort with labels");
    s_sim->add_option("--spec", sim.spec, "SynthSpec JSON (default panel if omitted)");
    s_sim->add_option("--n", sim.n, "number of samples")->capture_default_str();
    s_sim->add_option("--seed", sim.seed, "overrides the spec seed");
    s_sim->add_option("--out", sim.out, "output directory")->required();
    s_sim->callback([&] { cmd_simulate(sim); });

    EvaluateArgs ev;
    auto* s_ev = app.add_subcommand("evaluate", "evaluation studies writing CSV plus a JSON summary");
    std::string study_help = "one of:";
    for (const auto& n : study_names()) study_help += " " + n;
    s_ev->add_option("study", ev.study, study_help)->required()->check(CLI::IsMember(study_names()));
    s_ev->add_option("--config", ev.config, "key = value study file");
    s_ev->add_option("--set", ev.sets, "override one study key, key=value (repeatable)");
    s_ev->add_option("--seed", ev.seed, "seed")->capture_default_str();
    s_ev->add_option("--out", ev.out, "output directory")->capture_default_str();
    std::string keys_help = "study keys:\n";
    for (const auto& n : study_names()) {
        keys_help += "  " + n + ":";
        for (const auto& k : study_keys(n)) keys_help += " " + k;
        keys_help += "\n";
    }
    s_ev->footer(keys_help);
    s_ev->callback([&] { cmd_evaluate(ev); });

    RunArgs run;
    auto* s_run = app.add_subcommand("run", "full pipeline from counts to tolerance limits");
    s_run->add_option("--config", run.config, "key = value run config");
    s_run->add_option("--set", run.sets, "override one config key, key=value (repeatable)");
    s_run->add_option("--seed", run.seed, "master seed");
    s_run->add_option("--out", run.out, "output directory");
    s_run->add_flag("--stratify", run.stratify, "add the evidence-stratified tolerance stage");
    s_run->add_flag("--force", run.force, "stratify cohorts smaller than 20 anyway");
    std::string run_keys = "config keys:";
    for (const auto& k : RunConfig::keys()) run_keys += " " + k;
    s_run->footer(run_keys);
    s_run->callback([&] { cmd_run(run); });

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 2;
    } catch (const Error& e) {
        std::cerr << "ampcal: " << e.what() << "\n";
        return e.exit_code();
    } catch (const std::exception& e) {
        std::cerr << "ampcal: " << e.what() << "\n";
        return 3;
    }
    return 0;
}
