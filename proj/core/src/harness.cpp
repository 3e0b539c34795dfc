#include "ampcal/harness.hpp"

#include "ampcal/errors.hpp"
#include "ampcal/parallel.hpp"
#include "ampcal/rng.hpp"
#include "ampcal/stats.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <limits>
#include <numeric>
#include <set>
#include <sstream>

#include <boost/math/tools/roots.hpp>

namespace ampcal {

std::vector<double> mace_grid() {
    std::vector<double> g;
    for (int i = 70; i <= 100; ++i) g.push_back(i / 100.0);
    return g;
}

double effective_level(double gamma) { return std::min(gamma, kTopLevel); }

std::vector<double> CoverageTable::coverage() const {
    std::vector<double> c(grid.size(), 0.0);
    if (hits.empty()) return c;
    for (const auto& row : hits)
        for (std::size_t g = 0; g < grid.size(); ++g) c[g] += row[g];
    for (auto& v : c) v /= static_cast<double>(hits.size());
    return c;
}

void CoverageTable::append(const CoverageTable& other) {
    if (grid.empty()) grid = other.grid;
    if (other.grid != grid) throw ConfigError("coverage: cannot pool tables on different grids");
    hits.insert(hits.end(), other.hits.begin(), other.hits.end());
    widths.insert(widths.end(), other.widths.begin(), other.widths.end());
    excluded.insert(excluded.end(), other.excluded.begin(), other.excluded.end());
}

double mace_x100(std::span<const double> grid, std::span<const double> coverage) {
    if (grid.empty() || grid.size() != coverage.size()) throw DataError("mace: grid and coverage differ in length");
    double s = 0.0;
    for (std::size_t g = 0; g < grid.size(); ++g) s += std::abs(coverage[g] - grid[g]);
    return 100.0 * s / static_cast<double>(grid.size());
}

namespace {

double percentile(std::vector<double> v, double q) {
    std::sort(v.begin(), v.end());
    const double h = q * static_cast<double>(v.size() - 1);
    const auto lo = static_cast<std::size_t>(std::floor(h));
    const std::size_t hi = std::min(lo + 1, v.size() - 1);
    return v[lo] + (h - static_cast<double>(lo)) * (v[hi] - v[lo]);
}

}  // namespace

MaceValue mace_bootstrap(const CoverageTable& table, std::size_t resamples, std::uint64_t seed) {
    if (table.hits.empty()) throw DataError("mace: no folds");
    MaceValue out;
    out.x100 = mace_x100(table.grid, table.coverage());
    if (resamples == 0) {
        out.ci_lo = out.ci_hi = out.x100;
        return out;
    }
    const std::size_t n = table.hits.size(), G = table.grid.size();
    Rng rng(derive_seed(seed, "bootstrap"));
    std::uniform_int_distribution<std::size_t> pick(0, n - 1);
    std::vector<double> stats(resamples);
    std::vector<double> cov(G);
    for (auto& st : stats) {
        std::fill(cov.begin(), cov.end(), 0.0);
        for (std::size_t i = 0; i < n; ++i) {
            const auto& row = table.hits[pick(rng)];
            for (std::size_t g = 0; g < G; ++g) cov[g] += row[g];
        }
        for (auto& c : cov) c /= static_cast<double>(n);
        st = mace_x100(table.grid, cov);
    }
    out.ci_lo = percentile(stats, 0.025);
    out.ci_hi = percentile(stats, 0.975);
    return out;
}

CalibrationReport calibration_report(const std::string& gene, Method method, const CoverageTable& table,
                                     std::size_t resamples, std::uint64_t seed) {
    CalibrationReport r;
    r.gene = gene;
    r.method = method;
    r.grid = table.grid;
    r.empirical_coverage = table.coverage();
    r.mace = mace_bootstrap(table, resamples, seed);
    r.folds = table.folds();
    if (!table.widths.empty()) r.mean_width = mean(table.widths);
    if (!table.grid.empty() && table.grid.back() >= 1.0)
        r.notes.push_back("grid level 1.00 evaluated at 0.999");
    for (const auto& e : table.excluded) r.notes.push_back("excluded fold " + e);
    return r;
}

LimitFn gamma_limits(const ToleranceConfig& config, const PseudoPriorSpec* prior, std::uint64_t seed,
                     const std::string& gene) {
    return [=](std::span<const double> training, std::span<const double> levels, std::size_t fold) {
        const auto fit = fit_gene(training, config, prior, derive_seed(seed, "loo", {fold}), gene);
        std::vector<double> T;
        for (double g : levels) T.push_back(fit.T(1.0 - g));
        return T;
    };
}

LimitFn mse_limits() {
    return [](std::span<const double> training, std::span<const double> levels, std::size_t) {
        std::vector<double> y;
        for (double v : training) y.push_back(v * v);
        std::vector<double> T;
        for (double g : levels) T.push_back(mse_tolerance(y, 1.0 - g));
        return T;
    };
}

CoverageTable loo_table(std::span<const double> mu_hat, const LimitFn& limits, const std::vector<double>& grid,
                        std::span<const std::string> ids) {
    const std::size_t K = mu_hat.size();
    if (K < 5) throw DataError("loo: at least five samples are required");
    if (!ids.empty() && ids.size() != K) throw DataError("loo: ids and values differ in length");
    std::vector<double> levels;
    for (double g : grid) levels.push_back(effective_level(g));
    levels.push_back(kWidthLevel);

    struct Fold {
        std::vector<std::uint8_t> hits;
        double width = 0.0;
        std::string error;
    };
    std::vector<Fold> folds(K);
    parallel_for(K, [&](std::size_t s) {
        std::vector<double> training;
        training.reserve(K - 1);
        for (std::size_t i = 0; i < K; ++i)
            if (i != s) training.push_back(mu_hat[i]);
        if (!ids.empty()) {
            for (std::size_t i = 0; i < K; ++i)
                if (i != s && ids[i] == ids[s]) throw DataError("loo: held-out id '" + ids[s] + "' in training");
        }
        try {
            const auto T = limits(training, levels, s);
            const double y = mu_hat[s] * mu_hat[s];
            for (std::size_t g = 0; g < grid.size(); ++g) folds[s].hits.push_back(y <= T[g] ? 1 : 0);
            folds[s].width = 2.0 * std::sqrt(T.back());
        } catch (const Error& e) {
            folds[s].error = e.what();
        }
    });

    CoverageTable t;
    t.grid = grid;
    for (std::size_t s = 0; s < K; ++s) {
        if (!folds[s].error.empty()) {
            t.excluded.push_back((ids.empty() ? std::to_string(s) : ids[s]) + ": " + folds[s].error);
            continue;
        }
        t.hits.push_back(std::move(folds[s].hits));
        t.widths.push_back(folds[s].width);
    }
    return t;
}

CalibrationReport loo_coverage(const std::string& gene, std::span<const double> mu_hat, const ToleranceConfig& config,
                               const PseudoPriorSpec* prior, std::uint64_t seed, const std::vector<double>& grid,
                               std::size_t resamples) {
    const auto table = loo_table(mu_hat, gamma_limits(config, prior, seed, gene), grid);
    return calibration_report(gene, Method::gamma, table, resamples, derive_seed(seed, "report:" + gene));
}

CoverageTable interval_table(const std::vector<std::vector<Interval>>& per_sample, const std::vector<double>& grid,
                             double truth) {
    CoverageTable t;
    t.grid = grid;
    for (const auto& ivs : per_sample) {
        if (ivs.size() != grid.size() + 1) throw DataError("coverage: one interval per grid level plus width level");
        std::vector<std::uint8_t> row;
        for (std::size_t g = 0; g < grid.size(); ++g) row.push_back(ivs[g].contains(truth) ? 1 : 0);
        t.hits.push_back(std::move(row));
        t.widths.push_back(ivs.back().width());
    }
    return t;
}

// ---- comparator study ----

namespace {

bool wants(const PanelStudyOptions& o, Method m) {
    return std::find(o.methods.begin(), o.methods.end(), m) != o.methods.end();
}

std::vector<double> grid_levels(const std::vector<double>& grid) {
    std::vector<double> levels;
    for (double g : grid) levels.push_back(effective_level(g));
    levels.push_back(kWidthLevel);
    return levels;
}

std::vector<Interval> draw_intervals(const Eigen::MatrixXd& draws, Eigen::Index col, const std::vector<double>& levels) {
    std::vector<double> v(draws.col(col).data(), draws.col(col).data() + draws.rows());
    std::sort(v.begin(), v.end());
    std::vector<Interval> out;
    for (double l : levels) out.push_back(hpd_interval_sorted(v, l));
    return out;
}

}  // namespace

PanelFits fit_panel_cohort(const std::vector<LcnrMatrix>& samples, const PanelStudyOptions& options) {
    PanelFits f;
    const std::size_t K = samples.size();
    f.posteriors.resize(K);
    const bool sandwich = wants(options, Method::sandwich);
    const bool coarsened = wants(options, Method::coarsened);
    if (sandwich) f.sandwich.resize(K);
    if (coarsened) f.coarsened.resize(K);
    parallel_for(K, [&](std::size_t i) {
        const auto& x = samples[i];
        FitOptions fo;
        fo.hmc = options.hmc;
        fo.hmc.seed = derive_seed(options.seed, "fit:" + x.sample_id, {i});
        fo.keep_draws = true;
        f.posteriors[i] = fit_sample(x, options.hyper, fo);
        if (sandwich) f.sandwich[i] = sandwich_marginals(HierarchicalModel(x.values, options.hyper));
        if (coarsened) {
            HmcOptions h = options.hmc;
            h.seed = derive_seed(options.seed, "coarsened:" + x.sample_id, {i});
            const double eta = options.coarsening_rate.value_or(default_coarsening_rate(x));
            f.coarsened[i] = coarsened_draws(x, options.hyper, eta, h);
        }
    });
    return f;
}

std::map<std::string, std::map<Method, CoverageTable>> panel_coverage(const PanelFits& fits,
                                                                      const std::vector<std::string>& genes,
                                                                      const PanelStudyOptions& options,
                                                                      std::uint64_t seed) {
    const std::size_t K = fits.posteriors.size();
    const auto levels = grid_levels(options.grid);
    std::vector<std::string> ids;
    for (const auto& p : fits.posteriors) ids.push_back(p.sample_id);
    std::map<std::string, std::map<Method, CoverageTable>> out;
    for (std::size_t j = 0; j < genes.size(); ++j) {
        const auto& gene = genes[j];
        const auto col = static_cast<Eigen::Index>(j);
        std::vector<double> mu;
        for (const auto& p : fits.posteriors) mu.push_back(p.mu_hat[j]);
        for (Method m : options.methods) {
            switch (m) {
                case Method::gamma:
                    out[gene][m] = loo_table(
                        mu, gamma_limits(options.tolerance, options.priors.find(gene), seed, gene), options.grid, ids);
                    break;
                case Method::mse: out[gene][m] = loo_table(mu, mse_limits(), options.grid, ids); break;
                case Method::hpd: {
                    std::vector<std::vector<Interval>> ivs;
                    for (const auto& p : fits.posteriors) ivs.push_back(draw_intervals(p.draws, col, levels));
                    out[gene][m] = interval_table(ivs, options.grid);
                    break;
                }
                case Method::coarsened: {
                    std::vector<std::vector<Interval>> ivs;
                    for (std::size_t i = 0; i < K; ++i) ivs.push_back(draw_intervals(fits.coarsened[i], col, levels));
                    out[gene][m] = interval_table(ivs, options.grid);
                    break;
                }
                case Method::sandwich: {
                    std::vector<std::vector<Interval>> ivs;
                    for (std::size_t i = 0; i < K; ++i) {
                        std::vector<Interval> row;
                        for (double l : levels) row.push_back(sandwich_interval(fits.sandwich[i], j, l));
                        ivs.push_back(std::move(row));
                    }
                    out[gene][m] = interval_table(ivs, options.grid);
                    break;
                }
            }
        }
    }
    return out;
}

// ---- estimator sweep ----

std::string to_string(Estimator e) {
    switch (e) {
        case Estimator::empirical: return "EMPIRICAL";
        case Estimator::noprior: return "NOPRIOR";
        case Estimator::prior: return "PRIOR";
        case Estimator::prior_scaled_m: return "PRIOR_SCALED_M";
    }
    return "UNKNOWN";
}

double folded_normal_quantile(double delta, double sd, double prob) {
    if (!(sd > 0.0) || !(prob > 0.0 && prob < 1.0)) throw ConfigError("folded normal: invalid arguments");
    auto cdf = [&](double x) { return normal_cdf((x - delta) / sd) - normal_cdf((-x - delta) / sd); };
    double hi = std::abs(delta) + sd;
    while (cdf(hi) < prob) hi *= 2.0;
    boost::uintmax_t it = 200;
    const auto r = boost::math::tools::bisect([&](double x) { return cdf(x) - prob; }, 0.0, hi,
                                              boost::math::tools::eps_tolerance<double>(50), it);
    return 0.5 * (r.first + r.second);
}

namespace {

constexpr Estimator kEstimators[] = {Estimator::empirical, Estimator::noprior, Estimator::prior,
                                     Estimator::prior_scaled_m};

PseudoPriorSpec sweep_prior(const SweepConfig& c) {
    const GammaParams ref = c.prior_reference.value_or(moment_match(c.delta * c.delta / c.tau2, c.tau2));
    return generate_pseudo_prior(ref, c.prior_count, c.ess, derive_seed(c.seed, "sweep:prior"));
}

}  // namespace

std::vector<std::vector<double>> sweep_cell(const SweepConfig& config, std::size_t N) {
    const PseudoPriorSpec prior = sweep_prior(config);
    const double nan = std::numeric_limits<double>::quiet_NaN();
    std::vector<std::vector<double>> est(4, std::vector<double>(config.replicates, nan));
    parallel_for(config.replicates, [&](std::size_t r) {
        Rng rng(derive_seed(config.seed, "sweep", {N, r}));
        const double sd = std::sqrt(config.tau2);
        std::vector<double> x(N);
        for (auto& v : x) v = config.delta + sd * standard_normal(rng);
        const std::uint64_t impute_seed = derive_seed(config.seed, "sweep:impute", {N, r});
        for (std::size_t e = 0; e < 4; ++e) {
            try {
                double T = 0.0;
                if (kEstimators[e] == Estimator::empirical) {
                    GammaSufficient st;
                    for (double v : x) st.add(v * v, 1.0);
                    const GammaFit g = gamma_mle(st);
                    T = tolerance_quantile({g.alpha, g.scale}, config.p).T;
                } else {
                    ToleranceConfig tc;
                    tc.repetitions = config.repetitions;
                    tc.m = kEstimators[e] == Estimator::prior_scaled_m ? imputation_count(N, config.scaled_m_frac)
                                                                        : config.fixed_m;
                    const PseudoPriorSpec* pp = kEstimators[e] == Estimator::noprior ? nullptr : &prior;
                    T = fit_gene(x, tc, pp, impute_seed, "sweep").T(config.p);
                }
                est[e][r] = std::sqrt(T);
            } catch (const Error&) {
            }
        }
    });
    return est;
}

std::vector<SweepResult> estimator_sweep(const SweepConfig& config) {
    if (config.replicates < 2) throw ConfigError("sweep: at least two replicates are required");
    const double truth = folded_normal_quantile(config.delta, std::sqrt(config.tau2), 1.0 - config.p);
    std::vector<SweepResult> out;
    for (std::size_t N : config.n_grid) {
        const auto est = sweep_cell(config, N);
        for (std::size_t e = 0; e < 4; ++e) {
            std::vector<double> ok, sq;
            for (double v : est[e])
                if (std::isfinite(v)) {
                    ok.push_back(v);
                    sq.push_back((v - truth) * (v - truth));
                }
            SweepResult r;
            r.estimator = kEstimators[e];
            r.N = N;
            r.true_value = truth;
            r.replicates = ok.size();
            r.failures = est[e].size() - ok.size();
            if (ok.size() >= 2) {
                r.mean_estimate = mean(ok);
                r.std_error = std::sqrt(sample_variance(ok));
                r.bias = r.mean_estimate - truth;
                r.mse = mean(sq);
                r.mse_mc_se = std::sqrt(sample_variance(sq) / static_cast<double>(sq.size()));
            }
            out.push_back(r);
        }
    }
    return out;
}

// ---- imputation-fraction sweep ----

std::vector<ImputeSweepRow> imputation_fraction_sweep(const std::vector<std::string>& genes,
                                                      const std::vector<std::vector<double>>& mu_hat,
                                                      const std::vector<std::vector<bool>>& positive,
                                                      const std::vector<double>& fractions, const PriorSet& priors,
                                                      std::size_t repetitions, double p, std::uint64_t seed) {
    if (mu_hat.size() != genes.size() || positive.size() != genes.size())
        throw DataError("impute sweep: one row per gene required");
    std::vector<ImputeSweepRow> out;
    for (std::size_t j = 0; j < genes.size(); ++j) {
        const auto& mu = mu_hat[j];
        if (positive[j].size() != mu.size()) throw DataError("impute sweep: labels do not match the cohort");
        std::vector<double> negatives;
        bool cnv = false;
        for (std::size_t s = 0; s < mu.size(); ++s) {
            if (positive[j][s]) cnv = true;
            else negatives.push_back(mu[s]);
        }
        const PseudoPriorSpec* prior = priors.find(genes[j]);
        ToleranceConfig truth_cfg;
        truth_cfg.m = 0;
        truth_cfg.p = p;
        const double T_true = fit_gene(negatives, truth_cfg, prior, derive_seed(seed, "truth"), genes[j]).T(p);
        for (double f : fractions) {
            ToleranceConfig tc;
            tc.m = imputation_count(mu.size(), f);
            tc.repetitions = repetitions;
            tc.p = p;
            const double T_hat = fit_gene(mu, tc, prior, derive_seed(seed, "fraction", {static_cast<std::uint64_t>(std::llround(f * 1e6))}), genes[j]).T(p);
            out.push_back({f, genes[j], cnv, *tc.m, T_hat, T_true, std::abs(T_hat - T_true) / T_true});
        }
    }
    return out;
}

// ---- mixture study ----

MixtureResult mixture_study(const std::vector<std::string>& ids, const std::vector<double>& evidence,
                            const std::vector<std::string>& genes, const std::vector<std::vector<double>>& mu_hat,
                            const PriorSet& priors, const ToleranceConfig& config, std::uint64_t seed,
                            const std::vector<double>& grid, std::size_t resamples, bool force) {
    MixtureResult out;
    out.assignment = evidence_split(ids, evidence, force);
    const std::size_t K = ids.size();
    const auto fits = stratified_fits(out.assignment, genes, mu_hat, priors, config, derive_seed(seed, "strata"));
    std::vector<double> levels;
    for (double g : grid) levels.push_back(effective_level(g));

    // Per fold: split of the K - 1 training samples and the held-out stratum.
    struct FoldSplit {
        std::vector<std::size_t> same;  // training indices in the held-out's stratum
        std::string error;
    };
    std::vector<FoldSplit> splits(K);
    for (std::size_t s = 0; s < K; ++s) {
        std::vector<std::string> tid;
        std::vector<double> tz;
        std::vector<std::size_t> idx;
        for (std::size_t i = 0; i < K; ++i)
            if (i != s) {
                tid.push_back(ids[i]);
                tz.push_back(evidence[i]);
                idx.push_back(i);
            }
        try {
            const auto a = evidence_split(tid, tz, true);
            const Stratum held = a.classify(evidence[s]);
            for (std::size_t k = 0; k < idx.size(); ++k)
                if (a.stratum[k] == held) splits[s].same.push_back(idx[k]);
        } catch (const Error& e) {
            splits[s].error = e.what();
        }
    }

    for (std::size_t j = 0; j < genes.size(); ++j) {
        MixtureGene mg;
        mg.gene = genes[j];
        mg.levels = levels;
        const auto& mu = mu_hat[j];
        const PseudoPriorSpec* prior = priors.find(genes[j]);
        const auto pooled_fit = fit_gene(mu, config, prior, derive_seed(seed, "pooled"), genes[j]);
        for (double l : levels) {
            mg.T_pooled.push_back(pooled_fit.T(1.0 - l));
            mg.T_plus.push_back(fits.plus[j].T(1.0 - l));
            mg.T_minus.push_back(fits.minus[j].T(1.0 - l));
        }
        const auto pooled_table = loo_table(mu, gamma_limits(config, prior, derive_seed(seed, "loo:pooled"), genes[j]), grid, ids);
        mg.pooled = calibration_report(genes[j], Method::gamma, pooled_table, resamples, derive_seed(seed, "boot:pooled:" + genes[j]));
        mg.pooled.notes.push_back("pooled");

        std::vector<std::vector<std::uint8_t>> hits(K);
        std::vector<double> widths(K);
        std::vector<std::string> errors(K);
        parallel_for(K, [&](std::size_t s) {
            if (!splits[s].error.empty()) {
                errors[s] = splits[s].error;
                return;
            }
            std::vector<double> training;
            for (std::size_t i : splits[s].same) {
                if (i == s) throw DataError("mixture: held-out sample in its own training stratum");
                training.push_back(mu[i]);
            }
            try {
                const auto f = fit_gene(training, config, prior, derive_seed(seed, "loo:strat", {s}), genes[j]);
                const double y = mu[s] * mu[s];
                for (double l : levels) hits[s].push_back(y <= f.T(1.0 - l) ? 1 : 0);
                widths[s] = 2.0 * std::sqrt(f.T(1.0 - kWidthLevel));
            } catch (const Error& e) {
                errors[s] = e.what();
            }
        });
        CoverageTable st;
        st.grid = grid;
        for (std::size_t s = 0; s < K; ++s) {
            if (!errors[s].empty()) {
                st.excluded.push_back(ids[s] + ": " + errors[s]);
                continue;
            }
            st.hits.push_back(hits[s]);
            st.widths.push_back(widths[s]);
        }
        mg.stratified = calibration_report(genes[j], Method::gamma, st, resamples, derive_seed(seed, "boot:strat:" + genes[j]));
        mg.stratified.notes.push_back("stratified");
        out.genes.push_back(std::move(mg));
    }
    return out;
}

// ---- bias / variance ----

std::vector<BiasVarianceRow> bias_variance_decomposition(const BiasVarianceConfig& c) {
    c.spec.validate();
    if (c.pool_size == 0 || c.pool_size > c.n_clean_refs || c.pool_size > c.n_degraded_refs)
        throw ConfigError("biasvar: pool size must not exceed either reference group");
    if (c.bootstrap == 0 || c.n_test == 0) throw ConfigError("biasvar: bootstrap and n_test must be positive");
    const auto names = c.spec.gene_names();
    for (const auto& [g, b] : c.degraded_shift)
        if (std::find(names.begin(), names.end(), g) == names.end())
            throw ConfigError("biasvar: shift on unknown gene '" + g + "'");

    SynthSpec test_spec = c.spec;
    test_spec.seed = derive_seed(c.seed, "biasvar:test");
    const auto cohort = gen_panel(test_spec, c.n_test);

    // Per-amplicon reference profiles.
    auto profile = [&](bool degraded, std::size_t r) {
        Rng rng(derive_seed(c.seed, degraded ? "biasvar:degraded" : "biasvar:clean", {r}));
        std::vector<std::vector<double>> p;
        for (const auto& g : c.spec.genes) {
            const auto it = c.degraded_shift.find(g.name);
            const double shift = degraded && it != c.degraded_shift.end() ? it->second : 0.0;
            const double sd = degraded ? c.degraded_noise : c.ref_noise;
            std::vector<double> v(g.amplicons);
            for (auto& x : v) x = shift + sd * standard_normal(rng);
            p.push_back(std::move(v));
        }
        return p;
    };
    std::vector<std::vector<std::vector<double>>> clean, degraded;
    for (std::size_t r = 0; r < c.n_clean_refs; ++r) clean.push_back(profile(false, r));
    for (std::size_t r = 0; r < c.n_degraded_refs; ++r) degraded.push_back(profile(true, r));

    std::vector<BiasVarianceRow> out;
    const std::size_t J = names.size();
    for (std::size_t d = 0; d <= c.pool_size; ++d) {
        // dev[b * n_test + t][j]
        std::vector<std::vector<double>> dev(c.bootstrap * c.n_test, std::vector<double>(J));
        parallel_for(c.bootstrap, [&](std::size_t b) {
            Rng rng(derive_seed(c.seed, "biasvar:pool", {d, b}));
            std::vector<std::size_t> ci(c.n_clean_refs), di(c.n_degraded_refs);
            std::iota(ci.begin(), ci.end(), 0);
            std::iota(di.begin(), di.end(), 0);
            std::shuffle(ci.begin(), ci.end(), rng);
            std::shuffle(di.begin(), di.end(), rng);
            std::vector<const std::vector<std::vector<double>>*> pool;
            for (std::size_t k = 0; k < d; ++k) pool.push_back(&degraded[di[k]]);
            for (std::size_t k = d; k < c.pool_size; ++k) pool.push_back(&clean[ci[k - d]]);
            for (std::size_t t = 0; t < c.n_test; ++t) {
                LcnrMatrix x = cohort.samples[t];
                for (std::size_t j = 0; j < J; ++j)
                    for (std::size_t k = 0; k < x.values[j].size(); ++k) {
                        double ref = 0.0;
                        for (const auto* p : pool) ref += (*p)[j][k];
                        x.values[j][k] += ref / static_cast<double>(c.pool_size);
                    }
                const auto state = map_estimate(x, c.hyper);
                for (std::size_t j = 0; j < J; ++j) dev[b * c.n_test + t][j] = state.mu[j];
            }
        });
        for (std::size_t j = 0; j < J; ++j) {
            std::vector<double> v;
            for (const auto& row : dev) v.push_back(row[j]);
            BiasVarianceRow r;
            r.degraded = d;
            r.gene = names[j];
            r.count = v.size();
            r.bias = mean(v);
            double msd = 0.0, var = 0.0;
            for (double x : v) {
                msd += x * x;
                var += (x - r.bias) * (x - r.bias);
            }
            r.msd = msd / static_cast<double>(v.size());
            r.variance = var / static_cast<double>(v.size());
            // test samples are the independent units; bootstraps share them
            std::vector<double> per_test(c.n_test, 0.0);
            for (std::size_t b = 0; b < c.bootstrap; ++b)
                for (std::size_t t = 0; t < c.n_test; ++t) per_test[t] += v[b * c.n_test + t];
            for (auto& x : per_test) x /= static_cast<double>(c.bootstrap);
            r.mc_se = c.n_test > 1 ? std::sqrt(sample_variance(per_test) / static_cast<double>(c.n_test))
                                   : std::sqrt(r.variance / static_cast<double>(v.size()));
            out.push_back(r);
        }
    }
    return out;
}

// ---- emitters ----

namespace {

std::ostringstream csv_stream() {
    std::ostringstream os;
    os << std::setprecision(10);
    return os;
}

}  // namespace

std::string calibration_csv(const std::vector<CalibrationReport>& reports) {
    auto os = csv_stream();
    os << "gene,method,gamma,coverage,mace_x100,mace_ci_lo,mace_ci_hi,mean_width,folds\n";
    for (const auto& r : reports)
        for (std::size_t g = 0; g < r.grid.size(); ++g)
            os << r.gene << ',' << to_string(r.method) << ',' << r.grid[g] << ',' << r.empirical_coverage[g] << ','
               << r.mace.x100 << ',' << r.mace.ci_lo << ',' << r.mace.ci_hi << ',' << r.mean_width << ',' << r.folds
               << '\n';
    return os.str();
}

std::string sweep_csv(const std::vector<SweepResult>& rows) {
    auto os = csv_stream();
    os << "estimator,N,mean_estimate,std_error,bias,mse,mse_mc_se,true_value,replicates,failures\n";
    for (const auto& r : rows)
        os << to_string(r.estimator) << ',' << r.N << ',' << r.mean_estimate << ',' << r.std_error << ',' << r.bias
           << ',' << r.mse << ',' << r.mse_mc_se << ',' << r.true_value << ',' << r.replicates << ',' << r.failures
           << '\n';
    return os.str();
}

std::string impute_sweep_csv(const std::vector<ImputeSweepRow>& rows) {
    auto os = csv_stream();
    os << "fraction,gene,cnv_gene,m,T_hat,T_true,rel_error\n";
    for (const auto& r : rows)
        os << r.fraction << ',' << r.gene << ',' << (r.cnv_gene ? 1 : 0) << ',' << r.m << ',' << r.T_hat << ','
           << r.T_true << ',' << r.rel_error << '\n';
    return os.str();
}

std::string mixture_csv(const MixtureResult& result) {
    auto os = csv_stream();
    os << "gene,gamma,level,T_pooled,T_plus,T_minus,coverage_pooled,coverage_stratified\n";
    for (const auto& g : result.genes)
        for (std::size_t i = 0; i < g.levels.size(); ++i)
            os << g.gene << ',' << g.pooled.grid[i] << ',' << g.levels[i] << ',' << g.T_pooled[i] << ','
               << g.T_plus[i] << ',' << g.T_minus[i] << ',' << g.pooled.empirical_coverage[i] << ','
               << g.stratified.empirical_coverage[i] << '\n';
    return os.str();
}

std::string bias_variance_csv(const std::vector<BiasVarianceRow>& rows) {
    auto os = csv_stream();
    os << "degraded,gene,bias,variance,msd,mc_se,count\n";
    for (const auto& r : rows)
        os << r.degraded << ',' << r.gene << ',' << r.bias << ',' << r.variance << ',' << r.msd << ',' << r.mc_se
           << ',' << r.count << '\n';
    return os.str();
}

}  // namespace ampcal
