#pragma once

// Evaluation procedures: leave-one-out coverage and MACE, the synthetic
// estimator sweep, the imputation-fraction sweep, the pooled versus
// stratified mixture study and the reference-composition bias/variance
// decomposition. Every procedure is deterministic in its seed.

#include <cstdint>
#include <functional>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "ampcal/bayescnv.hpp"
#include "ampcal/comparators.hpp"
#include "ampcal/stratify.hpp"
#include "ampcal/synth.hpp"
#include "ampcal/tolerance.hpp"

namespace ampcal {

// ---- coverage and MACE ----

inline constexpr double kTopLevel = 0.999;  // stands in for gamma = 1
inline constexpr double kWidthLevel = 0.95;
inline constexpr std::size_t kBootstrapResamples = 1000;

// 0.70, 0.71, ..., 1.00.
std::vector<double> mace_grid();
// The level actually evaluated for grid point gamma (1 maps to 0.999).
double effective_level(double gamma);

// Coverage indicators per fold (row) and grid level (column).
struct CoverageTable {
    std::vector<double> grid;
    std::vector<std::vector<std::uint8_t>> hits;
    std::vector<double> widths;  // interval width at kWidthLevel, per fold
    std::vector<std::string> excluded;  // folds whose pipeline failed, with reason

    std::size_t folds() const { return hits.size(); }
    std::vector<double> coverage() const;
    // Pools folds of another table on the same grid.
    void append(const CoverageTable& other);
};

struct MaceValue {
    double x100 = 0.0;
    double ci_lo = 0.0;
    double ci_hi = 0.0;
};

// 100 * mean |C(gamma) - gamma| over the grid.
double mace_x100(std::span<const double> grid, std::span<const double> coverage);
// MACE with a percentile bootstrap CI over folds.
MaceValue mace_bootstrap(const CoverageTable& table, std::size_t resamples, std::uint64_t seed);

struct CalibrationReport {
    std::string gene;
    Method method = Method::gamma;
    std::vector<double> grid;
    std::vector<double> empirical_coverage;
    MaceValue mace;
    double mean_width = 0.0;
    std::size_t folds = 0;
    std::vector<std::string> notes;
};

CalibrationReport calibration_report(const std::string& gene, Method method, const CoverageTable& table,
                                     std::size_t resamples, std::uint64_t seed);

// Limits T on the squared loss at each level, fitted on the training
// values of one fold.
using LimitFn = std::function<std::vector<double>(std::span<const double> training, std::span<const double> levels,
                                                  std::size_t fold)>;

// Imputation, prior and Gamma fit; fold f imputes with derive_seed(seed, "loo", {f}).
LimitFn gamma_limits(const ToleranceConfig& config, const PseudoPriorSpec* prior, std::uint64_t seed,
                     const std::string& gene);
// Gamma(1/2, 2 mean(Y)) on the raw squared training values.
LimitFn mse_limits();

// Leave-one-out table: fold s fits on every value but mu_hat[s] and scores
// mu_hat[s]^2 <= T(gamma). Requires K >= 5. Failing folds are excluded and
// recorded. `ids` (optional) enables the held-out audit by sample id.
CoverageTable loo_table(std::span<const double> mu_hat, const LimitFn& limits, const std::vector<double>& grid,
                        std::span<const std::string> ids = {});

CalibrationReport loo_coverage(const std::string& gene, std::span<const double> mu_hat, const ToleranceConfig& config,
                               const PseudoPriorSpec* prior, std::uint64_t seed,
                               const std::vector<double>& grid = mace_grid(),
                               std::size_t resamples = kBootstrapResamples);

// Table from per-sample intervals at each grid level: a hit when `truth`
// lies inside.
CoverageTable interval_table(const std::vector<std::vector<Interval>>& per_sample, const std::vector<double>& grid,
                             double truth = 0.0);

// ---- comparator study on simulated panels ----

struct PanelStudyOptions {
    std::vector<Method> methods{Method::gamma, Method::mse, Method::hpd, Method::sandwich, Method::coarsened};
    ModelHyperParams hyper;
    HmcOptions hmc;
    ToleranceConfig tolerance;
    PriorSet priors;
    std::optional<double> coarsening_rate;  // default: n / (n + 10)
    std::vector<double> grid = mace_grid();
    std::size_t resamples = kBootstrapResamples;
    std::uint64_t seed = 1;
};

struct PanelFits {
    std::vector<PosteriorSummary> posteriors;  // with draws
    std::vector<SandwichMarginals> sandwich;
    std::vector<Eigen::MatrixXd> coarsened;  // draws of mu
};

// Every per-sample fit the comparators need; methods not listed are skipped.
PanelFits fit_panel_cohort(const std::vector<LcnrMatrix>& samples, const PanelStudyOptions& options);

// Coverage tables per gene and method for a diploid cohort (truth 0).
std::map<std::string, std::map<Method, CoverageTable>> panel_coverage(const PanelFits& fits,
                                                                      const std::vector<std::string>& genes,
                                                                      const PanelStudyOptions& options,
                                                                      std::uint64_t seed);

// ---- synthetic estimator sweep ----

enum class Estimator { empirical, noprior, prior, prior_scaled_m };
std::string to_string(Estimator e);

struct SweepConfig {
    double delta = 0.2;
    double tau2 = 0.17;
    std::vector<std::size_t> n_grid{5, 10, 20, 50};
    std::size_t replicates = 500;
    double p = 0.05;
    double ess = 5.0;
    std::size_t prior_count = 1000;
    std::size_t fixed_m = 1;
    double scaled_m_frac = 0.2;
    std::size_t repetitions = 25;
    std::uint64_t seed = 1;
    // Prior reference (shape, scale); default moment-matched to (delta, tau2).
    std::optional<GammaParams> prior_reference;
};

struct SweepResult {
    Estimator estimator = Estimator::empirical;
    std::size_t N = 0;
    double mean_estimate = 0.0;
    double std_error = 0.0;  // standard deviation over replicates
    double bias = 0.0;
    double mse = 0.0;
    double mse_mc_se = 0.0;
    double true_value = 0.0;
    std::size_t replicates = 0;
    std::size_t failures = 0;
};

// Quantile at probability `prob` of |X| for X ~ Normal(delta, sd^2).
double folded_normal_quantile(double delta, double sd, double prob);

// Estimates sqrt(T) of |X| at level 1 - p for the four estimators.
std::vector<SweepResult> estimator_sweep(const SweepConfig& config);

// Per-replicate estimates behind estimator_sweep (NaN marks a failure):
// result[estimator][replicate].
std::vector<std::vector<double>> sweep_cell(const SweepConfig& config, std::size_t N);

// ---- imputation-fraction sweep ----

struct ImputeSweepRow {
    double fraction = 0.0;
    std::string gene;
    bool cnv_gene = false;  // at least one labelled positive
    std::size_t m = 0;
    double T_hat = 0.0;
    double T_true = 0.0;
    double rel_error = 0.0;
};

// `mu_hat[j][s]`; `positive[j][s]` marks labelled positives. Ground truth
// per gene is the m = 0 fit on the negatives only; T_hat is the fit on all
// samples with m = ceil(fraction * K).
std::vector<ImputeSweepRow> imputation_fraction_sweep(const std::vector<std::string>& genes,
                                                      const std::vector<std::vector<double>>& mu_hat,
                                                      const std::vector<std::vector<bool>>& positive,
                                                      const std::vector<double>& fractions, const PriorSet& priors,
                                                      std::size_t repetitions, double p, std::uint64_t seed);

// ---- pooled versus stratified mixture study ----

struct MixtureGene {
    std::string gene;
    std::vector<double> levels;
    std::vector<double> T_pooled, T_plus, T_minus;
    CalibrationReport pooled;
    CalibrationReport stratified;
};

struct MixtureResult {
    StratifiedAssignment assignment;
    std::vector<MixtureGene> genes;
};

// Whole-cohort tolerance curves for the pooled and per-stratum fits, and
// LOO coverage of both treatments. In the stratified treatment every fold
// re-splits the K - 1 training samples on their evidence and scores the
// held-out sample against the stratum its evidence falls in.
MixtureResult mixture_study(const std::vector<std::string>& ids, const std::vector<double>& evidence,
                            const std::vector<std::string>& genes, const std::vector<std::vector<double>>& mu_hat,
                            const PriorSet& priors, const ToleranceConfig& config, std::uint64_t seed,
                            const std::vector<double>& grid = mace_grid(),
                            std::size_t resamples = kBootstrapResamples, bool force = false);

// ---- reference-composition bias/variance ----

struct BiasVarianceConfig {
    SynthSpec spec;  // clean test samples
    std::size_t n_test = 20;
    std::size_t n_clean_refs = 22;
    std::size_t n_degraded_refs = 10;
    std::size_t pool_size = 5;
    std::size_t bootstrap = 30;
    double ref_noise = 0.02;       // per-amplicon sd of a clean reference profile
    double degraded_noise = 0.1;   // per-amplicon sd of a degraded profile
    std::map<std::string, double> degraded_shift;  // gene -> b
    ModelHyperParams hyper;
    std::uint64_t seed = 1;
};

struct BiasVarianceRow {
    std::size_t degraded = 0;
    std::string gene;
    double bias = 0.0;
    double variance = 0.0;
    double msd = 0.0;  // mean squared deviation of mu_hat from 0
    double mc_se = 0.0;
    std::size_t count = 0;
};

// For 0..pool_size degraded references, bootstraps reference pools, adds
// the pool's mean profile to each clean test sample, takes the MAP gene
// means and decomposes their squared deviation from 0.
std::vector<BiasVarianceRow> bias_variance_decomposition(const BiasVarianceConfig& config);

// ---- emitters ----

std::string calibration_csv(const std::vector<CalibrationReport>& reports);
std::string sweep_csv(const std::vector<SweepResult>& rows);
std::string impute_sweep_csv(const std::vector<ImputeSweepRow>& rows);
std::string mixture_csv(const MixtureResult& result);
std::string bias_variance_csv(const std::vector<BiasVarianceRow>& rows);

}  // namespace ampcal
