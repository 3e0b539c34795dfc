#pragma once

// Gamma tolerance limits on squared posterior means.
//
// Squared imputed posterior means Y = mu~^2 are modelled as Gamma(alpha, s)
// (shape, scale). Under mu~ ~ Normal(delta, tau^2) the loss is a scaled
// noncentral chi-square, whose first two moments give the reference shape
// and scale in moment_match(). The fitted Gamma is optionally regularized
// by weighted pseudo-observations whose weights sum to a fixed effective
// sample size. The tolerance limit at miscoverage p is T = F^-1(1 - p); its
// square root bounds |mu| and exp(sqrt(T)) is the minimum detectable CNV.

#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "ampcal/imputation.hpp"

namespace ampcal {

struct LossSet {
    std::string gene;
    std::vector<double> y;
    std::vector<double> weights;
};

LossSet squared_losses(const ImputedCohort& cohort);

struct GammaParams {
    double alpha = 0.0;  // shape
    double scale = 0.0;
};

// alpha = (1 + lambda)^2 / (2 (1 + 2 lambda)), s = 2 tau2 (1 + 2 lambda) / (1 + lambda).
GammaParams moment_match(double lambda, double tau2);

// Weighted sufficient statistics of a Gamma likelihood.
struct GammaSufficient {
    double weight = 0.0;
    double weighted_sum = 0.0;
    double weighted_log_sum = 0.0;
    std::size_t positive = 0;
    std::size_t floored = 0;

    static constexpr double kFloor = 1e-12;
    void add(double y, double w);
    void merge(const GammaSufficient& other);
};

struct GammaFit {
    double alpha = 0.0;
    double scale = 0.0;
    double gradient_norm = 0.0;  // of the weighted log likelihood at the fit
    std::size_t floored = 0;     // losses raised to the 1e-12 floor
    std::size_t iterations = 0;
};

// Weighted Gamma MLE: profiles the scale (s = weighted mean / alpha) and
// solves log(alpha) - digamma(alpha) = log(mean) - mean(log) by safeguarded
// Newton on log(alpha) within [1e-3, 1e3]. Throws DataError with fewer than
// three positive losses or total weight <= 2, NumericalError when the shape
// runs off the bracket (all losses equal is the infinite-shape limit).
GammaFit gamma_mle_weighted(const LossSet& losses);
GammaFit gamma_mle(const GammaSufficient& stats);

enum class PriorSource { replay, generated };

struct PseudoPriorSpec {
    PriorSource source = PriorSource::generated;
    std::vector<double> values;
    double effective_sample_size = 5.0;

    double weight() const;
    GammaSufficient sufficient() const;
};

// `count` draws from Gamma(alpha, scale), reproducible in `seed`.
PseudoPriorSpec generate_pseudo_prior(GammaParams reference, std::size_t count, double ess, std::uint64_t seed);

// Appends the prior values with weight ESS / count each. ESS == 0 returns
// the losses unchanged.
LossSet attach_pseudo_prior(const LossSet& losses, const PseudoPriorSpec& prior);

// Per-gene prior lookup with an optional fallback for unlisted genes.
struct PriorSet {
    std::map<std::string, PseudoPriorSpec> genes;
    std::optional<PseudoPriorSpec> fallback;

    const PseudoPriorSpec* find(const std::string& gene) const;
    bool empty() const { return genes.empty() && !fallback; }
};

struct GammaToleranceModel {
    std::string gene;
    double alpha_hat = 0.0;
    double s_hat = 0.0;
    double p = 0.05;
    double T = 0.0;
    double lcnr_bound = 0.0;
    double min_detectable_cnv = 1.0;
    double T_sd_over_reps = 0.0;
    std::size_t repetitions = 1;
};

// T = F^-1(1 - p) for Gamma(alpha, s); p must lie in (0, 0.5].
GammaToleranceModel tolerance_quantile(GammaParams fit, double p);

// Gamma fits of every imputation repetition of one gene. The reported
// limit at any level is the mean of the per-repetition quantiles, so one
// fit serves a whole grid of levels.
struct ToleranceFit {
    std::string gene;
    std::vector<GammaFit> repetitions;

    double T(double p) const;
    double T_sd(double p) const;
    GammaToleranceModel model(double p) const;
};

ToleranceFit fit_repetitions(const std::vector<ImputedCohort>& cohorts, const PseudoPriorSpec* prior);

// squared_losses -> attach_pseudo_prior -> gamma_mle_weighted ->
// tolerance_quantile for every repetition; T is the mean over repetitions.
GammaToleranceModel pipeline_tolerance(const std::vector<ImputedCohort>& cohorts, const PseudoPriorSpec* prior,
                                       double p);

struct ToleranceConfig {
    std::optional<std::size_t> m;  // overrides m_frac when set
    double m_frac = 0.2;
    std::size_t repetitions = 25;
    double p = 0.05;

    std::size_t imputed_count(std::size_t K) const;
};

// Imputation plus Gamma fits for one gene's posterior means.
ToleranceFit fit_gene(std::span<const double> mu_hat, const ToleranceConfig& config, const PseudoPriorSpec* prior,
                      std::uint64_t seed, const std::string& gene);

}  // namespace ampcal
