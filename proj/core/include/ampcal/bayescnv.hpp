#pragma once

// Per-sample fit of the hierarchical lCNR model: MAP, Laplace evidence,
// HMC draws and posterior summaries.

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "ampcal/inference.hpp"
#include "ampcal/model.hpp"
#include "ampcal/panel_io.hpp"

namespace ampcal {

struct PosteriorSummary {
    std::string sample_id;
    std::vector<std::string> genes;
    std::vector<double> mu_hat;
    double level = 0.95;
    std::vector<Interval> hpd;
    std::vector<bool> altered;  // 0 outside the HPD interval
    Eigen::MatrixXd draws;      // n_draws x J draws of mu; may be empty
    double log_evidence = 0.0;
    HmcDiagnostics diagnostics;
};

enum class PointEstimate { posterior_mean, map };

struct FitOptions {
    HmcOptions hmc;
    double level = 0.95;  // 1 - gamma
    bool keep_draws = false;
    // `map` skips HMC and reports the MAP gene means with empty intervals;
    // only the harness uses it, for fast bias/variance sweeps.
    PointEstimate estimate = PointEstimate::posterior_mean;
    Likelihood likelihood = Likelihood::soft_laplace;
};

// MAP of the hierarchical posterior for one sample.
ModelState map_estimate(const LcnrMatrix& lcnr, const ModelHyperParams& hp);

// Laplace approximation to log p(X) in the unconstrained space.
double laplace_evidence(const LcnrMatrix& lcnr, const ModelHyperParams& hp);
double laplace_evidence(const LogDensity& model, const Eigen::VectorXd& start);

// Per-gene mean, HPD at `level` and altered flags from draws of mu.
PosteriorSummary posterior_summarize(const Eigen::MatrixXd& mu_draws, double level, double log_evidence);

// Full per-sample fit: MAP, evidence, HMC started at the MAP, summary.
PosteriorSummary fit_sample(const LcnrMatrix& lcnr, const ModelHyperParams& hp, const FitOptions& options);

// Fits every sample on a worker pool; the HMC seed of each sample is
// derive_seed(master_seed, "fit", sample_id).
std::vector<PosteriorSummary> fit_cohort(const std::vector<LcnrMatrix>& samples, const ModelHyperParams& hp,
                                         FitOptions options, std::uint64_t master_seed);

// Columns of `draws` selected by `indices`.
Eigen::MatrixXd select_columns(const Eigen::MatrixXd& draws, const std::vector<std::size_t>& indices);

}  // namespace ampcal
