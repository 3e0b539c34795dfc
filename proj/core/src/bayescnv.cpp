#include "ampcal/bayescnv.hpp"

#include "ampcal/errors.hpp"
#include "ampcal/parallel.hpp"
#include "ampcal/rng.hpp"

#include <algorithm>

namespace ampcal {

ModelState map_estimate(const LcnrMatrix& lcnr, const ModelHyperParams& hp) {
    const HierarchicalModel model(lcnr.values, hp);
    const auto r = maximize(model, model.initial_point());
    return ModelState::from_vector(r.x, model.genes());
}

double laplace_evidence(const LogDensity& model, const Eigen::VectorXd& start) {
    const auto r = maximize(model, start);
    return laplace_log_evidence(r.log_density, negative_hessian(model, r.x));
}

double laplace_evidence(const LcnrMatrix& lcnr, const ModelHyperParams& hp) {
    const HierarchicalModel model(lcnr.values, hp);
    return laplace_evidence(model, model.initial_point());
}

Eigen::MatrixXd select_columns(const Eigen::MatrixXd& draws, const std::vector<std::size_t>& indices) {
    Eigen::MatrixXd out(draws.rows(), static_cast<Eigen::Index>(indices.size()));
    for (std::size_t c = 0; c < indices.size(); ++c) out.col(static_cast<Eigen::Index>(c)) = draws.col(static_cast<Eigen::Index>(indices[c]));
    return out;
}

PosteriorSummary posterior_summarize(const Eigen::MatrixXd& mu_draws, double level, double log_evidence) {
    PosteriorSummary s;
    s.level = level;
    s.log_evidence = log_evidence;
    for (Eigen::Index j = 0; j < mu_draws.cols(); ++j) {
        std::vector<double> col(mu_draws.col(j).data(), mu_draws.col(j).data() + mu_draws.rows());
        s.mu_hat.push_back(mu_draws.col(j).mean());
        const Interval iv = hpd_interval(col, level);
        s.hpd.push_back(iv);
        s.altered.push_back(!iv.contains(0.0));
    }
    return s;
}

PosteriorSummary fit_sample(const LcnrMatrix& lcnr, const ModelHyperParams& hp, const FitOptions& options) {
    const HierarchicalModel model(lcnr.values, hp, options.likelihood);
    const auto mode = maximize(model, model.initial_point());
    const double evidence = laplace_log_evidence(mode.log_density, negative_hessian(model, mode.x));

    PosteriorSummary s;
    if (options.estimate == PointEstimate::map) {
        s.level = options.level;
        s.log_evidence = evidence;
        for (std::size_t idx : model.gene_mean_indices()) s.mu_hat.push_back(mode.x[static_cast<Eigen::Index>(idx)]);
    } else {
        const auto run = hmc_sample(model, mode.x, options.hmc);
        const Eigen::MatrixXd mu_draws = select_columns(run.draws, model.gene_mean_indices());
        s = posterior_summarize(mu_draws, options.level, evidence);
        s.diagnostics = run.diagnostics;
        if (options.keep_draws) s.draws = mu_draws;
    }
    s.sample_id = lcnr.sample_id;
    if (lcnr.panel) s.genes = lcnr.panel->gene_names();
    return s;
}

std::vector<PosteriorSummary> fit_cohort(const std::vector<LcnrMatrix>& samples, const ModelHyperParams& hp,
                                         FitOptions options, std::uint64_t master_seed) {
    std::vector<PosteriorSummary> out(samples.size());
    parallel_for(samples.size(), [&](std::size_t i) {
        FitOptions local = options;
        local.hmc.seed = derive_seed(master_seed, "fit:" + samples[i].sample_id);
        out[i] = fit_sample(samples[i], hp, local);
    });
    return out;
}

}  // namespace ampcal
