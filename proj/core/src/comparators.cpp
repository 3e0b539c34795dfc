#include "ampcal/comparators.hpp"

#include "ampcal/errors.hpp"
#include "ampcal/stats.hpp"
#include "ampcal/tolerance.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>

namespace ampcal {

std::string to_string(Method m) {
    switch (m) {
        case Method::gamma: return "gamma";
        case Method::hpd: return "hpd";
        case Method::coarsened: return "coarsened";
        case Method::sandwich: return "sandwich";
        case Method::mse: return "mse";
    }
    return "unknown";
}

Method parse_method(const std::string& name) {
    std::string n = name;
    std::transform(n.begin(), n.end(), n.begin(), [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
    if (n == "gamma") return Method::gamma;
    if (n == "hpd") return Method::hpd;
    if (n == "coarsened") return Method::coarsened;
    if (n == "sandwich") return Method::sandwich;
    if (n == "mse") return Method::mse;
    throw ConfigError("unknown method '" + name + "'");
}

double default_coarsening_rate(const LcnrMatrix& lcnr, double zeta) {
    const double n_bar = static_cast<double>(lcnr.amplicon_count()) / static_cast<double>(lcnr.gene_count());
    return n_bar / (n_bar + zeta);
}

Eigen::MatrixXd coarsened_draws(const LcnrMatrix& lcnr, const ModelHyperParams& hp, double eta,
                                const HmcOptions& hmc) {
    if (!(eta > 0.0 && eta <= 1.0)) throw ConfigError("coarsened: learning rate must lie in (0, 1]");
    const HierarchicalModel model(lcnr.values, hp, Likelihood::soft_laplace, eta);
    const auto mode = maximize(model, model.initial_point());
    const auto run = hmc_sample(model, mode.x, hmc);
    return select_columns(run.draws, model.gene_mean_indices());
}

std::vector<ComparatorInterval> coarsened_intervals(const LcnrMatrix& lcnr, const ModelHyperParams& hp,
                                                    double eta, double level, const HmcOptions& hmc) {
    const Eigen::MatrixXd draws = coarsened_draws(lcnr, hp, eta, hmc);
    const auto names = lcnr.panel ? lcnr.panel->gene_names() : std::vector<std::string>(lcnr.gene_count());
    std::vector<ComparatorInterval> out;
    for (Eigen::Index j = 0; j < draws.cols(); ++j) {
        std::vector<double> col(draws.col(j).data(), draws.col(j).data() + draws.rows());
        const Interval iv = hpd_interval(col, level);
        out.push_back({Method::coarsened, names[static_cast<std::size_t>(j)], level, iv.lo, iv.hi});
    }
    return out;
}

SandwichMarginals sandwich_marginals(const ObservationModel& model) {
    const auto mode = maximize(model, model.initial_point());
    const Eigen::MatrixXd H = negative_hessian(model, mode.x);
    Eigen::LDLT<Eigen::MatrixXd> ldlt(H);
    if (ldlt.info() != Eigen::Success || !(ldlt.vectorD().array() > 0.0).all())
        throw NumericalError("sandwich: Hessian at the MAP is singular or indefinite");
    const Eigen::MatrixXd scores = model.observation_scores(mode.x);
    const Eigen::MatrixXd J = scores.transpose() * scores;
    const Eigen::MatrixXd Hinv = ldlt.solve(Eigen::MatrixXd::Identity(H.rows(), H.cols()));
    const Eigen::MatrixXd V = Hinv * J * Hinv;
    SandwichMarginals out;
    for (std::size_t idx : model.gene_mean_indices()) {
        const auto i = static_cast<Eigen::Index>(idx);
        out.center.push_back(mode.x[i]);
        out.variance.push_back(V(i, i));
        out.model_variance.push_back(Hinv(i, i));
    }
    return out;
}

Interval sandwich_interval(const SandwichMarginals& m, std::size_t gene, double level) {
    if (!(level > 0.0 && level < 1.0)) throw ConfigError("sandwich: level must lie in (0, 1)");
    const double z = normal_quantile(0.5 + 0.5 * level);
    const double half = z * std::sqrt(std::max(m.variance[gene], 0.0));
    return {m.center[gene] - half, m.center[gene] + half};
}

std::vector<ComparatorInterval> sandwich_intervals(const LcnrMatrix& lcnr, const ModelHyperParams& hp, double level) {
    const HierarchicalModel model(lcnr.values, hp);
    const auto m = sandwich_marginals(model);
    const auto names = lcnr.panel ? lcnr.panel->gene_names() : std::vector<std::string>(lcnr.gene_count());
    std::vector<ComparatorInterval> out;
    for (std::size_t j = 0; j < m.center.size(); ++j) {
        const Interval iv = sandwich_interval(m, j, level);
        out.push_back({Method::sandwich, names[j], level, iv.lo, iv.hi});
    }
    return out;
}

std::vector<ComparatorInterval> hpd_intervals(const PosteriorSummary& summary) {
    std::vector<ComparatorInterval> out;
    for (std::size_t j = 0; j < summary.hpd.size(); ++j) {
        const std::string gene = j < summary.genes.size() ? summary.genes[j] : std::string();
        out.push_back({Method::hpd, gene, summary.level, summary.hpd[j].lo, summary.hpd[j].hi});
    }
    return out;
}

double mse_tolerance(std::span<const double> losses, double p) {
    if (losses.empty()) throw DataError("mse: no losses");
    for (double y : losses)
        if (!(y >= 0.0)) throw DataError("mse: losses must be non-negative");
    const double m = mean(losses);
    if (!(m > 0.0)) throw DataError("mse: all losses are zero");
    return tolerance_quantile({0.5, 2.0 * m}, p).T;
}

}  // namespace ampcal
