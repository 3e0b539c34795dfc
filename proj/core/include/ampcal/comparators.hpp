#pragma once

// Baseline intervals compared against the Gamma tolerance limits: the
// plain HPD interval, the HPD of a coarsened (tempered) posterior, a
// sandwich-corrected Normal interval at the MAP, and a Gamma tolerance with
// the shape pinned at 1/2.

#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "ampcal/bayescnv.hpp"
#include "ampcal/panel_io.hpp"

namespace ampcal {

enum class Method { gamma, hpd, coarsened, sandwich, mse };

std::string to_string(Method m);
Method parse_method(const std::string& name);

struct ComparatorInterval {
    Method method = Method::hpd;
    std::string gene;
    double level = 0.95;
    double lo = 0.0;
    double hi = 0.0;
};

// eta = n / (n + zeta), n the mean number of amplicons per gene.
double default_coarsening_rate(const LcnrMatrix& lcnr, double zeta = 10.0);

// Draws of mu under p(theta) * prod p(x | theta)^eta.
Eigen::MatrixXd coarsened_draws(const LcnrMatrix& lcnr, const ModelHyperParams& hp, double eta,
                                const HmcOptions& hmc);

std::vector<ComparatorInterval> coarsened_intervals(const LcnrMatrix& lcnr, const ModelHyperParams& hp,
                                                    double eta, double level, const HmcOptions& hmc);

// Mean and sandwich variance [H^-1 J H^-1]_jj of each gene mean at the MAP.
struct SandwichMarginals {
    std::vector<double> center;
    std::vector<double> variance;
    std::vector<double> model_variance;  // [H^-1]_jj, for comparison
};

SandwichMarginals sandwich_marginals(const ObservationModel& model);
std::vector<ComparatorInterval> sandwich_intervals(const LcnrMatrix& lcnr, const ModelHyperParams& hp, double level);
// Normal interval at `level` from sandwich marginals.
Interval sandwich_interval(const SandwichMarginals& m, std::size_t gene, double level);

std::vector<ComparatorInterval> hpd_intervals(const PosteriorSummary& summary);

// Shape fixed at 1/2, scale 2 * mean(Y); T at miscoverage p. Throws
// DataError when every loss is zero.
double mse_tolerance(std::span<const double> losses, double p);

}  // namespace ampcal
