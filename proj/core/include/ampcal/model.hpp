#pragma once

// Hierarchical lCNR model, written in an unconstrained parameterization.
//
//   mu0        ~ Normal(0, prior_mu0_sd^2)
//   sigma^2    ~ InvGamma(alpha_sigma, beta_sigma)
//   mu_j       ~ Normal(mu0, sigma^2)
//   tau0^2     ~ InvGamma(alpha_tau0, beta_tau0)
//   z_j^2      ~ InvGamma(alpha_tau, beta_tau)
//   X_jk       ~ SoftLaplace(mu_j, tau0 * z_j)
//
// Variances are stored as logs, so the density carries the log-Jacobian of
// each transform and every real vector is a valid state. Vector layout:
//   [mu0, log sigma^2, mu_1..mu_J, log z_1^2..log z_J^2, log tau0^2]

#include <cstddef>
#include <span>
#include <vector>

#include <Eigen/Dense>

namespace ampcal {

struct ModelHyperParams {
    double prior_mu0_sd = 10.0;
    double alpha_sigma = 3.0;
    double beta_sigma = 0.5;
    double alpha_tau0 = 3.0;
    double beta_tau0 = 0.5;
    double alpha_tau = 3.0;
    double beta_tau = 0.5;

    // Throws ConfigError unless every field is strictly positive and finite.
    void validate() const;
};

// log f(x) with f(x) = (2/pi) / (scale * (e^z + e^-z)), z = (x - loc) / scale.
double softlaplace_logpdf(double x, double loc, double scale);

struct ModelState {
    double mu0 = 0.0;
    double log_sigma2 = 0.0;
    std::vector<double> mu;
    std::vector<double> log_z2;
    double log_tau0_2 = 0.0;

    std::size_t gene_count() const { return mu.size(); }
    Eigen::VectorXd to_vector() const;
    static ModelState from_vector(const Eigen::VectorXd& x, std::size_t genes);
};

// A differentiable, unnormalized-or-normalized log density on R^d.
class LogDensity {
public:
    virtual ~LogDensity() = default;
    virtual std::size_t dim() const = 0;
    // Returns log p(x); fills `grad` when non-null (resized by the callee).
    virtual double log_density(const Eigen::VectorXd& x, Eigen::VectorXd* grad) const = 0;
};

// Log density made of a prior plus a sum of per-observation likelihood terms.
class ObservationModel : public LogDensity {
public:
    // Row i is the gradient of the (untempered) log likelihood of
    // observation i. Used by the sandwich comparator.
    virtual Eigen::MatrixXd observation_scores(const Eigen::VectorXd& x) const = 0;
    // Coordinates holding the gene means mu_j, in gene order.
    virtual std::vector<std::size_t> gene_mean_indices() const = 0;
    virtual Eigen::VectorXd initial_point() const = 0;
    virtual std::size_t observation_count() const = 0;
};

enum class Likelihood { soft_laplace, gaussian };

class HierarchicalModel final : public ObservationModel {
public:
    // `values[j]` are the lCNRs of gene j. `tempering` raises the likelihood
    // to that power (1 is the ordinary posterior). Throws DataError on
    // non-finite input or an empty gene.
    HierarchicalModel(std::vector<std::vector<double>> values, ModelHyperParams hp,
                      Likelihood likelihood = Likelihood::soft_laplace, double tempering = 1.0);

    std::size_t dim() const override { return 2 * genes() + 3; }
    std::size_t genes() const { return values_.size(); }
    double log_density(const Eigen::VectorXd& x, Eigen::VectorXd* grad) const override;
    Eigen::MatrixXd observation_scores(const Eigen::VectorXd& x) const override;
    std::vector<std::size_t> gene_mean_indices() const override;
    Eigen::VectorXd initial_point() const override;
    std::size_t observation_count() const override { return n_obs_; }

    std::size_t mu_index(std::size_t j) const { return 2 + j; }
    std::size_t log_z2_index(std::size_t j) const { return 2 + genes() + j; }
    std::size_t log_tau0_2_index() const { return 2 + 2 * genes(); }

    const ModelHyperParams& hyper() const { return hp_; }
    double tempering() const { return tempering_; }

private:
    std::vector<std::vector<double>> values_;
    ModelHyperParams hp_;
    Likelihood likelihood_;
    double tempering_;
    std::size_t n_obs_ = 0;
};

// Gaussian location model with known variances: the test build of the
// hierarchical model in which the posterior over (mu0, mu_1..mu_J) is
// exactly Normal. Layout: [mu0, mu_1..mu_J].
class GaussianLocationModel final : public ObservationModel {
public:
    GaussianLocationModel(std::vector<std::vector<double>> values, double prior_mu0_sd, double sigma2,
                          std::vector<double> tau2, double tempering = 1.0);

    std::size_t dim() const override { return values_.size() + 1; }
    double log_density(const Eigen::VectorXd& x, Eigen::VectorXd* grad) const override;
    Eigen::MatrixXd observation_scores(const Eigen::VectorXd& x) const override;
    std::vector<std::size_t> gene_mean_indices() const override;
    Eigen::VectorXd initial_point() const override;
    std::size_t observation_count() const override { return n_obs_; }

private:
    std::vector<std::vector<double>> values_;
    double prior_mu0_sd_;
    double sigma2_;
    std::vector<double> tau2_;
    double tempering_;
    std::size_t n_obs_ = 0;
};

}  // namespace ampcal
