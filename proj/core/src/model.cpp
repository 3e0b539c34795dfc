#include "ampcal/model.hpp"

#include "ampcal/errors.hpp"
#include "ampcal/stats.hpp"

#include <cmath>
#include <numbers>

namespace ampcal {

namespace {

constexpr double kHalfLog2Pi = 0.91893853320467274178;

// log of InvGamma(a, b) density of v = e^u, plus the Jacobian u.
double log_invgamma_of_log(double u, double a, double b, double* du) {
    const double inv = std::exp(-u);
    if (du != nullptr) *du = -a + b * inv;
    return a * std::log(b) - log_gamma(a) - a * u - b * inv;
}

// log(e^z + e^-z) without overflow.
double log_two_cosh(double z) {
    const double az = std::abs(z);
    return az + std::log1p(std::exp(-2.0 * az));
}

void check_values(const std::vector<std::vector<double>>& values, std::size_t& n_obs) {
    if (values.empty()) throw DataError("model: no genes");
    n_obs = 0;
    for (const auto& g : values) {
        if (g.empty()) throw DataError("model: gene with no amplicons");
        for (double v : g)
            if (!std::isfinite(v)) throw DataError("model: non-finite lCNR value");
        n_obs += g.size();
    }
}

}  // namespace

void ModelHyperParams::validate() const {
    for (double v : {prior_mu0_sd, alpha_sigma, beta_sigma, alpha_tau0, beta_tau0, alpha_tau, beta_tau})
        if (!(v > 0.0) || !std::isfinite(v))
            throw ConfigError("hyperparameters must be finite and strictly positive");
}

double softlaplace_logpdf(double x, double loc, double scale) {
    if (!(scale > 0.0)) throw NumericalError("softlaplace: scale must be positive");
    const double z = (x - loc) / scale;
    return std::log(2.0 / std::numbers::pi) - std::log(scale) - log_two_cosh(z);
}

Eigen::VectorXd ModelState::to_vector() const {
    const std::size_t J = mu.size();
    Eigen::VectorXd x(2 * J + 3);
    x[0] = mu0;
    x[1] = log_sigma2;
    for (std::size_t j = 0; j < J; ++j) {
        x[2 + j] = mu[j];
        x[2 + J + j] = log_z2[j];
    }
    x[2 + 2 * J] = log_tau0_2;
    return x;
}

ModelState ModelState::from_vector(const Eigen::VectorXd& x, std::size_t genes) {
    if (static_cast<std::size_t>(x.size()) != 2 * genes + 3)
        throw NumericalError("model state: dimension mismatch");
    ModelState s;
    s.mu0 = x[0];
    s.log_sigma2 = x[1];
    for (std::size_t j = 0; j < genes; ++j) {
        s.mu.push_back(x[2 + j]);
        s.log_z2.push_back(x[2 + genes + j]);
    }
    s.log_tau0_2 = x[2 + 2 * genes];
    return s;
}

HierarchicalModel::HierarchicalModel(std::vector<std::vector<double>> values, ModelHyperParams hp,
                                     Likelihood likelihood, double tempering)
    : values_(std::move(values)), hp_(hp), likelihood_(likelihood), tempering_(tempering) {
    hp_.validate();
    if (!(tempering_ > 0.0 && tempering_ <= 1.0)) throw ConfigError("tempering must lie in (0, 1]");
    check_values(values_, n_obs_);
}

double HierarchicalModel::log_density(const Eigen::VectorXd& x, Eigen::VectorXd* grad) const {
    const std::size_t J = genes();
    if (static_cast<std::size_t>(x.size()) != dim()) throw NumericalError("model: state dimension mismatch");
    if (grad != nullptr) grad->setZero(dim());

    const double mu0 = x[0];
    const double log_s2 = x[1];
    const double lt = x[log_tau0_2_index()];
    const double s0 = hp_.prior_mu0_sd;

    double lp = -kHalfLog2Pi - std::log(s0) - 0.5 * mu0 * mu0 / (s0 * s0);
    double g_mu0 = -mu0 / (s0 * s0);

    double d_s2 = 0.0;
    lp += log_invgamma_of_log(log_s2, hp_.alpha_sigma, hp_.beta_sigma, &d_s2);
    double d_lt = 0.0;
    lp += log_invgamma_of_log(lt, hp_.alpha_tau0, hp_.beta_tau0, &d_lt);

    const double inv_s2 = std::exp(-log_s2);
    const double log_norm = likelihood_ == Likelihood::soft_laplace ? std::log(2.0 / std::numbers::pi) : -kHalfLog2Pi;
    for (std::size_t j = 0; j < J; ++j) {
        const double mu = x[mu_index(j)];
        const double lz = x[log_z2_index(j)];

        const double d = mu - mu0;
        lp += -kHalfLog2Pi - 0.5 * log_s2 - 0.5 * d * d * inv_s2;
        double g_mu = -d * inv_s2;
        g_mu0 += d * inv_s2;
        d_s2 += -0.5 + 0.5 * d * d * inv_s2;

        double d_lz = 0.0;
        lp += log_invgamma_of_log(lz, hp_.alpha_tau, hp_.beta_tau, &d_lz);

        const double log_tau = 0.5 * (lt + lz);
        const double inv_tau = std::exp(-log_tau);
        double ll = 0.0, dll_mu = 0.0, dll_logtau = 0.0;
        for (double v : values_[j]) {
            const double z = (v - mu) * inv_tau;
            if (likelihood_ == Likelihood::soft_laplace) {
                const double th = std::tanh(z);
                ll += log_norm - log_tau - log_two_cosh(z);
                dll_mu += th * inv_tau;
                dll_logtau += -1.0 + z * th;
            } else {
                ll += log_norm - log_tau - 0.5 * z * z;
                dll_mu += z * inv_tau;
                dll_logtau += -1.0 + z * z;
            }
        }
        lp += tempering_ * ll;
        if (grad != nullptr) {
            (*grad)[mu_index(j)] = g_mu + tempering_ * dll_mu;
            (*grad)[log_z2_index(j)] = d_lz + 0.5 * tempering_ * dll_logtau;
        }
        d_lt += 0.5 * tempering_ * dll_logtau;
    }
    if (grad != nullptr) {
        (*grad)[0] = g_mu0;
        (*grad)[1] = d_s2;
        (*grad)[log_tau0_2_index()] = d_lt;
    }
    return lp;
}

Eigen::MatrixXd HierarchicalModel::observation_scores(const Eigen::VectorXd& x) const {
    const std::size_t J = genes();
    Eigen::MatrixXd scores = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(n_obs_), static_cast<Eigen::Index>(dim()));
    const double lt = x[log_tau0_2_index()];
    Eigen::Index row = 0;
    for (std::size_t j = 0; j < J; ++j) {
        const double mu = x[mu_index(j)];
        const double log_tau = 0.5 * (lt + x[log_z2_index(j)]);
        const double inv_tau = std::exp(-log_tau);
        for (double v : values_[j]) {
            const double z = (v - mu) * inv_tau;
            double d_mu, d_logtau;
            if (likelihood_ == Likelihood::soft_laplace) {
                const double th = std::tanh(z);
                d_mu = th * inv_tau;
                d_logtau = -1.0 + z * th;
            } else {
                d_mu = z * inv_tau;
                d_logtau = -1.0 + z * z;
            }
            scores(row, static_cast<Eigen::Index>(mu_index(j))) = d_mu;
            scores(row, static_cast<Eigen::Index>(log_z2_index(j))) = 0.5 * d_logtau;
            scores(row, static_cast<Eigen::Index>(log_tau0_2_index())) = 0.5 * d_logtau;
            ++row;
        }
    }
    return scores;
}

std::vector<std::size_t> HierarchicalModel::gene_mean_indices() const {
    std::vector<std::size_t> idx;
    for (std::size_t j = 0; j < genes(); ++j) idx.push_back(mu_index(j));
    return idx;
}

Eigen::VectorXd HierarchicalModel::initial_point() const {
    const std::size_t J = genes();
    ModelState s;
    std::vector<double> all;
    std::vector<double> gene_meds;
    double spread = 0.0;
    for (const auto& g : values_) {
        const double m = median(g);
        gene_meds.push_back(m);
        for (double v : g) all.push_back(v - m);
    }
    spread = 1.4826 * mad(all, 0.0);
    s.mu0 = median(gene_meds);
    const double between = J > 1 ? sample_variance(gene_meds) : 0.0;
    s.log_sigma2 = std::log(std::max(between, 0.01));
    s.mu = gene_meds;
    s.log_z2.assign(J, 0.0);
    s.log_tau0_2 = std::log(std::max(spread * spread, 1e-4));
    return s.to_vector();
}

GaussianLocationModel::GaussianLocationModel(std::vector<std::vector<double>> values, double prior_mu0_sd,
                                             double sigma2, std::vector<double> tau2, double tempering)
    : values_(std::move(values)), prior_mu0_sd_(prior_mu0_sd), sigma2_(sigma2), tau2_(std::move(tau2)),
      tempering_(tempering) {
    check_values(values_, n_obs_);
    if (tau2_.size() != values_.size()) throw ConfigError("gaussian model: one tau^2 per gene required");
    if (!(prior_mu0_sd_ > 0.0) || !(sigma2_ > 0.0)) throw ConfigError("gaussian model: variances must be positive");
    for (double t : tau2_)
        if (!(t > 0.0)) throw ConfigError("gaussian model: variances must be positive");
    if (!(tempering_ > 0.0 && tempering_ <= 1.0)) throw ConfigError("tempering must lie in (0, 1]");
}

double GaussianLocationModel::log_density(const Eigen::VectorXd& x, Eigen::VectorXd* grad) const {
    const std::size_t J = values_.size();
    if (grad != nullptr) grad->setZero(static_cast<Eigen::Index>(dim()));
    const double mu0 = x[0];
    const double v0 = prior_mu0_sd_ * prior_mu0_sd_;
    double lp = -kHalfLog2Pi - 0.5 * std::log(v0) - 0.5 * mu0 * mu0 / v0;
    double g0 = -mu0 / v0;
    for (std::size_t j = 0; j < J; ++j) {
        const double mu = x[1 + j];
        const double d = mu - mu0;
        lp += -kHalfLog2Pi - 0.5 * std::log(sigma2_) - 0.5 * d * d / sigma2_;
        double g = -d / sigma2_;
        g0 += d / sigma2_;
        double ll = 0.0, dll = 0.0;
        for (double v : values_[j]) {
            const double r = v - mu;
            ll += -kHalfLog2Pi - 0.5 * std::log(tau2_[j]) - 0.5 * r * r / tau2_[j];
            dll += r / tau2_[j];
        }
        lp += tempering_ * ll;
        if (grad != nullptr) (*grad)[static_cast<Eigen::Index>(1 + j)] = g + tempering_ * dll;
    }
    if (grad != nullptr) (*grad)[0] = g0;
    return lp;
}

Eigen::MatrixXd GaussianLocationModel::observation_scores(const Eigen::VectorXd& x) const {
    Eigen::MatrixXd scores = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(n_obs_), static_cast<Eigen::Index>(dim()));
    Eigen::Index row = 0;
    for (std::size_t j = 0; j < values_.size(); ++j)
        for (double v : values_[j]) scores(row++, static_cast<Eigen::Index>(1 + j)) = (v - x[1 + j]) / tau2_[j];
    return scores;
}

std::vector<std::size_t> GaussianLocationModel::gene_mean_indices() const {
    std::vector<std::size_t> idx;
    for (std::size_t j = 0; j < values_.size(); ++j) idx.push_back(1 + j);
    return idx;
}

Eigen::VectorXd GaussianLocationModel::initial_point() const {
    Eigen::VectorXd x(static_cast<Eigen::Index>(dim()));
    double sum = 0.0;
    for (std::size_t j = 0; j < values_.size(); ++j) {
        x[1 + j] = mean(values_[j]);
        sum += x[1 + j];
    }
    x[0] = sum / static_cast<double>(values_.size());
    return x;
}

}  // namespace ampcal
