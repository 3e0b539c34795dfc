#include "doctest.h"
#include "oracles.hpp"

#include "ampcal/bayescnv.hpp"
#include "ampcal/errors.hpp"
#include "ampcal/inference.hpp"
#include "ampcal/model.hpp"

#include <cmath>
#include <numbers>
#include <random>

using namespace ampcal;

namespace {

std::vector<std::vector<double>> random_values(std::mt19937_64& gen, std::vector<std::size_t> sizes, double sd,
                                               double shift = 0.0) {
    std::normal_distribution<double> nd(0.0, sd);
    std::vector<std::vector<double>> v;
    for (std::size_t n : sizes) {
        std::vector<double> g(n);
        for (auto& x : g) x = nd(gen) + shift;
        v.push_back(g);
    }
    return v;
}

LcnrMatrix as_lcnr(std::vector<std::vector<double>> values) {
    std::vector<std::string> names;
    std::vector<std::size_t> sizes;
    for (std::size_t j = 0; j < values.size(); ++j) {
        names.push_back("G" + std::to_string(j));
        sizes.push_back(values[j].size());
    }
    return LcnrMatrix{"s", std::make_shared<const PanelDef>(PanelDef::synthetic(names, sizes)), std::move(values), 0.5};
}

struct StandardNormal final : LogDensity {
    std::size_t d;
    explicit StandardNormal(std::size_t dim) : d(dim) {}
    std::size_t dim() const override { return d; }
    double log_density(const Eigen::VectorXd& x, Eigen::VectorXd* grad) const override {
        if (grad) *grad = -x;
        return -0.5 * x.squaredNorm();
    }
};

// Finite inside [-1, 1], NaN outside: trajectories that leave are divergent.
struct Walled final : LogDensity {
    std::size_t dim() const override { return 1; }
    double log_density(const Eigen::VectorXd& x, Eigen::VectorXd* grad) const override {
        if (grad) *grad = Eigen::VectorXd::Zero(1);
        return std::abs(x[0]) <= 1.0 ? 0.0 : std::numeric_limits<double>::quiet_NaN();
    }
};

}  // namespace

TEST_CASE("softlaplace density") {
    CHECK(softlaplace_logpdf(0.3, 0.3, 1.0) == doctest::Approx(-1.144730).epsilon(1e-6));
    for (double a : {0.1, 1.0, 7.5}) CHECK(softlaplace_logpdf(2.0 + a, 2.0, 0.7) == softlaplace_logpdf(2.0 - a, 2.0, 0.7));
    // Laplace tails: log f + |z| tends to log(2/pi)
    const double lim = std::log(2.0 / std::numbers::pi);
    CHECK(softlaplace_logpdf(20.0, 0.0, 1.0) + 20.0 == doctest::Approx(lim).epsilon(1e-9));
    CHECK(softlaplace_logpdf(-40.0, 0.0, 1.0) + 40.0 == doctest::Approx(lim).epsilon(1e-9));
    // integrates to one
    double s = 0.0;
    for (double x = -60.0; x < 60.0; x += 0.001) s += std::exp(softlaplace_logpdf(x + 0.0005, 0.0, 1.0)) * 0.001;
    CHECK(s == doctest::Approx(1.0).epsilon(1e-6));
    CHECK_THROWS_AS(softlaplace_logpdf(0.0, 0.0, 0.0), NumericalError);
}

TEST_CASE("analytic gradient matches central differences") {
    std::mt19937_64 gen(42);
    std::normal_distribution<double> nd;
    std::uniform_real_distribution<double> ud(-3.0, 1.0);
    const HierarchicalModel model(random_values(gen, {4, 6, 8}, 0.2), ModelHyperParams{});
    double worst = 0.0;
    for (int rep = 0; rep < 50; ++rep) {
        Eigen::VectorXd x(static_cast<Eigen::Index>(model.dim()));
        for (Eigen::Index i = 0; i < x.size(); ++i) x[i] = nd(gen) * 0.5;
        x[1] = ud(gen);
        for (std::size_t j = 0; j < model.genes(); ++j) x[static_cast<Eigen::Index>(model.log_z2_index(j))] = ud(gen);
        x[static_cast<Eigen::Index>(model.log_tau0_2_index())] = ud(gen);
        Eigen::VectorXd g;
        model.log_density(x, &g);
        for (Eigen::Index i = 0; i < x.size(); ++i) {
            const double h = 1e-5;
            Eigen::VectorXd xp = x, xm = x;
            xp[i] += h;
            xm[i] -= h;
            const double fd = (model.log_density(xp, nullptr) - model.log_density(xm, nullptr)) / (2 * h);
            worst = std::max(worst, std::abs(fd - g[i]) / std::max({1.0, std::abs(g[i]), std::abs(fd)}));
        }
    }
    CHECK(worst < 1e-5);
}

TEST_CASE("log posterior decreases along random rays") {
    std::mt19937_64 gen(5);
    std::normal_distribution<double> nd;
    const HierarchicalModel model(random_values(gen, {3, 5}, 0.1), ModelHyperParams{});
    for (int rep = 0; rep < 20; ++rep) {
        Eigen::VectorXd dir(static_cast<Eigen::Index>(model.dim()));
        for (Eigen::Index i = 0; i < dir.size(); ++i) dir[i] = nd(gen);
        dir.normalize();
        const double a = model.log_density(10.0 * dir, nullptr);
        const double b = model.log_density(40.0 * dir, nullptr);
        CHECK(b < a);
    }
}

TEST_CASE("model rejects bad data") {
    CHECK_THROWS_AS(HierarchicalModel({{0.1, NAN}}, ModelHyperParams{}), DataError);
    CHECK_THROWS_AS(HierarchicalModel({{}}, ModelHyperParams{}), DataError);
    ModelHyperParams bad;
    bad.beta_tau = 0.0;
    CHECK_THROWS_AS(bad.validate(), ConfigError);
}

TEST_CASE("MAP is location equivariant") {
    std::mt19937_64 gen(8);
    auto values = random_values(gen, {5, 7, 9}, 0.15);
    ModelHyperParams hp;
    hp.prior_mu0_sd = 1e6;
    const auto a = map_estimate(as_lcnr(values), hp);
    for (auto& g : values)
        for (auto& v : g) v += 0.35;
    const auto b = map_estimate(as_lcnr(values), hp);
    CHECK(std::abs(b.mu0 - a.mu0 - 0.35) < 1e-6);
    for (std::size_t j = 0; j < a.mu.size(); ++j) CHECK(std::abs(b.mu[j] - a.mu[j] - 0.35) < 1e-6);
}

TEST_CASE("MAP failure reports the gradient norm") {
    std::mt19937_64 gen(2);
    const HierarchicalModel model(random_values(gen, {4, 4}, 0.1), ModelHyperParams{});
    MapOptions o;
    o.max_iterations = 1;
    o.grad_tol = 1e-300;
    try {
        maximize(model, model.initial_point(), o);
        FAIL("expected a NumericalError");
    } catch (const NumericalError& e) {
        CHECK(std::string(e.what()).find("gradient norm") != std::string::npos);
    }
}

TEST_CASE("Hessian at the MAP is symmetric") {
    std::mt19937_64 gen(9);
    const HierarchicalModel model(random_values(gen, {4, 6}, 0.1), ModelHyperParams{});
    const auto mode = maximize(model, model.initial_point());
    const Eigen::MatrixXd H = negative_hessian(model, mode.x);
    CHECK((H - H.transpose()).norm() <= 1e-8 * H.norm());
    const Eigen::MatrixXd R = negative_hessian_raw(model, mode.x);
    CHECK((R - R.transpose()).norm() <= 1e-6 * R.norm());
}

TEST_CASE("Laplace evidence equals the Gaussian marginal") {
    std::mt19937_64 gen(13);
    for (int rep = 0; rep < 5; ++rep) {
        const auto values = random_values(gen, {3, 5, 4}, 0.3, 0.2);
        const std::vector<double> t2{0.04, 0.09, 0.02};
        const GaussianLocationModel model(values, 2.0, 0.25, t2);
        const double z = laplace_evidence(model, model.initial_point());
        CHECK(std::abs(z - oracle::gaussian_log_marginal(values, 4.0, 0.25, t2)) < 1e-6);
    }
}

TEST_CASE("Laplace evidence errors name the eigenvalue") {
    Eigen::MatrixXd H = Eigen::MatrixXd::Identity(2, 2);
    H(1, 1) = -2.0;
    try {
        laplace_log_evidence(0.0, H);
        FAIL("expected a NumericalError");
    } catch (const NumericalError& e) {
        CHECK(std::string(e.what()).find("eigenvalue") != std::string::npos);
        CHECK(std::string(e.what()).find("-2") != std::string::npos);
    }
}

TEST_CASE("evidence falls when amplicon noise is inflated") {
    std::mt19937_64 gen(21);
    std::normal_distribution<double> nd;
    double lower = 0;
    for (int rep = 0; rep < 10; ++rep) {
        std::vector<std::vector<double>> z(4, std::vector<double>(8));
        for (auto& g : z)
            for (auto& v : g) v = nd(gen);
        auto quiet = z, loud = z;
        for (auto& g : quiet)
            for (auto& v : g) v *= 0.05;
        for (auto& g : loud)
            for (auto& v : g) v *= 0.25;
        if (laplace_evidence(as_lcnr(loud), {}) < laplace_evidence(as_lcnr(quiet), {})) ++lower;
    }
    CHECK(lower == 10);
}

TEST_CASE("evidence is invariant to amplicon order within a gene") {
    std::mt19937_64 gen(4);
    auto values = random_values(gen, {5, 6}, 0.1);
    const double a = laplace_evidence(as_lcnr(values), {});
    std::shuffle(values[0].begin(), values[0].end(), gen);
    std::shuffle(values[1].begin(), values[1].end(), gen);
    CHECK(laplace_evidence(as_lcnr(values), {}) == doctest::Approx(a).epsilon(1e-9));
}

TEST_CASE("HMC on a standard normal") {
    const StandardNormal target(3);
    HmcOptions o;
    o.n_draws = 4000;
    o.seed = 77;
    const auto run = hmc_sample(target, Eigen::VectorXd::Zero(3), o);
    for (Eigen::Index c = 0; c < 3; ++c) {
        std::vector<double> col(run.draws.col(c).data(), run.draws.col(c).data() + run.draws.rows());
        double m = 0.0;
        for (double v : col) m += v;
        m /= static_cast<double>(col.size());
        CHECK(std::abs(m) < 3.0 * oracle::batch_means_mcse(col));
    }
    const auto again = hmc_sample(target, Eigen::VectorXd::Zero(3), o);
    CHECK(again.draws == run.draws);
}

TEST_CASE("HMC matches the conjugate posterior of a single-gene Gaussian model") {
    std::mt19937_64 gen(31);
    const auto values = random_values(gen, {6}, 0.3, 0.4);
    const std::vector<double> t2{0.09};
    const GaussianLocationModel model(values, 1.0, 0.5, t2);
    HmcOptions o;
    o.n_draws = 5000;
    o.seed = 5;
    const auto run = hmc_sample(model, model.initial_point(), o);
    const auto post = oracle::gaussian_posterior(values, 1.0, 0.5, t2);
    for (Eigen::Index c = 0; c < 2; ++c) {
        std::vector<double> col(run.draws.col(c).data(), run.draws.col(c).data() + run.draws.rows());
        double m = 0.0;
        for (double v : col) m += v;
        m /= static_cast<double>(col.size());
        CHECK(std::abs(m - post.mean[c]) < 3.0 * oracle::batch_means_mcse(col));
    }
}

TEST_CASE("HMC flags a high divergence rate") {
    HmcOptions o;
    o.n_draws = 500;
    o.n_warmup = 200;
    o.target_accept = 0.3;
    o.seed = 1;
    const auto run = hmc_sample(Walled{}, Eigen::VectorXd::Zero(1), o);
    CHECK(run.diagnostics.divergences > 50);
    CHECK_FALSE(run.diagnostics.warnings.empty());
}

TEST_CASE("HPD examples") {
    std::vector<double> d;
    for (int i = 1; i <= 100; ++i) d.push_back(i);
    const auto iv = hpd_interval(d, 0.95);
    CHECK(iv.lo == 1.0);
    CHECK(iv.hi == 95.0);
    CHECK_THROWS_AS(hpd_interval(d, 1.0), ConfigError);
    CHECK_THROWS_AS(hpd_interval(d, 0.0), ConfigError);
}

TEST_CASE("HPD equals exhaustive window search") {
    std::mt19937_64 gen(17);
    std::gamma_distribution<double> gd(2.0, 1.0);
    for (int rep = 0; rep < 100; ++rep) {
        std::vector<double> d(200);
        for (auto& v : d) v = gd(gen);
        for (double level : {0.5, 0.8, 0.95}) {
            const auto iv = hpd_interval(d, level);
            const auto w = oracle::brute_hpd(d, level);
            CHECK(iv.lo == w.lo);
            CHECK(iv.hi == w.hi);
        }
    }
}

TEST_CASE("HPD of symmetric draws is near the equal-tailed interval") {
    std::mt19937_64 gen(23);
    std::normal_distribution<double> nd;
    std::vector<double> d(100000);
    for (auto& v : d) v = nd(gen);
    const auto iv = hpd_interval(d, 0.9);
    const double q = oracle::normal_quantile(0.95);
    CHECK(std::abs(iv.lo + q) < 0.03);
    CHECK(std::abs(iv.hi - q) < 0.03);
}

TEST_CASE("posterior summary flags genes whose interval excludes zero") {
    std::mt19937_64 gen(3);
    std::normal_distribution<double> nd;
    Eigen::MatrixXd draws(400, 2);
    for (Eigen::Index i = 0; i < 400; ++i) {
        draws(i, 0) = 0.01 * nd(gen);
        draws(i, 1) = 0.7 + 0.01 * nd(gen);
    }
    const auto s = posterior_summarize(draws, 0.95, -3.0);
    CHECK_FALSE(s.altered[0]);
    CHECK(s.altered[1]);
    CHECK(s.mu_hat[1] == doctest::Approx(draws.col(1).mean()));
    CHECK(s.log_evidence == -3.0);
}

TEST_CASE("fit_sample is deterministic and keeps draws on request") {
    std::mt19937_64 gen(12);
    const auto x = as_lcnr(random_values(gen, {4, 5}, 0.1));
    FitOptions o;
    o.hmc.n_draws = 200;
    o.hmc.n_warmup = 100;
    o.hmc.seed = 9;
    o.keep_draws = true;
    const auto a = fit_sample(x, {}, o);
    const auto b = fit_sample(x, {}, o);
    CHECK(a.draws.rows() == 200);
    CHECK(a.draws == b.draws);
    CHECK(a.mu_hat == b.mu_hat);
    CHECK(a.genes == std::vector<std::string>{"G0", "G1"});
}
