#include "doctest.h"
#include "oracles.hpp"

#include "ampcal/errors.hpp"
#include "ampcal/stats.hpp"
#include "ampcal/tolerance.hpp"

#include <cmath>
#include <random>

using namespace ampcal;

namespace {

LossSet losses(std::vector<double> y) {
    LossSet l{"G", std::move(y), {}};
    l.weights.assign(l.y.size(), 1.0);
    return l;
}

std::vector<double> gamma_draws(std::uint64_t seed, std::size_t n, double a, double s) {
    std::mt19937_64 gen(seed);
    std::gamma_distribution<double> gd(a, s);
    std::vector<double> v(n);
    for (auto& x : v) x = gd(gen);
    return v;
}

ImputedCohort cohort(std::vector<double> v) {
    ImputedCohort c;
    c.gene = "G";
    c.imputed_mask.assign(v.size(), false);
    c.values = std::move(v);
    return c;
}

}  // namespace

TEST_CASE("squared losses") {
    const auto l = squared_losses(cohort({-0.3, 0.0, 0.5}));
    CHECK(l.y[0] == doctest::Approx(0.09));
    CHECK(l.y[1] == 0.0);
    CHECK(l.y[2] == doctest::Approx(0.25));
    CHECK(l.gene == "G");
    CHECK(squared_losses(cohort({0.3, -0.0, -0.5})).y == l.y);
    for (double w : l.weights) CHECK(w == 1.0);
}

TEST_CASE("moment match") {
    auto g = moment_match(0.0, 1.0);
    CHECK(g.alpha == 0.5);
    CHECK(g.scale == 2.0);
    g = moment_match(0.0, 0.17);
    CHECK(g.alpha == 0.5);
    CHECK(g.scale == 2.0 * 0.17);
    g = moment_match(1.0, 1.0);
    CHECK(g.alpha == doctest::Approx(2.0 / 3.0).epsilon(1e-15));
    CHECK(g.scale == doctest::Approx(3.0).epsilon(1e-15));
    for (double lambda : {0.0, 0.1, 1.0, 10.0}) {
        const auto m = moment_match(lambda, 0.3);
        CHECK(m.alpha >= 0.5);
        CHECK((m.alpha == 0.5) == (lambda == 0.0));
        // E[(delta + tau Z)^2] = tau^2 (1 + lambda)
        CHECK(std::abs(m.alpha * m.scale - 0.3 * (1.0 + lambda)) <= 4e-16 * 0.3 * (1.0 + lambda));
        // Var = 2 tau^4 (1 + 2 lambda)
        CHECK(m.alpha * m.scale * m.scale == doctest::Approx(2.0 * 0.09 * (1.0 + 2.0 * lambda)).epsilon(1e-14));
    }
    CHECK_THROWS_AS(moment_match(-1.0, 1.0), ConfigError);
    CHECK_THROWS_AS(moment_match(0.0, 0.0), ConfigError);
}

TEST_CASE("Gamma MLE recovers chi-square parameters") {
    const auto f = gamma_mle_weighted(losses(gamma_draws(1, 100000, 0.5, 2.0)));
    CHECK(std::abs(f.alpha - 0.5) < 0.01);
    CHECK(std::abs(f.scale - 2.0) < 0.05);
    CHECK(f.gradient_norm < 1e-6);
}

TEST_CASE("Gamma MLE weight identities") {
    const auto y = gamma_draws(2, 200, 1.7, 0.3);
    const auto a = gamma_mle_weighted(losses(y));
    GammaSufficient st;
    for (double v : y) st.add(v, 1.0);
    const auto b = gamma_mle(st);
    CHECK(a.alpha == doctest::Approx(b.alpha).epsilon(1e-12));
    CHECK(a.scale == doctest::Approx(b.scale).epsilon(1e-12));

    auto dup = y;
    dup.insert(dup.end(), y.begin(), y.end());
    const auto c = gamma_mle_weighted(losses(dup));
    auto heavy = losses(y);
    for (auto& w : heavy.weights) w = 2.0;
    const auto d = gamma_mle_weighted(heavy);
    CHECK(c.alpha == doctest::Approx(a.alpha).epsilon(1e-9));
    CHECK(c.scale == doctest::Approx(a.scale).epsilon(1e-9));
    CHECK(d.alpha == doctest::Approx(a.alpha).epsilon(1e-9));
    CHECK(d.scale == doctest::Approx(a.scale).epsilon(1e-9));
}

TEST_CASE("Gamma MLE on the noncentral chi-square exceeds one half") {
    std::mt19937_64 gen(3);
    std::normal_distribution<double> nd;
    std::vector<double> y(100000);
    for (auto& v : y) {
        const double x = 0.2 + 0.3 * nd(gen);
        v = x * x;
    }
    CHECK(gamma_mle_weighted(losses(y)).alpha > 0.5);
}

TEST_CASE("Gamma MLE is scale equivariant") {
    const auto y = gamma_draws(4, 500, 0.8, 0.05);
    const auto a = gamma_mle_weighted(losses(y));
    auto ky = y;
    for (auto& v : ky) v *= 7.0;
    const auto b = gamma_mle_weighted(losses(ky));
    CHECK(std::abs(b.alpha - a.alpha) < 1e-6);
    CHECK(std::abs(b.scale / a.scale - 7.0) < 1e-6);
    const double ta = tolerance_quantile({a.alpha, a.scale}, 0.05).T;
    const double tb = tolerance_quantile({b.alpha, b.scale}, 0.05).T;
    CHECK(std::abs(tb / ta - 7.0) < 1e-6);
}

TEST_CASE("Gamma MLE errors") {
    CHECK_THROWS_AS(gamma_mle_weighted(losses({0.1, 0.2})), DataError);
    try {
        gamma_mle_weighted(losses({0.3, 0.3, 0.3, 0.3}));
        FAIL("expected a NumericalError");
    } catch (const NumericalError& e) {
        CHECK(std::string(e.what()).find("infinite-shape") != std::string::npos);
    }
    const auto f = gamma_mle_weighted(losses({0.0, 0.2, 0.5, 0.1, 0.7}));
    CHECK(f.floored == 1);
}

TEST_CASE("pseudo prior weights") {
    const auto prior = generate_pseudo_prior({0.5, 0.34}, 1000, 5.0, 11);
    CHECK(prior.values.size() == 1000);
    const auto with = attach_pseudo_prior(losses({0.1, 0.2, 0.3}), prior);
    REQUIRE(with.y.size() == 1003);
    CHECK(with.weights[3] == doctest::Approx(0.005).epsilon(1e-15));
    CHECK(with.weights[0] == 1.0);
    auto none = prior;
    none.effective_sample_size = 0.0;
    const auto same = attach_pseudo_prior(losses({0.1, 0.2, 0.3}), none);
    CHECK(same.y.size() == 3);
    CHECK(generate_pseudo_prior({0.5, 0.34}, 1000, 5.0, 11).values == prior.values);
}

TEST_CASE("prior alone recovers its generating parameters") {
    const auto prior = generate_pseudo_prior({0.8, 0.3}, 100000, 1000.0, 5);
    const auto f = gamma_mle_weighted(attach_pseudo_prior(LossSet{"G", {}, {}}, prior));
    CHECK(f.alpha == doctest::Approx(0.8).epsilon(0.02));
    CHECK(f.scale == doctest::Approx(0.3).epsilon(0.02));
}

TEST_CASE("prior with vanishing ESS leaves the fit unchanged") {
    const auto y = gamma_draws(6, 50, 0.6, 0.1);
    const auto free = gamma_mle_weighted(losses(y));
    const auto tiny = gamma_mle_weighted(attach_pseudo_prior(losses(y), generate_pseudo_prior({3.0, 1.0}, 1000, 1e-9, 1)));
    CHECK(tiny.alpha == doctest::Approx(free.alpha).epsilon(1e-6));
    CHECK(tiny.scale == doctest::Approx(free.scale).epsilon(1e-6));
}

TEST_CASE("tolerance quantile") {
    const auto m = tolerance_quantile({0.5, 2.0}, 0.05);
    CHECK(std::abs(m.T - oracle::chi2_1_quantile(0.95)) < 1e-6);
    CHECK(m.T == doctest::Approx(3.84146).epsilon(1e-6));
    CHECK(std::sqrt(m.T) == doctest::Approx(1.95996).epsilon(5e-6));
    CHECK(std::abs(std::sqrt(m.T) - oracle::normal_quantile(0.975)) < 1e-6);
    CHECK(m.lcnr_bound == doctest::Approx(std::sqrt(m.T)));
    CHECK(m.min_detectable_cnv == doctest::Approx(std::exp(std::sqrt(m.T))));

    // T = 0.04 gives bound 0.2 and detectable ratio e^0.2; Gamma(1/2, s) is s/2 times chi2_1
    const double s = 2.0 * 0.04 / oracle::chi2_1_quantile(0.95);
    const auto small = tolerance_quantile({0.5, s}, 0.05);
    CHECK(small.lcnr_bound == doctest::Approx(0.2).epsilon(1e-9));
    CHECK(small.min_detectable_cnv == doctest::Approx(1.2214).epsilon(1e-4));

    const auto med = tolerance_quantile({1.3, 0.7}, 0.5);
    CHECK(gamma_cdf(1.3, 0.7, med.T) == doctest::Approx(0.5).epsilon(1e-10));
    double prev = 0.0;
    for (double p : {0.5, 0.2, 0.1, 0.05, 0.01, 0.001}) {
        const double t = tolerance_quantile({1.3, 0.7}, p).T;
        CHECK(t > prev);
        prev = t;
    }
    CHECK_THROWS_AS(tolerance_quantile({0.5, 2.0}, 0.0), ConfigError);
    CHECK_THROWS_AS(tolerance_quantile({0.5, 2.0}, 0.6), ConfigError);
}

TEST_CASE("square-root transform preserves coverage exactly") {
    std::mt19937_64 gen(8);
    std::normal_distribution<double> nd(0.05, 0.2);
    std::vector<double> mu(5000);
    for (auto& v : mu) v = nd(gen);
    const auto y = squared_losses(cohort(mu)).y;
    for (double T : {0.001, 0.01, 0.04, 0.1}) {
        std::size_t a = 0, b = 0;
        for (std::size_t i = 0; i < mu.size(); ++i) {
            a += std::abs(mu[i]) <= std::sqrt(T);
            b += y[i] <= T;
        }
        CHECK(a == b);
    }
}

TEST_CASE("pipeline tolerance averages T over repetitions") {
    std::mt19937_64 gen(9);
    std::normal_distribution<double> nd(0.0, 0.1);
    std::vector<double> mu(30);
    for (auto& v : mu) v = nd(gen);
    const auto reps = impute_repetitions(mu, 4, 6, 3, "G");
    const auto prior = generate_pseudo_prior({0.5, 0.02}, 1000, 5.0, 2);
    const auto model = pipeline_tolerance(reps, &prior, 0.05);
    std::vector<double> Ts;
    for (const auto& c : reps) {
        const auto f = gamma_mle_weighted(attach_pseudo_prior(squared_losses(c), prior));
        Ts.push_back(tolerance_quantile({f.alpha, f.scale}, 0.05).T);
    }
    CHECK(model.T == doctest::Approx(mean(Ts)).epsilon(1e-12));
    CHECK(model.T_sd_over_reps == doctest::Approx(std::sqrt(sample_variance(Ts))).epsilon(1e-9));
    CHECK(model.repetitions == 6);
    CHECK(model.gene == "G");
}

TEST_CASE("prior set lookup") {
    PriorSet set;
    CHECK(set.empty());
    set.genes["MET"] = generate_pseudo_prior({0.5, 0.1}, 10, 5.0, 1);
    CHECK(set.find("MET") != nullptr);
    CHECK(set.find("KIT") == nullptr);
    set.fallback = generate_pseudo_prior({0.5, 0.2}, 10, 5.0, 2);
    CHECK(set.find("KIT") == &*set.fallback);
}

TEST_CASE("tolerance config picks m") {
    ToleranceConfig c;
    CHECK(c.imputed_count(50) == 10);
    c.m = 1;
    CHECK(c.imputed_count(5) == 1);
    c.m = 3;
    CHECK_THROWS_AS(c.imputed_count(5), DataError);
}
