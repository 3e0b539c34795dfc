#include "doctest.h"
#include "oracles.hpp"

#include "ampcal/bayescnv.hpp"
#include "ampcal/errors.hpp"
#include "ampcal/serialize.hpp"
#include "ampcal/stats.hpp"
#include "ampcal/synth.hpp"
#include "ampcal/tolerance.hpp"

#include <cmath>

using namespace ampcal;

namespace {

SynthSpec one_gene(double delta, double tau2, std::size_t amplicons = 8) {
    SynthSpec s;
    s.genes = {GeneSpec{"G", amplicons, delta, tau2}};
    s.seed = 17;
    return s;
}

}  // namespace

TEST_CASE("gene means follow Normal(delta, tau2)") {
    const auto mu = gen_gene_means(one_gene(0.0, 1.0), 100000)[0];
    CHECK(std::abs(mean(mu)) < 3.0 / std::sqrt(100000.0));
    const double ks = oracle::ks_one_sample(mu, oracle::phi_cdf);
    CHECK(ks < 1.63 / std::sqrt(100000.0));
    CHECK(gen_gene_means(one_gene(0.0, 1.0), 100)[0] == gen_gene_means(one_gene(0.0, 1.0), 100)[0]);
}

TEST_CASE("squared gene means have the moment-matched mean") {
    const std::size_t n = 100000;
    const auto mu = gen_gene_means(one_gene(0.2, 0.17), n)[0];
    std::vector<double> y;
    for (double v : mu) y.push_back(v * v);
    const auto g = moment_match(0.2 * 0.2 / 0.17, 0.17);
    const double se = std::sqrt(sample_variance(y) / static_cast<double>(n));
    CHECK(std::abs(mean(y) - g.alpha * g.scale) < 3.0 * se);
}

TEST_CASE("SoftLaplace CDF and quantile") {
    for (double z : {-5.0, -1.0, -0.1, 0.0, 0.4, 2.0, 7.0})
        CHECK(softlaplace_cdf(z) == doctest::Approx(oracle::softlaplace_cdf_numeric(z)).epsilon(1e-8));
    for (double u : {1e-6, 0.1, 0.5, 0.77, 0.999})
        CHECK(softlaplace_cdf(softlaplace_quantile(u)) == doctest::Approx(u).epsilon(1e-12));
}

TEST_CASE("amplicon noise marginals") {
    for (NoiseKind k : {NoiseKind::soft_laplace, NoiseKind::gaussian}) {
        auto spec = one_gene(0.0, 1e-12, 1);
        spec.noise = k;
        spec.strata[0].noise_scale = 1.0;
        const auto c = gen_panel(spec, 100000);
        std::vector<double> x;
        for (std::size_t s = 0; s < c.samples.size(); ++s) x.push_back(c.samples[s].values[0][0] - c.true_means[s][0]);
        const double ks = k == NoiseKind::gaussian
                              ? oracle::ks_one_sample(x, oracle::phi_cdf)
                              : oracle::ks_one_sample(x, oracle::softlaplace_cdf_numeric);
        CHECK(ks < 1.63 / std::sqrt(100000.0));
    }
}

TEST_CASE("diploid panels centre on zero; CN 4 centres on log 2") {
    auto spec = one_gene(0.0, 1e-6, 20);
    spec.genes.push_back(GeneSpec{"H", 20, 0.0, 1e-6});
    spec.strata[0].noise_scale = 0.02;
    for (std::size_t s = 0; s < 50; ++s) spec.positives.push_back({s, "H", 4.0});
    const auto c = gen_panel(spec, 50);
    double g = 0.0, h = 0.0;
    for (const auto& x : c.samples) {
        g += mean(x.values[0]);
        h += mean(x.values[1]);
    }
    CHECK(std::abs(g / 50.0) < 0.01);
    CHECK(std::abs(h / 50.0 - std::log(2.0)) < 0.01);
    CHECK(c.labels[3].copy_number.at("H") == 4.0);
    CHECK(c.labels[3].copy_number.count("G") == 0);
}

TEST_CASE("noisier panels have lower evidence") {
    auto quiet = SynthSpec::default_panel();
    quiet.seed = 3;
    auto loud = quiet;
    loud.strata[0].noise_scale *= 2.0;
    const auto a = gen_panel(quiet, 10), b = gen_panel(loud, 10);
    double za = 0.0, zb = 0.0;
    for (std::size_t s = 0; s < 10; ++s) {
        za += laplace_evidence(a.samples[s], {});
        zb += laplace_evidence(b.samples[s], {});
    }
    CHECK(zb < za);
}

TEST_CASE("default panel and stratum layout") {
    const auto p = SynthSpec::default_panel();
    CHECK(p.panel()->amplicon_count() == 172);
    CHECK(p.genes.size() == 12);
    SynthSpec two = p;
    two.strata = {{"matched", 0.4, 0.1, 0.0}, {"unmatched", 0.6, 0.3, 0.0}};
    const auto layout = stratum_layout(two, 10);
    CHECK(std::count(layout.begin(), layout.end(), 0u) == 4);
    CHECK(std::count(layout.begin(), layout.end(), 1u) == 6);
    two.strata[1].fraction = 0.5;
    CHECK_THROWS_AS(two.validate(), ConfigError);
    CHECK(synthetic_sample_id(0) == "S001");
}

TEST_CASE("generation is reproducible in the seed") {
    auto spec = SynthSpec::default_panel();
    const auto a = gen_panel(spec, 5), b = gen_panel(spec, 5);
    for (std::size_t s = 0; s < 5; ++s) CHECK(a.samples[s].values == b.samples[s].values);
    spec.seed = 2;
    CHECK(gen_panel(spec, 5).samples[0].values != a.samples[0].values);
}

TEST_CASE("labels round trip through JSON") {
    auto spec = SynthSpec::default_panel();
    spec.positives = {{1, "MET", 6.0}, {2, "KIT", 1.0}};
    const auto c = gen_panel(spec, 4);
    for (const auto& l : c.labels) {
        const auto back = label_from_json(to_json(l));
        CHECK(back.sample_id == l.sample_id);
        CHECK(back.stratum == l.stratum);
        CHECK(back.copy_number == l.copy_number);
    }
    const auto s2 = synth_spec_from_json(to_json(spec));
    CHECK(to_json(s2) == to_json(spec));
    CHECK(parse_noise_kind(to_string(NoiseKind::student_t)) == NoiseKind::student_t);
}
