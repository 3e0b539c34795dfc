#include "ampcal/tolerance.hpp"

#include "ampcal/errors.hpp"
#include "ampcal/rng.hpp"
#include "ampcal/stats.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <sstream>

namespace ampcal {

LossSet squared_losses(const ImputedCohort& cohort) {
    LossSet out{cohort.gene, {}, {}};
    out.y.reserve(cohort.values.size());
    for (double v : cohort.values) out.y.push_back(v * v);
    out.weights.assign(out.y.size(), 1.0);
    return out;
}

GammaParams moment_match(double lambda, double tau2) {
    if (!(lambda >= 0.0)) throw ConfigError("moment_match: lambda must be non-negative");
    if (!(tau2 > 0.0)) throw ConfigError("moment_match: tau^2 must be positive");
    const double a = (1.0 + lambda) * (1.0 + lambda) / (2.0 * (1.0 + 2.0 * lambda));
    const double s = 2.0 * tau2 * (1.0 + 2.0 * lambda) / (1.0 + lambda);
    return {a, s};
}

void GammaSufficient::add(double y, double w) {
    if (!(y >= 0.0) || !std::isfinite(y)) throw DataError("gamma: losses must be finite and non-negative");
    if (!(w > 0.0)) throw DataError("gamma: weights must be positive");
    if (y > 0.0) ++positive;
    if (y < kFloor) {
        ++floored;
        y = kFloor;
    }
    weight += w;
    weighted_sum += w * y;
    weighted_log_sum += w * std::log(y);
}

void GammaSufficient::merge(const GammaSufficient& o) {
    weight += o.weight;
    weighted_sum += o.weighted_sum;
    weighted_log_sum += o.weighted_log_sum;
    positive += o.positive;
    floored += o.floored;
}

GammaFit gamma_mle(const GammaSufficient& st) {
    if (st.positive < 3) throw DataError("gamma: at least three strictly positive losses are required");
    if (!(st.weight > 2.0)) throw DataError("gamma: total weight must exceed 2");

    const double ybar = st.weighted_sum / st.weight;
    const double log_bar = st.weighted_log_sum / st.weight;
    const double S = std::log(ybar) - log_bar;

    // g(x) = x - digamma(e^x) - S with x = log(alpha); g is decreasing.
    auto g = [&](double x) { return x - digamma(std::exp(x)) - S; };
    double lo = std::log(1e-3), hi = std::log(1e3);
    if (!(S > 0.0) || g(hi) >= 0.0) {
        std::ostringstream msg;
        msg << "gamma: shape estimate exceeds 1e3 (log-mean gap " << S
            << "); losses are (nearly) constant, the infinite-shape limit";
        throw NumericalError(msg.str());
    }
    if (g(lo) <= 0.0) throw NumericalError("gamma: shape estimate below 1e-3; losses are degenerate");

    // Minka's closed-form start.
    double x = std::log((3.0 - S + std::sqrt((S - 3.0) * (S - 3.0) + 24.0 * S)) / (12.0 * S));
    if (!(x > lo && x < hi)) x = 0.5 * (lo + hi);
    std::size_t it = 0;
    for (; it < 200; ++it) {
        const double gx = g(x);
        if (gx > 0.0) lo = x; else hi = x;
        if (gx == 0.0) break;
        const double a = std::exp(x);
        const double slope = 1.0 - a * trigamma(a);
        double next = x - gx / slope;
        if (!(next > lo && next < hi)) next = 0.5 * (lo + hi);
        if (std::abs(next - x) < 1e-15 * std::max(1.0, std::abs(x))) {
            x = next;
            break;
        }
        x = next;
    }

    GammaFit fit;
    fit.alpha = std::exp(x);
    fit.scale = ybar / fit.alpha;
    fit.floored = st.floored;
    fit.iterations = it;
    const double d_alpha = st.weighted_log_sum - st.weight * (std::log(fit.scale) + digamma(fit.alpha));
    const double d_scale = st.weighted_sum / (fit.scale * fit.scale) - st.weight * fit.alpha / fit.scale;
    fit.gradient_norm = std::hypot(d_alpha, d_scale);
    return fit;
}

GammaFit gamma_mle_weighted(const LossSet& losses) {
    if (losses.y.size() != losses.weights.size()) throw DataError("gamma: losses and weights differ in length");
    GammaSufficient st;
    for (std::size_t i = 0; i < losses.y.size(); ++i) st.add(losses.y[i], losses.weights[i]);
    return gamma_mle(st);
}

double PseudoPriorSpec::weight() const {
    if (values.empty()) return 0.0;
    return effective_sample_size / static_cast<double>(values.size());
}

GammaSufficient PseudoPriorSpec::sufficient() const {
    GammaSufficient st;
    if (effective_sample_size <= 0.0) return st;
    const double w = weight();
    for (double v : values) st.add(v, w);
    return st;
}

PseudoPriorSpec generate_pseudo_prior(GammaParams reference, std::size_t count, double ess, std::uint64_t seed) {
    if (!(reference.alpha > 0.0) || !(reference.scale > 0.0))
        throw ConfigError("pseudo prior: reference shape and scale must be positive");
    if (count == 0) throw ConfigError("pseudo prior: at least one pseudo-observation is required");
    if (!(ess >= 0.0)) throw ConfigError("pseudo prior: effective sample size must be non-negative");
    Rng rng(seed);
    PseudoPriorSpec spec;
    spec.source = PriorSource::generated;
    spec.effective_sample_size = ess;
    spec.values.reserve(count);
    // Inverse-CDF draws keep the stream independent of the standard library.
    for (std::size_t i = 0; i < count; ++i)
        spec.values.push_back(gamma_quantile(reference.alpha, reference.scale, uniform_open(rng)));
    return spec;
}

LossSet attach_pseudo_prior(const LossSet& losses, const PseudoPriorSpec& prior) {
    LossSet out = losses;
    if (prior.effective_sample_size <= 0.0 || prior.values.empty()) return out;
    const double w = prior.weight();
    for (double v : prior.values) {
        if (!(v >= 0.0)) throw DataError("pseudo prior: values must be non-negative");
        out.y.push_back(v);
        out.weights.push_back(w);
    }
    return out;
}

const PseudoPriorSpec* PriorSet::find(const std::string& gene) const {
    const auto it = genes.find(gene);
    if (it != genes.end()) return &it->second;
    return fallback ? &*fallback : nullptr;
}

GammaToleranceModel tolerance_quantile(GammaParams fit, double p) {
    if (!(p > 0.0 && p <= 0.5)) throw ConfigError("tolerance: p must lie in (0, 0.5]");
    if (!(fit.alpha > 0.0) || !(fit.scale > 0.0)) throw NumericalError("tolerance: non-positive Gamma parameters");
    GammaToleranceModel m;
    m.alpha_hat = fit.alpha;
    m.s_hat = fit.scale;
    m.p = p;
    m.T = gamma_quantile_upper(fit.alpha, fit.scale, p);
    m.lcnr_bound = std::sqrt(m.T);
    m.min_detectable_cnv = std::exp(m.lcnr_bound);
    return m;
}

double ToleranceFit::T(double p) const {
    if (repetitions.empty()) throw NumericalError("tolerance: no fitted repetitions");
    double sum = 0.0;
    for (const auto& f : repetitions) sum += tolerance_quantile({f.alpha, f.scale}, p).T;
    return sum / static_cast<double>(repetitions.size());
}

double ToleranceFit::T_sd(double p) const {
    std::vector<double> t;
    for (const auto& f : repetitions) t.push_back(tolerance_quantile({f.alpha, f.scale}, p).T);
    return std::sqrt(sample_variance(t));
}

GammaToleranceModel ToleranceFit::model(double p) const {
    GammaToleranceModel m;
    m.gene = gene;
    m.p = p;
    double a = 0.0, s = 0.0;
    for (const auto& f : repetitions) {
        a += f.alpha;
        s += f.scale;
    }
    const auto n = static_cast<double>(repetitions.size());
    m.alpha_hat = a / n;
    m.s_hat = s / n;
    m.T = T(p);
    m.lcnr_bound = std::sqrt(m.T);
    m.min_detectable_cnv = std::exp(m.lcnr_bound);
    m.T_sd_over_reps = T_sd(p);
    m.repetitions = repetitions.size();
    return m;
}

ToleranceFit fit_repetitions(const std::vector<ImputedCohort>& cohorts, const PseudoPriorSpec* prior) {
    if (cohorts.empty()) throw DataError("tolerance: no imputed cohorts");
    ToleranceFit out;
    out.gene = cohorts.front().gene;
    const GammaSufficient prior_stats = prior != nullptr ? prior->sufficient() : GammaSufficient{};
    for (const auto& c : cohorts) {
        GammaSufficient st;
        for (double v : c.values) st.add(v * v, 1.0);
        st.merge(prior_stats);
        out.repetitions.push_back(gamma_mle(st));
    }
    return out;
}

GammaToleranceModel pipeline_tolerance(const std::vector<ImputedCohort>& cohorts, const PseudoPriorSpec* prior,
                                       double p) {
    if (cohorts.empty()) throw DataError("tolerance: no imputed cohorts");
    ToleranceFit fit;
    fit.gene = cohorts.front().gene;
    for (const auto& c : cohorts) {
        LossSet losses = squared_losses(c);
        if (prior != nullptr) losses = attach_pseudo_prior(losses, *prior);
        fit.repetitions.push_back(gamma_mle_weighted(losses));
    }
    return fit.model(p);
}

std::size_t ToleranceConfig::imputed_count(std::size_t K) const {
    if (m) {
        if (*m + 3 > K) throw DataError("tolerance: m leaves fewer than three retained values");
        return *m;
    }
    return imputation_count(K, m_frac);
}

ToleranceFit fit_gene(std::span<const double> mu_hat, const ToleranceConfig& config, const PseudoPriorSpec* prior,
                      std::uint64_t seed, const std::string& gene) {
    const std::size_t m = config.imputed_count(mu_hat.size());
    const std::size_t reps = m == 0 ? 1 : config.repetitions;
    auto fit = fit_repetitions(impute_repetitions(mu_hat, m, reps, seed, gene), prior);
    fit.gene = gene;
    return fit;
}

}  // namespace ampcal
