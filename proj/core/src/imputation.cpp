#include "ampcal/imputation.hpp"

#include "ampcal/errors.hpp"
#include "ampcal/stats.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace ampcal {

namespace {

std::vector<std::size_t> rank_order(std::span<const double> v) {
    std::vector<std::size_t> order(v.size());
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return v[a] < v[b]; });
    return order;
}

}  // namespace

BulkFit robust_bulk_fit(std::span<const double> mu_hat, std::size_t m) {
    const std::size_t K = mu_hat.size();
    if (m >= K || K - m < 3)
        throw DataError("imputation: bulk too small to fit (K = " + std::to_string(K) + ", m = " + std::to_string(m) +
                        "; need K - m >= 3)");
    for (double v : mu_hat)
        if (!std::isfinite(v)) throw DataError("imputation: non-finite posterior mean");
    std::vector<double> sorted(mu_hat.begin(), mu_hat.end());
    std::sort(sorted.begin(), sorted.end());
    const std::size_t L = K - m;
    const std::span<const double> bulk(sorted.data(), L);
    BulkFit fit;
    fit.retained = L;
    fit.imputed = m;
    fit.xi_hat = median(bulk);
    fit.omega_hat = kMadConsistency * mad(bulk, fit.xi_hat);
    fit.threshold = sorted[L - 1];
    return fit;
}

double truncated_normal_draw(const BulkFit& fit, double u) {
    if (!(u >= 0.0 && u <= 1.0)) throw NumericalError("imputation: uniform draw outside [0, 1]");
    if (fit.omega_hat <= 0.0) return fit.threshold;
    const double z_t = (fit.threshold - fit.xi_hat) / fit.omega_hat;
    // Upper-tail form of F^-1(F(t) + u S(t)): the remaining tail mass is
    // S(t) (1 - u).
    const double tail = normal_sf(z_t) * (1.0 - u);
    if (tail <= 0.0) return fit.threshold;
    const double x = fit.xi_hat - fit.omega_hat * normal_quantile(tail);
    return std::max(x, fit.threshold);
}

ImputedCohort impute_with_fit(std::span<const double> mu_hat, const BulkFit& fit, Rng& rng) {
    const std::size_t K = mu_hat.size();
    if (fit.retained + fit.imputed != K) throw DataError("imputation: fit does not match the cohort size");
    ImputedCohort out;
    out.values.assign(mu_hat.begin(), mu_hat.end());
    out.imputed_mask.assign(K, false);
    out.fit = fit;
    out.point_mass = fit.imputed > 0 && fit.omega_hat <= 0.0;
    if (fit.imputed == 0) return out;

    std::vector<double> draws(fit.imputed);
    for (auto& z : draws) z = truncated_normal_draw(fit, uniform_open(rng));
    std::sort(draws.begin(), draws.end());

    const auto order = rank_order(mu_hat);
    for (std::size_t i = 0; i < fit.imputed; ++i) {
        const std::size_t sample = order[fit.retained + i];
        out.values[sample] = draws[i];
        out.imputed_mask[sample] = true;
    }
    return out;
}

ImputedCohort impute_top_m(std::span<const double> mu_hat, std::size_t m, std::uint64_t seed) {
    const BulkFit fit = robust_bulk_fit(mu_hat, m);
    Rng rng(seed);
    return impute_with_fit(mu_hat, fit, rng);
}

std::vector<ImputedCohort> impute_repetitions(std::span<const double> mu_hat, std::size_t m,
                                              std::size_t repetitions, std::uint64_t seed,
                                              const std::string& gene) {
    if (repetitions == 0) throw ConfigError("imputation: at least one repetition is required");
    const BulkFit fit = robust_bulk_fit(mu_hat, m);
    std::vector<ImputedCohort> out;
    out.reserve(repetitions);
    for (std::size_t r = 0; r < repetitions; ++r) {
        Rng rng(derive_seed(seed, "impute:" + gene, {r}));
        auto c = impute_with_fit(mu_hat, fit, rng);
        c.gene = gene;
        c.repetition_id = r;
        out.push_back(std::move(c));
    }
    return out;
}

std::size_t imputation_count(std::size_t K, double frac) {
    if (!(frac >= 0.0 && frac < 1.0)) throw ConfigError("imputation fraction must lie in [0, 1)");
    const auto m = static_cast<std::size_t>(std::ceil(frac * static_cast<double>(K) - 1e-9));
    return K >= 3 ? std::min(m, K - 3) : 0;
}

}  // namespace ampcal
