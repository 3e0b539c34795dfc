#pragma once

// Conditional order-statistic imputation of suspected CNV positives.
//
// For one gene, the K posterior means are sorted, the top m are treated as
// suspect, and a Normal is fitted robustly to the L = K - m retained values
// (median and 1.4826 * MAD). The suspects are then replaced by sorted draws
// from that Normal truncated to [t, inf), where t is the L-th order
// statistic. The correction is one-sided: nothing below t is ever changed.

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "ampcal/rng.hpp"

namespace ampcal {

// Fisher consistency factor for the MAD under normality, 1 / Phi^-1(3/4).
inline constexpr double kMadConsistency = 1.4826;

struct BulkFit {
    double xi_hat = 0.0;     // robust location
    double omega_hat = 0.0;  // robust scale, >= 0
    double threshold = 0.0;  // t = L-th order statistic
    std::size_t retained = 0;
    std::size_t imputed = 0;
};

// Requires K - m >= 3. Throws DataError otherwise.
BulkFit robust_bulk_fit(std::span<const double> mu_hat, std::size_t m);

// F^-1(F(t) + u (1 - F(t))) for F = Normal(xi_hat, omega_hat^2), evaluated
// through the upper tail for accuracy. Returns t when omega_hat == 0.
double truncated_normal_draw(const BulkFit& fit, double u);

struct ImputedCohort {
    std::string gene;
    std::vector<double> values;      // aligned with the input samples
    std::vector<bool> imputed_mask;  // true for the m replaced entries
    std::size_t repetition_id = 0;
    BulkFit fit;
    bool point_mass = false;  // omega_hat == 0; the constant t was imputed
};

// Replaces the top fit.imputed values using `fit`; the sample holding rank
// L + i receives the i-th smallest draw. Ties in rank keep input order.
ImputedCohort impute_with_fit(std::span<const double> mu_hat, const BulkFit& fit, Rng& rng);

// robust_bulk_fit followed by impute_with_fit on an Rng seeded with `seed`.
ImputedCohort impute_top_m(std::span<const double> mu_hat, std::size_t m, std::uint64_t seed);

// R independent imputations; repetition r uses
// derive_seed(seed, "impute:" + gene, {r}).
std::vector<ImputedCohort> impute_repetitions(std::span<const double> mu_hat, std::size_t m,
                                              std::size_t repetitions, std::uint64_t seed,
                                              const std::string& gene);

// ceil(frac * K), kept below K - 2 so that at least three values remain.
std::size_t imputation_count(std::size_t K, double frac);

}  // namespace ampcal
