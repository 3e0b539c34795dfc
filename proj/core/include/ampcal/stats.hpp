#pragma once

// Small statistical helpers shared by every module. Special functions come
// from Boost.Math; order statistics use the mean-of-middle-pair median.

#include <cstdint>
#include <span>
#include <string_view>
#include <vector>

namespace ampcal {

// Median with the even-length convention: mean of the two middle order
// statistics. Throws DataError on empty input.
double median(std::span<const double> values);

// Raw median absolute deviation about `center` (no consistency factor).
double mad(std::span<const double> values, double center);

double mean(std::span<const double> values);

// Sample variance with the n-1 denominator; 0 for fewer than two values.
double sample_variance(std::span<const double> values);

double normal_cdf(double z);
// Upper tail 1 - Phi(z), accurate for large z.
double normal_sf(double z);
double normal_quantile(double p);

// Quantile of Gamma(shape, scale) at lower-tail probability `prob`.
double gamma_quantile(double shape, double scale, double prob);
// Same quantile specified through the upper-tail probability, which keeps
// precision for tail levels such as 1 - 1e-3.
double gamma_quantile_upper(double shape, double scale, double upper_tail);
double gamma_cdf(double shape, double scale, double x);

double digamma(double x);
double trigamma(double x);
double log_gamma(double x);

// 64-bit FNV-1a; used for stable seeds and output digests.
std::uint64_t fnv1a64(std::string_view bytes, std::uint64_t basis = 14695981039346656037ull);

}  // namespace ampcal
