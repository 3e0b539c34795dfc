#include "ampcal/stats.hpp"

#include "ampcal/errors.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include <boost/math/distributions/gamma.hpp>
#include <boost/math/distributions/normal.hpp>
#include <boost/math/special_functions/digamma.hpp>
#include <boost/math/special_functions/erf.hpp>
#include <boost/math/special_functions/gamma.hpp>
#include <boost/math/special_functions/trigamma.hpp>

namespace ampcal {

double median(std::span<const double> values) {
    if (values.empty()) throw DataError("median of an empty sequence");
    std::vector<double> v(values.begin(), values.end());
    const std::size_t n = v.size();
    const std::size_t mid = n / 2;
    std::nth_element(v.begin(), v.begin() + mid, v.end());
    const double upper = v[mid];
    if (n % 2 == 1) return upper;
    const double lower = *std::max_element(v.begin(), v.begin() + mid);
    return 0.5 * (lower + upper);
}

double mad(std::span<const double> values, double center) {
    std::vector<double> dev(values.size());
    std::transform(values.begin(), values.end(), dev.begin(),
                   [center](double x) { return std::abs(x - center); });
    return median(dev);
}

double mean(std::span<const double> values) {
    if (values.empty()) throw DataError("mean of an empty sequence");
    return std::accumulate(values.begin(), values.end(), 0.0) / static_cast<double>(values.size());
}

double sample_variance(std::span<const double> values) {
    if (values.size() < 2) return 0.0;
    const double m = mean(values);
    double ss = 0.0;
    for (double x : values) ss += (x - m) * (x - m);
    return ss / static_cast<double>(values.size() - 1);
}

double normal_cdf(double z) { return 0.5 * boost::math::erfc(-z / std::sqrt(2.0)); }

double normal_sf(double z) { return 0.5 * boost::math::erfc(z / std::sqrt(2.0)); }

double normal_quantile(double p) {
    if (!(p > 0.0 && p < 1.0)) {
        if (p == 0.0) return -std::numeric_limits<double>::infinity();
        if (p == 1.0) return std::numeric_limits<double>::infinity();
        throw NumericalError("normal quantile requested outside [0,1]");
    }
    return -std::sqrt(2.0) * boost::math::erfc_inv(2.0 * p);
}

double gamma_quantile(double shape, double scale, double prob) {
    return scale * boost::math::gamma_p_inv(shape, prob);
}

double gamma_quantile_upper(double shape, double scale, double upper_tail) {
    return scale * boost::math::gamma_q_inv(shape, upper_tail);
}

double gamma_cdf(double shape, double scale, double x) {
    if (x <= 0.0) return 0.0;
    return boost::math::gamma_p(shape, x / scale);
}

double digamma(double x) { return boost::math::digamma(x); }

double trigamma(double x) { return boost::math::trigamma(x); }

double log_gamma(double x) { return boost::math::lgamma(x); }

std::uint64_t fnv1a64(std::string_view bytes, std::uint64_t basis) {
    std::uint64_t h = basis;
    for (unsigned char c : bytes) {
        h ^= c;
        h *= 1099511628211ull;
    }
    return h;
}

}  // namespace ampcal
