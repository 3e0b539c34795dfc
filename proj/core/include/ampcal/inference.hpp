#pragma once

// Generic inference engines over a LogDensity: MAP by quasi-Newton ascent,
// finite-difference Hessians, Laplace evidence, static-path HMC and HPD
// intervals from draws.

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "ampcal/model.hpp"

namespace ampcal {

struct MapOptions {
    std::size_t max_iterations = 5000;
    // Converged when |grad| < grad_tol * (1 + |log p|).
    double grad_tol = 1e-6;
    std::size_t history = 10;
};

struct MapResult {
    Eigen::VectorXd x;
    double log_density = 0.0;
    double grad_norm = 0.0;
    std::size_t iterations = 0;
};

// L-BFGS ascent with Armijo backtracking. Throws NumericalError with the
// final gradient norm when the tolerance is not met.
MapResult maximize(const LogDensity& target, Eigen::VectorXd x0, const MapOptions& options = {});

// Hessian of -log p at x by central differences of the analytic gradient,
// step 1e-4 * max(1, |x_i|), symmetrized.
Eigen::MatrixXd negative_hessian(const LogDensity& target, const Eigen::VectorXd& x, double rel_step = 1e-4);

// Same differences without the final symmetrization.
Eigen::MatrixXd negative_hessian_raw(const LogDensity& target, const Eigen::VectorXd& x, double rel_step = 1e-4);

// log p(mode) + (d/2) log 2pi - 0.5 log det H. Throws NumericalError naming
// the offending eigenvalue when H is not positive definite.
double laplace_log_evidence(double log_density_at_mode, const Eigen::MatrixXd& neg_hessian);

struct HmcOptions {
    std::size_t n_warmup = 500;
    std::size_t n_draws = 1000;
    std::size_t n_leapfrog = 32;
    double target_accept = 0.8;
    std::uint64_t seed = 0;
};

struct HmcDiagnostics {
    double acceptance_rate = 0.0;
    std::size_t divergences = 0;
    double step_size = 0.0;
    std::vector<std::string> warnings;
};

struct HmcResult {
    Eigen::MatrixXd draws;  // n_draws x dim
    HmcDiagnostics diagnostics;
};

// Static-path HMC with an identity mass matrix; the step size is tuned by
// dual averaging during warmup and then frozen. Deterministic in `seed`.
HmcResult hmc_sample(const LogDensity& target, const Eigen::VectorXd& init, const HmcOptions& options);

struct Interval {
    double lo = 0.0;
    double hi = 0.0;
    bool contains(double v) const { return lo <= v && v <= hi; }
    double width() const { return hi - lo; }
};

// Shortest window of ceil(level * n) sorted draws; ties go to the lowest
// start. Requires at least 20 draws and level in (0, 1).
Interval hpd_interval(std::span<const double> draws, double level);
// Variant for draws that are already sorted ascending.
Interval hpd_interval_sorted(std::span<const double> sorted, double level);

}  // namespace ampcal
