#include "ampcal/inference.hpp"

#include "ampcal/errors.hpp"
#include "ampcal/rng.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <numbers>
#include <sstream>

namespace ampcal {

namespace {

struct Point {
    Eigen::VectorXd x;
    double value = 0.0;     // -log p
    Eigen::VectorXd grad;   // gradient of -log p
};

Point evaluate(const LogDensity& target, const Eigen::VectorXd& x) {
    Point p{x, 0.0, {}};
    Eigen::VectorXd g;
    p.value = -target.log_density(x, &g);
    p.grad = -g;
    return p;
}

bool finite(const Point& p) { return std::isfinite(p.value) && p.grad.allFinite(); }

Eigen::VectorXd two_loop(const Eigen::VectorXd& g, const std::deque<Eigen::VectorXd>& s,
                         const std::deque<Eigen::VectorXd>& y) {
    Eigen::VectorXd q = g;
    const std::size_t m = s.size();
    std::vector<double> alpha(m), rho(m);
    for (std::size_t i = m; i-- > 0;) {
        rho[i] = 1.0 / y[i].dot(s[i]);
        alpha[i] = rho[i] * s[i].dot(q);
        q -= alpha[i] * y[i];
    }
    if (m > 0) q *= s.back().dot(y.back()) / y.back().squaredNorm();
    for (std::size_t i = 0; i < m; ++i) {
        const double beta = rho[i] * y[i].dot(q);
        q += (alpha[i] - beta) * s[i];
    }
    return -q;
}

bool converged(const Point& p, double tol) { return p.grad.norm() < tol * (1.0 + std::abs(p.value)); }

// One damped Newton step using the finite-difference Hessian. Used when the
// line search stalls on round-off close to the optimum.
bool newton_polish(const LogDensity& target, Point& cur) {
    const Eigen::MatrixXd H = negative_hessian(target, cur.x);
    Eigen::LLT<Eigen::MatrixXd> llt(H);
    if (llt.info() != Eigen::Success) return false;
    const Eigen::VectorXd step = llt.solve(-cur.grad);
    for (double t = 1.0; t > 1e-4; t *= 0.5) {
        Point next = evaluate(target, cur.x + t * step);
        if (finite(next) && (next.value < cur.value || next.grad.norm() < cur.grad.norm())) {
            cur = std::move(next);
            return true;
        }
    }
    return false;
}

}  // namespace

MapResult maximize(const LogDensity& target, Eigen::VectorXd x0, const MapOptions& options) {
    Point cur = evaluate(target, x0);
    if (!finite(cur)) throw NumericalError("map: log density is not finite at the starting point");

    std::deque<Eigen::VectorXd> S, Y;
    std::size_t it = 0;
    std::size_t polishes = 0;
    for (; it < options.max_iterations; ++it) {
        if (converged(cur, options.grad_tol)) break;

        Eigen::VectorXd dir = S.empty() ? Eigen::VectorXd(-cur.grad / std::max(1.0, cur.grad.norm()))
                                        : two_loop(cur.grad, S, Y);
        double slope = cur.grad.dot(dir);
        if (!(slope < 0.0)) {
            S.clear();
            Y.clear();
            dir = -cur.grad / std::max(1.0, cur.grad.norm());
            slope = cur.grad.dot(dir);
        }

        bool accepted = false;
        Point next;
        for (double t = 1.0; t > 1e-20; t *= 0.5) {
            next = evaluate(target, cur.x + t * dir);
            if (finite(next) && next.value <= cur.value + 1e-4 * t * slope) {
                accepted = true;
                break;
            }
        }
        if (!accepted) {
            if (!S.empty()) {
                S.clear();
                Y.clear();
                continue;
            }
            if (polishes++ < 20 && newton_polish(target, cur)) continue;
            break;
        }

        const Eigen::VectorXd s = next.x - cur.x;
        const Eigen::VectorXd y = next.grad - cur.grad;
        if (s.dot(y) > 1e-12 * s.norm() * y.norm()) {
            S.push_back(s);
            Y.push_back(y);
            if (S.size() > options.history) {
                S.pop_front();
                Y.pop_front();
            }
        }
        cur = std::move(next);
    }

    // Round-off can leave L-BFGS just above the tolerance; Newton steps on the
    // finite-difference Hessian finish the job.
    while (!converged(cur, options.grad_tol) && polishes++ < 20) {
        if (!newton_polish(target, cur)) break;
    }

    MapResult r{cur.x, -cur.value, cur.grad.norm(), it};
    if (!converged(cur, options.grad_tol)) {
        std::ostringstream msg;
        msg << "map: no convergence after " << it << " iterations; final gradient norm " << r.grad_norm;
        throw NumericalError(msg.str());
    }
    return r;
}

Eigen::MatrixXd negative_hessian_raw(const LogDensity& target, const Eigen::VectorXd& x, double rel_step) {
    const auto d = x.size();
    Eigen::MatrixXd H(d, d);
    Eigen::VectorXd gp, gm;
    for (Eigen::Index i = 0; i < d; ++i) {
        const double h = rel_step * std::max(1.0, std::abs(x[i]));
        Eigen::VectorXd xp = x, xm = x;
        xp[i] += h;
        xm[i] -= h;
        target.log_density(xp, &gp);
        target.log_density(xm, &gm);
        H.col(i) = -(gp - gm) / (2.0 * h);
    }
    return H;
}

Eigen::MatrixXd negative_hessian(const LogDensity& target, const Eigen::VectorXd& x, double rel_step) {
    const Eigen::MatrixXd H = negative_hessian_raw(target, x, rel_step);
    return 0.5 * (H + H.transpose());
}

double laplace_log_evidence(double log_density_at_mode, const Eigen::MatrixXd& neg_hessian) {
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(neg_hessian, Eigen::EigenvaluesOnly);
    if (eig.info() != Eigen::Success) throw NumericalError("laplace: eigen-decomposition of the Hessian failed");
    const auto& ev = eig.eigenvalues();
    double log_det = 0.0;
    for (Eigen::Index i = 0; i < ev.size(); ++i) {
        if (!(ev[i] > 0.0)) {
            std::ostringstream msg;
            msg << "laplace: Hessian is not positive definite (eigenvalue " << i << " = " << ev[i] << ")";
            throw NumericalError(msg.str());
        }
        log_det += std::log(ev[i]);
    }
    const double d = static_cast<double>(neg_hessian.rows());
    return log_density_at_mode + 0.5 * d * std::log(2.0 * std::numbers::pi) - 0.5 * log_det;
}

namespace {

struct Trajectory {
    Eigen::VectorXd x;
    Eigen::VectorXd p;
    double log_p = 0.0;
    Eigen::VectorXd grad;
};

// Leapfrog integration; returns false as soon as the state stops being finite.
bool leapfrog(const LogDensity& target, Trajectory& t, double eps, std::size_t steps) {
    t.p += 0.5 * eps * t.grad;
    for (std::size_t l = 0; l < steps; ++l) {
        t.x += eps * t.p;
        t.log_p = target.log_density(t.x, &t.grad);
        if (!std::isfinite(t.log_p) || !t.grad.allFinite()) return false;
        if (l + 1 < steps) t.p += eps * t.grad;
    }
    t.p += 0.5 * eps * t.grad;
    return true;
}

Eigen::VectorXd draw_momentum(Rng& rng, Eigen::Index d) {
    Eigen::VectorXd p(d);
    for (Eigen::Index i = 0; i < d; ++i) p[i] = standard_normal(rng);
    return p;
}

double energy(const Trajectory& t) { return -t.log_p + 0.5 * t.p.squaredNorm(); }

double initial_step_size(const LogDensity& target, const Trajectory& start, Rng& rng) {
    double eps = 1.0;
    auto accept_ratio = [&](double e) {
        Trajectory t = start;
        t.p = draw_momentum(rng, start.x.size());
        const double h0 = energy(t);
        if (!leapfrog(target, t, e, 1)) return 0.0;
        const double h1 = energy(t);
        return std::isfinite(h1) ? std::exp(std::min(0.0, h0 - h1)) : 0.0;
    };
    double a = accept_ratio(eps);
    const double direction = a > 0.5 ? 1.0 : -1.0;
    for (int i = 0; i < 60; ++i) {
        if (direction > 0 ? !(a > 0.5) : !(a < 0.5)) break;
        eps *= std::pow(2.0, direction);
        a = accept_ratio(eps);
    }
    return eps;
}

}  // namespace

HmcResult hmc_sample(const LogDensity& target, const Eigen::VectorXd& init, const HmcOptions& options) {
    if (options.n_draws < 100) throw ConfigError("hmc: at least 100 draws are required");
    if (options.n_leapfrog == 0) throw ConfigError("hmc: leapfrog steps must be positive");
    const Eigen::Index d = init.size();
    Rng rng(options.seed);

    Trajectory cur{init, Eigen::VectorXd::Zero(d), 0.0, {}};
    cur.log_p = target.log_density(cur.x, &cur.grad);
    if (!std::isfinite(cur.log_p)) throw NumericalError("hmc: log density not finite at the initial point");

    double eps = initial_step_size(target, cur, rng);
    // Dual-averaging constants follow the usual NUTS defaults.
    const double mu = std::log(10.0 * eps);
    const double gamma = 0.05, t0 = 10.0, kappa = 0.75;
    double h_bar = 0.0, log_eps_bar = 0.0;

    HmcResult result;
    result.draws.resize(static_cast<Eigen::Index>(options.n_draws), d);
    std::size_t accepted = 0;

    const std::size_t total = options.n_warmup + options.n_draws;
    for (std::size_t iter = 0; iter < total; ++iter) {
        const bool warmup = iter < options.n_warmup;
        Trajectory prop = cur;
        prop.p = draw_momentum(rng, d);
        const double h0 = energy(prop);
        const bool ok = leapfrog(target, prop, eps, options.n_leapfrog);
        const double h1 = ok ? energy(prop) : std::numeric_limits<double>::infinity();
        const bool divergent = !std::isfinite(h1) || h1 - h0 > 1000.0;
        const double accept_prob = divergent ? 0.0 : std::exp(std::min(0.0, h0 - h1));
        const double u = uniform_open(rng);
        const bool accept = u < accept_prob;
        if (accept) cur = std::move(prop);

        if (warmup) {
            const double m = static_cast<double>(iter + 1);
            h_bar = (1.0 - 1.0 / (m + t0)) * h_bar + (options.target_accept - accept_prob) / (m + t0);
            const double log_eps = mu - std::sqrt(m) / gamma * h_bar;
            const double w = std::pow(m, -kappa);
            log_eps_bar = w * log_eps + (1.0 - w) * log_eps_bar;
            eps = std::exp(log_eps);
            if (iter + 1 == options.n_warmup) eps = std::exp(log_eps_bar);
        } else {
            const auto row = static_cast<Eigen::Index>(iter - options.n_warmup);
            result.draws.row(row) = cur.x.transpose();
            if (accept) ++accepted;
            if (divergent) ++result.diagnostics.divergences;
        }
    }
    auto& diag = result.diagnostics;
    diag.acceptance_rate = static_cast<double>(accepted) / static_cast<double>(options.n_draws);
    diag.step_size = eps;
    if (static_cast<double>(diag.divergences) > 0.1 * static_cast<double>(options.n_draws)) {
        std::ostringstream msg;
        msg << "divergent transitions: " << diag.divergences << " of " << options.n_draws << " draws";
        diag.warnings.push_back(msg.str());
    }
    return result;
}

Interval hpd_interval_sorted(std::span<const double> sorted, double level) {
    if (!(level > 0.0 && level < 1.0)) throw ConfigError("hpd: level must lie in (0, 1)");
    const std::size_t n = sorted.size();
    if (n < 20) throw DataError("hpd: at least 20 draws are required");
    auto k = static_cast<std::size_t>(std::ceil(level * static_cast<double>(n) - 1e-9));
    k = std::clamp<std::size_t>(k, 1, n);
    std::size_t best = 0;
    double best_width = sorted[k - 1] - sorted[0];
    for (std::size_t i = 1; i + k <= n; ++i) {
        const double w = sorted[i + k - 1] - sorted[i];
        if (w < best_width) {
            best_width = w;
            best = i;
        }
    }
    return {sorted[best], sorted[best + k - 1]};
}

Interval hpd_interval(std::span<const double> draws, double level) {
    std::vector<double> s(draws.begin(), draws.end());
    std::sort(s.begin(), s.end());
    return hpd_interval_sorted(s, level);
}

}  // namespace ampcal
