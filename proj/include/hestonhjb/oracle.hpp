#pragma once

#include <cmath>
#include <complex>
#include <cstdint>
#include <future>
#include <random>
#include <stdexcept>
#include <vector>

#include "hestonhjb/model.hpp"
#include "hestonhjb/payoff.hpp"

namespace hestonhjb {

// Monte Carlo configuration; the scheme is full-truncation Euler on
// (ln S, v). Identical (seed, cfg, params) give bit-identical estimates:
// paths are generated in fixed-size batches with per-batch generators and
// combined in batch order, independent of any parallel execution.
struct McConfig {
    std::int64_t n_paths = 100000;
    int n_steps = 100;
    std::uint64_t seed = 42;
    bool antithetic = false;
};

struct McResult {
    double price;
    double std_error;
};

namespace detail {

struct BatchSums {
    double sum = 0.0;
    double sum_sq = 0.0;
    std::int64_t count = 0;
};

inline BatchSums mc_batch(const HestonParams& p, const Payoff& payoff, double lambda,
                          double s0, double v0, const McConfig& cfg,
                          std::uint64_t batch_seed, std::int64_t batch_paths) {
    std::mt19937_64 rng(batch_seed);
    std::normal_distribution<double> normal(0.0, 1.0);
    const double dt = p.T / cfg.n_steps;
    const double sqrt_dt = std::sqrt(dt);
    const double root = std::sqrt(1.0 - p.rho * p.rho);
    const double discount = std::exp(-p.r * p.T);
    const double x0 = std::log(s0);

    BatchSums out;
    const int replicas = cfg.antithetic ? 2 : 1;
    std::vector<double> z(static_cast<std::size_t>(2 * cfg.n_steps));
    for (std::int64_t path = 0; path < batch_paths; ++path) {
        double value = 0.0;
        for (auto& zi : z) zi = normal(rng);
        for (int rep = 0; rep < replicas; ++rep) {
            double sign = rep == 0 ? 1.0 : -1.0;
            double x = x0, v = v0;
            for (int k = 0; k < cfg.n_steps; ++k) {
                double z1 = sign * z[static_cast<std::size_t>(2 * k)];
                double z2 = p.rho * z1 + root * sign * z[static_cast<std::size_t>(2 * k + 1)];
                double vp = std::max(v, 0.0);
                double sv = std::sqrt(vp);
                x += (p.r - 0.5 * vp) * dt + sv * sqrt_dt * z1;
                v += (p.kappa * (p.gamma - vp) - p.xi * lambda * sv) * dt +
                     p.xi * sv * sqrt_dt * z2;
            }
            value += discount * evaluate(payoff, std::exp(x));
        }
        value /= replicas;
        out.sum += value;
        out.sum_sq += value * value;
        out.count += 1;
    }
    return out;
}

}  // namespace detail

// Prices the discounted payoff under the lambda-adjusted risk-neutral
// dynamics: variance drift kappa*(gamma - v+) - xi*lambda*sqrt(v+), stock
// drift r, correlated increments. Negative variance excursions are handled
// by the truncation; with antithetic sampling n_paths counts paths and each
// (path, mirror) pair contributes one sample.
inline McResult mc_price(const HestonParams& p, const Payoff& payoff, double lambda,
                         double s0, double v0, const McConfig& cfg) {
    if (!(s0 > 0.0)) throw std::invalid_argument("S0 must be positive");
    if (!(v0 >= 0.0)) throw std::invalid_argument("v0 must be nonnegative");
    if (cfg.n_paths < 2 || cfg.n_steps < 1) throw std::invalid_argument("degenerate MC config");

    const std::int64_t batch_size = 8192;
    std::int64_t samples = cfg.antithetic ? cfg.n_paths / 2 : cfg.n_paths;
    std::int64_t n_batches = (samples + batch_size - 1) / batch_size;

    std::vector<std::future<detail::BatchSums>> futures;
    futures.reserve(static_cast<std::size_t>(n_batches));
    for (std::int64_t b = 0; b < n_batches; ++b) {
        std::int64_t count = std::min(batch_size, samples - b * batch_size);
        futures.push_back(std::async(std::launch::async, detail::mc_batch, p, payoff, lambda,
                                     s0, v0, cfg, cfg.seed + static_cast<std::uint64_t>(b),
                                     count));
    }
    detail::BatchSums total;
    for (auto& f : futures) {
        detail::BatchSums s = f.get();
        total.sum += s.sum;
        total.sum_sq += s.sum_sq;
        total.count += s.count;
    }
    double n = static_cast<double>(total.count);
    double mean = total.sum / n;
    double var = std::max(0.0, (total.sum_sq - total.sum * total.sum / n) / (n - 1.0));
    return {mean, std::sqrt(var / n)};
}

namespace detail {

// Adaptive Simpson with tolerance splitting and a floating-point noise
// floor on the acceptance test.
template <typename F>
double adaptive_simpson(const F& f, double a, double b, double fa, double fm, double fb,
                        double tol, int depth) {
    double m = 0.5 * (a + b);
    double lm = 0.5 * (a + m), rm = 0.5 * (m + b);
    double flm = f(lm), frm = f(rm);
    double whole = (b - a) / 6.0 * (fa + 4.0 * fm + fb);
    double left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
    double right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
    double err = std::abs(left + right - whole);
    double floor = 1e-14 * (std::abs(left) + std::abs(right) + 1e-30);
    if (err <= std::max(15.0 * tol, floor) || depth <= 0) {
        if (err > std::max(1e6 * 15.0 * tol, floor) && depth <= 0)
            throw std::runtime_error("quadrature did not converge");
        return left + right + (left + right - whole) / 15.0;
    }
    return adaptive_simpson(f, a, m, fa, flm, fm, 0.5 * tol, depth - 1) +
           adaptive_simpson(f, m, b, fm, frm, fb, 0.5 * tol, depth - 1);
}

template <typename F>
double integrate(const F& f, double a, double b, double tol) {
    double fa = f(a), fb = f(b), fm = f(0.5 * (a + b));
    return adaptive_simpson(f, a, b, fa, fm, fb, tol, 40);
}

}  // namespace detail

// Semi-closed Heston call price for the lambda = 0 risk-neutral dynamics,
// via the two-probability Fourier representation with the branch-stable
// formulation of the complex logarithm. Absolute tolerance 1e-8.
inline double heston_cf_call(const HestonParams& p, double K, double s0, double v0) {
    if (!(K > 0.0) || !(s0 > 0.0) || !(v0 >= 0.0))
        throw std::invalid_argument("bad strike/spot/variance");
    using C = std::complex<double>;
    const C i(0.0, 1.0);
    const double a = p.kappa * p.gamma;
    const double x = std::log(s0);
    const double lnK = std::log(K);
    const double T = p.T;
    const double xi2 = p.xi * p.xi;

    auto integrand = [&](int j, double phi) {
        double u = j == 1 ? 0.5 : -0.5;
        double b = j == 1 ? p.kappa - p.rho * p.xi : p.kappa;
        C iphi = i * phi;
        C beta = b - p.rho * p.xi * iphi;
        C q = 2.0 * u * iphi - phi * phi;
        C d = std::sqrt(beta * beta - xi2 * q);
        // (beta - d)/xi^2 = q/(beta + d): cancellation-free for small xi
        C ratio = q / (beta + d);
        C g = xi2 * ratio / (beta + d);
        C edt = std::exp(-d * T);
        C log_term = std::log((1.0 - g * edt) / (1.0 - g));
        C Cterm = p.r * iphi * T + a * (ratio * T - 2.0 / xi2 * log_term);
        C Dterm = ratio * (1.0 - edt) / (1.0 - g * edt);
        C f = std::exp(Cterm + Dterm * v0 + iphi * x);
        return std::real(std::exp(-iphi * lnK) * f / iphi);
    };

    const double tol = 1e-9;
    auto probability = [&](int j) {
        auto f = [&](double phi) { return integrand(j, phi); };
        double eps = 1e-6;
        double total = eps * f(0.5 * eps);  // midpoint sliver at the origin
        double lo = eps, hi = 64.0;
        for (int chunk = 0; chunk < 24; ++chunk) {
            double piece = detail::integrate(f, lo, hi, tol);
            total += piece;
            if (std::abs(piece) < 0.1 * tol && chunk > 0) break;
            lo = hi;
            hi *= 2.0;
        }
        return 0.5 + total / M_PI;
    };

    double p1 = probability(1);
    double p2 = probability(2);
    return s0 * p1 - K * std::exp(-p.r * T) * p2;
}

}  // namespace hestonhjb
