#pragma once

#include <cmath>
#include <stdexcept>
#include <string>
#include <vector>

namespace hestonhjb {

// Market and model constants of the stochastic volatility dynamics,
// together with the option horizon. All rates are per unit time.
struct HestonParams {
    double r;      // risk-free rate
    double kappa;  // mean-reversion rate of the variance
    double gamma;  // long-term variance mean
    double xi;     // volatility of volatility
    double rho;    // correlation of the two Brownian drivers, in (-1,1)
    double T;      // maturity

    bool satisfies_feller() const noexcept {
        return 2.0 * kappa * gamma >= xi * xi;
    }
};

// Interval of admissible market prices of volatility risk, plus the finite
// discretization used by the policy iteration. The operator is affine in
// lambda, so two points (the endpoints) are exact; more points are kept
// only as a cross-check knob.
struct ControlInterval {
    double lambda_min;
    double lambda_max;
    int n_points = 2;

    bool singleton() const noexcept { return lambda_min == lambda_max; }

    // Uniformly spaced values including both endpoints, deduplicated.
    std::vector<double> points() const {
        if (lambda_min == lambda_max) return {lambda_min};
        std::vector<double> p;
        p.reserve(static_cast<std::size_t>(n_points));
        for (int k = 0; k < n_points; ++k) {
            double t = static_cast<double>(k) / static_cast<double>(n_points - 1);
            p.push_back(lambda_min + t * (lambda_max - lambda_min));
        }
        p.back() = lambda_max;  // no rounding drift at the top end
        return p;
    }
};

// Price/variance rectangle the PDE is posed on after truncation.
struct TruncatedDomain {
    double s_min;
    double s_max;
    double v_max;
};

struct ValidatedProblem {
    HestonParams params;
    TruncatedDomain domain;
    ControlInterval control;
    std::vector<std::string> warnings;
};

// Checks every structural invariant and returns the triple unchanged.
// The first violated invariant is reported by name. The Feller condition
// is a warning only: the PDE solver does not need it, but the Monte Carlo
// oracle's truncation bias grows when it fails.
inline ValidatedProblem validate(const HestonParams& params,
                                 const TruncatedDomain& domain,
                                 const ControlInterval& control) {
    if (!(params.xi > 0.0)) throw std::invalid_argument("xi must be positive");
    if (!(params.kappa > 0.0)) throw std::invalid_argument("kappa must be positive");
    if (!(params.gamma >= 0.0)) throw std::invalid_argument("gamma must be nonnegative");
    if (!(params.T > 0.0)) throw std::invalid_argument("T must be positive");
    if (!(params.rho > -1.0 && params.rho < 1.0))
        throw std::invalid_argument("rho out of (-1,1)");
    if (!(domain.s_min > 0.0)) throw std::invalid_argument("s_min must be positive");
    if (!(domain.s_min < domain.s_max))
        throw std::invalid_argument("s_min must be below s_max");
    if (!(domain.v_max > 0.0)) throw std::invalid_argument("v_max must be positive");
    if (!(control.lambda_min <= control.lambda_max))
        throw std::invalid_argument("empty control interval");
    if (control.n_points < 2 && !control.singleton())
        throw std::invalid_argument("control discretization needs both endpoints");

    ValidatedProblem out{params, domain, control, {}};
    if (!params.satisfies_feller())
        out.warnings.push_back("Feller condition 2*kappa*gamma >= xi^2 violated");
    return out;
}

inline ValidatedProblem validate(const ValidatedProblem& p) {
    return validate(p.params, p.domain, p.control);
}

}  // namespace hestonhjb
