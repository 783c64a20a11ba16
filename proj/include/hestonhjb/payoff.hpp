#pragma once

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace hestonhjb {

enum class PayoffKind { Call, Butterfly, Straddle };

// Terminal pay-off profile Lambda(S). Piecewise linear, nonnegative,
// continuous. The asymptotic slope is the S -> infinity limit of
// dLambda/dS and feeds the far-field Neumann data.
struct Payoff {
    PayoffKind kind;
    double K;                 // strike
    double a = 0.0;           // half-width, butterfly only
    double value_at_zero;     // Lambda(0)
    double asymptotic_slope;  // lim_{S->inf} dLambda/dS

    static Payoff call(double K) {
        require_strike(K);
        return {PayoffKind::Call, K, 0.0, 0.0, 1.0};
    }

    static Payoff butterfly(double K, double a) {
        require_strike(K);
        if (!(a > 0.0 && a < K))
            throw std::invalid_argument("butterfly half-width must satisfy 0 < a < K");
        return {PayoffKind::Butterfly, K, a, 0.0, 0.0};
    }

    // |S - K|. The literal straddle formula of the source cancels to zero,
    // an evident typo, so the standard straddle is used instead.
    static Payoff straddle(double K) {
        require_strike(K);
        return {PayoffKind::Straddle, K, 0.0, K, 1.0};
    }

    double max_value(double s_max) const {
        switch (kind) {
            case PayoffKind::Call: return std::max(0.0, s_max - K);
            case PayoffKind::Butterfly: return a;
            case PayoffKind::Straddle: return std::max(K, std::abs(s_max - K));
        }
        return 0.0;
    }

  private:
    static void require_strike(double K) {
        if (!(K > 0.0)) throw std::invalid_argument("strike must be positive");
    }
};

inline double evaluate(const Payoff& p, double S) {
    auto ramp = [](double x) { return std::max(0.0, x); };
    switch (p.kind) {
        case PayoffKind::Call:
            return ramp(S - p.K);
        case PayoffKind::Butterfly:
            return ramp(S - (p.K - p.a)) - 2.0 * ramp(S - p.K) + ramp(S - (p.K + p.a));
        case PayoffKind::Straddle:
            return std::abs(S - p.K);
    }
    return 0.0;
}

// Right one-sided derivative of Lambda at S. Only boundary data at the
// domain extremes consume slopes, where the payoffs are locally linear,
// so the one-sided choice is inert; it is fixed for determinism.
inline double right_slope(const Payoff& p, double S) {
    switch (p.kind) {
        case PayoffKind::Call:
            return S >= p.K ? 1.0 : 0.0;
        case PayoffKind::Butterfly:
            if (S >= p.K + p.a) return 0.0;
            if (S >= p.K) return -1.0;
            if (S >= p.K - p.a) return 1.0;
            return 0.0;
        case PayoffKind::Straddle:
            return S >= p.K ? 1.0 : -1.0;
    }
    return 0.0;
}

// d Lambda(S(x))/dx for x = ln S, by the chain rule e^x * Lambda'(e^x).
inline double slope_in_log_coordinate(const Payoff& p, double x) {
    double S = std::exp(x);
    return S * right_slope(p, S);
}

}  // namespace hestonhjb
