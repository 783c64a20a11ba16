#pragma once

#include <Eigen/Sparse>
#include <Eigen/SparseLU>

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>
#include <vector>

#include "hestonhjb/assembly.hpp"
#include "hestonhjb/model.hpp"

namespace hestonhjb {

enum class SolveMode { Sup, Inf, Fixed };

struct SolverConfig {
    double howard_tol = 1e-10;
    int max_howard_iterations = 100;
    double linear_tol = 1e-11;  // residual inf-norm per solve, relative to |rhs|
};

// Backward-in-time trajectory of the nodal values w on the transformed
// domain, together with the control selected at every node and step.
// times runs from T down to 0.
struct ValueSurface {
    SolveMode mode = SolveMode::Fixed;
    double fixed_lambda = 0.0;
    std::vector<double> times;
    std::vector<Eigen::VectorXd> values;
    std::vector<Eigen::VectorXd> controls;
    std::vector<int> howard_iterations;  // per backward step

    const Eigen::VectorXd& at_time_zero() const { return values.back(); }

    std::size_t time_index(double t, double tol = 1e-9) const {
        for (std::size_t k = 0; k < times.size(); ++k)
            if (std::abs(times[k] - t) <= tol) return k;
        throw std::invalid_argument("time " + std::to_string(t) + " is not in the trajectory");
    }
};

// Per-node argmax (Sup) or argmin (Inf) over the control discretization,
// ties broken toward lambda_min (the scan starts there and switches only on
// strict improvement).
inline std::vector<int> howard_select(const std::vector<Eigen::VectorXd>& residuals,
                                      SolveMode mode) {
    if (residuals.empty()) throw std::invalid_argument("no control values");
    const auto n = residuals.front().size();
    std::vector<int> choice(static_cast<std::size_t>(n), 0);
    for (Eigen::Index i = 0; i < n; ++i) {
        int best = 0;
        double best_val = residuals[0][i];
        for (std::size_t k = 1; k < residuals.size(); ++k) {
            double v = residuals[k][i];
            bool better = mode == SolveMode::Inf ? v < best_val : v > best_val;
            if (better) {
                best = static_cast<int>(k);
                best_val = v;
            }
        }
        choice[static_cast<std::size_t>(i)] = best;
    }
    return choice;
}

namespace detail {

// Direct sparse solver with a residual contract: each solve must reach
// |Ax-b|_inf <= tol * |b|_inf (one step of iterative refinement is allowed).
class PolicySolver {
  public:
    PolicySolver(const DiscreteOperator& op, double dt, double linear_tol)
        : op_(op), dt_(dt), tol_(linear_tol) {
        if (op.base.nonZeros() != op.lambda_part.nonZeros())
            throw std::invalid_argument("operator parts have mismatched sparsity patterns");
        system_ = op.base;  // fixes the sparsity pattern
    }

    void set_policy(const std::vector<double>& lambda_per_node) {
        if (have_policy_ && lambda_per_node == policy_) return;
        policy_ = lambda_per_node;
        const int n = op_.n;
        const auto* outer = op_.base.outerIndexPtr();
        const double* bv = op_.base.valuePtr();
        const double* lv = op_.lambda_part.valuePtr();
        const auto* inner = op_.base.innerIndexPtr();
        double* sv = system_.valuePtr();
        for (int row = 0; row < n; ++row) {
            double lam = policy_[static_cast<std::size_t>(row)];
            double mdt = op_.mass[row] / dt_;
            for (auto k = outer[row]; k < outer[row + 1]; ++k) {
                sv[k] = bv[k] + lam * lv[k];
                if (inner[k] == row) sv[k] += mdt;
            }
        }
        col_system_ = system_;
        if (!analyzed_) {
            lu_.analyzePattern(col_system_);
            analyzed_ = true;
        }
        lu_.factorize(col_system_);
        if (lu_.info() != Eigen::Success)
            throw std::runtime_error("sparse factorization failed (singular system)");
        have_policy_ = true;
    }

    Eigen::VectorXd solve(const Eigen::VectorXd& rhs) const {
        Eigen::VectorXd x = lu_.solve(rhs);
        double bound = tol_ * std::max(rhs.lpNorm<Eigen::Infinity>(), 1e-30);
        Eigen::VectorXd res = rhs - col_system_ * x;
        if (res.lpNorm<Eigen::Infinity>() > bound) {
            x += lu_.solve(res);
            res = rhs - col_system_ * x;
            if (res.lpNorm<Eigen::Infinity>() > bound)
                throw std::runtime_error("linear solve residual above contract");
        }
        return x;
    }

    const DiscreteOperator::Sparse& system() const { return system_; }

  private:
    const DiscreteOperator& op_;
    double dt_;
    double tol_;
    DiscreteOperator::Sparse system_;
    Eigen::SparseMatrix<double> col_system_;
    Eigen::SparseLU<Eigen::SparseMatrix<double>> lu_;
    std::vector<double> policy_;
    bool have_policy_ = false;
    bool analyzed_ = false;
};

inline ValueSurface run_backward(const DiscreteOperator& op, const std::vector<double>& points,
                                 int steps, SolveMode mode, double fixed_lambda,
                                 const SolverConfig& cfg) {
    if (steps < 1) throw std::invalid_argument("steps must be positive");
    const int n = op.n;
    const double T = op.params.T;
    const double dt = T / steps;

    ValueSurface surf;
    surf.mode = mode;
    surf.fixed_lambda = fixed_lambda;
    surf.times.resize(static_cast<std::size_t>(steps) + 1);
    for (int k = 0; k <= steps; ++k)
        surf.times[static_cast<std::size_t>(k)] = T - dt * k;
    surf.times.back() = 0.0;
    surf.values.reserve(surf.times.size());
    surf.controls.reserve(surf.times.size());
    surf.values.push_back(op.terminal);
    surf.controls.emplace_back();  // placeholder, filled after the first step
    surf.howard_iterations.reserve(static_cast<std::size_t>(steps));

    PolicySolver solver(op, dt, cfg.linear_tol);
    std::vector<double> policy(static_cast<std::size_t>(n),
                               mode == SolveMode::Fixed ? fixed_lambda : points.front());
    std::vector<Eigen::VectorXd> residuals(points.size());

    Eigen::VectorXd w = op.terminal;
    for (int step = 1; step <= steps; ++step) {
      try {
        Eigen::VectorXd rhs_step = op.rhs + (op.mass.array() / dt * w.array()).matrix();

        if (mode == SolveMode::Fixed || points.size() == 1) {
            if (mode != SolveMode::Fixed) {
                std::fill(policy.begin(), policy.end(), points.front());
            }
            solver.set_policy(policy);
            w = solver.solve(rhs_step);
            surf.howard_iterations.push_back(1);
        } else {
            Eigen::VectorXd iterate = w;
            std::vector<double> prev_policy;
            int iter = 0;
            double residual_norm = std::numeric_limits<double>::infinity();
            for (; iter < cfg.max_howard_iterations; ++iter) {
                // residual of the implicit system, rhs-minus-operator: the
                // Sup mode tracks the highest option price, so it selects the
                // control making the equation "most violated upward"
                Eigen::VectorXd p = op.rhs - op.base * iterate +
                                    (op.mass.array() / dt * (w - iterate).array()).matrix();
                Eigen::VectorXd q = -(op.lambda_part * iterate);
                for (std::size_t k = 0; k < points.size(); ++k)
                    residuals[k] = p + points[k] * q;
                std::vector<int> choice = howard_select(residuals, mode);

                residual_norm = 0.0;
                for (int i = 0; i < n; ++i)
                    residual_norm = std::max(
                        residual_norm,
                        std::abs(residuals[static_cast<std::size_t>(choice[static_cast<std::size_t>(i)])][i]));

                for (int i = 0; i < n; ++i)
                    policy[static_cast<std::size_t>(i)] = points[static_cast<std::size_t>(
                        choice[static_cast<std::size_t>(i)])];

                if ((iter > 0 && policy == prev_policy) || residual_norm < cfg.howard_tol)
                    break;
                prev_policy = policy;
                solver.set_policy(policy);
                iterate = solver.solve(rhs_step);
            }
            if (iter == cfg.max_howard_iterations)
                throw std::runtime_error("Howard iteration did not converge (residual " +
                                         std::to_string(residual_norm) + ")");
            w = iterate;
            surf.howard_iterations.push_back(iter + 1);
        }

        surf.values.push_back(w);
        surf.controls.push_back(
            Eigen::Map<const Eigen::VectorXd>(policy.data(), static_cast<Eigen::Index>(policy.size())));
      } catch (const std::runtime_error& e) {
        throw std::runtime_error(std::string(e.what()) + " at backward step " +
                                 std::to_string(step) + " (t = " +
                                 std::to_string(T - dt * step) + ")");
      }
    }

    surf.controls.front() = surf.controls[1];  // control active as t -> T
    return surf;
}

}  // namespace detail

// Linear evolution problem for one fixed control.
inline ValueSurface solve_fixed(const DiscreteOperator& op, double lambda, int steps,
                                const SolverConfig& cfg = {}) {
    if (lambda < op.control.lambda_min - 1e-12 || lambda > op.control.lambda_max + 1e-12)
        throw std::invalid_argument("lambda outside the interval the operator was built for");
    return detail::run_backward(op, {lambda}, steps, SolveMode::Fixed, lambda, cfg);
}

// Backward implicit Euler with Howard policy iteration per step. Per step:
// select the per-node control extremizing the residual of the implicit
// system over the control discretization, solve with the frozen policy,
// repeat until the policy is stationary or the residual drops below the
// Howard tolerance.
inline ValueSurface solve_hjb(const DiscreteOperator& op, const ControlInterval& control,
                              int steps, SolveMode mode, const SolverConfig& cfg = {}) {
    if (mode == SolveMode::Fixed)
        throw std::invalid_argument("use solve_fixed for a fixed control");
    if (control.lambda_min < op.control.lambda_min - 1e-12 ||
        control.lambda_max > op.control.lambda_max + 1e-12)
        throw std::invalid_argument("control set exceeds the interval the operator was built for");
    std::vector<double> points = control.points();
    return detail::run_backward(op, points, steps, mode, 0.0, cfg);
}

}  // namespace hestonhjb
