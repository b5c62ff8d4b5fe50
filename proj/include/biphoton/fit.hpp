#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <span>
#include <vector>

#include "biphoton/errors.hpp"

namespace biphoton {

/// Model callback: evaluate at (params, x), write d(value)/d(param) into
/// grad, return the value. grad has params.size() entries.
using FitModel = std::function<double(std::span<const double> params, double x,
                                      std::span<double> grad)>;

struct FitProblem {
    FitModel model;
    std::vector<double> xs;
    std::vector<double> ys;
    std::vector<double> init;
    std::vector<double> lower; // empty = unbounded
    std::vector<double> upper;

    void validate() const {
        if (!model) throw ValidationError("fit problem has no model");
        if (xs.size() != ys.size()) throw ValidationError("fit data x/y size mismatch");
        if (xs.size() < init.size()) throw ValidationError("fewer data points than parameters");
        if (!lower.empty() && lower.size() != init.size())
            throw ValidationError("bounds size mismatch");
        if (!upper.empty() && upper.size() != init.size())
            throw ValidationError("bounds size mismatch");
        for (std::size_t i = 0; i < init.size(); ++i) {
            if (!std::isfinite(init[i])) throw ValidationError("non-finite initial parameter");
            if (!lower.empty() && !upper.empty() && lower[i] > upper[i])
                throw ValidationError("bounds not ordered");
        }
        for (std::size_t i = 0; i < xs.size(); ++i)
            if (!std::isfinite(xs[i]) || !std::isfinite(ys[i]))
                throw ValidationError("non-finite fit data");
    }
};

struct FitOutcome {
    std::vector<double> params;
    double residual_norm = 0.0; // sqrt of the sum of squared residuals
    int iterations = 0;
    bool converged = false;
};

namespace detail {

// Gaussian elimination with partial pivoting on an n x n system; returns
// false when singular.
inline bool solve_linear(std::vector<double> a, std::vector<double> b, std::size_t n,
                         std::vector<double>& x) {
    for (std::size_t col = 0; col < n; ++col) {
        std::size_t pivot = col;
        double best = std::abs(a[col * n + col]);
        for (std::size_t r = col + 1; r < n; ++r) {
            const double v = std::abs(a[r * n + col]);
            if (v > best) {
                best = v;
                pivot = r;
            }
        }
        if (best == 0.0) return false;
        if (pivot != col) {
            for (std::size_t c = 0; c < n; ++c) std::swap(a[pivot * n + c], a[col * n + c]);
            std::swap(b[pivot], b[col]);
        }
        const double inv = 1.0 / a[col * n + col];
        for (std::size_t r = col + 1; r < n; ++r) {
            const double factor = a[r * n + col] * inv;
            if (factor == 0.0) continue;
            for (std::size_t c = col; c < n; ++c) a[r * n + c] -= factor * a[col * n + c];
            b[r] -= factor * b[col];
        }
    }
    x.assign(n, 0.0);
    for (std::size_t ri = n; ri-- > 0;) {
        double acc = b[ri];
        for (std::size_t c = ri + 1; c < n; ++c) acc -= a[ri * n + c] * x[c];
        x[ri] = acc / a[ri * n + ri];
    }
    return true;
}

inline void clamp_params(std::vector<double>& p, const std::vector<double>& lo,
                         const std::vector<double>& hi) {
    if (!lo.empty())
        for (std::size_t i = 0; i < p.size(); ++i) p[i] = std::max(p[i], lo[i]);
    if (!hi.empty())
        for (std::size_t i = 0; i < p.size(); ++i) p[i] = std::min(p[i], hi[i]);
}

} // namespace detail

/// Damped least squares (Levenberg-Marquardt style multiplicative damping of
/// the normal equations). Converges when the relative residual change or the
/// parameter step drops below tol; exceeding max_iterations returns
/// converged = false rather than throwing. Non-finite model output throws.
inline FitOutcome least_squares_fit(const FitProblem& problem, double tol = 1e-10,
                                    int max_iterations = 200) {
    problem.validate();
    const std::size_t np = problem.init.size();
    const std::size_t nd = problem.xs.size();

    std::vector<double> params = problem.init;
    detail::clamp_params(params, problem.lower, problem.upper);

    std::vector<double> grad(np), jt_r(np), jtj(np * np), step;
    std::vector<double> trial(np);

    auto sum_squares = [&](const std::vector<double>& p) {
        double ss = 0.0;
        for (std::size_t k = 0; k < nd; ++k) {
            const double f = problem.model(p, problem.xs[k], grad);
            if (!std::isfinite(f)) throw PipelineError("model evaluated to a non-finite value");
            const double r = f - problem.ys[k];
            ss += r * r;
        }
        return ss;
    };

    double cost = sum_squares(params);
    double lambda = 0.0; // pure Gauss-Newton until a step fails
    int iter = 0;
    bool converged = false;

    for (; iter < max_iterations; ++iter) {
        std::fill(jt_r.begin(), jt_r.end(), 0.0);
        std::fill(jtj.begin(), jtj.end(), 0.0);
        for (std::size_t k = 0; k < nd; ++k) {
            const double f = problem.model(params, problem.xs[k], grad);
            if (!std::isfinite(f)) throw PipelineError("model evaluated to a non-finite value");
            const double r = f - problem.ys[k];
            for (std::size_t i = 0; i < np; ++i) {
                if (!std::isfinite(grad[i]))
                    throw PipelineError("model gradient evaluated to a non-finite value");
                jt_r[i] += grad[i] * r;
                for (std::size_t j = i; j < np; ++j) jtj[i * np + j] += grad[i] * grad[j];
            }
        }
        for (std::size_t i = 0; i < np; ++i)
            for (std::size_t j = 0; j < i; ++j) jtj[i * np + j] = jtj[j * np + i];

        bool accepted = false;
        double step_size = 0.0;
        for (int attempt = 0; attempt < 16 && !accepted; ++attempt) {
            std::vector<double> damped = jtj;
            for (std::size_t i = 0; i < np; ++i) {
                const double d = jtj[i * np + i];
                // unused parameter directions still need a well-posed system
                damped[i * np + i] = d > 0.0 ? d * (1.0 + lambda) : std::max(lambda, 1.0);
            }
            std::vector<double> rhs(np);
            for (std::size_t i = 0; i < np; ++i) rhs[i] = -jt_r[i];
            if (!detail::solve_linear(damped, rhs, np, step)) {
                lambda = lambda == 0.0 ? 1e-3 : lambda * 10.0;
                continue;
            }
            trial = params;
            for (std::size_t i = 0; i < np; ++i) trial[i] += step[i];
            detail::clamp_params(trial, problem.lower, problem.upper);
            const double trial_cost = sum_squares(trial);
            if (trial_cost <= cost) {
                step_size = 0.0;
                for (std::size_t i = 0; i < np; ++i)
                    step_size = std::max(step_size,
                                         std::abs(trial[i] - params[i]) /
                                             (1.0 + std::abs(params[i])));
                const double drop = cost - trial_cost;
                params = trial;
                const double prev = cost;
                cost = trial_cost;
                lambda = std::max(lambda * 0.3, 1e-12);
                accepted = true;
                if (drop <= tol * std::max(prev, std::numeric_limits<double>::min()) ||
                    step_size <= tol) {
                    converged = true;
                }
            } else {
                lambda = lambda == 0.0 ? 1e-3 : lambda * 4.0;
            }
        }
        if (!accepted || converged) {
            converged = converged || !accepted; // stuck means a stationary point
            ++iter;
            break;
        }
    }

    FitOutcome out;
    out.params = params;
    out.residual_norm = std::sqrt(cost);
    out.iterations = iter;
    out.converged = converged;
    return out;
}

/// Max relative deviation between the model's analytic gradient and central
/// finite differences at one point.
inline double finite_difference_check(const FitModel& model, std::span<const double> params,
                                      double x, double step) {
    if (!(step > 0.0)) throw ValidationError("finite-difference step must be > 0");
    const std::size_t np = params.size();
    std::vector<double> analytic(np), scratch(np);
    std::vector<double> p(params.begin(), params.end());
    model(p, x, analytic);
    double worst = 0.0;
    for (std::size_t i = 0; i < np; ++i) {
        const double h = step * std::max(1.0, std::abs(p[i]));
        const double saved = p[i];
        p[i] = saved + h;
        const double fp = model(p, x, scratch);
        p[i] = saved - h;
        const double fm = model(p, x, scratch);
        p[i] = saved;
        const double numeric = (fp - fm) / (2.0 * h);
        const double scale = std::max({std::abs(analytic[i]), std::abs(numeric), 1.0});
        worst = std::max(worst, std::abs(analytic[i] - numeric) / scale);
    }
    return worst;
}

} // namespace biphoton
