#pragma once

// Central finite differences used as independent derivative oracles.

#include "sparsist/loss.hpp"

namespace sparsist::testing {

inline double step_for(const VectorXd& beta, const VectorXd& u)
{
    return 1e-5 * (1.0 + beta.norm()) / (1.0 + u.norm());
}

inline VectorXd fd_gradient(const Oracle& f, const VectorXd& beta)
{
    const Index p = beta.size();
    VectorXd g(p);
    for (Index k = 0; k < p; ++k) {
        const VectorXd e = VectorXd::Unit(p, k);
        const double h = step_for(beta, e);
        g(k) = (f.value(beta + h * e) - f.value(beta - h * e)) / (2 * h);
    }
    return g;
}

/// Directional derivative of the gradient along u.
inline VectorXd fd_hessian_apply(const Oracle& f, const VectorXd& beta, const VectorXd& u)
{
    const double h = step_for(beta, u);
    return (f.gradient(beta + h * u) - f.gradient(beta - h * u)) / (2 * h);
}

/// (H(beta + h u) - H(beta - h u)) / (2h) applied to u.
inline VectorXd fd_third(const Oracle& f, const VectorXd& beta, const VectorXd& u)
{
    const double h = step_for(beta, u);
    return (f.hessian(beta + h * u) - f.hessian(beta - h * u)) * u / (2 * h);
}

inline double rel_err(const VectorXd& got, const VectorXd& want)
{
    const double scale = std::max(got.norm(), want.norm());
    if (scale == 0) return 0;
    return (got - want).norm() / scale;
}

} // namespace sparsist::testing
