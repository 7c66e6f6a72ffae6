#pragma once

// l1-regularized estimation by monotone accelerated proximal gradient.
//
// fit_l1 minimizes L(beta) + tau ||beta||_1; fit_restricted solves the same
// problem with the coordinates outside S pinned to zero. Steps that leave
// the loss domain are halved until the trial point is feasible, then the
// usual backtracking test on the quadratic model is applied.

#include "sparsist/conditions.hpp"

#include <functional>
#include <optional>

namespace sparsist {

struct SolverOptions {
    Index max_iters = 20000;
    double kkt_tol = 1e-8;
    double initial_step = 1.0;
    double backtrack = 0.5;
    double armijo = 1e-4;
    bool domain_safeguard = true;
    /// Called with every accepted iterate.
    std::function<void(const VectorXd&)> on_accept;

    void validate() const
    {
        if (max_iters < 1) throw InvalidArgument("max_iters must be >= 1");
        if (!(kkt_tol > 0) || !(initial_step > 0) || !(armijo >= 0 && armijo < 1))
            throw InvalidArgument("solver tolerances must be positive");
        if (!(backtrack > 0 && backtrack < 1)) throw InvalidArgument("backtracking factor must lie in (0, 1)");
    }
};

template <typename Scalar>
struct BasicEstimate {
    Vector<Scalar> beta;
    Index iterations = 0;
    double kkt_residual = 0;
    double objective = 0;
    bool converged = false;
};

using Estimate = BasicEstimate<double>;

/// max_i of |g_i + tau sign(b_i)| where b_i != 0 and max(0, |g_i| - tau) where b_i = 0,
/// over the coordinates in `mask` (all coordinates when `mask` is null).
template <typename Scalar>
double kkt_residual(const Vector<Scalar>& grad, const Vector<Scalar>& beta, double tau, const Support* mask = nullptr)
{
    using std::abs;
    double worst = 0;
    const auto visit = [&](Index i) {
        const double g = static_cast<double>(grad(i));
        const double r = beta(i) != Scalar(0) ? std::abs(g + tau * (beta(i) > 0 ? 1.0 : -1.0))
                                              : std::max(0.0, std::abs(g) - tau);
        worst = std::max(worst, r);
    };
    if (mask) {
        for (Index i : *mask) visit(i);
    } else {
        for (Index i = 0; i < beta.size(); ++i) visit(i);
    }
    return worst;
}

namespace detail {

template <typename Scalar>
Vector<Scalar> masked(Vector<Scalar> v, const Support* mask)
{
    if (!mask) return v;
    Vector<Scalar> out = Vector<Scalar>::Zero(v.size());
    for (Index i : *mask) out(i) = v(i);
    return out;
}

template <typename Scalar>
Vector<Scalar> symmetrize_vec(const Vector<Scalar>& v, Index d)
{
    const Matrix<Scalar> m = unvec(v, d);
    return vec(Matrix<Scalar>((m + m.transpose()) / Scalar(2)));
}

/// Least-squares point with every predictor equal to one, restricted to `mask`.
template <typename Scalar>
std::optional<Vector<Scalar>> unit_predictor_start(const LossOracle<Scalar>& oracle, const Support* mask)
{
    const Matrix<Scalar>& X = oracle.data().design();
    const Index p = X.cols();
    Support cols;
    if (mask) {
        cols = *mask;
    } else {
        for (Index j = 0; j < p; ++j) cols.push_back(j);
    }
    if (cols.empty()) return std::nullopt;
    const Matrix<Scalar> Xs = X(Eigen::all, cols);
    const Vector<Scalar> bs = Xs.colPivHouseholderQr().solve(Vector<Scalar>::Ones(X.rows()));
    Vector<Scalar> b = zero_pad(bs, cols, p);
    if (oracle.in_domain(b)) return b;

    // Indicator of the non-negative columns.
    Vector<Scalar> ind = Vector<Scalar>::Zero(p);
    for (Index j : cols)
        if (X.col(j).minCoeff() >= Scalar(0)) ind(j) = Scalar(1);
    if (oracle.in_domain(ind)) return ind;
    return std::nullopt;
}

template <typename Scalar>
Vector<Scalar> default_start(const LossOracle<Scalar>& oracle, const Support* mask)
{
    switch (oracle.kind()) {
    case ModelKind::GraphSelect: {
        const Index d = oracle.matrix_dim();
        Vector<Scalar> b = masked(Vector<Scalar>(vec(Matrix<Scalar>(Matrix<Scalar>::Identity(d, d)))), mask);
        if (!oracle.in_domain(b)) throw NoFeasibleStart("the support does not contain the diagonal");
        return b;
    }
    case ModelKind::Gamma: {
        auto b = unit_predictor_start(oracle, mask);
        if (!b) throw NoFeasibleStart("no interior point of the gamma domain was found; supply a start");
        return *b;
    }
    default: return Vector<Scalar>::Zero(oracle.dim());
    }
}

template <typename Scalar>
BasicEstimate<Scalar> proximal_solve(const LossOracle<Scalar>& oracle, double tau, const SolverOptions& opts,
                                     const Support* mask, std::optional<Vector<Scalar>> start)
{
    using std::abs;
    opts.validate();
    if (!(tau >= 0)) throw InvalidArgument("tau must be non-negative");
    const bool graph = oracle.kind() == ModelKind::GraphSelect;
    const Index d = oracle.matrix_dim();
    const Scalar t_reg = Scalar(tau);

    const auto grad_of = [&](const Vector<Scalar>& b) {
        Vector<Scalar> g = oracle.gradient(b);
        if (graph) g = symmetrize_vec(g, d);
        return masked(std::move(g), mask);
    };
    const auto penalty = [&](const Vector<Scalar>& b) { return t_reg * b.template lpNorm<1>(); };
    const auto prox = [&](const Vector<Scalar>& v, Scalar step) {
        Vector<Scalar> out = v.unaryExpr([&](Scalar x) { return soft_threshold(x, step * t_reg); });
        return masked(std::move(out), mask);
    };

    Vector<Scalar> x = start ? masked(*start, mask) : default_start(oracle, mask);
    if (graph) x = symmetrize_vec(x, d);
    if (!oracle.in_domain(x)) throw NoFeasibleStart("starting point is outside the loss domain");

    BasicEstimate<Scalar> est;
    Scalar fx_smooth = oracle.value(x);
    Scalar Fx = fx_smooth + penalty(x);
    Vector<Scalar> gx = grad_of(x);
    est.kkt_residual = kkt_residual(gx, x, tau, mask);
    if (opts.on_accept) opts.on_accept(x.template cast<double>());
    if (est.kkt_residual <= opts.kkt_tol) {
        est.beta = x;
        est.objective = static_cast<double>(Fx);
        est.converged = true;
        return est;
    }

    Vector<Scalar> y = x;
    Vector<Scalar> gy = gx;
    Scalar fy = fx_smooth;
    Scalar t_acc(1);
    Scalar step(opts.initial_step);
    const Scalar shrink(opts.backtrack);
    const Scalar decrease = Scalar(1) - Scalar(opts.armijo);
    const Scalar resolution = Scalar(64) * std::numeric_limits<Scalar>::epsilon();

    Index it = 0;
    for (; it < opts.max_iters; ++it) {
        Vector<Scalar> z, gz;
        Scalar fz(0);
        for (int bt = 0;; ++bt) {
            if (bt > 200) throw Error("line search failed to find a step");
            z = prox(Vector<Scalar>(y - step * gy), step);
            if (graph) z = symmetrize_vec(z, d);
            if (opts.domain_safeguard && !oracle.in_domain(z)) {
                step *= shrink;
                continue;
            }
            fz = oracle.value(z);
            gz = grad_of(z);
            const Vector<Scalar> dz = z - y;
            const Scalar dd = dz.squaredNorm();
            if (dd == Scalar(0)) break;
            // Local curvature along dz; the gradient form is used once the
            // function values no longer resolve the change.
            const Scalar quad = fz - fy - gy.dot(dz);
            Scalar curvature;
            if (abs(quad) > resolution * std::max(abs(fz), abs(fy)))
                curvature = Scalar(2) * quad / dd;
            else
                curvature = (gz - gy).dot(dz) / dd;
            if (curvature * step <= decrease) break;
            step *= shrink;
        }

        const Scalar Fz = fz + penalty(z);
        const bool restarted = y == x;
        const Vector<Scalar> x_prev = x;
        // A proximal step taken from x itself cannot increase the objective
        // beyond rounding, so it is always taken.
        const bool improved = Fz <= Fx || restarted;
        if (improved) {
            x = z;
            Fx = Fz;
            fx_smooth = fz;
            gx = gz;
            if (opts.on_accept) opts.on_accept(x.template cast<double>());
        }

        est.kkt_residual = kkt_residual(gx, x, tau, mask);
        if (est.kkt_residual <= opts.kkt_tol) {
            ++it;
            est.converged = true;
            break;
        }

        // Monotone acceleration; restart from x when the step did not help.
        const Scalar t_next = (Scalar(1) + std::sqrt(Scalar(1) + Scalar(4) * t_acc * t_acc)) / Scalar(2);
        Vector<Scalar> y_next = x + ((t_acc - Scalar(1)) / t_next) * (x - x_prev);
        if (improved && oracle.in_domain(y_next)) {
            y = std::move(y_next);
            t_acc = t_next;
            gy = grad_of(y);
            fy = oracle.value(y);
        } else {
            y = x;
            t_acc = Scalar(1);
            gy = gx;
            fy = fx_smooth;
        }
        step /= std::sqrt(shrink); // let the step grow back
    }

    est.beta = x;
    est.iterations = it;
    est.objective = static_cast<double>(Fx);
    return est;
}

} // namespace detail

template <typename Scalar>
BasicEstimate<Scalar> fit_l1(const LossOracle<Scalar>& oracle, double tau, const SolverOptions& opts = {},
                             std::optional<Vector<Scalar>> start = std::nullopt)
{
    return detail::proximal_solve(oracle, tau, opts, nullptr, std::move(start));
}

template <typename Scalar>
BasicEstimate<Scalar> fit_restricted(const LossOracle<Scalar>& oracle, const Support& S, double tau,
                                     const SolverOptions& opts = {}, std::optional<Vector<Scalar>> start = std::nullopt)
{
    if (S.empty() && oracle.kind() != ModelKind::Gamma && oracle.kind() != ModelKind::GraphSelect) {
        BasicEstimate<Scalar> est;
        est.beta = Vector<Scalar>::Zero(oracle.dim());
        est.objective = static_cast<double>(oracle.value(est.beta));
        est.converged = true;
        return est;
    }
    return detail::proximal_solve(oracle, tau, opts, &S, std::move(start));
}

struct WitnessResult {
    bool holds = false;
    double slack = 0; ///< tau - ||grad_{S^c}||_inf
};

template <typename Scalar>
WitnessResult witness_check(const LossOracle<Scalar>& oracle, const Vector<Scalar>& beta_check, const Support& S,
                            double tau)
{
    const Support Sc = complement(S, oracle.dim());
    double norm = 0;
    if (!Sc.empty()) {
        const Vector<Scalar> g = oracle.gradient(beta_check);
        norm = static_cast<double>(g(Sc).cwiseAbs().maxCoeff());
    }
    return {norm < tau, tau - norm};
}

struct RecoveryAssessment {
    bool support_match = false;
    bool sign_match = false;
    double l2_error = 0;
};

/// Exact support and sign comparison over `coords` (all coordinates when null).
template <typename Derived>
RecoveryAssessment recovery_assess(const Eigen::MatrixBase<Derived>& beta_hat, const GroundTruth& truth,
                                   const Support* coords = nullptr)
{
    if (beta_hat.size() != truth.dim()) throw InvalidArgument("estimate has the wrong dimension");
    RecoveryAssessment a{true, true, 0.0};
    const auto visit = [&](Index i) {
        const double h = static_cast<double>(beta_hat(i));
        const double t = truth.beta(i);
        if ((h != 0) != (t != 0)) a.support_match = false;
        if ((h > 0) != (t > 0) || (h < 0) != (t < 0)) a.sign_match = false;
    };
    if (coords) {
        for (Index i : *coords) visit(i);
    } else {
        for (Index i = 0; i < truth.dim(); ++i) visit(i);
    }
    a.l2_error = (beta_hat.template cast<double>() - truth.beta).norm();
    return a;
}

/// Off-diagonal coordinates of a row-major vectorized d x d matrix.
inline Support off_diagonal(Index d)
{
    Support s;
    for (Index i = 0; i < d; ++i)
        for (Index j = 0; j < d; ++j)
            if (i != j) s.push_back(i * d + j);
    return s;
}

/// Smallest eigenvalue of the restricted Hessian at beta_check; positive means
/// the restricted problem has a unique minimizer.
template <typename Scalar>
double restricted_curvature(const LossOracle<Scalar>& oracle, const Vector<Scalar>& beta_check, const Support& S)
{
    if (S.empty()) return infinity<double>();
    return restricted_hessian_lambda_min(oracle.hessian(beta_check), S);
}

} // namespace sparsist
