#pragma once

// Deterministic sufficient conditions for sign recovery.
//
// Given the true parameter, a regularization level tau and an LSSC
// certificate, check_theorem evaluates the seven conditions
//   1. an LSSC certificate (K, N) is available (and verified, if requested)
//   2. lambda_min(H_SS) > 0
//   3. alpha = 1 - ||H_{S^c,S} H_SS^{-1}||_inf > 0
//   4. beta_min > r_n
//   5. tau < lambda_min^2 alpha / (4 (alpha + 4)^2 K s)
//   6. ||grad L(beta*)||_inf <= alpha tau / 4
//   7. the ball of radius r_n around beta* lies inside N
// with H the Hessian at beta* and r_n = (alpha + 4) sqrt(s) tau / lambda_min.

#include "sparsist/lssc.hpp"

#include <array>
#include <optional>

namespace sparsist {

struct GroundTruth {
    VectorXd beta;
    Support S;
    Index s = 0;
    double beta_min = 0;

    static GroundTruth from_beta(VectorXd beta)
    {
        GroundTruth t;
        t.S = support_of(beta);
        t.s = Index(t.S.size());
        t.beta_min = t.s > 0 ? beta(t.S).cwiseAbs().minCoeff() : 0.0;
        t.beta = std::move(beta);
        return t;
    }

    Index dim() const { return beta.size(); }
};

constexpr int kConditionCount = 7;

/// alpha at or below this value counts as an irrepresentability failure; an
/// exact duplicate column gives alpha = 0 up to rounding.
constexpr double kAlphaFloor = 1e-12;

struct ConditionReport {
    double lambda_min = 0;
    std::optional<double> alpha; ///< empty when irrepresentability fails or cannot be evaluated
    double alpha_raw = 0;        ///< 1 - ||H_{S^c,S} H_SS^{-1}||_inf, even when not positive
    double r_n = 0;
    double R_n = 0;
    double tau = 0;
    double K = 0;
    Index s = 0;
    double beta_min = 0;
    double tau_bound_thm = 0;
    double tau_bound_lemB4 = 0;
    double grad_inf_norm = 0;
    bool neighborhood_ok = false;
    std::array<bool, kConditionCount> verdicts{};
    std::array<bool, kConditionCount> dependent{}; ///< not evaluable because a prerequisite failed
    bool overall = false;
};

// ---------------------------------------------------------------------------
// Building blocks
// ---------------------------------------------------------------------------

template <typename Derived>
double restricted_hessian_lambda_min(const Eigen::MatrixBase<Derived>& H, const Support& S)
{
    using Scalar = typename Derived::Scalar;
    if (S.empty()) throw EmptySupport("restricted Hessian needs a nonempty support");
    const Matrix<Scalar> hss = H(S, S);
    Eigen::SelfAdjointEigenSolver<Matrix<Scalar>> es(hss, Eigen::EigenvaluesOnly);
    return static_cast<double>(es.eigenvalues().minCoeff());
}

/// 1 - ||H_{S^c,S} H_SS^{-1}||_inf (max row sum), or 1 when S^c is empty.
template <typename Derived>
double irrepresentability_raw(const Eigen::MatrixBase<Derived>& H, const Support& S)
{
    using Scalar = typename Derived::Scalar;
    if (S.empty()) throw EmptySupport("irrepresentability needs a nonempty support");
    const Support Sc = complement(S, H.rows());
    if (Sc.empty()) return 1.0;
    const Matrix<Scalar> hss = H(S, S);
    Eigen::LDLT<Matrix<Scalar>> ldlt(hss);
    const auto d = ldlt.vectorD();
    const Scalar scale = hss.diagonal().cwiseAbs().maxCoeff();
    if (ldlt.info() != Eigen::Success || !(d.cwiseAbs().minCoeff() > Scalar(1e-14) * scale))
        throw SingularRestrictedHessian("H_SS is singular");
    // (H_{S^c,S} H_SS^{-1})^T = H_SS^{-1} H_{S,S^c}; rows of the former are columns here.
    const Matrix<Scalar> m = ldlt.solve(Matrix<Scalar>(H(S, Sc)));
    const Scalar norm = m.cwiseAbs().colwise().sum().maxCoeff();
    return 1.0 - static_cast<double>(norm);
}

/// alpha, or empty when alpha <= 0.
template <typename Derived>
std::optional<double> irrepresentability_alpha(const Eigen::MatrixBase<Derived>& H, const Support& S)
{
    const double a = irrepresentability_raw(H, S);
    if (!(a > kAlphaFloor)) return std::nullopt;
    return a;
}

struct Radii {
    double r_n;
    double R_n;
};

inline Radii radii(double alpha, double lambda_min, Index s, double tau, double K)
{
    const double r = (alpha + 4.0) * std::sqrt(double(s)) * tau / lambda_min;
    const double R = K > 0 ? 0.5 * std::sqrt(alpha * tau / K) : infinity<double>();
    return {r, R};
}

struct TauBounds {
    double thm;
    double lemB4;
};

inline TauBounds tau_upper_bounds(double alpha, double lambda_min, Index s, double K)
{
    if (!(K > 0)) return {infinity<double>(), infinity<double>()};
    const double a4 = alpha + 4.0;
    const double l2 = lambda_min * lambda_min;
    const TauBounds b{l2 * alpha / (4.0 * a4 * a4 * K * double(s)), 3.0 * l2 / (2.0 * a4 * double(s) * K)};
    if (b.thm > b.lemB4 * (1 + 1e-12)) throw std::logic_error("tau bound ordering violated");
    return b;
}

// ---------------------------------------------------------------------------
// Theorem check
// ---------------------------------------------------------------------------

template <typename Scalar>
ConditionReport check_theorem(const LossOracle<Scalar>& oracle, const GroundTruth& truth, double tau,
                              const LsscCertificate& cert, const VerificationReport* verification = nullptr)
{
    if (!(tau > 0)) throw InvalidArgument("tau must be positive");
    if (truth.dim() != oracle.dim()) throw InvalidArgument("ground truth has the wrong dimension");
    const Vector<Scalar> bstar = truth.beta.template cast<Scalar>();
    if (!oracle.in_domain(bstar)) throw DomainViolation("beta* is outside the loss domain");

    ConditionReport r;
    r.tau = tau;
    r.K = cert.K;
    r.s = truth.s;
    r.beta_min = truth.beta_min;
    r.grad_inf_norm = static_cast<double>(oracle.gradient(bstar).cwiseAbs().maxCoeff());

    auto& v = r.verdicts;
    auto& dep = r.dependent;
    v[0] = cert.K >= 0 && (verification == nullptr || verification->pass);

    const Matrix<Scalar> H = oracle.hessian(bstar);
    r.lambda_min = restricted_hessian_lambda_min(H, truth.S);
    v[1] = r.lambda_min > 0;
    if (!v[1]) {
        for (int i = 2; i < kConditionCount; ++i) dep[i] = true;
        r.alpha_raw = -infinity<double>();
        r.r_n = infinity<double>();
        r.R_n = 0;
        return r;
    }

    r.alpha_raw = irrepresentability_raw(H, truth.S);
    v[2] = r.alpha_raw > kAlphaFloor;
    if (v[2]) r.alpha = r.alpha_raw;
    if (!v[2]) {
        for (int i = 3; i < kConditionCount; ++i) dep[i] = true;
        r.r_n = infinity<double>();
        r.R_n = 0;
        const auto tb = tau_upper_bounds(1.0, r.lambda_min, truth.s, cert.K);
        r.tau_bound_thm = tb.thm;
        r.tau_bound_lemB4 = tb.lemB4;
        return r;
    }

    const double alpha = *r.alpha;
    const auto rr = radii(alpha, r.lambda_min, truth.s, tau, cert.K);
    r.r_n = rr.r_n;
    r.R_n = rr.R_n;
    const auto tb = tau_upper_bounds(alpha, r.lambda_min, truth.s, cert.K);
    r.tau_bound_thm = tb.thm;
    r.tau_bound_lemB4 = tb.lemB4;

    v[3] = truth.beta_min > r.r_n;
    v[4] = tau < r.tau_bound_thm;
    v[5] = r.grad_inf_norm <= alpha * tau / 4.0;
    r.neighborhood_ok = !cert.neighborhood.bounded() || r.r_n <= cert.neighborhood.radius;
    v[6] = r.neighborhood_ok;

    r.overall = true;
    for (bool b : v) r.overall = r.overall && b;
    return r;
}

/// Largest tau allowed by conditions 4, 5 and 7 at the given (alpha, lambda_min),
/// scaled by `fraction`. Infinite only when none of the three binds.
inline double theorem_tau(double alpha, double lambda_min, const GroundTruth& truth, double K,
                          const Neighborhood& nb, double fraction = 0.5)
{
    const double per_tau = (alpha + 4.0) * std::sqrt(double(truth.s)) / lambda_min; // r_n / tau
    double bound = tau_upper_bounds(alpha, lambda_min, truth.s, K).thm;
    bound = std::min(bound, truth.beta_min / per_tau);
    if (nb.bounded()) bound = std::min(bound, nb.radius / per_tau);
    return fraction * bound;
}

// ---------------------------------------------------------------------------
// Taylor remainder diagnostic
// ---------------------------------------------------------------------------

/// Gauss-Legendre nodes and weights on [0, 1] (Golub-Welsch).
inline std::pair<VectorXd, VectorXd> gauss_legendre01(Index m)
{
    MatrixXd J = MatrixXd::Zero(m, m);
    for (Index k = 1; k < m; ++k) {
        const double b = double(k) / std::sqrt(4.0 * double(k) * double(k) - 1.0);
        J(k, k - 1) = b;
        J(k - 1, k) = b;
    }
    Eigen::SelfAdjointEigenSolver<MatrixXd> es(J);
    VectorXd x = (es.eigenvalues().array() + 1.0) / 2.0;
    VectorXd w = es.eigenvectors().row(0).transpose().array().square(); // sums to 1 on [0, 1]
    return {x, w};
}

/// epsilon_n = int_0^1 (1 - t) D^3 L(beta* + t Delta)[Delta, Delta] dt with Delta = beta_check - beta*.
template <typename Scalar>
Vector<Scalar> taylor_remainder(const LossOracle<Scalar>& oracle, const Vector<Scalar>& beta_star,
                                const Vector<Scalar>& beta_check, Index nodes = 16)
{
    const Vector<Scalar> delta = beta_check - beta_star;
    const auto [x, w] = gauss_legendre01(nodes);
    Vector<Scalar> acc = Vector<Scalar>::Zero(beta_star.size());
    for (Index k = 0; k < nodes; ++k) {
        const Scalar t = Scalar(x(k));
        acc += Scalar(w(k)) * (Scalar(1) - t) *
               oracle.third_directional(Vector<Scalar>(beta_star + t * delta), delta);
    }
    return acc;
}

} // namespace sparsist
