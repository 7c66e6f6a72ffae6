#pragma once

// Tail bounds for the gradient at beta* and the matching choice of tau.
//
// All probability bounds are clipped to [0, 1]. recommend_tau evaluates the
// union bound for ||grad L_n(beta*)||_inf >= alpha tau / 4.

#include "sparsist/loss.hpp"

#include <vector>

namespace sparsist {

/// 2 exp(-2 t^2 / sum_i w_i^2).
double hoeffding_tail(double t, const std::vector<double>& widths);

/// 2 exp(-t^2 / (2 (v + c t))).
double bernstein_tail(double t, double v, double c);

struct BernsteinParams {
    double v;
    double c;
};

/// Moment parameters for gamma responses with shape k and predictor floor mu.
BernsteinParams gamma_bernstein_params(double k, Index n, double mu);

/// 4 exp(-n t^2 / (128 (1 + 4 c^2)^2 kappa^2)); valid for 0 < t < 8 kappa (1 + c)^2,
/// TOutOfRange otherwise.
double subgaussian_cov_tail(double t, double c, double kappa_sigma, Index n);

/// Upper end of the window on which subgaussian_cov_tail applies.
double subgaussian_cov_window(double c, double kappa_sigma);

/// 2 exp(-n t^2 / (2 c^2)): one coordinate of (1/n) X^T W with c-sub-Gaussian noise
/// and columns of norm at most sqrt(n).
double subgaussian_tail(double t, double c, Index n);

enum class TauRate { SqrtLogPOverN, LogPOverSqrtN };

const char* tau_rate_name(TauRate r);

struct TauRecommendation {
    double tau = 0;
    TauRate rate = TauRate::SqrtLogPOverN;
    double C = 0;
    double failure_bound = 1;  ///< union bound at t = alpha tau / 4, clipped to [0, 1]
    double raw_exponent = 0;   ///< log of the unclipped bound
    bool window_ok = true;     ///< graph only: t lies inside the validity window
};

/// Graph-model inputs to the covariance tail.
struct GraphTailParams {
    double c = 1.0;
    double kappa_sigma = 1.0;
};

/// Default multiplier: 8 / alpha.
double default_tau_constant(double alpha);

/// tau = C sqrt(log p / n) (Linear, Logistic, Graph) or C log p / sqrt(n) (Gamma).
/// For the graph model p is the matrix dimension.
TauRecommendation recommend_tau(const ModelSpec& model, Index n, Index p, double alpha, double C,
                                const GraphTailParams& graph = {});

} // namespace sparsist
