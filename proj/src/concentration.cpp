#include "sparsist/concentration.hpp"

#include <algorithm>
#include <cmath>
#include <string>

namespace sparsist {

namespace {

double clip_exp(double exponent)
{
    return std::clamp(std::exp(exponent), 0.0, 1.0);
}

void require_positive(double x, const char* what)
{
    if (!(x > 0)) throw InvalidArgument(std::string(what) + " must be positive");
}

} // namespace

double hoeffding_tail(double t, const std::vector<double>& widths)
{
    require_positive(t, "t");
    double sum = 0;
    for (double w : widths) {
        if (!(w >= 0)) throw InvalidArgument("range widths must be non-negative");
        sum += w * w;
    }
    require_positive(sum, "sum of squared widths");
    return clip_exp(std::log(2.0) - 2.0 * t * t / sum);
}

double bernstein_tail(double t, double v, double c)
{
    require_positive(t, "t");
    require_positive(v, "v");
    require_positive(c, "c");
    return clip_exp(std::log(2.0) - t * t / (2.0 * (v + c * t)));
}

BernsteinParams gamma_bernstein_params(double k, Index n, double mu)
{
    require_positive(k, "k");
    require_positive(double(n), "n");
    require_positive(mu, "mu");
    const double dn = double(n);
    if (k <= 1) return {(k + 1) / (dn * mu * mu * k * k), 1.0 / (k * std::sqrt(dn) * mu)};
    return {2 * k / (dn * mu * mu), 1.0 / (std::sqrt(dn) * mu)};
}

double subgaussian_cov_window(double c, double kappa_sigma)
{
    return 8.0 * kappa_sigma * (1 + c) * (1 + c);
}

namespace {

double cov_exponent(double t, double c, double kappa_sigma, Index n)
{
    const double a = 1 + 4 * c * c;
    return -double(n) * t * t / (128.0 * a * a * kappa_sigma * kappa_sigma);
}

} // namespace

double subgaussian_cov_tail(double t, double c, double kappa_sigma, Index n)
{
    require_positive(c, "c");
    require_positive(kappa_sigma, "kappa_sigma");
    require_positive(double(n), "n");
    const double hi = subgaussian_cov_window(c, kappa_sigma);
    if (!(t > 0 && t < hi))
        throw TOutOfRange("t = " + std::to_string(t) + " is outside (0, " + std::to_string(hi) + ")");
    return clip_exp(std::log(4.0) + cov_exponent(t, c, kappa_sigma, n));
}

double subgaussian_tail(double t, double c, Index n)
{
    require_positive(t, "t");
    require_positive(c, "c");
    return clip_exp(std::log(2.0) - double(n) * t * t / (2 * c * c));
}

const char* tau_rate_name(TauRate r)
{
    return r == TauRate::SqrtLogPOverN ? "sqrt_log_p_over_n" : "log_p_over_sqrt_n";
}

double default_tau_constant(double alpha)
{
    require_positive(alpha, "alpha");
    return 8.0 / alpha;
}

TauRecommendation recommend_tau(const ModelSpec& model, Index n, Index p, double alpha, double C,
                                const GraphTailParams& graph)
{
    validate(model);
    if (n < 2 || p < 2) throw InvalidArgument("recommend_tau needs n, p >= 2");
    require_positive(C, "C");
    require_positive(alpha, "alpha");
    const double dn = double(n);
    const double logp = std::log(double(p));

    TauRecommendation r;
    r.C = C;
    const ModelKind kind = kind_of(model);
    if (kind == ModelKind::Gamma) {
        r.rate = TauRate::LogPOverSqrtN;
        r.tau = C * logp / std::sqrt(dn);
    } else {
        r.rate = TauRate::SqrtLogPOverN;
        r.tau = C * std::sqrt(logp / dn);
    }

    const double t = alpha * r.tau / 4.0;
    switch (kind) {
    case ModelKind::Linear: {
        const double c = std::get<LinearModel>(model).c;
        r.raw_exponent = std::log(2.0 * p) - dn * t * t / (2 * c * c);
        break;
    }
    case ModelKind::Logistic: r.raw_exponent = std::log(2.0 * p) - 2 * dn * t * t; break;
    case ModelKind::Gamma: {
        const auto& g = std::get<GammaModel>(model);
        const auto bp = gamma_bernstein_params(g.k, n, g.mu);
        r.raw_exponent = std::log(2.0 * p) - t * t / (2 * (bp.v + bp.c * t));
        break;
    }
    case ModelKind::GraphSelect: {
        require_positive(graph.c, "c");
        require_positive(graph.kappa_sigma, "kappa_sigma");
        r.window_ok = t < subgaussian_cov_window(graph.c, graph.kappa_sigma);
        r.raw_exponent = std::log(4.0 * double(p) * double(p)) + cov_exponent(t, graph.c, graph.kappa_sigma, n);
        break;
    }
    }
    r.failure_bound = r.window_ok ? clip_exp(r.raw_exponent) : 1.0;
    return r;
}

} // namespace sparsist
